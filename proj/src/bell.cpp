#include "qpc/bell.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qpc {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kZeroProbability = 1e-14;

using Amp = Statevector::Amplitude;

// Amplitudes over |00>,|01>,|10>,|11> for each code under the standard coding.
constexpr std::array<std::array<double, 4>, 4> kBellVectors = {{
    {kInvSqrt2, 0.0, 0.0, kInvSqrt2},   // phi+
    {kInvSqrt2, 0.0, 0.0, -kInvSqrt2},  // phi-
    {0.0, kInvSqrt2, kInvSqrt2, 0.0},   // psi+
    {0.0, kInvSqrt2, -kInvSqrt2, 0.0},  // psi-
}};

void fix_phase(std::vector<Amp>& amps) {
    for (const Amp& a : amps) {
        if (std::abs(a) > 1e-15) {
            const Amp rot = std::conj(a) / std::abs(a);
            for (Amp& b : amps) b *= rot;
            return;
        }
    }
}

}  // namespace

BellLabel BellCoding::label(BellCode c) const {
    for (BellLabel l : kBellLabels)
        if (code(l) == c) return l;
    throw std::invalid_argument("coding has no label for code " + c.str());
}

void BellCoding::validate() const {
    unsigned seen = 0;
    for (BellCode c : codes) seen |= 1u << c.value();
    if (seen != 0xF) throw std::invalid_argument("Bell coding must be a permutation of 00,01,10,11");
}

BellCode code_of(BellLabel label) { return BellCode(static_cast<unsigned>(label)); }

BellLabel label_of(BellCode code) { return static_cast<BellLabel>(code.value()); }

std::string_view label_name(BellLabel label) {
    switch (label) {
        case BellLabel::PhiPlus: return "phi+";
        case BellLabel::PhiMinus: return "phi-";
        case BellLabel::PsiPlus: return "psi+";
        case BellLabel::PsiMinus: return "psi-";
    }
    return "?";
}

BellLabel parse_label(std::string_view name) {
    for (BellLabel l : kBellLabels)
        if (label_name(l) == name) return l;
    throw std::invalid_argument("unknown Bell label '" + std::string(name) + "' (expected phi+, phi-, psi+ or psi-)");
}

SwapSample swap_sample(BellCode a, BellCode b, SeededRng& rng) {
    const BellCode m(static_cast<unsigned>(rng.below(4)));
    return {m, swap_collapse(a, b, m)};
}

// ---------------------------------------------------------------------------

Statevector::Statevector(int num_qubits) : num_qubits_(num_qubits) {
    if (num_qubits < 1 || num_qubits > kMaxQubits)
        throw std::invalid_argument("statevector supports 1.." + std::to_string(kMaxQubits) + " qubits");
    amps_.assign(std::size_t{1} << num_qubits, Amp{0.0, 0.0});
    amps_[0] = 1.0;
}

Statevector::Statevector(int num_qubits, std::vector<Amp> amplitudes)
    : num_qubits_(num_qubits), amps_(std::move(amplitudes)) {
    if (num_qubits < 1 || num_qubits > kMaxQubits)
        throw std::invalid_argument("statevector supports 1.." + std::to_string(kMaxQubits) + " qubits");
    if (amps_.size() != (std::size_t{1} << num_qubits))
        throw std::invalid_argument("amplitude count does not match 2^num_qubits");
    if (!is_normalized()) throw std::invalid_argument("statevector is not normalized");
}

Statevector Statevector::bell(BellCode code) {
    const auto& v = kBellVectors[code.value()];
    return Statevector(2, {v[0], v[1], v[2], v[3]});
}

double Statevector::norm_squared() const {
    double s = 0.0;
    for (const Amp& a : amps_) s += std::norm(a);
    return s;
}

bool Statevector::is_normalized(double tol) const { return std::abs(norm_squared() - 1.0) <= tol; }

Statevector Statevector::tensor(const Statevector& other) const {
    const int n = num_qubits_ + other.num_qubits_;
    if (n > kMaxQubits) throw std::invalid_argument("tensor product exceeds the qubit cap");
    std::vector<Amp> out;
    out.reserve(amps_.size() * other.amps_.size());
    for (const Amp& a : amps_)
        for (const Amp& b : other.amps_) out.push_back(a * b);
    Statevector s(n);
    s.amps_ = std::move(out);
    return s;
}

Statevector Statevector::permuted(std::span<const int> order) const {
    const int n = num_qubits_;
    if (static_cast<int>(order.size()) != n) throw std::invalid_argument("permutation size mismatch");
    std::vector<Amp> out(amps_.size());
    for (std::size_t idx = 0; idx < amps_.size(); ++idx) {
        std::size_t src = 0;
        for (int i = 0; i < n; ++i) {
            const std::size_t bit = (idx >> (n - 1 - i)) & 1u;
            src |= bit << (n - 1 - order[i]);
        }
        out[idx] = amps_[src];
    }
    Statevector s(n);
    s.amps_ = std::move(out);
    return s;
}

double Statevector::fidelity(const Statevector& other) const {
    if (other.num_qubits_ != num_qubits_) throw std::invalid_argument("fidelity of states with different sizes");
    Amp ip{0.0, 0.0};
    for (std::size_t i = 0; i < amps_.size(); ++i) ip += std::conj(amps_[i]) * other.amps_[i];
    return std::norm(ip);
}

void Statevector::normalize_phase() { fix_phase(amps_); }

// ---------------------------------------------------------------------------

std::array<PairProjection, 4> project_bell_pair(std::span<const Amp> amps, int num_qubits, int q1, int q2) {
    if (q1 == q2 || q1 < 0 || q2 < 0 || q1 >= num_qubits || q2 >= num_qubits)
        throw std::invalid_argument("invalid qubit pair for Bell projection");
    const int rest_n = num_qubits - 2;
    std::array<int, Statevector::kMaxQubits> rest{};
    for (int q = 0, i = 0; q < num_qubits; ++q)
        if (q != q1 && q != q2) rest[static_cast<std::size_t>(i++)] = q;
    const int s1 = num_qubits - 1 - q1;
    const int s2 = num_qubits - 1 - q2;
    const std::size_t rest_dim = std::size_t{1} << rest_n;

    std::array<PairProjection, 4> out;
    for (unsigned c = 0; c < 4; ++c) {
        out[c].code = BellCode(c);
        out[c].residual.assign(rest_dim, Amp{0.0, 0.0});
    }
    for (std::size_t r = 0; r < rest_dim; ++r) {
        std::size_t base = 0;
        for (int i = 0; i < rest_n; ++i) {
            const std::size_t bit = (r >> (rest_n - 1 - i)) & 1u;
            base |= bit << (num_qubits - 1 - rest[i]);
        }
        std::array<Amp, 4> pair_amps;
        for (unsigned xy = 0; xy < 4; ++xy) {
            const std::size_t idx = base | (std::size_t{xy >> 1} << s1) | (std::size_t{xy & 1u} << s2);
            pair_amps[xy] = amps[idx];
        }
        for (unsigned c = 0; c < 4; ++c) {
            Amp acc{0.0, 0.0};
            for (unsigned xy = 0; xy < 4; ++xy) acc += kBellVectors[c][xy] * pair_amps[xy];
            out[c].residual[r] = acc;
        }
    }
    for (auto& p : out) {
        double prob = 0.0;
        for (const Amp& a : p.residual) prob += std::norm(a);
        p.probability = prob;
        if (prob <= kZeroProbability || rest_n == 0) {
            p.residual.clear();
            continue;
        }
        const double scale = 1.0 / std::sqrt(prob);
        for (Amp& a : p.residual) a *= scale;
        fix_phase(p.residual);
    }
    return out;
}

std::optional<BellCode> identify_bell(const Statevector& pair, double tol) {
    if (pair.num_qubits() != 2) return std::nullopt;
    for (unsigned c = 0; c < 4; ++c)
        if (pair.fidelity(Statevector::bell(BellCode(c))) >= 1.0 - tol) return BellCode(c);
    return std::nullopt;
}

std::vector<SwapOutcome> oracle_swap_distribution(BellCode a, BellCode b) {
    const Statevector joint = Statevector::bell(a).tensor(Statevector::bell(b));
    const auto proj = project_bell_pair(joint.amplitudes(), 4, 0, 3);
    std::vector<SwapOutcome> out;
    for (const auto& p : proj) {
        if (p.probability <= kZeroProbability) continue;
        // Residual is ordered (2,3); report the pair as (3,2).
        const Statevector residual(2, p.residual);
        const std::array<int, 2> order{1, 0};
        const Statevector swapped = residual.permuted(order);
        const auto n = identify_bell(swapped);
        if (!n) throw ConventionError("residual of swap outcome " + p.code.str() + " is not a Bell state");
        out.push_back({p.code, *n, p.probability});
    }
    return out;
}

BellMeasurement bell_measure_pure(const Statevector& pair, SeededRng& rng) {
    if (pair.num_qubits() != 2) throw std::invalid_argument("Bell measurement needs a two-qubit state");
    if (!pair.is_normalized()) throw std::invalid_argument("Bell measurement of a non-normalized state");
    if (auto c = identify_bell(pair)) return {*c, pair};
    const auto proj = project_bell_pair(pair.amplitudes(), 2, 0, 1);
    std::array<double, 4> probs{};
    for (unsigned c = 0; c < 4; ++c) probs[c] = proj[c].probability;
    const BellCode code(static_cast<unsigned>(sample_outcome(probs, rng)));
    return {code, Statevector::bell(code)};
}

// ---------------------------------------------------------------------------

char basis_char(Basis b) { return b == Basis::Z ? 'Z' : 'X'; }

Basis parse_basis(char c) {
    if (c == 'Z') return Basis::Z;
    if (c == 'X') return Basis::X;
    throw std::invalid_argument(std::string("unknown basis '") + c + "'");
}

Statevector DecoyState::vector() const {
    switch (label_) {
        case Label::Z0: return Statevector(1, {1.0, 0.0});
        case Label::Z1: return Statevector(1, {0.0, 1.0});
        case Label::XPlus: return Statevector(1, {kInvSqrt2, kInvSqrt2});
        case Label::XMinus: return Statevector(1, {kInvSqrt2, -kInvSqrt2});
    }
    return Statevector(1);
}

std::string_view DecoyState::name() const {
    switch (label_) {
        case Label::Z0: return "0";
        case Label::Z1: return "1";
        case Label::XPlus: return "+";
        case Label::XMinus: return "-";
    }
    return "?";
}

int measure_decoy(DecoyState state, Basis basis, SeededRng& rng) {
    if (state.basis() == basis) return state.bit();
    return rng.bit() ? 1 : 0;
}

std::size_t sample_outcome(std::span<const double> probs, SeededRng& rng) {
    double total = 0.0;
    std::size_t live = 0, last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > kZeroProbability) {
            total += probs[i];
            ++live;
            last = i;
        }
    }
    if (live == 0) throw std::invalid_argument("no outcome has nonzero probability");
    if (live == 1) return last;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= kZeroProbability) continue;
        acc += probs[i];
        if (u < acc) return i;
    }
    return last;
}

}  // namespace qpc
