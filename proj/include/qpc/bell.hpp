#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qpc/rng.hpp"

namespace qpc {

/// Two-bit value. The tag keeps Bell codes and input groups from mixing
/// silently; mask() is the one sanctioned crossing.
template <class Tag>
class Bits2 {
public:
    constexpr Bits2() = default;
    constexpr explicit Bits2(unsigned v) : v_(static_cast<std::uint8_t>(v)) {
        if (v > 3) throw std::invalid_argument("two-bit value out of range");
    }
    static constexpr Bits2 from_bits(unsigned hi, unsigned lo) { return Bits2((hi & 1u) << 1 | (lo & 1u)); }

    constexpr unsigned value() const { return v_; }
    constexpr unsigned hi() const { return v_ >> 1; }
    constexpr unsigned lo() const { return v_ & 1u; }

    std::string str() const { return {static_cast<char>('0' + hi()), static_cast<char>('0' + lo())}; }

    static Bits2 parse(std::string_view s) {
        if (s.size() != 2 || (s[0] != '0' && s[0] != '1') || (s[1] != '0' && s[1] != '1'))
            throw std::invalid_argument("expected a two-bit string, got '" + std::string(s) + "'");
        return from_bits(s[0] - '0', s[1] - '0');
    }

    friend constexpr Bits2 operator^(Bits2 a, Bits2 b) { return Bits2(a.v_ ^ b.v_); }
    Bits2& operator^=(Bits2 o) { v_ ^= o.v_; return *this; }
    friend constexpr bool operator==(Bits2, Bits2) = default;
    friend constexpr auto operator<=>(Bits2, Bits2) = default;

private:
    std::uint8_t v_ = 0;
};

struct BellCodeTag {};
struct GroupTag {};
using BellCode = Bits2<BellCodeTag>;
using TwoBits = Bits2<GroupTag>;

enum class BellLabel : std::uint8_t { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

inline constexpr std::array<BellLabel, 4> kBellLabels = {BellLabel::PhiPlus, BellLabel::PhiMinus,
                                                         BellLabel::PsiPlus, BellLabel::PsiMinus};

/// Label -> code table. The default is the fixed protocol coding
/// phi+ 00, phi- 01, psi+ 10, psi- 11; alternatives exist only so table
/// verification can be run against a deliberately wrong coding.
struct BellCoding {
    std::array<BellCode, 4> codes{BellCode(0), BellCode(1), BellCode(2), BellCode(3)};

    BellCode code(BellLabel l) const { return codes[static_cast<std::size_t>(l)]; }
    BellLabel label(BellCode c) const;
    /// Throws if the table is not a permutation of the four codes.
    void validate() const;
};

BellCode code_of(BellLabel label);
BellLabel label_of(BellCode code);
std::string_view label_name(BellLabel label);  // "phi+", "phi-", "psi+", "psi-"
BellLabel parse_label(std::string_view name);

/// Code of the unmeasured cross pair after a Bell measurement with outcome
/// m on one particle of each source pair (codes a and b).
constexpr BellCode swap_collapse(BellCode a, BellCode b, BellCode m) { return a ^ b ^ m; }

struct SwapSample {
    BellCode measured;
    BellCode collapsed;
};
SwapSample swap_sample(BellCode a, BellCode b, SeededRng& rng);

// ---------------------------------------------------------------------------
// Statevector oracle

/// Pure state over 1..8 qubits. Qubit 1 is the leftmost tensor factor, which
/// is the most significant bit of the basis index.
class Statevector {
public:
    using Amplitude = std::complex<double>;
    static constexpr int kMaxQubits = 8;
    static constexpr double kNormTolerance = 1e-12;

    /// |0...0> on n qubits.
    explicit Statevector(int num_qubits);
    /// Throws std::invalid_argument on a size mismatch or a non-normalized vector.
    Statevector(int num_qubits, std::vector<Amplitude> amplitudes);

    static Statevector bell(BellCode code);
    static Statevector bell(BellLabel label) { return bell(code_of(label)); }

    int num_qubits() const { return num_qubits_; }
    std::span<const Amplitude> amplitudes() const { return amps_; }
    const Amplitude& operator[](std::size_t i) const { return amps_[i]; }

    double norm_squared() const;
    bool is_normalized(double tol = kNormTolerance) const;

    /// this (x) other; this occupies the leading qubits.
    Statevector tensor(const Statevector& other) const;
    /// Reorders qubits: result qubit i is this qubit order[i] (0-based).
    Statevector permuted(std::span<const int> order) const;
    /// |<this|other>|^2.
    double fidelity(const Statevector& other) const;
    /// Rotates the global phase so the first nonzero amplitude is real positive.
    void normalize_phase();

private:
    int num_qubits_;
    std::vector<Amplitude> amps_;
};

/// Outcome of projecting two qubits of a state onto one Bell state.
struct PairProjection {
    BellCode code;
    double probability = 0.0;
    /// Remaining qubits in their original relative order, normalized and
    /// phase-fixed. Empty when probability is zero or no qubits remain.
    std::vector<Statevector::Amplitude> residual;
};

/// Projections of qubits (q1, q2) (0-based) onto all four Bell states.
std::array<PairProjection, 4> project_bell_pair(std::span<const Statevector::Amplitude> amps, int num_qubits,
                                                int q1, int q2);

/// Code of a two-qubit state that equals a Bell state up to global phase
/// within tol on fidelity, or nothing.
std::optional<BellCode> identify_bell(const Statevector& pair, double tol = 1e-9);

struct SwapOutcome {
    BellCode measured;   // outcome on qubits (1,4)
    BellCode collapsed;  // Bell identity of residual (3,2)
    double probability;
};

class ConventionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Full statevector computation of |a>_12 (x) |b>_34, Bell measurement on
/// (1,4). Throws ConventionError if a residual is not a Bell state.
std::vector<SwapOutcome> oracle_swap_distribution(BellCode a, BellCode b);

struct BellMeasurement {
    BellCode code;
    Statevector state;
};

/// Bell-basis measurement of a two-qubit state. A Bell eigenstate is
/// reported deterministically and returned unchanged.
BellMeasurement bell_measure_pure(const Statevector& pair, SeededRng& rng);

// ---------------------------------------------------------------------------
// Single-photon decoys

enum class Basis : std::uint8_t { Z, X };

char basis_char(Basis b);
Basis parse_basis(char c);

class DecoyState {
public:
    enum class Label : std::uint8_t { Z0, Z1, XPlus, XMinus };

    constexpr DecoyState() = default;
    constexpr explicit DecoyState(Label l) : label_(l) {}
    static constexpr DecoyState eigenstate(Basis b, int bit) {
        if (b == Basis::Z) return DecoyState(bit ? Label::Z1 : Label::Z0);
        return DecoyState(bit ? Label::XMinus : Label::XPlus);
    }

    constexpr Label label() const { return label_; }
    constexpr Basis basis() const { return (label_ == Label::Z0 || label_ == Label::Z1) ? Basis::Z : Basis::X; }
    /// 0 for |0> and |+>, 1 for |1> and |->.
    constexpr int bit() const { return (label_ == Label::Z1 || label_ == Label::XMinus) ? 1 : 0; }

    Statevector vector() const;
    std::string_view name() const;  // "0", "1", "+", "-"

    friend constexpr bool operator==(DecoyState, DecoyState) = default;

private:
    Label label_ = Label::Z0;
};

/// Matching basis gives the encoded bit; a mismatched basis gives a uniform bit.
int measure_decoy(DecoyState state, Basis basis, SeededRng& rng);

/// Samples index i with probability probs[i]. Outcomes below 1e-14 are never
/// chosen and a single certain outcome consumes no randomness.
std::size_t sample_outcome(std::span<const double> probs, SeededRng& rng);

}  // namespace qpc
