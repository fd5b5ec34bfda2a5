#include "qpc/channels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qpc {

using Amp = Statevector::Amplitude;

std::string party_name(PartyId id) {
    if (id == kThirdParty) return "TP";
    if (id == kEavesdropper) return "EVE";
    return "P" + std::to_string(id);
}

PartyId parse_party(std::string_view name) {
    if (name == "TP") return kThirdParty;
    if (name == "EVE") return kEavesdropper;
    if (name.size() >= 2 && name[0] == 'P') {
        int v = 0;
        for (char c : name.substr(1)) {
            if (c < '0' || c > '9') throw std::invalid_argument("bad party name '" + std::string(name) + "'");
            v = v * 10 + (c - '0');
            if (v > 1'000'000) throw std::invalid_argument("bad party name '" + std::string(name) + "'");
        }
        if (v >= 1) return v;
    }
    throw std::invalid_argument("bad party name '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

const ParticleRegistry::Particle& ParticleRegistry::at(ParticleId p) const {
    if (p >= particles_.size()) throw std::out_of_range("unknown particle id");
    return particles_[p];
}

std::uint32_t ParticleRegistry::new_cluster(std::span<const ParticleId> members, std::span<const Amp> amps) {
    std::uint32_t id;
    if (!free_.empty()) {
        id = free_.back();
        free_.pop_back();
    } else {
        id = static_cast<std::uint32_t>(clusters_.size());
        clusters_.emplace_back();
    }
    Cluster& c = clusters_[id];
    c.size = static_cast<std::uint8_t>(members.size());
    std::copy(members.begin(), members.end(), c.members.begin());
    c.amps.assign(amps.begin(), amps.end());
    c.live = true;
    for (ParticleId p : members) particles_[p].cluster = id;
    return id;
}

void ParticleRegistry::release(std::uint32_t id) {
    clusters_[id].live = false;
    free_.push_back(id);
}

ParticleRegistry::Cluster& ParticleRegistry::cluster(std::uint32_t id) {
    if (id >= clusters_.size() || !clusters_[id].live) throw std::logic_error("stale cluster id");
    return clusters_[id];
}

const ParticleRegistry::Cluster& ParticleRegistry::cluster(std::uint32_t id) const {
    if (id >= clusters_.size() || !clusters_[id].live) throw std::logic_error("stale cluster id");
    return clusters_[id];
}

int ParticleRegistry::position(const Cluster& c, ParticleId p) const {
    const auto ids = c.ids();
    const auto it = std::find(ids.begin(), ids.end(), p);
    if (it == ids.end()) throw std::logic_error("particle missing from its cluster");
    return static_cast<int>(it - ids.begin());
}

std::uint32_t ParticleRegistry::merge(std::uint32_t a, std::uint32_t b) {
    if (a == b) return a;
    const Cluster& ca = cluster(a);
    const Cluster& cb = cluster(b);
    if (ca.size + cb.size > Statevector::kMaxQubits)
        throw std::runtime_error("entangled cluster would exceed the statevector qubit cap");
    scratch_.clear();
    for (const Amp& x : ca.amps)
        for (const Amp& y : cb.amps) scratch_.push_back(x * y);
    std::array<ParticleId, Statevector::kMaxQubits> members{};
    std::size_t n = 0;
    for (ParticleId p : ca.ids()) members[n++] = p;
    for (ParticleId p : cb.ids()) members[n++] = p;
    release(a);
    release(b);
    return new_cluster({members.data(), n}, scratch_);
}

namespace {

std::span<const Amp> bell_amplitudes(BellCode code) {
    static const std::array<std::vector<Amp>, 4> table = [] {
        std::array<std::vector<Amp>, 4> t;
        for (unsigned i = 0; i < 4; ++i) {
            const Statevector v = Statevector::bell(BellCode(i));
            t[i].assign(v.amplitudes().begin(), v.amplitudes().end());
        }
        return t;
    }();
    return table[code.value()];
}

std::span<const Amp> decoy_amplitudes(DecoyState state) {
    static const std::array<std::vector<Amp>, 4> table = [] {
        std::array<std::vector<Amp>, 4> t;
        for (unsigned i = 0; i < 4; ++i) {
            const Statevector v = DecoyState(static_cast<DecoyState::Label>(i)).vector();
            t[i].assign(v.amplitudes().begin(), v.amplitudes().end());
        }
        return t;
    }();
    return table[static_cast<std::size_t>(state.label())];
}

}  // namespace

std::pair<ParticleId, ParticleId> ParticleRegistry::prepare_bell(BellCode code, PartyId holder) {
    const auto a = static_cast<ParticleId>(particles_.size());
    particles_.push_back({holder, 0});
    particles_.push_back({holder, 0});
    const ParticleId ids[] = {a, a + 1};
    new_cluster(ids, bell_amplitudes(code));
    return {a, a + 1};
}

ParticleId ParticleRegistry::prepare_qubit(DecoyState state, PartyId holder) {
    const auto p = static_cast<ParticleId>(particles_.size());
    particles_.push_back({holder, 0});
    const ParticleId ids[] = {p};
    new_cluster(ids, decoy_amplitudes(state));
    return p;
}

BellCode ParticleRegistry::measure_bell(ParticleId a, ParticleId b, SeededRng& rng) {
    if (!alive(a) || !alive(b)) throw std::logic_error("measuring a retired particle");
    if (a == b) throw std::invalid_argument("Bell measurement needs two distinct particles");
    const std::uint32_t cid = merge(particles_[a].cluster, particles_[b].cluster);
    const Cluster& c = cluster(cid);
    const int n = c.size;
    const int qa = position(c, a), qb = position(c, b);
    const auto proj = project_bell_pair(c.amps, n, qa, qb);
    std::array<double, 4> probs{};
    for (std::size_t i = 0; i < 4; ++i) probs[i] = proj[i].probability;
    const std::size_t outcome = sample_outcome(probs, rng);
    const BellCode code = proj[outcome].code;

    std::array<ParticleId, Statevector::kMaxQubits> rest{};
    std::size_t nrest = 0;
    for (ParticleId p : c.ids())
        if (p != a && p != b) rest[nrest++] = p;
    release(cid);
    if (nrest > 0) new_cluster({rest.data(), nrest}, proj[outcome].residual);
    const ParticleId pair[] = {a, b};
    new_cluster(pair, bell_amplitudes(code));
    return code;
}

int ParticleRegistry::measure_single(ParticleId p, Basis basis, SeededRng& rng) {
    if (!alive(p)) throw std::logic_error("measuring a retired particle");
    const std::uint32_t cid = particles_[p].cluster;
    const Cluster& c = cluster(cid);
    const int n = c.size;
    const int q = position(c, p);
    const int shift = n - 1 - q;
    const std::size_t dim = c.amps.size();
    const std::size_t rest_dim = dim / 2;

    // Residual amplitudes for outcome 0 and 1, indexed over the other qubits.
    thread_local std::array<std::vector<Amp>, 2> residual;
    residual[0].resize(rest_dim);
    residual[1].resize(rest_dim);
    const double s = 0.70710678118654752440;
    for (std::size_t r = 0; r < rest_dim; ++r) {
        const std::size_t high = (r >> shift) << (shift + 1);
        const std::size_t low = r & ((std::size_t{1} << shift) - 1);
        const Amp a0 = c.amps[high | low];
        const Amp a1 = c.amps[high | (std::size_t{1} << shift) | low];
        if (basis == Basis::Z) {
            residual[0][r] = a0;
            residual[1][r] = a1;
        } else {
            residual[0][r] = s * (a0 + a1);
            residual[1][r] = s * (a0 - a1);
        }
    }
    std::array<double, 2> probs{};
    for (int o = 0; o < 2; ++o)
        for (std::size_t r = 0; r < rest_dim; ++r) probs[o] += std::norm(residual[o][r]);
    const int bit = static_cast<int>(sample_outcome(probs, rng));

    std::array<ParticleId, Statevector::kMaxQubits> rest{};
    std::size_t nrest = 0;
    for (ParticleId m : c.ids())
        if (m != p) rest[nrest++] = m;
    release(cid);
    if (nrest > 0) {
        auto& amps = residual[bit];
        const double scale = 1.0 / std::sqrt(probs[bit]);
        for (std::size_t r = 0; r < rest_dim; ++r) amps[r] *= scale;
        // Global phase: first nonzero amplitude real positive.
        for (std::size_t r = 0; r < rest_dim; ++r)
            if (std::abs(amps[r]) > 1e-15) {
                const Amp rot = std::conj(amps[r]) / std::abs(amps[r]);
                for (std::size_t i = 0; i < rest_dim; ++i) amps[i] *= rot;
                break;
            }
        new_cluster({rest.data(), nrest}, {amps.data(), rest_dim});
    }
    const ParticleId self[] = {p};
    new_cluster(self, decoy_amplitudes(DecoyState::eigenstate(basis, bit)));
    return bit;
}

void ParticleRegistry::reset(ParticleId p, DecoyState state) {
    if (!alive(p)) throw std::logic_error("resetting a retired particle");
    Cluster& c = cluster(particles_[p].cluster);
    if (c.size != 1) throw std::logic_error("can only reset an unentangled particle");
    const auto v = decoy_amplitudes(state);
    c.amps.assign(v.begin(), v.end());
}

void ParticleRegistry::transfer(ParticleId p, PartyId to) {
    if (!alive(p)) throw std::logic_error("transferring a retired particle");
    particles_[p].holder = to;
}

PartyId ParticleRegistry::holder(ParticleId p) const { return at(p).holder; }

void ParticleRegistry::retire(ParticleId p) {
    if (!at(p).alive) return;
    particles_[p].alive = false;
    const std::uint32_t cid = particles_[p].cluster;
    const auto ids = cluster(cid).ids();
    const bool all_gone = std::none_of(ids.begin(), ids.end(), [&](ParticleId m) { return particles_[m].alive; });
    if (all_gone) release(cid);
}

bool ParticleRegistry::alive(ParticleId p) const { return at(p).alive; }

std::vector<ParticleId> ParticleRegistry::live_particles() const {
    std::vector<ParticleId> out;
    for (ParticleId p = 0; p < particles_.size(); ++p)
        if (particles_[p].alive) out.push_back(p);
    return out;
}

std::size_t ParticleRegistry::cluster_size(ParticleId p) const {
    if (!alive(p)) return 0;
    return cluster(at(p).cluster).size;
}

Statevector ParticleRegistry::joint_state(std::span<const ParticleId> ids) const {
    // Collect whole clusters in first-appearance order, then permute.
    std::vector<std::uint32_t> order;
    for (ParticleId p : ids) {
        if (!alive(p)) throw std::invalid_argument("joint_state of a retired particle");
        const std::uint32_t cid = particles_[p].cluster;
        if (std::find(order.begin(), order.end(), cid) == order.end()) order.push_back(cid);
    }
    std::vector<ParticleId> members;
    std::vector<Amp> amps{Amp{1.0, 0.0}};
    for (std::uint32_t cid : order) {
        const Cluster& c = cluster(cid);
        std::vector<Amp> next;
        next.reserve(amps.size() * c.amps.size());
        for (const Amp& x : amps)
            for (const Amp& y : c.amps) next.push_back(x * y);
        amps = std::move(next);
        members.insert(members.end(), c.ids().begin(), c.ids().end());
    }
    if (members.size() != ids.size())
        throw std::invalid_argument("requested particles do not cover whole clusters");
    Statevector joint(static_cast<int>(members.size()), std::move(amps));
    std::vector<int> perm;
    for (ParticleId p : ids)
        perm.push_back(static_cast<int>(std::find(members.begin(), members.end(), p) - members.begin()));
    return joint.permuted(perm);
}

// ---------------------------------------------------------------------------

std::string_view attack_name(AttackKind k) {
    switch (k) {
        case AttackKind::None: return "none";
        case AttackKind::InterceptResend: return "intercept-resend";
        case AttackKind::MeasureResend: return "measure-resend";
        case AttackKind::PassiveClassical: return "passive";
        case AttackKind::TpBell: return "tp-bell";
    }
    return "?";
}

AttackKind parse_attack(std::string_view name) {
    for (AttackKind k : {AttackKind::None, AttackKind::InterceptResend, AttackKind::MeasureResend,
                         AttackKind::PassiveClassical, AttackKind::TpBell})
        if (attack_name(k) == name) return k;
    throw std::invalid_argument("unknown attack '" + std::string(name) + "'");
}

void attacker_interpose(AttackerModel& model, ParticleRegistry& registry, ParticleId particle) {
    switch (model.kind) {
        case AttackKind::InterceptResend: {
            const Basis b = model.rng.bit() ? Basis::X : Basis::Z;
            const int bit = registry.measure_single(particle, b, model.rng);
            model.intercepted.push_back({particle, b, bit});
            registry.reset(particle, DecoyState::eigenstate(b, bit));
            break;
        }
        case AttackKind::MeasureResend: {
            const int bit = registry.measure_single(particle, model.fixed_basis, model.rng);
            model.intercepted.push_back({particle, model.fixed_basis, bit});
            break;
        }
        case AttackKind::None:
        case AttackKind::PassiveClassical:
        case AttackKind::TpBell:
            break;
    }
}

ParticleSeq QuantumChannel::transmit(ParticleRegistry& registry, const ParticleSeq& seq) {
    for (ParticleId p : seq) {
        if (registry.holder(p) != from_)
            throw std::logic_error("particle sent on " + name() + " is not held by the sender");
        if (attacker_ != nullptr) attacker_interpose(*attacker_, registry, p);
        registry.transfer(p, to_);
        delivered_.push_back(p);
    }
    return seq;
}

void ClassicalChannel::publish(std::string line) {
    for (auto* sink : observers_) sink->push_back(line);
    log_.push_back(std::move(line));
}

// ---------------------------------------------------------------------------

namespace {

/// k distinct slots out of n, sorted.
std::vector<std::size_t> choose_slots(std::size_t n, std::size_t k, SeededRng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

ParticleSeq interleave(const ParticleSeq& host, std::span<const std::size_t> positions,
                       std::span<const ParticleId> inserted) {
    ParticleSeq out;
    out.reserve(host.size() + inserted.size());
    std::size_t h = 0, k = 0;
    for (std::size_t slot = 0; slot < host.size() + inserted.size(); ++slot) {
        if (k < positions.size() && positions[k] == slot)
            out.push_back(inserted[k++]);
        else
            out.push_back(host[h++]);
    }
    return out;
}

}  // namespace

ProtectedSequence decoy_insert(ParticleRegistry& registry, PartyId holder, const ParticleSeq& seq,
                               std::size_t n_decoys, SeededRng& rng) {
    ProtectedSequence out;
    out.batch.positions = choose_slots(seq.size() + n_decoys, n_decoys, rng);
    for (std::size_t i = 0; i < n_decoys; ++i) {
        const DecoyState s(static_cast<DecoyState::Label>(rng.below(4)));
        out.batch.states.push_back(s);
        out.batch.particles.push_back(registry.prepare_qubit(s, holder));
    }
    out.sequence = interleave(seq, out.batch.positions, out.batch.particles);
    return out;
}

std::vector<int> decoy_measure(ParticleRegistry& registry, const DecoyBatch& batch, SeededRng& rng) {
    std::vector<int> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
        out.push_back(registry.measure_single(batch.particles[i], batch.states[i].basis(), rng));
    return out;
}

double decoy_verify(const DecoyBatch& batch, std::span<const int> receiver_results) {
    if (receiver_results.size() != batch.states.size())
        throw std::invalid_argument("decoy result count does not match the batch");
    if (batch.states.empty()) return 0.0;
    std::size_t errors = 0;
    for (std::size_t i = 0; i < batch.states.size(); ++i)
        if (receiver_results[i] != batch.states[i].bit()) ++errors;
    return static_cast<double>(errors) / static_cast<double>(batch.states.size());
}

ParticleSeq strip_positions(const ParticleSeq& seq, std::span<const std::size_t> positions) {
    ParticleSeq out;
    out.reserve(seq.size() - std::min(seq.size(), positions.size()));
    std::size_t k = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (k < positions.size() && positions[k] == i) {
            ++k;
            continue;
        }
        out.push_back(seq[i]);
    }
    return out;
}

CheckedSequences bellpair_insert(ParticleRegistry& registry, PartyId holder, const ParticleSeq& s1,
                                 const ParticleSeq& s2, std::size_t n_checks, SeededRng& rng) {
    if (s1.size() != s2.size()) throw std::invalid_argument("bellpair_insert needs sequences of equal length");
    CheckedSequences out;
    out.batch.positions = choose_slots(s1.size() + n_checks, n_checks, rng);
    for (std::size_t i = 0; i < n_checks; ++i) {
        const auto [a, b] = registry.prepare_bell(BellCode(0), holder);
        out.batch.retained.push_back(a);
        out.batch.transmitted.push_back(b);
    }
    out.first = interleave(s1, out.batch.positions, out.batch.retained);
    out.second = interleave(s2, out.batch.positions, out.batch.transmitted);
    return out;
}

BellPairCheck bellpair_verify(ParticleRegistry& registry, const CheckPairBatch& batch, SeededRng& check_rng,
                              SeededRng& quantum_rng) {
    BellPairCheck out;
    for (std::size_t i = 0; i < batch.size(); ++i) out.bases.push_back(check_rng.bit() ? Basis::X : Basis::Z);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        out.transmitted_outcomes.push_back(registry.measure_single(batch.transmitted[i], out.bases[i], quantum_rng));
        out.retained_outcomes.push_back(registry.measure_single(batch.retained[i], out.bases[i], quantum_rng));
        if (out.transmitted_outcomes[i] != out.retained_outcomes[i]) ++out.errors;
    }
    out.error_rate = batch.size() == 0 ? 0.0 : static_cast<double>(out.errors) / static_cast<double>(batch.size());
    return out;
}

}  // namespace qpc
