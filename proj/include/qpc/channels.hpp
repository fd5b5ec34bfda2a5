#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <array>
#include <vector>

#include "qpc/bell.hpp"
#include "qpc/rng.hpp"

namespace qpc {

/// 0 is the third party, 1..K are users, -1 is the outside attacker.
using PartyId = int;
inline constexpr PartyId kThirdParty = 0;
inline constexpr PartyId kEavesdropper = -1;

std::string party_name(PartyId id);  // "TP", "P3", "EVE"
PartyId parse_party(std::string_view name);

using ParticleId = std::uint32_t;
using ParticleSeq = std::vector<ParticleId>;

/// Owns the joint quantum state of every particle in a run. Particles are
/// grouped into clusters; a cluster's statevector covers exactly its members
/// and clusters are mutually unentangled.
class ParticleRegistry {
public:
    /// Fresh pair in the given Bell state, both halves held by `holder`.
    std::pair<ParticleId, ParticleId> prepare_bell(BellCode code, PartyId holder);
    ParticleId prepare_qubit(DecoyState state, PartyId holder);

    /// Bell-basis measurement of particles (a, b). Afterwards (a, b) form a
    /// cluster of their own in the measured Bell state.
    BellCode measure_bell(ParticleId a, ParticleId b, SeededRng& rng);
    /// Single-qubit measurement; the particle is left in the eigenstate.
    int measure_single(ParticleId p, Basis basis, SeededRng& rng);
    /// Replaces an unentangled particle's state (resending a fresh photon).
    void reset(ParticleId p, DecoyState state);

    void transfer(ParticleId p, PartyId to);
    PartyId holder(ParticleId p) const;

    /// Marks a particle consumed. Its cluster is dropped once every member is.
    void retire(ParticleId p);
    bool alive(ParticleId p) const;
    std::vector<ParticleId> live_particles() const;
    std::size_t prepared() const { return particles_.size(); }

    /// Joint state of `ids` in the given order. The ids must be the exact
    /// union of whole clusters.
    Statevector joint_state(std::span<const ParticleId> ids) const;
    std::size_t cluster_size(ParticleId p) const;

private:
    struct Cluster {
        std::array<ParticleId, Statevector::kMaxQubits> members{};
        std::uint8_t size = 0;
        bool live = false;
        std::vector<Statevector::Amplitude> amps;

        std::span<const ParticleId> ids() const { return {members.data(), size}; }
    };
    struct Particle {
        PartyId holder;
        std::uint32_t cluster;
        bool alive = true;
    };

    std::uint32_t new_cluster(std::span<const ParticleId> members, std::span<const Statevector::Amplitude> amps);
    void release(std::uint32_t id);
    Cluster& cluster(std::uint32_t id);
    const Cluster& cluster(std::uint32_t id) const;
    std::uint32_t merge(std::uint32_t a, std::uint32_t b);
    int position(const Cluster& c, ParticleId p) const;
    const Particle& at(ParticleId p) const;

    std::vector<Particle> particles_;
    std::vector<Cluster> clusters_;
    std::vector<std::uint32_t> free_;
    std::vector<Statevector::Amplitude> scratch_;
};

// ---------------------------------------------------------------------------
// Attackers

enum class AttackKind : std::uint8_t { None, InterceptResend, MeasureResend, PassiveClassical, TpBell };

std::string_view attack_name(AttackKind k);  // "none", "intercept-resend", ...
AttackKind parse_attack(std::string_view name);

struct InterceptRecord {
    ParticleId particle;
    Basis basis;
    int bit;
};

struct AttackerModel {
    AttackKind kind = AttackKind::None;
    SeededRng rng{0};
    /// Basis used by measure-resend.
    Basis fixed_basis = Basis::Z;
    std::vector<InterceptRecord> intercepted;
    /// Classical traffic seen by a passive attacker.
    std::vector<std::string> captured;
};

/// Applies an in-line attacker to one particle in flight.
void attacker_interpose(AttackerModel& model, ParticleRegistry& registry, ParticleId particle);

// ---------------------------------------------------------------------------
// Channels

/// One-way quantum link. Particles arrive once each, in send order; an
/// attacker may act on them in flight.
class QuantumChannel {
public:
    QuantumChannel(PartyId from, PartyId to, AttackerModel* attacker = nullptr)
        : from_(from), to_(to), attacker_(attacker) {}

    /// "P1-TP" style name.
    std::string name() const { return party_name(from_) + "-" + party_name(to_); }
    PartyId from() const { return from_; }
    PartyId to() const { return to_; }

    ParticleSeq transmit(ParticleRegistry& registry, const ParticleSeq& seq);
    const ParticleSeq& delivered() const { return delivered_; }

private:
    PartyId from_;
    PartyId to_;
    AttackerModel* attacker_;
    ParticleSeq delivered_;
};

/// Public broadcast medium. Append-only; every line is visible to every
/// registered observer.
class ClassicalChannel {
public:
    void publish(std::string line);
    void add_observer(std::vector<std::string>* sink) { observers_.push_back(sink); }
    const std::vector<std::string>& log() const { return log_; }

private:
    std::vector<std::string> log_;
    std::vector<std::vector<std::string>*> observers_;
};

// ---------------------------------------------------------------------------
// Decoy-photon check

struct DecoyBatch {
    std::vector<std::size_t> positions;  // strictly increasing, in the protected sequence
    std::vector<DecoyState> states;
    std::vector<ParticleId> particles;

    std::size_t size() const { return positions.size(); }
};

struct ProtectedSequence {
    ParticleSeq sequence;
    DecoyBatch batch;
};

/// Inserts n random decoys at uniformly random slots.
ProtectedSequence decoy_insert(ParticleRegistry& registry, PartyId holder, const ParticleSeq& seq,
                               std::size_t n_decoys, SeededRng& rng);

/// Receiver measures each decoy in the announced basis.
std::vector<int> decoy_measure(ParticleRegistry& registry, const DecoyBatch& batch, SeededRng& rng);

/// Fraction of decoys whose reported bit differs from the prepared one.
/// Throws std::invalid_argument on a length mismatch. Empty batch -> 0.
double decoy_verify(const DecoyBatch& batch, std::span<const int> receiver_results);

/// Removes the given (sorted) positions from a sequence.
ParticleSeq strip_positions(const ParticleSeq& seq, std::span<const std::size_t> positions);

// ---------------------------------------------------------------------------
// Sample Bell-pair check

struct CheckPairBatch {
    std::vector<std::size_t> positions;  // same in both sequences
    std::vector<ParticleId> retained;
    std::vector<ParticleId> transmitted;

    std::size_t size() const { return positions.size(); }
};

struct CheckedSequences {
    ParticleSeq first;   // retained sequence with check halves
    ParticleSeq second;  // transmitted sequence with check halves
    CheckPairBatch batch;
};

/// Inserts n fresh phi+ pairs, first halves into s1 and second halves into
/// s2 at identical positions. Requires |s1| == |s2|.
CheckedSequences bellpair_insert(ParticleRegistry& registry, PartyId holder, const ParticleSeq& s1,
                                 const ParticleSeq& s2, std::size_t n_checks, SeededRng& rng);

struct BellPairCheck {
    std::vector<Basis> bases;
    std::vector<int> retained_outcomes;
    std::vector<int> transmitted_outcomes;
    std::size_t errors = 0;
    double error_rate = 0.0;
};

/// Both holders measure every check pair in a shared uniformly random Z/X
/// basis; the error rate is the anticorrelated fraction. `check_rng` draws
/// the bases, `quantum_rng` the outcomes.
BellPairCheck bellpair_verify(ParticleRegistry& registry, const CheckPairBatch& batch, SeededRng& check_rng,
                              SeededRng& quantum_rng);

}  // namespace qpc
