#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qpc/bell.hpp"
#include "qpc/channels.hpp"
#include "qpc/classical.hpp"

namespace qpc {

using ordered_json = nlohmann::ordered_json;

enum class Variant : std::uint8_t {
    Lwc2,    // two-party, raw inputs, no transmission checks
    Llcll2,  // two-party, raw inputs, decoy-photon checks
    Hash2,   // two-party, hashed inputs, decoy checks (optional)
    Three,   // three-party chain, hashed, sample Bell-pair checks
    Multi,   // K-party chain, hashed, sample Bell-pair checks
};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct AttackSpec {
    AttackKind kind = AttackKind::None;
    /// Quantum channel the in-line attacker sits on ("P1-TP", "TP-P2", ...), or "*" for all.
    std::string channel = "*";
};

struct ProtocolParams {
    static constexpr int kMaxUsers = 64;

    Variant variant = Variant::Hash2;
    int k = 2;
    std::size_t input_bits = 8;   // L
    std::size_t hash_bits = 128;  // N, hashed variants only
    std::uint64_t seed = 0;
    /// Check particles per quantum transmission; defaults to the group count.
    std::optional<std::size_t> check_count;
    /// Decoy checks for hash2 (llcll2 always has them, lwc2 never).
    bool decoys = true;
    AttackSpec attack;

    /// Throws ConfigError naming the offending setting.
    void validate() const;

    bool hashed() const { return variant == Variant::Hash2 || variant == Variant::Three || variant == Variant::Multi; }
    bool chain() const { return variant == Variant::Three || variant == Variant::Multi; }
    bool uses_decoys() const { return variant == Variant::Llcll2 || (variant == Variant::Hash2 && decoys); }
    std::size_t compared_bits() const { return hashed() ? hash_bits : input_bits; }
    std::size_t groups() const { return group_count(compared_bits()); }
    std::size_t checks() const;
    std::string check_scheme() const;  // "none", "decoy", "bellpair"
    /// Names of every quantum channel the variant uses.
    std::vector<std::string> channel_names() const;
};

enum class Verdict : std::uint8_t { Equal, Unequal };
std::string_view verdict_name(Verdict v);

using UserPair = std::pair<int, int>;  // (m, k), 1-based, m < k

struct PairwiseResults {
    int k = 0;
    std::map<UserPair, int> totals;
    std::map<UserPair, Verdict> verdicts;

    bool complete() const { return totals.size() == static_cast<std::size_t>(k * (k - 1) / 2); }
    std::optional<Verdict> verdict(int m, int n) const;
    /// {"k":..,"pairs":[..],"totals":KxK,"verdicts":KxK}; diagonal and
    /// unpublished entries are null.
    ordered_json to_json() const;
};

/// Line-delimited JSON event log. The first line is the header.
struct Transcript {
    static constexpr std::string_view kSchema = "qpc-transcript/1";

    ordered_json header;
    std::vector<ordered_json> events;

    std::string to_jsonl() const;
    static Transcript from_jsonl(std::string_view text);
    /// Serialized classical (public) events, in order.
    std::vector<std::string> classical_lines() const;
};

/// check_announce, check_outcomes, check_result, abort and classical_send
/// are public; everything else is private to its actor.
bool is_classical_event(const ordered_json& event);

struct CheckSummary {
    std::string channel;
    std::string scheme;
    std::size_t checked = 0;
    std::size_t errors = 0;
    double error_rate = 0.0;
    bool passed = true;
};

/// Ground-truth values kept for tests; never serialized.
struct RunTrace {
    std::vector<GroupSeq> groups;                  // [user-1]
    std::vector<std::vector<BellCode>> user_codes;  // [user-1][group]
    std::vector<std::vector<BellCode>> tp_codes;    // [round-2][group]
    std::vector<BellCode> tp_attack_codes;          // TP's extra measurement after round 1
    std::size_t particles_prepared = 0;
};

struct RunOutcome {
    PairwiseResults results;
    Transcript transcript;
    bool aborted = false;
    std::string abort_channel;
    std::vector<CheckSummary> checks;
    RunTrace trace;
    AttackerModel attacker;
};

struct RunOptions {
    /// Skip building the transcript (bulk sweeps). Protocol logic is unchanged.
    bool record = true;
};

/// Dispatches on params.variant. `inputs` must hold K values of L bits.
RunOutcome run_protocol(const ProtocolParams& params, const HashConfig& hash, std::span<const SecretInput> inputs,
                        RunOptions options = {});

RunOutcome run_two_party_lwc(ProtocolParams params, const SecretInput& x, const SecretInput& y,
                             RunOptions options = {});
RunOutcome run_two_party_llcll(ProtocolParams params, const SecretInput& x, const SecretInput& y,
                               RunOptions options = {});
RunOutcome run_two_party_hash(ProtocolParams params, const HashConfig& hash, const SecretInput& x,
                              const SecretInput& y, RunOptions options = {});
RunOutcome run_three_party(ProtocolParams params, const HashConfig& hash, const SecretInput& x, const SecretInput& y,
                           const SecretInput& z, RunOptions options = {});
RunOutcome run_multi_party(ProtocolParams params, const HashConfig& hash, std::span<const SecretInput> inputs,
                           RunOptions options = {});

/// Runs a variant on already-grouped values (digest groups for hashed
/// variants, raw groups otherwise). Each group sequence has params.groups()
/// entries. The header records the groups instead of inputs.
RunOutcome run_with_groups(const ProtocolParams& params, std::span<const GroupSeq> groups, RunOptions options = {});

class ReplayDivergence : public std::runtime_error {
public:
    ReplayDivergence(std::string what, std::size_t line) : std::runtime_error(std::move(what)), line_(line) {}
    /// 0-based JSONL line of the first difference.
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Parameters recorded in a transcript header.
ProtocolParams params_from_header(const ordered_json& header);

/// Re-executes the run described by the header and returns the new transcript.
/// Throws ConfigError on a malformed header.
Transcript replay(const Transcript& transcript);

/// Replays and compares byte for byte; throws ReplayDivergence on mismatch.
void verify_replay(const Transcript& transcript);

/// Checks that the only user-originated data values on the wire are the
/// permitted kinds and that each matches the run's secrets. Returns
/// violations; empty means the transcript conforms.
std::vector<std::string> validate_transcript(const Transcript& transcript);

}  // namespace qpc
