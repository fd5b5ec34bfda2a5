#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qpc/bell.hpp"
#include "qpc/protocol.hpp"

namespace qpc {

// ---------------------------------------------------------------------------
// Per-group relation tables

/// One row of the two-party relation table: fixed G_A, one measurement pair
/// and one G_B choice. Codes in the r_* fields follow the coding under test;
/// the TP label is always the physical swap result.
struct RelationRow {
    TwoBits g_a, g_b;
    BellLabel m_a, m_b, m_t;
    BellCode r_a, r_b, r_t;
    TwoBits combined;  // (R_A^G_A)^(R_B^G_B)
    int score = 0;     // group_score(combined, r_t)
};

/// All 16 measurement pairs x 4 G_B values (64 rows, grouped by measurement
/// pair in reference order). TP's label comes from the statevector oracle.
std::vector<RelationRow> relation_table(TwoBits g_a, const BellCoding& coding = {});

using GroupPair = std::pair<TwoBits, TwoBits>;

/// (G_A, G_B) pairs consistent with a group score, by enumeration over all
/// groups and measurement outcomes. Throws std::invalid_argument if a pair
/// maps to different scores under different outcomes.
std::vector<GroupPair> candidate_sets(int score, const BellCoding& coding = {});

/// Same enumeration for hashed groups in the three-user chain: every pair
/// comparison (1,2), (2,3), (1,3) and every code triple. Returns the union
/// of pairs seen with the given score across the three comparisons.
std::vector<GroupPair> chain_candidate_sets(int score);

/// log2(12) - log2 |candidate_sets(score)|: shrinkage of TP's uncertainty
/// among the 12 unequal group pairs. Throws std::domain_error for score 0.
double leaked_bits(int score);

/// I((G_A,G_B); score) under a uniform prior on the 16 pairs.
double score_mutual_information();

struct ExecutionCount {
    long long pairwise_min;
    long long pairwise_max;
    long long this_protocol;
};
/// Throws std::invalid_argument for K < 2.
ExecutionCount execution_count(long long k);

// ---------------------------------------------------------------------------
// Self-verification

struct VerifyCheck {
    std::string name;
    bool passed = false;
    std::vector<std::string> diffs;
};

VerifyCheck verify_relation_table(const BellCoding& coding = {});
VerifyCheck verify_candidate_table(const BellCoding& coding = {});
VerifyCheck verify_chain_candidate_table();
VerifyCheck verify_swap_oracle();
VerifyCheck verify_leakage_constants();
/// Every check above, in order.
std::vector<VerifyCheck> verify_all(const BellCoding& coding = {});

// ---------------------------------------------------------------------------
// Observer views

enum class SymbolStatus { Exact, Partial, Unknown };
std::string_view symbol_status_name(SymbolStatus s);

struct SymbolView {
    std::string name;  // "G2", "R1"
    SymbolStatus status = SymbolStatus::Unknown;
    /// Per group; nullopt where not determined.
    std::vector<std::optional<TwoBits>> groups;
};

struct Relation {
    std::vector<std::string> symbols;       // XOR of these symbols ...
    std::vector<TwoBits> value;             // ... equals this, per group
};

struct ScoreView {
    UserPair pair;
    std::vector<int> scores;
    std::vector<std::optional<double>> leaked_bits;  // null where the score is 0
};

struct ViewReport {
    std::string role;
    std::string variant;
    int k = 0;
    std::size_t groups = 0;
    std::vector<SymbolView> symbols;  // G1..GK then R1..RK
    std::vector<Relation> relations;  // known XORs of two symbols, neither known alone
    std::vector<ScoreView> scores;    // TP only
    /// Raw inputs: exact hex when the groups are raw and fully known;
    /// nullopt otherwise (always for hashed variants).
    std::vector<std::optional<std::string>> inputs;

    const SymbolView& symbol(const std::string& name) const;
    ordered_json to_json() const;
};

/// Roles: "outside", "TP", "P1".."PK". Uses only the events that role sees:
/// public classical events, plus its own measurement results and own groups
/// (users) or its own measurements and score sheets (TP). Throws ConfigError
/// on an unknown role.
ViewReport observer_view(const Transcript& transcript, const std::string& role);

/// Serialized events an observer can see; two transcripts with equal
/// observable logs are indistinguishable to it.
std::vector<std::string> observable_events(const Transcript& transcript, const std::string& role);

// ---------------------------------------------------------------------------
// Attack experiments

struct AttackReport {
    std::string variant;
    std::size_t trials = 0;
    std::size_t input_bits = 0;
    std::size_t hash_bits = 0;  // 0 for raw variants
    std::size_t detected = 0;   // runs that aborted
    std::size_t groups_recovered = 0;  // trials where every compared group of P1 was recovered exactly
    std::size_t inputs_recovered = 0;  // trials where P1's raw input was recovered exactly
    std::size_t both_recovered = 0;    // trials where P2's compared groups were recovered as well
    double chance_baseline = 0.0;      // 2^-L

    ordered_json to_json() const;
};

/// TP measures its collapsed pairs after round 1, then reads the public wire.
/// Raw variants give the inputs directly; for hashed variants TP only learns
/// digest groups and is left with a uniform guess for the raw input.
AttackReport tp_bell_attack_experiment(Variant variant, std::size_t trials, std::uint64_t seed,
                                       std::size_t input_bits = 32, std::size_t hash_bits = 128);

enum class CheckScheme { Decoy, BellPair };
CheckScheme parse_check_scheme(std::string_view name);
std::string_view check_scheme_name(CheckScheme s);

struct DetectionReport {
    std::string scheme;
    std::string attack;
    std::size_t checks = 0;  // per check batch, or total particles for per-particle runs
    std::size_t trials = 0;
    std::size_t detected = 0;
    double rate = 0.0;
    double expected = 0.0;

    ordered_json to_json() const;
};

/// Per-particle: `particles` check particles cross one attacked channel.
/// Expected error rate 1/4 for intercept-resend.
DetectionReport particle_detection_experiment(CheckScheme scheme, AttackKind attack, std::size_t particles,
                                              std::uint64_t seed);

/// Run-level: full protocol runs with c checks per transmission and the
/// attacker on the first user-facing channel. Expected abort rate
/// 1 - (3/4)^c for intercept-resend. `threads` > 1 fans trials out.
DetectionReport run_detection_experiment(CheckScheme scheme, AttackKind attack, std::size_t checks,
                                         std::size_t trials, std::uint64_t seed, unsigned threads = 1);

/// Calls fn(trial) for trial in [0, count) across `threads` workers. Each
/// trial must only touch its own slot of any shared output.
void parallel_trials(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Seed for trial i of a batch keyed by `seed`.
std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial);

}  // namespace qpc
