#include "qpc/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <bitset>
#include <cmath>
#include <set>
#include <sstream>
#include <thread>

namespace qpc {

namespace {

// Frozen transcription of the published G_A = 00 relation table, keyed by the
// measurement pair. R_j and score columns list the G_B = 00/01/10/11 cases.
struct ReferenceRow {
    const char* m_a;
    const char* m_b;
    const char* r_a;
    const char* r_b;
    const char* combined;
    const char* m_t;
    const char* r_t;
    const char* scores;
};

constexpr ReferenceRow kReferenceRows[] = {
    {"phi+", "phi+", "00", "00", "00/01/10/11", "phi+", "00", "0/1/1/2"},
    {"phi+", "phi-", "00", "01", "01/00/11/10", "phi-", "01", "0/1/1/2"},
    {"phi+", "psi+", "00", "10", "10/11/00/01", "psi+", "10", "0/1/1/2"},
    {"phi+", "psi-", "00", "11", "11/10/01/00", "psi-", "11", "0/1/1/2"},
    {"phi-", "phi-", "01", "01", "00/01/10/11", "phi+", "00", "0/1/1/2"},
    {"phi-", "phi+", "01", "00", "01/00/11/10", "phi-", "01", "0/1/1/2"},
    {"phi-", "psi-", "01", "11", "10/11/00/01", "psi+", "10", "0/1/1/2"},
    {"phi-", "psi+", "01", "10", "11/10/01/00", "psi-", "11", "0/1/1/2"},
    {"psi+", "psi+", "10", "10", "00/01/10/11", "phi+", "00", "0/1/1/2"},
    {"psi+", "psi-", "10", "11", "01/00/11/10", "phi-", "01", "0/1/1/2"},
    {"psi+", "phi+", "10", "00", "10/11/00/01", "psi+", "10", "0/1/1/2"},
    {"psi+", "phi-", "10", "01", "11/10/01/00", "psi-", "11", "0/1/1/2"},
    {"psi-", "phi+", "11", "00", "11/10/01/00", "psi-", "11", "0/1/1/2"},
    {"psi-", "psi+", "11", "10", "01/00/11/10", "phi-", "01", "0/1/1/2"},
    {"psi-", "phi-", "11", "01", "10/11/00/01", "psi+", "10", "0/1/1/2"},
    {"psi-", "psi-", "11", "11", "00/01/10/11", "phi+", "00", "0/1/1/2"},
};

// Published score -> (G_A, G_B) table. Column i of each G_B pattern pairs
// with the i-th G_A value 00/01/10/11. The hashed-group table is identical.
struct ReferenceCandidates {
    int score;
    std::vector<const char*> g_b_patterns;
};

const std::vector<ReferenceCandidates>& reference_candidates() {
    static const std::vector<ReferenceCandidates> t = {
        {0, {"00/01/10/11"}},
        {1, {"01/00/11/10", "10/11/00/01"}},
        {2, {"11/10/01/00"}},
    };
    return t;
}

std::vector<std::string> split_slash(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string part;
    while (std::getline(in, part, '/')) out.push_back(part);
    return out;
}

std::set<GroupPair> reference_pairs(int score) {
    std::set<GroupPair> out;
    for (const auto& row : reference_candidates()) {
        if (row.score != score) continue;
        for (const char* pattern : row.g_b_patterns) {
            const auto g_b = split_slash(pattern);
            for (unsigned a = 0; a < 4; ++a) out.insert({TwoBits(a), TwoBits::parse(g_b[a])});
        }
    }
    return out;
}

std::string pair_str(const GroupPair& p) { return "(" + p.first.str() + "," + p.second.str() + ")"; }

/// Label TP ends up holding after P1 then P2 swap with fresh phi+ sources,
/// computed on full statevectors.
BellLabel physical_tp_label(BellLabel m_a, BellLabel m_b) {
    auto collapse = [](BellCode source, BellCode chain, BellCode measured) {
        for (const auto& o : oracle_swap_distribution(source, chain))
            if (o.measured == measured && o.probability > 0.0) return o.collapsed;
        throw ConventionError("outcome " + measured.str() + " has zero probability");
    };
    // P1's pair (A1,A2) with TP's (T1,T2); P1 measures (A1,T2), leaving (T1,A2).
    const BellCode after_first = collapse(code_of(BellLabel::PhiPlus), code_of(BellLabel::PhiPlus), code_of(m_a));
    // P2's pair (B1,B2) with (T1,A2); P2 measures (B1,A2), leaving (T1,B2).
    const BellCode after_second = collapse(code_of(BellLabel::PhiPlus), after_first, code_of(m_b));
    return label_of(after_second);
}

std::vector<GroupPair> sorted(const std::set<GroupPair>& s) { return {s.begin(), s.end()}; }

}  // namespace

// ---------------------------------------------------------------------------

std::vector<RelationRow> relation_table(TwoBits g_a, const BellCoding& coding) {
    coding.validate();
    std::vector<RelationRow> rows;
    for (const auto& ref : kReferenceRows) {
        const BellLabel m_a = parse_label(ref.m_a), m_b = parse_label(ref.m_b);
        const BellLabel m_t = physical_tp_label(m_a, m_b);
        for (unsigned gb = 0; gb < 4; ++gb) {
            RelationRow r;
            r.g_a = g_a;
            r.g_b = TwoBits(gb);
            r.m_a = m_a;
            r.m_b = m_b;
            r.m_t = m_t;
            r.r_a = coding.code(m_a);
            r.r_b = coding.code(m_b);
            r.r_t = coding.code(m_t);
            r.combined = mask(g_a, r.r_a) ^ mask(r.g_b, r.r_b);
            r.score = group_score(r.combined, r.r_t);
            rows.push_back(r);
        }
    }
    return rows;
}

std::vector<GroupPair> candidate_sets(int score, const BellCoding& coding) {
    std::map<GroupPair, int> seen;
    for (unsigned ga = 0; ga < 4; ++ga)
        for (const auto& r : relation_table(TwoBits(ga), coding)) {
            const GroupPair key{r.g_a, r.g_b};
            const auto [it, fresh] = seen.emplace(key, r.score);
            if (!fresh && it->second != r.score)
                throw std::invalid_argument("group pair " + pair_str(key) + " maps to scores " +
                                            std::to_string(it->second) + " and " + std::to_string(r.score));
        }
    std::set<GroupPair> out;
    for (const auto& [pair, s] : seen)
        if (s == score) out.insert(pair);
    return sorted(out);
}

std::vector<GroupPair> chain_candidate_sets(int score) {
    std::map<GroupPair, int> seen;
    auto note = [&](TwoBits a, TwoBits b, int s) {
        const auto [it, fresh] = seen.emplace(GroupPair{a, b}, s);
        if (!fresh && it->second != s)
            throw std::invalid_argument("hashed group pair " + pair_str({a, b}) + " maps to two scores");
    };
    for (unsigned g = 0; g < 64; ++g)
        for (unsigned r = 0; r < 64; ++r) {
            const TwoBits ga(g >> 4), gb((g >> 2) & 3), gc(g & 3);
            const BellCode ra(r >> 4), rb((r >> 2) & 3), rc(r & 3);
            const BellCode tp2 = ra ^ rb, tp3 = ra ^ rb ^ rc;
            note(ga, gb, group_score(mask(ga, ra) ^ mask(gb, rb), tp2));
            note(gb, gc, group_score(mask(mask(gb, rb) ^ mask(gc, rc), ra), tp3));
            note(ga, gc, group_score(mask(mask(ga, ra) ^ mask(gc, rc), rb), tp3));
        }
    std::set<GroupPair> out;
    for (const auto& [pair, s] : seen)
        if (s == score) out.insert(pair);
    return sorted(out);
}

double leaked_bits(int score) {
    if (score == 0) throw std::domain_error("leakage is only quantified for unequal groups (score 1 or 2)");
    if (score < 0 || score > 2) throw std::domain_error("group score must be 1 or 2");
    static const double kLeak[] = {0.0, std::log2(12.0) - std::log2(static_cast<double>(candidate_sets(1).size())),
                                   std::log2(12.0) - std::log2(static_cast<double>(candidate_sets(2).size()))};
    return kLeak[score];
}

double score_mutual_information() {
    // The score is a function of the pair, so I = H(score).
    double h = 0.0;
    for (int s = 0; s <= 2; ++s) {
        const double p = static_cast<double>(candidate_sets(s).size()) / 16.0;
        if (p > 0) h -= p * std::log2(p);
    }
    return h;
}

ExecutionCount execution_count(long long k) {
    if (k < 2) throw std::invalid_argument("execution_count needs K >= 2");
    return {k - 1, k * (k - 1) / 2, 1};
}

// ---------------------------------------------------------------------------

VerifyCheck verify_relation_table(const BellCoding& coding) {
    VerifyCheck c{"relation-table", true, {}};
    auto diff = [&](const std::string& what) {
        c.passed = false;
        c.diffs.push_back(what);
    };
    std::vector<RelationRow> rows;
    try {
        rows = relation_table(TwoBits(0), coding);
    } catch (const std::exception& e) {
        diff(e.what());
        return c;
    }
    if (rows.size() != 64) diff("expected 64 rows, got " + std::to_string(rows.size()));
    for (const auto& ref : kReferenceRows) {
        const BellLabel m_a = parse_label(ref.m_a), m_b = parse_label(ref.m_b);
        const std::string key = std::string(ref.m_a) + " " + ref.m_b;
        std::vector<const RelationRow*> mine;
        for (const auto& r : rows)
            if (r.m_a == m_a && r.m_b == m_b) mine.push_back(&r);
        if (mine.size() != 4) {
            diff(key + ": missing rows");
            continue;
        }
        const auto& first = *mine.front();
        if (first.r_a.str() != ref.r_a) diff(key + ": R_A " + first.r_a.str() + " != " + ref.r_a);
        if (first.r_b.str() != ref.r_b) diff(key + ": R_B " + first.r_b.str() + " != " + ref.r_b);
        if (label_name(first.m_t) != ref.m_t)
            diff(key + ": TP label " + std::string(label_name(first.m_t)) + " != " + ref.m_t);
        if (first.r_t.str() != ref.r_t) diff(key + ": R_T " + first.r_t.str() + " != " + ref.r_t);
        std::string combined, scores;
        for (const auto* r : mine) {
            combined += (combined.empty() ? "" : "/") + r->combined.str();
            scores += (scores.empty() ? "" : "/") + std::to_string(r->score);
        }
        if (combined != ref.combined) diff(key + ": R_j " + combined + " != " + ref.combined);
        if (scores != ref.scores) diff(key + ": scores " + scores + " != " + ref.scores);
        for (const auto* r : mine)
            if ((r->score == 0) != (r->g_a == r->g_b)) diff(key + ": score 0 does not coincide with G_A == G_B");
    }
    return c;
}

namespace {

VerifyCheck compare_candidates(std::string name, const std::function<std::vector<GroupPair>(int)>& build) {
    VerifyCheck c{std::move(name), true, {}};
    std::set<GroupPair> all;
    std::size_t total = 0;
    for (int s = 0; s <= 2; ++s) {
        std::vector<GroupPair> got;
        try {
            got = build(s);
        } catch (const std::exception& e) {
            c.passed = false;
            c.diffs.push_back(e.what());
            return c;
        }
        const auto want = reference_pairs(s);
        const std::set<GroupPair> have(got.begin(), got.end());
        for (const auto& p : want)
            if (!have.contains(p)) c.diffs.push_back("score " + std::to_string(s) + ": missing " + pair_str(p));
        for (const auto& p : have)
            if (!want.contains(p)) c.diffs.push_back("score " + std::to_string(s) + ": extra " + pair_str(p));
        all.insert(have.begin(), have.end());
        total += have.size();
    }
    if (all.size() != 16 || total != 16) c.diffs.push_back("score classes do not partition the 16 group pairs");
    c.passed = c.diffs.empty();
    return c;
}

}  // namespace

VerifyCheck verify_candidate_table(const BellCoding& coding) {
    return compare_candidates("candidate-table", [&](int s) { return candidate_sets(s, coding); });
}

VerifyCheck verify_chain_candidate_table() {
    return compare_candidates("hashed-candidate-table", [](int s) { return chain_candidate_sets(s); });
}

VerifyCheck verify_swap_oracle() {
    VerifyCheck c{"swap-oracle", true, {}};
    for (unsigned a = 0; a < 4; ++a)
        for (unsigned b = 0; b < 4; ++b) {
            const std::string key = std::string(label_name(label_of(BellCode(a)))) + " " +
                                    std::string(label_name(label_of(BellCode(b))));
            try {
                const auto dist = oracle_swap_distribution(BellCode(a), BellCode(b));
                std::set<unsigned> measured;
                for (const auto& o : dist) {
                    measured.insert(o.measured.value());
                    if (std::abs(o.probability - 0.25) > 1e-12)
                        c.diffs.push_back(key + ": p(" + o.measured.str() + ") = " + std::to_string(o.probability));
                    const BellCode want = swap_collapse(BellCode(a), BellCode(b), o.measured);
                    if (o.collapsed != want)
                        c.diffs.push_back(key + ": m=" + o.measured.str() + " collapsed " + o.collapsed.str() +
                                          ", algebra says " + want.str());
                }
                if (measured.size() != 4) c.diffs.push_back(key + ": expected four outcomes");
            } catch (const ConventionError& e) {
                c.diffs.push_back(key + ": " + e.what());
            }
        }
    c.passed = c.diffs.empty();
    return c;
}

VerifyCheck verify_leakage_constants() {
    VerifyCheck c{"leakage-constants", true, {}};
    const double one = leaked_bits(1), two = leaked_bits(2);
    if (std::abs(one - (std::log2(3.0) - 1.0)) > 1e-9) c.diffs.push_back("leaked_bits(1) = " + std::to_string(one));
    if (std::abs(two - std::log2(3.0)) > 1e-9) c.diffs.push_back("leaked_bits(2) = " + std::to_string(two));
    const double mi = score_mutual_information();
    if (std::abs(mi - 1.5) > 1e-12) c.diffs.push_back("mutual information = " + std::to_string(mi));
    c.passed = c.diffs.empty();
    return c;
}

std::vector<VerifyCheck> verify_all(const BellCoding& coding) {
    return {verify_relation_table(coding), verify_candidate_table(coding), verify_chain_candidate_table(),
            verify_swap_oracle(), verify_leakage_constants()};
}

// ---------------------------------------------------------------------------
// Observer views: every visible value is a GF(2) relation among the per-group
// symbols G_1..G_K, R_1..R_K. Each relation holds for every group with its
// own right-hand side, so one elimination serves all groups.

std::string_view symbol_status_name(SymbolStatus s) {
    switch (s) {
        case SymbolStatus::Exact: return "exact";
        case SymbolStatus::Partial: return "partial";
        case SymbolStatus::Unknown: return "unknown";
    }
    return "?";
}

namespace {

constexpr std::size_t kMaxSymbols = 2 * ProtocolParams::kMaxUsers;
using Coeffs = std::bitset<kMaxSymbols>;

struct Equation {
    Coeffs coeffs;
    std::vector<TwoBits> rhs;
};

class Gf2System {
public:
    explicit Gf2System(std::size_t groups) : groups_(groups) {}

    void add(Coeffs coeffs, std::vector<TwoBits> rhs) {
        if (rhs.size() != groups_) throw std::invalid_argument("relation covers the wrong number of groups");
        Equation e{coeffs, std::move(rhs)};
        for (const auto& r : rows_)
            if (e.coeffs.test(pivot(r))) reduce(e, r);
        if (e.coeffs.none()) {
            for (TwoBits v : e.rhs)
                if (v != TwoBits(0)) throw std::logic_error("observer log is inconsistent");
            return;
        }
        const std::size_t p = pivot(e);
        for (auto& r : rows_)
            if (r.coeffs.test(p)) reduce(r, e);
        rows_.push_back(std::move(e));
    }

    /// Value of a single symbol if it is determined.
    const Equation* solved(std::size_t symbol) const {
        for (const auto& r : rows_)
            if (r.coeffs.count() == 1 && r.coeffs.test(symbol)) return &r;
        return nullptr;
    }

    /// Value of the XOR of `coeffs` if the observations determine it.
    std::optional<std::vector<TwoBits>> value_of(Coeffs coeffs) const {
        Equation e{coeffs, std::vector<TwoBits>(groups_)};
        for (const auto& r : rows_)
            if (e.coeffs.test(pivot(r))) reduce(e, r);
        if (e.coeffs.any()) return std::nullopt;
        return std::move(e.rhs);
    }

private:
    static std::size_t pivot(const Equation& e) {
        for (std::size_t i = 0; i < kMaxSymbols; ++i)
            if (e.coeffs.test(i)) return i;
        return kMaxSymbols;
    }
    static void reduce(Equation& target, const Equation& by) {
        target.coeffs ^= by.coeffs;
        for (std::size_t j = 0; j < target.rhs.size(); ++j) target.rhs[j] = target.rhs[j] ^ by.rhs[j];
    }

    std::size_t groups_;
    std::vector<Equation> rows_;
};

std::vector<TwoBits> parse_group_values(const ordered_json& arr) {
    std::vector<TwoBits> v;
    for (const auto& x : arr) v.push_back(TwoBits::parse(x.get<std::string>()));
    return v;
}

std::string group_string(const std::vector<std::optional<TwoBits>>& groups) {
    std::string s;
    for (const auto& g : groups) s += g ? g->str() : "??";
    return s;
}

struct RoleInfo {
    std::string name;
    PartyId party = kEavesdropper;  // kEavesdropper for the outside observer
};

RoleInfo parse_role(const std::string& role, int k) {
    if (role == "outside") return {role, kEavesdropper};
    PartyId p = kEavesdropper;
    try {
        p = parse_party(role);
    } catch (const std::exception&) {
        throw ConfigError("unknown observer role '" + role + "' (expected outside, TP or P1..P" + std::to_string(k) + ")");
    }
    if (p == kEavesdropper || p > k)
        throw ConfigError("unknown observer role '" + role + "' (expected outside, TP or P1..P" + std::to_string(k) + ")");
    return {party_name(p), p};
}

/// The role's own compared groups, from its own slot of the header secrets.
std::optional<GroupSeq> own_groups(const Transcript& t, const ProtocolParams& p, PartyId who) {
    if (who < 1) return std::nullopt;
    const auto& sec = t.header.at("secrets");
    const auto idx = static_cast<std::size_t>(who - 1);
    if (sec.contains("groups")) return group_bits(bits_from_string(sec.at("groups").at(idx).get<std::string>()));
    const auto x = SecretInput::from_hex(sec.at("inputs").at(idx).get<std::string>(), p.input_bits);
    if (!p.hashed()) return group_bits(x);
    const auto hash = HashConfig::from_hex_key(sec.at("hash_key").get<std::string>(), p.hash_bits);
    return group_bits(hash_digest(hash, x));
}

bool visible_to(const ordered_json& e, const RoleInfo& role) {
    if (is_classical_event(e)) return true;
    if (role.party == kEavesdropper) return false;
    return e.contains("actor") && e.at("actor").get<std::string>() == role.name;
}

}  // namespace

const SymbolView& ViewReport::symbol(const std::string& name) const {
    for (const auto& s : symbols)
        if (s.name == name) return s;
    throw std::out_of_range("no symbol " + name);
}

ordered_json ViewReport::to_json() const {
    ordered_json j;
    j["schema"] = "qpc-view/1";
    j["role"] = role;
    j["variant"] = variant;
    j["k"] = k;
    j["groups"] = groups;
    ordered_json syms = ordered_json::array();
    for (const auto& s : symbols) {
        std::size_t known = 0;
        for (const auto& g : s.groups) known += g.has_value();
        syms.push_back({{"name", s.name}, {"status", symbol_status_name(s.status)}, {"groups_known", known},
                        {"value", group_string(s.groups)}});
    }
    j["symbols"] = std::move(syms);
    ordered_json rels = ordered_json::array();
    for (const auto& r : relations) {
        std::string v;
        for (TwoBits g : r.value) v += g.str();
        rels.push_back({{"symbols", r.symbols}, {"value", v}});
    }
    j["relations"] = std::move(rels);
    ordered_json sc = ordered_json::array();
    for (const auto& s : scores) {
        ordered_json lb = ordered_json::array();
        for (const auto& b : s.leaked_bits) lb.push_back(b ? ordered_json(*b) : ordered_json(nullptr));
        sc.push_back({{"pair", {s.pair.first, s.pair.second}}, {"scores", s.scores}, {"leaked_bits", lb}});
    }
    j["scores"] = std::move(sc);
    ordered_json in = ordered_json::array();
    for (const auto& x : inputs) in.push_back(x ? ordered_json(*x) : ordered_json("unknown"));
    j["inputs"] = std::move(in);
    return j;
}

std::vector<std::string> observable_events(const Transcript& t, const std::string& role_name) {
    const ProtocolParams p = params_from_header(t.header);
    const RoleInfo role = parse_role(role_name, p.k);
    ordered_json pub = t.header;
    pub.erase("secrets");
    std::vector<std::string> out{pub.dump()};
    if (const auto own = own_groups(t, p, role.party))
        out.push_back(ordered_json{{"type", "own_groups"}, {"actor", role.name}, {"bits", bits_to_string(ungroup(*own))}}
                          .dump());
    for (const auto& e : t.events)
        if (visible_to(e, role)) out.push_back(e.dump());
    return out;
}

ViewReport observer_view(const Transcript& t, const std::string& role_name) {
    const ProtocolParams p = params_from_header(t.header);
    const RoleInfo role = parse_role(role_name, p.k);
    const std::size_t n = p.groups();
    const auto K = static_cast<std::size_t>(p.k);
    auto G = [](int user) { return static_cast<std::size_t>(user - 1); };
    auto R = [&](int user) { return K + static_cast<std::size_t>(user - 1); };

    Gf2System sys(n);
    ViewReport rep;
    rep.role = role.name;
    rep.variant = std::string(variant_name(p.variant));
    rep.k = p.k;
    rep.groups = n;

    if (const auto own = own_groups(t, p, role.party)) {
        Coeffs c;
        c.set(G(role.party));
        sys.add(c, own->groups);
    }
    // TP can only trust its extra round-1 measurement when no decoys were
    // mixed into the sequence it paired by position.
    const bool attack_aligned = !p.uses_decoys();

    for (const auto& e : t.events) {
        if (!visible_to(e, role)) continue;
        const std::string type = e.at("type").get<std::string>();
        Coeffs c;
        if (type == "classical_send") {
            const std::string kind = e.at("kind").get<std::string>();
            if (kind == "total") continue;
            const PartyId from = parse_party(e.at("from").get<std::string>());
            if (kind == "masked") {
                c.set(G(from));
                c.set(R(from));
            } else if (kind == "code") {
                c.set(R(from));
            } else if (kind == "pair_xor") {
                const int m = e.at("pair")[0].get<int>(), k = e.at("pair")[1].get<int>();
                c.set(G(m));
                c.set(G(k));
                for (int i = 1; i <= k; ++i) c.set(R(i));
            } else {
                continue;
            }
            sys.add(c, parse_group_values(e.at("values")));
        } else if (type == "bell_measure") {
            const std::string purpose = e.at("purpose").get<std::string>();
            if (role.party >= 1 && purpose == "swap") {
                c.set(R(role.party));
            } else if (role.party == kThirdParty && purpose == "compare") {
                for (int i = 1; i <= e.at("round").get<int>(); ++i) c.set(R(i));
            } else if (role.party == kThirdParty && purpose == "attack" && attack_aligned) {
                c.set(R(1));
            } else {
                continue;
            }
            std::vector<TwoBits> v;
            for (const auto& x : e.at("results")) v.push_back(TwoBits(BellCode::parse(x.get<std::string>()).value()));
            sys.add(c, std::move(v));
        } else if (type == "tp_score" && role.party == kThirdParty) {
            ScoreView s;
            s.pair = {e.at("pair")[0].get<int>(), e.at("pair")[1].get<int>()};
            s.scores = e.at("scores").get<std::vector<int>>();
            for (int sc : s.scores) s.leaked_bits.push_back(sc == 0 ? std::nullopt : std::optional(leaked_bits(sc)));
            rep.scores.push_back(std::move(s));
        }
    }

    auto view_of = [&](std::size_t sym, std::string name) {
        SymbolView v;
        v.name = std::move(name);
        v.groups.assign(n, std::nullopt);
        if (const Equation* row = sys.solved(sym))
            for (std::size_t j = 0; j < n; ++j) v.groups[j] = row->rhs[j];
        const auto known = static_cast<std::size_t>(std::count_if(v.groups.begin(), v.groups.end(),
                                                                  [](const auto& g) { return g.has_value(); }));
        v.status = known == n ? SymbolStatus::Exact : known == 0 ? SymbolStatus::Unknown : SymbolStatus::Partial;
        return v;
    };
    for (int i = 1; i <= p.k; ++i) rep.symbols.push_back(view_of(G(i), "G" + std::to_string(i)));
    for (int i = 1; i <= p.k; ++i) rep.symbols.push_back(view_of(R(i), "R" + std::to_string(i)));

    // Pairwise XORs the observer pins down without knowing either symbol.
    std::vector<std::pair<std::size_t, std::string>> names;
    for (int i = 1; i <= p.k; ++i) names.emplace_back(G(i), "G" + std::to_string(i));
    for (int i = 1; i <= p.k; ++i) names.emplace_back(R(i), "R" + std::to_string(i));
    for (std::size_t a = 0; a < names.size(); ++a) {
        if (sys.solved(names[a].first)) continue;
        for (std::size_t b = a + 1; b < names.size(); ++b) {
            if (sys.solved(names[b].first)) continue;
            Coeffs c;
            c.set(names[a].first);
            c.set(names[b].first);
            if (auto v = sys.value_of(c)) rep.relations.push_back({{names[a].second, names[b].second}, std::move(*v)});
        }
    }

    for (int i = 1; i <= p.k; ++i) {
        const auto& g = rep.symbols[G(i)];
        if (p.hashed() || g.status != SymbolStatus::Exact) {
            rep.inputs.push_back(std::nullopt);
            continue;
        }
        GroupSeq seq;
        seq.padded = p.input_bits % 2 == 1;
        for (const auto& x : g.groups) seq.groups.push_back(*x);
        rep.inputs.push_back(SecretInput{ungroup(seq)}.to_hex());
    }
    return rep;
}

// ---------------------------------------------------------------------------

ordered_json AttackReport::to_json() const {
    ordered_json j;
    j["schema"] = "qpc-attack/1";
    j["experiment"] = "tp-bell";
    j["variant"] = variant;
    j["trials"] = trials;
    j["input_bits"] = input_bits;
    j["hash_bits"] = hash_bits == 0 ? ordered_json(nullptr) : ordered_json(hash_bits);
    j["detected"] = detected;
    j["groups_recovered"] = groups_recovered;
    j["both_users_groups_recovered"] = both_recovered;
    j["inputs_recovered"] = inputs_recovered;
    j["chance_baseline"] = chance_baseline;
    return j;
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
    return SeededRng::derive(seed, 0x100000000ULL + trial).seed();
}

void parallel_trials(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;
    std::vector<std::thread> pool;
    const unsigned n = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    for (unsigned w = 0; w < n; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_lock);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

namespace {

SecretInput random_input(std::size_t bits, SeededRng& rng) {
    SecretInput x;
    x.bits.resize(bits);
    for (auto& b : x.bits) b = rng.bit() ? 1 : 0;
    return x;
}

HashConfig random_hash(std::size_t bits, SeededRng& rng) {
    HashConfig h;
    h.output_bits = bits;
    h.key.resize(16);
    for (auto& b : h.key) b = static_cast<std::uint8_t>(rng.below(256));
    return h;
}

bool groups_match(const SymbolView& view, const GroupSeq& truth) {
    if (view.status != SymbolStatus::Exact || view.groups.size() != truth.size()) return false;
    for (std::size_t j = 0; j < truth.size(); ++j)
        if (*view.groups[j] != truth.groups[j]) return false;
    return true;
}

}  // namespace

AttackReport tp_bell_attack_experiment(Variant variant, std::size_t trials, std::uint64_t seed,
                                       std::size_t input_bits, std::size_t hash_bits) {
    if (variant != Variant::Lwc2 && variant != Variant::Hash2)
        throw ConfigError("tp-bell experiment supports lwc2 and hash2");
    AttackReport rep;
    rep.variant = std::string(variant_name(variant));
    rep.trials = trials;
    rep.input_bits = input_bits;
    rep.hash_bits = variant == Variant::Hash2 ? hash_bits : 0;
    rep.chance_baseline = std::exp2(-static_cast<double>(input_bits));

    for (std::size_t t = 0; t < trials; ++t) {
        SeededRng rng(trial_seed(seed, t));
        const SecretInput x = random_input(input_bits, rng), y = random_input(input_bits, rng);
        const HashConfig hash = random_hash(hash_bits, rng);
        ProtocolParams p;
        p.variant = variant;
        p.k = 2;
        p.input_bits = input_bits;
        p.hash_bits = hash_bits;
        p.seed = rng.next();
        p.decoys = variant != Variant::Hash2;  // TP cannot align its pairing around decoys
        p.attack.kind = AttackKind::TpBell;
        const SecretInput inputs[] = {x, y};
        const RunOutcome out = run_protocol(p, hash, inputs);
        rep.detected += out.aborted;

        const ViewReport view = observer_view(out.transcript, "TP");
        const bool g1 = groups_match(view.symbol("G1"), out.trace.groups[0]);
        const bool g2 = groups_match(view.symbol("G2"), out.trace.groups[1]);
        rep.groups_recovered += g1;
        rep.both_recovered += g1 && g2;
        if (view.inputs[0]) {
            rep.inputs_recovered += *view.inputs[0] == x.to_hex();
        } else {
            // No preimage route: TP's best is a uniform guess.
            SeededRng guess = SeededRng::derive(p.seed, 3);
            rep.inputs_recovered += random_input(input_bits, guess) == x;
        }
    }
    return rep;
}

CheckScheme parse_check_scheme(std::string_view name) {
    if (name == "decoy") return CheckScheme::Decoy;
    if (name == "bellpair") return CheckScheme::BellPair;
    throw ConfigError("unknown check scheme '" + std::string(name) + "' (expected decoy or bellpair)");
}

std::string_view check_scheme_name(CheckScheme s) { return s == CheckScheme::Decoy ? "decoy" : "bellpair"; }

ordered_json DetectionReport::to_json() const {
    ordered_json j;
    j["schema"] = "qpc-attack/1";
    j["experiment"] = "detection";
    j["scheme"] = scheme;
    j["attack"] = attack;
    j["checks"] = checks;
    j["trials"] = trials;
    j["detected"] = detected;
    j["rate"] = rate;
    j["expected"] = expected;
    return j;
}

namespace {

double per_particle_expectation(AttackKind attack) {
    return (attack == AttackKind::InterceptResend || attack == AttackKind::MeasureResend) ? 0.25 : 0.0;
}

}  // namespace

DetectionReport particle_detection_experiment(CheckScheme scheme, AttackKind attack, std::size_t particles,
                                              std::uint64_t seed) {
    DetectionReport rep;
    rep.scheme = std::string(check_scheme_name(scheme));
    rep.attack = std::string(attack_name(attack));
    rep.checks = particles;
    rep.trials = particles;
    rep.expected = per_particle_expectation(attack);

    ParticleRegistry reg;
    SeededRng qrng = SeededRng::derive(seed, 1), crng = SeededRng::derive(seed, 2);
    AttackerModel eve;
    eve.kind = attack;
    eve.rng = SeededRng::derive(seed, 3);
    const bool inline_attack = attack == AttackKind::InterceptResend || attack == AttackKind::MeasureResend;

    constexpr std::size_t kBatch = 1000;
    for (std::size_t done = 0; done < particles; done += kBatch) {
        const std::size_t b = std::min(kBatch, particles - done);
        QuantumChannel ch(1, kThirdParty, inline_attack ? &eve : nullptr);
        if (scheme == CheckScheme::Decoy) {
            const DecoyBatch batch = decoy_insert(reg, 1, {}, b, crng).batch;
            ch.transmit(reg, batch.particles);
            const auto results = decoy_measure(reg, batch, qrng);
            for (std::size_t i = 0; i < b; ++i) rep.detected += results[i] != batch.states[i].bit();
            for (ParticleId p : batch.particles) reg.retire(p);
        } else {
            const CheckPairBatch batch = bellpair_insert(reg, 1, {}, {}, b, crng).batch;
            ch.transmit(reg, batch.transmitted);
            rep.detected += bellpair_verify(reg, batch, crng, qrng).errors;
            for (std::size_t i = 0; i < b; ++i) {
                reg.retire(batch.retained[i]);
                reg.retire(batch.transmitted[i]);
            }
        }
    }
    rep.rate = particles == 0 ? 0.0 : static_cast<double>(rep.detected) / static_cast<double>(particles);
    return rep;
}

DetectionReport run_detection_experiment(CheckScheme scheme, AttackKind attack, std::size_t checks,
                                         std::size_t trials, std::uint64_t seed, unsigned threads) {
    DetectionReport rep;
    rep.scheme = std::string(check_scheme_name(scheme));
    rep.attack = std::string(attack_name(attack));
    rep.checks = checks;
    rep.trials = trials;
    const double q = per_particle_expectation(attack);
    rep.expected = 1.0 - std::pow(1.0 - q, static_cast<double>(checks));

    std::vector<std::uint8_t> aborted(trials, 0);
    parallel_trials(trials, threads, [&](std::size_t t) {
        SeededRng rng(trial_seed(seed, t));
        ProtocolParams p;
        p.seed = rng.next();
        p.check_count = checks;
        p.input_bits = 8;
        p.hash_bits = 8;
        p.attack.kind = attack;
        std::vector<SecretInput> inputs;
        if (scheme == CheckScheme::Decoy) {
            p.variant = Variant::Llcll2;
            p.k = 2;
            p.attack.channel = "TP-P1";
        } else {
            p.variant = Variant::Three;
            p.k = 3;
            p.attack.channel = "P1-TP";
        }
        for (int i = 0; i < p.k; ++i) inputs.push_back(random_input(p.input_bits, rng));
        const HashConfig hash = random_hash(p.hash_bits, rng);
        aborted[t] = run_protocol(p, hash, inputs, {.record = false}).aborted ? 1 : 0;
    });
    for (auto a : aborted) rep.detected += a;
    rep.rate = trials == 0 ? 0.0 : static_cast<double>(rep.detected) / static_cast<double>(trials);
    return rep;
}

}  // namespace qpc
