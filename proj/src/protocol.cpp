#include "qpc/protocol.hpp"

#include <algorithm>
#include <sstream>

namespace qpc {

namespace {

ordered_json codes_json(std::span<const BellCode> codes) {
    ordered_json a = ordered_json::array();
    for (BellCode c : codes) a.push_back(c.str());
    return a;
}

ordered_json groups_json(std::span<const TwoBits> groups) {
    ordered_json a = ordered_json::array();
    for (TwoBits g : groups) a.push_back(g.str());
    return a;
}

ordered_json positions_json(std::span<const std::size_t> positions) {
    ordered_json a = ordered_json::array();
    for (std::size_t p : positions) a.push_back(p);
    return a;
}

std::string bases_string(std::span<const Basis> bases) {
    std::string s;
    for (Basis b : bases) s.push_back(basis_char(b));
    return s;
}

std::string outcomes_string(std::span<const int> bits) {
    std::string s;
    for (int b : bits) s.push_back(b ? '1' : '0');
    return s;
}

struct PairSeqs {
    ParticleSeq first;
    ParticleSeq second;
};

struct Exchanged {
    ParticleSeq at_user;  // TP's second halves, now held by the user
    ParticleSeq at_tp;    // the user's second halves, now held by TP
};

/// One protocol execution: party state lives in the registry and the
/// per-user code tables; parties interact only through channel objects.
class Session {
public:
    Session(const ProtocolParams& params, std::vector<GroupSeq> groups, ordered_json secrets, RunOptions options)
        : p_(params),
          groups_(std::move(groups)),
          n_(params.groups()),
          c_(params.checks()),
          rec_(options.record),
          qrng_(SeededRng::derive(params.seed, 1)),
          crng_(SeededRng::derive(params.seed, 2)),
          out_{.attacker = AttackerModel{.kind = params.attack.kind, .rng = SeededRng::derive(params.seed, 3)}} {
        out_.results.k = params.k;
        out_.trace.groups = groups_;
        out_.trace.user_codes.assign(static_cast<std::size_t>(params.k), {});
        if (groups_.size() != static_cast<std::size_t>(params.k))
            throw ConfigError("expected " + std::to_string(params.k) + " group sequences");
        for (const auto& g : groups_)
            if (g.size() != n_) throw ConfigError("group sequence length does not match the configured group count");
        if (rec_) {
            out_.transcript.header = make_header(std::move(secrets));
            if (params.attack.kind == AttackKind::PassiveClassical) wire_.add_observer(&out_.attacker.captured);
        }
    }

    RunOutcome run() {
        if (p_.chain())
            run_chain();
        else
            run_two_party();
        if (!out_.aborted) {
            const auto dangling = reg_.live_particles();
            if (!dangling.empty())
                throw std::logic_error(std::to_string(dangling.size()) + " particles left unmeasured at end of run");
        }
        out_.trace.particles_prepared = reg_.prepared();
        return std::move(out_);
    }

private:
    ordered_json make_header(ordered_json secrets) const {
        ordered_json h;
        h["type"] = "header";
        h["schema"] = Transcript::kSchema;
        h["variant"] = variant_name(p_.variant);
        h["k"] = p_.k;
        h["input_bits"] = p_.input_bits;
        if (p_.hashed())
            h["hash"] = {{"primitive", HashConfig::kPrimitive}, {"bits", p_.hash_bits}};
        else
            h["hash"] = nullptr;
        h["groups"] = n_;
        h["check_scheme"] = p_.check_scheme();
        h["check_count"] = c_;
        h["decoys"] = p_.decoys;
        h["seed"] = p_.seed;
        h["attack"] = {{"kind", attack_name(p_.attack.kind)}, {"channel", p_.attack.channel}};
        h["secrets"] = std::move(secrets);
        return h;
    }

    void emit(ordered_json ev) {
        if (is_classical_event(ev)) wire_.publish(ev.dump());
        out_.transcript.events.push_back(std::move(ev));
    }

    bool quantum_clean() const {
        switch (p_.attack.kind) {
            case AttackKind::None:
            case AttackKind::PassiveClassical: return true;
            case AttackKind::TpBell: return !p_.uses_decoys();
            default: return false;
        }
    }

    AttackerModel* attacker_on(const std::string& channel) {
        const auto k = p_.attack.kind;
        if (k != AttackKind::InterceptResend && k != AttackKind::MeasureResend) return nullptr;
        if (p_.attack.channel == "*" || p_.attack.channel == channel) return &out_.attacker;
        return nullptr;
    }

    PairSeqs prepare(PartyId who) {
        PairSeqs s;
        for (std::size_t j = 0; j < n_; ++j) {
            const auto [a, b] = reg_.prepare_bell(BellCode(0), who);
            s.first.push_back(a);
            s.second.push_back(b);
        }
        if (rec_)
            emit({{"type", "prepare"}, {"actor", party_name(who)}, {"what", "bell_pairs"}, {"state", "phi+"},
                  {"count", n_}});
        return s;
    }

    void send(PartyId from, PartyId to, const ParticleSeq& seq) {
        QuantumChannel ch(from, to, attacker_on(party_name(from) + "-" + party_name(to)));
        ch.transmit(reg_, seq);
        if (rec_)
            emit({{"type", "q_send"}, {"from", party_name(from)}, {"to", party_name(to)}, {"channel", ch.name()},
                  {"count", seq.size()}});
    }

    BellCode measure(PartyId who, ParticleId a, ParticleId b) {
        if (reg_.holder(a) != who || reg_.holder(b) != who)
            throw std::logic_error(party_name(who) + " measured a particle it does not hold");
        return reg_.measure_bell(a, b, qrng_);
    }

    void record_measurement(PartyId who, int round, std::string_view purpose, std::span<const BellCode> codes) {
        if (rec_)
            emit({{"type", "bell_measure"}, {"actor", party_name(who)}, {"round", round}, {"purpose", purpose},
                  {"results", codes_json(codes)}});
    }

    void abort(const std::string& channel) {
        out_.aborted = true;
        out_.abort_channel = channel;
        const auto live = reg_.live_particles();
        for (ParticleId p : live) reg_.retire(p);
        if (rec_)
            emit({{"type", "abort"}, {"reason", "eavesdropping detected"}, {"channel", channel},
                  {"discarded", live.size()}});
    }

    void log_check(const std::string& channel, std::string_view scheme, PartyId announcer, PartyId measurer,
                   std::span<const std::size_t> positions, std::string bases, std::string outcomes,
                   std::size_t errors, double rate) {
        const bool passed = errors == 0;
        out_.checks.push_back({channel, std::string(scheme), positions.size(), errors, rate, passed});
        if (!rec_) return;
        emit({{"type", "check_announce"}, {"channel", channel}, {"scheme", scheme}, {"from", party_name(announcer)},
              {"to", party_name(measurer)}, {"positions", positions_json(positions)}, {"bases", std::move(bases)}});
        emit({{"type", "check_outcomes"}, {"channel", channel}, {"from", party_name(measurer)},
              {"to", party_name(announcer)}, {"outcomes", std::move(outcomes)}});
        emit({{"type", "check_result"}, {"channel", channel}, {"scheme", scheme}, {"from", party_name(announcer)},
              {"checked", positions.size()}, {"errors", errors}, {"error_rate", rate}, {"passed", passed}});
    }

    /// Sender announces positions and bases, receiver measures, sender
    /// compares. Any error aborts the run.
    bool decoy_check(const std::string& channel, PartyId sender, PartyId receiver, const DecoyBatch& batch) {
        for (ParticleId p : batch.particles)
            if (reg_.holder(p) != receiver) throw std::logic_error("decoy checked by a party that does not hold it");
        const auto results = decoy_measure(reg_, batch, qrng_);
        const double rate = decoy_verify(batch, results);
        std::size_t errors = 0;
        for (std::size_t i = 0; i < results.size(); ++i) errors += results[i] != batch.states[i].bit();
        std::vector<Basis> bases;
        for (const auto& s : batch.states) bases.push_back(s.basis());
        log_check(channel, "decoy", sender, receiver, batch.positions, bases_string(bases), outcomes_string(results),
                  errors, rate);
        for (ParticleId p : batch.particles) reg_.retire(p);
        if (errors != 0) {
            abort(channel);
            return false;
        }
        return true;
    }

    bool pair_check(const std::string& channel, PartyId preparer, PartyId receiver, const CheckPairBatch& batch) {
        const BellPairCheck r = bellpair_verify(reg_, batch, crng_, qrng_);
        log_check(channel, "bellpair", preparer, receiver, batch.positions, bases_string(r.bases),
                  outcomes_string(r.transmitted_outcomes), r.errors, r.error_rate);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            reg_.retire(batch.retained[i]);
            reg_.retire(batch.transmitted[i]);
        }
        if (r.errors != 0) {
            abort(channel);
            return false;
        }
        return true;
    }

    std::vector<BellCode> swap_round(PartyId who, int round, const ParticleSeq& own, const ParticleSeq& received) {
        std::vector<BellCode> codes(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            codes[j] = measure(who, own[j], received[j]);
            reg_.retire(own[j]);
            reg_.retire(received[j]);
        }
        record_measurement(who, round, "swap", codes);
        return codes;
    }

    /// TP measures its own collapsed pairs right after round 1. Non-perturbing
    /// on a clean chain; TP pairs by position since it cannot see decoys.
    void tp_bell_attack(const ParticleSeq& tp_first, const ParticleSeq& received) {
        std::vector<BellCode> codes(n_);
        for (std::size_t j = 0; j < n_; ++j) codes[j] = measure(kThirdParty, tp_first[j], received[j]);
        out_.trace.tp_attack_codes = codes;
        record_measurement(kThirdParty, 1, "attack", codes);
    }

    void assert_chain(int round, std::span<const BellCode> tp_codes) const {
        if (!quantum_clean()) return;
        for (std::size_t j = 0; j < n_; ++j) {
            BellCode expect(0);
            for (int i = 0; i < round; ++i) expect ^= out_.trace.user_codes[static_cast<std::size_t>(i)][j];
            if (expect != tp_codes[j])
                throw std::logic_error("TP chain invariant violated in round " + std::to_string(round));
        }
    }

    /// Classical part of round k: users feed P_k, P_k sends one combined value
    /// per earlier user to TP, TP scores and publishes every total.
    void compare_round(int k, std::span<const BellCode> tp_codes) {
        const auto& R = out_.trace.user_codes;
        auto masked = [&](int i, std::size_t j) { return mask(groups_[i - 1].groups[j], R[i - 1][j]); };
        const std::string to_k = party_name(k);

        if (rec_) {
            for (int i = 1; i < k; ++i) {
                std::vector<TwoBits> mv(n_);
                for (std::size_t j = 0; j < n_; ++j) mv[j] = masked(i, j);
                emit({{"type", "classical_send"}, {"from", party_name(i)}, {"to", to_k}, {"round", k},
                      {"kind", "masked"}, {"values", groups_json(mv)}});
                if (k >= 3)
                    emit({{"type", "classical_send"}, {"from", party_name(i)}, {"to", to_k}, {"round", k},
                          {"kind", "code"}, {"values", codes_json(R[i - 1])}});
            }
        }
        for (int m = 1; m < k; ++m) {
            std::vector<TwoBits> combined(n_);
            std::vector<int> scores(n_);
            for (std::size_t j = 0; j < n_; ++j) {
                TwoBits v = masked(m, j) ^ masked(k, j);
                for (int i = 1; i < k; ++i)
                    if (i != m) v = mask(v, R[i - 1][j]);
                combined[j] = v;
                scores[j] = group_score(v, tp_codes[j]);
            }
            const int total = total_score(scores);
            const Verdict verdict = total == 0 ? Verdict::Equal : Verdict::Unequal;
            out_.results.totals[{m, k}] = total;
            out_.results.verdicts[{m, k}] = verdict;
            if (!rec_) continue;
            const ordered_json pair = {m, k};
            emit({{"type", "classical_send"}, {"from", to_k}, {"to", "TP"}, {"round", k}, {"kind", "pair_xor"},
                  {"pair", pair}, {"values", groups_json(combined)}});
            ordered_json sj = ordered_json::array();
            for (int s : scores) sj.push_back(s);
            emit({{"type", "tp_score"}, {"actor", "TP"}, {"round", k}, {"pair", pair}, {"scores", sj},
                  {"total", total}});
            emit({{"type", "classical_send"}, {"from", "TP"}, {"to", "*"}, {"round", k}, {"kind", "total"},
                  {"pair", pair}, {"value", total}});
            emit({{"type", "verdict"}, {"pair", pair}, {"total", total}, {"verdict", verdict_name(verdict)}});
        }
    }

    void run_two_party() {
        const bool decoys = p_.uses_decoys();
        const PairSeqs A = prepare(1);
        const PairSeqs B = prepare(2);
        const PairSeqs T = prepare(kThirdParty);

        DecoyBatch dA, dT, dB;
        ParticleSeq a_out = A.second, t_out = T.second, b_out = B.second;
        if (decoys) {
            auto pa = decoy_insert(reg_, 1, A.second, c_, crng_);
            auto pt = decoy_insert(reg_, kThirdParty, T.second, c_, crng_);
            a_out = std::move(pa.sequence);
            dA = std::move(pa.batch);
            t_out = std::move(pt.sequence);
            dT = std::move(pt.batch);
            record_decoys(1, dA.size());
            record_decoys(kThirdParty, dT.size());
        }
        send(1, kThirdParty, a_out);
        send(kThirdParty, 1, t_out);
        if (decoys && !decoy_check("TP-P1", kThirdParty, 1, dT)) return;

        const ParticleSeq t_data = strip_positions(t_out, dT.positions);
        out_.trace.user_codes[0] = swap_round(1, 1, A.first, t_data);
        if (p_.attack.kind == AttackKind::TpBell) tp_bell_attack(T.first, a_out);

        if (decoys) {
            auto pb = decoy_insert(reg_, 2, B.second, c_, crng_);
            b_out = std::move(pb.sequence);
            dB = std::move(pb.batch);
            record_decoys(2, dB.size());
        }
        send(2, kThirdParty, b_out);
        send(kThirdParty, 2, a_out);
        if (decoys) {
            if (!decoy_check("P2-TP", 2, kThirdParty, dB)) return;
            if (!decoy_check("P1-TP-P2", 1, 2, dA)) return;
        }
        const ParticleSeq a_data = strip_positions(a_out, dA.positions);
        const ParticleSeq b_data = strip_positions(b_out, dB.positions);
        out_.trace.user_codes[1] = swap_round(2, 2, B.first, a_data);

        std::vector<BellCode> rt(n_);
        for (std::size_t j = 0; j < n_; ++j) rt[j] = measure(kThirdParty, T.first[j], b_data[j]);
        record_measurement(kThirdParty, 2, "compare", rt);
        assert_chain(2, rt);
        out_.trace.tp_codes.push_back(rt);
        compare_round(2, rt);
        for (std::size_t j = 0; j < n_; ++j) {
            reg_.retire(T.first[j]);
            reg_.retire(b_data[j]);
        }
    }

    void record_decoys(PartyId who, std::size_t count) {
        if (rec_) emit({{"type", "prepare"}, {"actor", party_name(who)}, {"what", "decoys"}, {"count", count}});
    }

    std::optional<Exchanged> exchange(int k, const PairSeqs& user, const ParticleSeq& tp_first,
                                      const ParticleSeq& tp_second) {
        const PartyId u = k;
        if (c_ == 0) {
            send(u, kThirdParty, user.second);
            send(kThirdParty, u, tp_second);
            return Exchanged{tp_second, user.second};
        }
        const CheckedSequences cu = bellpair_insert(reg_, u, user.first, user.second, c_, crng_);
        const CheckedSequences ct = bellpair_insert(reg_, kThirdParty, tp_first, tp_second, c_, crng_);
        if (rec_) {
            emit({{"type", "prepare"}, {"actor", party_name(u)}, {"what", "check_pairs"}, {"state", "phi+"},
                  {"count", c_}});
            emit({{"type", "prepare"}, {"actor", "TP"}, {"what", "check_pairs"}, {"state", "phi+"}, {"count", c_}});
        }
        send(u, kThirdParty, cu.second);
        send(kThirdParty, u, ct.second);
        if (!pair_check(party_name(u) + "-TP", u, kThirdParty, cu.batch)) return std::nullopt;
        if (!pair_check("TP-" + party_name(u), kThirdParty, u, ct.batch)) return std::nullopt;
        return Exchanged{strip_positions(ct.second, ct.batch.positions),
                         strip_positions(cu.second, cu.batch.positions)};
    }

    void run_chain() {
        std::vector<PairSeqs> users;
        for (int i = 1; i <= p_.k; ++i) users.push_back(prepare(i));
        const PairSeqs T = prepare(kThirdParty);
        ParticleSeq tp_second = T.second;

        for (int k = 1; k <= p_.k; ++k) {
            const auto ex = exchange(k, users[static_cast<std::size_t>(k - 1)], T.first, tp_second);
            if (!ex) return;
            out_.trace.user_codes[static_cast<std::size_t>(k - 1)] =
                swap_round(k, k, users[static_cast<std::size_t>(k - 1)].first, ex->at_user);
            tp_second = ex->at_tp;
            if (k == 1) {
                if (p_.attack.kind == AttackKind::TpBell) tp_bell_attack(T.first, tp_second);
                continue;
            }
            std::vector<BellCode> rt(n_);
            for (std::size_t j = 0; j < n_; ++j) rt[j] = measure(kThirdParty, T.first[j], tp_second[j]);
            record_measurement(kThirdParty, k, "compare", rt);
            assert_chain(k, rt);
            out_.trace.tp_codes.push_back(rt);
            compare_round(k, rt);
        }
        for (std::size_t j = 0; j < n_; ++j) {
            reg_.retire(T.first[j]);
            reg_.retire(tp_second[j]);
        }
    }

    ProtocolParams p_;
    std::vector<GroupSeq> groups_;
    std::size_t n_;
    std::size_t c_;
    bool rec_;
    SeededRng qrng_;  // Born-rule outcomes of honest measurements
    SeededRng crng_;  // check placement, decoy states, check bases
    ParticleRegistry reg_;
    ClassicalChannel wire_;
    RunOutcome out_;
};

ordered_json input_secrets(const ProtocolParams& params, const HashConfig* hash, std::span<const SecretInput> inputs) {
    ordered_json s;
    if (params.hashed() && hash != nullptr) s["hash_key"] = hex_from_bytes(hash->key);
    ordered_json in = ordered_json::array();
    for (const auto& x : inputs) in.push_back(x.to_hex());
    s["inputs"] = std::move(in);
    return s;
}

std::vector<GroupSeq> groups_for(const ProtocolParams& params, const HashConfig* hash,
                                 std::span<const SecretInput> inputs) {
    if (inputs.size() != static_cast<std::size_t>(params.k))
        throw ConfigError("expected " + std::to_string(params.k) + " inputs, got " + std::to_string(inputs.size()));
    std::vector<GroupSeq> out;
    for (const auto& x : inputs) {
        if (x.length() != params.input_bits)
            throw ConfigError("input length " + std::to_string(x.length()) + " does not match bit_length " +
                              std::to_string(params.input_bits));
        out.push_back(params.hashed() ? group_bits(hash_digest(*hash, x)) : group_bits(x));
    }
    return out;
}

RunOutcome run_inputs(ProtocolParams params, const HashConfig* hash, std::span<const SecretInput> inputs,
                      RunOptions options) {
    if (!inputs.empty()) params.input_bits = inputs.front().length();
    if (params.hashed()) {
        if (hash == nullptr) throw ConfigError("hashed variant needs a hash configuration");
        hash->validate();
        params.hash_bits = hash->output_bits;
    }
    params.validate();
    auto groups = groups_for(params, hash, inputs);
    Session s(params, std::move(groups), options.record ? input_secrets(params, hash, inputs) : ordered_json(),
              options);
    return s.run();
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view variant_name(Variant v) {
    switch (v) {
        case Variant::Lwc2: return "lwc2";
        case Variant::Llcll2: return "llcll2";
        case Variant::Hash2: return "hash2";
        case Variant::Three: return "three";
        case Variant::Multi: return "multi";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    for (Variant v : {Variant::Lwc2, Variant::Llcll2, Variant::Hash2, Variant::Three, Variant::Multi})
        if (variant_name(v) == name) return v;
    throw ConfigError("unknown protocol '" + std::string(name) + "' (expected lwc2, llcll2, hash2, three or multi)");
}

std::string_view verdict_name(Verdict v) { return v == Verdict::Equal ? "equal" : "unequal"; }

std::size_t ProtocolParams::checks() const {
    if (variant == Variant::Lwc2 || (variant == Variant::Hash2 && !decoys)) return 0;
    return check_count.value_or(groups());
}

std::string ProtocolParams::check_scheme() const {
    if (chain()) return "bellpair";
    return uses_decoys() ? "decoy" : "none";
}

std::vector<std::string> ProtocolParams::channel_names() const {
    std::vector<std::string> out;
    for (int i = 1; i <= k; ++i) {
        out.push_back(party_name(i) + "-TP");
        out.push_back("TP-" + party_name(i));
    }
    return out;
}

void ProtocolParams::validate() const {
    switch (variant) {
        case Variant::Lwc2:
        case Variant::Llcll2:
        case Variant::Hash2:
            if (k != 2) throw ConfigError("--k: protocol " + std::string(variant_name(variant)) + " needs K=2");
            break;
        case Variant::Three:
            if (k != 3) throw ConfigError("--k: protocol three needs K=3");
            break;
        case Variant::Multi:
            if (k < 2 || k > kMaxUsers)
                throw ConfigError("--k: protocol multi needs 2 <= K <= " + std::to_string(kMaxUsers));
            break;
    }
    if (input_bits == 0) throw ConfigError("bit_length: input length L must be positive");
    if (input_bits > 4096) throw ConfigError("bit_length: input length L is capped at 4096");
    if (hashed() && (hash_bits < 2 || hash_bits > HashConfig::kMaxOutputBits))
        throw ConfigError("--hash-bits: N must be in [2, " + std::to_string(HashConfig::kMaxOutputBits) + "]");
    if (!decoys && variant != Variant::Hash2) throw ConfigError("--no-decoys: only meaningful for protocol hash2");
    if (check_count && *check_count > 100000) throw ConfigError("--check-count: at most 100000");
    if (check_count && variant == Variant::Lwc2 && *check_count != 0)
        throw ConfigError("--check-count: protocol lwc2 has no transmission checks");
    const auto kind = attack.kind;
    if (kind == AttackKind::InterceptResend || kind == AttackKind::MeasureResend) {
        const auto names = channel_names();
        if (attack.channel != "*" && std::find(names.begin(), names.end(), attack.channel) == names.end())
            throw ConfigError("--attack-channel: '" + attack.channel + "' is not a quantum channel of this protocol");
    }
}

std::optional<Verdict> PairwiseResults::verdict(int m, int n) const {
    if (m > n) std::swap(m, n);
    const auto it = verdicts.find({m, n});
    if (it == verdicts.end()) return std::nullopt;
    return it->second;
}

ordered_json PairwiseResults::to_json() const {
    ordered_json j;
    j["k"] = k;
    ordered_json pairs = ordered_json::array();
    for (const auto& [pr, total] : totals)
        pairs.push_back({{"m", pr.first}, {"k", pr.second}, {"total", total},
                         {"verdict", verdict_name(verdicts.at(pr))}});
    j["pairs"] = std::move(pairs);
    ordered_json tm = ordered_json::array(), vm = ordered_json::array();
    for (int a = 1; a <= k; ++a) {
        ordered_json trow = ordered_json::array(), vrow = ordered_json::array();
        for (int b = 1; b <= k; ++b) {
            const auto it = totals.find({std::min(a, b), std::max(a, b)});
            if (a == b || it == totals.end()) {
                trow.push_back(nullptr);
                vrow.push_back(nullptr);
            } else {
                trow.push_back(it->second);
                vrow.push_back(verdict_name(verdicts.at(it->first)));
            }
        }
        tm.push_back(std::move(trow));
        vm.push_back(std::move(vrow));
    }
    j["totals"] = std::move(tm);
    j["verdicts"] = std::move(vm);
    return j;
}

bool is_classical_event(const ordered_json& event) {
    const auto& t = event.at("type").get_ref<const std::string&>();
    return t == "check_announce" || t == "check_outcomes" || t == "check_result" || t == "abort" ||
           t == "classical_send";
}

std::string Transcript::to_jsonl() const {
    std::string out = header.dump();
    out.push_back('\n');
    for (const auto& e : events) {
        out += e.dump();
        out.push_back('\n');
    }
    return out;
}

Transcript Transcript::from_jsonl(std::string_view text) {
    Transcript t;
    std::istringstream in{std::string(text)};
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = ordered_json::parse(line);
        if (first) {
            if (!j.is_object() || j.value("type", "") != "header")
                throw ConfigError("transcript does not start with a header line");
            t.header = std::move(j);
            first = false;
        } else {
            t.events.push_back(std::move(j));
        }
    }
    if (first) throw ConfigError("empty transcript");
    return t;
}

std::vector<std::string> Transcript::classical_lines() const {
    std::vector<std::string> out;
    for (const auto& e : events)
        if (is_classical_event(e)) out.push_back(e.dump());
    return out;
}

// ---------------------------------------------------------------------------

RunOutcome run_protocol(const ProtocolParams& params, const HashConfig& hash, std::span<const SecretInput> inputs,
                        RunOptions options) {
    return run_inputs(params, &hash, inputs, options);
}

RunOutcome run_two_party_lwc(ProtocolParams params, const SecretInput& x, const SecretInput& y, RunOptions options) {
    params.variant = Variant::Lwc2;
    params.k = 2;
    const SecretInput in[] = {x, y};
    return run_inputs(params, nullptr, in, options);
}

RunOutcome run_two_party_llcll(ProtocolParams params, const SecretInput& x, const SecretInput& y,
                               RunOptions options) {
    params.variant = Variant::Llcll2;
    params.k = 2;
    const SecretInput in[] = {x, y};
    return run_inputs(params, nullptr, in, options);
}

RunOutcome run_two_party_hash(ProtocolParams params, const HashConfig& hash, const SecretInput& x,
                              const SecretInput& y, RunOptions options) {
    params.variant = Variant::Hash2;
    params.k = 2;
    const SecretInput in[] = {x, y};
    return run_inputs(params, &hash, in, options);
}

RunOutcome run_three_party(ProtocolParams params, const HashConfig& hash, const SecretInput& x, const SecretInput& y,
                           const SecretInput& z, RunOptions options) {
    params.variant = Variant::Three;
    params.k = 3;
    const SecretInput in[] = {x, y, z};
    return run_inputs(params, &hash, in, options);
}

RunOutcome run_multi_party(ProtocolParams params, const HashConfig& hash, std::span<const SecretInput> inputs,
                           RunOptions options) {
    params.variant = Variant::Multi;
    params.k = static_cast<int>(inputs.size());
    return run_inputs(params, &hash, inputs, options);
}

RunOutcome run_with_groups(const ProtocolParams& params, std::span<const GroupSeq> groups, RunOptions options) {
    params.validate();
    ordered_json secrets;
    if (options.record) {
        ordered_json g = ordered_json::array();
        for (const auto& seq : groups) g.push_back(bits_to_string(ungroup(seq)));
        secrets["groups"] = std::move(g);
    }
    for (const auto& seq : groups)
        if (seq.bit_length() != params.compared_bits())
            throw ConfigError("group sequence does not cover " + std::to_string(params.compared_bits()) + " bits");
    Session s(params, {groups.begin(), groups.end()}, std::move(secrets), options);
    return s.run();
}

// ---------------------------------------------------------------------------

ProtocolParams params_from_header(const ordered_json& h) {
    try {
        if (h.at("schema").get<std::string>() != Transcript::kSchema) throw ConfigError("unsupported transcript schema");
        ProtocolParams p;
        p.variant = parse_variant(h.at("variant").get<std::string>());
        p.k = h.at("k").get<int>();
        p.input_bits = h.at("input_bits").get<std::size_t>();
        if (!h.at("hash").is_null()) p.hash_bits = h.at("hash").at("bits").get<std::size_t>();
        p.seed = h.at("seed").get<std::uint64_t>();
        p.decoys = h.at("decoys").get<bool>();
        p.check_count = h.at("check_count").get<std::size_t>();
        if (p.variant == Variant::Lwc2 || (p.variant == Variant::Hash2 && !p.decoys)) p.check_count.reset();
        p.attack.kind = parse_attack(h.at("attack").at("kind").get<std::string>());
        p.attack.channel = h.at("attack").at("channel").get<std::string>();
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed transcript header: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("malformed transcript header: ") + e.what());
    }
}

namespace {

struct HeaderSecrets {
    std::vector<SecretInput> inputs;
    std::optional<HashConfig> hash;
    std::vector<GroupSeq> groups;  // set when the run was started from groups
};

HeaderSecrets secrets_from_header(const ProtocolParams& p, const ordered_json& h) {
    HeaderSecrets s;
    try {
        const auto& sec = h.at("secrets");
        if (sec.contains("groups")) {
            for (const auto& g : sec.at("groups")) s.groups.push_back(group_bits(bits_from_string(g.get<std::string>())));
            return s;
        }
        for (const auto& x : sec.at("inputs")) s.inputs.push_back(SecretInput::from_hex(x.get<std::string>(), p.input_bits));
        if (p.hashed()) s.hash = HashConfig::from_hex_key(sec.at("hash_key").get<std::string>(), p.hash_bits);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed transcript secrets: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("malformed transcript secrets: ") + e.what());
    }
    return s;
}

std::vector<GroupSeq> compared_groups(const ProtocolParams& p, const HeaderSecrets& s) {
    if (!s.groups.empty()) return s.groups;
    return groups_for(p, s.hash ? &*s.hash : nullptr, s.inputs);
}

}  // namespace

Transcript replay(const Transcript& transcript) {
    const ProtocolParams p = params_from_header(transcript.header);
    const HeaderSecrets s = secrets_from_header(p, transcript.header);
    if (!s.groups.empty()) return run_with_groups(p, s.groups).transcript;
    const HashConfig* hash = s.hash ? &*s.hash : nullptr;
    return run_inputs(p, hash, s.inputs, {}).transcript;
}

void verify_replay(const Transcript& transcript) {
    const Transcript again = replay(transcript);
    std::vector<std::string> a{transcript.header.dump()}, b{again.header.dump()};
    for (const auto& e : transcript.events) a.push_back(e.dump());
    for (const auto& e : again.events) b.push_back(e.dump());
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i)
        if (a[i] != b[i]) throw ReplayDivergence("replay diverges at line " + std::to_string(i), i);
    if (a.size() != b.size()) throw ReplayDivergence("replay length differs", n);
}

std::vector<std::string> validate_transcript(const Transcript& transcript) {
    std::vector<std::string> problems;
    const ProtocolParams p = params_from_header(transcript.header);
    const auto groups = compared_groups(p, secrets_from_header(p, transcript.header));
    const std::size_t n = p.groups();
    const auto K = static_cast<std::size_t>(p.k);

    std::vector<std::vector<BellCode>> R(K);
    std::map<int, std::vector<BellCode>> tp_round;
    std::map<UserPair, std::vector<TwoBits>> combined;

    auto parse_codes = [](const ordered_json& arr) {
        std::vector<BellCode> v;
        for (const auto& x : arr) v.push_back(BellCode::parse(x.get<std::string>()));
        return v;
    };
    auto parse_groups = [](const ordered_json& arr) {
        std::vector<TwoBits> v;
        for (const auto& x : arr) v.push_back(TwoBits::parse(x.get<std::string>()));
        return v;
    };

    for (std::size_t idx = 0; idx < transcript.events.size(); ++idx) {
        const auto& e = transcript.events[idx];
        const std::string where = "event " + std::to_string(idx + 1) + ": ";
        const std::string type = e.at("type").get<std::string>();
        if (type == "bell_measure") {
            const PartyId who = parse_party(e.at("actor").get<std::string>());
            const std::string purpose = e.at("purpose").get<std::string>();
            if (who >= 1 && purpose == "swap") R[static_cast<std::size_t>(who - 1)] = parse_codes(e.at("results"));
            if (who == kThirdParty && purpose == "compare") tp_round[e.at("round").get<int>()] = parse_codes(e.at("results"));
            continue;
        }
        if (type != "classical_send") continue;

        const PartyId from = parse_party(e.at("from").get<std::string>());
        const std::string kind = e.at("kind").get<std::string>();
        if (from == kThirdParty) {
            if (kind != "total") {
                problems.push_back(where + "TP sent a '" + kind + "' value");
                continue;
            }
            const UserPair pr{e.at("pair")[0].get<int>(), e.at("pair")[1].get<int>()};
            const int round = e.at("round").get<int>();
            if (!combined.contains(pr) || !tp_round.contains(round)) {
                problems.push_back(where + "total published before its inputs");
                continue;
            }
            int expect = 0;
            for (std::size_t j = 0; j < n; ++j) expect += group_score(combined[pr][j], tp_round[round][j]);
            if (e.at("value").get<int>() != expect) problems.push_back(where + "published total does not match");
            continue;
        }
        if (from < 1 || static_cast<std::size_t>(from) > K) {
            problems.push_back(where + "classical value from non-participant " + party_name(from));
            continue;
        }
        const auto i = static_cast<std::size_t>(from - 1);
        if (kind == "masked" || kind == "code") {
            if (R[i].size() != n) {
                problems.push_back(where + party_name(from) + " sent '" + kind + "' before measuring");
                continue;
            }
            const auto vals = parse_groups(e.at("values"));
            if (vals.size() != n) {
                problems.push_back(where + "wrong value count");
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                const TwoBits expect = kind == "masked" ? mask(groups[i].groups[j], R[i][j]) : TwoBits(R[i][j].value());
                if (vals[j] != expect) {
                    problems.push_back(where + "'" + kind + "' value from " + party_name(from) + " is not the permitted form");
                    break;
                }
            }
        } else if (kind == "pair_xor") {
            const int m = e.at("pair")[0].get<int>(), k = e.at("pair")[1].get<int>();
            if (k != from || m < 1 || m >= k || e.at("to").get<std::string>() != "TP") {
                problems.push_back(where + "pair value routed outside the aggregator->TP path");
                continue;
            }
            const auto vals = parse_groups(e.at("values"));
            bool ok = vals.size() == n;
            for (std::size_t j = 0; ok && j < n; ++j) {
                TwoBits expect = mask(groups[static_cast<std::size_t>(m - 1)].groups[j] ^ groups[i].groups[j], BellCode(0));
                for (int u = 1; u <= k; ++u) expect = mask(expect, R[static_cast<std::size_t>(u - 1)][j]);
                ok = vals[j] == expect;
            }
            if (!ok) problems.push_back(where + "pair value does not match its defining combination");
            combined[{m, k}] = vals;
        } else {
            problems.push_back(where + "user sent non-whitelisted kind '" + kind + "'");
        }
    }
    return problems;
}

}  // namespace qpc
