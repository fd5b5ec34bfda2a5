#include <gtest/gtest.h>

#include <set>

#include "qpc/protocol.hpp"

using namespace qpc;

namespace {

const HashConfig kHash = HashConfig::from_hex_key("0badc0de", 64);

ProtocolParams params(Variant v, int k, std::size_t bits, std::uint64_t seed) {
    ProtocolParams p;
    p.variant = v;
    p.k = k;
    p.input_bits = bits;
    p.hash_bits = 64;
    p.seed = seed;
    return p;
}

std::vector<SecretInput> inputs(std::initializer_list<std::uint64_t> vals, std::size_t bits) {
    std::vector<SecretInput> out;
    for (auto v : vals) out.push_back(SecretInput::from_uint(v, bits));
    return out;
}

std::size_t count_type(const Transcript& t, std::string_view type) {
    std::size_t n = 0;
    for (const auto& e : t.events) n += e.at("type") == type;
    return n;
}

}  // namespace

TEST(Params, VariantNames) {
    for (auto v : {Variant::Lwc2, Variant::Llcll2, Variant::Hash2, Variant::Three, Variant::Multi})
        EXPECT_EQ(parse_variant(variant_name(v)), v);
    EXPECT_THROW(parse_variant("four"), ConfigError);
}

TEST(Params, ValidationNamesTheSetting) {
    auto bad = [](ProtocolParams p, std::string_view needle) {
        try {
            p.validate();
            ADD_FAILURE() << "accepted: " << needle;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    bad(params(Variant::Hash2, 3, 8, 0), "--k");
    bad(params(Variant::Three, 2, 8, 0), "--k");
    bad(params(Variant::Multi, 1, 8, 0), "--k");
    bad(params(Variant::Multi, 65, 8, 0), "--k");
    bad(params(Variant::Hash2, 2, 0, 0), "bit_length");
    bad(params(Variant::Hash2, 2, 4097, 0), "bit_length");
    auto p = params(Variant::Hash2, 2, 8, 0);
    p.hash_bits = 300;
    bad(p, "--hash-bits");
    p = params(Variant::Llcll2, 2, 8, 0);
    p.decoys = false;
    bad(p, "--no-decoys");
    p = params(Variant::Lwc2, 2, 8, 0);
    p.check_count = 2;
    bad(p, "--check-count");
    p = params(Variant::Three, 3, 8, 0);
    p.attack = {AttackKind::InterceptResend, "P9-TP"};
    bad(p, "--attack-channel");
    EXPECT_NO_THROW(params(Variant::Multi, 64, 8, 0).validate());
}

TEST(Params, CheckDefaultsAndSchemes) {
    auto p = params(Variant::Hash2, 2, 8, 0);
    EXPECT_EQ(p.groups(), 32u);
    EXPECT_EQ(p.checks(), 32u);
    EXPECT_EQ(p.check_scheme(), "decoy");
    p.decoys = false;
    EXPECT_EQ(p.check_scheme(), "none");
    EXPECT_EQ(params(Variant::Lwc2, 2, 9, 0).groups(), 5u);
    EXPECT_EQ(params(Variant::Lwc2, 2, 9, 0).checks(), 0u);
    EXPECT_EQ(params(Variant::Multi, 4, 8, 0).check_scheme(), "bellpair");
}

TEST(Run, RawTwoPartyVerdicts) {
    for (auto v : {Variant::Lwc2, Variant::Llcll2}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto eq = run_protocol(params(v, 2, 11, seed), kHash, inputs({0x5a3, 0x5a3}, 11));
            EXPECT_EQ(eq.results.verdict(1, 2), Verdict::Equal);
            EXPECT_EQ(eq.results.totals.at({1, 2}), 0);
            const auto ne = run_protocol(params(v, 2, 11, seed), kHash, inputs({0x5a3, 0x5a2}, 11));
            EXPECT_EQ(ne.results.verdict(1, 2), Verdict::Unequal);
            EXPECT_EQ(ne.results.totals.at({1, 2}), 1) << "total is the Hamming distance of raw inputs";
        }
    }
}

TEST(Run, RawTotalIsHammingDistanceProperty) {
    SeededRng rng(2);
    for (int i = 0; i < 200; ++i) {
        const std::uint64_t x = rng.below(1 << 13), y = rng.below(1 << 13);
        const auto out = run_protocol(params(Variant::Llcll2, 2, 13, rng.next()), kHash, inputs({x, y}, 13));
        ASSERT_FALSE(out.aborted);
        EXPECT_EQ(out.results.totals.at({1, 2}), std::popcount(x ^ y));
    }
}

TEST(Run, HashedVerdictsAllPairs) {
    const auto out = run_protocol(params(Variant::Multi, 5, 16, 4), kHash, inputs({7, 9, 7, 9, 1}, 16));
    ASSERT_TRUE(out.results.complete());
    for (int m = 1; m <= 5; ++m)
        for (int k = m + 1; k <= 5; ++k) {
            const bool same = (m == 1 && k == 3) || (m == 2 && k == 4);
            EXPECT_EQ(out.results.verdict(m, k), same ? Verdict::Equal : Verdict::Unequal) << m << "," << k;
        }
    EXPECT_EQ(out.results.verdict(5, 1), out.results.verdict(1, 5));
    EXPECT_FALSE(out.results.verdict(3, 3).has_value());
}

TEST(Run, ThreeMatchesMultiWithThreeUsers) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto in = inputs({3, 3, 5}, 8);
        const auto a = run_protocol(params(Variant::Three, 3, 8, seed), kHash, in);
        const auto b = run_protocol(params(Variant::Multi, 3, 8, seed), kHash, in);
        EXPECT_EQ(a.results.totals, b.results.totals);
        EXPECT_EQ(a.trace.tp_codes, b.trace.tp_codes);
        EXPECT_EQ(a.transcript.events, b.transcript.events);
    }
}

TEST(Run, SixUsersGiveFifteenVerdicts) {
    const auto out = run_protocol(params(Variant::Multi, 6, 8, 1), kHash, inputs({1, 2, 3, 4, 5, 6}, 8));
    EXPECT_EQ(out.results.verdicts.size(), 15u);
    EXPECT_EQ(count_type(out.transcript, "verdict"), 15u);
    const auto j = out.results.to_json();
    EXPECT_EQ(j["verdicts"].size(), 6u);
    EXPECT_TRUE(j["verdicts"][0][0].is_null());
    EXPECT_EQ(j["verdicts"][1][4], "unequal");
}

TEST(Run, ChainInvariantHoldsInTrace) {
    const auto out = run_protocol(params(Variant::Multi, 5, 10, 77), kHash, inputs({1, 2, 3, 4, 5}, 10));
    const auto& R = out.trace.user_codes;
    for (std::size_t round = 2; round <= 5; ++round)
        for (std::size_t j = 0; j < R[0].size(); ++j) {
            BellCode acc(0);
            for (std::size_t i = 0; i < round; ++i) acc = acc ^ R[i][j];
            EXPECT_EQ(out.trace.tp_codes[round - 2][j], acc);
        }
}

TEST(Run, WrongInputsAreConfigErrors) {
    EXPECT_THROW(run_protocol(params(Variant::Hash2, 2, 8, 0), kHash, inputs({1}, 8)), ConfigError);
    const std::vector<SecretInput> mixed{SecretInput::from_uint(1, 8), SecretInput::from_uint(2, 9)};
    EXPECT_THROW(run_protocol(params(Variant::Hash2, 2, 8, 0), kHash, mixed), ConfigError);
    const std::vector<GroupSeq> short_groups(2, GroupSeq{{TwoBits(0)}, false});
    EXPECT_THROW(run_with_groups(params(Variant::Lwc2, 2, 8, 0), short_groups), ConfigError);
}

TEST(Run, ParticlesAreConservedProperty) {
    // Every prepared particle is either consumed by a measurement or
    // discarded on abort; the session itself asserts nothing is left over.
    SeededRng rng(5);
    for (int i = 0; i < 60; ++i) {
        const int k = 2 + static_cast<int>(rng.below(4));
        auto p = params(k == 2 ? Variant::Hash2 : Variant::Multi, k, 6, rng.next());
        if (rng.bit()) p.attack = {AttackKind::InterceptResend, "*"};
        std::vector<SecretInput> in;
        for (int u = 0; u < k; ++u) in.push_back(SecretInput::from_uint(rng.below(64), 6));
        const auto out = run_protocol(p, kHash, in);
        std::size_t prepared = 0;
        for (const auto& e : out.transcript.events)
            if (e.at("type") == "prepare") prepared += e.contains("count") ? e.at("count").get<std::size_t>() * (e.at("what") == "decoys" ? 1 : 2) : 0;
        EXPECT_EQ(prepared, out.trace.particles_prepared);
    }
}

TEST(Run, InterceptOnAllChannelsAbortsWithEnoughChecks) {
    auto p = params(Variant::Hash2, 2, 8, 3);
    p.check_count = 40;
    p.attack = {AttackKind::InterceptResend, "*"};
    const auto out = run_protocol(p, kHash, inputs({1, 1}, 8));
    EXPECT_TRUE(out.aborted);
    EXPECT_FALSE(out.abort_channel.empty());
    EXPECT_EQ(count_type(out.transcript, "abort"), 1u);
    EXPECT_EQ(out.transcript.events.back().at("type"), "abort");
}

TEST(Run, CleanRunsNeverAbort) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        for (auto v : {Variant::Llcll2, Variant::Hash2}) EXPECT_FALSE(run_protocol(params(v, 2, 8, seed), kHash, inputs({1, 2}, 8)).aborted);
        EXPECT_FALSE(run_protocol(params(Variant::Three, 3, 8, seed), kHash, inputs({1, 2, 3}, 8)).aborted);
    }
}

TEST(Transcript, SameSeedIsByteIdentical) {
    const auto p = params(Variant::Multi, 4, 12, 99);
    const auto a = run_protocol(p, kHash, inputs({1, 2, 3, 1}, 12)).transcript.to_jsonl();
    const auto b = run_protocol(p, kHash, inputs({1, 2, 3, 1}, 12)).transcript.to_jsonl();
    EXPECT_EQ(a, b);
    const auto c = run_protocol(params(Variant::Multi, 4, 12, 100), kHash, inputs({1, 2, 3, 1}, 12)).transcript.to_jsonl();
    EXPECT_NE(a, c);
}

TEST(Transcript, JsonlRoundTrip) {
    const auto t = run_protocol(params(Variant::Three, 3, 8, 5), kHash, inputs({1, 2, 3}, 8)).transcript;
    const auto text = t.to_jsonl();
    const auto back = Transcript::from_jsonl(text);
    EXPECT_EQ(back.header, t.header);
    EXPECT_EQ(back.events, t.events);
    EXPECT_EQ(back.to_jsonl(), text);
    EXPECT_THROW(Transcript::from_jsonl(""), ConfigError);
    EXPECT_THROW(Transcript::from_jsonl("{\"type\":\"q_send\"}\n"), ConfigError);
}

TEST(Transcript, HeaderCarriesParameters) {
    auto p = params(Variant::Hash2, 2, 10, 42);
    p.check_count = 7;
    const auto t = run_protocol(p, kHash, inputs({1, 2}, 10)).transcript;
    EXPECT_EQ(t.header.at("schema"), Transcript::kSchema);
    const auto back = params_from_header(t.header);
    EXPECT_EQ(back.variant, p.variant);
    EXPECT_EQ(back.input_bits, 10u);
    EXPECT_EQ(back.seed, 42u);
    EXPECT_EQ(back.checks(), 7u);
    EXPECT_EQ(t.header.at("secrets").at("inputs")[1], "002");
}

TEST(Transcript, ReplayReproducesAndDetectsDivergence) {
    auto p = params(Variant::Multi, 4, 8, 8);
    p.attack = {AttackKind::InterceptResend, "P2-TP"};
    const auto t = run_protocol(p, kHash, inputs({1, 2, 3, 4}, 8)).transcript;
    EXPECT_NO_THROW(verify_replay(t));
    EXPECT_EQ(replay(t).to_jsonl(), t.to_jsonl());

    auto tampered = t;
    const std::size_t victim = tampered.events.size() / 2;
    tampered.events[victim]["tampered"] = true;
    try {
        verify_replay(tampered);
        ADD_FAILURE() << "divergence not detected";
    } catch (const ReplayDivergence& e) {
        EXPECT_EQ(e.line(), victim + 1);
    }

    auto bad_header = t;
    bad_header.header["variant"] = "nope";
    EXPECT_THROW(replay(bad_header), ConfigError);
}

TEST(Transcript, ClassicalEventsAreExactlyThePublicKinds) {
    const auto out = run_protocol(params(Variant::Three, 3, 8, 1), kHash, inputs({1, 2, 3}, 8));
    std::set<std::string> pub, priv;
    for (const auto& e : out.transcript.events) (is_classical_event(e) ? pub : priv).insert(e.at("type"));
    EXPECT_EQ(pub, (std::set<std::string>{"check_announce", "check_outcomes", "check_result", "classical_send"}));
    EXPECT_TRUE(priv.contains("bell_measure"));
    EXPECT_TRUE(priv.contains("tp_score"));
}

TEST(Transcript, PassiveAttackerCapturesExactlyTheClassicalLines) {
    for (auto v : {Variant::Hash2, Variant::Three}) {
        auto p = params(v, v == Variant::Three ? 3 : 2, 8, 2);
        p.attack = {AttackKind::PassiveClassical, "*"};
        std::vector<SecretInput> in = inputs({4, 5, 4}, 8);
        in.resize(static_cast<std::size_t>(p.k));
        const auto out = run_protocol(p, kHash, in);
        EXPECT_FALSE(out.attacker.captured.empty());
        EXPECT_EQ(out.attacker.captured, out.transcript.classical_lines());
    }
}

TEST(Validator, CleanTranscriptsConform) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        EXPECT_TRUE(validate_transcript(run_protocol(params(Variant::Lwc2, 2, 9, seed), kHash, inputs({1, 300}, 9)).transcript).empty());
        EXPECT_TRUE(validate_transcript(run_protocol(params(Variant::Multi, 5, 8, seed), kHash, inputs({1, 2, 3, 4, 1}, 8)).transcript).empty());
    }
}

TEST(Validator, FlagsTamperedValues) {
    const auto t = run_protocol(params(Variant::Multi, 4, 8, 3), kHash, inputs({1, 2, 3, 4}, 8)).transcript;
    auto find = [&](std::string_view kind) -> std::size_t {
        for (std::size_t i = 0; i < t.events.size(); ++i)
            if (t.events[i].value("kind", "") == kind) return i;
        return t.events.size();
    };

    auto flip_first = [](ordered_json& values) {
        auto g = TwoBits::parse(values[0].get<std::string>());
        values[0] = (g ^ TwoBits(1)).str();
    };

    auto masked = t;
    flip_first(masked.events[find("masked")]["values"]);
    EXPECT_FALSE(validate_transcript(masked).empty());

    auto leak = t;
    leak.events[find("masked")]["kind"] = "raw_input";
    EXPECT_FALSE(validate_transcript(leak).empty());

    auto total = t;
    total.events[find("total")]["value"] = total.events[find("total")]["value"].get<int>() + 1;
    EXPECT_FALSE(validate_transcript(total).empty());

    auto routed = t;
    routed.events[find("pair_xor")]["to"] = "*";
    EXPECT_FALSE(validate_transcript(routed).empty());

    auto tp_leak = t;
    tp_leak.events[find("total")]["kind"] = "masked";
    EXPECT_FALSE(validate_transcript(tp_leak).empty());
}

TEST(Groups, RunWithGroupsMatchesDirectRun) {
    const auto p = params(Variant::Hash2, 2, 8, 6);
    const auto in = inputs({9, 10}, 8);
    const auto direct = run_protocol(p, kHash, in);
    std::vector<GroupSeq> g{group_bits(hash_digest(kHash, in[0])), group_bits(hash_digest(kHash, in[1]))};
    const auto grouped = run_with_groups(p, g);
    EXPECT_EQ(direct.results.totals, grouped.results.totals);
    EXPECT_EQ(direct.trace.user_codes, grouped.trace.user_codes);
    EXPECT_TRUE(grouped.transcript.header.at("secrets").contains("groups"));
}
