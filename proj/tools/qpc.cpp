// qpc: run, verify and analyze the Bell-swapping comparison protocols.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "qpc/analysis.hpp"
#include "qpc/protocol.hpp"

namespace {

using qpc::ConfigError;
using qpc::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitAbort = 2;
constexpr int kExitFailed = 3;

std::uint64_t os_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
}

std::vector<qpc::SecretInput> load_inputs(const std::string& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("--inputs: " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("inputs") || !j.contains("bit_length") || !j["inputs"].is_array() ||
        !j["bit_length"].is_number_unsigned())
        throw ConfigError("--inputs: expected {\"inputs\": [\"<hex>\", ...], \"bit_length\": L}");
    const auto bits = j["bit_length"].get<std::size_t>();
    std::vector<qpc::SecretInput> out;
    for (const auto& x : j["inputs"]) {
        if (!x.is_string()) throw ConfigError("--inputs: every input must be a hex string");
        out.push_back(qpc::SecretInput::from_hex(x.get<std::string>(), bits));
    }
    return out;
}

std::vector<std::uint8_t> random_key() {
    std::random_device rd;
    std::vector<std::uint8_t> key(16);
    for (auto& b : key) b = static_cast<std::uint8_t>(rd() & 0xFF);
    return key;
}

void print_matrix(const qpc::PairwiseResults& r, std::ostream& out) {
    out << "verdicts (= equal, x unequal, . not published)\n     ";
    for (int b = 1; b <= r.k; ++b) out << " P" << b << (b < 10 ? " " : "");
    out << "\n";
    for (int a = 1; a <= r.k; ++a) {
        out << "P" << a << (a < 10 ? "   " : "  ");
        for (int b = 1; b <= r.k; ++b) {
            char c = '-';
            if (a != b) {
                const auto v = r.verdict(a, b);
                c = !v ? '.' : *v == qpc::Verdict::Equal ? '=' : 'x';
            }
            out << "  " << c << " ";
        }
        out << "\n";
    }
}

ordered_json run_report(const qpc::ProtocolParams& p, const qpc::RunOutcome& out) {
    ordered_json j;
    j["schema"] = "qpc-report/1";
    j["variant"] = qpc::variant_name(p.variant);
    j["k"] = p.k;
    j["seed"] = p.seed;
    j["input_bits"] = p.input_bits;
    j["hash_bits"] = p.hashed() ? ordered_json(p.hash_bits) : ordered_json(nullptr);
    j["check_scheme"] = p.check_scheme();
    j["check_count"] = p.checks();
    j["attack"] = {{"kind", qpc::attack_name(p.attack.kind)}, {"channel", p.attack.channel}};
    j["aborted"] = out.aborted;
    j["abort_channel"] = out.aborted ? ordered_json(out.abort_channel) : ordered_json(nullptr);
    ordered_json checks = ordered_json::array();
    for (const auto& c : out.checks)
        checks.push_back({{"channel", c.channel}, {"scheme", c.scheme}, {"checked", c.checked}, {"errors", c.errors},
                          {"error_rate", c.error_rate}, {"passed", c.passed}});
    j["checks"] = std::move(checks);
    j["results"] = out.results.to_json();
    const auto ec = qpc::execution_count(p.k);
    j["execution_count"] = {{"pairwise_min", ec.pairwise_min}, {"pairwise_max", ec.pairwise_max},
                            {"this_protocol", ec.this_protocol}};
    return j;
}

// ---------------------------------------------------------------------------

struct RunArgs {
    std::string protocol;
    int k = 0;
    std::string inputs;
    std::size_t hash_bits = 128;
    std::string hash_key;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> check_count;
    bool no_decoys = false;
    std::string attack = "none";
    std::string attack_channel = "*";
    std::string transcript;
    std::string report;
    std::size_t trials = 1;
    unsigned threads = 0;
};

int cmd_run(const RunArgs& a) {
    qpc::ProtocolParams p;
    p.variant = qpc::parse_variant(a.protocol);
    if (a.k != 0)
        p.k = a.k;
    else
        p.k = p.variant == qpc::Variant::Three || p.variant == qpc::Variant::Multi ? 3 : 2;
    p.hash_bits = a.hash_bits;
    p.check_count = a.check_count;
    p.decoys = !a.no_decoys;
    p.attack.kind = qpc::parse_attack(a.attack);
    p.attack.channel = a.attack_channel;
    p.seed = a.seed ? *a.seed : os_seed();
    if (a.inputs.empty()) throw ConfigError("--inputs is required");
    const auto inputs = load_inputs(a.inputs);
    if (!inputs.empty()) p.input_bits = inputs.front().length();
    if (a.trials == 0) throw ConfigError("--trials must be at least 1");
    if (a.trials > 1 && !a.transcript.empty()) throw ConfigError("--transcript needs a single run (--trials 1)");

    qpc::HashConfig hash;
    hash.output_bits = a.hash_bits;
    std::string key = a.hash_key;
    if (key.empty())
        if (const char* env = std::getenv("QPC_HASH_KEY")) key = env;
    if (!key.empty())
        hash.key = qpc::bytes_from_hex(key);
    else if (p.hashed()) {
        hash.key = random_key();
        std::cerr << "note: no hash key given; drew a fresh one (recorded in the transcript)\n";
    }
    if (p.hashed()) hash.validate();
    p.validate();
    if (inputs.size() != static_cast<std::size_t>(p.k))
        throw ConfigError("--inputs: expected " + std::to_string(p.k) + " inputs, got " + std::to_string(inputs.size()));

    if (a.trials == 1) {
        const auto out = qpc::run_protocol(p, hash, inputs);
        if (!a.transcript.empty()) write_file(a.transcript, out.transcript.to_jsonl());
        if (!a.report.empty()) write_file(a.report, run_report(p, out).dump(2) + "\n");
        std::cout << "protocol " << a.protocol << ", K=" << p.k << ", seed " << p.seed << "\n";
        if (out.aborted) std::cout << "ABORTED: eavesdropping detected on " << out.abort_channel << "\n";
        print_matrix(out.results, std::cout);
        return out.aborted ? kExitAbort : kExitOk;
    }

    const unsigned threads = a.threads ? a.threads : std::max(1u, std::thread::hardware_concurrency());
    std::vector<ordered_json> per(a.trials);
    std::vector<std::uint8_t> aborted(a.trials, 0);
    qpc::parallel_trials(a.trials, threads, [&](std::size_t t) {
        qpc::ProtocolParams q = p;
        q.seed = qpc::trial_seed(p.seed, t);
        const auto out = qpc::run_protocol(q, hash, inputs, {.record = false});
        aborted[t] = out.aborted;
        per[t] = run_report(q, out);
    });
    std::size_t n_abort = 0;
    for (auto x : aborted) n_abort += x;
    ordered_json rep = run_report(p, qpc::RunOutcome{});
    rep.erase("aborted");
    rep.erase("abort_channel");
    rep.erase("checks");
    rep.erase("results");
    rep["trials"] = a.trials;
    rep["aborted_runs"] = n_abort;
    rep["runs"] = per;
    if (!a.report.empty()) write_file(a.report, rep.dump(2) + "\n");
    std::cout << "protocol " << a.protocol << ", K=" << p.k << ", base seed " << p.seed << ", " << a.trials
              << " trials, " << n_abort << " aborted\n";
    return n_abort == a.trials ? kExitAbort : kExitOk;
}

// ---------------------------------------------------------------------------

qpc::BellCoding parse_coding(const std::string& spec) {
    qpc::BellCoding c;
    if (spec.empty()) return c;
    std::stringstream in(spec);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--coding: expected label=bits items, got '" + item + "'");
        try {
            const auto label = qpc::parse_label(item.substr(0, eq));
            c.codes[static_cast<std::size_t>(label)] = qpc::BellCode::parse(item.substr(eq + 1));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("--coding: ") + e.what());
        }
    }
    try {
        c.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("--coding: ") + e.what());
    }
    return c;
}

int cmd_verify(const std::string& coding_spec, const std::string& report) {
    const auto coding = parse_coding(coding_spec);
    const auto checks = qpc::verify_all(coding);
    bool ok = true;
    ordered_json j;
    j["schema"] = "qpc-verify/1";
    ordered_json arr = ordered_json::array();
    for (const auto& c : checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "\n";
        for (const auto& d : c.diffs) std::cout << "    " << d << "\n";
        ok = ok && c.passed;
        arr.push_back({{"name", c.name}, {"passed", c.passed}, {"diffs", c.diffs}});
    }
    const double l1 = qpc::leaked_bits(1), l2 = qpc::leaked_bits(2), mi = qpc::score_mutual_information();
    std::printf("leaked bits: score 1 -> %.3f (%.7f), score 2 -> %.3f (%.7f); score mutual information %.4f bits\n", l1, l1,
                l2, l2, mi);
    j["checks"] = std::move(arr);
    j["leaked_bits"] = {{"1", l1}, {"2", l2}};
    j["mutual_information"] = mi;
    j["passed"] = ok;
    if (!report.empty()) write_file(report, j.dump(2) + "\n");
    return ok ? kExitOk : kExitFailed;
}

int cmd_leakage(const std::string& transcript, const std::string& role, const std::string& report) {
    ordered_json j;
    if (transcript.empty()) {
        j["schema"] = "qpc-leakage/1";
        ordered_json classes = ordered_json::array();
        for (int s = 0; s <= 2; ++s) {
            ordered_json pairs = ordered_json::array();
            for (const auto& [a, b] : qpc::candidate_sets(s)) pairs.push_back(a.str() + "," + b.str());
            classes.push_back({{"score", s},
                               {"candidates", pairs},
                               {"leaked_bits", s == 0 ? ordered_json(nullptr) : ordered_json(qpc::leaked_bits(s))}});
        }
        j["classes"] = std::move(classes);
        j["mutual_information"] = qpc::score_mutual_information();
    } else {
        const auto t = qpc::Transcript::from_jsonl(read_file(transcript));
        j = qpc::observer_view(t, role.empty() ? "TP" : role).to_json();
    }
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (!report.empty()) write_file(report, text);
    return kExitOk;
}

struct AttackArgs {
    std::string experiment;
    std::string protocol = "lwc2";
    std::string scheme = "decoy";
    std::string attack = "intercept-resend";
    std::size_t checks = 10;
    std::size_t trials = 100;
    std::size_t particles = 0;
    std::size_t bits = 32;
    std::size_t hash_bits = 128;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string report;
};

int cmd_attack(const AttackArgs& a) {
    const std::uint64_t seed = a.seed ? *a.seed : os_seed();
    ordered_json j;
    if (a.experiment == "tp-bell") {
        const auto rep = qpc::tp_bell_attack_experiment(qpc::parse_variant(a.protocol), a.trials, seed, a.bits,
                                                        a.hash_bits);
        j = rep.to_json();
        std::cout << "tp-bell on " << rep.variant << ": P1 compared groups recovered " << rep.groups_recovered << "/"
                  << rep.trials << ", raw input recovered " << rep.inputs_recovered << "/" << rep.trials
                  << ", detected " << rep.detected << "/" << rep.trials << "\n";
    } else if (a.experiment == "detection") {
        const auto scheme = qpc::parse_check_scheme(a.scheme);
        const auto kind = qpc::parse_attack(a.attack);
        const unsigned threads = a.threads ? a.threads : std::max(1u, std::thread::hardware_concurrency());
        const auto rep = a.particles > 0 ? qpc::particle_detection_experiment(scheme, kind, a.particles, seed)
                                         : qpc::run_detection_experiment(scheme, kind, a.checks, a.trials, seed, threads);
        j = rep.to_json();
        std::printf("%s check vs %s: detected %zu/%zu (rate %.4f, expected %.4f)\n", rep.scheme.c_str(),
                    rep.attack.c_str(), rep.detected, rep.trials, rep.rate, rep.expected);
    } else {
        throw ConfigError("--experiment: expected tp-bell or detection");
    }
    j["seed"] = seed;
    if (!a.report.empty()) write_file(a.report, j.dump(2) + "\n");
    return kExitOk;
}

int cmd_oracle(const std::string& a, const std::string& b) {
    qpc::BellLabel la, lb;
    try {
        la = qpc::parse_label(a);
        lb = qpc::parse_label(b);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("oracle: ") + e.what());
    }
    ordered_json j;
    j["a"] = qpc::label_name(la);
    j["b"] = qpc::label_name(lb);
    ordered_json outs = ordered_json::array();
    for (const auto& o : qpc::oracle_swap_distribution(qpc::code_of(la), qpc::code_of(lb)))
        outs.push_back({{"measured", qpc::label_name(qpc::label_of(o.measured))},
                        {"measured_code", o.measured.str()},
                        {"collapsed", qpc::label_name(qpc::label_of(o.collapsed))},
                        {"collapsed_code", o.collapsed.str()},
                        {"probability", o.probability}});
    j["outcomes"] = std::move(outs);
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bell-state entanglement-swapping private comparison: simulate, verify, analyze"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file with option values");

    RunArgs run;
    auto* sub_run = app.add_subcommand("run", "Execute one protocol run (or --trials runs)");
    sub_run->add_option("--protocol", run.protocol, "lwc2, llcll2, hash2, three or multi")->required();
    sub_run->add_option("--k", run.k, "number of users (multi: 2..64)");
    sub_run->add_option("--inputs", run.inputs, "JSON file {\"inputs\": [hex, ...], \"bit_length\": L}");
    sub_run->add_option("--hash-bits", run.hash_bits, "digest length N (2..256)");
    sub_run->add_option("--hash-key", run.hash_key, "hex key for the keyed hash (else QPC_HASH_KEY)");
    sub_run->add_option("--seed", run.seed, "RNG seed (drawn from the OS if omitted)");
    sub_run->add_option("--check-count", run.check_count, "check particles per transmission");
    sub_run->add_flag("--no-decoys", run.no_decoys, "hash2 without decoy checks");
    sub_run->add_option("--attack", run.attack, "none, intercept-resend, measure-resend, passive, tp-bell");
    sub_run->add_option("--attack-channel", run.attack_channel, "quantum channel under attack, e.g. P1-TP, or *");
    sub_run->add_option("--transcript", run.transcript, "write the JSONL transcript here");
    sub_run->add_option("--report", run.report, "write the JSON report here");
    sub_run->add_option("--trials", run.trials, "independent runs with derived seeds");
    sub_run->add_option("--threads", run.threads, "worker threads for --trials");

    std::string coding, verify_report;
    auto* sub_verify = app.add_subcommand("verify", "Rebuild the relation and candidate tables and check the oracle");
    sub_verify->add_option("--coding", coding, "override the label coding, e.g. phi+=00,phi-=10,psi+=01,psi-=11");
    sub_verify->add_option("--report", verify_report, "write the JSON result here");

    std::string leak_transcript, leak_role, leak_report;
    auto* sub_leak = app.add_subcommand("leakage", "Leakage figures, or an observer's view of a transcript");
    sub_leak->add_option("--transcript", leak_transcript, "JSONL transcript to analyze");
    sub_leak->add_option("--role", leak_role, "outside, TP or P1..PK (default TP)");
    sub_leak->add_option("--report", leak_report, "write the JSON result here");

    AttackArgs atk;
    auto* sub_attack = app.add_subcommand("attack", "Attack experiments");
    sub_attack->add_option("--experiment", atk.experiment, "tp-bell or detection")->required();
    sub_attack->add_option("--protocol", atk.protocol, "tp-bell: lwc2 or hash2");
    sub_attack->add_option("--scheme", atk.scheme, "detection: decoy or bellpair");
    sub_attack->add_option("--attack", atk.attack, "detection: attacker kind");
    sub_attack->add_option("--checks", atk.checks, "detection: check particles per transmission");
    sub_attack->add_option("--particles", atk.particles, "detection: per-particle mode with this many particles");
    sub_attack->add_option("--trials", atk.trials, "number of runs");
    sub_attack->add_option("--bits", atk.bits, "tp-bell: input length L");
    sub_attack->add_option("--hash-bits", atk.hash_bits, "tp-bell: digest length N");
    sub_attack->add_option("--seed", atk.seed, "RNG seed (drawn from the OS if omitted)");
    sub_attack->add_option("--threads", atk.threads, "worker threads");
    sub_attack->add_option("--report", atk.report, "write the JSON result here");

    std::string oa, ob;
    auto* sub_oracle = app.add_subcommand("oracle", "Statevector swap distribution for two source pairs");
    sub_oracle->add_option("--a", oa, "first pair: phi+, phi-, psi+, psi-")->required();
    sub_oracle->add_option("--b", ob, "second pair")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*sub_run) return cmd_run(run);
        if (*sub_verify) return cmd_verify(coding, verify_report);
        if (*sub_leak) return cmd_leakage(leak_transcript, leak_role, leak_report);
        if (*sub_attack) return cmd_attack(atk);
        if (*sub_oracle) return cmd_oracle(oa, ob);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
