"""CLI behaviour and output-schema checks. Usage: cli_test.py <qpc binary> <docs dir>"""

import json
import os
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

import jsonschema

QPC = sys.argv[1] if len(sys.argv) > 1 else "build/qpc"
DOCS = Path(sys.argv[2] if len(sys.argv) > 2 else "docs")


def schema(name):
    return jsonschema.Draft202012Validator(json.loads((DOCS / f"{name}.schema.json").read_text()))


def qpc(*args, env=None):
    full_env = dict(os.environ)
    full_env.pop("QPC_HASH_KEY", None)
    full_env.update(env or {})
    return subprocess.run([QPC, *map(str, args)], capture_output=True, text=True, env=full_env, timeout=300)


class CliTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def inputs(self, values, bits):
        p = self.dir / f"in{len(list(self.dir.iterdir()))}.json"
        doc = {"inputs": values, "bit_length": bits}
        schema("inputs").validate(doc)
        p.write_text(json.dumps(doc))
        return p

    def assert_valid(self, name, doc):
        errors = [e.message for e in schema(name).iter_errors(doc)]
        self.assertEqual(errors, [], name)

    def assert_transcript_valid(self, path):
        lines = path.read_text().splitlines()
        self.assertEqual(json.loads(lines[0])["type"], "header")
        for line in lines:
            self.assert_valid("transcript", json.loads(line))
        return lines

    # exit codes

    def test_clean_run_exits_zero(self):
        r = qpc("run", "--protocol", "hash2", "--inputs", self.inputs(["a5", "a5"], 8), "--hash-key", "0badc0de",
                "--seed", 1)
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertIn("equal", r.stdout)

    def test_detected_attack_exits_two(self):
        r = qpc("run", "--protocol", "llcll2", "--inputs", self.inputs(["1", "2"], 4), "--seed", 2, "--attack",
                "intercept-resend", "--check-count", 40)
        self.assertEqual(r.returncode, 2, r.stderr)

    def test_config_errors_exit_one_and_name_the_flag(self):
        r = qpc("run", "--protocol", "three", "--k", 4, "--inputs", self.inputs(["1", "2", "3"], 4), "--hash-key", "00")
        self.assertEqual(r.returncode, 1)
        self.assertIn("--k", r.stderr)
        r = qpc("run", "--protocol", "llcll2", "--no-decoys", "--inputs", self.inputs(["1", "2"], 4))
        self.assertEqual(r.returncode, 1)
        self.assertIn("--no-decoys", r.stderr)
        r = qpc("run", "--protocol", "hash2", "--hash-bits", 512, "--inputs", self.inputs(["1", "2"], 4),
                "--hash-key", "00")
        self.assertEqual(r.returncode, 1)
        self.assertIn("--hash-bits", r.stderr)
        self.assertEqual(qpc("run", "--protocol", "five").returncode, 1)

    def test_oracle(self):
        r = qpc("oracle", "--a", "phi+", "--b", "psi-")
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertEqual(qpc("oracle", "--a", "phi+", "--b", "chi").returncode, 1)

    def test_verify_passes_and_mutated_coding_fails(self):
        out = self.dir / "v.json"
        r = qpc("verify", "--report", out)
        self.assertEqual(r.returncode, 0, r.stdout)
        self.assertIn("0.585", r.stdout)
        self.assertIn("1.585", r.stdout)
        doc = json.loads(out.read_text())
        self.assert_valid("verify", doc)
        self.assertTrue(doc["passed"])
        bad = self.dir / "bad.json"
        r = qpc("verify", "--coding", "phi+=00,phi-=10,psi+=01,psi-=11", "--report", bad)
        self.assertEqual(r.returncode, 3)
        doc = json.loads(bad.read_text())
        self.assert_valid("verify", doc)
        self.assertFalse(doc["passed"])

    # determinism

    def test_same_seed_gives_identical_transcript(self):
        inp = self.inputs(["3", "5", "3", "9"], 4)
        a, b = self.dir / "a.jsonl", self.dir / "b.jsonl"
        for t in (a, b):
            r = qpc("run", "--protocol", "multi", "--k", 4, "--inputs", inp, "--hash-key", "0badc0de", "--seed", 77,
                    "--transcript", t)
            self.assertEqual(r.returncode, 0, r.stderr)
        self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_config_file_matches_flags(self):
        inp = self.inputs(["3", "5", "3"], 4)
        a, b = self.dir / "a.jsonl", self.dir / "b.jsonl"
        conf = self.dir / "run.toml"
        conf.write_text(f'[run]\nprotocol = "three"\ninputs = "{inp}"\nhash-key = "0badc0de"\nseed = 11\n'
                        f'transcript = "{b}"\n')
        qpc("run", "--protocol", "three", "--inputs", inp, "--hash-key", "0badc0de", "--seed", 11, "--transcript", a)
        r = qpc("--config", conf, "run")
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_hash_key_from_environment(self):
        inp = self.inputs(["3", "5"], 4)
        a, b = self.dir / "a.jsonl", self.dir / "b.jsonl"
        qpc("run", "--protocol", "hash2", "--inputs", inp, "--hash-key", "c0ffee", "--seed", 3, "--transcript", a)
        qpc("run", "--protocol", "hash2", "--inputs", inp, "--seed", 3, "--transcript", b,
            env={"QPC_HASH_KEY": "c0ffee"})
        self.assertEqual(a.read_bytes(), b.read_bytes())

    # schemas

    def test_run_outputs_match_schemas(self):
        cases = [
            ("lwc2", ["1f", "1e"], 8, []),
            ("llcll2", ["1f", "1f"], 8, []),
            ("hash2", ["1f", "1e"], 8, ["--no-decoys"]),
            ("three", ["2a", "2a", "07"], 8, []),
            ("multi", ["1", "2", "1", "4", "5"], 3, ["--k", 5]),
            ("three", ["2a", "2b", "07"], 8, ["--attack", "intercept-resend", "--check-count", 30]),
            ("hash2", ["2a", "2b"], 8, ["--attack", "passive"]),
        ]
        for protocol, values, bits, extra in cases:
            with self.subTest(protocol=protocol, extra=extra):
                t, rep = self.dir / f"{protocol}.jsonl", self.dir / f"{protocol}.json"
                r = qpc("run", "--protocol", protocol, "--inputs", self.inputs(values, bits), "--hash-key", "0badc0de",
                        "--hash-bits", 16, "--seed", 5, "--transcript", t, "--report", rep, *extra)
                self.assertIn(r.returncode, (0, 2), r.stderr)
                self.assert_transcript_valid(t)
                doc = json.loads(rep.read_text())
                self.assert_valid("report", doc)
                self.assertEqual(doc["aborted"], r.returncode == 2)

    def test_trials_report_matches_schema(self):
        rep = self.dir / "t.json"
        r = qpc("run", "--protocol", "hash2", "--inputs", self.inputs(["1", "2"], 4), "--hash-key", "00", "--seed", 1,
                "--trials", 4, "--threads", 2, "--report", rep)
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(rep.read_text())
        self.assert_valid("report", doc)
        self.assertEqual(len(doc["runs"]), 4)

    def test_leakage_and_view_outputs_match_schemas(self):
        rep = self.dir / "l.json"
        self.assertEqual(qpc("leakage", "--report", rep).returncode, 0)
        self.assert_valid("leakage", json.loads(rep.read_text()))
        t = self.dir / "three.jsonl"
        qpc("run", "--protocol", "three", "--inputs", self.inputs(["2a", "2b", "07"], 8), "--hash-key", "00",
            "--seed", 9, "--transcript", t)
        for role in ("outside", "TP", "P1", "P3"):
            with self.subTest(role=role):
                view = self.dir / f"{role}.json"
                r = qpc("leakage", "--transcript", t, "--role", role, "--report", view)
                self.assertEqual(r.returncode, 0, r.stderr)
                doc = json.loads(view.read_text())
                self.assert_valid("view", doc)
                self.assertEqual(doc["inputs"], ["unknown"] * 3)
        self.assertEqual(qpc("leakage", "--transcript", t, "--role", "P7").returncode, 1)

    def test_attack_outputs_match_schemas(self):
        runs = [
            ["--experiment", "tp-bell", "--protocol", "lwc2", "--trials", 5],
            ["--experiment", "tp-bell", "--protocol", "hash2", "--trials", 5],
            ["--experiment", "detection", "--scheme", "decoy", "--attack", "intercept-resend", "--particles", 400],
            ["--experiment", "detection", "--scheme", "bellpair", "--attack", "intercept-resend", "--checks", 3,
             "--trials", 30],
        ]
        for args in runs:
            with self.subTest(args=args):
                rep = self.dir / "a.json"
                r = qpc("attack", *args, "--seed", 4, "--report", rep)
                self.assertEqual(r.returncode, 0, r.stderr)
                self.assert_valid("attack", json.loads(rep.read_text()))
        self.assertEqual(qpc("attack", "--experiment", "tp-bell", "--protocol", "three").returncode, 1)

    # negative controls: the schemas reject malformed documents

    def test_schemas_reject_malformed_documents(self):
        t = self.dir / "x.jsonl"
        qpc("run", "--protocol", "hash2", "--inputs", self.inputs(["1", "2"], 4), "--hash-key", "00", "--seed", 1,
            "--transcript", t)
        lines = [json.loads(l) for l in t.read_text().splitlines()]
        header = dict(lines[0], variant="quad")
        self.assertFalse(schema("transcript").is_valid(header))
        send = next(e for e in lines if e["type"] == "classical_send")
        self.assertFalse(schema("transcript").is_valid(dict(send, kind="raw_input")))
        self.assertFalse(schema("transcript").is_valid(dict(send, values=["02"])))
        self.assertFalse(schema("transcript").is_valid({"type": "mystery"}))
        self.assertFalse(schema("inputs").is_valid({"inputs": ["zz", "1"], "bit_length": 4}))
        self.assertFalse(schema("verify").is_valid({"schema": "qpc-verify/1", "checks": []}))


if __name__ == "__main__":
    unittest.main(argv=[sys.argv[0], "-v"])
