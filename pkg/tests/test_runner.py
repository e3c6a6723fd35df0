"""Diagnostics parsing, triage rules, and verifier process handling."""

import json
import os
import stat

import pytest

from proofkit.runner import (
    CATEGORY_ORDER,
    ErrorCategory,
    ScriptedVerifier,
    ScriptExhausted,
    ToolchainMissing,
    VerusRunner,
    categorize,
    classify_phase,
    default_rules,
    load_rules,
    parse_diagnostics,
)

from conftest import DATA


SAMPLE_OUTPUT = """\
error: postcondition not satisfied
  --> src/lib.rs:18:5
   |
16 |             ret >= a,
   |             -------- failed this postcondition
18 |         b
   |         ^

note: this error originates in the macro `verus`

warning: unused variable: `ghost_idx`
  --> src/lib.rs:7:9

error: assertion failed
  --> src/lib.rs:25:5
   |
25 |     assert(b >= a);
   |     ^^^^^^^^^^^^^^ assertion failed

error: aborting due to 2 previous errors
"""


class TestCategoryEnum:
    def test_declaration_order_is_the_tie_break_order(self):
        assert [c.value for c in CATEGORY_ORDER] == [
            "TypeMismatch",
            "DecreasesMissing",
            "LoopInvariant",
            "ArithmeticOverflow",
            "BitVector",
            "SpecSyntax",
            "PreconditionFail",
            "PostconditionFail",
            "AssertFail",
            "InvariantNotPreserved",
            "Unknown",
        ]


class TestRules:
    def test_default_rules_load_and_validate(self):
        rules = default_rules()
        assert rules["rules"][0]["keywords"] == ["mismatched types"]

    def test_bad_category_rejected(self, tmp_path):
        bad = tmp_path / "rules.json"
        bad.write_text(json.dumps({"syntax_markers": [], "rules": [
            {"keywords": ["x"], "category": "NotReal"}
        ]}))
        with pytest.raises(ValueError):
            load_rules(bad)

    def test_rules_are_data_first_match_wins(self):
        block = "error: mismatched types\nnote: expected `u64`"
        assert categorize(block, "syntax") is ErrorCategory.TYPE_MISMATCH

    def test_invariant_refines_on_atomic(self):
        atomic = "error: invariant not satisfied\nthis atomic invariant is not maintained"
        loop = "error: invariant not satisfied at end of loop body"
        assert categorize(atomic, "verification") is ErrorCategory.INVARIANT_NOT_PRESERVED
        assert categorize(loop, "verification") is ErrorCategory.LOOP_INVARIANT

    def test_expected_requires_syntax_phase(self):
        block = "error: expected expression"
        assert categorize(block, "syntax") is ErrorCategory.SPEC_SYNTAX
        assert categorize(block, "verification") is ErrorCategory.UNKNOWN


class TestPhase:
    def test_error_code_means_syntax(self):
        assert classify_phase("error[E0308]: mismatched types") == "syntax"

    def test_marker_means_syntax(self):
        assert classify_phase("error: cannot find value `x` in this scope") == "syntax"

    def test_plain_verification(self):
        assert classify_phase("error: postcondition not satisfied") == "verification"


class TestParseDiagnostics:
    def test_blocks_split_and_notes_skipped(self):
        diags = parse_diagnostics(SAMPLE_OUTPUT)
        assert len(diags) == 3
        assert [d.severity for d in diags] == ["error", "warning", "error"]
        assert diags[0].category is ErrorCategory.POSTCONDITION_FAIL
        assert diags[2].category is ErrorCategory.ASSERT_FAIL

    def test_summary_trailer_not_a_diagnostic(self):
        diags = parse_diagnostics(SAMPLE_OUTPUT)
        assert not any("aborting" in d.raw.splitlines()[0] for d in diags)

    def test_location_extracted(self):
        diags = parse_diagnostics(SAMPLE_OUTPUT)
        assert (diags[0].file, diags[0].line) == ("src/lib.rs", 18)

    def test_clause_extracted_from_failed_marker(self):
        diags = parse_diagnostics(SAMPLE_OUTPUT)
        assert diags[0].clause == "ret >= a,"

    def test_empty_output(self):
        assert parse_diagnostics("") == []
        assert parse_diagnostics("   \n  ") == []

    def test_garbage_preserved_as_unknown(self):
        diags = parse_diagnostics("segfault core dumped at 0x0000")
        assert len(diags) == 1
        assert diags[0].category is ErrorCategory.UNKNOWN
        assert "segfault" in diags[0].raw

    def test_only_notes_and_trailers_still_yield_unknown(self):
        raw = "note: just a note\nerror: aborting due to 1 previous error\n"
        diags = parse_diagnostics(raw)
        assert len(diags) == 1
        assert diags[0].category is ErrorCategory.UNKNOWN

    def test_verus_tally_line_skipped(self):
        raw = (
            "error: assertion failed\n  --> a.rs:2:1\n\n"
            "error: verification results:: 3 verified, 1 errors\n"
        )
        diags = parse_diagnostics(raw)
        assert len(diags) == 1


class TestCorpus:
    def load_corpus(self):
        entries = []
        for line in (DATA / "error_corpus.jsonl").read_text().splitlines():
            if line.strip():
                entries.append(json.loads(line))
        return entries

    def test_corpus_is_large_enough(self):
        entries = self.load_corpus()
        assert len(entries) >= 20
        non_unknown = [e for e in entries if e["label"] != "Unknown"]
        assert len(non_unknown) >= 20

    def test_every_label_is_a_category(self):
        for entry in self.load_corpus():
            ErrorCategory(entry["label"])

    def test_each_block_parses_to_one_error(self):
        for entry in self.load_corpus():
            diags = parse_diagnostics(entry["block"])
            assert len(diags) == 1, entry["block"].splitlines()[0]
            assert diags[0].severity == "error"


def write_fake_verifier(path, body):
    path.write_text("#!/bin/sh\n" + body)
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


class TestVerusRunner:
    def test_success_on_exit_zero(self, tmp_path):
        binary = write_fake_verifier(tmp_path / "verus", "echo verified; exit 0\n")
        runner = VerusRunner(binary=binary, toolchain_version="fake-1.0")
        result = runner.run_verifier(tmp_path / "target.rs")
        assert result.success
        assert result.diagnostics == []
        assert result.toolchain_version == "fake-1.0"
        assert result.elapsed > 0

    def test_failure_parses_diagnostics_from_both_streams(self, tmp_path):
        binary = write_fake_verifier(
            tmp_path / "verus",
            'echo "error: assertion failed" 1>&2; exit 1\n',
        )
        runner = VerusRunner(binary=binary)
        result = runner.run_verifier(tmp_path / "t.rs")
        assert not result.success
        assert result.diagnostics[0].category is ErrorCategory.ASSERT_FAIL

    def test_flags_and_target_passed(self, tmp_path):
        log = tmp_path / "argv.txt"
        binary = write_fake_verifier(
            tmp_path / "verus", f'echo "$@" > {log}; exit 0\n'
        )
        runner = VerusRunner(binary=binary, flags=("--crate-type=lib",))
        runner.run_verifier(tmp_path / "t.rs")
        assert log.read_text().split() == ["--crate-type=lib", str(tmp_path / "t.rs")]

    def test_missing_binary_raises_toolchain_missing(self, tmp_path):
        runner = VerusRunner(binary=str(tmp_path / "does-not-exist"))
        with pytest.raises(ToolchainMissing):
            runner.run_verifier(tmp_path / "t.rs")

    def test_timeout_reported_not_raised(self, tmp_path):
        binary = write_fake_verifier(tmp_path / "verus", "sleep 5\n")
        runner = VerusRunner(binary=binary, timeout=0.2)
        result = runner.run_verifier(tmp_path / "t.rs")
        assert not result.success
        assert result.timed_out
        assert len(result.diagnostics) == 1
        assert "timed out" in result.diagnostics[0].raw


class TestScriptedVerifier:
    def test_replay_and_exhaustion(self):
        verifier = ScriptedVerifier(
            [
                {"exit": 1, "output": "error: assertion failed"},
                {"exit": 0, "output": ""},
            ]
        )
        first = verifier.run_verifier("a.rs")
        assert not first.success
        assert first.diagnostics[0].category is ErrorCategory.ASSERT_FAIL
        second = verifier.run_verifier("b.rs")
        assert second.success
        assert verifier.calls == ["a.rs", "b.rs"]
        with pytest.raises(ScriptExhausted):
            verifier.run_verifier("c.rs")

    def test_from_file(self, tmp_path):
        script = tmp_path / "verdicts.json"
        script.write_text(json.dumps([{"exit": 0}]))
        verifier = ScriptedVerifier.from_file(script)
        assert verifier.remaining() == 1
        assert verifier.run_verifier("x.rs").success
