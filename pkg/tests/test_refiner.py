"""Refinement loop contracts, triage ordering, knowledge injection, harvest."""

import json

import pytest

from proofkit.code_index import LanguageObject, ObjectKind
from proofkit.gateway import ScriptedGateway, UsageRecord
from proofkit.lemma_kb import LemmaStore, VectorStore
from proofkit.prover import AblationFlags, Prover
from proofkit.refiner import (
    Attempt,
    ProofSession,
    build_refine_prompt,
    gather_knowledge,
    harvest_new_lemmas,
    refinement_loop,
    triage,
)
from proofkit.runner import Diagnostic, ErrorCategory, ScriptedVerifier
from proofkit.verus_kb import KnowledgeStore

from conftest import error_diag, fail_result, pass_result

PASS_OUTPUT = "verification results:: 1 verified, 0 errors"
FAIL_OUTPUT = (
    "error: assertion failed\n"
    "  --> candidate.rs:5:5\n"
    "   |\n"
    " 5 |     assert(false);\n"
)
UNKNOWN_OUTPUT = "z3 gave up without a verdict\n"

SOURCE = (
    "fn scaffold() {}\n"
    "\n"
    "proof fn lemma_t()\n"
    "    ensures true,\n"
    "{\n"
    "}\n"
    "\n"
    "fn tail() {}\n"
)


def loop_target():
    return LanguageObject(
        path="work::lemma_t",
        kind=ObjectKind.LEMMA_FUNCTION,
        signature="proof fn lemma_t()",
        ensures=["true"],
        body="{\n}",
        file="work.rs",
        span=(3, 6),
    )


def reply(n):
    return (
        "```rust\nproof fn lemma_t()\n    ensures true,\n"
        f"{{\n    assert(true); // try {n}\n}}\n```"
    )


def scripted_verifier(fails, passes=1, fail_output=FAIL_OUTPUT):
    script = [{"exit": 1, "output": fail_output}] * fails
    script += [{"exit": 0, "output": PASS_OUTPUT}] * passes
    return ScriptedVerifier(script)


def bare_prover(**kwargs):
    return Prover(None, None, **kwargs)


def run_loop(tmp_path, fails, *, max_attempts=10, store=None, version="", prover=None,
             gateway=None, passes=1, fail_output=FAIL_OUTPUT):
    gw = gateway or ScriptedGateway([reply(i) for i in range(fails + 1)])
    runner = scripted_verifier(fails, passes=passes, fail_output=fail_output)
    session = refinement_loop(
        loop_target(),
        SOURCE,
        prover or bare_prover(),
        runner,
        gw,
        store,
        max_attempts=max_attempts,
        toolchain_version=version,
        workdir=tmp_path,
    )
    return session, gw, runner


class TestTriage:
    def test_frequency_then_enum_order(self):
        diags = [
            error_diag(ErrorCategory.ASSERT_FAIL),
            error_diag(ErrorCategory.ASSERT_FAIL),
            error_diag(ErrorCategory.LOOP_INVARIANT),
        ]
        assert triage(diags) == [ErrorCategory.ASSERT_FAIL, ErrorCategory.LOOP_INVARIANT]

    def test_tie_breaks_on_declaration_order(self):
        diags = [error_diag(ErrorCategory.ASSERT_FAIL), error_diag(ErrorCategory.LOOP_INVARIANT)]
        assert triage(diags) == [ErrorCategory.LOOP_INVARIANT, ErrorCategory.ASSERT_FAIL]

    def test_unknown_only_when_sole(self):
        mixed = [error_diag(ErrorCategory.UNKNOWN), error_diag(ErrorCategory.ASSERT_FAIL)]
        assert ErrorCategory.UNKNOWN not in triage(mixed)
        assert triage([error_diag(ErrorCategory.UNKNOWN)]) == [ErrorCategory.UNKNOWN]

    def test_warnings_ignored(self):
        warn = Diagnostic(raw="warning: x", category=ErrorCategory.LOOP_INVARIANT, severity="warning")
        assert triage([warn]) == []
        assert triage([]) == []


def make_knowledge_store():
    store = KnowledgeStore()
    store.ingest_docs(
        {"notes.md": "# Assert help\nUse assert-by blocks.\n# Loop help\nState the invariant.\n"},
        "v1",
    )
    store.set_category_map({
        "AssertFail": ["Assert help"],
        "LoopInvariant": ["Loop help", "Assert help"],
    })
    return store


class TestGatherKnowledge:
    def test_dedup_across_categories(self):
        store = make_knowledge_store()
        docs = gather_knowledge(
            [ErrorCategory.LOOP_INVARIANT, ErrorCategory.ASSERT_FAIL], store, "v1", 8000
        )
        assert [d.key for d in docs] == ["Loop help", "Assert help"]

    def test_shared_budget(self):
        store = make_knowledge_store()
        first = store.lookup(ErrorCategory.LOOP_INVARIANT, "v1", 8000)[0]
        docs = gather_knowledge(
            [ErrorCategory.LOOP_INVARIANT, ErrorCategory.ASSERT_FAIL],
            store, "v1", len(first.body),
        )
        assert [d.key for d in docs] == ["Loop help"]

    def test_unknown_and_missing_store(self):
        store = make_knowledge_store()
        assert gather_knowledge([ErrorCategory.UNKNOWN], store, "v1", 8000) == []
        assert gather_knowledge([ErrorCategory.ASSERT_FAIL], None, "v1", 8000) == []


class TestBuildRefinePrompt:
    def test_contents(self):
        diags = [
            Diagnostic(raw="error: one"),
            Diagnostic(raw="error: two"),
        ]
        text = build_refine_prompt("candidate body", diags, [])
        assert "candidate body" in text
        assert "error: one\n\nerror: two" in text
        assert "## Toolchain knowledge" not in text

    def test_no_diagnostics_fallback(self):
        text = build_refine_prompt("c", [], [])
        assert "no diagnostics" in text

    def test_docs_render_knowledge_section(self):
        store = make_knowledge_store()
        docs = store.lookup(ErrorCategory.ASSERT_FAIL, "v1")
        text = build_refine_prompt("c", [Diagnostic(raw="error: x")], docs)
        assert "## Toolchain knowledge" in text
        assert "Use assert-by blocks." in text


class TestLoopContracts:
    @pytest.mark.parametrize("fails", [0, 1, 3, 10])
    def test_fail_n_then_pass_gives_n_plus_one_attempts(self, tmp_path, fails):
        session, _, runner = run_loop(tmp_path, fails)
        assert session.outcome == "proved"
        assert len(session.attempts) == fails + 1
        assert session.to_dict()["refinements"] == fails
        assert runner.remaining() == 0

    def test_always_fail_exhausts_budget_at_eleven(self, tmp_path):
        gw = ScriptedGateway([reply(i) for i in range(11)])
        runner = scripted_verifier(fails=11, passes=0)
        session = refinement_loop(
            loop_target(), SOURCE, bare_prover(), runner, gw, workdir=tmp_path
        )
        assert session.outcome == "budget_exhausted"
        assert len(session.attempts) == 11
        assert session.to_dict()["refinements"] == 10
        assert session.error is None

    def test_smaller_budget_respected(self, tmp_path):
        gw = ScriptedGateway([reply(i) for i in range(3)])
        runner = scripted_verifier(fails=3, passes=0)
        session = refinement_loop(
            loop_target(), SOURCE, bare_prover(), runner, gw,
            max_attempts=2, workdir=tmp_path,
        )
        assert session.outcome == "budget_exhausted"
        assert len(session.attempts) == 3

    def test_final_source_is_spliced_candidate(self, tmp_path):
        session, _, _ = run_loop(tmp_path, fails=1)
        assert session.final_source is not None
        assert session.final_source.startswith("fn scaffold() {}\n")
        assert session.final_source.endswith("fn tail() {}\n")
        assert "// try 1" in session.final_source

    def test_attempt_indices_and_prompts(self, tmp_path):
        session, _, _ = run_loop(tmp_path, fails=2)
        assert [a.index for a in session.attempts] == [0, 1, 2]
        assert "## Target" in session.attempts[0].prompt
        assert "## Current candidate" in session.attempts[1].prompt
        assert "error: assertion failed" in session.attempts[1].prompt

    def test_usage_conservation(self, tmp_path):
        session, gw, _ = run_loop(tmp_path, fails=4)
        assert session.usage_totals == gw.usage_report()
        assert all(a.usage.query_count == 1 for a in session.attempts)


class TestKnowledgeInjection:
    def test_refine_prompt_gets_docs_for_triaged_category(self, tmp_path):
        session, _, _ = run_loop(tmp_path, fails=1, store=make_knowledge_store(), version="v1")
        refine_prompt = session.attempts[1].prompt
        assert "## Toolchain knowledge" in refine_prompt
        assert "Use assert-by blocks." in refine_prompt

    def test_no_store_no_section(self, tmp_path):
        session, _, _ = run_loop(tmp_path, fails=1)
        assert "## Toolchain knowledge" not in session.attempts[1].prompt

    def test_ablation_flag_disables_section(self, tmp_path):
        prover = bare_prover(ablation=AblationFlags(use_verus=False))
        session, _, _ = run_loop(
            tmp_path, fails=1, store=make_knowledge_store(), version="v1", prover=prover
        )
        assert "## Toolchain knowledge" not in session.attempts[1].prompt

    def test_unknown_triage_skips_lookup(self, tmp_path):
        session, _, _ = run_loop(
            tmp_path, fails=1, store=make_knowledge_store(), version="v1",
            fail_output=UNKNOWN_OUTPUT,
        )
        assert "## Toolchain knowledge" not in session.attempts[1].prompt

    def test_version_mismatch_yields_no_docs(self, tmp_path):
        session, _, _ = run_loop(
            tmp_path, fails=1, store=make_knowledge_store(), version="v2"
        )
        assert "## Toolchain knowledge" not in session.attempts[1].prompt


class TestLoopErrorHandling:
    def test_gateway_exhaustion_recorded_not_raised(self, tmp_path):
        gw = ScriptedGateway([reply(0)])
        session, _, _ = run_loop(tmp_path, fails=2, gateway=gw)
        assert session.outcome == "failed"
        assert "ScriptExhausted" in session.error
        assert len(session.attempts) == 1

    def test_verifier_exhaustion_recorded(self, tmp_path):
        gw = ScriptedGateway([reply(0), reply(1)])
        runner = ScriptedVerifier([{"exit": 1, "output": FAIL_OUTPUT}])
        session = refinement_loop(
            loop_target(), SOURCE, bare_prover(), runner, gw, workdir=tmp_path
        )
        assert session.outcome == "failed"
        assert "ScriptExhausted" in session.error

    def test_empty_refinement_candidate(self, tmp_path):
        gw = ScriptedGateway([reply(0), "```\n\n```"])
        runner = scripted_verifier(fails=2, passes=0)
        session = refinement_loop(
            loop_target(), SOURCE, bare_prover(), runner, gw, workdir=tmp_path
        )
        assert session.outcome == "failed"
        assert "EmptyCompletion" in session.error


class TestProofSession:
    def make_session(self):
        return ProofSession(
            target="work::lemma_t",
            attempts=[
                Attempt(0, "p0", "c0", fail_result(ErrorCategory.LOOP_INVARIANT), UsageRecord(input_tokens=5, query_count=1)),
                Attempt(1, "p1", "c1", pass_result(), UsageRecord(output_tokens=7, query_count=1)),
            ],
            outcome="proved",
        )

    def test_usage_totals_sum(self):
        s = self.make_session()
        totals = s.usage_totals
        assert totals.input_tokens == 5 and totals.output_tokens == 7
        assert totals.query_count == 2

    def test_primary_category_from_last_failure(self):
        s = self.make_session()
        assert s.primary_category() == ErrorCategory.LOOP_INVARIANT
        assert ProofSession(target="t").primary_category() == ErrorCategory.UNKNOWN

    def test_save_round_trip(self, tmp_path):
        s = self.make_session()
        path = tmp_path / "session.json"
        s.save(path)
        data = json.loads(path.read_text())
        assert data["target"] == "work::lemma_t"
        assert data["outcome"] == "proved"
        assert data["refinements"] == 1
        assert data["usage_totals"]["query_count"] == 2
        assert len(data["attempts"]) == 2
        assert "final_source" in data


HARVEST_SOURCE = (
    "proof fn lemma_known()\n"
    "    ensures true,\n"
    "{\n"
    "}\n"
    "\n"
    "/// Division after multiplication stays below the original bound\n"
    "/// whenever the divisor is positive; used by the range proof.\n"
    "proof fn lemma_new_documented(a: u64)\n"
    "    ensures a >= 0,\n"
    "{\n"
    "}\n"
    "\n"
    "proof fn lemma_new_bare(b: u64)\n"
    "    ensures b >= 0,\n"
    "{\n"
    "}\n"
)


class TestHarvest:
    def harvest(self, tmp_path, runner, replies=()):
        gw = ScriptedGateway(list(replies))
        store = LemmaStore(VectorStore(gw.dimension, gw.embedder_id))
        added = harvest_new_lemmas(
            HARVEST_SOURCE,
            "work.rs",
            {"work::lemma_known"},
            runner,
            store,
            gw,
            workdir=tmp_path,
        )
        return added, store

    def test_new_lemmas_added_known_excluded(self, tmp_path):
        runner = scripted_verifier(fails=0, passes=2)
        added, store = self.harvest(
            tmp_path, runner, replies=["summary of the bare helper lemma"]
        )
        paths = [r.path for r in added]
        assert paths == ["work::lemma_new_bare", "work::lemma_new_documented"]
        assert "work::lemma_known" not in paths
        provenance = {r.path: r.provenance for r in added}
        assert provenance["work::lemma_new_documented"] == "documented"
        assert provenance["work::lemma_new_bare"] == "synthesized"
        assert len(store) == 2

    def test_failing_lemma_skipped_and_logged(self, tmp_path, caplog):
        runner = ScriptedVerifier(
            [{"exit": 1, "output": FAIL_OUTPUT}, {"exit": 0, "output": PASS_OUTPUT}]
        )
        with caplog.at_level("WARNING"):
            added, _ = self.harvest(tmp_path, runner, replies=["summary text"])
        assert [r.path for r in added] == ["work::lemma_new_documented"]
        assert "failed verification" in caplog.text

    def test_unparseable_source_harvests_nothing(self, tmp_path, caplog):
        gw = ScriptedGateway([])
        runner = scripted_verifier(fails=0)
        with caplog.at_level("WARNING"):
            added = harvest_new_lemmas(
                "proof fn lemma_broken(", "w.rs", set(), runner,
                LemmaStore(VectorStore(64, gw.embedder_id)), gw,
                workdir=tmp_path,
            )
        assert added == []
        assert "unparseable" in caplog.text

    def test_no_store_is_noop(self, tmp_path):
        runner = scripted_verifier(fails=0, passes=0)
        gw = ScriptedGateway([])
        added = harvest_new_lemmas(
            HARVEST_SOURCE, "w.rs", set(), runner, None, gw, workdir=tmp_path
        )
        assert added == []
        assert runner.remaining() == 0
