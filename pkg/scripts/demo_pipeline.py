#!/usr/bin/env python3
"""Offline walkthrough of the whole pipeline on a toy crate.

Runs index -> ingest -> prove -> minimize through the real CLI, with
canned model replies and canned verifier verdicts, so it works without
a Verus toolchain or an API key.  The first candidate fails, triage
picks AssertFail, matching toolchain notes are injected into the
refinement prompt, the second candidate passes, a helper lemma the
model introduced is harvested, and one redundant assert is stripped.

Usage: python3 scripts/demo_pipeline.py [--workdir demo_run]
"""

import argparse
import json
import shutil
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from proofkit.cli import main as proofkit

CRATE_SOURCE = """\
use vstd::prelude::*;

verus! {

pub open spec fn bounded(v: u64) -> bool {
    v <= 1000
}

/// Adding one to a strictly small counter keeps it within the cap,
/// because the cap itself sits strictly below the overflow boundary.
pub proof fn lemma_step_bounded(v: u64)
    requires v < 1000,
    ensures bounded((v + 1) as u64),
{
    admit();
}

pub proof fn lemma_counter_bound(n: u64)
    requires n < 1000,
    ensures bounded(n),
{
    admit();
}

} // verus!
"""

DOCS_MD = """\
# Assertion structure

Break a failing postcondition into smaller assert steps so the solver
sees each link of the chain separately.

# Spec function unfolding

An assert over an opaque spec function needs reveal or an assert-by
block before the solver can unfold the definition.
"""

CATEGORY_MAP = {"AssertFail": ["Assertion structure", "Spec function unfolding"]}

FAILING_CANDIDATE = """\
```rust
proof fn lemma_counter_bound(n: u64)
    requires n < 1000,
    ensures bounded(n),
{
    assert(bounded(n));
}
```"""

PASSING_CANDIDATE = """\
```rust
proof fn lemma_counter_bound(n: u64)
    requires n < 1000,
    ensures bounded(n),
{
    lemma_units_small(n);
    assert(n < 1000);
    assert(bounded(n));
}

proof fn lemma_units_small(u: u64)
    requires u < 1000,
    ensures u <= 1000,
{
}
```"""

# reply order: lemma-need analysis, candidate 1, refined candidate 2,
# description for the harvested helper lemma
PROVE_REPLIES = [
    "- the counter stays under the cap after the update",
    FAILING_CANDIDATE,
    PASSING_CANDIDATE,
    "shows a counter below the cap is also within the inclusive bound",
]

# one reply: description for the undocumented lemma_counter_bound record
EMBED_REPLIES = ["states the counter stays within the arena cap"]

ASSERT_FAIL_BLOCK = (
    "error: assertion failed\n"
    "  --> counter.rs:21:5\n"
    "   |\n"
    "21 |     assert(bounded(n));\n"
    "   |     ^^^^^^^^^^^^^^^^^^ assertion failed\n"
)
VERIFIED = "verification results:: 1 verified, 0 errors"

# attempt 1 fails, attempt 2 passes, harvest re-check passes
PROVE_VERDICTS = [
    {"exit": 1, "output": ASSERT_FAIL_BLOCK},
    {"exit": 0, "output": VERIFIED},
    {"exit": 0, "output": VERIFIED},
]

# baseline, drop assert(n < 1000) ok, drop assert(bounded(n)) twice refused
MINIMIZE_VERDICTS = [
    {"exit": 0, "output": VERIFIED},
    {"exit": 0, "output": VERIFIED},
    {"exit": 1, "output": ASSERT_FAIL_BLOCK},
    {"exit": 1, "output": ASSERT_FAIL_BLOCK},
]

CONFIG = "toolchain_version = demo-1\n"


def run(argv):
    print(f"\n$ proofkit {' '.join(argv)}")
    code = proofkit(argv)
    if code != 0:
        raise SystemExit(f"demo step failed with exit code {code}: {argv}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", default="demo_run", help="scratch directory")
    args = parser.parse_args()

    work = Path(args.workdir)
    if work.exists():
        shutil.rmtree(work)
    crate = work / "crate"
    crate.mkdir(parents=True)
    (crate / "counter.rs").write_text(CRATE_SOURCE)

    docs = work / "docs"
    docs.mkdir()
    (docs / "assertions.md").write_text(DOCS_MD)
    (work / "category_map.json").write_text(json.dumps(CATEGORY_MAP, indent=2))
    (work / "prove_replies.json").write_text(json.dumps(PROVE_REPLIES))
    (work / "embed_replies.json").write_text(json.dumps(EMBED_REPLIES))
    (work / "prove_verdicts.json").write_text(json.dumps(PROVE_VERDICTS))
    (work / "minimize_verdicts.json").write_text(json.dumps(MINIMIZE_VERDICTS))
    (work / "demo.cfg").write_text(CONFIG)

    print("== 1. index the crate ==")
    run(["index", str(crate), "--out", str(work / "index")])

    print("\n== 2. ingest toolchain knowledge and lemma records ==")
    run([
        "ingest", "--docs", str(docs), "--category-map", str(work / "category_map.json"),
        "--version", "demo-1", "--out", str(work / "kb"),
    ])
    run([
        "ingest", "--lemmas", str(work / "index" / "lemmas.jsonl"),
        "--script", str(work / "embed_replies.json"), "--out", str(work / "lemmas"),
    ])

    print("\n== 3. prove the target with one refinement round ==")
    run([
        "prove", "counter::lemma_counter_bound",
        "--src", str(crate),
        "--config", str(work / "demo.cfg"),
        "--script", str(work / "prove_replies.json"),
        "--mock-verifier", str(work / "prove_verdicts.json"),
        "--lemma-store", str(work / "lemmas"),
        "--verus-store", str(work / "kb"),
        "--sessions", str(work / "sessions"),
    ])

    session_file = work / "sessions" / "counter.lemma_counter_bound.json"
    session = json.loads(session_file.read_text())
    refine_prompt = session["attempts"][1]["prompt"]
    print(f"\nsession outcome: {session['outcome']} "
          f"({len(session['attempts'])} attempts, {session['refinements']} refinement)")
    print(f"harvested lemmas: {session['harvested_lemmas']}")
    injected = "## Toolchain knowledge" in refine_prompt
    print(f"refinement prompt carried toolchain notes: {injected}")
    if session["outcome"] != "proved" or not injected or not session["harvested_lemmas"]:
        raise SystemExit("demo expectations not met; see session file " + str(session_file))

    print("\n== 4. minimize the final proof ==")
    final = work / "crate" / "counter_final.rs"
    final.write_text(session["final_source"])
    run([
        "minimize", str(final), "--target", "lemma_counter_bound",
        "--mock-verifier", str(work / "minimize_verdicts.json"),
    ])
    minimized = final.with_suffix(".min.rs").read_text()
    kept = [ln.strip() for ln in minimized.splitlines() if "assert" in ln]
    print(f"asserts kept after minimization: {kept}")

    print(f"\nall artifacts are under {work}/")


if __name__ == "__main__":
    main()
