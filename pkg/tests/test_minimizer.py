"""Assert discovery and minimization against scripted content verifiers."""

import random

import pytest

from proofkit.refiner import MinimizeError, find_assert_statements, minimize_proof

from conftest import FIXTURES, RuleVerifier

PLANTED = FIXTURES / "minimize" / "planted.rs"

# Asserts in planted.rs the scripted verifier insists on keeping.
NEEDED = [
    "assert(a <= 4096)",
    "assert(a + b <= 4096)",
    "assert(cap_ok((a + b) as u64))",
]
EXTRA = [
    "assert(b <= 4096)",
    "assert(a as int + b as int <= 4096)",
    "assert(cap_ok(a))",
]


def spans_text(text):
    return [text[a:b] for a, b in find_assert_statements(text)]


class TestFindAsserts:
    def test_simple_statement(self):
        text = "fn f() {\n    assert(x > 0);\n    let y = 1;\n}\n"
        assert spans_text(text) == ["assert(x > 0);"]

    def test_multiple_in_order(self):
        text = "{ assert(a); assert(b); }"
        assert spans_text(text) == ["assert(a);", "assert(b);"]

    def test_by_block_with_semicolon(self):
        text = "{\n    assert(p(x)) by {\n        helper(x);\n    };\n}\n"
        [got] = spans_text(text)
        assert got == "assert(p(x)) by {\n        helper(x);\n    };"

    def test_by_block_without_semicolon(self):
        text = "{\n    assert(p(x)) by {\n        helper(x);\n    }\n    next();\n}\n"
        [got] = spans_text(text)
        assert got.endswith("}")
        assert "helper(x);" in got
        assert "next" not in got

    def test_forall_by(self):
        text = (
            "{\n    assert forall|i: int| 0 <= i < n implies ok(i) by {\n"
            "        reveal(ok);\n    };\n}\n"
        )
        [got] = spans_text(text)
        assert got.startswith("assert forall") and got.endswith("};")

    def test_nonlinear_by_call_form(self):
        text = "{ assert(x * y >= 0) by(nonlinear_arith); }"
        assert spans_text(text) == ["assert(x * y >= 0) by(nonlinear_arith);"]

    def test_identifier_prefixes_not_matched(self):
        text = "{ my_assert(x); assert_forall_by(y); reassert(z); }"
        assert spans_text(text) == []

    def test_strings_and_comments_masked(self):
        text = '{ let s = "assert(fake);"; // assert(also_fake);\n    assert(real);\n}'
        assert spans_text(text) == ["assert(real);"]

    def test_nested_brackets_and_parens(self):
        text = "{ assert(v[i] <= f(v[j], (k + 1))); }"
        assert spans_text(text) == ["assert(v[i] <= f(v[j], (k + 1)));"]

    def test_statement_closed_by_brace(self):
        text = "{ assert(x) }"
        [got] = spans_text(text)
        assert got.strip() == "assert(x)"


def planted_verifier():
    return RuleVerifier(lambda text: all(n in text for n in NEEDED))


class TestPlantedFixture:
    def test_exactly_the_extras_are_removed(self, tmp_path):
        source = PLANTED.read_text()
        out, removed = minimize_proof(source, (12, 26), planted_verifier(), workdir=tmp_path)
        assert removed == 3
        for n in NEEDED:
            assert n in out
        for x in EXTRA:
            assert x not in out

    def test_line_count_shrinks_by_planted_amount(self, tmp_path):
        source = PLANTED.read_text()
        out, _ = minimize_proof(source, (12, 26), planted_verifier(), workdir=tmp_path)
        before = len(source.splitlines())
        after = len(out.splitlines())
        assert before - after == 3
        # about a tenth of the file, mirroring the expected real-world ratio
        assert 0.05 <= (before - after) / before <= 0.2

    def test_output_verifies_and_is_one_minimal(self, tmp_path):
        verifier = planted_verifier()
        out, _ = minimize_proof(PLANTED.read_text(), (12, 26), verifier, workdir=tmp_path)
        assert verifier.predicate(out)
        from proofkit.refiner import _remove_span

        region_spans = find_assert_statements(out)
        for span in region_spans:
            if any(n in out[span[0] : span[1]] for n in NEEDED):
                assert not verifier.predicate(_remove_span(out, span))

    def test_all_load_bearing_keeps_everything(self, tmp_path):
        source = PLANTED.read_text()
        verifier = RuleVerifier(lambda text: all(n in text for n in NEEDED + EXTRA))
        out, removed = minimize_proof(source, (12, 26), verifier, workdir=tmp_path)
        assert removed == 0
        assert out == source

    def test_asserts_outside_span_untouched(self, tmp_path):
        source = "fn a() { assert(outside); }\nproof fn b() {\n    assert(inside);\n}\n"
        out, removed = minimize_proof(
            source, (2, 4), RuleVerifier(lambda t: True), workdir=tmp_path
        )
        assert removed == 1
        assert "assert(outside)" in out
        assert "assert(inside)" not in out


class TestMinimizeErrors:
    def test_unverified_input_rejected(self, tmp_path):
        with pytest.raises(MinimizeError, match="does not verify"):
            minimize_proof(
                PLANTED.read_text(), (12, 26), RuleVerifier(lambda t: False), workdir=tmp_path
            )

    def test_span_out_of_range(self, tmp_path):
        with pytest.raises(MinimizeError, match="out of range"):
            minimize_proof("one line\n", (1, 9), RuleVerifier(lambda t: True), workdir=tmp_path)


class TestMultiPass:
    def test_removal_unlocked_by_later_removal(self, tmp_path):
        # Removing prop_a alone fails while prop_b is present, but once
        # prop_b goes the formula no longer needs prop_a either.  A single
        # pass would keep prop_a; the fixed-point iteration removes both.
        source = "proof fn lemma_x()\n{\n    assert(prop_a());\n    assert(prop_b());\n}\n"
        verifier = RuleVerifier(
            lambda text: ("prop_a()" in text) or ("prop_b()" not in text)
        )
        out, removed = minimize_proof(source, (1, 5), verifier, workdir=tmp_path)
        assert removed == 2
        assert "assert" not in out


def make_cnf(rng, n):
    """Random monotone formula: every clause needs one surviving member."""
    clauses = [
        set(rng.sample(range(n), rng.randint(1, min(3, n))))
        for _ in range(rng.randint(0, n + 1))
    ]

    def eval_set(present):
        return all(clause & present for clause in clauses)

    return clauses, eval_set


def instance_source(n):
    body = "".join(f"    assert(prop_{i}());\n" for i in range(n))
    return f"proof fn lemma_r()\n{{\n{body}}}\n"


def present_in(text, n):
    return {i for i in range(n) if f"prop_{i}()" in text}


def greedy_oracle(n, eval_set):
    """Abstract mirror of the pass/rescan removal order over index sets."""
    remaining = list(range(n))
    while True:
        removed_any = False
        i = 0
        while i < len(remaining):
            trial = remaining[:i] + remaining[i + 1 :]
            if eval_set(set(trial)):
                remaining = trial
                removed_any = True
            else:
                i += 1
        if not removed_any:
            break
    return remaining


class TestRandomizedInstances:
    @pytest.mark.parametrize("seed", range(40))
    def test_matches_oracle_and_is_one_minimal(self, tmp_path, seed):
        rng = random.Random(seed)
        n = rng.randint(1, 8)
        _, eval_set = make_cnf(rng, n)
        source = instance_source(n)
        verifier = RuleVerifier(lambda text: eval_set(present_in(text, n)))
        out, removed = minimize_proof(source, (1, n + 3), verifier, workdir=tmp_path)
        final = sorted(present_in(out, n))
        assert final == greedy_oracle(n, eval_set)
        assert eval_set(set(final))
        for i in final:
            assert not eval_set(set(final) - {i})
        assert removed == n - len(final)

    def test_no_asserts_is_a_noop(self, tmp_path):
        source = "proof fn lemma_e()\n{\n}\n"
        verifier = RuleVerifier(lambda t: True)
        out, removed = minimize_proof(source, (1, 3), verifier, workdir=tmp_path)
        assert (out, removed) == (source, 0)
        assert verifier.calls == 1
