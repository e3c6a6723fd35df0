"""Shared fixtures and fake collaborators for the suite."""

from pathlib import Path

import pytest

from proofkit import ScriptedGateway, build_graph, ingest_source
from proofkit.runner import Diagnostic, ErrorCategory, VerificationResult

DATA = Path(__file__).parent / "data"
FIXTURES = Path(__file__).parent / "fixtures"


def make_gateway(replies=(), dimension=64):
    return ScriptedGateway(list(replies), dimension=dimension)


def error_diag(category=ErrorCategory.ASSERT_FAIL, raw="error: assertion failed"):
    return Diagnostic(raw=raw, category=category, severity="error")


def fail_result(*categories):
    cats = categories or (ErrorCategory.ASSERT_FAIL,)
    return VerificationResult(
        success=False,
        diagnostics=[error_diag(c) for c in cats],
        toolchain_version="fake",
    )


def pass_result():
    return VerificationResult(success=True, toolchain_version="fake")


class RuleVerifier:
    """Verifier double whose verdict is a predicate over the file text.

    Lets refinement and minimization tests model "this repair works" or
    "these asserts are load-bearing" without a real toolchain.
    """

    def __init__(self, predicate, diagnostics=None):
        self.predicate = predicate
        self.diagnostics = diagnostics or [error_diag()]
        self.calls = 0

    def run_verifier(self, path, timeout=None):
        self.calls += 1
        text = Path(path).read_text()
        if self.predicate(text):
            return pass_result()
        return VerificationResult(
            success=False,
            diagnostics=list(self.diagnostics),
            toolchain_version="fake",
        )


@pytest.fixture
def edge_crate_facts():
    return ingest_source(FIXTURES / "edge_kinds_crate")


@pytest.fixture
def edge_crate_graph(edge_crate_facts):
    return build_graph(edge_crate_facts)


@pytest.fixture
def motivating_facts():
    return ingest_source(FIXTURES / "motivating")


@pytest.fixture
def motivating_graph(motivating_facts):
    return build_graph(motivating_facts)
