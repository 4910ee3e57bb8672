import json
from pathlib import Path

import numpy as np
import pytest

from rhk.io import ProblemSpec, build
from rhk.kernels import KernelParams
from rhk.models import HyperellipticCurve
from rhk.rhp import PsiSolution
from rhk.surface import Surface, angular_order

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def load_problem(name):
    spec = ProblemSpec.from_json(json.loads((PROBLEMS / f"{name}.json").read_text()))
    S, params, _ = build(spec)
    return S, params


@pytest.fixture(scope="session")
def g1():
    """Hyperelliptic genus 1, off-diagonal N=2 problem with nonzero r."""
    return PsiSolution(*load_problem("genus1"))


@pytest.fixture(scope="session")
def g2():
    """Hyperelliptic genus 2 with nonzero r away from the special branch point."""
    return PsiSolution(*load_problem("genus2"))


@pytest.fixture(scope="session")
def g0():
    """Rational N=3 covering with mixed ramification."""
    return PsiSolution(*load_problem("genus0"))


@pytest.fixture(scope="session")
def g1_r0(g1):
    """Same genus-1 surface with r = 0."""
    S = g1.S
    return PsiSolution(S, KernelParams(g1.params.p, g1.params.q, np.zeros(len(S.covering.points))))


@pytest.fixture(scope="session")
def g1_generic():
    """Genus 1 with branch points off the real line (no symmetry) and r = 0."""
    lam0 = 0.3 + 1.2j
    e = np.array([-2.5, -1, 1, 2.5], complex) + 0.05j * np.array([1, -1, 0.5, 0.2])
    e = e[angular_order(e, lam0)]
    return Surface(HyperellipticCurve(e), e, lam0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
