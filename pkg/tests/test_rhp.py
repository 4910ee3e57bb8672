import numpy as np
import pytest

from rhk.errors import PathThroughSingularity
from rhk.monodromy import monodromy_from_parameters
from rhk.rhp import exponents_for, match_mod1

PTS = [0.4 - 0.3j, -0.8 + 0.5j, 1.3 + 0.2j]


@pytest.fixture(scope="module", params=["g0", "g1", "g2"])
def sol(request):
    return request.getfixturevalue(request.param)


@pytest.fixture(scope="module")
def continued(sol):
    return [sol.monodromy_by_continuation(m) for m in range(sol.S.M)]


def test_normalization_at_lambda0(sol):
    assert np.max(np.abs(sol.psi_near_lambda0() - np.eye(sol.N))) < 1e-10


def test_determinant_closed_form(sol):
    for lam in PTS:
        Ps = sol.states(lam)
        d = np.linalg.det(sol.psi_from_states(Ps))
        c = sol.det_closed_form(Ps)
        assert abs(d - c) < 1e-9 * abs(c)


def test_inverse(sol):
    lam = PTS[1]
    assert np.max(np.abs(sol.psi_inverse(lam) @ sol.psi_eval(lam) - np.eye(sol.N))) < 1e-10


def test_lambda_derivative(sol):
    lam, h = PTS[0], 1e-5
    fd = (sol.psi_eval(lam + h) - sol.psi_eval(lam - h)) / (2 * h)
    an = sol.psi_lambda(lam)
    assert np.max(np.abs(fd - an)) < 1e-7 * np.max(np.abs(an))


def test_monodromy_matches_closed_form(sol, continued):
    S = sol.S
    rep = monodromy_from_parameters(sol.params, S.index_tables(), S)
    for X, Y in zip(continued, rep.dense()):
        assert np.max(np.abs(X - Y)) < 1e-8 * np.max(np.abs(Y))


def test_monodromy_product(sol, continued):
    P = np.eye(sol.N, dtype=complex)
    for X in continued:
        P = X @ P
    assert np.max(np.abs(P - np.eye(sol.N))) < 1e-9


def test_local_exponents(sol, continued):
    for m, X in enumerate(continued):
        ex = sol.local_exponents(m, X)
        assert len(ex.t) == sol.N
        assert ex.residual < 1e-8


def test_exponents_formula(g0):
    cov, params = g0.S.covering, g0.params
    for m in range(g0.S.M):
        t = exponents_for(cov, params, m)
        # sum over a k-fold point of (i - 1/2)/k - 1/2 vanishes, so the trace is sum_X k_X r_X
        trace = sum(pt.k * params.r[x] for x, pt in enumerate(cov.points) if pt.m == m)
        assert abs(t.sum() - trace) < 1e-14


def test_match_mod1():
    assert match_mod1([0.1, 0.7], [1.7, -0.9]) < 1e-14
    assert match_mod1([0.1, 0.7], [0.2, 0.7]) > 0.09


def test_contractible_loop(g1):
    assert g1.check_contractible(0.2 - 0.4j, 0.15) < 1e-8


def test_rejects_singular_point(g1):
    with pytest.raises(PathThroughSingularity):
        g1.psi_eval(complex(g1.S.lambdas[0]))
