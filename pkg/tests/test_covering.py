import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from rhk.covering import (
    PermutationRepresentation,
    build_covering,
    compose,
    cycles,
    intersection_indices,
    is_transitive,
    lift_loop,
)
from rhk.errors import RejectsDisconnected, RejectsIdentityProductViolation

LAM0 = 0.1 + 2j


def lambdas(M):
    return np.exp(2j * np.pi * np.arange(M) / M) * 1.0


def test_hyperelliptic_genus():
    for g in (1, 2, 3):
        M = 2 * g + 2
        cov = build_covering(PermutationRepresentation(2, [(1, 0)] * M), lambdas(M), LAM0)
        assert cov.genus == g
        assert cov.passport == tuple((2,) for _ in range(M))
        assert len(cov.branch_points) == M


def test_unramified_points_are_marked():
    perms = [(1, 0, 2), (1, 0, 2), (0, 2, 1), (0, 2, 1)]
    cov = build_covering(PermutationRepresentation(3, perms), lambdas(4), LAM0)
    assert cov.genus == 0
    assert list(cov.multiplicity) == [2, 1, 2, 1, 1, 2, 1, 2]
    for m in range(4):
        assert sorted(j for p in cov.points if p.m == m for j in p.sheets) == [0, 1, 2]


def test_identity_product_violation():
    with pytest.raises(RejectsIdentityProductViolation):
        build_covering(PermutationRepresentation(3, [(1, 0, 2), (0, 2, 1)]), lambdas(2), LAM0)


def test_disconnected_covering():
    with pytest.raises(RejectsDisconnected):
        build_covering(PermutationRepresentation(4, [(1, 0, 2, 3), (1, 0, 2, 3)]), lambdas(2), LAM0)


def test_not_a_permutation():
    with pytest.raises(ValueError):
        PermutationRepresentation(2, [(0, 0)])


def test_lift_loop_follows_permutation():
    cov = build_covering(PermutationRepresentation(2, [(1, 0)] * 4), lambdas(4), LAM0)
    assert lift_loop(cov, 1, 0).end == 1
    assert not lift_loop(cov, 1, 0).closed


def test_tables_without_realization_are_unavailable():
    cov = build_covering(PermutationRepresentation(2, [(1, 0)] * 4), lambdas(4), LAM0)
    assert not intersection_indices(cov).available


@st.composite
def coverings(draw):
    N = draw(st.integers(2, 4))
    M = draw(st.integers(2, 5))
    perms = [tuple(draw(st.permutations(range(N)))) for _ in range(M - 1)]
    # last permutation closes the product: s_M o ... o s_1 = id
    total = compose(perms)
    inv = [0] * N
    for i, v in enumerate(total):
        inv[v] = i
    return N, perms + [tuple(inv)]


@settings(max_examples=60, deadline=None)
@given(coverings())
def test_riemann_hurwitz(data):
    N, perms = data
    assume(is_transitive(N, perms))
    total = sum(len(c) - 1 for s in perms for c in cycles(s))
    assume(total % 2 == 0)
    cov = build_covering(PermutationRepresentation(N, perms), lambdas(len(perms)), LAM0)
    assert 2 * cov.genus - 2 == -2 * N + sum(p.k - 1 for p in cov.points)
    assert cov.genus >= 0
    assert cov.point_index.shape == (len(perms), N)
    for m in range(len(perms)):
        for j in range(N):
            assert j in cov.points[cov.point_index[m, j]].sheets
