import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rhk.errors import RejectsDiagonalizable, RejectsDisconnected, RejectsIdentityProductViolation, ValidationError
from rhk.kernels import KernelParams
from rhk.monodromy import (
    MonodromyRepresentation,
    QuasiPermMatrix,
    conjugate,
    dumps,
    lattice_equivalent,
    monodromy_from_parameters,
    parameter_count,
    parameters_from_monodromy,
    project_to_permutation,
    validate_representation,
)

LAM = (1.0, 1j, -1.0, -1j)
LAM0 = 0.1 + 2j
OFF = np.array([[0, 1], [-1, 0]], complex)


def test_quasi_perm_roundtrip():
    A = np.array([[0, 2j, 0], [0, 0, -1], [0.5, 0, 0]])
    Q = QuasiPermMatrix.from_dense(A)
    assert Q.support == (1, 2, 0)
    assert np.array_equal(Q.dense(), A)
    # column 0 goes to row 2, column 1 to row 0, column 2 to row 1
    assert Q.permutation() == (2, 0, 1)


def test_quasi_perm_rejects_bad_input():
    with pytest.raises(ValidationError):
        QuasiPermMatrix((0, 0), (1, 1))
    with pytest.raises(ValidationError):
        QuasiPermMatrix((1, 0), (1, 0))
    with pytest.raises(ValidationError):
        QuasiPermMatrix.from_dense(np.ones((2, 2)))


def test_off_diagonal_representation_is_valid():
    rep = MonodromyRepresentation.from_dense([OFF] * 4, LAM, LAM0)
    report = validate_representation(rep)
    assert report.valid and report.transitive and report.product_residual == 0
    assert project_to_permutation(rep).perms == ((1, 0),) * 4


def test_identity_representation_is_diagonalizable():
    rep = MonodromyRepresentation.from_dense([np.eye(2)] * 4, LAM, LAM0)
    with pytest.raises((RejectsDiagonalizable, RejectsDisconnected)):
        validate_representation(rep)
    assert not validate_representation(rep, strict=False).valid


def test_direct_sum_is_disconnected():
    B = np.zeros((3, 3), complex)
    B[0, 0] = 1
    B[1:, 1:] = OFF
    rep = MonodromyRepresentation.from_dense([B] * 4, LAM, LAM0)
    with pytest.raises(RejectsDisconnected):
        validate_representation(rep)


def test_product_violation():
    rep = MonodromyRepresentation.from_dense([OFF, OFF, OFF, 2 * OFF], LAM, LAM0)
    with pytest.raises(RejectsIdentityProductViolation):
        validate_representation(rep)


def test_three_cycle_projection():
    Q = QuasiPermMatrix((2, 0, 1), (1, 1, 1))
    s = Q.permutation()
    assert sorted(s) == [0, 1, 2] and all(s[j] != j for j in range(3))


def test_json_roundtrip():
    rep = MonodromyRepresentation.from_dense([OFF * np.exp(0.3j)] * 2 + [OFF * np.exp(-0.3j)] * 2, LAM, LAM0)
    back = MonodromyRepresentation.from_json(json.loads(dumps(rep)))
    assert back == rep


def test_parameter_count():
    assert parameter_count(2, 4) == 5
    assert parameter_count(2, 6) == 9
    assert parameter_count(3, 4) == 7


def test_forward_map_support_and_product(g1):
    S = g1.S
    rep = monodromy_from_parameters(g1.params, S.index_tables(), S)
    assert np.max(np.abs(rep.product() - np.eye(2))) < 1e-12
    assert project_to_permutation(rep).perms == tuple(tuple(s) for s in S.covering.perms)


def test_zero_parameters_give_unimodular_entries(g1):
    S = g1.S
    rep = monodromy_from_parameters(KernelParams(np.zeros(1), np.zeros(1), np.zeros(4)), S.index_tables(), S)
    for A in rep.dense():
        assert np.allclose(np.abs(A[np.abs(A) > 0]), 1)


def reproduces(rep, inv, S):
    back = monodromy_from_parameters(inv.params, S.index_tables(), S)
    back = conjugate(back, np.exp(2j * np.pi * inv.delta))
    return max(np.max(np.abs(a - b)) for a, b in zip(rep.dense(), back.dense()))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.4, 0.4), min_size=8, max_size=8))
def test_parameter_roundtrip(g1, x):
    S = g1.S
    p = np.array([x[0] + 0.1j * x[1]])
    q = np.array([x[2] + 0.1j * x[3]])
    r = np.array([x[4], x[5], x[6] + 0.1j * x[7], 0])
    r[3] = -r[:3].sum()
    params = KernelParams(p, q, r)
    rep = monodromy_from_parameters(params, S.index_tables(), S)
    inv = parameters_from_monodromy(rep, S.index_tables(), S)
    assert reproduces(rep, inv, S) < 1e-10


def test_conjugation_changes_only_delta(g1):
    S = g1.S
    rep = monodromy_from_parameters(g1.params, S.index_tables(), S)
    a = parameters_from_monodromy(rep, S.index_tables(), S)
    b = parameters_from_monodromy(conjugate(rep, [1, np.exp(0.7j)]), S.index_tables(), S)
    # equal up to integer shifts of the exponents (log branches)
    assert lattice_equivalent(a.params, b.params, S.index_tables(), S) < 1e-10
    assert not np.allclose(a.delta, b.delta)


def test_rational_roundtrip(g0):
    S = g0.S
    rep = monodromy_from_parameters(g0.params, S.index_tables(), S)
    inv = parameters_from_monodromy(rep, S.index_tables(), S)
    assert reproduces(rep, inv, S) < 1e-10
    assert lattice_equivalent(inv.params, g0.params, S.index_tables(), S) < 1e-10
