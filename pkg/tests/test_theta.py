import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rhk import theta as th
from rhk.errors import NotPositiveDefinite


def random_B(rng, g):
    X = rng.normal(size=(g, g))
    L = rng.normal(size=(g, g))
    return (X + X.T) / 2 + 1j * (L @ L.T + 0.4 * np.eye(g))


def quasi_periodicity_residual(z, B, char, n, nprime):
    """theta[p,q](z + n + B n') = exp(2 pi i (p.n - q.n') - pi i n'Bn' - 2 pi i n'.z) theta[p,q](z)."""
    lhs = th.theta(z + n + B @ nprime, B, char).value
    f = np.exp(2j * np.pi * (char.p @ n - char.q @ nprime) - 1j * np.pi * nprime @ B @ nprime - 2j * np.pi * nprime @ z)
    rhs = f * th.theta(z, B, char).value
    return abs(lhs - rhs) / max(abs(rhs), abs(lhs))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), g=st.sampled_from([1, 2]))
def test_quasi_periodicity(seed, g):
    rng = np.random.default_rng(seed)
    B = random_B(rng, g)
    z = rng.normal(size=g) + 1j * rng.normal(size=g) * 0.3
    char = th.Characteristic(rng.uniform(-1, 1, g) + 0.1j * rng.normal(size=g), rng.uniform(-1, 1, g))
    n = rng.integers(-2, 3, g)
    npr = rng.integers(-1, 2, g)
    assert quasi_periodicity_residual(z, B, char, n, npr) < 1e-11


def test_jacobi_triple_product():
    # theta(z | tau) = prod (1 - q^2m)(1 + q^(2m-1) e^(2 pi i z))(1 + q^(2m-1) e^(-2 pi i z)), q = e^(pi i tau)
    tau, z = 0.3 + 0.9j, 0.21 - 0.13j
    q = np.exp(1j * np.pi * tau)
    m = np.arange(1, 80)
    prod = np.prod((1 - q ** (2 * m)) * (1 + q ** (2 * m - 1) * np.exp(2j * np.pi * z)) * (1 + q ** (2 * m - 1) * np.exp(-2j * np.pi * z)))
    val = th.theta(np.array([z]), np.array([[tau]])).value
    assert abs(val - prod) < 1e-14 * abs(prod)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), g=st.sampled_from([1, 2]))
def test_heat_equation(seed, g):
    rng = np.random.default_rng(seed)
    B = random_B(rng, g)
    z = 0.5 * (rng.normal(size=g) + 1j * rng.normal(size=g))
    char = th.Characteristic(rng.uniform(0, 1, g), rng.uniform(0, 1, g))
    assert th.heat_check(z, B, char) < 1e-6


def test_gradient_matches_finite_difference():
    rng = np.random.default_rng(3)
    B = random_B(rng, 2)
    z = np.array([0.1 + 0.2j, -0.3 + 0.05j])
    char = th.Characteristic([0.2, 0.7], [0.1, 0.4])
    ev = th.theta(z, B, char, derivs=2)
    h = 1e-5
    for a in range(2):
        e = np.zeros(2)
        e[a] = h
        fd = (th.theta(z + e, B, char).value - th.theta(z - e, B, char).value) / (2 * h)
        assert abs(fd - ev.gradient[a]) < 1e-8 * ev.scale
        gd = (th.theta(z + e, B, char, derivs=1).gradient - th.theta(z - e, B, char, derivs=1).gradient) / (2 * h)
        assert np.max(np.abs(gd - ev.hessian[a])) < 1e-7 * ev.scale


def test_batch_evaluation_matches_single():
    rng = np.random.default_rng(5)
    B = random_B(rng, 2)
    Z = rng.normal(size=(4, 2)) + 0.2j
    ev = th.theta(Z, B, derivs=1)
    assert ev.value.shape == (4,) and ev.gradient.shape == (4, 2)
    for k in range(4):
        assert abs(ev.value[k] - th.theta(Z[k], B).value) < 1e-15 * abs(ev.value[k]) + 1e-300


@pytest.mark.parametrize("g", [1, 2, 3])
def test_half_characteristics_parity(g):
    chars = list(th.half_characteristics(g))
    assert len(chars) == 4**g
    odd = [c for c in chars if c.parity == 1]
    assert len(odd) == 2 ** (g - 1) * (2**g - 1)
    B = random_B(np.random.default_rng(g), g)
    for c in odd:
        ev = th.theta(np.zeros(g), B, c)
        assert abs(ev.value) < 1e-13 * ev.scale


def test_odd_nonsingular_characteristic():
    B = random_B(np.random.default_rng(11), 2)
    c = th.find_odd_nonsingular_characteristic(B)
    assert c.parity == 1
    assert np.linalg.norm(th.theta(np.zeros(2), B, c, derivs=1).gradient) > 1e-3


def test_characteristic_of_detects_half_integers():
    c = th.Characteristic.of([0.5], [1.0])
    assert c.is_half_integer and c.half == ((1,), (2,))
    assert not th.Characteristic.of([0.3], [0.5]).is_half_integer
    with pytest.raises(ValueError):
        th.Characteristic.of([0.3], [0.5]).parity


def test_rejects_indefinite_imaginary_part():
    with pytest.raises(NotPositiveDefinite):
        th.theta(np.zeros(1), np.array([[0.2 - 1j]]))
