"""Riemann theta functions with (complex) characteristics.

The lattice sum

    theta[p, q](z | B) = sum_n exp(pi i (n+p)^T B (n+p) + 2 pi i (n+p)^T (z+q))

is truncated to the ellipsoid around the dominant lattice point on which every
dropped term is below ``tol`` times the largest term. Gradients and Hessians
in ``z`` are summed term by term over the same ellipsoid.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import NoneFound, NotPositiveDefinite, TruncationOverflow

__all__ = [
    "Characteristic",
    "ThetaEvaluation",
    "ThetaConfig",
    "theta",
    "theta_logder",
    "heat_check",
    "half_characteristics",
    "find_odd_nonsingular_characteristic",
]


@dataclass(frozen=True)
class ThetaConfig:
    tol: float = 1e-16
    max_points: int = 400_000


DEFAULT_CONFIG = ThetaConfig()


@dataclass(frozen=True)
class Characteristic:
    """Characteristic ``[p, q]``.

    Half-integer characteristics keep their exact numerators in ``half`` as
    ``(2p, 2q)`` integer tuples; ``p``/``q`` are then derived from them.
    """

    p: np.ndarray
    q: np.ndarray
    half: tuple | None = field(default=None, compare=False)

    @classmethod
    def zero(cls, g):
        return cls.from_half([0] * g, [0] * g)

    @classmethod
    def from_half(cls, p2, q2):
        p2 = tuple(int(v) for v in p2)
        q2 = tuple(int(v) for v in q2)
        return cls(np.array(p2, float) / 2, np.array(q2, float) / 2, (p2, q2))

    @classmethod
    def of(cls, p, q):
        p = np.atleast_1d(np.asarray(p, complex))
        q = np.atleast_1d(np.asarray(q, complex))
        p2, q2 = 2 * p, 2 * q
        if np.allclose(p2.imag, 0, atol=0) and np.allclose(q2.imag, 0, atol=0):
            if np.all(p2.real == np.round(p2.real)) and np.all(q2.real == np.round(q2.real)):
                return cls.from_half(np.round(p2.real), np.round(q2.real))
        return cls(p, q, None)

    @property
    def g(self):
        return len(self.p)

    @property
    def is_half_integer(self):
        return self.half is not None

    @property
    def parity(self):
        """0 for even, 1 for odd; only defined for half-integer characteristics."""
        if self.half is None:
            raise ValueError("parity is defined for half-integer characteristics only")
        p2, q2 = self.half
        return sum(a * b for a, b in zip(p2, q2)) % 2

    def __repr__(self):
        if self.half is not None:
            p2, q2 = self.half
            fmt = lambda v: " ".join("0" if a == 0 else f"{a}/2" for a in v)
            return f"Characteristic[{fmt(p2)} | {fmt(q2)}]"
        return f"Characteristic(p={self.p!r}, q={self.q!r})"


@dataclass
class ThetaEvaluation:
    value: complex | np.ndarray
    gradient: np.ndarray | None
    hessian: np.ndarray | None
    radius: float
    error_bound: float
    scale: float | np.ndarray
    npoints: int


def _check_B(B):
    B = np.asarray(B, complex)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError("B must be a square matrix")
    Y = B.imag
    Y = (Y + Y.T) / 2
    try:
        np.linalg.cholesky(Y)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("Im B is not positive definite") from None
    return B, Y


def theta(z, B, char=None, *, derivs=0, config=DEFAULT_CONFIG):
    """Evaluate theta[p,q](z|B) and optionally its z-gradient (derivs>=1) and Hessian (derivs=2).

    ``z`` may be a single g-vector or a batch of shape (K, g); the result's
    arrays gain a leading K axis in the batch case.
    """
    B, Y = _check_B(B)
    g = B.shape[0]
    z = np.asarray(z, complex)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[1] != g:
        raise ValueError(f"z has {z.shape[1]} components, B is {g}x{g}")
    if char is None:
        p = np.zeros(g, complex)
        q = np.zeros(g, complex)
    else:
        p = np.asarray(char.p, complex)
        q = np.asarray(char.q, complex)

    Yinv = np.linalg.inv(Y)
    # dominant lattice point: Re of the exponent is -pi (n - c)^T Y (n - c) + const
    centers = -(Yinv @ (B @ p + z + q).imag.T).T
    T = -np.log(config.tol) + 4.0
    half_widths = np.sqrt(T / np.pi * np.diag(Yinv))
    lo = np.floor(centers.min(axis=0) - half_widths).astype(int)
    hi = np.ceil(centers.max(axis=0) + half_widths).astype(int)
    npts = int(np.prod(hi - lo + 1))
    if npts > config.max_points:
        raise TruncationOverflow(f"theta lattice box needs {npts} points (cap {config.max_points})")
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    n = np.array(np.meshgrid(*axes, indexing="ij")).reshape(g, -1).T.astype(float)

    d = n[None, :, :] - centers[:, None, :]
    quad_form = np.einsum("kli,ij,klj->kl", d, Y, d)
    inside = np.pi * quad_form <= T

    m = n + p[None, :]
    expo = np.pi * 1j * np.einsum("li,ij,lj->l", m, B, m)[None, :] + 2j * np.pi * (z + q[None, :]) @ m.T
    expo = np.where(inside, expo, -np.inf)
    shift = expo.real.max(axis=1)
    terms = np.exp(expo - shift[:, None])
    scale = np.exp(shift)

    value = terms.sum(axis=1) * scale
    grad = hess = None
    if derivs >= 1:
        grad = (2j * np.pi) * (terms @ m) * scale[:, None]
    if derivs >= 2:
        hess = (2j * np.pi) ** 2 * np.einsum("kl,li,lj->kij", terms, m, m) * scale[:, None, None]
    radius = float(np.sqrt(T / np.pi / np.linalg.eigvalsh(Y).min()))
    err = float(np.exp(-T) * inside.sum(axis=1).max())
    if single:
        value = value[0]
        scale = float(scale[0])
        grad = None if grad is None else grad[0]
        hess = None if hess is None else hess[0]
    return ThetaEvaluation(value, grad, hess, radius, err, scale, int(inside.sum()))


def theta_logder(z, B, char=None, config=DEFAULT_CONFIG):
    """Return (theta, grad log theta, Hessian of log theta) at z."""
    ev = theta(z, B, char, derivs=2, config=config)
    val = np.asarray(ev.value)
    g1 = ev.gradient / val[..., None]
    h = ev.hessian / val[..., None, None] - g1[..., :, None] * g1[..., None, :]
    return ev.value, g1, h


def heat_check(z, B, char=None, h=1e-4):
    """Max over (a, b) of |d2 theta/dz_a dz_b - 4 pi i d theta / dB_ab|.

    The B-derivative is a fourth-order central difference; off-diagonal entries
    are perturbed symmetrically and the result halved.
    """
    B = np.asarray(B, complex)
    g = B.shape[0]
    ev = theta(z, B, char, derivs=2)
    worst = 0.0
    for a in range(g):
        for b in range(a, g):
            E = np.zeros((g, g), complex)
            E[a, b] = E[b, a] = h
            f = {k: theta(z, B + k * E, char).value for k in (-2, -1, 1, 2)}
            dtheta = (8 * (f[1] - f[-1]) - (f[2] - f[-2])) / (12 * h)
            if a != b:
                dtheta /= 2
            worst = max(worst, abs(ev.hessian[a, b] - 4j * np.pi * dtheta))
    return worst


def half_characteristics(g):
    """All 2^(2g) half-integer characteristics in a fixed scan order."""
    for bits in itertools.product((0, 1), repeat=2 * g):
        yield Characteristic.from_half(bits[:g], bits[g:])


def find_odd_nonsingular_characteristic(B, threshold=1e-8):
    """First odd half-characteristic (in scan order) with a non-vanishing gradient at z=0."""
    B = np.asarray(B, complex)
    g = B.shape[0]
    zero = np.zeros(g)
    for ch in half_characteristics(g):
        if ch.parity != 1:
            continue
        ev = theta(zero, B, ch, derivs=1)
        if np.linalg.norm(ev.gradient) > threshold * max(ev.scale, 1.0):
            return ch
    raise NoneFound("no non-singular odd half-integer characteristic; B looks degenerate")
