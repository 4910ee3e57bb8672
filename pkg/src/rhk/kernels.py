"""Prime form, Szego kernels and the Bergmann kernel on a numerical surface.

All kernels are returned as scalar parts in the lam-chart: a (1/2, 1/2)-form
K(P, Q) is represented by k(P, Q) with K = k sqrt(dlam_P) sqrt(dlam_Q), and the
Bergmann kernel by w(P, Q) / (dlam_P dlam_Q). The spinor h of the prime form is
the continuous branch carried by each :class:`~rhk.surface.PathState`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import theta as th
from .errors import ExtrapolationUnstable, SingularCharacteristic, ThetaDivisorHit

__all__ = [
    "KernelParams",
    "prime_form",
    "szego",
    "szego_modified",
    "szego_a0",
    "bergmann",
    "bergmann_regular_at_branch",
    "projective_connection",
    "odd_char_for_point",
    "fay_determinant_check",
    "richardson",
    "DIVISOR_THRESHOLD",
]

DIVISOR_THRESHOLD = 1e-10
RICHARDSON_EPS = (1e-3, 5e-4, 2.5e-4)


@dataclass
class KernelParams:
    """Characteristic (p, q) and the constants r_X attached to the marked points.

    ``r`` has one entry per distinct sheet point of the covering (glued sheets
    share a constant); each counts with its ramification index, so the
    constraint is sum_X k_X r_X = 0.
    """

    p: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        self.p = np.atleast_1d(np.asarray(self.p, complex))
        self.q = np.atleast_1d(np.asarray(self.q, complex))
        self.r = np.atleast_1d(np.asarray(self.r, complex))

    @classmethod
    def zero(cls, surface, p=None, q=None):
        g = surface.g
        return cls(np.zeros(g) if p is None else p, np.zeros(g) if q is None else q, np.zeros(len(surface.covering.points)))

    @property
    def char(self):
        return th.Characteristic(self.p, self.q)

    def check(self, surface, tol=1e-12):
        k = surface.covering.multiplicity
        if len(self.r) != len(k):
            raise ValueError(f"need {len(k)} r-constants, got {len(self.r)}")
        if len(self.p) != surface.g or len(self.q) != surface.g:
            raise ValueError("p and q must have genus many components")
        if abs(k @ self.r) > tol * (1 + np.abs(self.r).sum()):
            raise ValueError("r-constants must satisfy sum_X k_X r_X = 0")
        return self

    def omega(self, surface):
        k = surface.covering.multiplicity
        return (k * self.r) @ surface.UX if surface.g else np.zeros(0, complex)

    def rmn(self, surface):
        """r_mn = sum_j r_m^(j) r_n^(j)."""
        cov = surface.covering
        R = self.r[cov.point_index]  # (M, N)
        return R @ R.T

    def to_json(self):
        c = lambda v: [[z.real, z.imag] for z in v]
        return {"p": c(self.p), "q": c(self.q), "r": c(self.r)}


def _numer(S, P, Q):
    if S.g == 0:
        return P.fib - Q.fib
    return th.theta(S.U(P) - S.U(Q), S.B, S.char).value


def prime_form(S, P, Q):
    """Scalar part e(P,Q) = E(P,Q) sqrt(dlam_P) sqrt(dlam_Q)."""
    for X in (P, Q):
        if abs(X.h) < 1e-150:
            raise SingularCharacteristic("h vanishes at the evaluation point")
    return _numer(S, P, Q) / (P.h * Q.h)


def _theta_ratio(S, z, char):
    """theta[p,q](z) / theta[p,q](0)-type ratio with divisor check on the denominator."""
    return th.theta(z, S.B, char).value


def _check_divisor(ev, where):
    ratio = abs(ev.value) / max(ev.scale, 1e-300)
    if ratio < DIVISOR_THRESHOLD:
        raise ThetaDivisorHit(f"theta[p,q]({where}) vanishes (relative size {ratio:.2e})", ratio)


def szego(S, P, Q, p, q):
    """Scalar part of S(P,Q) with characteristic (p, q)."""
    e = prime_form(S, P, Q)
    if S.g == 0:
        return 1.0 / e
    char = th.Characteristic(p, q)
    ev0 = th.theta(np.zeros(S.g), S.B, char)
    _check_divisor(ev0, "0")
    return th.theta(S.U(P) - S.U(Q), S.B, char).value / (ev0.value * e)


def szego_modified(S, P, Q, params: KernelParams):
    """Scalar part of the modified kernel hat S(P,Q) (reduces to :func:`szego` when r = 0)."""
    k = S.covering.multiplicity
    e = prime_form(S, P, Q)
    factor = np.exp((k * params.r) @ (P.logs - Q.logs))
    if S.g == 0:
        return factor / e
    Om = params.omega(S)
    char = params.char
    ev0 = th.theta(Om, S.B, char)
    _check_divisor(ev0, "Omega")
    return th.theta(S.U(P) - S.U(Q) + Om, S.B, char).value / (ev0.value * e) * factor


def szego_a0(S, P, p, q):
    """a0(P) = sum_a d_a log theta[p,q](0) w_a(P) (lam-chart)."""
    if S.g == 0:
        return 0j
    char = th.Characteristic(p, q)
    ev = th.theta(np.zeros(S.g), S.B, char, derivs=1)
    _check_divisor(ev, "0")
    return (ev.gradient / ev.value) @ S.w(P)


def bergmann(S, P, Q, char=None):
    """w(P,Q) / (dlam_P dlam_Q) = -sum d2 log theta*(U_P - U_Q) w_a(P) w_b(Q).

    Any non-singular odd ``char`` gives the same kernel; the default is the
    surface's own.
    """
    if S.g == 0:
        tp, tq = S.hsq(P.lam, P.fib), S.hsq(Q.lam, Q.fib)
        return tp * tq / (P.fib - Q.fib) ** 2
    _, _, hess = th.theta_logder(S.U(P) - S.U(Q), S.B, S.char if char is None else char)
    return -S.w(P) @ hess @ S.w(Q)


def odd_char_for_point(S, i, threshold=1e-3):
    """An odd non-singular characteristic whose spinor does not vanish at marked point i.

    Near a point where grad theta*(0) . (w/dx) = 0 the default odd theta function
    vanishes to third order along U_P - U_Q and the Bergmann kernel loses all
    precision; any other odd characteristic gives the same kernel.
    """
    if S.g == 0 or not S.X_special[i]:
        return S.char
    om = S.omegaX[i]
    zero = np.zeros(S.g)
    best, best_val = None, 0.0
    for ch in th.half_characteristics(S.g):
        if ch.parity != 1:
            continue
        ev = th.theta(zero, S.B, ch, derivs=1)
        val = abs(ev.gradient @ om) / (np.linalg.norm(om) * max(ev.scale, 1.0))
        if val > best_val:
            best, best_val = ch, val
    if best is None or best_val < threshold:
        raise SingularCharacteristic(f"no odd characteristic with a non-vanishing spinor at marked point {i}")
    return best


def richardson(f, eps=RICHARDSON_EPS, order=2):
    """Extrapolate f(eps) -> eps = 0 assuming an expansion in powers of eps**order."""
    vals = np.array([f(e) for e in eps], complex)
    x = np.asarray(eps, float) ** order
    # Neville table
    T = [vals.copy()]
    for k in range(1, len(vals)):
        prev = T[-1]
        cur = np.array([(x[i] * prev[i + 1] - x[i + k] * prev[i]) / (x[i] - x[i + k]) for i in range(len(prev) - 1)])
        T.append(cur)
    est = T[-1][0]
    if len(vals) >= 3:
        d1 = np.max(np.abs(T[1][0] - T[1][-1]))
        d0 = np.max(np.abs(vals[0] - vals[-1]))
        if d0 > 0 and d1 > 2 * d0 + 1e-300 and d1 > 1e-12 * (1 + np.max(np.abs(est))):
            raise ExtrapolationUnstable("Richardson sequence is not contracting")
    return est


def bergmann_regular_at_branch(S, m, eps):
    """H(x, -x) in the chart x = sqrt(lam - lam_m) from the two sheets over lam_m + eps^2 (simple branch point)."""
    pt = [p for p in S.covering.points if p.m == m and p.k == 2]
    if not pt:
        raise ValueError(f"lambda_{m + 1} is not a simple branch point")
    j1, j2 = pt[0].sheets
    char = odd_char_for_point(S, S.covering.points.index(pt[0]))
    lam_m = S.lambdas[m]
    u = (S.lambda0 - lam_m) / abs(S.lambda0 - lam_m)
    lam = lam_m + eps**2 * u
    P = S.point(lam, j1)
    Q = S.point(lam, j2)
    # x_P x_Q = -(lam - lam_m); dlam/dx = 2x
    wl = bergmann(S, P, Q, char)
    return -4 * (lam - lam_m) * wl - 1.0 / (4 * (lam - lam_m))


PROJECTIVE_EPS = (0.16, 0.08, 0.04, 0.02)


def projective_connection(S, m, eps=None):
    """R(lam_m) = 6 H(x, x) at the simple branch point over lam_m in the chart x = sqrt(lam - lam_m).

    H(x, -x) = H(0, 0) + O(x^2) is sampled at |x| = eps (times the square root of
    the distance to the nearest other singular point) and extrapolated in eps^2;
    moderate eps keeps the 1/x^2 cancellation harmless.
    """
    if eps is None:
        lam = S.lambdas
        d = np.min(np.abs(np.delete(np.append(lam, S.lambda0), m) - lam[m]))
        eps = tuple(e * np.sqrt(d) for e in PROJECTIVE_EPS)
    return 6 * richardson(lambda e: bergmann_regular_at_branch(S, m, e), eps, order=2)


def fay_determinant_check(S, Ps, Qs, p, q):
    """Relative residual of det{s(P_j, Q_k)} against the theta/prime-form side of Fay's identity."""
    n = len(Ps)
    Smat = np.array([[szego(S, Ps[j], Qs[k], p, q) for k in range(n)] for j in range(n)])
    lhs = np.linalg.det(Smat)
    if S.g:
        char = th.Characteristic(p, q)
        z = sum(S.U(Ps[j]) - S.U(Qs[j]) for j in range(n))
        ratio = th.theta(z, S.B, char).value / th.theta(np.zeros(S.g), S.B, char).value
    else:
        ratio = 1.0
    num = 1.0 + 0j
    for j in range(n):
        for k in range(j + 1, n):
            num *= prime_form(S, Ps[j], Ps[k]) * prime_form(S, Qs[k], Qs[j])
    den = 1.0 + 0j
    for j in range(n):
        for k in range(n):
            den *= prime_form(S, Ps[j], Qs[k])
    rhs = ratio * num / den
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)


def szego_bergmann_check(S, P, Q, p, q):
    """|-s(P,Q) s(Q,P) - w(P,Q) - sum d2 ln theta[p,q](0) w_a(P) w_b(Q)| in the lam-charts."""
    char = th.Characteristic(p, q)
    ev = th.theta(np.zeros(S.g), S.B, char, derivs=2)
    _check_divisor(ev, "0")
    d2 = ev.hessian / ev.value - np.outer(ev.gradient, ev.gradient) / ev.value**2
    lhs = -szego(S, P, Q, p, q) * szego(S, Q, P, p, q)
    rhs = bergmann(S, P, Q) + S.w(P) @ d2 @ S.w(Q)
    return abs(lhs - rhs)


def prime_form_slope_error(S, P, delta=1e-4):
    """|e(P, Q) / (lam_P - lam_Q) - 1| for Q on P's sheet at lam_P + delta (lam-chart)."""
    Q = S.continue_path(P, [P.lam + delta])
    return abs(prime_form(S, P, Q) / (P.lam - Q.lam) - 1)
