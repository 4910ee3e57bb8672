"""Algebraic models of branched coverings of the sphere.

A model knows its fiber over a point ``lam`` (the N values of a coordinate
that separates sheets) and the holomorphic differentials written as
``v(lam, f) dlam``. Everything multivalued is handled by the continuation
code in :mod:`rhk.surface`.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import NearDegenerateCurve, UnsupportedGeometry

__all__ = ["HyperellipticCurve", "RationalCurve", "elliptic_curve", "model_from_json"]


class HyperellipticCurve:
    """y^2 = prod_m (lam - e_m) with 2g+2 distinct finite branch points."""

    kind = "hyperelliptic"
    N = 2

    def __init__(self, branch_points, degeneracy=1e-6):
        e = np.asarray(branch_points, complex)
        if len(e) < 4 or len(e) % 2:
            raise ValueError("need an even number (>= 4) of branch points")
        diam = np.max(np.abs(e[:, None] - e[None, :]))
        sep = np.min(np.abs(e[:, None] - e[None, :]) + np.eye(len(e)) * diam)
        if sep < degeneracy * diam:
            raise NearDegenerateCurve(f"branch points {sep:.3g} apart (diameter {diam:.3g})")
        self.e = e
        self.g = len(e) // 2 - 1
        self.branch_values = e

    def ysq(self, lam):
        lam = np.asarray(lam, complex)
        return np.prod(lam[..., None] - self.e, axis=-1)

    def fiber(self, lam):
        y = np.sqrt(self.ysq(lam))
        return np.array([y, -y])

    def raw_diffs(self, lam, f):
        """lam^(b-1)/y for b = 1..g (the differentials lam^(b-1) dlam / y)."""
        lam = np.asarray(lam, complex)
        f = np.asarray(f, complex)
        powers = lam[..., None] ** np.arange(self.g)
        return powers / f[..., None]

    def raw_diffs_dlam(self, lam, f):
        lam = np.asarray(lam, complex)
        f = np.asarray(f, complex)
        k = np.arange(self.g)
        logdy = 0.5 * np.sum(1.0 / (lam[..., None] - self.e), axis=-1)
        powers = lam[..., None] ** k
        dpowers = np.where(k > 0, k * lam[..., None] ** np.maximum(k - 1, 0), 0)
        return (dpowers - powers * logdy[..., None]) / f[..., None]

    def ramification(self, lam):
        """Cycle structure expected over ``lam``: a transposition at branch points."""
        return 2 if np.min(np.abs(self.e - lam)) == 0 else 1

    def deformed(self, old_lambdas, new_lambdas):
        """Same curve with each branch point that equals an old lam_m moved to the new lam_m."""
        old = np.asarray(old_lambdas, complex)
        new = np.asarray(new_lambdas, complex)
        e = self.e.copy()
        for i, b in enumerate(e):
            d = np.abs(old - b)
            m = int(np.argmin(d))
            if d[m] <= 1e-12 * (1 + abs(b)):
                e[i] = new[m]
        out = HyperellipticCurve(e)
        out.kind = self.kind
        return out

    def to_json(self):
        return {"type": "hyperelliptic", "branch_points": [[z.real, z.imag] for z in self.e]}


def elliptic_curve(branch_points):
    """Genus-one covering realized as the two-sheeted quartic y^2 = prod_{m=1}^4 (lam - e_m)."""
    c = HyperellipticCurve(branch_points)
    if c.g != 1:
        raise ValueError("an elliptic covering needs exactly four branch points")
    c.kind = "elliptic"
    return c


class RationalCurve:
    """Genus-zero covering lam = R(t) = num(t)/den(t), with deg num = deg den + 1.

    The uniformizing coordinate ``t`` is the fiber coordinate; ``t = inf``
    lies over ``lam = inf``. Coefficients are in increasing degree order.
    """

    kind = "rational"
    g = 0

    def __init__(self, numerator, denominator):
        num = np.trim_zeros(np.asarray(numerator, complex), "b")
        den = np.trim_zeros(np.asarray(denominator, complex), "b")
        if len(num) != len(den) + 1:
            raise UnsupportedGeometry("need deg numerator = deg denominator + 1 (t = inf over lam = inf)")
        self.num, self.den = num, den
        self.N = len(num) - 1
        dnum, dden = P.polyder(num), P.polyder(den)
        # R' = (num' den - num den') / den^2
        self._crit = P.polysub(P.polymul(dnum, den), P.polymul(num, dden))
        self.crit_points = P.polyroots(self._crit) if len(self._crit) > 1 else np.array([])
        if len(den) > 1 and np.min(np.abs(P.polyroots(den)[:, None] - P.polyroots(den)[None, :])
                                    + np.eye(len(den) - 1) * 1e300) < 1e-9:
            raise UnsupportedGeometry("poles of R must be simple (lam = inf unramified)")
        vals = self.R(self.crit_points)
        self.branch_values = _cluster(vals)

    @classmethod
    def from_partial_fractions(cls, a, poles, residues):
        """R(t) = t + a + sum_i c_i / (t - b_i)."""
        den = np.array([1.0 + 0j])
        for b in poles:
            den = P.polymul(den, [-b, 1])
        num = P.polymul(den, [a, 1])
        for i, (b, c) in enumerate(zip(poles, residues)):
            rest = np.array([c + 0j])
            for j, bb in enumerate(poles):
                if j != i:
                    rest = P.polymul(rest, [-bb, 1])
            num = P.polyadd(num, rest)
        return cls(num, den)

    def partial_fractions(self):
        lead = self.num[-1] / self.den[-1]
        if not np.isclose(lead, 1):
            raise UnsupportedGeometry("partial-fraction form needs a monic leading term")
        q, r = P.polydiv(self.num, self.den)
        poles = P.polyroots(self.den)
        dden = P.polyder(self.den)
        residues = P.polyval(poles, r) / P.polyval(poles, dden)
        return q[0], poles, residues

    def R(self, t):
        return P.polyval(t, self.num) / P.polyval(t, self.den)

    def dR(self, t):
        return P.polyval(t, self._crit) / P.polyval(t, self.den) ** 2

    def d2R(self, t):
        n0, d0 = P.polyval(t, self.num), P.polyval(t, self.den)
        n1, d1 = P.polyval(t, P.polyder(self.num)), P.polyval(t, P.polyder(self.den))
        n2, d2 = P.polyval(t, P.polyder(self.num, 2)), P.polyval(t, P.polyder(self.den, 2))
        return (n2 * d0 - n0 * d2) / d0**2 - 2 * d1 * (n1 * d0 - n0 * d1) / d0**3

    def fiber(self, lam):
        return P.polyroots(P.polysub(self.num, lam * np.concatenate([self.den, [0]])))

    def fibers(self, lams):
        """Fibers over many points at once (stacked companion matrices), shape (len(lams), N)."""
        lams = np.asarray(lams, complex)
        den = np.concatenate([self.den, [0]])
        c = (self.num[None, :] - lams[:, None] * den[None, :]) / self.num[-1]
        N = self.N
        comp = np.zeros((len(lams), N, N), complex)
        comp[:, np.arange(1, N), np.arange(N - 1)] = 1
        comp[:, :, -1] = -c[:, :N]
        return np.linalg.eigvals(comp)

    def raw_diffs(self, lam, f):
        lam = np.asarray(lam, complex)
        return np.zeros(lam.shape + (0,), complex)

    raw_diffs_dlam = raw_diffs

    def dt_dlam(self, t):
        return 1.0 / self.dR(t)

    def ramification_at(self, t_c):
        """Multiplicity of the critical point t_c as a zero of R - R(t_c)."""
        k = 1
        poly = P.polysub(self.num, self.R(t_c) * np.concatenate([self.den, [0]]))
        scale = np.max(np.abs(poly))
        while k < self.N:
            poly = P.polyder(poly)
            if abs(P.polyval(t_c, poly)) > 1e-7 * scale * (1 + abs(t_c)) ** len(poly):
                break
            k += 1
        return k

    def critical_points_over(self, lam, tol=1e-7):
        crit = self.crit_points
        vals = self.R(crit)
        return crit[np.abs(vals - lam) < tol * (1 + abs(lam))]

    def deformed(self, old_lambdas, new_lambdas, tol=1e-13, maxiter=50):
        """Rational map whose critical values follow the moved lam_m.

        Affine changes lam -> alpha lam + beta cover up to two branch values;
        otherwise Newton on the poles and residues of the partial-fraction form
        (the constant term is kept, which fixes the t-translation freedom).
        """
        old = np.asarray(old_lambdas, complex)
        new = np.asarray(new_lambdas, complex)
        bv = self.branch_values
        idx = [int(np.argmin(np.abs(old - b))) for b in bv]
        target_bv = new[idx]
        if len(bv) <= 2:
            if len(bv) == 2:
                alpha = (target_bv[1] - target_bv[0]) / (bv[1] - bv[0])
            else:
                alpha = 1.0
            beta = (target_bv[0] - alpha * bv[0]) if len(bv) else 0.0
            num = alpha * self.num + beta * np.concatenate([self.den, [0]])
            return RationalCurve(num, self.den)
        a, poles, res = self.partial_fractions()
        crit = self.crit_points.copy()
        target = np.array([target_bv[int(np.argmin(np.abs(bv - v)))] for v in self.R(crit)])
        x = np.concatenate([poles, res])
        n = len(poles)
        for _ in range(maxiter):
            cur = RationalCurve.from_partial_fractions(a, x[:n], x[n:])
            crit = _match(cur.crit_points, crit)
            F = cur.R(crit) - target
            if np.max(np.abs(F)) < tol * (1 + np.max(np.abs(target))):
                return cur
            d = crit[:, None] - x[None, :n]
            Jac = np.concatenate([x[None, n:] / d**2, 1.0 / d], axis=1)
            x = x - np.linalg.lstsq(Jac, F, rcond=None)[0]
        raise UnsupportedGeometry("could not deform the rational map to the requested critical values")

    def to_json(self):
        return {
            "type": "rational",
            "numerator": [[z.real, z.imag] for z in self.num],
            "denominator": [[z.real, z.imag] for z in self.den],
        }


def _match(vals, ref):
    vals = list(vals)
    out = []
    for r in ref:
        i = int(np.argmin([abs(v - r) for v in vals]))
        out.append(vals.pop(i))
    return np.array(out)


def _cluster(vals, tol=1e-7):
    out = []
    for v in vals:
        if not any(abs(v - w) < tol * (1 + abs(w)) for w in out):
            out.append(v)
    return np.array(out, complex)


def _cplx(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def model_from_json(d):
    kind = d["type"]
    if kind in ("hyperelliptic", "elliptic"):
        pts = [_cplx(v) for v in d["branch_points"]]
        return elliptic_curve(pts) if kind == "elliptic" else HyperellipticCurve(pts)
    if kind == "rational":
        return RationalCurve([_cplx(v) for v in d["numerator"]], [_cplx(v) for v in d["denominator"]])
    raise ValueError(f"unknown surface model type {kind!r}")
