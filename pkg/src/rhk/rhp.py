"""The matrix function Psi(lam0, lam) built from the modified Szego kernel.

Psi_kj(lam) = psi(lam^(j), lam0^(k)) with psi(P, Q) = hat s(P, Q) (lam_P - lam_Q).
Column j is the continuation of the base point of sheet j along the path used
to reach lam, so evaluating Psi along a path is just continuing N states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import theta as th
from .errors import ContinuationDrift, PathThroughSingularity, ThetaDivisorHit
from .kernels import DIVISOR_THRESHOLD, KernelParams

__all__ = ["PsiSolution", "ExponentData", "exponents_for", "match_mod1"]


@dataclass
class ExponentData:
    m: int
    t: np.ndarray  # predicted exponents, one per sheet
    eig: np.ndarray | None = None  # (2 pi i)^-1 log of the eigenvalues of the extracted monodromy
    residual: float | None = None  # max distance mod 1 after optimal matching
    C: np.ndarray | None = None  # eigenvectors: M = C diag(exp 2 pi i t) C^-1


def exponents_for(cov, params: KernelParams, m):
    """Local exponents t_m^(j) over lam_m: r - 1/2 + (i - 1/2)/k on a k-fold point, r on unramified sheets."""
    out = []
    for x, pt in enumerate(cov.points):
        if pt.m != m:
            continue
        r = params.r[x]
        if pt.k == 1:
            out.append(r)
        else:
            out.extend(r - 0.5 + (i - 0.5) / pt.k for i in range(1, pt.k + 1))
    return np.array(out, complex)


def match_mod1(a, b):
    """Max over an optimal pairing of min_n |a_i - b_j - n|; brute force over permutations (N <= 4)."""
    from itertools import permutations

    a = np.asarray(a, complex)
    b = np.asarray(b, complex)

    def d(x, y):
        z = x - y
        return abs(z - np.round(z.real))

    best = np.inf
    for perm in permutations(range(len(b))):
        best = min(best, max(d(a[i], b[j]) for i, j in enumerate(perm)))
    return best


def match_exact(a, b):
    """Max over an optimal pairing of |a_i - b_j| (eigenvalues of residues against exponents)."""
    from itertools import permutations

    a = np.asarray(a, complex)
    b = np.asarray(b, complex)
    return min(max(abs(a[i] - b[j]) for i, j in enumerate(perm)) for perm in permutations(range(len(b))))


class PsiSolution:
    def __init__(self, surface, params: KernelParams):
        self.S = surface
        self.params = params.check(surface)
        self.N = surface.N
        self.lambda0 = surface.lambda0
        self.Omega = params.omega(surface)
        self.k = surface.covering.multiplicity
        self.kr = self.k * params.r
        if surface.g:
            ev = th.theta(self.Omega, surface.B, params.char)
            self.theta_Omega = ev.value
            self.divisor_ratio = abs(ev.value) / ev.scale
            if self.divisor_ratio < DIVISOR_THRESHOLD:
                raise ThetaDivisorHit(
                    f"theta[p,q](Omega) vanishes (relative size {self.divisor_ratio:.2e}): Malgrange divisor",
                    self.divisor_ratio,
                )
        else:
            self.theta_Omega = 1.0
            self.divisor_ratio = 1.0

    # ------------------------------------------------------------ kernels
    def _shat_matrix(self, Ps, Qs):
        """shat(P_i, Q_k) for all pairs, as an array [i, k]."""
        S = self.S
        nP, nQ = len(Ps), len(Qs)
        hP = np.array([P.h for P in Ps])
        hQ = np.array([Q.h for Q in Qs])
        LP = np.array([P.logs for P in Ps])
        LQ = np.array([Q.logs for Q in Qs])
        factor = np.exp((LP @ self.kr)[:, None] - (LQ @ self.kr)[None, :])
        if S.g == 0:
            num = np.array([P.fib for P in Ps])[:, None] - np.array([Q.fib for Q in Qs])[None, :]
            return factor * hP[:, None] * hQ[None, :] / num
        UP = np.array([S.U(P) for P in Ps])
        UQ = np.array([S.U(Q) for Q in Qs])
        dU = (UP[:, None, :] - UQ[None, :, :]).reshape(-1, S.g)
        t1 = th.theta(dU + self.Omega, S.B, self.params.char).value.reshape(nP, nQ)
        t2 = th.theta(dU, S.B, S.char).value.reshape(nP, nQ)
        return t1 / self.theta_Omega * hP[:, None] * hQ[None, :] / t2 * factor

    def psi_from_states(self, Ps):
        lam = Ps[0].lam
        if any(abs(lam - P.lam) > 1e-14 * (1 + abs(lam)) for P in Ps):
            raise ValueError("column states must sit over the same lam")
        sh = self._shat_matrix(Ps, self.S.base)  # [j, k]
        return (sh * (lam - self.lambda0)).T

    def inverse_from_states(self, Ps):
        """Psi(lam, lam0): entry [k, j] = psi(lam0^(j), lam^(k))."""
        lam = Ps[0].lam
        sh = self._shat_matrix(self.S.base, Ps)  # [j, k] = shat(Q_j, P_k)
        return (sh * (self.lambda0 - lam)).T

    def _dlog_shat(self, Ps):
        """d/dlam log shat(P_j, Q_k) along the sheets, as [j, k]."""
        S = self.S
        Qs = S.base
        out = np.empty((len(Ps), len(Qs)), complex)
        for j, P in enumerate(Ps):
            hs = S.hsq(P.lam, P.fib)
            base = S.dhsq(P.lam, P.fib) / (2 * hs)
            if S.g == 0:
                tp = hs  # dt/dlam
                base = base + self.kr @ S.dlog_numer(P)
                for k, Q in enumerate(Qs):
                    out[j, k] = base - tp / (P.fib - Q.fib)
                continue
            w = S.w(P)
            U = S.U(P)
            base = base + self.kr @ S.dlog_numer(P)
            UQ = np.array([S.U(Q) for Q in Qs])
            _, g1, _ = th.theta_logder(U[None, :] - UQ + self.Omega, S.B, self.params.char)
            _, g2, _ = th.theta_logder(U[None, :] - UQ, S.B, S.char)
            out[j] = base + (g1 - g2) @ w
        return out

    def psi_lambda_from_states(self, Ps):
        lam = Ps[0].lam
        sh = self._shat_matrix(Ps, self.S.base)
        dl = self._dlog_shat(Ps)
        return (sh + (lam - self.lambda0) * sh * dl).T

    def a0(self, Qs=None):
        """Constant terms a0^(k) of shat(lam^(k), lam0^(k)) - 1/(lam - lam0) at the base points."""
        S = self.S
        Qs = S.base if Qs is None else Qs
        out = np.array([self.kr @ S.dlog_numer(Q) for Q in Qs], complex)
        if S.g:
            _, grad, _ = th.theta_logder(self.Omega, S.B, self.params.char)
            out = out + np.array([grad @ S.w(Q) for Q in Qs])
        return out

    def base_kernel(self):
        """Matrix K[k, j] = shat(lam0^(j), lam0^(k)) off the diagonal and a0^(k) on it."""
        with np.errstate(divide="ignore", invalid="ignore"):
            K = self._shat_matrix(self.S.base, self.S.base).T
        K[np.diag_indices(self.N)] = self.a0()
        return K

    def det_closed_form(self, Ps):
        """prod over sheets j and marked X of [E(lam^(j), X) / E(lam0^(j), X)]^{r_X}."""
        LP = np.array([P.logs for P in Ps])
        LQ = np.array([Q.logs for Q in self.S.base])
        return np.exp(np.sum((LP - LQ) @ self.kr))

    # ---------------------------------------------------------- evaluation
    def states(self, lam):
        self._check_lam(lam)
        return [self.S.point(lam, j) for j in range(self.N)]

    def _check_lam(self, lam):
        d = np.abs(self.S.lambdas - lam)
        if np.min(d) < 1e-12 * (1 + abs(lam)):
            raise PathThroughSingularity(f"lam = {lam} sits on a singular point")

    def psi_eval(self, lam):
        if lam == self.lambda0:
            return np.eye(self.N, dtype=complex)
        return self.psi_from_states(self.states(lam))

    def psi_inverse(self, lam):
        return self.inverse_from_states(self.states(lam))

    def psi_lambda(self, lam):
        return self.psi_lambda_from_states(self.states(lam))

    def walk(self, waypoints, start=None):
        """Continue all N columns through ``waypoints``; returns the list of state tuples at each waypoint."""
        cur = list(self.S.base) if start is None else list(start)
        out = []
        for wp in waypoints:
            self._check_lam(wp)
            cur = [self.S.continue_path(st, [wp]) for st in cur]
            out.append(cur)
        return out

    def psi_near_lambda0(self, deltas=(1e-3, 5e-4, 2.5e-4)):
        """Psi(lam0) by Richardson extrapolation of symmetric averages (Psi(lam0+d) + Psi(lam0-d))/2."""
        from .kernels import richardson

        def avg(d):
            a = self.psi_from_states([self.S.continue_path(b, [self.lambda0 + d]) for b in self.S.base])
            b = self.psi_from_states([self.S.continue_path(b, [self.lambda0 - d]) for b in self.S.base])
            return (a + b) / 2

        return richardson(avg, deltas, order=2)

    # ---------------------------------------------------------- monodromy
    def monodromy_by_continuation(self, m, orientation=1):
        """X with Psi_continued = Psi X along l_m, compared at a point of the loop's ray."""
        S = self.S
        c = S.loop_start(m)
        lam_b = self.lambda0 + 0.5 * (c - self.lambda0)
        before = self.walk([lam_b])[-1]
        wps = S.loop_waypoints(m, orientation)[:-1] + [lam_b]
        after = [S.continue_path(st, wps) for st in before]
        Pb = self.psi_from_states(before)
        Pa = self.psi_from_states(after)
        return np.linalg.solve(Pb, Pa)

    def monodromy_along(self, waypoints):
        """Monodromy along a closed path starting and ending at a point off lam0 (first waypoint)."""
        start = self.walk([waypoints[0]])[-1]
        end = [self.S.continue_path(st, list(waypoints[1:]) + [waypoints[0]]) for st in start]
        return np.linalg.solve(self.psi_from_states(start), self.psi_from_states(end))

    def check_contractible(self, center, radius, tol=1e-8):
        n = 32
        pts = [center + radius * np.exp(2j * np.pi * k / n) for k in range(n)]
        X = self.monodromy_along(pts)
        dev = float(np.max(np.abs(X - np.eye(self.N))))
        if dev > tol:
            raise ContinuationDrift(f"contractible loop gives monodromy off identity by {dev:.2e}")
        return dev

    def local_exponents(self, m, M_extracted=None):
        t = exponents_for(self.S.covering, self.params, m)
        data = ExponentData(m, t)
        if M_extracted is not None:
            ev, C = np.linalg.eig(M_extracted)
            data.eig = np.log(ev) / (2j * np.pi)
            data.residual = match_mod1(data.eig, t)
            data.C = C
        return data
