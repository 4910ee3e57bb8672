"""Analytic realization of a branched covering: continuation, periods, Abel map.

Points of the surface are represented by :class:`PathState` objects that are
only ever produced by continuing a base state along an explicit path in the
lam-plane. A state carries

* the fiber coordinate (``y`` for hyperelliptic models, ``t`` for rational ones),
* ``V``: integrals of the raw differentials from P0 = lam0 on sheet 0,
* ``h``: a continuous branch of the spinor sqrt(sum_a dtheta*(0)/dz_a w_a / dlam)
  (for genus 0: sqrt(dt/dlam)),
* ``logs``: continuous logarithms of the prime-form numerators theta*(U(P) - U(X))
  (genus 0: t(P) - t(X)) against every marked sheet point X over the lam_m.

Generator loops l_m go from lam0 straight towards lam_m, around a circle of
radius ``0.1 * dist`` counterclockwise, and back. The lam_m must be listed in
counterclockwise angular order as seen from lam0 so that l_M ... l_1 is
contractible on the sphere minus the points.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import theta as th
from .covering import BranchedCovering, PermutationRepresentation, build_covering
from .errors import (
    InconsistentBranchData,
    NoneFound,
    NotPositiveDefinite,
    PathThroughBranchPoint,
    StepSizeUnderflow,
    UnsupportedTopology,
)
from .models import HyperellipticCurve, RationalCurve

__all__ = [
    "SurfaceConfig",
    "PathState",
    "PeriodData",
    "Surface",
    "angular_order",
    "periods_hyperelliptic",
    "abel_map",
    "riemann_constants",
    "half_characteristic_of",
]

_GLX, _GLW = np.polynomial.legendre.leggauss(8)
_GLX = (_GLX + 1) / 2
_GLW = _GLW / 2
_EPX, _EPW = np.polynomial.legendre.leggauss(24)
_EPX = (_EPX + 1) / 2
_EPW = _EPW / 2


@dataclass(frozen=True)
class SurfaceConfig:
    step_ratio: float = 0.25  # step <= ratio * distance to nearest branch value
    loop_radius: float = 0.1  # circle radius / distance to nearest other singular point
    loop_vertices: int = 48
    max_phase_jump: float = 0.8
    min_step: float = 1e-13


@dataclass
class PathState:
    lam: complex
    fib: complex
    V: np.ndarray
    h: complex | None = None
    logs: np.ndarray | None = None

    def copy(self):
        return replace(self, V=self.V.copy(), logs=None if self.logs is None else self.logs.copy())


@dataclass
class PeriodData:
    A: np.ndarray  # a-periods of the raw differentials: A[a, b] = oint_{a_a} v_b
    Bnn: np.ndarray  # b-periods of the raw differentials
    B: np.ndarray
    C: np.ndarray  # normalized w = C v
    b_sign: int
    symmetry_residual: float
    min_imag_eig: float


def angular_order(lambdas, lambda0):
    """Indices sorting ``lambdas`` counterclockwise as seen from ``lambda0``, starting after the widest gap."""
    lam = np.asarray(lambdas, complex)
    ang = np.angle(lam - lambda0) % (2 * np.pi)
    order = np.argsort(ang)
    gaps = np.diff(np.concatenate([ang[order], [ang[order][0] + 2 * np.pi]]))
    start = (int(np.argmax(gaps)) + 1) % len(lam)
    return np.roll(order, -start)


def _seg_dist(a, b, z):
    d = b - a
    if d == 0:
        return abs(z - a), 0.0
    t = ((z - a) * np.conj(d)).real / abs(d) ** 2
    t = min(max(t, 0.0), 1.0)
    return abs(a + t * d - z), t


class Surface:
    """Numerical Riemann surface over the lam-plane with marked points lam_1..lam_M.

    Parameters
    ----------
    model : HyperellipticCurve or RationalCurve
    lambdas : the singular points, in counterclockwise order around ``lambda0``;
        all branch values of the model must be among them.
    lambda0 : normalization point.
    like : a previously built surface for nearby data; sheet labels, spinor
        signs, log branches and the odd characteristic are matched to it so
        that finite differences in the lam_m are continuous.
    """

    def __init__(self, model, lambdas, lambda0, *, like=None, config=SurfaceConfig(), char=None):
        self.model = model
        self.config = config
        self.lambdas = np.asarray(lambdas, complex)
        self.lambda0 = complex(lambda0)
        self.M = len(self.lambdas)
        self.N = model.N
        self.g = model.g
        self._check_points()
        self._branch_values = np.asarray(model.branch_values, complex)
        self._geometry()

        f0 = np.asarray(model.fiber(self.lambda0), complex)
        if like is not None:
            f0 = _match(f0, like.f0)
        elif isinstance(model, RationalCurve):
            f0 = f0[np.lexsort((f0.imag, f0.real))]
        self.f0 = f0

        perms = [tuple(self._lift_sheet(m, j) for j in range(self.N)) for m in range(self.M)]
        self.covering: BranchedCovering = build_covering(
            PermutationRepresentation(self.N, perms), self.lambdas, self.lambda0
        )
        if self.covering.genus != self.g:
            raise InconsistentBranchData(f"covering genus {self.covering.genus} != model genus {self.g}")
        self._check_branching()

        if self.g > 0:
            self.periods = self._compute_periods(like)
            self.B = self.periods.B
            self.C = self.periods.C
            self.char = char or (like.char if like is not None else th.find_odd_nonsingular_characteristic(self.B))
            self.grad0 = th.theta(np.zeros(self.g), self.B, self.char, derivs=1).gradient
        else:
            self.periods = None
            self.B = np.zeros((0, 0), complex)
            self.C = np.zeros((0, 0), complex)
            self.char = None
            self.grad0 = np.zeros(0, complex)

        self._base_raw = self._base_states_raw()
        self._marked()
        self.base = [self._decorate(st, None if like is None else like.base[j]) for j, st in enumerate(self._base_raw)]

    # ------------------------------------------------------------------ setup
    def _check_points(self):
        lam = self.lambdas
        if np.any(np.abs(lam - self.lambda0) == 0):
            raise ValueError("lambda0 coincides with a singular point")
        if len(lam) > 1 and np.min(np.abs(lam[:, None] - lam[None, :]) + np.eye(len(lam)) * 1e300) == 0:
            raise ValueError("singular points must be pairwise distinct")

    def _geometry(self):
        lam, lam0 = self.lambdas, self.lambda0
        self.rho = np.empty(self.M)
        for m in range(self.M):
            others = np.delete(lam, m)
            d = np.min(np.abs(others - lam[m])) if len(others) else abs(lam[m] - lam0)
            self.rho[m] = self.config.loop_radius * min(d, abs(lam[m] - lam0))
        for m in range(self.M):
            for n in range(self.M):
                if n != m and _seg_dist(lam0, self.loop_start(m), lam[n])[0] <= 1.5 * self.rho[n]:
                    raise UnsupportedTopology(
                        f"ray from lambda0 to lambda_{m + 1} passes too close to lambda_{n + 1}; move lambda0"
                    )
        ang = np.angle(lam - lam0)
        turn = np.diff(ang) % (2 * np.pi)
        if self.M > 1 and turn.sum() >= 2 * np.pi - 1e-9:
            raise UnsupportedTopology(
                "singular points are not in counterclockwise angular order around lambda0 "
                "(see rhk.surface.angular_order)"
            )

    def _check_branching(self):
        """Every model branch value must be one of the lam_m, with matching cycle structure."""
        bv = self._branch_values
        for b in bv:
            if np.min(np.abs(self.lambdas - b)) > 1e-9 * (1 + abs(b)):
                raise InconsistentBranchData(f"model branch value {b} is not among the singular points")
        for m, lam in enumerate(self.lambdas):
            is_branch = np.min(np.abs(bv - lam)) <= 1e-9 * (1 + abs(lam)) if len(bv) else False
            moved = any(self.covering.perms[m][j] != j for j in range(self.N))
            if bool(is_branch) != moved:
                raise InconsistentBranchData(f"lambda_{m + 1}: loop lifting disagrees with the model branch data")
        # snap the numerically computed branch values onto the given lam_m
        self._branch_values = np.array([self.lambdas[np.argmin(np.abs(self.lambdas - b))] for b in bv], complex)

    # ------------------------------------------------------------ continuation
    def _dist_branch(self, lam):
        if len(self._branch_values) == 0:
            return np.inf
        return float(np.min(np.abs(self._branch_values - lam)))

    def _pick(self, cands, prev):
        d = np.abs(cands - prev)
        i = int(np.argmin(d))
        if len(cands) > 1:
            d2 = np.partition(d, 1)[1]
            if not d[i] < 0.3 * d2:
                return None
        return cands[i]

    def _fibers_along(self, a, b, f_a, xs):
        """Track the fiber from (a, f_a) through a + (b-a) x for increasing x in ``xs``."""
        out = np.empty(len(xs), complex)
        prev = f_a
        model = self.model
        if isinstance(model, HyperellipticCurve):
            ys = np.sqrt(model.ysq(a + (b - a) * np.asarray(xs)))
            for i, y in enumerate(ys):
                if abs(y - prev) <= abs(y + prev):
                    cand, other = y, -y
                else:
                    cand, other = -y, y
                if not abs(cand - prev) < 0.3 * abs(other - prev):
                    return None
                out[i] = prev = cand
            return out
        allf = model.fibers(a + (b - a) * np.asarray(xs))
        for i in range(len(xs)):
            c = self._pick(allf[i], prev)
            if c is None:
                return None
            out[i] = prev = c
        return out

    def hsq(self, lam, fib):
        if self.g == 0:
            return self.model.dt_dlam(fib)
        return self.grad0 @ (self.C @ self.model.raw_diffs(lam, fib))

    def dhsq(self, lam, fib):
        """d/dlam of hsq along the sheet."""
        if self.g == 0:
            m = self.model
            d1 = m.dR(fib)
            return -m.d2R(fib) / d1**3
        return self.grad0 @ (self.C @ self.model.raw_diffs_dlam(lam, fib))

    def U(self, st):
        return self.C @ st.V

    def w(self, st):
        """Normalized holomorphic differentials at the state, divided by dlam."""
        return self.C @ self.model.raw_diffs(st.lam, st.fib)

    def dw(self, st):
        return self.C @ self.model.raw_diffs_dlam(st.lam, st.fib)

    def numer(self, st, U=None):
        """Prime-form numerators against all marked points: theta*(U(P)-U(X)) or t(P)-t(X).

        At a marked point where h vanishes, theta*(U(P)-U(X)) is identically zero
        in P; there the x-chart derivative grad theta*(U(P)-U(X)) . (w/dx)(X) is
        used instead (same automorphy, constant factors cancel in E(P,X)/E(Q,X)).
        """
        if self.g == 0:
            return st.fib - self.tX
        U = self.U(st) if U is None else U
        if not self.X_special.any():
            return th.theta(U[None, :] - self.UX, self.B, self.char).value
        ev = th.theta(U[None, :] - self.UX, self.B, self.char, derivs=1)
        return np.where(self.X_special, np.sum(ev.gradient * self.omegaX, axis=1), ev.value)

    def dlog_numer(self, st):
        """d/dlam of log numer(P, X) along the sheet, for all marked X."""
        if self.g == 0:
            return self.hsq(st.lam, st.fib) / (st.fib - self.tX)
        w = self.w(st)
        ev = th.theta(self.U(st)[None, :] - self.UX, self.B, self.char, derivs=2)
        if not self.X_special.any():
            return (ev.gradient @ w) / ev.value
        num = np.sum(ev.gradient * self.omegaX, axis=1)
        dnum = np.einsum("kab,a,kb->k", ev.hessian, w, self.omegaX)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.X_special, dnum / num, (ev.gradient @ w) / ev.value)

    def _step(self, st, lam_new, track):
        a, b = st.lam, lam_new
        xs = np.concatenate([_GLX, [1.0]])
        fibs = self._fibers_along(a, b, st.fib, xs)
        if fibs is None:
            return None
        V = st.V
        if self.g > 0:
            vals = self.model.raw_diffs(a + (b - a) * _GLX, fibs[:-1])
            V = V + (b - a) * (_GLW @ vals)
        new = PathState(b, fibs[-1], V)
        if track:
            hs = np.sqrt(self.hsq(b, new.fib))
            if abs(hs - st.h) > abs(hs + st.h):
                hs = -hs
            if abs(hs - st.h) > 0.5 * abs(st.h):
                return None
            new.h = hs
            if len(st.logs):
                lg = np.log(self.numer(new))
                k = np.round((st.logs.imag - lg.imag) / (2 * np.pi))
                lg = lg + 2j * np.pi * k
                if np.max(np.abs(lg.imag - st.logs.imag)) > self.config.max_phase_jump:
                    return None
                new.logs = lg
            else:
                new.logs = st.logs
        return new

    def continue_path(self, st, waypoints, *, track=True, record=False):
        """Continue ``st`` through the given waypoints; returns the final state (or all vertex states)."""
        cfg = self.config
        cur = st
        out = []
        for target in waypoints:
            target = complex(target)
            if not np.isfinite(target):
                raise ValueError(f"non-finite waypoint {target}")
            while cur.lam != target:
                rem = target - cur.lam
                hmax = cfg.step_ratio * self._dist_branch(cur.lam)
                h = min(abs(rem), hmax)
                if h < cfg.min_step * (1 + abs(cur.lam)):
                    raise PathThroughBranchPoint(f"path runs into a branch point near {cur.lam}")
                while True:
                    lam_new = target if h >= abs(rem) else cur.lam + rem / abs(rem) * h
                    nxt = self._step(cur, lam_new, track)
                    if nxt is not None:
                        break
                    h /= 2
                    if h < cfg.min_step * (1 + abs(cur.lam)):
                        raise StepSizeUnderflow(f"continuation step underflow at {cur.lam}")
                cur = nxt
            if record:
                out.append(cur)
        return out if record else cur

    # ----------------------------------------------------------------- paths
    def loop_start(self, m):
        lam_m = self.lambdas[m]
        u = (self.lambda0 - lam_m) / abs(self.lambda0 - lam_m)
        return lam_m + self.rho[m] * u

    def loop_waypoints(self, m, orientation=1):
        lam_m = self.lambdas[m]
        c = self.loop_start(m)
        phi0 = np.angle(c - lam_m)
        n = self.config.loop_vertices
        circ = lam_m + self.rho[m] * np.exp(1j * (phi0 + orientation * 2 * np.pi * np.arange(1, n + 1) / n))
        circ[-1] = c
        return [c, *circ, self.lambda0]

    def word_waypoints(self, word):
        pts = []
        for m, o in word:
            pts.extend(self.loop_waypoints(m, o))
        return pts

    def path_to(self, lam, start=None):
        """Straight segment from lam0 (or ``start``) to ``lam`` with ccw half-circle detours around lam_m."""
        a = self.lambda0 if start is None else complex(start)
        b = complex(lam)
        d = b - a
        hits = []
        for m, lm in enumerate(self.lambdas):
            r = self.rho[m]
            if abs(b - lm) < r or abs(a - lm) < r:
                continue
            dist, t = _seg_dist(a, b, lm)
            if dist < r and 0 < t < 1:
                hits.append((t, m, dist))
        pts = []
        for t, m, dist in sorted(hits):
            lm, r = self.lambdas[m], self.rho[m]
            s = np.sqrt(r * r - dist * dist) / abs(d)
            cin, cout = a + (t - s) * d, a + (t + s) * d
            p_in, p_out = np.angle(cin - lm), np.angle(cout - lm)
            sweep = (p_out - p_in) % (2 * np.pi)
            k = max(4, int(np.ceil(sweep / (2 * np.pi) * self.config.loop_vertices)))
            arc = lm + r * np.exp(1j * (p_in + sweep * np.arange(0, k + 1) / k))
            arc[0], arc[-1] = cin, cout
            pts.extend(arc)
        pts.append(b)
        return pts

    # ---------------------------------------------------------------- sheets
    def _raw_state(self, j):
        return PathState(self.lambda0, self.f0[j], np.zeros(self.g, complex))

    def _sheet_of(self, fib):
        d = np.abs(self.f0 - fib)
        j = int(np.argmin(d))
        ambiguous = len(d) > 1 and np.partition(d, 1)[1] < 10 * d[j] + 1e-300
        if ambiguous or d[j] > 1e-6 * (1 + abs(fib)):
            raise UnsupportedTopology("could not identify the sheet at lambda0 after continuation")
        return j

    def _lift_sheet(self, m, j, orientation=1):
        st = self.continue_path(self._raw_state(j), self.loop_waypoints(m, orientation), track=False)
        return self._sheet_of(st.fib)

    def track_sheets(self, waypoints, sheet):
        """Continue sheet ``sheet`` over lam0 along a closed path; return (end sheet, fiber values at waypoints)."""
        states = self.continue_path(self._raw_state(sheet), list(waypoints), track=False, record=True)
        end = states[-1]
        if abs(end.lam - self.lambda0) > 1e-14 * (1 + abs(self.lambda0)):
            return None, np.array([s.fib for s in states])
        return self._sheet_of(end.fib), np.array([s.fib for s in states])

    # --------------------------------------------------------------- periods
    def _branch_loop_indices(self):
        bv = self._branch_values
        return [m for m in range(self.M) if np.min(np.abs(bv - self.lambdas[m])) <= 1e-9 * (1 + abs(self.lambdas[m]))]

    def cycle_words(self):
        """Homology basis as words of generator loops from sheet 0 (hyperelliptic realization)."""
        if not isinstance(self.model, HyperellipticCurve):
            raise UnsupportedTopology("canonical homology realization is only available for hyperelliptic models")
        br = self._branch_loop_indices()
        g = self.g
        a = [[(br[2 * al], 1), (br[2 * al + 1], 1)] for al in range(g)]
        b = [[(br[i], 1) for i in range(2 * al + 1, 2 * g + 1)] for al in range(g)]
        return a, b

    def _word_integral(self, word, sheet=0):
        st = self.continue_path(self._raw_state(sheet), self.word_waypoints(word), track=False)
        if self._sheet_of(st.fib) != sheet:
            raise UnsupportedTopology("homology word does not close on its start sheet")
        return st.V

    def _compute_periods(self, like):
        a_words, b_words = self.cycle_words()
        A = np.array([self._word_integral(w) for w in a_words])
        Bnn = np.array([self._word_integral(w) for w in b_words])
        C = np.linalg.inv(A.T)
        B = Bnn @ np.linalg.inv(A)
        b_sign = 1
        if like is not None:
            b_sign = like.periods.b_sign
        elif np.linalg.eigvalsh((B.imag + B.imag.T) / 2).max() < 0:
            b_sign = -1
        B = b_sign * B
        Bnn = b_sign * Bnn
        Y = (B.imag + B.imag.T) / 2
        ev = np.linalg.eigvalsh(Y)
        if ev.min() <= 0:
            raise NotPositiveDefinite("computed period matrix has indefinite imaginary part")
        sym = float(np.max(np.abs(B - B.T)))
        B = (B + B.T) / 2
        return PeriodData(A, Bnn, B, C, b_sign, sym, float(ev.min()))

    # ----------------------------------------------------------- base points
    def base_words(self):
        """Shortest words of generator loops (m, +-1) carrying sheet 0 to each sheet over lam0."""
        perms = self.covering.perms
        words = {0: []}
        queue = deque([0])
        while queue:
            j = queue.popleft()
            for m in range(self.M):
                s = perms[m]
                for o, k in ((1, s[j]), (-1, s.index(j))):
                    if k not in words:
                        words[k] = words[j] + [(m, o)]
                        queue.append(k)
        return [words[j] for j in range(self.N)]

    def _base_states_raw(self):
        out = []
        for j, word in enumerate(self.base_words()):
            st = self.continue_path(self._raw_state(0), self.word_waypoints(word), track=False) if word else self._raw_state(0)
            if self._sheet_of(st.fib) != j:
                raise UnsupportedTopology("base word does not reach its sheet")
            st.fib = self.f0[j]
            out.append(st)
        return out

    # ---------------------------------------------------------- marked points
    def _marked(self):
        """Abel images (or t-values) of the distinct sheet points over the lam_m."""
        cov = self.covering
        pts = cov.points
        self.UX = np.zeros((len(pts), self.g), complex)
        self.tX = np.zeros(len(pts), complex)
        self.X_lam = np.array([self.lambdas[p.m] for p in pts])
        self.X_special = np.zeros(len(pts), bool)
        self.omegaX = np.zeros((len(pts), self.g), complex)
        for i, p in enumerate(pts):
            j = min(p.sheets)
            start = self._base_raw[j]
            if p.k == 1:
                lam_m = self.lambdas[p.m]
                if self._dist_branch(lam_m) <= 1e-9 * (1 + abs(lam_m)):
                    # unramified sheet over a branch value: stop at the loop circle, then
                    # walk in fixed substeps (this sheet's root stays isolated)
                    c = self.loop_start(p.m)
                    st = self.continue_path(start, self.path_to(c), track=False)
                    for x in np.linspace(0, 1, 17)[1:]:
                        nxt = self._step(st, c + x * (lam_m - c), False)
                        if nxt is None:
                            raise PathThroughBranchPoint(f"cannot separate the unramified sheet over lambda_{p.m + 1}")
                        st = nxt
                else:
                    st = self.continue_path(start, self.path_to(lam_m), track=False)
                self.UX[i] = self.C @ st.V
                self.tX[i] = st.fib
                if self.g:
                    # natural chart x = lam - lam_m: w/dx = w/dlam
                    self.omegaX[i] = self.C @ self.model.raw_diffs(lam_m, st.fib)
            else:
                c = self.loop_start(p.m)
                st = self.continue_path(start, self.path_to(c), track=False)
                V, t = self._endpoint(st, p.m)
                self.UX[i] = self.C @ V
                self.tX[i] = t
                if self.g and isinstance(self.model, HyperellipticCurve):
                    # w/dx at the branch point in the chart x = sqrt(lam - e)
                    e = self.lambdas[p.m]
                    others = self.model.e[self.model.e != e]
                    om = 2 * self.C @ (e ** np.arange(self.g)) / np.sqrt(np.prod(e - others))
                    self.omegaX[i] = om
                    hx = self.grad0 @ om
                    self.X_special[i] = abs(hx) < 1e-8 * np.linalg.norm(self.grad0) * np.linalg.norm(om)

    def _endpoint(self, st, m):
        """Integrate from a state near the branch point over lam_m to the branch point itself."""
        e = self.lambdas[m]
        model = self.model
        if isinstance(model, RationalCurve):
            crit = model.critical_points_over(e)
            if len(crit) == 0:
                raise InconsistentBranchData(f"no critical point of R over lambda_{m + 1}")
            return st.V, crit[np.argmin(np.abs(crit - st.fib))]
        A = st.lam
        others = model.e[np.abs(model.e - e) > 0]
        s = _EPX[::-1]
        lam = e + (A - e) * s**2
        c2 = (A - e) * np.prod(lam[:, None] - others, axis=1)
        c = np.sqrt(c2)
        prev = st.fib
        for i in range(len(c)):
            if abs(c[i] - prev) > abs(c[i] + prev):
                c[i] = -c[i]
            prev = c[i]
        integrand = 2 * (A - e) * lam[:, None] ** np.arange(self.g) / c[:, None]
        V = st.V - _EPW[::-1] @ integrand
        return V, 0j

    # --------------------------------------------------------- full states
    def _decorate(self, st, ref=None):
        st = st.copy()
        h = np.sqrt(self.hsq(st.lam, st.fib))
        if ref is not None and abs(h + ref.h) < abs(h - ref.h):
            h = -h
        st.h = h
        n = self.numer(st)
        lg = np.log(n)
        if ref is not None and len(lg):
            lg = lg + 2j * np.pi * np.round((ref.logs.imag - lg.imag) / (2 * np.pi))
        st.logs = lg
        return st

    def point(self, lam, sheet, start=None):
        """State at lam on ``sheet``, continued along the canonical path from lam0."""
        st = self.base[sheet] if start is None else start
        return self.continue_path(st, self.path_to(lam, None if start is None else start.lam))

    def sheet_sum(self, lam):
        """sum_j w(lam^(j)) / dlam over all sheets (vanishes for holomorphic differentials)."""
        return sum(self.w(P) for P in self.points(lam))

    def points(self, lam):
        return [self.point(lam, j) for j in range(self.N)]

    # ----------------------------------------------------------- index tables
    def lattice_coords(self, dU, tol=1e-7):
        """Integer (n, n') with dU = n + B n'; raises if dU is off the lattice."""
        if self.g == 0:
            return np.zeros(0, int), np.zeros(0, int)
        Y = self.B.imag
        npr = np.linalg.solve(Y, dU.imag)
        n = dU.real - self.B.real @ npr
        ni, npi = np.round(n).astype(int), np.round(npr).astype(int)
        if max(np.max(np.abs(n - ni)), np.max(np.abs(npr - npi))) > tol:
            raise UnsupportedTopology(f"Abel map increment {dU} is not a lattice vector")
        return ni, npi

    def loop_end(self, m, j, orientation=1):
        """Full state after continuing the base state of sheet j around l_m."""
        return self.continue_path(self.base[j], self.loop_waypoints(m, orientation))

    def compare_to_base(self, st):
        """(sheet, n, n', eps, K, residual) describing a state over lam0 relative to the base state."""
        jj = self._sheet_of(st.fib)
        ref = self.base[jj]
        n, npr = self.lattice_coords(self.U(st) - self.U(ref))
        ratio = st.h / ref.h
        eps = int(np.sign(ratio.real))
        res = abs(ratio - eps)
        dl = st.logs - ref.logs
        if self.g > 0:
            ps, qs = self.char.p, self.char.q
            z = self.U(ref)[None, :] - self.UX
            aut = 2j * np.pi * (ps @ n) - 1j * np.pi * (npr @ self.B @ npr) - 2j * np.pi * ((z + qs) @ npr)
            dl = dl - aut
        K = dl / (2j * np.pi)
        Ki = np.round(K.real).astype(int)
        res = max(res, float(np.max(np.abs(K - Ki), initial=0.0)))
        return jj, n, npr, eps, Ki, res

    def index_tables(self):
        from .covering import IndexTables

        M, N, g, nX = self.M, self.N, self.g, len(self.covering.points)
        end = np.zeros((M, N), int)
        n = np.zeros((M, N, g), int)
        npr = np.zeros((M, N, g), int)
        eps = np.ones((M, N), int)
        K = np.zeros((M, N, nX), int)
        worst = 0.0
        for m in range(M):
            for j in range(N):
                jj, a, b, e, k, res = self.compare_to_base(self.loop_end(m, j))
                if jj != self.covering.perms[m][j]:
                    raise UnsupportedTopology("loop lift disagrees with the covering permutation")
                end[m, j], n[m, j], npr[m, j], eps[m, j], K[m, j] = jj, a, b, e, k
                worst = max(worst, res)
        if worst > 1e-6:
            raise UnsupportedTopology(f"index extraction not integral (residual {worst:.2e})")
        ps = self.char.p if g else np.zeros(0)
        qs = self.char.q if g else np.zeros(0)
        return IndexTables(end, n, npr, eps, K, np.asarray(ps, float), np.asarray(qs, float), True, worst)

    def rebuild(self, lambdas, **kw):
        """Surface for moved singular points with matched conventions (needs a deformed model for moved branch values)."""
        model = kw.pop("model", None) or self.model.deformed(self.lambdas, lambdas)
        return Surface(model, lambdas, kw.pop("lambda0", self.lambda0), like=self, config=self.config, **kw)


def _match(vals, ref):
    """Reorder ``vals`` to be closest to ``ref`` (greedy)."""
    vals = list(vals)
    out = []
    for r in ref:
        i = int(np.argmin([abs(v - r) for v in vals]))
        out.append(vals.pop(i))
    return np.array(out)


# ------------------------------------------------------- functional interface
def periods_hyperelliptic(model, lambda0=None):
    """Period data of a hyperelliptic model, with the singular points taken to be its branch points.

    ``lambda0`` (the base of the loop system) defaults to a point above the
    branch points at a distance comparable to their spread.
    """
    e = np.asarray(model.e, complex)
    if lambda0 is None:
        c, d = e.mean(), np.max(np.abs(e - e.mean())) + 1.0
        lambda0 = c + (0.13 + 0.71j) * d
    e = e[angular_order(e, lambda0)]
    return Surface(model, e, lambda0).periods


def abel_map(S, lam, sheet):
    """U(P) for the point over ``lam`` on ``sheet``, integrated from P0 = (lam0, sheet 0) along the canonical path.

    Returns (U, waypoints); other paths change U by an element of Z^g + B Z^g.
    """
    wps = S.path_to(lam)
    return S.U(S.point(lam, sheet)), wps


def half_characteristic_of(S, z, tol=1e-6):
    """Characteristic [p, q] with z = B p + q for a half-period z."""
    p = np.linalg.solve(S.B.imag, np.imag(z))
    q = np.real(z) - S.B.real @ p
    p2, q2 = np.round(2 * p), np.round(2 * q)
    if max(np.max(np.abs(2 * p - p2), initial=0), np.max(np.abs(2 * q - q2), initial=0)) > tol:
        raise ValueError("vector is not a half-period")
    return th.Characteristic.from_half(p2.astype(int) % 2, q2.astype(int) % 2)


def riemann_constants(S, probes=(0.37 + 0.21j, -0.5 + 0.6j)):
    """Vector of Riemann constants (a half-period) for the Abel map based at the first branch point.

    Found among the 2^(2g) half-periods by the vanishing theorem: theta[K](sum of
    g - 1 Abel images) vanishes identically; g - 1 = 0 reduces to theta[K](0) = 0.
    Returned as a characteristic K; the vector itself is B K.p + K.q.
    """
    g = S.g
    if g == 0:
        raise UnsupportedTopology("genus 0 has no Riemann constants")
    b0 = next(i for i, p in enumerate(S.covering.points) if p.k > 1)
    scale = np.max(np.abs(S.lambdas - S.lambda0))
    pts = [S.point(S.lambda0 + scale * z, j % S.N) for j, z in enumerate(probes)]
    best = []
    for ch in th.half_characteristics(g):
        vals = []
        for k in range(len(pts)):
            z = sum((S.U(pts[(k + i) % len(pts)]) - S.UX[b0] for i in range(g - 1)), np.zeros(g, complex))
            ev = th.theta(z, S.B, ch)
            vals.append(abs(ev.value) / ev.scale)
        best.append((max(vals), ch))
    best.sort(key=lambda t: t[0])
    if best[0][0] > 1e-8 or (len(best) > 1 and best[1][0] < 1e-4):
        raise NoneFound("vanishing test does not single out the Riemann constant")
    return best[0][1]
