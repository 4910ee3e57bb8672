"""Schlesinger residues, Hamiltonians, the tau-function and variational checks.

Residues A_m and Hamiltonians H_m are computed two ways: by trapezoidal
quadrature of Psi_lam Psi^-1 on a small circle around lam_m, and (for A_m)
from lam_m-derivatives of the Szego data at lam0 with the whole surface
rebuilt at lam_m +- h. The same rebuild drives the finite-difference checks
of the tau-function, the Rauch formulas and the projective connection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContourTooClose, FiniteDifferenceUnstable, UnsupportedGeometry
from .surface import half_characteristic_of, riemann_constants

__all__ = [
    "SchlesingerData",
    "TauData",
    "VariationalCheck",
    "MalgrangeReport",
    "contour_states",
    "residues_contour",
    "residues",
    "hamiltonians",
    "schlesinger_rhs",
    "schlesinger_residual",
    "tau_closed_form",
    "tau_log_derivatives",
    "F_log_derivatives",
    "fhe_check",
    "thomae_check",
    "bergmann_sheet_residue",
    "f1_check",
    "hm10_check",
    "w2_square_sum",
    "rauch_check",
    "szego_variation",
    "projective_connection_compatibility",
    "malgrange_probe",
    "ode_continue",
    "ode_monodromy",
]

CONTOUR_NODES = 256
CONTOUR_FRACTION = 0.05


@dataclass
class SchlesingerData:
    A: np.ndarray  # (M, N, N)
    lambdas: np.ndarray
    lambda0: complex
    method: str = "contour"
    info: dict = field(default_factory=dict)

    @property
    def M(self):
        return len(self.lambdas)

    def trace(self):
        return np.trace(self.A, axis1=1, axis2=2)

    def to_json(self):
        c = lambda z: [float(np.real(z)), float(np.imag(z))]
        return {
            "method": self.method,
            "lambdas": [c(z) for z in self.lambdas],
            "lambda0": c(self.lambda0),
            "A": [[[c(z) for z in row] for row in Am] for Am in self.A],
        }


def contour_radius(S, m, fraction=CONTOUR_FRACTION):
    lam_m = S.lambdas[m]
    others = np.concatenate([np.delete(S.lambdas, m), [S.lambda0]])
    d = float(np.min(np.abs(others - lam_m)))
    r = fraction * d
    if r < 1e-10 * (1 + abs(lam_m)):
        raise ContourTooClose(f"no room for a contour around lambda_{m + 1} (radius {r:.2e})")
    return r


def contour_states(sol, m, n=CONTOUR_NODES, radius=None):
    """Column states of Psi at n equispaced nodes of a small ccw circle around lam_m.

    Returns (nodes, states) with states[i] the list of N column states at nodes[i].
    ``sol`` may also be a bare surface (the states are the sheets' continuations).
    """
    S = getattr(sol, "S", sol)
    lam_m = S.lambdas[m]
    r = contour_radius(S, m) if radius is None else radius
    u = (S.lambda0 - lam_m) / abs(S.lambda0 - lam_m)
    phi = np.angle(u) + 2 * np.pi * np.arange(n) / n
    nodes = lam_m + r * np.exp(1j * phi)
    c = nodes[0]
    cols = []
    for st in S.base:
        st0 = S.continue_path(st, S.path_to(c))
        rest = S.continue_path(st0, list(nodes[1:]), record=True)
        cols.append([st0, *rest])
    states = [[cols[j][i] for j in range(S.N)] for i in range(n)]
    return nodes, states


def _contour_fields(sol, m, n=CONTOUR_NODES, radius=None):
    """Nodes and L = Psi_lam Psi^-1 on the circle around lam_m."""
    nodes, states = contour_states(sol, m, n, radius)
    L = np.empty((n, sol.N, sol.N), complex)
    for i, Ps in enumerate(states):
        L[i] = sol.psi_lambda_from_states(Ps) @ sol.inverse_from_states(Ps)
    return nodes, L


def residues_contour(sol, n=CONTOUR_NODES, with_hamiltonians=False):
    """A_m = res Psi_lam Psi^-1 at lam_m (and optionally H_m) by trapezoidal quadrature."""
    S = sol.S
    A = np.empty((S.M, sol.N, sol.N), complex)
    H = np.empty(S.M, complex)
    for m in range(S.M):
        nodes, L = _contour_fields(sol, m, n)
        dz = (nodes - S.lambdas[m])[:, None, None]
        A[m] = np.mean(L * dz, axis=0)
        tr2 = np.einsum("nij,nji->n", L, L)
        H[m] = 0.5 * np.mean(tr2 * dz[:, 0, 0])
    data = SchlesingerData(A, S.lambdas.copy(), S.lambda0, "contour")
    if with_hamiltonians:
        data.info["H"] = H
    return data


def hamiltonians(sol, n=CONTOUR_NODES):
    """H_m = (1/2) res tr(Psi_lam Psi^-1)^2 at lam_m by contour quadrature."""
    return residues_contour(sol, n, with_hamiltonians=True).info["H"]


def fd_step(S, h=None):
    """Default finite-difference step: 1e-4 times the smallest distance between singular points and lam0."""
    if h is not None:
        return h
    pts = np.concatenate([S.lambdas, [S.lambda0]])
    d = np.abs(pts[:, None] - pts[None, :])
    np.fill_diagonal(d, np.inf)
    return 1e-4 * float(np.min(d))


def moved(S, m, dl):
    lam = S.lambdas.copy()
    lam[m] += dl
    return lam


def _sol_at(sol, lambdas):
    from .rhp import PsiSolution

    return PsiSolution(sol.S.rebuild(lambdas), sol.params)


def central_difference(f, h, refine=True, rel_tol=1e-3):
    """(f(h) - f(-h)) / 2h, optionally Richardson-refined with h/2."""
    d1 = (f(h) - f(-h)) / (2 * h)
    if not refine:
        return d1
    d2 = (f(h / 2) - f(-h / 2)) / h
    if np.max(np.abs(d1 - d2)) > rel_tol * (1 + np.max(np.abs(d2))):
        raise FiniteDifferenceUnstable(f"central differences disagree by {np.max(np.abs(d1 - d2)):.2e}")
    return (4 * d2 - d1) / 3


def residues(sol, h=None, refine=True):
    """A_m = (lam0 - lam_m)^2 d/dlam_m of the base kernel matrix (off-diagonal shat, diagonal a0)."""
    S = sol.S
    h = fd_step(S, h)
    A = np.empty((S.M, sol.N, sol.N), complex)
    for m in range(S.M):
        f = lambda dl, m=m: _sol_at(sol, moved(S, m, dl)).base_kernel()
        A[m] = (S.lambda0 - S.lambdas[m]) ** 2 * central_difference(f, h, refine)
    return SchlesingerData(A, S.lambdas.copy(), S.lambda0, "finite-difference", {"h": h})


def _comm(X, Y):
    return X @ Y - Y @ X


def schlesinger_rhs(A, lambdas, lambda0, n, m):
    """Right-hand side of dA_n/dlam_m for Psi normalized at lam0."""
    if n != m:
        C = _comm(A[n], A[m])
        return C / (lambdas[n] - lambdas[m]) - C / (lambda0 - lambdas[m])
    out = np.zeros_like(A[m])
    for k in range(len(lambdas)):
        if k != m:
            out -= _comm(A[k], A[m]) / (lambdas[k] - lambdas[m])
    return out


def _residues_at(sol, lambdas, inner, nodes):
    s = sol if lambdas is None else _sol_at(sol, lambdas)
    if inner == "contour":
        return residues_contour(s, n=nodes).A
    return residues(s).A


def schlesinger_residual(sol, h=1e-4, inner="contour", nodes=32, data=None):
    """Max over (n, m) of |FD dA_n/dlam_m - RHS| with A recomputed at lam_m +- h.

    The inner residues default to contour quadrature: Psi_lam Psi^-1 is
    single-valued and meromorphic around lam_m, so a few dozen trapezoid nodes
    already give machine precision, which keeps the outer difference quotient
    free of inner noise.
    """
    S = sol.S
    A = data.A if data is not None else _residues_at(sol, None, inner, nodes)
    table = np.zeros((S.M, S.M))
    for m in range(S.M):
        Ap = _residues_at(sol, moved(S, m, h), inner, nodes)
        Am = _residues_at(sol, moved(S, m, -h), inner, nodes)
        dA = (Ap - Am) / (2 * h)
        for n in range(S.M):
            table[n, m] = float(np.max(np.abs(dA[n] - schlesinger_rhs(A, S.lambdas, S.lambda0, n, m))))
    return float(table.max()), table


# ---------------------------------------------------------------- tau-function
@dataclass
class TauData:
    """tau = prod base**exponent over ``factors``; defined up to a constant factor.

    Keeping the factors separate makes finite differences of ln tau branch-safe:
    each base moves only slightly, so ln(base_+ / base_-) is the principal log.
    """

    family: str
    factors: list  # (name, base, exponent)
    H_pairs: dict  # name -> value, for reports
    F_available: bool = True
    theta_value: complex = 1.0

    @property
    def value(self):
        out = 1.0 + 0j
        for _, b, e in self.factors:
            out *= complex(b) ** e
        return out

    def log_ratio(self, other):
        """ln(other / self) assembled factor by factor."""
        if [f[0] for f in self.factors] != [f[0] for f in other.factors]:
            raise ValueError("tau data come from different families")
        return sum(e * np.log(complex(b2) / complex(b1)) for (_, b1, e), (_, b2, _) in zip(self.factors, other.factors))

    def to_json(self):
        c = lambda z: [float(np.real(z)), float(np.imag(z))]
        return {
            "family": self.family,
            "F_available": self.F_available,
            "theta": c(self.theta_value),
            "factors": [{"name": n, "base": c(b), "exponent": c(e)} for n, b, e in self.factors],
        }


def _pair_factors(sol, pairs="prime-form"):
    """r-dependent factor of tau.

    ``"prime-form"``: prod_{X<Y} E(X, Y)^{k_X r_X k_Y r_Y} over the marked sheet
    points, with E written in the natural charts x = (lam - lam_m)^(1/k).
    ``"printed"``: prod_{m<n} (lam_m - lam_n)^{r_mn}; the two agree for N = 1.
    """
    S = sol.S
    if pairs == "printed":
        rmn = sol.params.rmn(S)
        return [(f"pair{m},{n}", S.lambdas[m] - S.lambdas[n], rmn[m, n])
                for m in range(S.M) for n in range(m + 1, S.M) if rmn[m, n] != 0]
    if pairs != "prime-form":
        raise ValueError(f"unknown pair form {pairs!r}")
    kr = sol.kr
    live = np.flatnonzero(kr != 0)
    out = []
    if S.g == 0:
        for a_, i in enumerate(live):
            for j in live[a_ + 1:]:
                out.append((f"E{i},{j}", S.tX[i] - S.tX[j], kr[i] * kr[j]))
        for i in live:
            p = S.covering.points[i]
            c = _chart_coefficient(S, i)
            # dt/dx = c^(-1/k); the chart factors contribute (dt/dx)^{(k r)^2 / 2}
            out.append((f"chart{i}", c, -kr[i] ** 2 / (2 * p.k)))
        return out
    from . import theta as th

    if np.any(S.X_special[live]):
        raise UnsupportedGeometry("nonzero r at a marked point where the prime-form spinor vanishes")
    hsq2 = (S.omegaX[live] @ S.grad0) ** 2  # (h_X^2)^2 in the natural chart, sign free
    for a_, i in enumerate(live):
        for b_, j in enumerate(live[a_ + 1:], start=a_ + 1):
            num = th.theta(S.UX[i] - S.UX[j], S.B, S.char).value
            out.append((f"E{i},{j}", num**4 / (hsq2[a_] * hsq2[b_]), kr[i] * kr[j] / 4))
    return out


def _chart_coefficient(S, i):
    """c with lam - lam_m = c (t - t_X)^k + ... at the marked point i of a rational model."""
    p = S.covering.points[i]
    model = S.model
    poly = np.polynomial.polynomial.polysub(model.num, S.lambdas[p.m] * np.concatenate([model.den, [0]]))
    return _taylor(poly, S.tX[i], p.k) / np.polynomial.polynomial.polyval(S.tX[i], model.den)


def _theta_factor(sol):
    S = sol.S
    if S.g == 0:
        return [], 1.0
    from . import theta as th

    val = th.theta(sol.Omega, S.B, sol.params.char).value
    return [("theta", val, 1.0)], val


def _genus0_factors(S):
    out = []
    for i, p in enumerate(S.covering.points):
        if p.k > 1:
            # dU/dx_m = c^(-1/k) with U = t; weight (k - 1) / 24
            out.append((f"branch{i}", _chart_coefficient(S, i), -(p.k - 1) / (24 * p.k)))
    _, _, res = S.model.partial_fractions()
    for i, c in enumerate(res):
        out.append((f"infinity{i + 1}", c, -1.0 / 12))
    return out


def _taylor(poly, t, k):
    """k-th Taylor coefficient of the polynomial at t."""
    from math import factorial

    return np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyder(poly, k)) / factorial(k)


def _hyperelliptic_F_factors(S):
    e = S.model.e
    facs = [("detA", np.linalg.det(S.periods.A), -0.5)]
    for m in range(len(e)):
        for n in range(m + 1, len(e)):
            facs.append((f"e{m},{n}", e[m] - e[n], -1.0 / 8))
    return facs


def _genus1_factors(S):
    from . import theta as th

    e = S.model.e
    C = S.C[0, 0]
    facs = []
    for m in range(len(e)):
        dprod = np.prod(np.delete(e[m] - e, m))
        # (dU/dx_m)^2 = 4 C^2 / prod_{n != m}(e_m - e_n); weight 1/24 on dU/dx_m
        facs.append((f"branch{m}", 4 * C**2 / dprod, 1.0 / 48))
    # dU/dzeta at the two infinities is -+C: their product is -C^2
    facs.append(("infinity", C**2, -1.0 / 12))
    half = th.Characteristic([0.5], [0.5])
    d1 = th.theta(np.zeros(1), S.B, half, derivs=1).gradient[0]
    facs.append(("theta1prime", d1, -1.0 / 3))
    return facs


def tau_closed_form(sol, family=None, pairs="prime-form"):
    """Closed-form tau for genus 0, genus 1 and hyperelliptic coverings.

    ``family`` is "genus0", "genus1" or "hyperelliptic"; by default genus 0 and
    genus 1 use their own formulas and hyperelliptic g >= 2 the determinant one.
    Outside these families only the theta factor and the pair product are
    returned, with ``F_available`` False.
    """
    from .models import HyperellipticCurve, RationalCurve

    S = sol.S
    model = S.model
    if family is None:
        if S.g == 0 and isinstance(model, RationalCurve):
            family = "genus0"
        elif S.g == 1 and isinstance(model, HyperellipticCurve):
            family = "genus1"
        elif isinstance(model, HyperellipticCurve):
            family = "hyperelliptic"
        else:
            family = "theta-only"
    tf, tval = _theta_factor(sol)
    pairs = _pair_factors(sol, pairs)
    if family == "genus0":
        if not isinstance(model, RationalCurve):
            raise UnsupportedGeometry("genus-0 formula needs a rational model")
        F = _genus0_factors(S)
    elif family == "genus1":
        if not (isinstance(model, HyperellipticCurve) and S.g == 1):
            raise UnsupportedGeometry("genus-1 formula is implemented for elliptic (two-sheeted) models")
        F = _genus1_factors(S)
    elif family == "hyperelliptic":
        if not isinstance(model, HyperellipticCurve):
            raise UnsupportedGeometry("determinant formula needs a hyperelliptic model")
        F = _hyperelliptic_F_factors(S)
    elif family == "theta-only":
        return TauData(family, pairs + tf, {}, False, tval)
    else:
        raise UnsupportedGeometry(f"unknown tau family {family!r}")
    return TauData(family, F + pairs + tf, {}, True, tval)


def tau_log_derivatives(sol, h=None, family=None, pairs="prime-form"):
    """Central-difference d ln tau_closed / d lam_m for every m."""
    S = sol.S
    h = fd_step(S, h)
    out = np.empty(S.M, complex)
    for m in range(S.M):
        tp = tau_closed_form(_sol_at(sol, moved(S, m, h)), family, pairs)
        tm = tau_closed_form(_sol_at(sol, moved(S, m, -h)), family, pairs)
        out[m] = tm.log_ratio(tp) / (2 * h)
    return out


def _F_factors(S, family):
    if family == "genus0":
        return _genus0_factors(S)
    if family == "genus1":
        return _genus1_factors(S)
    if family == "hyperelliptic":
        return _hyperelliptic_F_factors(S)
    raise UnsupportedGeometry(f"no closed form for F in family {family!r}")


def _log_ratio(f1, f2):
    return sum(e * np.log(complex(b2) / complex(b1)) for (_, b1, e), (_, b2, _) in zip(f1, f2))


def F_log_derivatives(S, family="hyperelliptic", h=None):
    """Central-difference d ln F / d lam_m (F depends on the surface only)."""
    h = fd_step(S, h)
    out = np.empty(S.M, complex)
    for m in range(S.M):
        fp = _F_factors(S.rebuild(moved(S, m, h)), family)
        fm = _F_factors(S.rebuild(moved(S, m, -h)), family)
        out[m] = _log_ratio(fm, fp) / (2 * h)
    return out


def fhe_check(S, h=None, family="hyperelliptic"):
    """max_m |d ln F / d lam_m - R(lam_m)/24| for simple branch points, R from the Bergmann kernel."""
    from .kernels import projective_connection

    dF = F_log_derivatives(S, family, h)
    R = np.array([projective_connection(S, m) for m in range(S.M)])
    return float(np.max(np.abs(dF - R / 24))), dF, R


# ------------------------------------------------------------ Thomae formula
def _branch_indices(S):
    return [i for i, p in enumerate(S.covering.points) if p.k == 2]


def thomae_check(S):
    """Relative residual of theta[eta_T](0)^4 = (det A / (2 pi i)^g)^2 prod_T prod_{not T} over all T.

    T runs over (g + 1)-subsets of branch points and eta_T = sum_T U(e) + K.
    """
    from itertools import combinations

    from . import theta as th
    from .models import HyperellipticCurve

    if not isinstance(S.model, HyperellipticCurve):
        raise UnsupportedGeometry("Thomae formula needs a hyperelliptic model")
    g = S.g
    br = _branch_indices(S)
    K = riemann_constants(S)
    Kz = S.B @ K.p + K.q
    e = np.array([S.lambdas[S.covering.points[i].m] for i in br])
    Ue = np.array([S.UX[i] - S.UX[br[0]] for i in br])
    a = np.linalg.det(S.periods.A) / (2j * np.pi) ** g
    worst, rows = 0.0, []
    for T in combinations(range(2 * g + 2), g + 1):
        if 0 not in T:
            continue  # T and its complement give the same characteristic
        Tc = [m for m in range(2 * g + 2) if m not in T]
        ch = half_characteristic_of(S, Ue[list(T)].sum(axis=0) + Kz)
        lhs = th.theta(np.zeros(g), S.B, ch).value ** 4
        rhs = a**2 * np.prod([x - y for x, y in combinations(e[list(T)], 2)]) * np.prod(
            [x - y for x, y in combinations(e[Tc], 2)])
        res = abs(lhs - rhs) / abs(lhs)
        rows.append((T, ch, lhs, rhs, res))
        worst = max(worst, res)
    return worst, rows


# ------------------------------------------------------- Bergmann residues
def bergmann_sheet_residue(S, m, n=64):
    """res_{lam = lam_m} sum_{j<k} w(lam^(j), lam^(k)) / dlam^2 by contour quadrature."""
    from .kernels import bergmann

    nodes, states = contour_states(S, m, n)
    vals = np.array([sum(bergmann(S, Ps[j], Ps[k]) for j in range(S.N) for k in range(j + 1, S.N)) for Ps in states])
    return np.mean(vals * (nodes - S.lambdas[m]))


def f1_check(S, n=64):
    """max_m |sum_l R_l / (12 k_l) - (-res sum_{j<k} w / dlam^2)| over simple branch points."""
    from .kernels import projective_connection

    rows = []
    for m in range(S.M):
        pts = [p for p in S.covering.points if p.m == m and p.k > 1]
        if not pts:
            continue
        if any(p.k != 2 for p in pts) or len(pts) > 1:
            raise UnsupportedGeometry("the projective-connection side is implemented for one simple branch point per lam_m")
        lhs = projective_connection(S, m) / 24
        rhs = -bergmann_sheet_residue(S, m, n)
        rows.append((m, lhs, rhs))
    return max(abs(a - b) for _, a, b in rows), rows


def hm10_check(sol, n=64, h=None):
    """max_m |H_m - d ln(r-factor * theta) - (-res sum_{j<k} w / dlam^2)|."""
    S = sol.S
    H = hamiltonians(sol)
    d = tau_log_derivatives(sol, h=h, family="theta-only")
    res = np.array([-bergmann_sheet_residue(S, m, n) for m in range(S.M)])
    return float(np.max(np.abs(H - d - res))), H, d, res


def w2_square_sum(sol, lam):
    """(sum_j W_2(lam^(j))^2 / dlam^2, sum_{m,n} r_mn / ((lam - lam_m)(lam - lam_n))) at lam."""
    S = sol.S
    Ps = S.points(lam)
    W2 = np.array([sol.kr @ S.dlog_numer(P) for P in Ps])
    rmn = sol.params.rmn(S)
    v = 1.0 / (lam - S.lambdas)
    return np.sum(W2**2), v @ rmn @ v


# --------------------------------------------------- variational formulas
@dataclass
class VariationalCheck:
    """FD-versus-formula residuals for one lam_m at step h."""

    m: int
    h: float
    varB1: float
    varw: float
    anti_holomorphic: float
    vars: float | None = None
    info: dict = field(default_factory=dict)

    def to_json(self):
        return {"m": self.m, "h": self.h, "varB1": self.varB1, "varw": self.varw,
                "anti_holomorphic": self.anti_holomorphic, "vars": self.vars}


def _surface_at(S, lambdas):
    return S.rebuild(lambdas)


def _fd(f, h):
    """Holomorphic central difference and the d/d(conj lam) combination from real and imaginary steps."""
    fx = (f(h) - f(-h)) / (2 * h)
    fy = (f(1j * h) - f(-1j * h)) / (2 * h)
    return fx, (fx + 1j * fy) / 2


def rauch_B_residue(S, m, n=64):
    """-4 pi i res sum_{j<k} w_a(lam^(j)) w_b(lam^(k)) / dlam^2, in its symmetric form.

    Relabelling sheets along the contour changes the j<k sum by an antisymmetric
    term; with sum_j w = 0 the symmetric part is -1/2 sum_j w_a w_b.
    """
    nodes, states = contour_states(S, m, n)
    vals = np.array([-0.5 * sum(np.outer(S.w(P), S.w(P)) for P in Ps) for Ps in states])
    res = np.mean(vals * (nodes - S.lambdas[m])[:, None, None], axis=0)
    return -4j * np.pi * res


def rauch_w_residue(S, m, P, n=64):
    """res sum_j w_a(lam^(j)) w(lam^(j), P) / dlam^2 for a fixed point P."""
    from .kernels import bergmann

    nodes, states = contour_states(S, m, n)
    vals = np.array([sum(S.w(Q) * bergmann(S, Q, P) for Q in Qs) for Qs in states])
    return np.mean(vals * (nodes - S.lambdas[m])[:, None], axis=0)


def _szego_x(S, P, i, char, first):
    """s(P, X) (first=False) or s(X, P) with X the i-th marked point in the chart x = sqrt(lam - lam_m),
    together with its x-derivative at X."""
    from .theta import theta

    om = S.omegaX[i]
    hx = np.sqrt(S.grad0 @ om)
    z = S.U(P) - S.UX[i] if not first else S.UX[i] - S.U(P)
    ev = theta(z, S.B, char, derivs=1)
    es = theta(z, S.B, S.char, derivs=1)
    ev0 = theta(np.zeros(S.g), S.B, char).value
    s = ev.value * P.h * hx / (ev0 * es.value)
    dlog = (ev.gradient / ev.value - es.gradient / es.value) @ om
    return s, (-dlog if not first else dlog) * s


def szego_variation(S, m, P, Q, p, q):
    """Right-hand side 1/4 {D_m[s(P,P_m)] s(P_m,Q) - s(P,P_m) D_m[s(P_m,Q)]} for a simple branch point."""
    from .theta import Characteristic

    if S.g == 0 or not hasattr(S.model, "e"):
        raise UnsupportedGeometry("the Szego variation is implemented for hyperelliptic surfaces")
    idx = [i for i, X in enumerate(S.covering.points) if X.m == m and X.k == 2]
    if len(idx) != 1:
        raise UnsupportedGeometry(f"lambda_{m + 1} is not a single simple branch point")
    i = idx[0]
    if S.X_special[i]:
        raise UnsupportedGeometry("the odd spinor vanishes at this branch point")
    char = Characteristic(p, q)
    sPX, DsPX = _szego_x(S, P, i, char, first=False)
    sXQ, DsXQ = _szego_x(S, Q, i, char, first=True)
    return (DsPX * sXQ - sPX * DsXQ) / 4


def rauch_check(S, m, h=1e-5, probe=None, params=None, n=64):
    """Finite-difference checks of the lam_m-variations of B, w and (for simple branch points) the Szego kernel.

    ``probe`` is a (lam, sheet) pair for the fixed point P used in the w check;
    the Szego check uses P on ``sheet`` and Q on the next sheet over the same lam.
    """
    from .kernels import szego

    if probe is None:
        probe = (S.lambda0 + 0.5 * (S.lambdas[m] - S.lambda0) * 1j, 0)
    lamP, jP = probe
    surf = {}

    def at(dl):
        if dl not in surf:
            surf[dl] = _surface_at(S, moved(S, m, dl))
        return surf[dl]

    dB, dbarB = _fd(lambda dl: at(dl).B, h)
    varB1 = float(np.max(np.abs(dB - rauch_B_residue(S, m, n))))
    dw, dbarw = _fd(lambda dl: at(dl).w(at(dl).point(lamP, jP)), h)
    P = S.point(lamP, jP)
    varw = float(np.max(np.abs(dw - rauch_w_residue(S, m, P, n))))
    anti = float(max(np.max(np.abs(dbarB)), np.max(np.abs(dbarw))))
    out = VariationalCheck(m, h, varB1, varw, anti)
    if params is not None and S.g > 0 and hasattr(S.model, "e"):
        p, q = params.p, params.q
        jQ = (jP + 1) % S.N

        def s_at(dl):
            T = at(dl)
            return szego(T, T.point(lamP, jP), T.point(lamP, jQ), p, q)

        try:
            rhs = szego_variation(S, m, P, S.point(lamP, jQ), p, q)
        except UnsupportedGeometry as e:
            out.info["vars_skipped"] = str(e)
        else:
            ds, _ = _fd(s_at, h)
            out.vars = float(abs(ds - rhs))
            out.info["vars_scale"] = float(abs(rhs))
    return out


def projective_connection_compatibility(S, m, n, h=1e-4):
    """|dR_m/dlam_n - dR_n/dlam_m| by central differences (simple branch points)."""
    from .kernels import projective_connection

    def R(k, j, dl):
        return projective_connection(_surface_at(S, moved(S, j, dl)), k)

    d_mn = (R(m, n, h) - R(m, n, -h)) / (2 * h)
    d_nm = (R(n, m, h) - R(n, m, -h)) / (2 * h)
    return float(abs(d_mn - d_nm)), d_mn, d_nm


# --------------------------------------------------- Malgrange divisor
MALGRANGE_THRESHOLD = 1e-2


@dataclass
class MalgrangeReport:
    """|theta[p,q](Omega)| (relative to the lattice-sum scale) sampled along a path in lam-space."""

    ts: np.ndarray
    theta_ratio: np.ndarray
    flags: list
    zeros: list = field(default_factory=list)

    def to_json(self):
        return {
            "ts": self.ts.tolist(),
            "theta_ratio": self.theta_ratio.tolist(),
            "flags": [
                {"t": z["t"].real, "theta_ratio": z["theta_ratio"], "tau_theta_factor": [z["tau_theta"].real, z["tau_theta"].imag],
                 "A_norms": [[d, a] for d, a in z["A_norms"]]}
                for z in self.zeros if z["flag"]
            ],
        }


def _theta_omega(S, params):
    from .theta import theta

    ev = theta(params.omega(S), S.B, params.char)
    return ev.value, abs(ev.value) / max(ev.scale, 1e-300)


def _max_A(sol, nodes=32):
    return float(max(np.linalg.norm(A, 2) for A in residues_contour(sol, n=nodes).A))


def malgrange_probe(sol, start, end, n=21, threshold=MALGRANGE_THRESHOLD, offsets=(1e-3, 1e-5, 1e-7), tol=1e-8):
    """Sample |theta[p,q](Omega)| on the segment lam(t) = start + t (end - start), 0 <= t <= 1.

    Local minima below ``threshold`` are refined by a secant iteration on the
    holomorphic function t -> theta[p,q](Omega(lam(t))) in complex t; a zero
    with |Im t| < tol inside [0, 1] is flagged. At each flagged zero the
    residues are evaluated at t* + offsets (relative to the path length) to
    expose the blow-up of max_m |A_m|.
    """
    from .errors import ThetaDivisorHit
    from .rhp import PsiSolution

    S0, params = sol.S, sol.params
    if S0.g == 0:
        return MalgrangeReport(np.linspace(0, 1, n), np.ones(n), [], [])
    start, end = np.asarray(start, complex), np.asarray(end, complex)
    lam = lambda t: start + t * (end - start)
    ts = np.linspace(0, 1, n)
    surfaces, vals, ratios = [], [], []
    S = S0
    for t in ts:
        S = S.rebuild(lam(t))
        surfaces.append(S)
        v, r = _theta_omega(S, params)
        vals.append(v)
        ratios.append(r)
    ratios = np.array(ratios)
    zeros, flags = [], []
    for i in range(n):
        lo, hi = max(i - 1, 0), min(i + 1, n - 1)
        if ratios[i] > threshold or ratios[i] > min(ratios[lo], ratios[hi]):
            continue
        j = hi if hi != i and (lo == i or ratios[hi] < ratios[lo]) else lo
        t0, t1 = complex(ts[i]), complex(ts[j])
        S_ref = surfaces[i]
        f0, f1 = vals[i], vals[j]
        for _ in range(60):
            if f1 == f0:
                break
            t2 = t1 - f1 * (t1 - t0) / (f1 - f0)
            S_ref = S_ref.rebuild(lam(t2))
            f2, r2 = _theta_omega(S_ref, params)
            t0, f0, t1, f1 = t1, f1, t2, f2
            if abs(t1 - t0) < 1e-14:
                break
        t_star = t1
        on_path = abs(t_star.imag) < tol and -tol <= t_star.real <= 1 + tol
        rec = {"t": t_star, "theta_ratio": float(r2), "tau_theta": complex(f1), "flag": bool(on_path), "A_norms": []}
        if on_path:
            flags.append(i)
            S_near = S_ref
            for d in offsets:
                S_near = S_near.rebuild(lam(t_star.real + d))
                try:
                    rec["A_norms"].append((d, _max_A(PsiSolution(S_near, params))))
                except ThetaDivisorHit:
                    rec["A_norms"].append((d, float("inf")))
        zeros.append(rec)
    return MalgrangeReport(ts, ratios, flags, zeros)


# ------------------------------------------- ODE continuation (cross-check)
def ode_continue(data, waypoints, Psi0=None, start=None, rtol=1e-11, atol=1e-12):
    """Integrate dPsi/dlam = sum_n A_n / (lam - lam_n) Psi along straight segments through ``waypoints``.

    ``data`` is a :class:`SchlesingerData`; the integration starts at ``start``
    (default lam0) from ``Psi0`` (default I).
    """
    from scipy.integrate import solve_ivp

    A, lams = data.A, data.lambdas
    N = A.shape[1]
    Psi = np.eye(N, dtype=complex) if Psi0 is None else np.array(Psi0, complex)
    a = data.lambda0 if start is None else complex(start)
    for b in waypoints:
        b = complex(b)
        if b == a:
            continue
        d = b - a

        def rhs(s, y, a=a, d=d):
            lam = a + s * d
            L = np.tensordot(1.0 / (lam - lams), A, axes=1)
            return (d * (L @ y.reshape(N, N))).ravel()

        sol = solve_ivp(rhs, (0.0, 1.0), Psi.ravel(), method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise RuntimeError(f"ODE continuation failed: {sol.message}")
        Psi = sol.y[:, -1].reshape(N, N)
        a = b
    return Psi


def ode_monodromy(data, S, m, orientation=1, **kw):
    """Monodromy of l_m from the ODE: Psi(lam0) = I continued around the loop equals X_m."""
    return ode_continue(data, S.loop_waypoints(m, orientation), **kw)
