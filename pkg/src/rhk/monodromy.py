"""Quasi-permutation monodromy representations and their parameterization.

Conventions. Monodromy is a right holonomy: continuing Psi along l_m gives
Psi M_m, and l_M ... l_1 is contractible, so M_M ... M_1 = I when Psi is
continued first along l_1. Column j of Psi continues into column s_m(j), hence
M_m has its nonzero entry of column j in row s_m(j). Row i is therefore
nonzero at column s_m^{-1}(i), which is what ``support`` stores. Sheets and
rows are numbered from 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product as iproduct

import numpy as np

from .covering import IndexTables, PermutationRepresentation, is_transitive
from .errors import (
    InconsistentBranchData,
    RejectsDiagonalizable,
    RejectsDisconnected,
    RejectsIdentityProductViolation,
    SingularSystem,
    ValidationError,
)
from .kernels import KernelParams

__all__ = [
    "QuasiPermMatrix",
    "MonodromyRepresentation",
    "RepresentationParameters",
    "ValidationReport",
    "validate_representation",
    "project_to_permutation",
    "monodromy_from_parameters",
    "parameters_from_monodromy",
    "conjugate",
    "parameter_count",
]

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class QuasiPermMatrix:
    support: tuple  # row i is nonzero at column support[i]
    entries: tuple

    def __post_init__(self):
        sup = tuple(int(s) for s in self.support)
        ent = tuple(complex(e) for e in self.entries)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "entries", ent)
        if sorted(sup) != list(range(len(sup))):
            raise ValidationError(f"support {sup} is not a permutation")
        if len(ent) != len(sup):
            raise ValidationError("one entry per row required")
        if any(e == 0 for e in ent):
            raise ValidationError("quasi-permutation entries must be nonzero")

    @property
    def N(self):
        return len(self.support)

    @classmethod
    def from_dense(cls, A, tol=1e-12):
        A = np.asarray(A, complex)
        scale = np.max(np.abs(A))
        sup, ent = [], []
        for i, row in enumerate(A):
            nz = np.flatnonzero(np.abs(row) > tol * scale)
            if len(nz) != 1:
                raise ValidationError(f"row {i} has {len(nz)} non-vanishing entries")
            sup.append(int(nz[0]))
            ent.append(row[nz[0]])
        return cls(tuple(sup), tuple(ent))

    def dense(self):
        A = np.zeros((self.N, self.N), complex)
        A[np.arange(self.N), self.support] = self.entries
        return A

    def permutation(self):
        """s with column j mapped to row s(j) (inverse of the row support)."""
        s = [0] * self.N
        for i, c in enumerate(self.support):
            s[c] = i
        return tuple(s)

    def to_json(self):
        return {"support": list(self.support), "entries": [[e.real, e.imag] for e in self.entries]}


@dataclass(frozen=True)
class MonodromyRepresentation:
    N: int
    lambdas: tuple
    lambda0: complex
    matrices: tuple

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(complex(z) for z in self.lambdas))
        object.__setattr__(self, "lambda0", complex(self.lambda0))
        object.__setattr__(self, "matrices", tuple(self.matrices))
        if len(self.lambdas) != len(self.matrices):
            raise ValidationError("one matrix per singular point required")
        lam = np.array(self.lambdas)
        if np.any(lam == self.lambda0):
            raise ValidationError("lambda0 coincides with a singular point")
        if len(set(self.lambdas)) != len(self.lambdas):
            raise ValidationError("singular points must be distinct")
        for Mm in self.matrices:
            if Mm.N != self.N:
                raise ValidationError("matrix size mismatch")

    @property
    def M(self):
        return len(self.matrices)

    def dense(self):
        return [Mm.dense() for Mm in self.matrices]

    def product(self):
        P = np.eye(self.N, dtype=complex)
        for Mm in self.matrices:
            P = Mm.dense() @ P
        return P

    def to_json(self):
        c = lambda z: [z.real, z.imag]
        return {
            "N": self.N,
            "lambdas": [c(z) for z in self.lambdas],
            "lambda0": c(self.lambda0),
            "matrices": [Mm.to_json() for Mm in self.matrices],
        }

    @classmethod
    def from_json(cls, d):
        from .io import parse_complex, require

        N = require(d, "N", int)
        lambdas = [parse_complex(v, f"lambdas[{i}]") for i, v in enumerate(require(d, "lambdas", list))]
        lambda0 = parse_complex(require(d, "lambda0"), "lambda0")
        mats = []
        for i, m in enumerate(require(d, "matrices", list)):
            sup = require(m, "support", list, f"matrices[{i}]")
            ent = [parse_complex(v, f"matrices[{i}].entries[{k}]") for k, v in enumerate(require(m, "entries", list, f"matrices[{i}]"))]
            mats.append(QuasiPermMatrix(tuple(sup), tuple(ent)))
        return cls(N, tuple(lambdas), lambda0, tuple(mats))

    @classmethod
    def from_dense(cls, mats, lambdas, lambda0):
        qs = tuple(QuasiPermMatrix.from_dense(A) for A in mats)
        return cls(qs[0].N, tuple(lambdas), lambda0, qs)


@dataclass
class ValidationReport:
    closure_ok: bool
    product_residual: float
    transitive: bool
    nontrivial_permutation: bool
    simultaneously_diagonalizable: bool
    tol: float

    @property
    def condition_nondiag(self):
        return self.nontrivial_permutation or not self.simultaneously_diagonalizable

    @property
    def valid(self):
        return self.closure_ok and self.product_residual <= self.tol and self.transitive and self.condition_nondiag

    def raise_for_errors(self):
        if self.product_residual > self.tol:
            raise RejectsIdentityProductViolation(f"||M_M...M_1 - I|| = {self.product_residual:.3e}")
        if not self.transitive:
            raise RejectsDisconnected("underlying permutation action is intransitive")
        if not self.condition_nondiag:
            raise RejectsDiagonalizable("matrices are simultaneously diagonalizable")
        if not self.closure_ok:
            raise ValidationError("products of generators leave the quasi-permutation class")

    def to_json(self):
        return {
            "closure_ok": self.closure_ok,
            "product_residual": self.product_residual,
            "transitive": self.transitive,
            "nontrivial_permutation": self.nontrivial_permutation,
            "simultaneously_diagonalizable": self.simultaneously_diagonalizable,
            "valid": self.valid,
        }


def _is_quasi_perm(A, tol=1e-12):
    nz = np.abs(A) > tol * np.max(np.abs(A))
    return bool(np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1))


def _simultaneously_diagonalizable(mats, tol=1e-9):
    """All matrices diagonalizable (always true here) and pairwise commuting."""
    for a in mats:
        for b in mats:
            if np.max(np.abs(a @ b - b @ a)) > tol * (1 + np.max(np.abs(a)) * np.max(np.abs(b))):
                return False
    return True


def validate_representation(rep: MonodromyRepresentation, tol=DEFAULT_TOL, strict=True) -> ValidationReport:
    mats = rep.dense()
    closure = all(_is_quasi_perm(a @ b) for a, b in iproduct(mats + [np.eye(rep.N)], repeat=2))
    resid = float(np.max(np.abs(rep.product() - np.eye(rep.N))))
    perms = [Mm.permutation() for Mm in rep.matrices]
    trans = is_transitive(rep.N, perms)
    nontriv = any(s != tuple(range(rep.N)) for s in perms)
    report = ValidationReport(closure, resid, trans, nontriv, _simultaneously_diagonalizable(mats), tol)
    if strict:
        report.raise_for_errors()
    return report


def project_to_permutation(rep: MonodromyRepresentation) -> PermutationRepresentation:
    return PermutationRepresentation(rep.N, tuple(Mm.permutation() for Mm in rep.matrices))


def conjugate(rep: MonodromyRepresentation, d):
    """D M D^-1 for D = diag(d)."""
    D = np.diag(d)
    Di = np.diag(1 / np.asarray(d))
    return MonodromyRepresentation.from_dense([D @ A @ Di for A in rep.dense()], rep.lambdas, rep.lambda0)


def parameter_count(N, M):
    return M * N - 2 * N + 1


@dataclass
class RepresentationParameters:
    """(p, q, r) together with the spin twist of the realization.

    ``p0, q0`` are minus the odd characteristic used for the prime form: with
    them the closed form reads exactly like the theorem's formula with
    J = -n, I = n', L = (1 - eps)/2 and winding numbers K generalized to
    every marked point.
    """

    params: KernelParams
    p0: np.ndarray
    q0: np.ndarray
    delta: np.ndarray | None = None  # diagonal conjugation exponents d_j = exp(2 pi i delta_j)
    shifts: np.ndarray | None = None  # integer shifts added to principal logs, shape (M, N)
    residual: float = 0.0

    @property
    def p(self):
        return self.params.p

    @property
    def q(self):
        return self.params.q

    @property
    def r(self):
        return self.params.r


def _exponent_system(tables: IndexTables, mult):
    """Linear part (rows (m, j); columns p, q, r_X) and constant part of log(c_mj)/(2 pi i)."""
    M, N = tables.eps.shape
    g = tables.n.shape[2]
    nX = tables.K.shape[2]
    A = np.zeros((M * N, 2 * g + nX))
    b0 = np.zeros(M * N)
    for m in range(M):
        for j in range(N):
            row = m * N + j
            A[row, :g] = tables.n[m, j]
            A[row, g:2 * g] = -tables.nprime[m, j]
            A[row, 2 * g:] = mult * tables.K[m, j]
            b0[row] = -tables.p_star @ tables.n[m, j] + tables.q_star @ tables.nprime[m, j] + (1 - tables.eps[m, j]) / 4
    return A, b0


def monodromy_from_parameters(params: KernelParams, tables: IndexTables, surface) -> MonodromyRepresentation:
    """Closed-form monodromy of Psi from the index tables of the realization."""
    if not tables.available:
        raise InconsistentBranchData("index tables unavailable for this covering")
    cov = surface.covering
    mult = cov.multiplicity
    A, b0 = _exponent_system(tables, mult)
    x = np.concatenate([params.p, params.q, params.r])
    expo = A @ x + b0
    M, N = tables.eps.shape
    mats = []
    for m in range(M):
        D = np.zeros((N, N), complex)
        for j in range(N):
            D[tables.end[m, j], j] = np.exp(2j * np.pi * expo[m * N + j])
        mats.append(QuasiPermMatrix.from_dense(D, tol=0))
    return MonodromyRepresentation(N, tuple(surface.lambdas), surface.lambda0, tuple(mats))


def _chains(end):
    """Disjoint chains (m, j_m) followed by sheet j through l_1, ..., l_M."""
    M, N = end.shape
    out = []
    for j in range(N):
        cur, ch = j, []
        for m in range(M):
            ch.append((m, cur))
            cur = end[m, cur]
        out.append(ch)
    return out


def parameters_from_monodromy(rep: MonodromyRepresentation, tables: IndexTables, surface, tol=1e-8) -> RepresentationParameters:
    """Invert the closed form: find (p, q, r) and a diagonal conjugation reproducing ``rep``.

    Principal logarithms are shifted by integers so that every chain relation
    (product of the entries met by one sheet going once around all loops) is
    satisfied exactly; the shifts are returned.
    """
    cov = surface.covering
    M, N = tables.eps.shape
    g = tables.n.shape[2]
    mult = cov.multiplicity
    nX = len(mult)
    mats = rep.dense()
    for m in range(M):
        for j in range(N):
            if abs(mats[m][tables.end[m, j], j]) == 0:
                raise InconsistentBranchData(f"M_{m + 1} has no entry where the covering sends sheet {j}")
    A, b0 = _exponent_system(tables, mult)
    # conjugation by diag(exp 2 pi i delta) adds delta_{end} - delta_j
    Cd = np.zeros((M * N, N))
    for m in range(M):
        for j in range(N):
            Cd[m * N + j, tables.end[m, j]] += 1
            Cd[m * N + j, j] -= 1
    Cd = Cd[:, 1:]
    logs = np.array([np.log(mats[m][tables.end[m, j], j]) / (2j * np.pi) for m in range(M) for j in range(N)])
    shifts = np.zeros(M * N)
    for ch in _chains(tables.end):
        rows = [m * N + j for m, j in ch]
        need = np.sum(b0[rows] - logs[rows].real)
        k = np.round(need)
        if abs(need - k) > 1e-6:
            raise InconsistentBranchData("chain relation is not integral: spin structure mismatch")
        shifts[rows[0]] = k
    rhs = logs + shifts - b0
    # unknowns: p, q, r (with sum k r = 0), delta_1..delta_{N-1}
    sysA = np.hstack([A, Cd]).astype(complex)
    constraint = np.concatenate([np.zeros(2 * g), mult, np.zeros(N - 1)])[None, :]
    full = np.vstack([sysA, constraint])
    rhs_full = np.concatenate([rhs, [0]])
    rank = np.linalg.matrix_rank(full.real, tol=1e-9)
    expected = 2 * g + nX + N - 1
    if rank < expected:
        raise SingularSystem(f"affine parameter map is degenerate (rank {rank} < {expected})")
    sol, *_ = np.linalg.lstsq(full, rhs_full, rcond=None)
    res = float(np.max(np.abs(full @ sol - rhs_full)))
    if res > tol:
        raise SingularSystem(f"monodromy data are not in the image of the parameter map (residual {res:.2e})")
    p, q, r = sol[:g], sol[g:2 * g], sol[2 * g:2 * g + nX]
    delta = np.concatenate([[0], sol[2 * g + nX:]])
    kp = KernelParams(p, q, r)
    return RepresentationParameters(kp, -tables.p_star, -tables.q_star, delta, shifts.reshape(M, N).astype(int), res)


def forward_exponents(params: KernelParams, tables: IndexTables, surface):
    A, b0 = _exponent_system(tables, surface.covering.multiplicity)
    return A @ np.concatenate([params.p, params.q, params.r]) + b0


def lattice_equivalent(pa: KernelParams, pb: KernelParams, tables, surface, tol=1e-10):
    """Max distance from an integer of the exponent difference between two parameter sets."""
    d = forward_exponents(pa, tables, surface) - forward_exponents(pb, tables, surface)
    return float(np.max(np.abs(d - np.round(d.real))))


def dumps(rep: MonodromyRepresentation):
    return json.dumps(rep.to_json(), indent=2)
