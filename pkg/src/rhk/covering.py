"""Combinatorics of N-sheeted branched coverings of the sphere.

Sheets are numbered 0..N-1 and are labelled over the normalization point
lam0. The permutation ``s_m`` sends a sheet j to the sheet reached by lifting
the generator loop l_m (counterclockwise around lam_m) from lam0^(j).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectsDisconnected, RejectsIdentityProductViolation, UnsupportedTopology

__all__ = [
    "PermutationRepresentation",
    "SheetPoint",
    "LiftedPath",
    "BranchedCovering",
    "IndexTables",
    "build_covering",
    "lift_loop",
    "intersection_indices",
    "cycles",
    "is_transitive",
]


def cycles(perm):
    """Cycles of a permutation (tuple of images), each starting at its smallest element."""
    seen = set()
    out = []
    for j in range(len(perm)):
        if j in seen:
            continue
        cyc = [j]
        seen.add(j)
        k = perm[j]
        while k != j:
            cyc.append(k)
            seen.add(k)
            k = perm[k]
        out.append(tuple(cyc))
    return out


def compose(perms):
    """s_M o ... o s_1 for perms = [s_1, ..., s_M]."""
    n = len(perms[0]) if perms else 0
    out = list(range(n))
    for s in perms:
        out = [s[k] for k in out]
    return tuple(out)


def is_transitive(N, perms):
    reach = {0}
    frontier = [0]
    while frontier:
        j = frontier.pop()
        for s in perms:
            for k in (s[j], s.index(j)):
                if k not in reach:
                    reach.add(k)
                    frontier.append(k)
    return len(reach) == N


@dataclass(frozen=True)
class PermutationRepresentation:
    N: int
    perms: tuple

    def __post_init__(self):
        perms = tuple(tuple(int(v) for v in s) for s in self.perms)
        object.__setattr__(self, "perms", perms)
        for s in perms:
            if sorted(s) != list(range(self.N)):
                raise ValueError(f"{s} is not a permutation of 0..{self.N - 1}")

    @property
    def M(self):
        return len(self.perms)

    def product(self):
        return compose(self.perms)

    def validate(self):
        if self.product() != tuple(range(self.N)):
            raise RejectsIdentityProductViolation("s_M o ... o s_1 is not the identity")
        if not is_transitive(self.N, self.perms):
            raise RejectsDisconnected("permutation group acts intransitively: covering is disconnected")
        return self


@dataclass(frozen=True)
class SheetPoint:
    """A point of the surface over lam_m: the sheets glued there (in cycle order) and ramification k."""

    m: int
    sheets: tuple
    k: int


@dataclass(frozen=True)
class LiftedPath:
    m: int
    start: int
    end: int

    @property
    def closed(self):
        return self.start == self.end


@dataclass
class BranchedCovering:
    N: int
    M: int
    lambdas: np.ndarray
    lambda0: complex
    perms: tuple
    points: list  # all sheet points over the lam_m (branch and non-branch)
    point_index: np.ndarray  # point_index[m, j] -> index into points
    genus: int
    passport: tuple

    @property
    def branch_points(self):
        return [p for p in self.points if p.k > 1]

    @property
    def multiplicity(self):
        return np.array([p.k for p in self.points])

    def sheet_map(self, m, j):
        return self.perms[m][j]

    def to_json(self):
        return {
            "N": self.N,
            "M": self.M,
            "lambdas": [[z.real, z.imag] for z in self.lambdas],
            "lambda0": [self.lambda0.real, self.lambda0.imag],
            "perms": [list(s) for s in self.perms],
            "genus": self.genus,
            "passport": [list(p) for p in self.passport],
            "points": [{"m": p.m, "sheets": list(p.sheets), "k": p.k} for p in self.points],
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2)


def build_covering(perm_rep: PermutationRepresentation, lambdas, lambda0) -> BranchedCovering:
    perm_rep.validate()
    lam = np.asarray(lambdas, complex)
    if len(lam) != perm_rep.M:
        raise ValueError("one permutation per singular point required")
    points = []
    index = np.zeros((perm_rep.M, perm_rep.N), int)
    passport = []
    for m, s in enumerate(perm_rep.perms):
        cyc = cycles(s)
        passport.append(tuple(sorted((len(c) for c in cyc), reverse=True)))
        for c in cyc:
            for j in c:
                index[m, j] = len(points)
            points.append(SheetPoint(m, c, len(c)))
    total = sum(p.k - 1 for p in points)
    if total % 2:
        raise ValueError("odd total ramification: Riemann-Hurwitz fails")
    genus = total // 2 - perm_rep.N + 1
    if genus < 0:
        raise ValueError("negative genus")
    return BranchedCovering(perm_rep.N, perm_rep.M, lam, complex(lambda0), perm_rep.perms, points, index, genus, tuple(passport))


def lift_loop(cov: BranchedCovering, m: int, j: int) -> LiftedPath:
    return LiftedPath(m, j, cov.perms[m][j])


@dataclass
class IndexTables:
    """How each lifted generator loop moves the analytic data of the kernel.

    For the lift of l_m from sheet j (ending on sheet ``end[m, j]``):

    * ``n[m, j] + B @ nprime[m, j]`` is the lattice vector picked up by the Abel map,
    * ``eps[m, j]`` is the sign picked up by the spinor h,
    * ``K[m, j, x]`` is the winding (in units of 2 pi i) of log E(., X) for every
      marked point X beyond the theta-function automorphy.

    In terms of intersection numbers with the basis cycles: J = -n, I = nprime,
    L = (1 - eps) / 2.
    """

    end: np.ndarray
    n: np.ndarray
    nprime: np.ndarray
    eps: np.ndarray
    K: np.ndarray
    p_star: np.ndarray
    q_star: np.ndarray
    available: bool = True
    residual: float = 0.0

    @property
    def J(self):
        return -self.n

    @property
    def I(self):
        return self.nprime

    @property
    def L(self):
        return ((1 - self.eps) // 2).astype(int)

    def to_json(self):
        return {
            "available": self.available,
            "end": self.end.tolist(),
            "I": self.I.tolist(),
            "J": self.J.tolist(),
            "K": self.K.tolist(),
            "L": self.L.tolist(),
        }


def intersection_indices(cov: BranchedCovering, surface=None) -> IndexTables:
    """Index tables from the canonical realization carried by ``surface``.

    Without an analytic realization only the sheet maps are known; the tables
    are then returned with ``available=False``.
    """
    if surface is None:
        M, N = cov.M, cov.N
        end = np.array(cov.perms, int)
        g = cov.genus
        z = np.zeros((M, N, g), int)
        return IndexTables(end, z, z.copy(), np.ones((M, N), int), np.zeros((M, N, len(cov.points)), int),
                           np.zeros(g), np.zeros(g), available=False)
    if surface.g >= 2 and surface.N >= 3:
        raise UnsupportedTopology("no canonical realization for N >= 3 coverings of genus >= 2")
    return surface.index_tables()
