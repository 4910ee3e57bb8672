"""Riemann-Hilbert problems with quasi-permutation monodromy, solved by Szego kernels on branched coverings.

Modules
-------
monodromy : quasi-permutation representations and the (p, q, r) parameter map
covering  : permutation data, genus, sheet points, intersection indices
models    : hyperelliptic and rational surface models
surface   : analytic continuation, periods, Abel map
theta     : theta functions with characteristics
kernels   : prime form, Szego and Bergmann kernels
rhp       : the solution Psi, its monodromy and local exponents
isomono   : Schlesinger residues, Hamiltonians, tau-function, variational checks
cli       : the ``rhk`` command
"""

from .errors import RHKError
from .kernels import KernelParams
from .models import HyperellipticCurve, RationalCurve
from .rhp import PsiSolution
from .surface import Surface, angular_order

__version__ = "0.1.0"

__all__ = ["RHKError", "KernelParams", "HyperellipticCurve", "RationalCurve", "PsiSolution", "Surface", "angular_order"]
