"""Problem files: JSON parsing with field-path diagnostics, run configuration, pipeline assembly."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ValidationError

SCHEMA = "rhk/1"


class SpecError(ValidationError):
    """Malformed problem or config file; ``path`` names the offending field."""

    module = "cli"

    def __init__(self, msg, path=""):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path


def _join(where, key):
    if not where:
        return str(key)
    return f"{where}[{key}]" if isinstance(key, int) else f"{where}.{key}"


def require(d, key, typ=None, where=""):
    """d[key], checked for presence and (optionally) type."""
    path = _join(where, key)
    if not isinstance(d, dict):
        raise SpecError("expected an object", where)
    if key not in d:
        raise SpecError("missing field", path)
    v = d[key]
    if typ is not None:
        ok = isinstance(v, typ) and not (typ in (int, float) and isinstance(v, bool))
        if typ is float and isinstance(v, int) and not isinstance(v, bool):
            ok = True
        if not ok:
            raise SpecError(f"expected {typ.__name__}, got {type(v).__name__}", path)
    return v


def parse_complex(v, path=""):
    """A number, a [re, im] pair or a string such as '1-2j'."""
    if isinstance(v, bool):
        raise SpecError("expected a complex number", path)
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(v[0], v[1])
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", ""))
        except ValueError:
            pass
    raise SpecError(f"expected a complex number, got {v!r}", path)


def parse_complex_list(v, path):
    if not isinstance(v, list):
        raise SpecError("expected a list", path)
    return np.array([parse_complex(x, _join(path, i)) for i, x in enumerate(v)], complex)


def cjson(z):
    """JSON form [re, im] of a complex scalar or array."""
    a = np.asarray(z)
    if a.ndim == 0:
        z = complex(a)
        return [z.real, z.imag]
    return [cjson(x) for x in a]


def load_json(path):
    """Read a JSON file; syntax errors become SpecError with line and column."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise SpecError(str(e), str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}", str(path)) from None


# ------------------------------------------------------------------ config
@dataclass
class Config:
    """All tolerances, steps and quadrature sizes of a run (echoed in every report)."""

    h: float | None = None  # FD step for lam_m-derivatives; None = 1e-4 times the point spacing
    schlesinger_h: float = 1e-4
    rauch_h: float = 1e-5
    compat_h: float = 1e-4
    contour_nodes: int = 256
    tol_normalization: float = 1e-10
    tol_det: float = 1e-9
    tol_monodromy: float = 1e-8
    tol_product: float = 1e-9
    tol_exponents: float = 1e-8
    tol_residue_eigs: float = 1e-7
    tol_schlesinger: float = 1e-5
    tol_tau: float = 1e-5
    tol_thomae: float = 1e-7
    tol_fhe: float = 1e-5
    tol_rauch: float = 1e-6
    tol_anti: float = 1e-8
    tol_vars: float = 1e-5
    tol_compat: float = 1e-4
    tol_fay: float = 1e-8
    tol_heat: float = 1e-6
    tol_sumw: float = 1e-10
    malgrange_threshold: float = 1e-2

    @classmethod
    def from_json(cls, d, where="config"):
        if not isinstance(d, dict):
            raise SpecError("expected an object", where)
        names = {f.name for f in fields(cls)}
        kw = {}
        for k, v in d.items():
            if k not in names:
                raise SpecError("unknown config key", _join(where, k))
            if k == "contour_nodes":
                kw[k] = require(d, k, int, where)
            elif v is None and k == "h":
                kw[k] = None
            else:
                kw[k] = float(require(d, k, float, where))
        return cls(**kw)

    def with_overrides(self, h=None, tol=None):
        """Apply --h (every FD step) and --tol (every tolerance)."""
        d = asdict(self)
        if h is not None:
            for k in ("h", "schlesinger_h", "rauch_h", "compat_h"):
                d[k] = h
        if tol is not None:
            for k in d:
                if k.startswith("tol_"):
                    d[k] = tol
        return Config(**d)

    def to_json(self):
        return asdict(self)


# ------------------------------------------------------------- problem spec
@dataclass
class ProblemSpec:
    """A surface model, the singular points, lam0 and either (p, q, r) or a monodromy representation."""

    surface: dict
    lambdas: np.ndarray
    lambda0: complex
    parameters: dict | None = None
    representation: object | None = None
    grid: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    malgrange_path: tuple | None = None
    tau_family: str | None = None

    @classmethod
    def from_json(cls, d, need_params=True):
        from .monodromy import MonodromyRepresentation

        if not isinstance(d, dict):
            raise SpecError("problem must be a JSON object")
        schema = d.get("schema", SCHEMA)
        if schema != SCHEMA:
            raise SpecError(f"unsupported schema {schema!r} (expected {SCHEMA!r})", "schema")
        surf = require(d, "surface", dict)
        kind = require(surf, "type", str, "surface")
        if kind in ("hyperelliptic", "elliptic"):
            parse_complex_list(require(surf, "branch_points", list, "surface"), "surface.branch_points")
        elif kind == "rational":
            parse_complex_list(require(surf, "numerator", list, "surface"), "surface.numerator")
            parse_complex_list(require(surf, "denominator", list, "surface"), "surface.denominator")
        else:
            raise SpecError(f"unknown surface type {kind!r}", "surface.type")
        lambda0 = parse_complex(require(d, "lambda0"), "lambda0")
        if "lambdas" in d:
            lambdas = parse_complex_list(d["lambdas"], "lambdas")
        elif kind != "rational":
            lambdas = parse_complex_list(surf["branch_points"], "surface.branch_points")
        else:
            raise SpecError("missing field (rational surfaces need explicit singular points)", "lambdas")
        has_p, has_r = "parameters" in d, "representation" in d
        if has_p and has_r or (need_params and not has_p and not has_r):
            raise SpecError("give exactly one of 'parameters' and 'representation'")
        params = rep = None
        if has_p:
            params = require(d, "parameters", dict)
            for key in ("p", "q", "r"):
                parse_complex_list(params.get(key, []), _join("parameters", key))
        elif has_r:
            rd = require(d, "representation", dict)
            try:
                rep = MonodromyRepresentation.from_json(rd)
            except SpecError as e:
                raise SpecError(str(e).split(": ", 1)[-1], _join("representation", e.path)) from None
            except ValidationError as e:
                raise SpecError(str(e), "representation") from None
        grid = parse_complex_list(d.get("grid", []), "grid")
        path = None
        if "malgrange_path" in d:
            mp = require(d, "malgrange_path", dict)
            path = (
                parse_complex_list(require(mp, "start", list, "malgrange_path"), "malgrange_path.start"),
                parse_complex_list(require(mp, "end", list, "malgrange_path"), "malgrange_path.end"),
            )
        fam = d.get("tau_family")
        if fam is not None and fam not in ("genus0", "genus1", "hyperelliptic", "theta-only"):
            raise SpecError(f"unknown tau family {fam!r}", "tau_family")
        return cls(surf, lambdas, lambda0, params, rep, grid, path, fam)


def build(spec: ProblemSpec):
    """Surface, kernel parameters and (for the representation form) the inverted parameter record."""
    from .kernels import KernelParams
    from .models import model_from_json
    from .monodromy import parameters_from_monodromy, project_to_permutation
    from .surface import Surface, angular_order

    order = angular_order(spec.lambdas, spec.lambda0)
    if np.any(order != np.arange(len(order))):
        raise SpecError(f"singular points must be in counterclockwise order around lambda0 (use order {order.tolist()})", "lambdas")
    try:
        model = model_from_json(spec.surface)
    except (KeyError, ValueError, TypeError) as e:
        raise SpecError(str(e), "surface") from None
    S = Surface(model, spec.lambdas, spec.lambda0)
    inverted = None
    if spec.representation is None:
        pd = spec.parameters or {}
        nX = len(S.covering.points)
        p = parse_complex_list(pd.get("p", [0.0] * S.g), "parameters.p")
        q = parse_complex_list(pd.get("q", [0.0] * S.g), "parameters.q")
        r = parse_complex_list(pd.get("r", [0.0] * nX), "parameters.r")
        try:
            params = KernelParams(p, q, r).check(S)
        except ValueError as e:
            raise SpecError(f"{e} (marked points: {nX}, genus: {S.g})", "parameters") from None
    else:
        rep = spec.representation
        if rep.M != S.M or rep.N != S.N:
            raise SpecError(f"representation has N={rep.N}, M={rep.M}; the surface has N={S.N}, M={S.M}", "representation")
        if np.max(np.abs(np.array(rep.lambdas) - S.lambdas)) > 0 or rep.lambda0 != S.lambda0:
            raise SpecError("singular points or lambda0 differ from the problem's", "representation")
        perms = project_to_permutation(rep).perms
        if tuple(map(tuple, perms)) != tuple(map(tuple, S.covering.perms)):
            raise SpecError("permutation part does not match the surface's covering", "representation")
        inverted = parameters_from_monodromy(rep, S.index_tables(), S)
        params = inverted.params
    return S, params, inverted
