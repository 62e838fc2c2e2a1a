"""Affine weight forms contributed by the flag-manifold base, and the Fano test.

Forms are stored after the change to moment coordinates: for root data
``(a, b)`` the form is ``L(x) = c . x + d`` with ``c = -a / (4 pi)`` and
``d = b``. An empty set is the constant weight 1 (the base is a point).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionMismatch, InvalidForms, UnknownPreset

FOUR_PI = 4.0 * math.pi
PRESET_SCHEMA = "toric-soliton/1"


@dataclass(frozen=True)
class WeightFormSet:
    dim: int
    c: np.ndarray  # (q, m)
    d: np.ndarray  # (q,)

    def __len__(self) -> int:
        return self.d.shape[0]

    def affine_values(self, x) -> np.ndarray:
        """``L_a(x)`` for every form; shape ``x.shape[:-1] + (q,)``."""
        x = np.asarray(x, dtype=float)
        return x @ self.c.T + self.d

    def evaluate(self, x) -> np.ndarray:
        """The product weight ``P(x)``; shape ``x.shape[:-1]``."""
        x = np.asarray(x, dtype=float)
        if not len(self):
            return np.ones(x.shape[:-1])
        return np.prod(self.affine_values(x), axis=-1)

    def log_gradient(self, x) -> np.ndarray:
        """``grad log P(x)``; shape ``x.shape``."""
        x = np.asarray(x, dtype=float)
        if not len(self):
            return np.zeros_like(x)
        return (self.c / self.affine_values(x)[..., None]).sum(axis=-2)

    def translate(self, v) -> "WeightFormSet":
        """Forms ``x -> L(x - v)``, matching :meth:`Polytope.translate`."""
        v = np.asarray(v, dtype=float)
        return WeightFormSet(self.dim, self.c.copy(), self.d - self.c @ v)

    def permuted(self, order) -> "WeightFormSet":
        order = list(order)
        return WeightFormSet(self.dim, self.c[order], self.d[order])

    @property
    def raw_a(self) -> np.ndarray:
        return -FOUR_PI * self.c

    @property
    def raw_b(self) -> np.ndarray:
        return self.d.copy()


@dataclass(frozen=True)
class FanoReport:
    is_fano: bool
    margin: float
    violations: list[tuple[int, int]] = field(default_factory=list)
    p_min: float | None = None
    p_max: float | None = None

    @property
    def weight_factor_bounds(self) -> tuple[float, float] | None:
        """Bounds of ``1 / P`` over the polytope, when the weight is positive."""
        if self.p_min is None or self.p_max is None:
            return None
        return 1.0 / self.p_max, 1.0 / self.p_min


def make_forms(raw_a, raw_b, dim: int | None = None) -> WeightFormSet:
    """Convert root data ``a_alpha`` (vectors) and ``b_alpha`` (reals) into forms.

    ``dim`` is required when the lists are empty.
    """
    raw_a = list(raw_a)
    raw_b = list(raw_b)
    if len(raw_a) != len(raw_b):
        raise DimensionMismatch(f"{len(raw_a)} coefficient vectors but {len(raw_b)} offsets")
    if not raw_a:
        if dim is None or dim < 1:
            raise DimensionMismatch("an empty form set needs an explicit dimension >= 1")
        return WeightFormSet(dim, np.zeros((0, dim)), np.zeros(0))
    try:
        a = np.array([np.atleast_1d(np.asarray(v, dtype=float)) for v in raw_a])
    except ValueError as exc:
        raise DimensionMismatch("coefficient vectors have differing lengths") from exc
    if a.ndim != 2:
        raise DimensionMismatch("coefficient vectors have differing lengths")
    m = a.shape[1]
    if dim is not None and dim != m:
        raise DimensionMismatch(f"coefficient vectors have length {m}, expected {dim}")
    b = np.asarray(raw_b, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidForms("non-finite form data")
    c = -a / FOUR_PI
    const = np.all(c == 0, axis=1)
    if np.any(const & (b <= 0)):
        k = int(np.flatnonzero(const & (b <= 0))[0])
        raise InvalidForms(f"form {k} is the non-positive constant {b[k]:g}")
    c.setflags(write=False)
    b.setflags(write=False)
    return WeightFormSet(m, c, b)


def _max_log_weight(P, W: WeightFormSet) -> float:
    """``max log P`` over the polytope (concave maximization, started at the centroid)."""
    x0 = P.vertices.mean(axis=0)
    cons = [{"type": "ineq", "fun": lambda x: x @ P.normals.T + P.offsets, "jac": lambda x: P.normals}]

    def obj(x):
        return -float(np.log(W.affine_values(x)).sum())

    def jac(x):
        return -(W.c / W.affine_values(x)[:, None]).sum(axis=0)

    res = minimize(obj, x0, jac=jac, constraints=cons, method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    best = -res.fun if res.success and np.all(W.affine_values(res.x) > 0) else -np.inf
    # vertices and centroid bound the maximum from below
    cand = np.log(W.affine_values(np.vstack([P.vertices, x0]))).sum(axis=1).max()
    return float(max(best, cand))


def fano_check(P, W: WeightFormSet) -> FanoReport:
    """Positivity of every form on the polytope.

    Affine forms attain their minimum at a vertex, so the margin is the
    minimum of ``L_a(v)`` over forms ``a`` and vertices ``v``. For Fano
    input the report also carries the extreme values of the product weight.
    """
    if W.dim != P.dim:
        raise DimensionMismatch(f"forms have dimension {W.dim}, polytope {P.dim}")
    if not len(W):
        return FanoReport(True, math.inf, [], 1.0, 1.0)
    vals = W.affine_values(P.vertices)  # (nv, q)
    margin = float(vals.min())
    violations = sorted((int(a), int(v)) for v, a in np.argwhere(vals <= 0))
    if margin <= 0:
        return FanoReport(False, margin, violations)
    # product of positive affine forms is log-concave: minimum at a vertex
    p_min = float(np.prod(vals, axis=1).min())
    p_max = float(math.exp(_max_log_weight(P, W)))
    return FanoReport(True, margin, [], p_min, p_max)


def available_presets() -> list[str]:
    root = resources.files("toric_soliton") / "presets"
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def load_base_preset(name: str, dim: int | None = None) -> WeightFormSet:
    """Weight forms of a registered base, from the shipped preset files.

    An empty preset (point base) takes the dimension ``dim`` when given.
    """
    root = resources.files("toric_soliton") / "presets"
    path = root / f"{name}.json"
    if not path.is_file():
        raise UnknownPreset(f"unknown preset {name!r}; available: {', '.join(available_presets())}")
    data = json.loads(path.read_text(encoding="utf-8"))
    if data.get("schema") != PRESET_SCHEMA:
        raise InvalidForms(f"preset {name!r} has schema {data.get('schema')!r}")
    forms = data["forms"]
    if not forms["a"] and dim is not None:
        return make_forms([], [], dim)
    W = make_forms(forms["a"], forms["b"], data["dim"])
    if len(W) and not np.all(W.d > 0):
        raise InvalidForms(f"preset {name!r} has non-positive offsets b_alpha")
    return W
