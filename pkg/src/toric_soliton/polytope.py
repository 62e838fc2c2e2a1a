"""Moment polytopes and weighted moment integrals over them.

Points live in moment coordinates ``x``. A polytope is stored in both vertex
and facet form; facets are ``{x : normal @ x + offset >= 0}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .cubature import grundmann_moeller, refine_simplices, simplex_volumes
from .errors import (
    Degenerate,
    DimensionMismatch,
    EmptyBox,
    Inconsistent,
    NonConvergent,
    NonPositiveWeight,
    PolytopeError,
    Unbounded,
)

FACET_TOL = 1e-9
VOLUME_RTOL = 1e-9
# Grundmann-Moeller rules above this degree lose ~1e-12 exactness in double
# precision (alternating weights); escalation continues by refinement instead.
MAX_STABLE_DEGREE = 21


@dataclass(frozen=True)
class Polytope:
    vertices: np.ndarray  # (nv, m)
    normals: np.ndarray  # (nf, m)
    offsets: np.ndarray  # (nf,)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def diameter(self) -> float:
        diffs = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((diffs**2).sum(-1)).max())

    @property
    def radius(self) -> float:
        """Largest sup-norm of a vertex; bounds ``|x_k|`` on the polytope."""
        return float(np.abs(self.vertices).max())

    @property
    def facets(self) -> list[tuple[np.ndarray, float]]:
        return [(n, float(b)) for n, b in zip(self.normals, self.offsets)]

    def facet_slack(self, x: np.ndarray) -> np.ndarray:
        """Signed distance of points ``x`` (..., m) to each facet hyperplane."""
        x = np.asarray(x, dtype=float)
        norms = np.linalg.norm(self.normals, axis=1)
        return (x @ self.normals.T + self.offsets) / norms

    def contains(self, x, strict: bool = False, tol: float = 0.0) -> np.ndarray:
        s = self.facet_slack(x)
        return np.all(s > tol, axis=-1) if strict else np.all(s >= -tol, axis=-1)

    def contains_origin_interior(self) -> bool:
        return bool(self.contains(np.zeros(self.dim), strict=True, tol=FACET_TOL * self.diameter))

    def translate(self, v) -> "Polytope":
        """The polytope ``P + v`` (facet offsets adjusted accordingly)."""
        v = np.asarray(v, dtype=float)
        return Polytope(self.vertices + v, self.normals.copy(), self.offsets - self.normals @ v)

    def volume(self) -> float:
        if self.dim == 1:
            return float(np.ptp(self.vertices[:, 0]))
        return float(ConvexHull(self.vertices).volume)


@dataclass(frozen=True)
class Simplex:
    vertices: np.ndarray  # (m + 1, m)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] + 1:
            raise Degenerate(f"a simplex in dimension m needs m + 1 vertices, got shape {v.shape}")
        edges = v[1:] - v[0]
        scale = max(float(np.abs(edges).max()), 1e-300)
        if abs(np.linalg.det(edges)) <= 1e-12 * scale ** v.shape[1]:
            raise Degenerate("simplex is degenerate")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def volume(self) -> float:
        return float(simplex_volumes(self.vertices[None])[0])


@dataclass(frozen=True)
class MomentTensor:
    """Zeroth, first and second moments of a weight over a polytope.

    ``log_i0`` is ``log(I0)`` computed without overflow, and ``degree`` /
    ``level`` record the cubature rung that converged.
    """

    I0: float
    I1: np.ndarray
    I2: np.ndarray
    log_i0: float = float("nan")
    degree: int = 0
    level: int = 0

    @property
    def mean(self) -> np.ndarray:
        return self.I1 / self.I0

    @property
    def covariance(self) -> np.ndarray:
        g = self.mean
        return self.I2 / self.I0 - np.outer(g, g)


def _as_points(raw, name: str) -> np.ndarray:
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise PolytopeError(f"{name}: not a rectangular numeric array") from exc
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise PolytopeError(f"{name}: expected a list of points")
    if not np.all(np.isfinite(arr)):
        raise PolytopeError(f"{name}: non-finite entries")
    return arr


def _h_volume_and_bounded(normals: np.ndarray, offsets: np.ndarray) -> tuple[float, float]:
    """Volume and Chebyshev radius of ``{x : normals @ x + offsets >= 0}``."""
    m = normals.shape[1]
    A_ub = -normals
    b_ub = offsets
    for i in range(m):
        for sign in (1.0, -1.0):
            c = np.zeros(m)
            c[i] = -sign
            res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * m, method="highs")
            if res.status == 3:
                raise Unbounded("facet intersection is unbounded")
            if res.status == 2:
                raise Degenerate("facet intersection is empty")
    norms = np.linalg.norm(normals, axis=1)
    # Chebyshev centre: max r s.t. n.x + b >= r |n|
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A = np.hstack([-normals, norms[:, None]])
    res = linprog(c, A_ub=A, b_ub=offsets, bounds=[(None, None)] * m + [(0, None)], method="highs")
    if res.status != 0 or res.x[-1] <= 1e-12:
        raise Degenerate("facet intersection has empty interior")
    centre, r = res.x[:m], res.x[-1]
    if m == 1:
        lo = max(-b / n[0] for n, b in zip(normals, offsets) if n[0] > 0)
        hi = min(-b / n[0] for n, b in zip(normals, offsets) if n[0] < 0)
        return hi - lo, r
    hs = HalfspaceIntersection(np.hstack([-normals, -offsets[:, None]]), centre)
    return ConvexHull(hs.intersections).volume, r


def validate_polytope(vertices, facets) -> Polytope:
    """Build a :class:`Polytope` after checking vertex/facet consistency.

    ``facets`` is a sequence of ``(normal, offset)`` pairs. Raises
    :class:`Unbounded`, :class:`Degenerate` or :class:`Inconsistent`.
    """
    verts = _as_points(vertices, "vertices")
    m = verts.shape[1]
    if m < 1:
        raise PolytopeError("dimension must be >= 1")
    if verts.shape[0] < m + 1:
        raise Degenerate(f"need at least {m + 1} vertices in dimension {m}, got {verts.shape[0]}")
    try:
        normals = _as_points([f[0] for f in facets], "facet normals")
        offsets = np.array([float(f[1]) for f in facets])
    except (TypeError, IndexError) as exc:
        raise PolytopeError("facets must be (normal, offset) pairs") from exc
    if normals.shape[1] != m:
        raise PolytopeError(f"facet normals have length {normals.shape[1]}, vertices {m}")
    if not np.all(np.isfinite(offsets)):
        raise PolytopeError("facet offsets: non-finite entries")
    if np.any(np.linalg.norm(normals, axis=1) == 0):
        raise Degenerate("zero facet normal")

    # affine rank of the vertex set
    rel = verts - verts.mean(axis=0)
    sv = np.linalg.svd(rel, compute_uv=False)
    if sv.min(initial=np.inf) <= 1e-12 * max(sv.max(), 1.0) or len(sv) < m:
        raise Degenerate("vertices do not span a full-dimensional polytope")

    h_vol, _ = _h_volume_and_bounded(normals, offsets)
    P = Polytope(verts, normals, offsets)
    tol = FACET_TOL * max(P.diameter, 1.0)
    slack = P.facet_slack(verts)
    bad = np.argwhere(slack < -tol)
    if bad.size:
        v, f = bad[0]
        raise Inconsistent(f"vertex {v} violates facet {f} by {-slack[v, f]:.3g}")
    v_vol = P.volume()
    if abs(v_vol - h_vol) > VOLUME_RTOL * max(h_vol, 1e-300):
        raise Inconsistent(f"vertex hull volume {v_vol:.12g} != facet intersection volume {h_vol:.12g}")
    for arr in (verts, normals, offsets):
        arr.setflags(write=False)
    return P


def _affine_rank(pts: np.ndarray) -> int:
    if len(pts) < 2:
        return 0
    rel = pts[1:] - pts[0]
    sv = np.linalg.svd(rel, compute_uv=False)
    scale = max(np.abs(rel).max(), 1e-300)
    return int((sv > 1e-9 * scale).sum())


def _fan(points: np.ndarray, ids: tuple[int, ...], on_facet: np.ndarray, k: int) -> list[np.ndarray]:
    """Triangulate the ``k``-face spanned by ``points[ids]``.

    ``on_facet[f, v]`` tells whether vertex ``v`` lies on facet ``f``.
    """
    pts = points[list(ids)]
    if k == 1:
        direction = pts[-1] - pts[0]
        t = (pts - pts[0]) @ direction
        return [np.array([pts[np.argmin(t)], pts[np.argmax(t)]])]
    centre = pts.mean(axis=0)
    seen = set()
    out = []
    for f in range(on_facet.shape[0]):
        sub = tuple(v for v in ids if on_facet[f, v])
        if len(sub) < k or sub in seen or len(sub) == len(ids):
            continue
        if _affine_rank(points[list(sub)]) != k - 1:
            continue
        seen.add(sub)
        for simp in _fan(points, sub, on_facet, k - 1):
            out.append(np.vstack([simp, centre]))
    return out


def triangulate(P: Polytope) -> list[Simplex]:
    """Fan triangulation from the vertex centroid over recursively fanned facets.

    Vertices are processed in lexicographic order, so the result does not
    depend on the order in which they were supplied.
    """
    order = np.lexsort(P.vertices.T[::-1])
    pts = P.vertices[order]
    if P.dim == 1:
        return [Simplex(np.array([[pts[0, 0]], [pts[-1, 0]]]))]
    tol = FACET_TOL * max(P.diameter, 1.0)
    on_facet = np.abs(P.facet_slack(pts)).T <= tol  # (nf, nv)
    # facet order: by their (sorted) vertex index tuples
    facet_keys = sorted(range(on_facet.shape[0]), key=lambda f: tuple(np.flatnonzero(on_facet[f])))
    on_facet = on_facet[facet_keys]
    simplices = _fan(pts, tuple(range(len(pts))), on_facet, P.dim)
    return [Simplex(s) for s in simplices]


def _fsum_columns(contrib: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(col) for col in contrib.reshape(contrib.shape[0], -1).T])


def _moment_rule(verts: np.ndarray, forms, lam: np.ndarray, shift: float, degree: int):
    """One cubature evaluation. Returns (I0, I1, I2, |I0|) scaled by ``exp(-shift)``."""
    nsimp, _, m = verts.shape
    bary, w = grundmann_moeller(degree, m)
    x = np.einsum("pj,sjd->spd", bary, verts)  # (nsimp, npts, m)
    weight = np.exp(x @ lam - shift)
    if forms is not None and len(forms):
        weight = weight * forms.evaluate(x)
    vol = simplex_volumes(verts)
    wv = weight * w  # (nsimp, npts)
    c0 = wv.sum(axis=1)
    c1 = np.einsum("sp,spd->sd", wv, x)
    c2 = np.einsum("sp,spd,spe->sde", wv, x, x)
    cabs = np.abs(wv).sum(axis=1)
    c0, c1, c2, cabs = (vol.reshape((-1,) + (1,) * (a.ndim - 1)) * a for a in (c0, c1, c2, cabs))
    I0 = math.fsum(c0)
    I1 = _fsum_columns(c1)
    I2 = _fsum_columns(c2).reshape(m, m)
    I2 = 0.5 * (I2 + I2.T)
    return I0, I1, I2, math.fsum(cabs)


def weighted_moments(
    P: Polytope,
    forms=None,
    lam=None,
    degree: int = 5,
    rel_tol: float = 1e-12,
    degree_cap: int = 25,
    max_refine: int = 4,
    require_positive: bool = True,
) -> MomentTensor:
    """Moments ``int_P x^{(k)} exp(lam . x) prod_a L_a(x) dx`` for ``k = 0, 1, 2``.

    The rule degree is escalated by two from ``degree`` up to
    ``min(degree_cap, MAX_STABLE_DEGREE)``; past that the triangulation is
    refined edgewise and the ladder restarts. Two successive rungs must agree
    entrywise within ``rel_tol`` relative to the natural scale of each entry
    (``|I0|``, ``R |I0|``, ``R^2 |I0|`` for ``R`` the polytope radius).

    Raises
    ------
    NonPositiveWeight
        If ``require_positive`` and some form is not positive on ``P``.
    NonConvergent
        If the ladder is exhausted.
    """
    m = P.dim
    lam = np.zeros(m) if lam is None else np.asarray(lam, dtype=float).reshape(m)
    if forms is not None and len(forms):
        if forms.dim != m:
            raise DimensionMismatch(f"forms have dimension {forms.dim}, polytope {m}")
        if require_positive:
            vals = forms.affine_values(P.vertices)
            if vals.min() <= 0:
                raise NonPositiveWeight(f"weight form minimum over vertices is {vals.min():.6g}")
    if degree % 2 == 0:
        degree += 1
    top = max(min(degree_cap, MAX_STABLE_DEGREE), degree)
    shift = float((P.vertices @ lam).max())
    R = max(P.radius, 1e-300)
    base = np.array([s.vertices for s in triangulate(P)])

    prev = None
    for level in range(max_refine + 1):
        verts = refine_simplices(base, level) if level else base
        for deg in range(degree, top + 1, 2):
            cur = _moment_rule(verts, forms, lam, shift, deg)
            if prev is not None:
                scale = max(cur[3], prev[3])
                ok = (
                    abs(cur[0] - prev[0]) <= rel_tol * scale
                    and np.all(np.abs(cur[1] - prev[1]) <= rel_tol * (np.abs(cur[1]) + R * scale))
                    and np.all(np.abs(cur[2] - prev[2]) <= rel_tol * (np.abs(cur[2]) + R * R * scale))
                )
                if ok:
                    factor = math.exp(shift) if shift < 700 else math.inf
                    I0, I1, I2, _ = cur
                    log_i0 = shift + math.log(I0) if I0 > 0 else float("nan")
                    return MomentTensor(I0 * factor, I1 * factor, I2 * factor, log_i0, deg, level)
            prev = cur
    raise NonConvergent(
        f"moments did not converge to rel_tol={rel_tol:g} (degree <= {top}, refinement <= {max_refine})"
    )


def mc_oracle(
    P: Polytope,
    integrand: Callable[[np.ndarray], np.ndarray],
    n: int,
    seed: int,
    chunk: int = 1_000_000,
):
    """Monte-Carlo estimate of ``int_P integrand`` by rejection from the bounding box.

    ``integrand`` maps an ``(k, m)`` array of points to shape ``(k,)`` or
    ``(k, q)``. Returns ``(estimate, stderr)`` with matching shape. The stream
    is a single ``numpy.random.default_rng(seed)`` consumed in fixed chunks.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lo = P.vertices.min(axis=0)
    hi = P.vertices.max(axis=0)
    width = hi - lo
    if np.any(width <= 0):
        raise EmptyBox("bounding box is degenerate")
    box_vol = float(np.prod(width))
    rng = np.random.default_rng(seed)
    total = None
    total_sq = None
    done = 0
    while done < n:
        k = min(chunk, n - done)
        x = lo + rng.random((k, P.dim)) * width
        inside = np.all(x @ P.normals.T + P.offsets >= 0, axis=1)
        f = np.asarray(integrand(x), dtype=float)
        f = np.where(inside.reshape((-1,) + (1,) * (f.ndim - 1)), f, 0.0)
        s, s2 = f.sum(axis=0), (f * f).sum(axis=0)
        total = s if total is None else total + s
        total_sq = s2 if total_sq is None else total_sq + s2
        done += k
    mean = total / n
    if n > 1:
        var = np.maximum(total_sq / n - mean * mean, 0.0) * n / (n - 1)
    else:
        var = np.zeros_like(mean)
    return box_vol * mean, box_vol * np.sqrt(var / n)
