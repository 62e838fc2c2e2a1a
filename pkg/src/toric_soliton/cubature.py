"""Grundmann-Moeller cubature on simplices and edgewise simplex refinement.

Rules are returned in barycentric form: ``bary`` has shape ``(npts, m + 1)``
and ``weights`` sum to one, so the integral over a simplex ``S`` is
``vol(S) * sum(w * f(bary @ vertices))``.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np


def _compositions(total: int, parts: int):
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield tuple(out)


@lru_cache(maxsize=None)
def grundmann_moeller(degree: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Grundmann-Moeller rule exact for total degree ``degree`` on a ``dim``-simplex.

    ``degree`` must be odd. Weights are accumulated as exact fractions before
    conversion, so the only rounding is the final cast to float.

    Returns
    -------
    bary : ndarray, shape (npts, dim + 1)
    weights : ndarray, shape (npts,)
        Normalized to sum to 1 (multiply by the simplex volume).
    """
    if degree < 1 or degree % 2 == 0:
        raise ValueError(f"degree must be a positive odd integer, got {degree}")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    s = (degree - 1) // 2
    d = degree
    n = dim
    acc: dict[tuple[int, ...], Fraction] = {}
    for i in range(s + 1):
        den = d + n - 2 * i
        # n! times the classical weight, so that the weights sum to one
        w = Fraction((-1) ** i * den**d * math.factorial(n),
                     4**s * math.factorial(i) * math.factorial(d + n - i))
        for beta in _compositions(s - i, n + 1):
            num = tuple(2 * b + 1 for b in beta)
            g = math.gcd(den, *num)
            key = tuple(k // g for k in num) + (den // g,)
            acc[key] = acc.get(key, Fraction(0)) + w
    keys = sorted(acc)
    bary = np.array([[k / key[-1] for k in key[:-1]] for key in keys])
    weights = np.array([float(acc[k]) for k in keys])
    bary.setflags(write=False)
    weights.setflags(write=False)
    return bary, weights


@lru_cache(maxsize=None)
def _freudenthal_children(dim: int) -> np.ndarray:
    """Children of the Kuhn simplex under one edgewise bisection.

    Returned as indices into the barycentric lattice: an array of shape
    ``(2**dim, dim + 1, dim + 1)`` whose entry ``[c, j]`` is the barycentric
    coordinate row of vertex ``j`` of child ``c``.
    """
    # Kuhn simplex K = {1 >= y_1 >= ... >= y_m >= 0}; vertices w_k = e_1 + ... + e_k.
    # Map y -> barycentric: lambda_0 = 1 - y_1, lambda_k = y_k - y_{k+1}, lambda_m = y_m.
    def to_bary(y):
        lam = np.empty(dim + 1)
        lam[0] = 1.0 - y[0]
        for k in range(1, dim):
            lam[k] = y[k - 1] - y[k]
        lam[dim] = y[dim - 1]
        return lam

    children = []
    for corner in itertools.product((0, 1), repeat=dim):
        for perm in itertools.permutations(range(dim)):
            verts = [np.array(corner, dtype=float)]
            for p in perm:
                v = verts[-1].copy()
                v[p] += 1.0
                verts.append(v)
            inside = all(
                v[0] <= 2 and v[-1] >= 0 and all(v[k] >= v[k + 1] for k in range(dim - 1))
                for v in verts
            )
            if inside:
                children.append([to_bary(v / 2.0) for v in verts])
    out = np.array(children)
    assert out.shape[0] == 2**dim
    return out


def refine_simplices(vertices: np.ndarray, levels: int = 1) -> np.ndarray:
    """Split each simplex into ``2**m`` children, ``levels`` times.

    ``vertices`` has shape ``(nsimp, m + 1, m)``. Children have equal volume
    and come in a fixed order, so refinement is deterministic.
    """
    verts = np.asarray(vertices, dtype=float)
    dim = verts.shape[2]
    table = _freudenthal_children(dim)
    for _ in range(levels):
        # (nsimp, nchild, m+1, m)
        verts = np.einsum("cjk,skd->scjd", table, verts).reshape(-1, dim + 1, dim)
    return verts


def simplex_volumes(vertices: np.ndarray) -> np.ndarray:
    verts = np.asarray(vertices, dtype=float)
    dim = verts.shape[2]
    edges = verts[:, 1:, :] - verts[:, :1, :]
    return np.abs(np.linalg.det(edges)) / math.factorial(dim)
