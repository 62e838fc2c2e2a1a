import math

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from toric_soliton.basedata import make_forms
from toric_soliton.polytope import validate_polytope


def interval(lo, hi):
    return validate_polytope([[lo], [hi]], [([1.0], -lo), ([-1.0], hi)])


def box(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    m = lo.size
    corners = np.array(np.meshgrid(*[[a, b] for a, b in zip(lo, hi)], indexing="ij")).reshape(m, -1).T
    facets = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        facets += [(e.copy(), -lo[i]), (-e, hi[i])]
    return validate_polytope(corners, facets)


def hull_polytope(points):
    points = np.asarray(points, float)
    if points.shape[1] == 1:
        return interval(points.min(), points.max())
    hull = ConvexHull(points)
    verts = points[hull.vertices]
    # merge coplanar triangles of the hull into distinct facets
    facets = {}
    for eq in hull.equations:
        n, off = -eq[:-1], -eq[-1]
        key = tuple(np.round(np.append(n, off), 9))
        facets[key] = (n, off)
    return validate_polytope(verts, list(facets.values()))


def random_instance(rng, m=None, max_forms=2):
    """Random polytope with the origin inside and positive random forms."""
    m = int(rng.integers(1, 4)) if m is None else m
    if m == 1:
        P = interval(-rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0))
    else:
        k = m + 1 + int(rng.integers(m, 3 * m))
        while True:
            pts = rng.normal(size=(k, m))
            pts *= rng.uniform(0.5, 1.5, size=(k, 1)) / np.linalg.norm(pts, axis=1, keepdims=True)
            pts += rng.uniform(-0.2, 0.2, size=m)
            P = hull_polytope(pts)
            if P.contains_origin_interior() and P.dim == m:
                break
    q = int(rng.integers(0, max_forms + 1))
    a, b = [], []
    for _ in range(q):
        c = rng.normal(size=m)
        margin = float((P.vertices @ c).min())
        # raw data: a = -4 pi c, b chosen so the form is >= 0.3 on the polytope
        a.append(list(-4 * math.pi * c))
        b.append(-margin + rng.uniform(0.3, 2.0))
    return P, make_forms(a, b, m)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
