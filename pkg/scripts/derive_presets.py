#!/usr/bin/env python3
"""Offline derivation of the shipped base presets from root-system data.

For a compact simple group with Cartan matrix ``A`` and a parabolic whose Levi
factor contains the simple roots ``levi``, the weight-form data are

* ``b_alpha = alpha(i Z_V)`` with ``Z_V = -(1/2pi) sum_{beta in R_m^+} i H_beta``,
  i.e. ``b_alpha = (1/2pi) sum_beta (alpha, beta)``;
* ``a^i_alpha = alpha(i Z_i)`` for a Killing-orthonormal basis ``i Z_i`` of the
  centre of the Levi factor, i.e. ``a^i_alpha = (alpha, zeta_i)`` with
  ``zeta_i`` the Gram-Schmidt orthonormalisation (Killing form) of the
  fundamental weights outside ``levi``, in increasing index order.

Here ``(.,.)`` is the Killing form transported to the dual of the Cartan
subalgebra. It is obtained from the symmetrised Cartan matrix ``G0`` by the
self-consistency ``(l, m) = sum_{gamma in R} (l, gamma)(gamma, m)``, which
fixes the overall scale of ``G0``.

Normalisation conventions (orientation of each ``Z_i`` and the choice of the
whole centre as the fibre torus directions) are a choice; they fix absolute
scales and signs of ``a`` but not the sign of ``b``.

Usage::

    python scripts/derive_presets.py [--out src/toric_soliton/presets] [--check]
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

SCHEMA = "toric-soliton/1"

# name -> (Cartan matrix, Levi simple roots (0-based), description)
REGISTRY = {
    "rank1-single-root": (
        [[2]],
        [],
        "SU(2)/U(1) = CP^1: one positive complementary root",
    ),
    "cp2-base": (
        [[2, -1], [-1, 2]],
        [],
        "SU(3)/T^2, the A2 flag manifold of C^3: three positive complementary roots",
    ),
    "cp2-projective-plane": (
        [[2, -1], [-1, 2]],
        [1],
        "SU(3)/S(U(1)xU(2)) = CP^2: two positive complementary roots",
    ),
}


def positive_roots(cartan: np.ndarray) -> list[tuple[int, ...]]:
    """Positive roots in simple-root coordinates, by root strings."""
    r = cartan.shape[0]
    simple = [tuple(int(i == j) for j in range(r)) for i in range(r)]
    roots = list(simple)
    known = set(roots)
    layer = list(simple)
    while layer:
        nxt = []
        for beta in layer:
            for i in range(r):
                # <beta, alpha_i^vee> = sum_j beta_j A_{j i}
                pairing = sum(beta[j] * cartan[j, i] for j in range(r))
                # p = how far beta - k alpha_i stays a root
                p = 0
                cur = list(beta)
                while True:
                    cur[i] -= 1
                    if tuple(cur) in known:
                        p += 1
                    else:
                        break
                q = p - pairing
                if q > 0:
                    new = list(beta)
                    new[i] += 1
                    new = tuple(new)
                    if new not in known:
                        known.add(new)
                        roots.append(new)
                        nxt.append(new)
        layer = nxt
    return sorted(roots, key=lambda b: (sum(b), b))


def killing_gram(cartan: np.ndarray, roots: list[tuple[int, ...]]) -> np.ndarray:
    """Gram matrix of the simple roots under the (dual) Killing form."""
    r = cartan.shape[0]
    # symmetriser: D A symmetric with D = diag((alpha_i, alpha_i) / 2)
    d = np.ones(r)
    for _ in range(r):
        for i in range(r):
            for j in range(r):
                if cartan[i, j] != 0 and cartan[j, i] != 0:
                    # d_i A_ij = d_j A_ji
                    d[j] = d[i] * cartan[i, j] / cartan[j, i]
    g0 = np.diag(d) @ cartan
    assert np.allclose(g0, g0.T)
    allr = np.array(roots + [tuple(-x for x in b) for b in roots], dtype=float)
    m = sum(np.outer(g0 @ g, g0 @ g) for g in allr)
    k = np.trace(m @ np.linalg.inv(g0)) / r
    g = g0 / k
    # self-consistency check
    chk = sum(np.outer(g @ v, g @ v) for v in allr)
    assert np.allclose(chk, g, rtol=1e-13, atol=1e-15)
    return g


def derive(cartan, levi) -> dict:
    A = np.array(cartan, dtype=float)
    r = A.shape[0]
    roots = positive_roots(A)
    G = killing_gram(A, roots)
    outside = [i for i in range(r) if i not in levi]
    rm = [b for b in roots if any(b[i] for i in outside)]
    # fundamental weights in simple-root coordinates: (omega_j, alpha_i^vee) = delta_ij
    # alpha_i^vee = 2 alpha_i / (alpha_i, alpha_i)  =>  omega = (G diag(2/(a,a)))^{-1} columns
    coroot_scale = np.diag(2.0 / np.diag(G))
    fund = np.linalg.inv(G @ coroot_scale).T  # row j: omega_j in root coordinates
    basis = []
    for j in outside:
        v = fund[j].copy()
        for u in basis:
            v -= (u @ G @ v) * u
        v /= math.sqrt(v @ G @ v)
        basis.append(v)
    Z = np.array(basis)  # (m, r)
    total = np.sum(np.array(rm, dtype=float), axis=0)
    a = [[float(np.array(b, dtype=float) @ G @ z) for z in Z] for b in rm]
    b = [float(np.array(beta, dtype=float) @ G @ total) / (2 * math.pi) for beta in rm]
    return {
        "dim": len(outside),
        "roots": [list(x) for x in rm],
        "a": a,
        "b": b,
        "killing_gram": G.tolist(),
    }


def build(name: str) -> dict:
    cartan, levi, desc = REGISTRY[name]
    data = derive(cartan, levi)
    return {
        "schema": SCHEMA,
        "name": name,
        "dim": data["dim"],
        "forms": {"a": data["a"], "b": data["b"]},
        "provenance": {
            "description": desc,
            "cartan_matrix": cartan,
            "levi_simple_roots": levi,
            "complementary_positive_roots": data["roots"],
            "killing_gram_simple_roots": data["killing_gram"],
            "b_alpha": "(1/2pi) * sum_{beta in R_m^+} (alpha, beta)",
            "a_alpha": "(alpha, zeta_i), zeta_i Killing-orthonormalised fundamental weights off the Levi",
            "generator": "scripts/derive_presets.py",
        },
    }


def point_preset() -> dict:
    return {
        "schema": SCHEMA,
        "name": "point",
        "dim": 1,
        "forms": {"a": [], "b": []},
        "provenance": {"description": "base reduced to a point: empty product, weight 1"},
    }


def all_presets() -> dict[str, dict]:
    out = {"point": point_preset()}
    for name in REGISTRY:
        out[name] = build(name)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    here = Path(__file__).resolve().parent.parent
    ap.add_argument("--out", type=Path, default=here / "src" / "toric_soliton" / "presets")
    ap.add_argument("--check", action="store_true", help="compare with files on disk instead of writing")
    args = ap.parse_args(argv)
    status = 0
    for name, payload in all_presets().items():
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        path = args.out / f"{name}.json"
        if args.check:
            if not path.exists() or path.read_text(encoding="utf-8") != text:
                print(f"stale: {path}")
                status = 1
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
            print(f"wrote {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
