"""Batch front end: problem files in, JSON reports and profile CSVs out.

Problem files are YAML (``.yaml``/``.yml``) or JSON::

    name: asymmetric-interval
    dim: 1
    polytope:
      vertices: [[-1], [2]]
      facets:
        - {normal: [1], offset: 1}
        - {normal: [-1], offset: 2}
    forms:
      preset: point          # or raw root data: a: [[...], ...], b: [...]
    options:
      tol: 1.0e-10
      n_grid: 2048

Exit codes: 0 success, 2 non-Fano verdict, 1 any error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from .basedata import PRESET_SCHEMA, fano_check, load_base_preset, make_forms
from .errors import DimensionMismatch, IoError, ParseError, SchemaError, ToricSolitonError
from .metric1d import boundary_slope_check, ma_residual_1d, solve_profile
from .polytope import mc_oracle, validate_polytope, weighted_moments
from .soliton import futaki_vector, normalization_constant, solve_soliton_vector

log = logging.getLogger(__name__)

SCHEMA = PRESET_SCHEMA
EXIT_OK, EXIT_ERROR, EXIT_NOT_FANO = 0, 1, 2
VERDICT_NOT_FANO = "no Kähler-Ricci soliton (not Fano)"
VERDICT_FANO = "Fano: Kähler-Ricci soliton exists, soliton data computed"
KE_NOTE = "Kähler-Einstein case"
PROFILE_UNSUPPORTED = "profile: unsupported for m>1"

DEFAULT_OPTIONS = {
    "tol": 1e-10,
    "n_grid": 2048,
    "quad_degree_cap": 25,
    "seed": 0,
    "oracle": False,
    "oracle_samples": 1_000_000,
}
_TOP_KEYS = {"name", "dim", "polytope", "forms", "options"}


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    vertices: tuple[tuple[float, ...], ...]
    facets: tuple[tuple[tuple[float, ...], float], ...]
    preset: str | None
    form_a: tuple[tuple[float, ...], ...] | None
    form_b: tuple[float, ...] | None
    options: dict

    def canonical(self) -> dict:
        """Plain tree with sorted keys and every real stored as a float."""
        forms: dict[str, Any]
        if self.preset is not None:
            forms = {"preset": self.preset}
        else:
            forms = {"a": [list(v) for v in self.form_a], "b": list(self.form_b)}
        return {
            "name": self.name,
            "dim": self.dim,
            "polytope": {
                "vertices": [list(v) for v in self.vertices],
                "facets": [{"normal": list(n), "offset": o} for n, o in self.facets],
            },
            "forms": forms,
            "options": dict(sorted(self.options.items())),
        }

    def canonical_text(self) -> str:
        return canonical_json(self.canonical())

    @property
    def input_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()

    def with_options(self, **overrides) -> "ProblemSpec":
        opts = dict(self.options)
        opts.update({k: v for k, v in overrides.items() if v is not None})
        errors: list[str] = []
        opts = _check_options(opts, errors)
        if errors:
            raise SchemaError(errors)
        return ProblemSpec(self.name, self.dim, self.vertices, self.facets, self.preset,
                           self.form_a, self.form_b, opts)


def canonical_json(tree) -> str:
    return json.dumps(tree, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


# ---------------------------------------------------------------- parsing


def _load_tree(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from exc
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{mark.line + 1}:{mark.column + 1}" if mark is not None else "?"
        problem = getattr(exc, "problem", None) or str(exc)
        raise ParseError(f"{path}:{where}: {problem}") from exc


def _real(value, field: str, errors: list[str]) -> float | None:
    # YAML 1.1 reads 1e-10 (no dot) as a string; accept numeric strings
    if isinstance(value, bool):
        errors.append(f"{field}: expected a number, got a boolean")
        return None
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            errors.append(f"{field}: expected a number, got {value!r}")
            return None
    if not isinstance(value, (int, float)):
        errors.append(f"{field}: expected a number, got {type(value).__name__}")
        return None
    value = float(value)
    if not math.isfinite(value):
        errors.append(f"{field}: must be finite, got {value}")
        return None
    return value


def _vector(value, field: str, length: int | None, errors: list[str]) -> tuple[float, ...] | None:
    if not isinstance(value, list):
        errors.append(f"{field}: expected a list of numbers")
        return None
    out = [_real(v, f"{field}[{i}]", errors) for i, v in enumerate(value)]
    if length is not None and len(out) != length:
        errors.append(f"{field}: expected length {length}, got {len(out)}")
        return None
    if any(v is None for v in out):
        return None
    return tuple(out)


def _check_options(raw, errors: list[str]) -> dict:
    opts = dict(DEFAULT_OPTIONS)
    if raw is None:
        return opts
    if not isinstance(raw, dict):
        errors.append("options: expected a mapping")
        return opts
    for key in sorted(set(raw) - set(DEFAULT_OPTIONS)):
        errors.append(f"options.{key}: unknown option")
    if "tol" in raw:
        v = _real(raw["tol"], "options.tol", errors)
        if v is not None and v <= 0:
            errors.append("options.tol: must be > 0")
        elif v is not None:
            opts["tol"] = v
    for key, low in (("n_grid", 4), ("quad_degree_cap", 1), ("seed", 0), ("oracle_samples", 1)):
        if key in raw:
            v = raw[key]
            if isinstance(v, bool) or not isinstance(v, int):
                errors.append(f"options.{key}: expected an integer")
            elif v < low:
                errors.append(f"options.{key}: must be >= {low}")
            else:
                opts[key] = int(v)
    if "oracle" in raw:
        if not isinstance(raw["oracle"], bool):
            errors.append("options.oracle: expected true or false")
        else:
            opts["oracle"] = raw["oracle"]
    return opts


def spec_from_tree(tree, source: str = "<tree>") -> ProblemSpec:
    """Validate a parsed problem tree, collecting every violation."""
    errors: list[str] = []
    if not isinstance(tree, dict):
        raise SchemaError([f"{source}: top level must be a mapping"])
    for key in sorted(set(tree) - _TOP_KEYS):
        errors.append(f"{key}: unknown field")

    name = tree.get("name")
    if not isinstance(name, str) or not name.strip():
        errors.append("name: required non-empty string")
        name = ""
    dim = tree.get("dim")
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        errors.append("dim: required integer >= 1")
        dim = None

    vertices: list = []
    facets: list = []
    poly = tree.get("polytope")
    if not isinstance(poly, dict):
        errors.append("polytope: required mapping with vertices and facets")
    else:
        for key in sorted(set(poly) - {"vertices", "facets"}):
            errors.append(f"polytope.{key}: unknown field")
        raw_v = poly.get("vertices")
        if not isinstance(raw_v, list) or not raw_v:
            errors.append("polytope.vertices: required non-empty list")
        else:
            for i, v in enumerate(raw_v):
                vertices.append(_vector(v, f"polytope.vertices[{i}]", dim, errors))
        raw_f = poly.get("facets")
        if not isinstance(raw_f, list) or not raw_f:
            errors.append("polytope.facets: required non-empty list")
        else:
            for i, f in enumerate(raw_f):
                where = f"polytope.facets[{i}]"
                if not isinstance(f, dict) or set(f) != {"normal", "offset"}:
                    errors.append(f"{where}: expected a mapping with exactly normal and offset")
                    continue
                n = _vector(f["normal"], f"{where}.normal", dim, errors)
                o = _real(f["offset"], f"{where}.offset", errors)
                facets.append((n, o))

    preset = form_a = form_b = None
    forms = tree.get("forms")
    if not isinstance(forms, dict):
        errors.append("forms: required mapping with either preset or a/b")
    else:
        for key in sorted(set(forms) - {"preset", "a", "b"}):
            errors.append(f"forms.{key}: unknown field")
        has_preset = "preset" in forms
        has_raw = "a" in forms or "b" in forms
        if has_preset and has_raw:
            errors.append("forms: preset and raw a/b are mutually exclusive")
        elif not has_preset and not has_raw:
            errors.append("forms: give either preset or raw a/b")
        elif has_preset:
            if not isinstance(forms["preset"], str) or not forms["preset"]:
                errors.append("forms.preset: expected a preset name")
            else:
                preset = forms["preset"]
        else:
            ra, rb = forms.get("a"), forms.get("b")
            if not isinstance(ra, list) or not isinstance(rb, list):
                errors.append("forms: a and b must both be lists")
            else:
                if len(ra) != len(rb):
                    errors.append(f"forms: {len(ra)} vectors in a but {len(rb)} offsets in b")
                form_a = tuple(_vector(v, f"forms.a[{i}]", dim, errors) for i, v in enumerate(ra))
                form_b = tuple(_real(v, f"forms.b[{i}]", errors) for i, v in enumerate(rb))

    opts = _check_options(tree.get("options"), errors)
    if errors:
        raise SchemaError(errors)
    return ProblemSpec(
        name=name,
        dim=dim,
        vertices=tuple(vertices),
        facets=tuple((n, o) for n, o in facets),
        preset=preset,
        form_a=form_a,
        form_b=form_b,
        options=opts,
    )


def parse_problem(path) -> ProblemSpec:
    path = Path(path)
    return spec_from_tree(_load_tree(path), str(path))


# --------------------------------------------------------------- pipeline


class _Stages:
    """Runs named stages, timing each and tagging any failure with its stage."""

    def __init__(self):
        self.timings: dict[str, float] = {}
        self.failed: str | None = None

    def run(self, stage: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except Exception:
            self.failed = stage
            raise
        finally:
            self.timings[stage] = time.perf_counter() - t0


def _floats(v) -> list | float:
    return np.asarray(v, dtype=float).tolist()


def _oracle_block(P, W, lam, opts) -> dict:
    n, seed = opts["oracle_samples"], opts["seed"]

    def integrand(x):
        w = np.exp(x @ lam) * W.evaluate(x)
        return np.column_stack([w, x * w[:, None]])

    est, err = mc_oracle(P, integrand, n, seed)
    mt = weighted_moments(P, W, lam, degree_cap=opts["quad_degree_cap"])
    quad = np.concatenate([[mt.I0], mt.I1])
    z = np.abs(quad - est) / np.where(err > 0, err, np.inf)
    return {
        "samples": n,
        "seed": seed,
        "lambda": _floats(lam),
        "quadrature": _floats(quad),
        "monte_carlo": _floats(est),
        "stderr": _floats(err),
        "z_scores": _floats(z),
        "agree_4_stderr": bool(np.all(z <= 4.0)),
    }


def run_pipeline(spec: ProblemSpec) -> tuple[dict, dict, int]:
    """Run every stage. Returns ``(hashable, timings, exit_code)``.

    Errors do not escape: the failing stage is recorded under ``error`` and
    the stages completed so far stay in the report.
    """
    opts = spec.options
    quad = {"degree_cap": opts["quad_degree_cap"]}
    out: dict[str, Any] = {
        "schema": SCHEMA,
        "version": __version__,
        "problem": spec.name,
        "input_hash": spec.input_hash,
        "spec": spec.canonical(),
    }
    st = _Stages()
    code = EXIT_OK
    try:
        P = st.run("polytope", validate_polytope, list(spec.vertices),
                   [(list(n), o) for n, o in spec.facets])
        if spec.preset is not None:
            W = st.run("forms", load_base_preset, spec.preset, P.dim)
        else:
            W = st.run("forms", make_forms, [list(v) for v in spec.form_a], list(spec.form_b), spec.dim)
        if W.dim != P.dim:
            st.failed = "forms"
            raise DimensionMismatch(f"forms have dimension {W.dim}, polytope {P.dim}")
        fano = st.run("fano", fano_check, P, W)
        out["fano"] = {
            "is_fano": fano.is_fano,
            "margin": fano.margin if math.isfinite(fano.margin) else None,
            "violations": [{"form": a, "vertex": v} for a, v in fano.violations],
            "p_min": fano.p_min,
            "p_max": fano.p_max,
        }
        if not fano.is_fano:
            out["verdict"] = {"fano": False, "statement": VERDICT_NOT_FANO, "ke_case": False}
            return out, st.timings, EXIT_NOT_FANO

        futaki = st.run("futaki", futaki_vector, P, W, **quad)
        sol = st.run("soliton", solve_soliton_vector, P, W, tol=opts["tol"], **quad)
        c_lam = st.run("normalization", normalization_constant, P, W, sol.lam, **quad)
        ke = bool(np.linalg.norm(futaki) <= opts["tol"] * min(1.0, P.diameter))
        statement = VERDICT_FANO + (f"; {KE_NOTE}" if ke else "")
        out["verdict"] = {"fano": True, "statement": statement, "ke_case": ke}
        out["soliton"] = {
            "lambda": _floats(sol.lam),
            "c_lambda": float(c_lam),
            "futaki": _floats(futaki),
            "iterations": sol.iterations,
            "residual_norm": sol.residual_norm,
            "theta_affine": {"slope": _floats(sol.lam), "intercept": float(c_lam)},
        }

        if P.dim == 1:
            interval = (float(P.vertices.min()), float(P.vertices.max()))
            prof = st.run("profile", solve_profile, interval, W, sol.lam, c_lam, opts["n_grid"])
            res = st.run("residual", ma_residual_1d, prof, W)
            slopes = boundary_slope_check(prof)
            out["profile"] = {
                "supported": True,
                "n_grid": prof.n_grid,
                "interval": list(interval),
                "closure_defect": prof.closure_defect,
                "min_phi_interior": float(prof.phi[1:-1].min()),
                "boundary_slopes": slopes,
                "residual": {"sup_norm": res.sup_norm, "l2_norm": res.l2_norm,
                             "worst_point": list(res.worst_point)},
            }
            out["_profile"] = prof
        else:
            out["profile"] = {"supported": False, "note": PROFILE_UNSUPPORTED}

        if opts["oracle"]:
            out["oracle"] = st.run("oracle", _oracle_block, P, W, sol.lam, opts)
    except ToricSolitonError as exc:
        out["error"] = {"stage": st.failed or "pipeline", "code": exc.code, "message": str(exc)}
        code = EXIT_ERROR
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        out["error"] = {"stage": st.failed or "pipeline", "code": type(exc).__name__, "message": str(exc)}
        code = EXIT_ERROR
    return out, st.timings, code


# ------------------------------------------------------------------ output


def _slug(name: str) -> str:
    keep = "".join(ch if ch.isalnum() or ch in "-_." else "-" for ch in name.strip())
    return keep.strip(".") or "problem"


def write_profile_csv(prof, path: Path) -> None:
    lines = ["x,phi,u,t"]
    for row in prof.records():
        lines.append(",".join(format(v, ".17g") for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit(report: dict, timings: dict, out_dir, formats: str = "both") -> list[Path]:
    """Write ``<name>.report.json`` and, for m=1, ``<name>.profile.csv``."""
    out_dir = Path(out_dir)
    hashable = {k: v for k, v in report.items() if not k.startswith("_")}
    body = canonical_json(hashable)
    doc = {
        "schema": SCHEMA,
        "hashable": hashable,
        "hashable_sha256": hashlib.sha256(body.encode("utf-8")).hexdigest(),
        "timings": {k: round(v, 6) for k, v in sorted(timings.items())},
    }
    stem = _slug(report.get("problem", "problem"))
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if formats in ("report", "both"):
            path = out_dir / f"{stem}.report.json"
            path.write_text(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                            encoding="utf-8")
            written.append(path)
        prof = report.get("_profile")
        if formats in ("csv", "both") and prof is not None:
            path = out_dir / f"{stem}.profile.csv"
            write_profile_csv(prof, path)
            written.append(path)
    except OSError as exc:
        raise IoError(f"cannot write to {out_dir}: {exc.strerror or exc}") from exc
    return written


def _process(path: str, args) -> int:
    try:
        spec = parse_problem(path).with_options(
            tol=args.tol, quad_degree_cap=args.quad_degree, n_grid=args.grid,
            seed=args.seed, oracle=True if args.oracle else None,
        )
    except ToricSolitonError as exc:
        print(f"{path}: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report, timings, code = run_pipeline(spec)
    try:
        written = emit(report, timings, args.out, args.format)
    except IoError as exc:
        print(f"{path}: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    verdict = report.get("verdict", {}).get("statement")
    err = report.get("error")
    if err:
        print(f"{spec.name}: error in stage {err['stage']}: {err['message']}", file=sys.stderr)
    else:
        print(f"{spec.name}: {verdict}")
    for p in written:
        print(f"  wrote {p}")
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="toric-soliton",
        description="Fano test, soliton vector, normalization constant and 1-D metric profile for toric fibres.",
    )
    ap.add_argument("--problem", action="append", required=True, metavar="PATH",
                    help="problem file (.yaml, .yml or .json); repeatable")
    ap.add_argument("--out", default=".", metavar="DIR", help="output directory (default: .)")
    ap.add_argument("--tol", type=float, help="Newton tolerance on |g| (default 1e-10)")
    ap.add_argument("--quad-degree", type=int, help="cubature degree cap (default 25)")
    ap.add_argument("--grid", type=int, help="profile grid size n_grid (default 2048)")
    ap.add_argument("--seed", type=int, help="Monte-Carlo seed (default 0)")
    ap.add_argument("--oracle", action="store_true", help="add a Monte-Carlo cross-check block")
    ap.add_argument("--format", choices=("report", "csv", "both"), default="both")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    codes = [_process(p, args) for p in args.problem]
    # an error anywhere wins over a non-Fano verdict
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    if EXIT_NOT_FANO in codes:
        return EXIT_NOT_FANO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
