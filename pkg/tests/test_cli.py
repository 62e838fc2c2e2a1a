import json
import math

import pytest

from toric_soliton.cli import (
    DEFAULT_OPTIONS,
    EXIT_ERROR,
    EXIT_NOT_FANO,
    EXIT_OK,
    PROFILE_UNSUPPORTED,
    VERDICT_FANO,
    VERDICT_NOT_FANO,
    emit,
    main,
    parse_problem,
    run_pipeline,
    spec_from_tree,
)
from toric_soliton.errors import IoError, ParseError, SchemaError

ASYMMETRIC_YAML = """\
name: asymmetric-interval
dim: 1
polytope:
  vertices: [[-1], [2]]
  facets:
    - {normal: [1], offset: 1}
    - {normal: [-1], offset: 2}
forms:
  preset: point
options:
  tol: 1e-10
  n_grid: 512
"""


def tree(**overrides):
    base = {
        "name": "square",
        "dim": 2,
        "polytope": {
            "vertices": [[1, 1], [-1, 1], [-1, -1], [1, -1]],
            "facets": [
                {"normal": [1, 0], "offset": 1},
                {"normal": [-1, 0], "offset": 1},
                {"normal": [0, 1], "offset": 1},
                {"normal": [0, -1], "offset": 1},
            ],
        },
        "forms": {"preset": "cp2-base"},
    }
    base.update(overrides)
    return base


def interval_tree(lo, hi, forms=None, **opts):
    t = {
        "name": f"interval_{lo}_{hi}",
        "dim": 1,
        "polytope": {"vertices": [[lo], [hi]], "facets": [{"normal": [1], "offset": -lo}, {"normal": [-1], "offset": hi}]},
        "forms": forms or {"preset": "point"},
    }
    if opts:
        t["options"] = opts
    return t


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults_are_filled(tmp_path):
    spec = spec_from_tree(tree())
    assert spec.options == DEFAULT_OPTIONS
    assert (spec.options["tol"], spec.options["n_grid"], spec.options["quad_degree_cap"]) == (1e-10, 2048, 25)


def test_yaml_exponent_without_dot_is_accepted(tmp_path):
    spec = parse_problem(write(tmp_path, "p.yaml", ASYMMETRIC_YAML))
    assert spec.options["tol"] == 1e-10 and spec.options["n_grid"] == 512


def test_yaml_and_json_give_the_same_hash(tmp_path):
    a = parse_problem(write(tmp_path, "p.yaml", ASYMMETRIC_YAML))
    b = parse_problem(write(tmp_path, "p.json", json.dumps(a.canonical())))
    assert a.input_hash == b.input_hash and len(a.input_hash) == 64


def test_preset_and_raw_forms_are_exclusive():
    with pytest.raises(SchemaError, match="mutually exclusive"):
        spec_from_tree(tree(forms={"preset": "point", "a": [], "b": []}))


def test_non_finite_values_rejected():
    t = tree()
    t["polytope"]["facets"][0]["offset"] = math.nan
    with pytest.raises(SchemaError, match="finite"):
        spec_from_tree(t)


def test_all_violations_are_collected():
    t = tree(colour="red", options={"tol": -1, "n_grid": 2.5, "bogus": 1})
    t["polytope"]["vertices"][2] = [1, 2, 3]
    with pytest.raises(SchemaError) as info:
        spec_from_tree(t)
    v = info.value.violations
    assert len(v) == 5
    assert any("colour" in s for s in v) and any("bogus" in s for s in v)
    assert any("vertices[2]" in s for s in v)


def test_with_options_validates():
    spec = spec_from_tree(tree())
    assert spec.with_options(tol=1e-8, n_grid=None).options["tol"] == 1e-8
    with pytest.raises(SchemaError):
        spec.with_options(n_grid=2)


def test_parse_error_carries_location(tmp_path):
    with pytest.raises(ParseError, match=r"bad\.yaml:\d+:\d+: expected"):
        parse_problem(write(tmp_path, "bad.yaml", "name: x\ndim: 1\npolytope: [1, 2\n"))
    with pytest.raises(ParseError, match=r"bad\.json:2:"):
        parse_problem(write(tmp_path, "bad.json", '{"name": "x",\n "dim": }'))


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(IoError):
        parse_problem(tmp_path / "absent.yaml")


def test_pipeline_asymmetric_interval():
    out, timings, code = run_pipeline(spec_from_tree(interval_tree(-1, 2, n_grid=512)))
    assert code == EXIT_OK
    assert out["verdict"]["statement"] == VERDICT_FANO
    assert out["soliton"]["lambda"][0] == pytest.approx(-0.71637526663568751, abs=1e-9)
    assert out["profile"]["boundary_slopes"]["pass"]
    assert {"polytope", "forms", "fano", "futaki", "soliton", "normalization", "profile"} <= set(timings)


def test_pipeline_symmetric_is_kahler_einstein():
    out, _, code = run_pipeline(spec_from_tree(interval_tree(-1, 1, n_grid=256)))
    assert code == EXIT_OK and out["verdict"]["ke_case"]
    assert out["verdict"]["statement"].endswith("; Kähler-Einstein case")


def test_pipeline_two_dimensional_has_no_profile():
    out, _, code = run_pipeline(spec_from_tree(tree(forms={"preset": "point"})))
    assert code == EXIT_OK
    assert out["profile"] == {"supported": False, "note": PROFILE_UNSUPPORTED}
    assert "_profile" not in out


def test_small_offsets_on_large_square_are_not_fano():
    out, _, code = run_pipeline(spec_from_tree(tree()))
    assert code == EXIT_NOT_FANO and out["fano"]["margin"] < 0


def test_pipeline_not_fano():
    forms = {"a": [[4 * math.pi]], "b": [0.5]}
    out, _, code = run_pipeline(spec_from_tree(interval_tree(-1, 1, forms)))
    assert code == EXIT_NOT_FANO
    assert out["verdict"]["statement"] == VERDICT_NOT_FANO
    assert out["fano"]["violations"] == [{"form": 0, "vertex": 1}]
    assert "soliton" not in out


def test_pipeline_records_failing_stage():
    out, _, code = run_pipeline(spec_from_tree(interval_tree(-1, 3, {"preset": "no-such-base"})))
    assert code == EXIT_ERROR
    assert out["error"]["stage"] == "forms" and out["error"]["code"] == "unknown_preset"


def test_pipeline_polytope_error():
    t = interval_tree(-1, 2)
    t["polytope"]["vertices"] = [[-1], [5]]
    out, _, code = run_pipeline(spec_from_tree(t))
    assert code == EXIT_ERROR and out["error"]["stage"] == "polytope"


def test_oracle_block():
    out, _, code = run_pipeline(spec_from_tree(interval_tree(-1, 2, n_grid=64, oracle=True, oracle_samples=200_000)))
    assert code == EXIT_OK and "oracle" in out


def test_emit_into_unwritable_location(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    out, timings, _ = run_pipeline(spec_from_tree(interval_tree(-1, 1, n_grid=64)))
    with pytest.raises(IoError):
        emit(out, timings, blocker / "sub")


def test_main_exit_code_on_io_error(tmp_path, capsys):
    path = write(tmp_path, "p.yaml", ASYMMETRIC_YAML)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["--problem", str(path), "--out", str(blocker / "sub")]) == EXIT_ERROR
    assert "io_error" in capsys.readouterr().err


def test_report_round_trip(tmp_path, capsys):
    path = write(tmp_path, "p.yaml", ASYMMETRIC_YAML)
    assert main(["--problem", str(path), "--out", str(tmp_path / "out")]) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "asymmetric-interval.report.json").read_text())
    assert doc["schema"] == "toric-soliton/1"
    spec = spec_from_tree(doc["hashable"]["spec"])
    assert spec.input_hash == doc["hashable"]["input_hash"]
    rows = (tmp_path / "out" / "asymmetric-interval.profile.csv").read_text().splitlines()
    assert rows[0] == "x,phi,u,t" and len(rows) == 513
    assert rows[1].split(",")[2] == "inf"


def test_runs_are_byte_identical(tmp_path, capsys):
    path = write(tmp_path, "p.yaml", ASYMMETRIC_YAML)
    for d in ("a", "b"):
        assert main(["--problem", str(path), "--out", str(tmp_path / d), "--oracle", "--seed", "3"]) == EXIT_OK
    for name in ("asymmetric-interval.profile.csv",):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ja = json.loads((tmp_path / "a" / "asymmetric-interval.report.json").read_text())
    jb = json.loads((tmp_path / "b" / "asymmetric-interval.report.json").read_text())
    assert ja["hashable_sha256"] == jb["hashable_sha256"]


def test_error_wins_over_not_fano(tmp_path, capsys):
    bad = write(tmp_path, "bad.yaml", "name: x\n")
    nf = write(tmp_path, "nf.json", json.dumps(interval_tree(-1, 1, {"a": [[4 * math.pi]], "b": [0.5]})))
    assert main(["--problem", str(nf), "--out", str(tmp_path)]) == EXIT_NOT_FANO
    assert main(["--problem", str(nf), "--problem", str(bad), "--out", str(tmp_path)]) == EXIT_ERROR


def test_format_report_only(tmp_path, capsys):
    path = write(tmp_path, "p.yaml", ASYMMETRIC_YAML)
    main(["--problem", str(path), "--out", str(tmp_path), "--format", "report"])
    assert not (tmp_path / "asymmetric-interval.profile.csv").exists()
