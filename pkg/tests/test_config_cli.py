import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dampwave import scenarios as sc
from dampwave import solver
from dampwave.cli import main
from dampwave.config import ExperimentConfig, parse_config, serialize, with_overrides
from dampwave.errors import ParseError, ValidationError
from dampwave.persist import RunWriter, verify_manifest

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = with_overrides(
    sc.EXTERIOR_DISK,
    domain={"R_box": 6.0, "h": 0.25},
    damper={"gcc_n_pos": 30, "gcc_n_dir": 12},
    run={"name": "small", "T_end": 16.0, "observer_stride": 1},
    resolvent={"n_samples": 4, "mid_band": (0.5, 2.0), "high_band": (3.0, 8.0),
               "growth_early": (3.0, 4.0), "growth_late": (6.0, 8.0)},
)


def write_cfg(tmp_path, cfg, name="c.ini"):
    p = tmp_path / name
    p.write_text(serialize(cfg))
    return p


def run_cli(*argv):
    return main([str(a) for a in argv])


# -- config ----------------------------------------------------------------

def test_defaults():
    cfg = parse_config("")
    assert cfg == ExperimentConfig()
    assert cfg.domain.h == 0.1 and cfg.domain.dim == 2 and cfg.run.T_end == 50.0
    assert cfg.R_box == pytest.approx(3.0 + 25.0 + 1.0)
    assert cfg.fit_window() == (10.0, 45.0)


def test_negative_step_rejected_with_field():
    with pytest.raises(ValidationError) as err:
        parse_config("[domain]\nh = -0.1\n")
    assert err.value.field == "h"
    assert err.value.to_dict()["field"] == "h"


@pytest.mark.parametrize("text, line", [
    ("[domain]\nh = 0.1\nbogus = 3\n", 3),
    ("[nowhere]\n", 1),
    ("\n[run]\nT_end = 5\nT_end = 6\n", 4),
    ("h = 0.1\n", 1),
    ("[run]\nT_end = fast\n", 2),
    ("[run]\ntheorem_run = maybe\n", 2),
    ("[run\n", 1),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as err:
        parse_config(text)
    assert err.value.line == line
    assert err.value.to_dict()["error"] == "PARSE_ERROR"


def test_comments_and_auto():
    cfg = parse_config("# note\n; other\n[domain]\nR_box = auto\n[run]\nfit_tmin = 12\n")
    assert cfg.domain.R_box is None and cfg.run.fit_tmin == 12.0


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.stem)
def test_shipped_configs_round_trip(path):
    cfg = parse_config(path.read_text())
    assert parse_config(serialize(cfg)) == cfg
    assert with_overrides(cfg, output={"dir": "out"}) == sc.SHIPPED[cfg.run.name]


@settings(max_examples=40, deadline=None)
@given(h=st.floats(0.01, 0.5), T=st.floats(12.0, 500.0), seed=st.integers(0, 2**63),
       inner=st.floats(1.0, 1.9), safety=st.floats(0.1, 1.0), n=st.integers(2, 100),
       holes=st.lists(st.tuples(*[st.floats(-1.0, 1.0)] * 4), max_size=3))
def test_serialize_round_trip(h, T, seed, inner, safety, n, holes):
    cfg = with_overrides(ExperimentConfig(), domain={"h": h}, run={"T_end": T, "safety": safety},
                         damper={"inner_radius": inner, "holes": tuple(holes)},
                         resolvent={"n_samples": n}, output={"seed": seed})
    back = parse_config(serialize(cfg))
    assert back == cfg and back.digest() == cfg.digest()


def test_with_overrides_changes_digest():
    base = ExperimentConfig()
    assert with_overrides(base, run={"T_end": 10.0}).digest() != base.digest()


# -- persistence -----------------------------------------------------------

def test_manifest_records_and_detects_tampering(tmp_path):
    w = RunWriter(tmp_path, "test", "abc", 3)
    w.write_text("a/b.csv", "x\n1\n")
    w.write_json("c.json", {"k": 1})
    path = w.seal()
    assert path == tmp_path / "manifest.json"
    data = json.loads(path.read_text())
    assert {f["path"] for f in data["files"]} == {"a/b.csv", "c.json"}
    assert data["seed"] == 3 and data["command"] == "test" and data["config_hash"] == "abc"
    assert verify_manifest(tmp_path) == []
    (tmp_path / "c.json").write_text("{}")
    assert verify_manifest(tmp_path) == ["c.json"]


# -- CLI -------------------------------------------------------------------

def test_simulate_writes_valid_run(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    out = tmp_path / "sim"
    assert run_cli("simulate", "--config", cfg, "--out", out) == 0
    for name in ("trace.csv", "fit.json", "gcc.json", "u_final.bin", "config.ini", "manifest.json"):
        assert (out / name).exists(), name
    assert verify_manifest(out) == []
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_hash"] == SMALL.digest()
    assert parse_config((out / "config.ini").read_text()) == SMALL
    fit = json.loads((out / "fit.json").read_text())
    assert fit["E_r"]["exponent"] > 0 and fit["max_residual"] <= 1e-10
    assert json.loads((out / "gcc.json").read_text())["satisfied"] is True
    u, h, t = solver.read_snapshot(out / "u_final.bin")
    assert h == 0.25 and t == pytest.approx(16.0, abs=0.25) and u.shape == (49, 49)


def test_fit_command_on_trace(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    run_cli("simulate", "--config", cfg, "--out", tmp_path / "sim")
    capsys.readouterr()
    assert run_cli("fit", "--csv", tmp_path / "sim" / "trace.csv", "--column", "E_total",
                   "--tmin", 5, "--tmax", 15, "--out", tmp_path / "fit") == 0
    printed = json.loads(capsys.readouterr().out)
    saved = json.loads((tmp_path / "fit" / "fit.json").read_text())
    assert saved["exponent"] == printed["exponent"] and saved["column"] == "E_total"
    assert run_cli("fit", "--csv", tmp_path / "sim" / "trace.csv", "--column", "nope") == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "VALIDATION_ERROR" and err["field"] == "column"


def test_plot_trace_and_empty_csv(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    run_cli("simulate", "--config", cfg, "--out", tmp_path / "sim")
    assert run_cli("plot", "--csv", tmp_path / "sim" / "trace.csv", "--columns", "E_total,l2_sq") == 0
    svg = (tmp_path / "sim" / "plots" / "trace.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 2
    assert verify_manifest(tmp_path / "sim") == []
    empty = tmp_path / "empty.csv"
    empty.write_text("t,E\n")
    capsys.readouterr()
    assert run_cli("plot", "--csv", empty, "--out", tmp_path / "p") == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "PLOT_ERROR" and err["module"] == "cli-harness"


def test_check_gcc_command(tmp_path, capsys):
    trap = with_overrides(sc.TWO_DISK_TRAP, damper={"gcc_n_pos": 40, "gcc_n_dir": 16})
    cfg = write_cfg(tmp_path, trap)
    assert run_cli("check-gcc", "--config", cfg, "--out", tmp_path / "g", "--threads", 2) == 0
    rep = json.loads((tmp_path / "g" / "gcc.json").read_text())
    assert rep["satisfied"] is False
    assert "NOT satisfied" in (tmp_path / "g" / "gcc.txt").read_text()
    assert run_cli("check-gcc", "--config", write_cfg(tmp_path, SMALL, "s.ini"),
                   "--out", tmp_path / "e", "--escape-radius", 5) == 0
    assert json.loads((tmp_path / "e" / "gcc.json").read_text())["satisfied"] is True


def test_sweep_resolvent_command(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    out = tmp_path / "sw"
    assert run_cli("sweep-resolvent", "--config", cfg, "--out", out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["intermediate"]["n_failed"] == 0 and summary["hf_growth_ratio"] > 0
    rows = (out / "sweep_mid.csv").read_text().splitlines()
    assert len(rows) == 5 and rows[0].startswith("s,norm_w")
    assert verify_manifest(out) == []


def test_compare_heat_command(tmp_path, capsys):
    free = with_overrides(sc.FREE_SPACE, domain={"R_box": 20.0, "h": 0.5},
                          run={"T_end": 30.0, "fit_tmin": 10.0, "fit_tmax": 27.0})
    cfg = write_cfg(tmp_path, free)
    out = tmp_path / "heat"
    assert run_cli("compare-heat", "--config", cfg, "--out", out) == 0
    fits = json.loads((out / "gap_fit.json").read_text())
    assert fits["margin"] == pytest.approx(fits["gap"]["exponent"] - fits["u"]["exponent"])
    assert (out / "gap.csv").read_text().startswith("t,norm_u,norm_v,gap")


def test_verify_skips_decay_rows_without_gcc(tmp_path, capsys):
    trap = with_overrides(sc.TWO_DISK_TRAP, damper={"gcc_n_pos": 40, "gcc_n_dir": 16},
                          run={"T_end": 20.0})
    cfg = write_cfg(tmp_path, trap)
    out = tmp_path / "v"
    code = run_cli("verify", "--config", cfg, "--out", out, "--only", "local_decay,total_decay,box_doubling")
    assert code == 0
    for key in ("local_decay", "total_decay", "box_doubling"):
        res = json.loads((out / key / "result.json").read_text())
        assert res["status"] == "SKIPPED(GCC_FAIL)"
    assert "SKIPPED(GCC_FAIL)" in (out / "summary.txt").read_text()
    assert verify_manifest(out) == []


def test_bad_config_reports_json_error(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[domain]\nh = -0.1\n")
    assert run_cli("simulate", "--config", bad, "--out", tmp_path / "o") == 2
    err = json.loads(capsys.readouterr().err)
    assert err == {"error": "VALIDATION_ERROR", "module": "cli-harness", "field": "h",
                   "message": "h: must be positive"}
    bad.write_text("[domain]\nwat = 1\n")
    assert run_cli("simulate", "--config", bad) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "PARSE_ERROR" and err["line"] == 2
    assert run_cli("simulate", "--config", tmp_path / "missing.ini") == 2
    assert json.loads(capsys.readouterr().err)["error"] == "IO_ERROR"


def test_seed_must_fit_u64(capsys):
    with pytest.raises(SystemExit):
        main(["verify", "--seed", str(2**64)])
    with pytest.raises(SystemExit):
        main(["verify", "--seed", "-1"])


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    out = tmp_path / "g"
    assert run_cli("check-gcc", "--config", cfg, "--out", out, "--seed", 2**64 - 1) == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 2**64 - 1
    np.testing.assert_equal(parse_config((out / "config.ini").read_text()).output.seed, 2**64 - 1)
