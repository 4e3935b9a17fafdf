"""Acceptance criteria at full scale and stated tolerances.

Each test prints one ``[PASS]``/``[FAIL]`` line. Expensive runs are shared
through the memoized scenario helpers, so the whole file costs roughly one
``dampwave verify`` (about five minutes single-threaded).
"""
import filecmp
import subprocess
import sys
from pathlib import Path

import pytest

from dampwave import scenarios as sc


@pytest.fixture
def report(capsys):
    def emit(n, ok, text):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}")
        return ok
    return emit


def test_criterion_01_dissipation_identity(report):
    c = sc.run_check("energy_identity", sc.check_energy_identity)
    m = c.measured
    ok = m["max_residual"] <= 1e-10 and m["undamped_drift"] <= 1e-10 and c.seconds <= 120
    assert report(1, ok, f"{c.detail}; {c.seconds:.0f}s <= 120s"), c.detail


def test_criterion_02_free_space_rates(report):
    c = sc.run_check("free_space_rates", sc.check_free_space)
    m = c.measured
    ok = (0.7 <= m["l2_sq"]["exponent"] <= 1.4 and 1.5 <= m["E_total"]["exponent"] <= 2.6
          and min(m["l2_sq"]["r2"], m["E_total"]["r2"]) >= 0.98 and c.seconds <= 600)
    assert report(2, ok, c.detail), c.detail


def test_criterion_03_local_decay(report):
    gcc = sc.gcc_report(sc.DECAY)
    c = sc.run_check("local_decay", sc.check_local_decay)
    assert gcc.satisfied, "GCC must be certified before the decay run"
    m = c.measured.get("E_r1", {})
    ok = c.status == sc.PASS and m["exponent"] >= 1.6 and m["r2"] >= 0.95 and c.seconds <= 900
    assert report(3, ok, c.detail), c.detail


def test_criterion_04_total_decay(report):
    c = sc.run_check("total_decay", sc.check_total_decay)
    m = c.measured
    ok = c.status == sc.PASS and m["l2_sq"]["exponent"] >= 0.8 and m["E_total"]["exponent"] >= 1.2
    assert report(4, ok, c.detail), c.detail


def test_criterion_05_box_doubling(report):
    c = sc.run_check("box_doubling", sc.check_box_doubling)
    ok = c.status == sc.PASS and c.measured["max_rel_change"] <= 0.01 and c.seconds <= 1800
    assert report(5, ok, c.detail), c.detail


def test_criterion_06_resolvent_sweeps(report):
    c = sc.run_check("resolvent_sweeps", sc.check_resolvent_sweeps)
    mid, high = sc.resolvent_sweeps(sc.RESOLVENT_DISK, 0)
    ok = (len(mid.samples) == len(high.samples) == 40
          and all(x.ok and x.residual <= 1e-10 for x in mid.samples + high.samples)
          and mid.sup_h1 < float("inf") and c.measured["hf_growth_ratio"] <= 1.2
          and c.seconds <= 600)
    assert report(6, ok, c.detail), c.detail


def test_criterion_07_quadratic_identity(report):
    c = sc.run_check("quadratic_identity", sc.check_quadratic_identity)
    ok = c.status == sc.PASS and c.measured["n_solves"] == 80 and c.measured["max_defect"] <= 1e-9
    assert report(7, ok, c.detail), c.detail


def test_criterion_08_convolution_bound(report):
    c = sc.run_check("convolution_bound", sc.check_convolution_bound)
    growth = [g for m in c.measured.values() for g in m["growth_beyond_100"].values()]
    ok = len(c.measured) == 3 and bool(growth) and max(growth) < 1.05 and c.seconds <= 60
    assert report(8, ok, c.detail), c.detail


def test_criterion_09_diffusion_phenomenon(report):
    c = sc.run_check("diffusion_phenomenon", sc.check_diffusion)
    ok = c.status == sc.PASS and c.measured["margin"] >= 0.3
    assert report(9, ok, c.detail), c.detail


def test_criterion_10_gcc_certifier(report):
    c = sc.run_check("gcc_certifier", sc.check_gcc_certifier)
    m = c.measured
    ok = (m["single_disk"]["satisfied"] and not m["two_disk_trap"]["satisfied"]
          and m["trap_axis_offset"] <= 2 * sc.TWO_DISK_TRAP.domain.h
          and m["constant_damper"]["T0_estimate"] == 0.0 and c.seconds <= 60)
    assert report(10, ok, c.detail), c.detail


def test_criterion_11_oracle_1d(report):
    rows = sc.eigen_oracle_errors()
    worst = max(e for _, _, e in rows)
    cases = {(k, s) for k, s, _ in rows}
    ok = cases == {(k, s) for k in (1, 2, 5) for s in (0.5, 2.0, 10.0)} and worst <= 1e-9
    assert report(11, ok, f"max relative error {worst:.2e} <= 1e-9 over {len(rows)} cases"), worst


def test_criterion_12_determinism(report, tmp_path):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        proc = subprocess.run([sys.executable, "-m", "dampwave.cli", "verify", "--quick", "--seed", "7",
                               "--out", str(out)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        outs.append(out)
    csvs = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*.csv"))
    same = [filecmp.cmp(outs[0] / p, outs[1] / p, shallow=False) for p in csvs]
    other = sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*.csv"))
    ok = len(csvs) >= 10 and csvs == other and all(same)
    assert report(12, ok, f"{sum(same)}/{len(csvs)} CSVs bit-identical across two seeded runs"), csvs
