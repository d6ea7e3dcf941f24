import json
import subprocess
import sys

import numpy as np
import pytest

from netqec.cli import main
from netqec.harness import ExperimentPoint, read_points_csv, write_points_csv


def run_cli(*argv):
    return main(list(argv))


# ---------------------------------------------------------------------------
# build-code / partition / emit-circuit

def test_build_code_summary(capsys):
    assert run_cli("build-code", "bb72") == 0
    info = json.loads(capsys.readouterr().out)
    assert info["n"] == 72
    assert info["k"] == 12
    assert info["tanner_edges"] == 432


def test_build_code_full_to_file(tmp_path):
    out = tmp_path / "code.json"
    assert run_cli("build-code", "surface_d3", "--full",
                   "--out", str(out)) == 0
    info = json.loads(out.read_text())
    assert info["n"] == 13
    assert "hx" in info and "hz" in info


def test_build_code_unknown_preset(capsys):
    assert run_cli("build-code", "bb73") == 2
    assert "error:" in capsys.readouterr().err


def test_partition_stats_and_export(tmp_path, capsys):
    part_file = tmp_path / "part.txt"
    assert run_cli("partition", "bb72", "--restarts", "16", "--seed", "3",
                   "--out", str(part_file)) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["bridge_edges_total"] + stats["local_edges_total"] == 432
    assert sum(stats["data_split"]) == 72
    assert part_file.exists()

    # the exported assignment feeds back into circuit emission
    circ_file = tmp_path / "circ.txt"
    assert run_cli("emit-circuit", "bb72", "--mode", "partitioned",
                   "--partition-file", str(part_file), "--p-bell", "0.05",
                   "--rounds", "2", "--out", str(circ_file)) == 0
    text = circ_file.read_text()
    assert text.count("DEPOLARIZE2(0.05)") == stats["bridge_edges_total"] * 2


def test_emit_circuit_parses_back(tmp_path):
    from netqec.circuit import circuit_from_text

    out = tmp_path / "c.txt"
    assert run_cli("emit-circuit", "surface_d3", "--p", "0.001",
                   "--out", str(out)) == 0
    circ = circuit_from_text(out.read_text())
    assert circ.detector_count > 0
    assert circ.observable_count == 1


# ---------------------------------------------------------------------------
# sample / decode

def test_sample_decode_noiseless_pipeline(tmp_path, capsys):
    circ = tmp_path / "c.txt"
    samples = tmp_path / "s.fsmp"
    assert run_cli("emit-circuit", "surface_d3", "--out", str(circ)) == 0
    assert run_cli("sample", str(circ), "--shots", "50",
                   "--out", str(samples)) == 0
    capsys.readouterr()
    assert run_cli("decode", str(circ), "--samples", str(samples)) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["shots"] == 50
    assert result["failures"] == 0


def test_sample_via_dem_to_csv(tmp_path):
    circ = tmp_path / "c.txt"
    out = tmp_path / "s.csv"
    assert run_cli("emit-circuit", "surface_d3", "--p", "0.01",
                   "--out", str(circ)) == 0
    assert run_cli("sample", str(circ), "--shots", "16", "--via-dem",
                   "--seed", "9", "--out", str(out)) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 17
    assert rows[0].startswith("d0,")


def test_sample_requires_out(tmp_path, capsys):
    circ = tmp_path / "c.txt"
    run_cli("emit-circuit", "surface_d3", "--out", str(circ))
    assert run_cli("sample", str(circ), "--shots", "4") == 2


# ---------------------------------------------------------------------------
# run

def _tiny_config(tmp_path, **extra):
    cfg = dict(code="surface_d3", sweep=[0.004, 0.008], decoder="matching",
               max_shots=256, max_failures=64, seed=5)
    cfg.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_run_writes_reproducible_csv(tmp_path):
    cfg = _tiny_config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli("run", str(cfg), "--out", str(a)) == 0
    assert run_cli("run", str(cfg), "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()
    points = read_points_csv(a)
    assert [pt.p for pt in points] == [0.004, 0.008]
    assert all(pt.code == "surface_d3" for pt in points)


def test_run_seed_override_changes_output(tmp_path):
    cfg = _tiny_config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli("run", str(cfg), "--out", str(a)) == 0
    assert run_cli("run", str(cfg), "--seed", "99", "--out", str(b)) == 0
    assert read_points_csv(a) != read_points_csv(b)


def test_run_unknown_bundled_name(capsys):
    assert run_cli("run", "fig9_imaginary") == 2
    err = capsys.readouterr().err
    assert "fig4_ghz_sweep" in err


# ---------------------------------------------------------------------------
# fit / report

TRIPLE = (3, 13.680, -290.350, 2.209e4)


def _synthetic_points(ps, triple=TRIPLE, code="bb72", mode="partitioned"):
    alpha, c0, c1, c2 = triple
    pts = []
    for p in ps:
        pl = p ** alpha * np.exp(c0 + c1 * p + c2 * p * p)
        pts.append(ExperimentPoint(
            code=code, mode=mode, p=p, p_bell=0.0125, p_ghz=0.0, rounds=6,
            basis="Z", decoder="bposd", shots=10 ** 6,
            failures=max(1, round(pl * 10 ** 6)), p_l=pl,
            ci_low=pl * 0.9, ci_high=pl * 1.1, bell_per_shot=624, seed=1))
    return pts


def test_fit_recovers_triple_via_cli(tmp_path):
    csv = tmp_path / "points.csv"
    out = tmp_path / "fit.json"
    write_points_csv(_synthetic_points([3e-3, 5e-3, 8e-3]), csv)
    assert run_cli("fit", str(csv), "--out", str(out)) == 0
    (entry,) = json.loads(out.read_text())
    assert entry["code"] == "bb72"
    assert entry["alpha"] == 3.0
    assert entry["c0"] == pytest.approx(TRIPLE[1], rel=1e-6)
    assert entry["c1"] == pytest.approx(TRIPLE[2], rel=1e-6)
    assert entry["c2"] == pytest.approx(TRIPLE[3], rel=1e-6)


def test_fit_zero_pl_row_is_named(tmp_path, capsys):
    pts = _synthetic_points([3e-3, 5e-3, 8e-3])
    pts[1] = ExperimentPoint(**{**pts[1].__dict__, "failures": 0, "p_l": 0.0,
                                "ci_low": 0.0})
    csv = tmp_path / "points.csv"
    write_points_csv(pts, csv)
    assert run_cli("fit", str(csv)) == 2
    err = capsys.readouterr().err
    assert "row 3" in err
    assert "bb72" in err


def test_fit_surface_needs_explicit_alpha(tmp_path, capsys):
    csv = tmp_path / "points.csv"
    write_points_csv(
        _synthetic_points([3e-3, 6e-3], code="surface_d3", mode="monolithic"),
        csv)
    assert run_cli("fit", str(csv)) == 2
    assert "--alpha" in capsys.readouterr().err
    assert run_cli("fit", str(csv), "--alpha", "2") == 0


def test_report_emits_uncoded_reference(tmp_path):
    csv = tmp_path / "points.csv"
    out = tmp_path / "report.csv"
    write_points_csv(_synthetic_points([3e-3, 5e-3]), csv)
    assert run_cli("report", str(csv), "--out", str(out)) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "curve,p,p_l,ci_low,ci_high,bell_per_shot"
    uncoded = [ln for ln in lines if ln.startswith("uncoded,")]
    assert len(uncoded) == 2
    assert any(ln.endswith(",624") for ln in lines[1:])


def test_report_requires_out(tmp_path, capsys):
    csv = tmp_path / "points.csv"
    write_points_csv(_synthetic_points([3e-3]), csv)
    assert run_cli("report", str(csv)) == 2


# ---------------------------------------------------------------------------
# entry point

def test_console_script_wiring():
    proc = subprocess.run(
        [sys.executable, "-m", "netqec.cli", "build-code", "surface_d5"],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n"] == 41
