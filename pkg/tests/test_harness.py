import json
import math

import numpy as np
import pytest

from netqec.harness import (
    ConfigError,
    ExperimentConfig,
    ExperimentPoint,
    bundled_config_path,
    build_point_circuit,
    expand_curves,
    fit_ansatz,
    read_points_csv,
    resolve_code,
    run_experiment,
    run_point,
    write_fit_json,
    write_points_csv,
    write_report_csv,
)


def _cfg(**kw):
    base = dict(code="surface_d3", sweep=[0.003], max_shots=256,
                max_failures=1000, workers=1)
    base.update(kw)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# Config validation

def test_config_rejects_unknown_mode():
    with pytest.raises(ConfigError, match="mode"):
        _cfg(mode="distributed")


def test_config_rejects_empty_sweep():
    with pytest.raises(ConfigError, match="sweep"):
        _cfg(sweep=[])


def test_config_rejects_bad_sweep_variable():
    with pytest.raises(ConfigError, match="sweep_variable"):
        _cfg(sweep_variable="p_bell")


def test_config_rejects_double_bell_spec():
    with pytest.raises(ConfigError, match="p_bell or bell_fidelity"):
        _cfg(p_bell=0.05, bell_fidelity=0.96)


def test_config_curve_overrides_validated():
    with pytest.raises(ConfigError, match="shared fields"):
        _cfg(curves=[{"sweep": [0.1]}])
    with pytest.raises(ConfigError, match="unknown curve fields"):
        _cfg(curves=[{"p_bells": 0.1}])
    with pytest.raises(ConfigError, match="objects"):
        _cfg(curves=["monolithic"])


def test_config_from_json_unknown_field(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"code": "bb72", "sweep": [0.001],
                                "shots": 100}))
    with pytest.raises(ConfigError, match="shots"):
        ExperimentConfig.from_json(path)


def test_config_from_json_bad_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{nope")
    with pytest.raises(ConfigError, match="JSON"):
        ExperimentConfig.from_json(path)


def test_bell_fidelity_resolution():
    assert _cfg(bell_fidelity=0.96).resolved_p_bell() == pytest.approx(0.05)
    assert _cfg(p_bell=0.03).resolved_p_bell() == 0.03
    assert _cfg().resolved_p_bell() == 0.0


# ---------------------------------------------------------------------------
# Code resolution

def test_resolve_code_presets_and_surface():
    assert resolve_code("bb72").n == 72
    assert resolve_code("surface_d5").n == 41
    assert resolve_code({"family": "surface", "d": 3}).n == 13
    custom = resolve_code({
        "family": "bb", "ell": 6, "m": 6,
        "a": ["x^3", "y", "y^2"], "b": ["y^3", "x", "x^2"],
    })
    assert (custom.n, custom.k) == (72, 12)


def test_resolve_code_errors():
    with pytest.raises(Exception):
        resolve_code("bb73")
    with pytest.raises(ConfigError, match="family"):
        resolve_code({"d": 3})
    with pytest.raises(ConfigError, match="'d'"):
        resolve_code({"family": "surface"})
    with pytest.raises(ConfigError):
        resolve_code({"family": "bb", "ell": 6, "m": 6,
                      "a": ["z^2"], "b": ["x"]})


# ---------------------------------------------------------------------------
# Point circuits

def test_build_point_circuit_sweeps_p_by_default():
    circ, code, bell = build_point_circuit(_cfg(), 0.007)
    assert code.name == "surface_d3"
    assert bell is None
    assert any(i.args == (0.007,) for i in circ.instructions
               if i.name == "DEPOLARIZE2")


def test_build_point_circuit_p_ghz_sweep():
    cfg = _cfg(mode="networked", sweep_variable="p_ghz", sweep=[0.01], p=0.0)
    circ, _, _ = build_point_circuit(cfg, 0.01)
    assert circ.metadata["mode"] == "networked"
    # p = 0: no two-qubit depolarizing from local gates
    assert not any(i.name == "DEPOLARIZE2" for i in circ.instructions)


def test_build_point_circuit_partitioned_bb():
    cfg = _cfg(code="bb72", mode="partitioned", p_bell=0.05, rounds=2,
               partition={"restarts": 8, "seed": 1})
    circ, code, bell = build_point_circuit(cfg, 0.002)
    assert code.name == "bb72"
    assert bell == circ.metadata["e_cut"] * 2


def test_build_point_circuit_mode_checks():
    with pytest.raises(ConfigError):
        build_point_circuit(_cfg(mode="partitioned"), 0.001)
    with pytest.raises(ConfigError):
        build_point_circuit(_cfg(code="bb72", mode="networked"), 0.001)


# ---------------------------------------------------------------------------
# Running

def test_run_point_deterministic_and_quiet_at_zero_noise():
    cfg = _cfg(sweep=[0.0], max_shots=512)
    a = run_point(cfg, 0.0)
    b = run_point(cfg, 0.0)
    assert a == b
    assert a.failures == 0
    assert a.shots == 512


def test_run_point_stops_at_failure_budget():
    cfg = _cfg(sweep=[0.08], max_shots=200_000, max_failures=5)
    pt = run_point(cfg, 0.08, batch_shots=64)
    assert pt.failures >= 5
    assert pt.shots < 200_000


def test_run_experiment_expands_curves_in_order():
    cfg = _cfg(
        code="bb72", rounds=1, sweep=[0.002], max_shots=128,
        curves=[{"mode": "monolithic"},
                {"mode": "partitioned", "bell_fidelity": 0.99,
                 "partition": {"restarts": 4}}],
    )
    pts = run_experiment(cfg)
    assert [(p.mode, p.p_bell) for p in pts] == [
        ("monolithic", 0.0), ("partitioned", 0.0125)]
    assert pts[1].bell_per_shot and pts[1].bell_per_shot > 0


def test_expand_curves_identity_without_curves():
    cfg = _cfg()
    assert expand_curves(cfg) == [cfg]


# ---------------------------------------------------------------------------
# Ansatz fit

TABLE_TRIPLES = [
    (3, 13.680, -290.350, 2.209e4),
    (4, 18.263, -214.952, 1.572e4),
    (5, 27.004, -1029.260, 5.650e4),
]


@pytest.mark.parametrize("alpha,c0,c1,c2", TABLE_TRIPLES)
def test_fit_recovers_synthetic_triples(alpha, c0, c1, c2):
    ps = np.array([3e-3, 5e-3, 8e-3])
    pls = ps ** alpha * np.exp(c0 + c1 * ps + c2 * ps * ps)
    fit = fit_ansatz(ps, pls, alpha)
    assert fit.c0 == pytest.approx(c0, rel=1e-7)
    assert fit.c1 == pytest.approx(c1, rel=1e-7)
    assert fit.c2 == pytest.approx(c2, rel=1e-7)
    for p, pl in zip(ps, pls):
        assert fit.evaluate(p) == pytest.approx(pl, rel=1e-9)


def test_fit_two_points_truncates_quadratic():
    ps = np.array([2e-3, 6e-3])
    pls = ps ** 3 * math.e ** 10
    fit = fit_ansatz(ps, pls, 3)
    assert fit.c2 == 0.0
    assert fit.c0 == pytest.approx(10.0)
    assert fit.c1 == pytest.approx(0.0, abs=1e-9)


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_ansatz([1e-3], [1e-6], 3)
    with pytest.raises(ValueError):
        fit_ansatz([1e-3, 2e-3], [1e-6, 0.0], 3)
    with pytest.raises(ValueError):
        fit_ansatz([1e-3, 2e-3], [1e-6], 3)


# ---------------------------------------------------------------------------
# Files

def _point(**kw):
    base = dict(code="bb72", mode="partitioned", p=0.003, p_bell=0.0125,
                p_ghz=0.0, rounds=6, basis="Z", decoder="bposd", shots=1000,
                failures=12, p_l=0.012, ci_low=0.0069, ci_high=0.0208,
                bell_per_shot=624, seed=3)
    base.update(kw)
    return ExperimentPoint(**base)


def test_points_csv_round_trip(tmp_path):
    pts = [_point(), _point(p=0.001, failures=2, p_l=0.002,
                          bell_per_shot=None, mode="monolithic", p_bell=0.0)]
    path = tmp_path / "points.csv"
    write_points_csv(pts, path)
    header = path.read_text().splitlines()[0]
    assert header.startswith("code,mode,p,p_bell,p_ghz,shots,failures,"
                             "p_l,ci_lo,ci_hi,bell_per_shot,seed")
    assert read_points_csv(path) == pts


def test_report_csv_has_uncoded_line_and_bell_column(tmp_path):
    path = tmp_path / "report.csv"
    write_report_csv([_point()], path)
    rows = path.read_text().splitlines()
    assert rows[0] == "curve,p,p_l,ci_low,ci_high,bell_per_shot"
    assert rows[1].startswith("bb72/partitioned/p_bell=0.0125,")
    assert rows[1].endswith(",624")
    assert rows[-1].startswith("uncoded,0.003,0.003,")


def test_fit_json_fields(tmp_path):
    fit = fit_ansatz([3e-3, 5e-3, 8e-3],
                     [2.7e-5, 1.2e-4, 4.7e-4], 3)
    path = tmp_path / "fit.json"
    write_fit_json([{"code": "bb72", "curve": "partitioned",
                     "p_bell": 0.0125, "fit": fit}], path)
    data = json.loads(path.read_text())
    assert data == [{
        "code": "bb72", "curve": "partitioned", "p_bell": 0.0125,
        "alpha": 3.0, "n_pts": 3, "c0": fit.c0, "c1": fit.c1, "c2": fit.c2,
    }]


# ---------------------------------------------------------------------------
# Bundled configs

BUNDLED = ["fig4_ghz_sweep", "fig5_networked_surface",
           "fig6_bb_partitioned_72", "fig6_bb_partitioned_90",
           "fig6_bb_partitioned_144"]


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_load(name):
    cfg = ExperimentConfig.from_json(bundled_config_path(name))
    assert cfg.sweep
    for sub in expand_curves(cfg):
        resolve_code(sub.code)


def test_bundled_config_lookup_error():
    with pytest.raises(ConfigError, match="fig4_ghz_sweep"):
        bundled_config_path("fig7_wishful")


def test_fig4_is_a_p_ghz_sweep():
    cfg = ExperimentConfig.from_json(bundled_config_path("fig4_ghz_sweep"))
    assert cfg.sweep_variable == "p_ghz"
    assert len(cfg.sweep) == 7
    assert cfg.p == 0.0
    assert not cfg.curves


def test_fig6_has_three_curves():
    cfg = ExperimentConfig.from_json(
        bundled_config_path("fig6_bb_partitioned_72"))
    modes = [c.get("mode") for c in cfg.curves]
    assert modes == ["monolithic", "partitioned", "partitioned"]
