"""End-to-end experiment driver: code -> partition -> circuit -> sample ->
decode -> statistics, plus the logical-error-rate ansatz fit.

Sampling is batched; batch b of a point is seeded (seed, b), so results are
identical however batches are spread over workers, and the stop rule (shot or
failure budget) is evaluated at batch boundaries in batch order.
"""

from __future__ import annotations

import csv
import json
import math
import re
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .codes import (
    BBSpec,
    CssCode,
    InvalidCodeError,
    build_bb_code,
    build_surface_code,
    load_preset,
)
from .circuit import Circuit, NoiseModel, bell_fidelity_to_p
from .partition import (
    Partition,
    bipartition,
    build_combined_tanner,
    import_partition,
    partition_stats,
)
from .sim import BATCH_SHOTS, dem_sample, extract_dem
from .decode import (
    BpOsdConfig,
    BpOsdDecoder,
    MatchingDecoder,
    logical_error_rate,
    wilson_interval,
)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration

_MODES = ("monolithic", "networked", "partitioned")


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a code/mode pair evaluated over a list of physical rates."""

    code: str | dict
    mode: str = "monolithic"
    sweep: tuple[float, ...] = ()
    sweep_variable: str = "p"
    p: float = 0.0
    p_ghz: float = 0.0
    p_bell: float | None = None
    bell_fidelity: float | None = None
    rounds: int | None = None
    basis: str = "Z"
    max_shots: int = 1_000_000
    max_failures: int = 1_000
    seed: int = 0
    decoder: str | None = None
    decoder_config: dict = field(default_factory=dict)
    workers: int = 4
    partition: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    label: str | None = None
    curves: tuple = ()

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ConfigError(
                f"unknown mode {self.mode!r}; expected one of {_MODES}"
            )
        if not self.sweep:
            raise ConfigError("sweep must list at least one physical rate p")
        if self.sweep_variable not in ("p", "p_ghz"):
            raise ConfigError(
                f"sweep_variable must be 'p' or 'p_ghz', "
                f"got {self.sweep_variable!r}"
            )
        if self.p_bell is not None and self.bell_fidelity is not None:
            raise ConfigError("give p_bell or bell_fidelity, not both")
        if self.max_shots < 1 or self.max_failures < 1:
            raise ConfigError("max_shots and max_failures must be >= 1")
        object.__setattr__(self, "sweep", tuple(float(p) for p in self.sweep))
        object.__setattr__(self, "curves", tuple(self.curves))
        shared = {"curves", "sweep", "sweep_variable", "seed", "workers"}
        for cv in self.curves:
            if not isinstance(cv, dict):
                raise ConfigError("curves entries must be objects")
            bad = set(cv) & shared
            if bad:
                raise ConfigError(
                    f"curve overrides may not change shared fields {sorted(bad)}"
                )
            unknown = set(cv) - set(self.__dataclass_fields__)
            if unknown:
                raise ConfigError(f"unknown curve fields {sorted(unknown)}")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: not valid JSON ({e})") from None
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(
                f"{path}: unknown config fields {sorted(unknown)}; "
                f"expected a subset of {sorted(known)}"
            )
        return cls(**raw)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["sweep"] = list(self.sweep)
        d["curves"] = [dict(cv) for cv in self.curves]
        return d

    def resolved_p_bell(self) -> float:
        if self.bell_fidelity is not None:
            return bell_fidelity_to_p(self.bell_fidelity)
        return self.p_bell or 0.0


def bundled_config_path(name: str):
    """Path of a reproduction config shipped with the package.

    ``name`` may omit the .json suffix; raises ConfigError listing the
    available names when there is no match.
    """
    from importlib import resources

    stem = name[:-5] if name.endswith(".json") else name
    root = resources.files(__package__) / "configs"
    candidate = root / f"{stem}.json"
    if candidate.is_file():
        return candidate
    available = sorted(p.name[:-5] for p in root.iterdir()
                       if p.name.endswith(".json"))
    raise ConfigError(
        f"no bundled config named {name!r}; available: {available}"
    )


def resolve_code(spec: str | dict) -> CssCode:
    """Accept a preset name, "surface_d<D>", or a family descriptor dict."""
    if isinstance(spec, str):
        m = re.fullmatch(r"surface_d(\d+)", spec)
        if m:
            return build_surface_code(int(m.group(1)))
        return load_preset(spec)
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(
            "code must be a preset name or an object with a 'family' key"
        )
    fam = spec["family"]
    if fam == "surface":
        try:
            return build_surface_code(int(spec["d"]))
        except KeyError:
            raise ConfigError("surface code descriptor needs 'd'") from None
    if fam == "bb":
        try:
            bb = BBSpec.from_dict(spec)
        except InvalidCodeError as e:
            raise ConfigError(str(e)) from None
        return build_bb_code(bb, name=spec.get("name", "bb-custom"),
                             d=spec.get("d"))
    raise ConfigError(f"unknown code family {fam!r}")


# ---------------------------------------------------------------------------
# Point execution

@dataclass(frozen=True)
class ExperimentPoint:
    code: str
    mode: str
    p: float
    p_bell: float
    p_ghz: float
    rounds: int
    basis: str
    decoder: str
    shots: int
    failures: int
    p_l: float
    ci_low: float
    ci_high: float
    bell_per_shot: int | None
    seed: int

    def row(self) -> dict:
        return asdict(self)


CSV_COLUMNS = [
    "code", "mode", "p", "p_bell", "p_ghz", "shots", "failures", "p_l",
    "ci_lo", "ci_hi", "bell_per_shot", "seed", "rounds", "basis", "decoder",
]


def _resolve_partition(config: ExperimentConfig, code: CssCode) -> Partition:
    opts = dict(config.partition)
    graph = build_combined_tanner(code)
    if "file" in opts:
        return import_partition(opts["file"], graph)
    return bipartition(
        graph,
        balance_tol=int(opts.get("balance_tol", 2)),
        restarts=int(opts.get("restarts", 64)),
        seed=int(opts.get("seed", config.seed)),
    )


def build_point_circuit(config: ExperimentConfig, value: float):
    """(circuit, code, bell_pairs_per_shot | None) for one sweep point.

    ``value`` is the swept quantity: the physical rate p, or p_ghz when
    ``sweep_variable`` says so (then the physical rate is ``config.p``).
    """
    from .circuit import build_bb_circuit, build_surface_circuit

    code = resolve_code(config.code)
    is_surface = code.name.startswith("surface")
    p, p_ghz = ((config.p, value) if config.sweep_variable == "p_ghz"
                else (value, config.p_ghz))
    noise = NoiseModel(
        p=p,
        p_ghz=p_ghz,
        p_bell=config.resolved_p_bell(),
        **{k: config.noise[k] for k in ("p_g", "p_m", "p_r", "p_idle")
           if k in config.noise},
    )
    rounds = config.rounds if config.rounds is not None else (code.d or 3)
    if is_surface:
        if config.mode == "partitioned":
            raise ConfigError("surface codes support monolithic or networked")
        circ = build_surface_circuit(code.d, rounds, noise,
                                     networked=config.mode == "networked",
                                     basis=config.basis)
        return circ, code, None
    if config.mode == "networked":
        raise ConfigError("BB codes support monolithic or partitioned")
    part = None
    bell = None
    if config.mode == "partitioned":
        part = _resolve_partition(config, code)
        stats = partition_stats(build_combined_tanner(code), part)
        bell = stats.bell_pairs_per_shot(rounds)
    circ = build_bb_circuit(code, rounds, noise, partition=part,
                            basis=config.basis)
    return circ, code, bell


def _make_decoder(config: ExperimentConfig, circuit: Circuit, dem):
    name = config.decoder
    if name is None:
        name = "matching" if circuit.metadata.get("code", "").startswith("surface") \
            else "bposd"
    if name == "matching":
        return name, MatchingDecoder(dem)
    if name == "bposd":
        return name, BpOsdDecoder(dem, BpOsdConfig(**config.decoder_config))
    raise ConfigError(f"unknown decoder {name!r}; expected matching or bposd")


def _batch_plan(max_shots: int, batch_shots: int):
    plan = []
    done = 0
    b = 0
    while done < max_shots:
        take = min(batch_shots, max_shots - done)
        plan.append((b, take))
        done += take
        b += 1
    return plan


# worker globals, inherited over fork
_WORKER: dict = {}


def _run_batch(args):
    batch_idx, shots = args
    dem = _WORKER["dem"]
    decoder = _WORKER["decoder"]
    seed = _WORKER["seed"]
    fs = dem_sample(dem, shots, seed=seed, first_batch=batch_idx)
    preds = decoder.decode_batch(fs.detector_events)
    fails = int(np.any(preds != fs.observable_flips, axis=1).sum())
    return shots, fails


def _point_seed(config: ExperimentConfig, value: float) -> int:
    """Distinct sample streams per (curve, point), reproducible from the
    config seed alone."""
    key = json.dumps(
        [config.label, str(config.code), config.mode,
         config.resolved_p_bell(), config.p, config.p_ghz],
        sort_keys=True,
    )
    mix = zlib.crc32(key.encode())
    return (config.seed * 1_000_003 + mix * 97
            + int(round(value * 1e9))) % (1 << 62)


def run_point(config: ExperimentConfig, value: float,
              batch_shots: int = BATCH_SHOTS) -> ExperimentPoint:
    """Sample/decode one sweep point until the shot or failure budget."""
    circuit, code, bell = build_point_circuit(config, value)
    dem = extract_dem(circuit)
    name, decoder = _make_decoder(config, circuit, dem)
    point_seed = _point_seed(config, value)
    p, p_ghz = ((config.p, value) if config.sweep_variable == "p_ghz"
                else (value, config.p_ghz))

    _WORKER.update(dem=dem, decoder=decoder, seed=point_seed)
    plan = _batch_plan(config.max_shots, batch_shots)
    shots = fails = 0
    if config.workers <= 1:
        for item in plan:
            s, f = _run_batch(item)
            shots += s
            fails += f
            if fails >= config.max_failures:
                break
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for s, f in pool.map(_run_batch, plan):
                shots += s
                fails += f
                if fails >= config.max_failures:
                    pool.shutdown(wait=False, cancel_futures=True)
                    break
    lo, hi = wilson_interval(fails, shots)
    return ExperimentPoint(
        code=code.name,
        mode=config.mode,
        p=p,
        p_bell=config.resolved_p_bell(),
        p_ghz=p_ghz,
        rounds=config.rounds if config.rounds is not None else (code.d or 3),
        basis=config.basis,
        decoder=name,
        shots=shots,
        failures=fails,
        p_l=fails / shots,
        ci_low=lo,
        ci_high=hi,
        bell_per_shot=bell,
        seed=config.seed,
    )


def expand_curves(config: ExperimentConfig) -> list[ExperimentConfig]:
    """One sub-config per curve override (or the config itself if none)."""
    if not config.curves:
        return [config]
    return [replace(config, curves=(), **cv) for cv in config.curves]


def run_experiment(config: ExperimentConfig,
                   progress=None) -> list[ExperimentPoint]:
    """All sweep points of every curve of a config, in order."""
    points = []
    for sub in expand_curves(config):
        for p in sub.sweep:
            pt = run_point(sub, p)
            points.append(pt)
            if progress is not None:
                progress(pt)
    return points


# ---------------------------------------------------------------------------
# Ansatz fit

@dataclass(frozen=True)
class FitResult:
    """Coefficients of ln p_L = alpha ln p + c0 + c1 p + c2 p^2."""

    alpha: float
    c0: float
    c1: float
    c2: float
    n_points: int

    def evaluate(self, p: float) -> float:
        return float(
            p ** self.alpha
            * math.exp(self.c0 + self.c1 * p + self.c2 * p * p)
        )


def fit_ansatz(ps, p_ls, alpha: float) -> FitResult:
    """Least-squares fit of the suppression ansatz at fixed exponent.

    With exactly three points the 3-coefficient system is solved exactly;
    with two points the quadratic term is pinned to zero.
    """
    ps = np.asarray(ps, dtype=np.float64)
    pls = np.asarray(p_ls, dtype=np.float64)
    if ps.shape != pls.shape or ps.ndim != 1:
        raise ValueError("ps and p_ls must be 1-d and equally long")
    if ps.size < 2:
        raise ValueError("need at least two points to fit")
    if np.any(ps <= 0) or np.any(pls <= 0):
        raise ValueError("rates must be positive to fit in log space")
    y = np.log(pls) - alpha * np.log(ps)
    if ps.size == 2:
        a = np.stack([np.ones(2), ps], axis=1)
        c0, c1 = np.linalg.solve(a, y)
        return FitResult(float(alpha), float(c0), float(c1), 0.0, 2)
    a = np.stack([np.ones_like(ps), ps, ps * ps], axis=1)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return FitResult(float(alpha), *(float(c) for c in coef), int(ps.size))


# ---------------------------------------------------------------------------
# Output files

def write_points_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for pt in points:
            row = pt.row()
            row["ci_lo"] = row.pop("ci_low")
            row["ci_hi"] = row.pop("ci_high")
            row["bell_per_shot"] = "" if row["bell_per_shot"] is None \
                else row["bell_per_shot"]
            w.writerow({k: row[k] for k in CSV_COLUMNS})


def read_points_csv(path) -> list[ExperimentPoint]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ExperimentPoint(
                code=row["code"], mode=row["mode"], p=float(row["p"]),
                p_bell=float(row["p_bell"]), p_ghz=float(row["p_ghz"]),
                rounds=int(row["rounds"]), basis=row["basis"],
                decoder=row["decoder"], shots=int(row["shots"]),
                failures=int(row["failures"]), p_l=float(row["p_l"]),
                ci_low=float(row["ci_lo"]), ci_high=float(row["ci_hi"]),
                bell_per_shot=None if row["bell_per_shot"] in ("", None)
                else int(row["bell_per_shot"]),
                seed=int(row["seed"]),
            ))
    return out


def write_fit_json(entries, path) -> None:
    """Fit rows shaped like the summary table: one object per curve with
    keys (code, curve, p_bell, alpha, n_pts, c0, c1, c2)."""
    payload = []
    for e in entries:
        f = e["fit"]
        payload.append({
            "code": e["code"], "curve": e["curve"],
            "p_bell": e.get("p_bell", 0.0), "alpha": f.alpha,
            "n_pts": f.n_points, "c0": f.c0, "c1": f.c1, "c2": f.c2,
        })
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_report_csv(points, path) -> None:
    """Plot-ready rows: every point plus the uncoded p_L = p reference."""
    cols = ["curve", "p", "p_l", "ci_low", "ci_high", "bell_per_shot"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for pt in points:
            curve = f"{pt.code}/{pt.mode}"
            if pt.p_bell:
                curve += f"/p_bell={pt.p_bell:g}"
            if pt.p_ghz:
                curve += f"/p_ghz={pt.p_ghz:g}"
            bell = "" if pt.bell_per_shot is None else pt.bell_per_shot
            w.writerow([curve, pt.p, pt.p_l, pt.ci_low, pt.ci_high, bell])
        for p in sorted({pt.p for pt in points}):
            w.writerow(["uncoded", p, p, p, p, ""])
