"""Command-line driver.

Subcommands mirror the pipeline stages: build-code, partition, emit-circuit,
sample, decode, run, fit, report.  All take --seed/--workers/--out where
meaningful; errors exit nonzero with a one-line diagnostic.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys

from .codes import InvalidCodeError, load_preset, PRESETS
from .circuit import (
    CircuitError,
    NoiseModel,
    circuit_from_text,
    circuit_to_text,
)
from .partition import (
    PartitionError,
    bipartition,
    build_combined_tanner,
    export_partition,
    import_partition,
    partition_stats,
)
from .sim import FrameSample, dem_sample, extract_dem, frame_sample
from .decode import (
    BpOsdConfig,
    BpOsdDecoder,
    DecodeError,
    MatchingDecoder,
    logical_error_rate,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    bundled_config_path,
    fit_ansatz,
    read_points_csv,
    resolve_code,
    run_experiment,
    write_fit_json,
    write_points_csv,
    write_report_csv,
)

_ERRORS = (ConfigError, PartitionError, CircuitError, DecodeError,
           InvalidCodeError, ValueError, OSError)


def _out_stream(path):
    if path:
        return open(path, "w")
    return contextlib.nullcontext(sys.stdout)


def _code_arg(text: str):
    if text.endswith(".json"):
        with open(text) as fh:
            return resolve_code(json.load(fh))
    return resolve_code(text)


def _cmd_build_code(args) -> int:
    code = _code_arg(args.code)
    info = {
        "name": code.name,
        "n": code.n,
        "k": code.k,
        "d": code.d,
        "x_checks": code.hx.rows,
        "z_checks": code.hz.rows,
        "tanner_edges": code.hx.nnz + code.hz.nnz,
    }
    if args.full:
        info["hx"] = code.hx.to_coordinate_text()
        info["hz"] = code.hz.to_coordinate_text()
    with _out_stream(args.out) as fh:
        json.dump(info, fh, indent=2)
        fh.write("\n")
    return 0


def _cmd_partition(args) -> int:
    code = _code_arg(args.code)
    graph = build_combined_tanner(code)
    part = bipartition(graph, balance_tol=args.balance_tol,
                       restarts=args.restarts, seed=args.seed)
    stats = partition_stats(graph, part)
    if args.out:
        with open(args.out, "w") as fh:
            export_partition(part, fh)
    json.dump(stats.to_json_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_emit_circuit(args) -> int:
    from .circuit import build_bb_circuit, build_surface_circuit

    code = _code_arg(args.code)
    noise = NoiseModel(p=args.p, p_ghz=args.p_ghz, p_bell=args.p_bell)
    rounds = args.rounds if args.rounds is not None else (code.d or 3)
    if code.name.startswith("surface"):
        circ = build_surface_circuit(code.d, rounds, noise,
                                     networked=args.mode == "networked",
                                     basis=args.basis)
    else:
        part = None
        if args.mode == "partitioned":
            graph = build_combined_tanner(code)
            if args.partition_file:
                part = import_partition(args.partition_file, graph)
            else:
                part = bipartition(graph, seed=args.seed)
        circ = build_bb_circuit(code, rounds, noise, partition=part,
                                basis=args.basis)
    with _out_stream(args.out) as fh:
        fh.write(circuit_to_text(circ))
    return 0


def _load_circuit(path):
    with open(path) as fh:
        return circuit_from_text(fh.read())


def _cmd_sample(args) -> int:
    circ = _load_circuit(args.circuit)
    if args.via_dem:
        fs = dem_sample(extract_dem(circ), args.shots, seed=args.seed)
    else:
        fs = frame_sample(circ, args.shots, seed=args.seed)
    if not args.out:
        raise ConfigError("sample requires --out (binary or .csv)")
    if args.out.endswith(".csv"):
        fs.to_csv(args.out)
    else:
        fs.to_file(args.out)
    return 0


def _cmd_decode(args) -> int:
    circ = _load_circuit(args.circuit)
    dem = extract_dem(circ)
    fs = FrameSample.from_file(args.samples)
    if args.decoder == "matching":
        dec = MatchingDecoder(dem)
    else:
        dec = BpOsdDecoder(dem, BpOsdConfig())
    preds = dec.decode_batch(fs.detector_events)
    est = logical_error_rate(preds, fs.observable_flips)
    json.dump(
        {"shots": est.shots, "failures": est.failures, "p_l": est.rate,
         "ci_low": est.ci_low, "ci_high": est.ci_high,
         "decoder": args.decoder},
        sys.stdout, indent=2,
    )
    sys.stdout.write("\n")
    return 0


def _cmd_run(args) -> int:
    path = args.config
    if not os.path.exists(path):
        path = bundled_config_path(path)
    config = ExperimentConfig.from_json(path)
    if args.seed is not None:
        config = ExperimentConfig(**{**config.to_json_dict(),
                                     "seed": args.seed})
    if args.workers is not None:
        config = ExperimentConfig(**{**config.to_json_dict(),
                                     "workers": args.workers})

    multi = len(config.curves) > 1

    def progress(pt):
        knob = (f"p_ghz={pt.p_ghz:g}" if config.sweep_variable == "p_ghz"
                else f"p={pt.p:g}")
        curve = f"{pt.code}/{pt.mode}/p_bell={pt.p_bell:g} " if multi else ""
        print(f"{curve}{knob}: p_l={pt.p_l:.3e} "
              f"({pt.failures}/{pt.shots} shots)", file=sys.stderr)

    points = run_experiment(config, progress=progress)
    if args.out:
        write_points_csv(points, args.out)
    else:
        for pt in points:
            print(f"{pt.code} {pt.mode} p={pt.p:g} p_l={pt.p_l:.4e} "
                  f"[{pt.ci_low:.2e}, {pt.ci_high:.2e}] "
                  f"({pt.failures}/{pt.shots})")
    return 0


def _fit_groups(points):
    groups: dict[tuple, list] = {}
    for pt in points:
        groups.setdefault((pt.code, pt.mode, pt.p_bell, pt.p_ghz), []).append(pt)
    return groups


def _cmd_fit(args) -> int:
    points = read_points_csv(args.points)
    for row, pt in enumerate(points, start=2):  # row 1 is the header
        if pt.p_l == 0.0:
            raise ConfigError(
                f"row {row} ({pt.code}/{pt.mode} p={pt.p:g}) has p_l=0; "
                "the log-domain fit needs observed failures at every point"
            )
    entries = []
    for (code, mode, p_bell, p_ghz), pts in _fit_groups(points).items():
        usable = pts
        if len(usable) < 2:
            continue
        if args.alpha is not None:
            alpha = args.alpha
        else:
            try:
                alpha = load_preset(code).metadata["alpha"]
            except (InvalidCodeError, KeyError):
                raise ConfigError(
                    f"no default exponent for {code}; pass --alpha"
                ) from None
        curve = mode if not p_ghz else f"{mode}/p_ghz={p_ghz:g}"
        entries.append({
            "code": code, "curve": curve, "p_bell": p_bell,
            "fit": fit_ansatz([pt.p for pt in usable],
                              [pt.p_l for pt in usable], alpha),
        })
    if not entries:
        raise ConfigError("no fittable curves in the points file")
    if args.out:
        write_fit_json(entries, args.out)
    else:
        for e in entries:
            f = e["fit"]
            print(f"{e['code']}/{e['curve']}/p_bell={e['p_bell']:g}: "
                  f"alpha={f.alpha:g} c0={f.c0:.6g} c1={f.c1:.6g} "
                  f"c2={f.c2:.6g} ({f.n_points} pts)")
    return 0


def _cmd_report(args) -> int:
    points = read_points_csv(args.points)
    if not args.out:
        raise ConfigError("report requires --out")
    write_report_csv(points, args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="netqec",
        description="Networked QEC simulation toolkit",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, workers=False, out=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        if workers:
            sp.add_argument("--workers", type=int, default=None)
        if out:
            sp.add_argument("--out", default=None)
        return sp

    sp = common(sub.add_parser("build-code", help="emit code summary JSON"),
                seed=False)
    sp.add_argument("code", help=f"preset ({', '.join(sorted(PRESETS))}) "
                                 "or descriptor .json")
    sp.add_argument("--full", action="store_true",
                    help="include check matrices as coordinate text")
    sp.set_defaults(func=_cmd_build_code)

    sp = common(sub.add_parser("partition", help="balanced min-cut bipartition"))
    sp.add_argument("code")
    sp.add_argument("--restarts", type=int, default=64)
    sp.add_argument("--balance-tol", type=int, default=2)
    sp.set_defaults(func=_cmd_partition)

    sp = common(sub.add_parser("emit-circuit", help="write circuit text"))
    sp.add_argument("code")
    sp.add_argument("--mode", choices=("monolithic", "networked",
                                       "partitioned"), default="monolithic")
    sp.add_argument("--p", type=float, default=0.0)
    sp.add_argument("--p-ghz", type=float, default=0.0)
    sp.add_argument("--p-bell", type=float, default=0.0)
    sp.add_argument("--rounds", type=int, default=None)
    sp.add_argument("--basis", choices=("Z", "X"), default="Z")
    sp.add_argument("--partition-file", default=None)
    sp.set_defaults(func=_cmd_emit_circuit)

    sp = common(sub.add_parser("sample", help="sample detector events"))
    sp.add_argument("circuit")
    sp.add_argument("--shots", type=int, required=True)
    sp.add_argument("--via-dem", action="store_true",
                    help="sample the extracted error model instead of frames")
    sp.set_defaults(func=_cmd_sample)

    sp = common(sub.add_parser("decode", help="decode sampled events"),
                out=False)
    sp.add_argument("circuit")
    sp.add_argument("--samples", required=True)
    sp.add_argument("--decoder", choices=("matching", "bposd"),
                    default="matching")
    sp.set_defaults(func=_cmd_decode)

    sp = common(sub.add_parser("run", help="full pipeline from a config file"),
                workers=True)
    sp.add_argument("config",
                    help="config JSON path, or a bundled name such as "
                         "fig4_ghz_sweep")
    sp.set_defaults(func=_cmd_run, seed=None)

    sp = common(sub.add_parser("fit", help="fit the suppression ansatz"),
                seed=False)
    sp.add_argument("points", help="CSV from `run`")
    sp.add_argument("--alpha", type=float, default=None)
    sp.set_defaults(func=_cmd_fit)

    sp = common(sub.add_parser("report", help="plot-ready CSV with the "
                                              "uncoded reference"),
                seed=False)
    sp.add_argument("points")
    sp.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
