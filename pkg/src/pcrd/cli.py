"""Command-line entry point: metrics, sweep, fit, optimize, pipeline, synth.

Exit codes: 0 success, 2 bad input, 3 infeasible budget or solver failure,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import fields

from . import codec_proxy
from .codec_proxy import MeasurementCsvError, ProxyCodecConfig
from .metrics import MetricConfig, full_report
from .optimizer import SolverConfig, SolverError, solve
from .ply import PlyError, load_ply, save_ply
from .rdmodel import FitError, RdModels, fit
from .synthetic import default_seed, synthetic_cloud

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_INTERNAL = 4

FEASIBILITY_SLACK = 0.01
PIPELINE_FIELDS = ("target_rate", "achieved_rate", "q_g", "q_c", "D", "pc_psnr", "measured_rate")

log = logging.getLogger("pcrd")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def fmt_float(x) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def to_json(obj, indent=0) -> str:
    """JSON with every float at 17 significant digits and infinities as strings."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + to_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        s = fmt_float(obj)
        return s if math.isfinite(obj) else json.dumps(s)
    if hasattr(obj, "item"):
        return to_json(obj.item(), indent)
    return json.dumps(obj)


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--config", help="JSON object, or path to one, overriding solver/codec fields by name")
    common.add_argument("--normals-k", type=_positive_int, default=None, help="neighbors for normal estimation")
    common.add_argument("--frame-rate", type=_positive_float, default=None, help="frames per second for Mbps")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pcrd", description="Point cloud distortion metrics and rate-constrained QP selection.")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("metrics", parents=[common], help="distortion report between two PLY files")
    m.add_argument("ref")
    m.add_argument("test")

    s = sub.add_parser("sweep", parents=[common], help="nine-pair pre-encoding sweep with the proxy codec")
    s.add_argument("input")

    f = sub.add_parser("fit", parents=[common], help="fit rate and distortion models from a measurement CSV")
    f.add_argument("measurements")

    o = sub.add_parser("optimize", parents=[common], help="choose QPs for target rates from fitted models")
    o.add_argument("--models", required=True)
    o.add_argument("--target-rate", type=_positive_float, action="append", required=True, metavar="MBPS")

    pl = sub.add_parser("pipeline", parents=[common], help="sweep, fit, optimize and re-encode per target rate")
    pl.add_argument("input")
    pl.add_argument("--target-rate", type=_positive_float, action="append", required=True, metavar="MBPS")

    sy = sub.add_parser("synth", parents=[common], help="write a synthetic test cloud (seed from PCRD_SEED)")
    sy.add_argument("--points", type=_positive_int, default=10_000)
    sy.add_argument("--seed", type=int, default=None)
    sy.add_argument("--ascii", action="store_true")
    return p


def _load_overrides(text):
    if text is None:
        return {}
    try:
        if text.lstrip().startswith("{"):
            data = json.loads(text)
        else:
            with open(text) as fh:
                data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(EXIT_INPUT, f"--config: {e}") from None
    if not isinstance(data, dict):
        raise CliError(EXIT_INPUT, "--config must be a JSON object")
    known = {f.name for f in fields(SolverConfig)} | {f.name for f in fields(ProxyCodecConfig)} | {"normals_k"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise CliError(EXIT_INPUT, f"--config: unknown fields {unknown}")
    return data


def configs(args):
    """Solver, codec and metric configs from ``--config`` plus the dedicated flags."""
    over = _load_overrides(args.config)
    if args.frame_rate is not None:
        over["frame_rate"] = args.frame_rate
    if args.normals_k is not None:
        over["normals_k"] = args.normals_k
    try:
        solver = SolverConfig.from_overrides(over)
        codec = ProxyCodecConfig(**{k: v for k, v in over.items() if k in {f.name for f in fields(ProxyCodecConfig)}})
        metric = MetricConfig(int(over.get("normals_k", MetricConfig().normals_k)))
    except (TypeError, ValueError) as e:
        raise CliError(EXIT_INPUT, f"--config: {e}") from None
    if metric.normals_k < 1:
        raise CliError(EXIT_INPUT, "normals_k must be >= 1")
    return solver, codec, metric


def _read_cloud(path):
    try:
        return load_ply(path)
    except (PlyError, OSError) as e:
        raise CliError(EXIT_INPUT, f"{path}: {e}") from None


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_metrics(args):
    _, _, metric = configs(args)
    ref, test = _read_cloud(args.ref), _read_cloud(args.test)
    report = full_report(ref, test, metric)
    _emit(to_json(report.to_dict()) + "\n", args.out)


def cmd_sweep(args):
    _, codec, metric = configs(args)
    cloud = _read_cloud(args.input)
    rows = codec_proxy.preencode_sweep(cloud, codec, metric)
    codec_proxy.write_csv(rows, args.out or sys.stdout)


def _fit_csv(path):
    try:
        return fit(codec_proxy.ingest_csv(path))
    except OSError as e:
        raise CliError(EXIT_INPUT, f"{path}: {e}") from None
    except (MeasurementCsvError, FitError) as e:
        raise CliError(EXIT_INPUT, str(e)) from None


def cmd_fit(args):
    configs(args)
    models = _fit_csv(args.measurements)
    _emit(to_json(models.to_dict()) + "\n", args.out)


def _read_models(path):
    try:
        with open(path) as fh:
            return RdModels.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, ValueError, TypeError) as e:
        raise CliError(EXIT_INPUT, f"{path}: {e}") from None


def solve_checked(models, target, solver):
    try:
        result = solve(models, target, solver)
    except SolverError as e:
        raise CliError(EXIT_SOLVER, str(e)) from None
    if result.model_rate > target * (1 + FEASIBILITY_SLACK):
        raise CliError(EXIT_INTERNAL, f"solver returned an infeasible pair for target {target:g}")
    return result


def cmd_optimize(args):
    solver, _, _ = configs(args)
    models = _read_models(args.models)
    results = [solve_checked(models, t, solver).to_dict() for t in args.target_rate]
    _emit(to_json(results[0] if len(results) == 1 else results) + "\n", args.out)


def pipeline_rows(cloud, targets, solver, codec, metric):
    """One dict per target rate: model rate at the chosen QPs plus measured D, PSNR and rate."""
    stage = "sweep"
    try:
        measurements = codec_proxy.preencode_sweep(cloud, codec, metric)
        stage = "fit"
        models = fit(measurements)
    except (ValueError, FitError) as e:
        raise CliError(EXIT_INPUT, f"pipeline stage {stage}: {e}") from None
    rows = []
    for target in targets:
        try:
            result = solve_checked(models, target, solver)
        except CliError as e:
            raise CliError(e.code, f"pipeline stage optimize: {e}") from None
        encoded = codec_proxy.encode(cloud, result.q_g_star, result.q_c_star, codec)
        report = full_report(cloud, encoded.decoded, metric)
        rows.append({
            "target_rate": target,
            "achieved_rate": result.model_rate,
            "q_g": result.q_g_star,
            "q_c": result.q_c_star,
            "D": report.D,
            "pc_psnr": report.pc_psnr,
            "measured_rate": encoded.bits * codec.frame_rate / 1e6,
        })
    return rows


def write_rd_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PIPELINE_FIELDS)
    for r in rows:
        w.writerow([r[k] if isinstance(r[k], int) else fmt_float(r[k]) for k in PIPELINE_FIELDS])


def cmd_pipeline(args):
    solver, codec, metric = configs(args)
    cloud = _read_cloud(args.input)
    rows = pipeline_rows(cloud, args.target_rate, solver, codec, metric)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_rd_csv(rows, fh)
    else:
        write_rd_csv(rows, sys.stdout)


def cmd_synth(args):
    configs(args)
    if not args.out:
        raise CliError(EXIT_INPUT, "synth needs --out")
    seed = default_seed() if args.seed is None else args.seed
    cloud = synthetic_cloud(args.points, seed=seed)
    save_ply(cloud, args.out, "ascii" if args.ascii else "binary-little-endian")


COMMANDS = {
    "metrics": cmd_metrics,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "optimize": cmd_optimize,
    "pipeline": cmd_pipeline,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except CliError as e:
        print(f"pcrd {args.command}: {e}", file=sys.stderr)
        return e.code
    except Exception as e:  # anything unexpected is a bug, not bad input
        log.exception("internal error")
        print(f"pcrd {args.command}: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
