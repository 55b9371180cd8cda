"""Command-line entry point: ``upsample``, ``evaluate``, ``synth`` and ``bench``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import config as cfgmod
from .bench import parse_manifest, rows_to_csv, run_bench
from .cloud import PointCloud, normalize_unit_cube, read_ply, write_ply
from .config import BenchRun, ConfigError, EvaluateRun, SynthRun, UpsampleRun
from .metrics import AGGREGATIONS, metric_report
from .resample import upsample_original_units
from .synth import SHAPES, generate

log = logging.getLogger("pcupsample")


class _Outputs:
    """Tracks files written by a command; all are removed if the command fails."""

    def __init__(self):
        self.paths = []

    def text(self, path, content: str):
        self._commit(path, lambda tmp: Path(tmp).write_text(content, encoding="utf-8"))

    def ply(self, path, cloud: PointCloud, fmt: str, precision: int):
        self._commit(path, lambda tmp: write_ply(cloud, tmp, fmt, precision))

    def _commit(self, path, writer):
        tmp = f"{path}.partial"
        try:
            writer(tmp)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        self.paths.append(path)

    def rollback(self):
        for p in self.paths:
            if os.path.exists(p):
                os.unlink(p)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def cmd_upsample(run: UpsampleRun, out: _Outputs) -> int:
    if not run.input or not run.output:
        raise ConfigError("upsample needs --input and --output")
    ucfg = run.upsample_config(run.scale)
    cloud = read_ply(run.input)
    t0 = time.perf_counter()
    result_cloud, result = upsample_original_units(cloud, ucfg)
    wall = time.perf_counter() - t0
    out.ply(run.output, result_cloud, run.format, run.precision)
    n_in, n_out = len(cloud), len(result_cloud)
    print(f"{run.input}: {n_in} -> {n_out} points "
          f"(scale {n_out / n_in:.4f}, shortfall {result.shortfall})")
    if run.report:
        report = {
            "input": run.input,
            "output": run.output,
            "n_in": n_in,
            "n_out": n_out,
            "scale_requested": run.scale,
            "scale_achieved": n_out / n_in,
            "new_requested": result.requested,
            "new_achieved": result.achieved,
            "shortfall": result.shortfall,
            "grid": result.grid,
            "config": {k: v for k, v in vars(run).items()},
            "blocks": [b.as_dict() for b in result.blocks],
        }
        if run.timing:
            report["wall_time_s"] = wall
        out.text(run.report, _json(report))
    return 0


def cmd_evaluate(run: EvaluateRun, out: _Outputs) -> int:
    if not run.test or not run.reference:
        raise ConfigError("evaluate needs --test and --reference")
    test, ref = read_ply(run.test), read_ply(run.reference)
    # both clouds go into the reference's unit cube
    ref_n, t = normalize_unit_cube(ref)
    test_n = PointCloud(t.forward(test.points), test.normals)
    report = metric_report(test_n, ref_n, run.aggregation, run.normals_k)
    sys.stdout.write(report.to_text())
    if run.report:
        out.text(run.report, report.to_json())
    return 0


def cmd_synth(run: SynthRun, out: _Outputs) -> int:
    if not run.output:
        raise ConfigError("synth needs --output")
    try:
        spec = run.spec()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cloud = generate(spec)
    out.ply(run.output, cloud, run.format, run.precision)
    print(f"wrote {len(cloud)} {spec.shape} points to {run.output}")
    return 0


def cmd_bench(run: BenchRun, out: _Outputs) -> int:
    if not run.manifest or not run.output:
        raise ConfigError("bench needs --manifest and --output")
    manifest = Path(run.manifest)
    entries = parse_manifest(manifest.read_text(encoding="utf-8"), manifest.parent)
    rows, records = run_bench(run, entries)
    out.text(run.output, rows_to_csv(rows))
    if run.report:
        out.text(run.report, _json({"config": vars(run), "rows": records}))
    failed = sum(1 for r in rows if r["status"] != "ok")
    print(f"{len(rows)} rows, {failed} failed")
    return 0


COMMANDS = {
    "upsample": (UpsampleRun, cmd_upsample),
    "evaluate": (EvaluateRun, cmd_evaluate),
    "synth": (SynthRun, cmd_synth),
    "bench": (BenchRun, cmd_bench),
}


def _add_model_flags(p):
    p.add_argument("--grid", help="blocks per axis, or 'auto' (default)")
    p.add_argument("--kmax", type=int, help="frequencies per axis in the dictionary (8)")
    p.add_argument("--max-iter", type=int, help="model iterations per block (100)")
    p.add_argument("--gamma", type=float, help="coefficient damping in (0, 1] (0.5)")
    p.add_argument("--rho", type=float, help="spatial weight decay in (0, 1) (0.7)")
    p.add_argument("--rho-f", type=float, help="spectral weight decay in (0, 1] (0.9)")
    p.add_argument("--stop-eps", type=float, help="relative energy floor (1e-10)")
    p.add_argument("--min-block-points", type=int, help="smallest block that gets new points (3)")
    p.add_argument("--clamp-margin", type=float,
                   help="allowed overshoot of new heights, fraction of block range (0.5)")


def _add_ply_flags(p):
    p.add_argument("--format", choices=("ascii", "binary-le"))
    p.add_argument("--precision", type=int, choices=(32, 64))


def _add_metric_flags(p):
    p.add_argument("--aggregation", choices=AGGREGATIONS)
    p.add_argument("--normals-k", type=int, help="neighbours for normal estimation (16)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcupsample",
        description="Point cloud geometry upsampling with local frequency models.",
        argument_default=argparse.SUPPRESS,
    )
    parser.add_argument("-v", "--verbose", action="store_true", default=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help):
        p = sub.add_parser(name, help=help, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="key = value file; explicit flags override it")
        p.add_argument("--save-config", help="write the effective configuration here")
        return p

    p = add("upsample", "upsample a PLY point cloud")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--report", help="JSON run report path")
    p.add_argument("--scale", type=float, help="output/input point ratio, > 1 (2)")
    p.add_argument("--timing", action="store_true", help="include wall time in the report")
    _add_model_flags(p)
    _add_ply_flags(p)

    p = add("evaluate", "P2Point / P2Plane distortion of a test cloud against a reference")
    p.add_argument("--test")
    p.add_argument("--reference")
    p.add_argument("--report", help="JSON metric report path")
    _add_metric_flags(p)

    p = add("synth", "sample an analytic surface")
    p.add_argument("--shape", choices=SHAPES)
    p.add_argument("--n-points", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--height", type=float, help="plane height")
    p.add_argument("--offset", type=float, help="cosine surface mean height")
    p.add_argument("--amplitude", type=float, help="cosine surface amplitude")
    p.add_argument("--frequency", type=float, help="cosine surface frequency")
    p.add_argument("--radius", type=float, help="sphere radius")
    p.add_argument("--cap-angle", type=float, help="sphere cap half-angle, degrees")
    p.add_argument("--output")
    _add_ply_flags(p)

    p = add("bench", "downsample, upsample back and score every manifest entry")
    p.add_argument("--manifest")
    p.add_argument("--output", help="CSV table path")
    p.add_argument("--report", help="JSON sweep record path")
    p.add_argument("--sweep", action="append",
                   help="parameter sweep, e.g. gamma=0.25,0.5,1.0 (repeatable)")
    _add_model_flags(p)
    _add_metric_flags(p)
    return parser


def resolve_run(args: argparse.Namespace):
    cls, _ = COMMANDS[args.command]
    flags = {k: v for k, v in vars(args).items()
             if k not in ("command", "config", "save_config", "verbose")}
    if "sweep" in flags:
        flags["sweep"] = ";".join(flags["sweep"])
    run = cfgmod.load(args.config, cls) if getattr(args, "config", None) else cls()
    return cfgmod.replace(run, **flags)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    _, handler = COMMANDS[args.command]
    out = _Outputs()
    try:
        run = resolve_run(args)
        if getattr(args, "save_config", None):
            out.text(args.save_config, cfgmod.dumps(run))
        return handler(run, out)
    except ConfigError as exc:
        out.rollback()
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        out.rollback()
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
