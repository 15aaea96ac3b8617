"""Command line: ``wcl verify | trace | render | sweep | report``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage or
configuration errors.  The output directory is taken from ``--out``, else
the ``WCL_OUT`` environment variable, else the ``out`` config key.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import pipeline, verifier
from .pipeline import ConfigError, RunConfig

log = logging.getLogger("wrinkled_cobordism")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _key_value(text: str):
    key, sep, val = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected KEY=VAL, got {text!r}")
    return key.strip(), val.strip()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat 'key = value' config file")
    common.add_argument("--out", help="output directory (overrides WCL_OUT and the config)")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes (0 = all cores)")
    common.add_argument("--tol-override", type=_key_value, action="append", default=[], metavar="KEY=VAL",
                        help="override a tolerance, e.g. lagrangian=1e-6")
    common.add_argument("--set", type=_key_value, action="append", default=[], metavar="KEY=VAL",
                        help="override any config key")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="wcl", description="Trace and certify wrinkled Legendrian cobordisms.")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="run every certificate and write report.txt")
    v.add_argument("--negative-control", action="store_true", help="certify the constructed controls instead")
    sub.add_parser("trace", parents=[common], help="trace the global mesh and write mesh.txt")
    r = sub.add_parser("render", parents=[common], help="write SVG figures")
    r.add_argument("--projection", action="append", help="projection(s) to render (x1z, x2z, ux2)")
    r.add_argument("--t", dest="ts", help="comma-separated slice times ('' for none)")
    s = sub.add_parser("sweep", parents=[common], help="tabulate results across parameter values")
    s.add_argument("parameter", choices=pipeline.SWEEP_PARAMETERS)
    s.add_argument("values", help="comma-separated values")
    rep = sub.add_parser("report", parents=[common], help="summarize an existing report file")
    rep.add_argument("path", type=Path)
    return p


def load_config(args) -> RunConfig:
    over = {}
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        over.update(pipeline.parse_config(text, str(args.config)))
    if os.environ.get("WCL_OUT"):
        over["out"] = os.environ["WCL_OUT"]
    for key, val in args.set:
        if key not in {f for f in RunConfig.__dataclass_fields__}:
            raise ConfigError(f"--set: unknown key {key!r}")
        over[key] = pipeline._parse_value(key, val)
    for key, val in args.tol_override:
        k = pipeline.tolerance_key(key)
        over[k] = pipeline._parse_value(k, val)
    if args.out is not None:
        over["out"] = args.out
    if args.seed is not None:
        over["seed"] = args.seed
    if args.jobs is not None:
        over["jobs"] = args.jobs
    if getattr(args, "negative_control", False):
        over["negative_control"] = True
    if getattr(args, "projection", None):
        over["projections"] = tuple(args.projection)
    if getattr(args, "ts", None) is not None:
        over["render_ts"] = pipeline._parse_value("render_ts", args.ts)
    return pipeline.make_config(over)


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def cmd_verify(cfg: RunConfig) -> int:
    log.info("verifying with %d worker(s)", cfg.workers)
    report = pipeline.run_verify(cfg)
    path = _write(Path(cfg.out), "report.txt", report.to_text())
    for line in report.summary_lines():
        print(line)
    print(f"report written to {path}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_trace(cfg: RunConfig) -> int:
    mesh = pipeline.trace_mesh(cfg)
    path = _write(Path(cfg.out), "mesh.txt", mesh.export())
    frac = verifier.truncation_fraction(mesh)
    print(f"traced {mesh.coords.shape[0] * mesh.coords.shape[1] * mesh.coords.shape[2]} nodes, "
          f"{frac:.2%} of non-core nodes truncated; mesh written to {path}")
    return EXIT_OK if frac <= verifier.MAX_TRUNCATED else EXIT_FAIL


def cmd_render(cfg: RunConfig) -> int:
    figs = pipeline.run_render(cfg)
    for name in sorted(figs):
        _write(Path(cfg.out), name, figs[name])
    print(f"{len(figs)} figures written to {cfg.out}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, parameter: str, values: str) -> int:
    try:
        vals = [float(x) for x in values.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"sweep values must be numbers, got {values!r}") from None
    table = pipeline.run_sweep(cfg, parameter, vals)
    text = table.to_text()
    path = _write(Path(cfg.out), f"sweep_{parameter}.txt", text)
    print(text, end="")
    print(f"table written to {path}")
    return EXIT_OK


def cmd_report(path: Path) -> int:
    try:
        report = verifier.VerificationReport.from_text(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read report {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for line in report.summary_lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args.path)
        cfg = load_config(args)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "trace":
            return cmd_trace(cfg)
        if args.command == "render":
            return cmd_render(cfg)
        return cmd_sweep(cfg, args.parameter, args.values)
    except ConfigError as exc:
        print(f"wcl: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
