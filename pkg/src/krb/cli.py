"""Command-line entry point ``krb``.

Exit codes: 0 on success, 1 on a runtime failure, 2 on an invalid
configuration. Failures print one line ``error=<Kind> message=<text>`` to
standard error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from krb.config import DEFAULT_WORKERS, LOG_LEVEL
from krb.exceptions import ConfigError, KrbError
from krb.experiments import (
    TIERS,
    ExperimentConfig,
    build_model,
    make_preconditioner,
    make_weight,
    preset,
    preset_names,
    run_experiment,
)
from krb.online import online_sweep
from krb.persistence import export_model, import_model
from krb.problems.io import export_bundle
from krb.problems.registry import generate, generators, make_theta_map
from krb.report import plot_errors
from krb.utils import parse_grid

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _cmd_gen(args: argparse.Namespace) -> int:
    bundle = generate(args.problem, args.n)
    export_bundle(bundle, args.out)
    print(f"problem={bundle.name} n={bundle.n} J={bundle.op.J} out={args.out}")
    return EXIT_OK


def _cmd_offline(args: argparse.Namespace) -> int:
    config = ExperimentConfig.from_json(args.config)
    L = args.instances if args.instances is not None else max(config.instance_counts)
    m = args.m if args.m is not None else config.m[0]
    bundle = generate(config.problem, config.n_cells)
    B = make_preconditioner(config, bundle)
    M = make_weight(config, bundle)
    model = build_model(config, bundle, B, M, L, m)
    out = Path(args.out) if args.out else Path(config.output_dir) / "model"
    export_model(model, out)
    print(f"method={config.method} variant={model.variant} dim={model.m} out={out}")
    return EXIT_OK


def _cmd_online(args: argparse.Namespace) -> int:
    model = import_model(args.model)
    points = parse_grid(args.grid)
    if not points:
        raise ConfigError(f"parameter grid {args.grid!r} is empty")
    if args.theta_map:
        theta_map = make_theta_map(args.theta_map)
        thetas = [theta_map(mu) for mu in points]
    else:
        thetas = [list(mu) for mu in points]
    sweep = online_sweep(model, thetas, workers=args.workers)

    d = len(points[0])
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow([*(f"mu_{i + 1}" for i in range(d)), "residual_norm", "online_us", "status"])
    for mu, point in zip(points, sweep, strict=True):
        residual = "nan" if point.residual_norm is None else f"{point.residual_norm:.10e}"
        status = "ok" if point.ok else type(point.error).__name__
        writer.writerow([*(f"{v:.10g}" for v in mu), residual, f"{point.online_us:.3f}", status])
    return EXIT_OK


def _cmd_experiment(args: argparse.Namespace) -> int:
    overrides: dict[str, object] = {"workers": args.workers, "deterministic": args.deterministic}
    if args.m:
        overrides["m"] = args.m
    config = preset(args.preset, args.tier, **overrides)
    out = args.out or config.output_dir
    result = run_experiment(config, out)
    for row in result.summary:
        print(f"L={row['L']} m={row['m']} dim={row['dim']} sup_error={row['sup_error']:.4e}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    for path in plot_errors(args.directory):
        print(path)
    return EXIT_OK


def _cmd_presets(args: argparse.Namespace) -> int:
    for name in preset_names():
        tiers = ", ".join(f"{tier}={n}" for tier, n in TIERS[name].items())
        print(f"{name} ({tiers} cells per side)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="krb", description="Reduced Krylov basis methods")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="generate a problem bundle")
    gen.add_argument("problem", choices=sorted(generators()))
    gen.add_argument("--n", type=int, required=True, help="cells per side")
    gen.add_argument("--out", required=True)
    gen.set_defaults(handler=_cmd_gen)

    offline = commands.add_parser("offline", help="build and export a reduced model")
    offline.add_argument("--config", required=True, help="experiment configuration (JSON)")
    offline.add_argument("--m", type=int, help="Krylov steps (default: first configured m)")
    offline.add_argument("--instances", type=int, help="instance count L (default: largest)")
    offline.add_argument("--out", help="model directory (default: <output_dir>/model)")
    offline.set_defaults(handler=_cmd_offline)

    online = commands.add_parser("online", help="sweep an exported model over a grid")
    online.add_argument("--model", required=True)
    online.add_argument("--grid", required=True, help="e.g. '(1:0.4:3)^2'")
    online.add_argument(
        "--theta-map",
        help="map grid points through this coefficient map (default: points are theta)",
    )
    online.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    online.set_defaults(handler=_cmd_online)

    experiment = commands.add_parser("experiment", help="run a preset experiment")
    experiment.add_argument("preset", help="see 'krb presets'")
    experiment.add_argument("--tier", choices=["s", "m", "l"], default="s")
    experiment.add_argument("--out")
    experiment.add_argument("--m", type=int, nargs="+", help="override the Krylov step counts")
    experiment.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    experiment.add_argument(
        "--deterministic",
        action="store_true",
        help="write zero timings so reruns are byte-identical",
    )
    experiment.set_defaults(handler=_cmd_experiment)

    report = commands.add_parser("report", help="redraw the SVG figures of a result directory")
    report.add_argument("directory")
    report.set_defaults(handler=_cmd_report)

    presets = commands.add_parser("presets", help="list the preset experiments")
    presets.set_defaults(handler=_cmd_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except ConfigError as e:
        print(f"error={type(e).__name__} message={e}", file=sys.stderr)
        return EXIT_CONFIG
    except (KrbError, OSError) as e:
        logger.debug("command %s failed", args.command, exc_info=True)
        print(f"error={type(e).__name__} message={e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
