"""Command-line driver.

Verbs: ``run`` (execute a scenario and write all outputs), ``validate``
(schema + geometry checks, echo the effective config) and ``list-builtins``.
Exit codes: 0 success, 2 validation error, 3 numerical failure.  Errors are
emitted as one JSON object on stderr.  An unreachable Morozov target is a
success with a warning field in the metrics.

Thread count for BLAS-backed dense algebra comes from ``--threads`` or the
``NFS_THREADS`` environment variable and must be applied before the numeric
stack loads, so all heavy imports in this module are deferred.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def _fail(kind: str, message, code: int):
    payload = {"error": kind}
    if isinstance(message, (list, tuple)):
        payload["violations"] = list(message)
    else:
        payload["message"] = str(message)
    print(json.dumps(payload), file=sys.stderr)
    return code


def _apply_threads(threads):
    if threads is None:
        threads = os.environ.get("NFS_THREADS")
    if threads is None:
        return
    try:
        n = max(1, int(threads))
    except ValueError:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nfsynth",
        description="Synthesize acoustic sources with controllable near fields.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write its outputs")
    run.add_argument("config", nargs="?", help="path to a scenario JSON config")
    run.add_argument("--builtin", choices=("i", "ii", "iii"), help="use a built-in scenario")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument(
        "--format", choices=("bin", "csv", "both"), default="bin", dest="fmt",
        help="grid payload format (default: bin)",
    )
    run.add_argument("--threads", type=int, default=None, help="BLAS thread count")
    run.add_argument("--delta", type=float, default=None, help="override the Morozov target")
    run.add_argument(
        "--alpha-range", type=float, nargs=2, metavar=("LO", "HI"), default=None,
        help="override the regularization search bracket",
    )

    val = sub.add_parser("validate", help="validate a scenario config")
    val.add_argument("config", help="path to a scenario JSON config")

    sub.add_parser("list-builtins", help="list the built-in scenarios")
    return parser


def _load_run_config(args):
    from .configio import load_config
    from .errors import ConfigurationError
    from .scenario import builtin_scenario

    if (args.config is None) == (args.builtin is None):
        raise ConfigurationError("pass exactly one of a config path or --builtin")
    if args.builtin:
        config = builtin_scenario(args.builtin)
    else:
        config = load_config(args.config)
    overrides = {}
    if args.delta is not None:
        overrides["delta"] = args.delta
    if args.alpha_range is not None:
        overrides["alpha_range"] = tuple(args.alpha_range)
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    return config


def cmd_run(args) -> int:
    from .errors import ConfigurationError, NfsynthError

    try:
        config = _load_run_config(args)
    except ConfigurationError as exc:
        return _fail("validation", str(exc), 2)

    from . import gridio
    from .configio import save_config
    from .scenario import run_scenario, scenario_hash, validate_scenario

    violations = validate_scenario(config)
    if violations:
        return _fail("validation", violations, 2)

    try:
        result = run_scenario(config)
    except NfsynthError as exc:
        return _fail("numerical", str(exc), 3)
    except Exception as exc:  # LinAlgError and friends
        return _fail("numerical", f"{type(exc).__name__}: {exc}", 3)

    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    digest = scenario_hash(config)
    save_config(os.path.join(out_dir, "config.json"), config)
    gridio.write_metrics(os.path.join(out_dir, "metrics.json"), result.metrics)
    gridio.write_density(os.path.join(out_dir, "density.json"), result.density)
    for grid in result.grids.values():
        gridio.write_grid(out_dir, grid, digest, args.fmt)
    for frames in result.frames.values():
        gridio.write_frames(out_dir, frames, digest, args.fmt)
    if result.traces is not None:
        gridio.write_traces(os.path.join(out_dir, "traces.csv"), result.traces)
    if result.metrics.far_field_curve is not None:
        gridio.write_far_field_csv(
            os.path.join(out_dir, "far_field.csv"), result.metrics.far_field_curve
        )
    if result.metrics.morozov_converged is False:
        print(
            json.dumps({"warning": "morozov target unreachable", "alpha": result.metrics.alpha}),
            file=sys.stderr,
        )
    return 0


def cmd_validate(args) -> int:
    from .configio import config_to_dict, load_config
    from .errors import ConfigurationError
    from .inverse import mu_for_region
    from .scenario import validate_scenario

    try:
        config = load_config(args.config)
    except ConfigurationError as exc:
        return _fail("validation", str(exc), 2)
    violations = validate_scenario(config)
    if violations:
        return _fail("validation", violations, 2)
    effective = config_to_dict(config)
    effective["mu"] = mu_for_region(config.d2)
    print(json.dumps(effective, indent=2))
    return 0


def cmd_list_builtins(_args) -> int:
    from .configio import config_to_dict
    from .inverse import mu_for_region
    from .scenario import builtin_scenarios

    listing = []
    for config in builtin_scenarios():
        doc = config_to_dict(config)
        listing.append(
            {
                "case": config.case,
                "name": config.name,
                "k": config.ctx.k,
                "max_degree": config.max_degree,
                "delta": config.delta,
                "mu": mu_for_region(config.d2),
                "target": doc["target"],
            }
        )
    print(json.dumps(listing, indent=2))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _apply_threads(getattr(args, "threads", None))
    if args.command == "run":
        return cmd_run(args)
    if args.command == "validate":
        return cmd_validate(args)
    return cmd_list_builtins(args)


if __name__ == "__main__":
    sys.exit(main())
