"""Command-line entry point: ``ckis {direct,indirect,localize,custom,sweep}``.

Exit codes: 0 success, 2 configuration error, 3 numerical degeneracy.
"""

import argparse
import logging
import sys

from .errors import InvalidArgumentError
from .harness import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, RunConfig, manifest_path, run, sweep

log = logging.getLogger("ckis")

EXPERIMENTS = ("direct", "indirect", "localize", "custom")

# flag dest -> (RunConfig field, parser for config-file values)
_FIELDS = {
    "n": ("n_particles", int),
    "epsilon": ("epsilon", float),
    "alpha": ("alpha", float),
    "h": ("bandwidth", float),
    "seed": ("seed", int),
    "batch": ("batch", int),
    "compare_uncompressed": ("compare_uncompressed", lambda s: s.lower() in ("1", "true", "yes")),
    "uncompressed_only": ("uncompressed_only", lambda s: s.lower() in ("1", "true", "yes")),
    "log_base": ("log_base", str),
    "kernel_norm": ("kernel_norm", str),
    "n_measurements": ("n_measurements", int),
    "component": ("component", int),
    "problem": ("problem", str),
    "out": ("output_path", str),
}


def _add_run_flags(p):
    p.add_argument("--config", help="key=value file; explicit flags override it")
    p.add_argument("--n", type=int, help="number of particles")
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--epsilon", type=float, help="constant compression budget")
    budget.add_argument("--alpha", type=float, help="geometric budget ratio, eps_n = alpha**n")
    p.add_argument("--h", type=float, help="kernel bandwidth")
    p.add_argument("--seed", type=int)
    p.add_argument("--batch", type=int, help="compress every BATCH particles (default 1)")
    p.add_argument("--compare-uncompressed", action="store_true", default=None,
                   help="run a paired uncompressed stream on the same draws")
    p.add_argument("--uncompressed-only", action="store_true", default=None,
                   help="run plain streaming IS only")
    p.add_argument("--log-base", choices=("e", "10"), help="log base of the range model (localize)")
    p.add_argument("--kernel-norm", choices=("peak", "density"),
                   help="kernel scaling: unit peak (default) or unit integral")
    p.add_argument("--n-measurements", type=int, help="measurements per sensor (localize)")
    p.add_argument("--component", type=int, choices=(0, 1), help="coordinate traced in the CSV (localize)")
    p.add_argument("--problem", help="custom problem factory, 'module:function'")
    p.add_argument("--out", help="trace CSV path; the manifest is written next to it")


def build_parser():
    parser = argparse.ArgumentParser(prog="ckis", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        _add_run_flags(sub.add_parser(name, help=f"run the {name} experiment"))
    sp = sub.add_parser("sweep", help="replicate an experiment over seeds and a parameter grid")
    sp.add_argument("experiment", choices=EXPERIMENTS)
    _add_run_flags(sp)
    sp.add_argument("--grid", action="append", default=[], metavar="FIELD=V1,V2,...",
                    help="grid axis over a run field, e.g. n_particles=100,1000 (repeatable)")
    sp.add_argument("--replicates", type=int, default=10)
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    return parser


def read_config_file(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise InvalidArgumentError(f"{path}:{lineno}: expected key=value")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def config_from_args(experiment, args):
    overrides = {}
    if args.config:
        by_field = {field: (dest, conv) for dest, (field, conv) in _FIELDS.items()}
        for key, raw in read_config_file(args.config).items():
            if key in _FIELDS:
                field, conv = _FIELDS[key]
            elif key in by_field:
                field, conv = key, by_field[key][1]
            else:
                raise InvalidArgumentError(f"unknown config key {key!r}")
            overrides[field] = conv(raw)
    for dest, (field, _) in _FIELDS.items():
        val = getattr(args, dest, None)
        if val is not None:
            overrides[field] = val
    if args.alpha is not None:
        overrides.pop("epsilon", None)
    elif args.epsilon is not None:
        overrides.pop("alpha", None)
    if overrides.get("alpha") is not None and overrides.get("epsilon") is not None:
        raise InvalidArgumentError("epsilon and alpha are mutually exclusive")
    return RunConfig.for_experiment(experiment, **overrides).validate()


def _parse_grid(items):
    grid = {}
    for item in items:
        key, sep, vals = item.partition("=")
        if not sep:
            raise InvalidArgumentError(f"bad grid spec {item!r}")
        key = key.strip().replace("-", "_")
        key = _FIELDS.get(key, (key,))[0]
        conv = int if key in ("n_particles", "seed", "batch", "n_measurements", "component") else float
        grid[key] = [conv(v) for v in vals.split(",") if v]
    return grid


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    experiment = args.experiment if args.command == "sweep" else args.command
    try:
        config = config_from_args(experiment, args)
        if args.command == "sweep":
            grid = _parse_grid(args.grid)
            rows = sweep(config, grid, args.replicates, jobs=args.jobs, output_path=config.output_path)
            for row in rows:
                print(" ".join(f"{k}={v}" for k, v in row.items()))
            return EXIT_NUMERIC if any(r["failures"] for r in rows) else EXIT_OK
    except (InvalidArgumentError, OSError) as exc:
        print(f"ckis: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = run(config)
    except OSError as exc:
        print(f"ckis: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if result.exit_code == EXIT_CONFIG:
        print(f"ckis: configuration error: {result.error}", file=sys.stderr)
    elif result.exit_code == EXIT_NUMERIC:
        print(f"ckis: numerical degeneracy: {result.error}", file=sys.stderr)
    m = result.manifest
    print(
        f"{experiment}: n={m.get('n_completed')} model_order={m.get('final_model_order')} "
        f"estimate={m.get('final_estimate_compressed')} "
        f"uncompressed={m.get('final_estimate_uncompressed')} reference={m.get('reference_value')}"
    )
    if config.output_path:
        log.info("wrote %s and %s", config.output_path, manifest_path(config.output_path))
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
