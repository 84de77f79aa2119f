"""Command line: ``besovlab verify <suite> --config FILE`` and friends.

Exit status: 0 when every selected suite passes, 1 when a suite fails or hits
a numerical error, 2 on configuration errors. Library imports are deferred
until after ``--threads`` has been applied to the BLAS environment.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import platform
import sys
from pathlib import Path

SCHEMA_VERSION = "1.0"
ALL_SUITES = ("decay", "heat", "partition", "retraction", "kfunc", "realinterp",
              "complexinterp", "maximal", "kato")
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

CONVENTIONS = {
    "kernel_density": "K(x, y) is divided by the node weight so that (phi(L) f)(x) = sum_y weight K(x, y) f(y); "
                      "constants are then comparable across grid resolutions",
    "non_finite_numbers": "encoded as the strings 'inf', '-inf' and 'nan'",
    "kato": "single-radius discrete surrogate; reports values, cannot certify class membership",
    "determinism": "identical config and seed reproduce every field except timestamp and environment",
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "besovlab report",
    "type": "object",
    "required": ["schema_version", "timestamp", "command", "config", "seed", "suites", "passed",
                 "environment", "conventions"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "timestamp": {"type": "string", "description": "UTC, ISO 8601"},
        "command": {"type": "string"},
        "config_path": {"type": ["string", "null"]},
        "config": {"type": "object", "description": "validated config with every default filled in"},
        "seed": {"type": "integer"},
        "operator_fingerprint": {"type": ["string", "null"],
                                 "description": "sha256 of operator kind, grid and matrix entries"},
        "suites": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["passed", "seed", "results"],
                "properties": {
                    "passed": {"type": "boolean"},
                    "seed": {"type": "integer"},
                    "fingerprint": {"type": ["string", "null"]},
                    "budgets": {"type": "object", "description": "suite parameters as configured"},
                    "results": {"type": "object"},
                    "error": {"type": "string"},
                    "tables": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "passed": {"type": "boolean"},
        "environment": {"type": "object"},
        "conventions": {"type": "object"},
    },
}


def _clean(value):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    import numpy as np

    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def _format(value) -> str:
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_format(v) for v in row])


def environment(threads) -> dict:
    import numpy
    import scipy

    from . import __version__

    return {"python": platform.python_version(), "platform": platform.platform(),
            "numpy": numpy.__version__, "scipy": scipy.__version__, "besovlab": __version__,
            "threads": threads}


def _base_report(command: str, cfg, threads) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "command": command,
        "config_path": cfg.path if cfg is not None else None,
        "config": cfg.data if cfg is not None else {},
        "seed": cfg.seed if cfg is not None else None,
        "operator_fingerprint": None,
        "suites": {},
        "passed": True,
        "environment": environment(threads),
        "conventions": CONVENTIONS,
    }


def _emit(report: dict, out: Path, name: str = "report.json") -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")
    return path


def _load(args):
    from .config import load_config

    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.data["seed"] = int(args.seed)
    return cfg


def cmd_verify(args) -> int:
    from .errors import BesovLabError
    from .suites import RUNNERS, Context, preflight

    cfg = _load(args)
    names = list(dict.fromkeys(args.suites))
    if names == ["all"]:
        names = cfg.selected or list(ALL_SUITES)
    for name in names:
        if name not in RUNNERS:
            raise _usage(f"unknown suite {name!r}; choose from {', '.join(ALL_SUITES)} or 'all'")
    preflight(cfg, names)
    ctx = Context(cfg)
    out = Path(args.out)
    report = _base_report("verify " + " ".join(names), cfg, args.threads)
    status = 0
    for name in names:
        entry = {"seed": cfg.seed, "budgets": cfg.suite(name)}
        try:
            result = RUNNERS[name](ctx)
        except BesovLabError as exc:
            from .errors import ConfigurationError

            if isinstance(exc, ConfigurationError):
                raise
            entry.update(passed=False, results={}, error=f"{type(exc).__name__}: {exc}")
            print(f"suite {name}: {type(exc).__name__}: {exc}", file=sys.stderr)
            report["suites"][name] = entry
            status = 1
            continue
        entry.update(passed=bool(result.passed), fingerprint=result.fingerprint, results=result.results)
        if result.fingerprint and report["operator_fingerprint"] is None:
            report["operator_fingerprint"] = result.fingerprint
        if result.tables:
            out.mkdir(parents=True, exist_ok=True)
            for fname, (header, rows) in result.tables.items():
                write_csv(out / fname, header, rows)
            entry["tables"] = sorted(result.tables)
        report["suites"][name] = entry
        print(f"{name}: {'PASS' if result.passed else 'FAIL'}")
        if not result.passed:
            status = 1
    report["passed"] = status == 0
    path = _emit(report, out)
    print(f"report written to {path}")
    return status


def cmd_build_operator(args) -> int:
    from .suites import Context, preflight

    cfg = _load(args)
    preflight(cfg, ["build-operator"])
    ctx = Context(cfg)
    op = ctx.operator()
    dec = ctx.decomposition()
    sys_ = ctx.system()
    lo, hi = op.spectral_bounds
    results = {
        "kind": op.kind, "grid": op.grid.describe(), "n_nodes": op.grid.n_nodes, "nnz": int(op.matrix.nnz),
        "complex": op.is_complex, "hermiticity_error": op.hermiticity_error(),
        "spectral_bounds": [lo, hi], "lowest_eigenvalues": dec.eigenvalues[:8].tolist(),
        "J_max": sys_.J_max, "cache_dir": cfg.cache_dir,
    }
    report = _base_report("build-operator", cfg, args.threads)
    report["operator_fingerprint"] = op.fingerprint
    report["suites"]["build-operator"] = {"passed": True, "seed": cfg.seed, "fingerprint": op.fingerprint,
                                          "results": results}
    path = _emit(report, Path(args.out))
    print(f"operator {op.fingerprint} ({op.kind}, {op.grid.n_nodes} nodes); report written to {path}")
    return 0


def cmd_cache(args) -> int:
    from .calculus import CACHE_ENV, list_cache, purge_cache

    cache_dir = args.cache_dir
    if cache_dir is None and args.config is not None:
        cache_dir = _load(args).cache_dir
    cache_dir = cache_dir or os.environ.get(CACHE_ENV)
    if not cache_dir:
        raise _usage(f"no cache directory: pass --cache-dir, set cache_dir in the config or {CACHE_ENV}")
    try:
        if args.action == "purge":
            n = purge_cache(cache_dir)
            print(f"removed {n} cached decomposition(s) from {cache_dir}")
            return 0
        entries = list_cache(cache_dir)
    except OSError as exc:
        print(f"error: cache {cache_dir}: {exc}", file=sys.stderr)
        return 1
    print("fingerprint,m,complex,bytes")
    for e in entries:
        print(f"{e['fingerprint']},{e['m']},{str(e['complex']).lower()},{e['bytes']}")
    return 0


def cmd_report_schema(args) -> int:
    text = json.dumps(REPORT_SCHEMA, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.schema.json").write_text(text)
    else:
        sys.stdout.write(text)
    return 0


class _UsageError(Exception):
    pass


def _usage(message: str) -> _UsageError:
    return _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="besovlab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config (YAML or JSON)")
    common.add_argument("--out", metavar="DIR", default="besovlab-out", help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, help="BLAS/OpenMP thread count")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run verification suites")
    v.add_argument("suites", nargs="+", metavar="SUITE", help=f"one or more of {', '.join(ALL_SUITES)}, or 'all'")
    v.set_defaults(func=cmd_verify, needs_config=True)

    b = sub.add_parser("build-operator", parents=[common], help="assemble and decompose the configured operator")
    b.set_defaults(func=cmd_build_operator, needs_config=True)

    c = sub.add_parser("cache", parents=[common], help="inspect or clear the decomposition cache")
    c.add_argument("action", choices=("list", "purge"))
    c.add_argument("--cache-dir", metavar="DIR")
    c.set_defaults(func=cmd_cache, needs_config=False)

    r = sub.add_parser("report-schema", help="print the JSON schema of reports")
    r.add_argument("--out", metavar="DIR")
    r.set_defaults(func=cmd_report_schema, needs_config=False, threads=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if getattr(args, "threads", None) is not None:
        if args.threads < 1:
            print("error: --threads must be at least 1", file=sys.stderr)
            return 2
        for var in THREAD_VARS:
            os.environ[var] = str(args.threads)
    if args.needs_config and not args.config:
        print("error: --config is required", file=sys.stderr)
        return 2

    from .errors import BesovLabError, ConfigurationError

    try:
        return args.func(args)
    except ConfigurationError as exc:
        where = f"{args.config}: " if getattr(args, "config", None) else ""
        print(f"configuration error: {where}{exc}", file=sys.stderr)
        return 2
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BesovLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
