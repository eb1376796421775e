"""``eips-itl`` command-line interface.

Subcommands: ``estimate``, ``kaf``, ``gen-mg`` and ``bench``.  Results go to
``--out`` (or stdout) as CSV or JSON.  ``--config FILE`` supplies any flag as
a JSON object keyed by option name (dashes or underscores); flags given on
the command line win.

Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O error,
3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .data import load_delimited, mackey_glass, normalize, standardize_series, write_series
from .errors import ConfigError, DataError, DegenerateError, NumericalError
from .experiments import (ALGORITHMS, BACKENDS, BENCH_FIELDS, DESCRIPTORS, ESTIMATE_FIELDS, RECORD_FIELDS,
                          BackendSpec, KafConfig, record_dicts, run_bench, run_estimate, run_kaf)

log = logging.getLogger("eips_itl")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p):
    p.add_argument("--config", type=Path, help="JSON file of option defaults")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="eips-itl", description="ITL estimators and kernel adaptive filters with explicit feature maps")
    root.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    root.add_argument("-v", "--verbose", action="store_true")
    sub = root.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("estimate", help="accumulate a descriptor over all feature pairs of a dataset")
    _common(p)
    p.add_argument("--dataset", type=Path)
    p.add_argument("--delimiter", default=None)
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--drop-columns", type=_int_list, default=[], help="0-based columns to drop, e.g. 0,3")
    p.add_argument("--normalize", choices=("global", "column", "none"), default="global")
    p.add_argument("--ddof", type=int, default=0)
    p.add_argument("--descriptor", choices=tuple(DESCRIPTORS), default="cc")
    p.add_argument("--backend", choices=BACKENDS, default="direct")
    p.add_argument("--sigma", type=float, default=1 / math.sqrt(2))
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--map", dest="map_kind", choices=("taylor", "gq", "rff-paired", "rff-shifted"), default="taylor")
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--n-features", type=int, default=None)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--include-setup", action="store_true", help="time feature-map construction too")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("kaf", help="run the Mackey-Glass prediction protocol for one filter")
    _common(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="ntkmcc")
    p.add_argument("--map", dest="map_kind", choices=("taylor", "gq", "rff-paired", "rff-shifted"), default="gq")
    p.add_argument("--degree", type=int, default=8)
    p.add_argument("--n-features", type=int, default=330)
    p.add_argument("--eta", type=float, default=0.4)
    p.add_argument("--sigma", type=float, default=1 / math.sqrt(2))
    p.add_argument("--sigma-c", type=float, default=1 / math.sqrt(2))
    p.add_argument("--window", type=int, default=200)
    p.add_argument("--q-factor", type=float, default=None)
    p.add_argument("--err-degree", type=int, default=4)
    p.add_argument("--n-train", type=int, default=2000)
    p.add_argument("--n-test", type=int, default=200)
    p.add_argument("--eval-every", type=int, default=10)
    p.add_argument("--series-length", type=int, default=5000)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--per-trial", action="store_true", help="write per-trial rows instead of trial means")
    p.set_defaults(func=cmd_kaf)

    p = sub.add_parser("gen-mg", help="write a standardized Mackey-Glass series")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--n-samples", type=int, default=5000)
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--tau", type=float, default=30.0)
    p.add_argument("--n", dest="exponent", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=6.0)
    p.add_argument("--x0", type=float, default=0.9)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--raw", action="store_true", help="skip standardization")
    p.set_defaults(func=cmd_gen_mg)

    p = sub.add_parser("bench", help="time information-potential backends on synthetic data")
    _common(p)
    p.add_argument("--backends", default=",".join(BACKENDS))
    p.add_argument("--sizes", type=_int_list, default=[500, 1000, 2000, 4000])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--sigma", type=float, default=1 / math.sqrt(2))
    p.set_defaults(func=cmd_bench)
    return root


# ---------------------------------------------------------------------------
# output


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def render(rows: list[dict], columns: list[str], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def pretty(rows: list[dict], columns: list[str]) -> str:
    def fmt(v):
        if v is None:
            return "-"
        return f"{v:.6f}" if isinstance(v, float) else str(v)

    cells = [[fmt(r[c]) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def emit(args, rows, columns):
    text = render(rows, columns, args.format)
    if args.out is None:
        sys.stdout.write(text)
        return
    try:
        args.out.write_text(text)
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc}") from exc
    if rows:
        sys.stdout.write(pretty(rows, columns))


# ---------------------------------------------------------------------------
# commands


def cmd_estimate(args) -> int:
    if args.dataset is None:
        raise UsageError("estimate: --dataset is required")
    ds = load_delimited(args.dataset, args.delimiter, args.has_header, args.drop_columns)
    if args.normalize != "none":
        ds = normalize(ds, args.normalize, args.ddof)
    spec = BackendSpec(args.backend, args.sigma, args.epsilon, args.map_kind, args.degree, args.n_features,
                       args.seed)
    row = run_estimate(ds, args.descriptor, spec, args.trials, args.include_setup)
    emit(args, [] if row is None else [row], ESTIMATE_FIELDS)
    return EXIT_OK


def cmd_kaf(args) -> int:
    names = {f.name for f in fields(KafConfig)} - {"mg"}
    cfg = KafConfig(**{k: v for k, v in vars(args).items() if k in names})
    records = run_kaf(cfg, per_trial=args.per_trial)
    emit(args, record_dicts(records), RECORD_FIELDS)
    return EXIT_OK


def cmd_gen_mg(args) -> int:
    if args.out is None:
        raise UsageError("gen-mg: --out is required")
    ts = mackey_glass(args.n_samples, args.beta, args.gamma, args.tau, args.exponent, args.dt, args.x0,
                      args.burn_in)
    if not args.raw:
        ts = standardize_series(ts)
        ts.params["standardized"] = True
    try:
        write_series(ts, args.out)
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc}") from exc
    return EXIT_OK


def cmd_bench(args) -> int:
    backends = [b.strip() for b in args.backends.split(",") if b.strip()]
    for b in backends:
        if b not in BACKENDS:
            raise UsageError(f"bench: unknown backend {b!r}")
    rows = run_bench(backends, args.sizes, args.repeats, args.sigma, args.seed)
    emit(args, rows, BENCH_FIELDS)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def _apply_config(parser, argv):
    """Reparse ``argv`` with defaults taken from the ``--config`` JSON file."""
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if path is None:
        return args
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    defaults = {}
    for key, value in doc.items():
        dest = key.replace("-", "_")
        dest = {"map": "map_kind", "n": "exponent"}.get(dest, dest)
        if dest not in known or dest in ("config", "help"):
            raise UsageError(f"config {path}: unknown option {key!r} for {args.command}")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s")
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateError, NumericalError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
