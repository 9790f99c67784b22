"""Command-line experiment runner with CSV/JSON table output.

Subcommands:

* ``run``      one table row per (matrix, function) pair, lanczos or power
* ``triplets`` fixed-vs-relaxed comparison of the leading singular values
* ``power``    shortcut for ``run --method power``
* ``expbound`` Hermitian-part upper bound for the exponential norm

Matrix tokens name a generator plus options, e.g. ``A2``, ``A2:n=400``,
``A1:n=1000:seed=7``, ``file:path=m.mtx:shift=10``.  Sigma-like columns are
stored pre-rounded to 6 significant digits so that emitting and re-parsing
a table reproduces it exactly; empty cells stand for unavailable values.
"""

import argparse
import csv
import io
import json
import math
import sys

from . import baselines, operators, outer
from .inner import InnerConfig
from .functions import FUNCTION_IDS, get_function
from .operators import OperatorError

__all__ = [
    "RUN_COLUMNS",
    "TRIPLET_COLUMNS",
    "EXPBOUND_COLUMNS",
    "round_sig",
    "emit_csv",
    "parse_csv",
    "emit_json",
    "parse_json",
    "run_experiment",
    "run_multi_triplet",
    "main",
]

RUN_COLUMNS = ("matrix", "function", "sigma", "rel_gap_second", "outer",
               "inner_total", "inner_avg", "time_s", "converged", "gap_bound")
TRIPLET_COLUMNS = ("matrix", "function", "index", "sigma_fixed",
                   "sigma_relaxed", "rel_discrepancy")
EXPBOUND_COLUMNS = ("matrix", "sign", "bound", "lambda_max", "iterations",
                    "converged")

_INT_COLUMNS = {"outer", "inner_total", "index", "iterations", "sign"}
_BOOL_COLUMNS = {"converged"}
_STR_COLUMNS = {"matrix", "function"}

_INNER_METHODS = {"krylov": "standard-krylov", "eksm": "extended-krylov"}


def round_sig(x, digits=6):
    """Round to ``digits`` significant decimal digits (None/nan pass through)."""
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x) or x == 0.0:
        return x
    scale = digits - 1 - math.floor(math.log10(abs(x)))
    return round(x, scale)


def _clean(x):
    # non-finite table values are emitted as empty cells / JSON null
    if x is None:
        return None
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _cell_to_str(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _cell_from_str(column, text):
    if text == "":
        return None
    if column in _STR_COLUMNS:
        return text
    if column in _BOOL_COLUMNS:
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean cell {text!r} in column {column}")
        return text == "true"
    if column in _INT_COLUMNS:
        return int(text)
    return float(text)


def emit_csv(rows, columns=RUN_COLUMNS):
    """Serialize rows (dicts) to CSV text with a header line."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell_to_str(row.get(c)) for c in columns])
    return buf.getvalue()


def parse_csv(text):
    """Inverse of emit_csv: typed row dicts keyed by the header line."""
    reader = csv.reader(io.StringIO(text))
    try:
        columns = next(reader)
    except StopIteration:
        raise ValueError("empty CSV input") from None
    rows = []
    for raw in reader:
        if not raw:
            continue
        if len(raw) != len(columns):
            raise ValueError(f"row width {len(raw)} != header width {len(columns)}")
        rows.append({c: _cell_from_str(c, v) for c, v in zip(columns, raw)})
    return rows


def emit_json(rows, columns=RUN_COLUMNS):
    """JSON mirror of the CSV table: a list of objects, same keys and values."""
    payload = [{c: row.get(c) for c in columns} for row in rows]
    return json.dumps(payload, indent=2) + "\n"


def parse_json(text):
    rows = json.loads(text)
    if not isinstance(rows, list):
        raise ValueError("expected a JSON array of row objects")
    return rows


def _report_to_row(report):
    return {
        "matrix": report.matrix_label,
        "function": report.function_label,
        "sigma": _clean(round_sig(report.sigma)),
        "rel_gap_second": _clean(round_sig(report.rel_gap_second)),
        "outer": report.outer_iters,
        "inner_total": report.inner_total,
        "inner_avg": report.inner_avg,
        "time_s": report.wall_time_s,
        "converged": bool(report.converged),
        "gap_bound": _clean(round_sig(report.gap_bound)),
    }


class ExperimentConfig:
    """Validated run configuration shared by the table subcommands."""

    def __init__(self, matrices, functions, method="lanczos", inner="krylov",
                 eps_out=1e-4, m_max=500, relax=False, seed=0, num_triplets=1,
                 eps_inner=None, max_inner_dim=300, default_n=10000):
        if method not in ("lanczos", "power"):
            raise ValueError(f"method must be lanczos or power, got {method!r}")
        if inner not in _INNER_METHODS:
            raise ValueError(f"inner must be one of {sorted(_INNER_METHODS)}")
        unknown = [f for f in functions if f not in FUNCTION_IDS]
        if unknown:
            raise ValueError(f"unknown function id(s): {', '.join(unknown)}")
        self.matrices = list(matrices)
        self.functions = list(functions)
        self.method = method
        self.inner = inner
        self.eps_out = float(eps_out)
        self.m_max = int(m_max)
        self.relax = bool(relax)
        self.seed = int(seed)
        self.num_triplets = int(num_triplets)
        self.eps_inner = None if eps_inner is None else float(eps_inner)
        self.max_inner_dim = int(max_inner_dim)
        self.default_n = int(default_n)

    @property
    def inner_method(self):
        return _INNER_METHODS[self.inner]


def _build_operators(config, skips):
    """Resolve matrix tokens; unreadable input files become skips."""
    resolved = []
    for token in config.matrices:
        spec = operators.parse_matrix_token(
            token, default_n=config.default_n, default_seed=config.seed)
        try:
            resolved.append((token, operators.build_operator(spec)))
        except (FileNotFoundError, OSError, operators.MatrixMarketError) as exc:
            for fid in config.functions:
                skips.append((token, fid, str(exc)))
    return resolved


def run_experiment(config):
    """One table row per (matrix, function) pair, in config order.

    Returns (rows, skips); a skip is (matrix_token, function_id, reason).
    Unknown tokens or function ids raise instead of skipping.
    """
    skips: list = []
    rows = []
    for token, A in _build_operators(config, skips):
        for fid in config.functions:
            f = get_function(fid)
            if config.method == "power":
                cfg = InnerConfig(
                    eps_inner=(config.eps_inner
                               if config.eps_inner is not None
                               else config.eps_out / 100.0),
                    method=config.inner_method, max_dim=config.max_inner_dim)
                report = baselines.power_method(
                    A, f, config.eps_out, max_iters=config.m_max,
                    inner_cfg=cfg, seed=config.seed, matrix_label=token)
            else:
                policy = outer.InnerPolicy(
                    method=config.inner_method, relax=config.relax,
                    eps_inner=config.eps_inner, max_dim=config.max_inner_dim)
                report = outer.run(
                    A, f, config.eps_out, m_max=config.m_max,
                    inner_policy=policy, num_triplets=config.num_triplets,
                    seed=config.seed, matrix_label=token)
                if report.aborted:
                    print(f"warning: {token}/{fid}: {report.aborted}",
                          file=sys.stderr)
            rows.append(_report_to_row(report))
    return rows, skips


def run_multi_triplet(config):
    """Fixed-vs-relaxed singular value table (one row per triplet index).

    With num_triplets == 1 this degenerates to the plain experiment table.
    Returns (rows, skips, columns).
    """
    if config.num_triplets < 1:
        raise ValueError("num_triplets must be >= 1")
    if config.num_triplets == 1:
        rows, skips = run_experiment(config)
        return rows, skips, RUN_COLUMNS

    skips: list = []
    rows = []
    for token, A in _build_operators(config, skips):
        for fid in config.functions:
            f = get_function(fid)
            reports = {}
            for mode, relax_flag in (("fixed", False), ("relaxed", True)):
                policy = outer.InnerPolicy(
                    method=config.inner_method, relax=relax_flag,
                    eps_inner=config.eps_inner if not relax_flag else None,
                    max_dim=config.max_inner_dim)
                reports[mode] = outer.run(
                    A, f, config.eps_out, m_max=config.m_max,
                    inner_policy=policy, num_triplets=config.num_triplets,
                    seed=config.seed, matrix_label=token)
            for rep in reports.values():
                if rep.aborted:
                    print(f"warning: {token}/{fid}: {rep.aborted}",
                          file=sys.stderr)
            fixed = reports["fixed"].triplets
            relaxed = reports["relaxed"].triplets
            for i in range(config.num_triplets):
                sf = fixed[i].theta if i < len(fixed) else None
                sr = relaxed[i].theta if i < len(relaxed) else None
                disc = (abs(sf - sr) / sf
                        if sf is not None and sr is not None and sf > 0
                        else None)
                rows.append({
                    "matrix": token,
                    "function": fid,
                    "index": i + 1,
                    "sigma_fixed": _clean(round_sig(sf)),
                    "sigma_relaxed": _clean(round_sig(sr)),
                    "rel_discrepancy": _clean(round_sig(disc)),
                })
    return rows, skips, TRIPLET_COLUMNS


def _write_output(text, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit(rows, columns, args):
    if args.format == "json":
        return emit_json(rows, columns)
    return emit_csv(rows, columns)


def _report_skips(skips):
    for token, fid, reason in skips:
        print(f"skipped: {token}/{fid}: {reason}", file=sys.stderr)


def _add_common_flags(p, with_method=False, with_relax=True):
    p.add_argument("--matrix", action="append", required=True,
                   metavar="TOKEN",
                   help="matrix token (repeatable): A1..A5, file:path=...; "
                        "options like A2:n=400")
    p.add_argument("--function", action="append", required=True,
                   choices=sorted(FUNCTION_IDS), help="scalar function id "
                   "(repeatable)")
    if with_method:
        p.add_argument("--method", choices=("lanczos", "power"),
                       default="lanczos", help="outer method")
    p.add_argument("--inner", choices=sorted(_INNER_METHODS), default="krylov",
                   help="inner subspace family")
    p.add_argument("--eps-out", type=float, default=1e-4,
                   help="outer relative tolerance")
    p.add_argument("--m-max", type=int, default=500,
                   help="maximum outer steps")
    if with_relax:
        p.add_argument("--relax", action="store_true",
                       help="relax inner tolerances as the residual shrinks")
    p.add_argument("--eps-inner", type=float, default=None,
                   help="fixed inner tolerance override "
                        "(default: eps-out/m-max; power: eps-out/100)")
    p.add_argument("--max-inner-dim", type=int, default=300,
                   help="inner subspace dimension cap")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the start vector and seeded generators")
    p.add_argument("--triplets", type=int, default=1,
                   help="number of leading triplets to estimate")
    p.add_argument("--n", type=int, default=10000, dest="default_n",
                   help="default matrix size for tokens without n=")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="output format")


def _config_from_args(args, method=None):
    return ExperimentConfig(
        matrices=args.matrix, functions=args.function,
        method=method or getattr(args, "method", "lanczos"),
        inner=args.inner, eps_out=args.eps_out, m_max=args.m_max,
        relax=getattr(args, "relax", False), seed=args.seed,
        num_triplets=args.triplets, eps_inner=args.eps_inner,
        max_inner_dim=args.max_inner_dim, default_n=args.default_n)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="matfunsvd",
        description="Leading singular triplets and 2-norms of matrix "
                    "functions f(A) via inexact bidiagonalization.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one table row per matrix/function")
    _add_common_flags(p_run, with_method=True)

    p_tri = sub.add_parser("triplets",
                           help="fixed vs relaxed leading singular values")
    _add_common_flags(p_tri)

    p_pow = sub.add_parser("power", help="power-iteration baseline rows")
    _add_common_flags(p_pow, with_relax=False)

    p_exp = sub.add_parser("expbound",
                           help="log-norm upper bound for ||exp(+/-A)||")
    p_exp.add_argument("--matrix", action="append", required=True,
                       metavar="TOKEN")
    p_exp.add_argument("--sign", type=int, choices=(1, -1), default=1)
    p_exp.add_argument("--tol", type=float, default=1e-6)
    p_exp.add_argument("--max-iters", type=int, default=400)
    p_exp.add_argument("--seed", type=int, default=0)
    p_exp.add_argument("--n", type=int, default=10000, dest="default_n")
    p_exp.add_argument("--out", default=None)
    p_exp.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _cmd_table(args, method=None, multi=False):
    try:
        config = _config_from_args(args, method=method)
        if multi:
            rows, skips, columns = run_multi_triplet(config)
        else:
            rows, skips = run_experiment(config)
            columns = RUN_COLUMNS
    except (OperatorError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _report_skips(skips)
    _write_output(_emit(rows, columns, args), args.out)
    ok = not skips and all(r.get("converged", True) for r in rows)
    return 0 if ok else 1


def _cmd_expbound(args):
    rows = []
    skips = []
    for token in args.matrix:
        try:
            spec = operators.parse_matrix_token(token, default_n=args.default_n,
                                                default_seed=args.seed)
            A = operators.build_operator(spec)
        except (FileNotFoundError, OSError, operators.MatrixMarketError) as exc:
            skips.append((token, "expbound", str(exc)))
            continue
        except OperatorError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        res = baselines.exp_norm_bound(A, sign=args.sign, tol=args.tol,
                                       max_iters=args.max_iters,
                                       seed=args.seed)
        rows.append({
            "matrix": token,
            "sign": args.sign,
            "bound": _clean(round_sig(res.bound)),
            "lambda_max": _clean(round_sig(res.lambda_max)),
            "iterations": res.iterations,
            "converged": bool(res.converged),
        })
    _report_skips(skips)
    _write_output(_emit(rows, EXPBOUND_COLUMNS, args), args.out)
    ok = not skips and all(r["converged"] for r in rows)
    return 0 if ok else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_table(args)
    if args.command == "triplets":
        return _cmd_table(args, multi=True)
    if args.command == "power":
        return _cmd_table(args, method="power")
    return _cmd_expbound(args)


if __name__ == "__main__":
    sys.exit(main())
