"""Command line front-end: ``wienerlab <subcommand> [options]``.

Each run writes into ``--out-dir``:

* ``config.json``: every option that shapes the result.  Feeding it back with
  ``--config`` reproduces all other files byte for byte.
* ``summary.json``: the report of the run.
* ``*.csv``: per-sample data.
* ``plot.gp``: a gnuplot script that draws the CSV data.

Exit status is 0 on success, 2 when the pipeline cannot conclude and 1 on
errors (including a direction-dependent verdict under ``--expect-consistent``).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import InvalidArgumentError, ResourceLimitError, WienerLabError
from .lattice import GrowthFunction, default_schedule
from .measures import (OrthantIndicator, HomogeneousScalar, SquaredModulus, AtomicTransform,
                       constant_symbol, counterexample_kernel, load_measure, load_symbol)
from .projection import load_matrix_symbol, obstruction_check, sphere_samples
from .riesz import (N_GUARD, greedy_sigma, riesz_spec, shell_symbol, check_P1, blowup_certificate, target_polynomial,
                    product_expansion)
from .transference import make_bump, transference_trend
from .wiener import direction_dependence_test, wiener_average_sequence, wiener_theorem_check

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CANNOT_CONCLUDE = 2

# options that never change the content of the outputs
_NOT_ECHOED = {"config", "threads", "out_dir", "func"}

SYMBOL_NAMES = ("orthant", "orthant-sqmod", "counterexample", "counterexample-sqmod", "one",
                "sign1", "component1-sq")


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------

def build_symbol(name: str, d: int):
    """A symbol from the built-in registry, or from a JSON file when ``name`` ends in ``.json``."""
    if name.endswith(".json"):
        return load_symbol(name)
    table = {
        "orthant": lambda: OrthantIndicator.positive(d),
        "orthant-sqmod": lambda: SquaredModulus(OrthantIndicator.positive(d)),
        "counterexample": lambda: counterexample_kernel(d),
        "counterexample-sqmod": lambda: SquaredModulus(counterexample_kernel(d)),
        "one": lambda: constant_symbol(1.0, d),
        "sign1": lambda: HomogeneousScalar(d, "sign", 0),
        "component1-sq": lambda: HomogeneousScalar(d, "component_sq", 0),
    }
    if name not in table:
        raise InvalidArgumentError(f"unknown symbol {name!r}; built-ins are {', '.join(SYMBOL_NAMES)}")
    return table[name]()


def parse_direction(token: str, d: int) -> np.ndarray:
    """``diag``, ``antidiag``, ``e<k>``, ``-e<k>`` or ``ring<K>:<j>`` (j-th of K points on the e1-e2 circle)."""
    token = token.strip()
    if token == "diag":
        return np.ones(d) / math.sqrt(d)
    if token == "antidiag":
        return -np.ones(d) / math.sqrt(d)
    sign = 1.0
    body = token
    if body.startswith("-"):
        sign, body = -1.0, body[1:]
    if body.startswith("e") and body[1:].isdigit():
        k = int(body[1:])
        if not 1 <= k <= d:
            raise InvalidArgumentError(f"direction {token!r} does not exist in dimension {d}")
        w = np.zeros(d)
        w[k - 1] = sign
        return w
    if body.startswith("ring") and ":" in body:
        count, _, idx = body[4:].partition(":")
        if d < 2:
            raise InvalidArgumentError("ring directions need d >= 2")
        ang = 2 * math.pi * int(idx) / int(count)
        w = np.zeros(d)
        w[0], w[1] = sign * math.cos(ang), sign * math.sin(ang)
        return w
    raise InvalidArgumentError(f"cannot parse direction {token!r}")


def parse_directions(text: str, d: int) -> list[np.ndarray]:
    out = []
    for token in text.split(","):
        token = token.strip()
        if token.startswith("ring") and ":" not in token:
            count = int(token[4:])
            out.extend(parse_direction(f"ring{count}:{j}", d) for j in range(count))
        else:
            out.append(parse_direction(token, d))
    return out


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise InvalidArgumentError(f"cannot parse number list {text!r}") from exc


def parse_int_range(text: str) -> list[int]:
    """``"4-12"``, ``"10,100"`` or a mix of both."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(part)])
        except ValueError as exc:
            raise InvalidArgumentError(f"cannot parse integer list {text!r}") from exc
    return out


def _schedule(args, growth):
    if args.ts:
        ts = parse_float_list(args.ts)
        return [(t, float(growth(t))) for t in ts]
    return default_schedule(growth, args.t_min, args.t_max, args.per_decade)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

class Output:
    def __init__(self, out_dir: str):
        self.out_dir = out_dir

    def _path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_text(self, name: str, text: str) -> str:
        path = self._path(name)
        try:
            os.makedirs(self.out_dir, exist_ok=True)
            with open(path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
        return path

    def write_json(self, name: str, data) -> str:
        return self.write_text(name, json.dumps(data, indent=2, sort_keys=True, default=_plain) + "\n")

    def write_csv(self, name: str, header, rows) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return self.write_text(name, buf.getvalue())


def _plain(obj):
    """JSON fallback for numpy scalars and arrays."""
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cx(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


def _plot_script(csv_name: str, xcol: int, ycol: int, xlabel: str, ylabel: str, *, groups=None,
                 logx: bool = True, extra: str = "") -> str:
    lines = ["set datafile separator ','", "set key outside", f"set xlabel '{xlabel}'", f"set ylabel '{ylabel}'"]
    if logx:
        lines.append("set logscale x")
    if extra:
        lines.append(extra)
    if groups:
        parts = [f"'{csv_name}' using {xcol}:(${1}=={i} ? ${ycol} : 1/0) every ::1 with linespoints title '{label}'"
                 for i, label in enumerate(groups)]
        lines.append("plot " + ", \\\n     ".join(parts))
    else:
        lines.append(f"plot '{csv_name}' using {xcol}:{ycol} every ::1 with linespoints notitle")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_average(args, out: Output) -> int:
    growth = GrowthFunction.parse(args.growth)
    sched = _schedule(args, growth)
    mu = None
    if args.measure:
        mu = load_measure(args.measure)
        d = mu.d
        symbol = SquaredModulus(AtomicTransform(mu)) if args.theorem_check else AtomicTransform(mu)
    else:
        if args.theorem_check:
            raise InvalidArgumentError("--theorem-check needs --measure")
        d = args.d
        symbol = build_symbol(args.symbol, d)
    dirs = parse_directions(args.dirs, d)
    labels = [tok for tok in _direction_labels(args.dirs)]
    summary: dict = {"growth": growth.to_dict(), "schedule": [t for t, _ in sched], "norm": args.norm}
    if len(dirs) >= 2:
        verdict = direction_dependence_test(symbol, dirs, growth, sched, tol=args.tol, threads=args.threads,
                                            use=args.use, norm=args.norm)
        estimates = verdict.estimates
        summary.update(verdict.to_dict())
    else:
        estimates = (wiener_average_sequence(symbol, dirs[0], growth, sched, norm=args.norm, threads=args.threads),)
        summary.update({"directions": [list(estimates[0].direction)],
                        "limits": [[estimates[0].extrapolated_limit.real, estimates[0].extrapolated_limit.imag]],
                        "verdict": "single-direction"})
    summary["direction_labels"] = labels
    summary["estimates"] = [{"limit": _cx(e.extrapolated_limit), "last_sample": _cx(e.last_sample),
                             "fit_residual": e.fit_residual} for e in estimates]
    if args.theorem_check:
        reports = [wiener_theorem_check(mu, w, growth, sched, threads=args.threads) for w in dirs]
        summary["theorem_check"] = {
            "sum_abs_sq": reports[0].mass,
            "per_direction": [rep.to_dict() for rep in reports],
            "tolerance": args.tol,
            "pass": all(rep.rel_error <= args.tol for rep in reports),
        }
    rows = []
    for i, e in enumerate(estimates):
        for row in e.rows():
            rows.append([i, *row])
    out.write_csv("samples.csv", ["direction_index", "direction", "t", "r", "count", "re", "im"], rows)
    out.write_text("plot.gp", _plot_script("samples.csv", 3, 6, "t", "Re average", groups=labels))
    out.write_json("summary.json", summary)
    print(json.dumps({"verdict": summary["verdict"], "limits": summary["limits"]}, sort_keys=True, default=_plain))
    if args.expect_consistent and summary["verdict"] == "direction_dependent":
        print("error: directions disagree although --expect-consistent was given", file=sys.stderr)
        return EXIT_ERROR
    if args.theorem_check and not summary["theorem_check"]["pass"]:
        return EXIT_ERROR
    return EXIT_OK


def _direction_labels(text: str) -> list[str]:
    out = []
    for token in text.split(","):
        token = token.strip()
        if token.startswith("ring") and ":" not in token:
            out.extend(f"{token}:{j}" for j in range(int(token[4:])))
        else:
            out.append(token)
    return out


def cmd_riesz_demo(args, out: Output) -> int:
    Ns = parse_int_range(args.N)
    if not Ns:
        raise InvalidArgumentError("empty N list")
    too_big = [N for N in Ns if N > N_GUARD]
    if too_big and not args.allow_large:
        raise ResourceLimitError(f"N = {too_big[0]} needs 3^N spectrum terms; the guard stops at N = {N_GUARD} "
                                 "(pass --allow-large to lift it)", cap=N_GUARD)
    rows, certs = [], []
    ok = True
    for N in Ns:
        greedy = greedy_sigma(N)
        spec = riesz_spec(N, l=args.l, base=args.base, d=args.d, asymmetric=args.asymmetric)
        m = shell_symbol(spec, width=args.width)
        p1 = check_P1(m, spec, allow_large=args.allow_large)
        cert = blowup_certificate(m, spec, p1, grid_size=args.grid_size, allow_large=args.allow_large)
        entry = {"N": N, "sigma": list(greedy.sigma), "frequencies": [list(map(int, a)) for a in spec.frequencies],
                 "S": _cx(greedy.S), "abs_S": abs(greedy.S), "certificate": cert.to_dict()}
        if args.cross_check:
            T = target_polynomial(m, spec, allow_large=args.allow_large).as_dict()
            oracle = product_expansion(spec, m)
            keys = set(T) | set(oracle)
            diff = max((abs(T.get(k, 0j) - oracle.get(k, 0j)) for k in keys), default=0.0)
            entry["cross_check"] = {"max_abs_difference": diff, "terms": len(keys), "pass": diff <= 1e-12}
            ok = ok and diff <= 1e-12
        ok = ok and bool(cert.passed)
        certs.append(entry)
        rows.append([N, repr(abs(greedy.S)), repr(cert.bound_b), repr(cert.floor), repr(cert.bound_a),
                     repr(cert.grid_sup), int(cert.passed)])
    out.write_csv("table.csv", ["N", "abs_S", "abs_Z0", "floor", "coefficient_gap", "grid_sup", "pass"], rows)
    out.write_text("plot.gp", "set datafile separator ','\nset key top left\nset xlabel 'N'\n"
                              "plot 'table.csv' using 1:3 every ::1 with linespoints title '|Z(0)|', \\\n"
                              "     'table.csv' using 1:4 every ::1 with lines title 'ln N / (2 pi)'\n")
    out.write_json("summary.json", {"runs": certs, "pass": bool(ok)})
    for row in rows:
        print(f"N={row[0]:>3}  |Z(0)|={float(row[2]):.6f}  floor={float(row[3]):.6f}  pass={bool(row[6])}")
    return EXIT_OK if ok else EXIT_ERROR


def cmd_projection_demo(args, out: Output) -> int:
    A = load_matrix_symbol(args.matrix)
    directions = sphere_samples(A.d, args.n_directions, seed=args.seed)
    sched = parse_float_list(args.ts) if args.ts else None
    report = obstruction_check(A, directions, eps_list=parse_float_list(args.eps), tol=args.tol,
                               sched=sched, cap_tol=args.cap_tol, threads=args.threads)
    data = report.to_dict()
    rows = []
    for i, g in enumerate(report.gammas):
        for t, sample in zip(g.ts, g.samples):
            for (a, b), z in np.ndenumerate(sample):
                rows.append([i, g.eps, repr(t), a, b, repr(float(z.real)), repr(float(z.imag))])
    out.write_csv("gamma_samples.csv", ["estimate", "eps", "t", "row", "col", "re", "im"], rows)
    out.write_text("plot.gp", "set datafile separator ','\nset logscale x\nset xlabel 't'\nset ylabel 'Gamma(1,1)'\n"
                              "plot 'gamma_samples.csv' using 3:($4==0 && $5==0 ? $6 : 1/0) every ::1 "
                              "with points title 'entry (1,1)'\n")
    out.write_json("summary.json", data)
    print(json.dumps({"matrix": report.matrix, "verdict": report.verdict,
                      "feasibility_residual": report.feasibility_residual}, sort_keys=True))
    return EXIT_CANNOT_CONCLUDE if report.verdict == "cannot-conclude" else EXIT_OK


def cmd_transfer_check(args, out: Output) -> int:
    growth = GrowthFunction.parse(args.growth)
    sigma = build_symbol(args.symbol, args.d)
    omega = parse_direction(args.dir, sigma.d)
    trend = transference_trend(sigma, omega, growth, parse_float_list(args.ts), args.resolution,
                               bump=make_bump(args.bump), threads=args.threads)
    rows = [[repr(r.t), repr(r.radius), repr(r.lattice_avg.real), repr(r.continuous_avg.real), repr(r.residual)]
            for r in trend.reports]
    out.write_csv("trend.csv", ["t", "r", "lattice_avg", "continuous_avg", "residual"], rows)
    out.write_text("plot.gp", _plot_script("trend.csv", 1, 5, "t", "residual", extra="set logscale y"))
    out.write_json("summary.json", trend.to_dict())
    for r in trend.reports:
        print(f"t={r.t:g}  lattice={r.lattice_avg.real:.8f}  continuous={r.continuous_avg.real:.8f}  "
              f"residual={r.residual:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON file with option values (as written to config.json); "
                                    "explicit flags win over it")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized direction sets")
    p.add_argument("--out-dir", default=None, help="output directory (default: wienerlab-<subcommand>)")
    return p


def _schedule_options(p: argparse.ArgumentParser):
    p.add_argument("--growth", default="sqrt", help="radius growth: 'sqrt' or 'linear:<eps>' with eps in (0, 1/2)")
    p.add_argument("--t-min", type=float, default=1e2, help="first t of the geometric schedule")
    p.add_argument("--t-max", type=float, default=1e5, help="last t of the geometric schedule")
    p.add_argument("--per-decade", type=int, default=8, help="schedule points per factor of ten in t")
    p.add_argument("--ts", default=None, help="explicit comma separated t values (overrides the geometric schedule)")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="wienerlab", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    subs = {}

    p = sub.add_parser("average", parents=[common],
                       help="ball averages of a symbol along rays, with the direction-dependence verdict")
    p.add_argument("--symbol", default="orthant",
                   help=f"built-in symbol ({', '.join(SYMBOL_NAMES)}) or a symbol JSON file")
    p.add_argument("--measure", default=None, help="atomic measure JSON; averages its Fourier transform")
    p.add_argument("--theorem-check", action="store_true",
                   help="with --measure: compare the limit of |mu^|^2 with the sum of squared atom masses")
    p.add_argument("--d", type=int, default=2, help="dimension for built-in symbols")
    p.add_argument("--dirs", default="diag,antidiag",
                   help="comma separated directions: diag, antidiag, e<k>, -e<k>, ring<K> or ring<K>:<j>")
    _schedule_options(p)
    p.add_argument("--norm", choices=("count", "volume"), default="count",
                   help="divide by the number of lattice points or by the ball volume")
    p.add_argument("--tol", type=float, default=0.02,
                   help="largest limit spread still called consistent; relative tolerance for --theorem-check")
    p.add_argument("--use", choices=("limit", "last"), default="limit",
                   help="compare extrapolated limits or the samples at the largest t")
    p.add_argument("--expect-consistent", action="store_true",
                   help="exit with status 1 when the verdict is direction_dependent")
    p.set_defaults(func=cmd_average)
    subs["average"] = p

    p = sub.add_parser("riesz-demo", parents=[common],
                       help="greedy signs, frequency ladder and blow-up certificate for a list of N")
    p.add_argument("--N", default="4-12", help="values of N, e.g. '4-12' or '6,8'")
    p.add_argument("--l", type=int, default=1, help="order l of the ladder condition")
    p.add_argument("--base", type=int, default=100, help="smallest allowed first frequency")
    p.add_argument("--d", type=int, default=2, help="dimension of the frequencies")
    p.add_argument("--width", type=float, default=0.3, help="relative half-width of the shell symbol slabs")
    p.add_argument("--asymmetric", action="store_true", help="use the one-sided comparison polynomial")
    p.add_argument("--grid-size", type=int, default=256, help="torus grid per axis for the sup estimate")
    p.add_argument("--cross-check", action="store_true",
                   help="compare the spectrum with a direct expansion of the products")
    p.add_argument("--allow-large", action="store_true", help="lift the guard on N (3^N terms)")
    p.set_defaults(func=cmd_riesz_demo)
    subs["riesz-demo"] = p

    p = sub.add_parser("projection-demo", parents=[common],
                       help="directional Gamma estimates and the feasibility test for a matrix symbol")
    p.add_argument("--matrix", default="curl2",
                   help="curl2, curl3_completed, gradient_<d>, diag_omega1, identity[_<d>] or a JSON file")
    p.add_argument("--eps", default="0.05", help="comma separated radii ratios eps for the Gamma estimates")
    p.add_argument("--ts", default=None, help="comma separated t values (default depends on the dimension)")
    p.add_argument("--tol", type=float, default=0.1, help="feasibility residual above which the verdict is obstructed")
    p.add_argument("--cap-tol", type=float, default=1e-8,
                   help="smallest singular value below which A(omega) counts as non-invertible")
    p.add_argument("--n-directions", type=int, default=128, help="number of sampled directions on the sphere")
    p.set_defaults(func=cmd_projection_demo)
    subs["projection-demo"] = p

    p = sub.add_parser("transfer-check", parents=[common],
                       help="continuous average of the bump extension against the scaled lattice average")
    p.add_argument("--symbol", default="orthant",
                   help=f"built-in symbol ({', '.join(SYMBOL_NAMES)}) or a symbol JSON file")
    p.add_argument("--d", type=int, default=2, help="dimension for built-in symbols")
    p.add_argument("--dir", default="e1", help="direction of the ray (same names as for average)")
    p.add_argument("--growth", default="sqrt", help="radius growth: 'sqrt' or 'linear:<eps>'")
    p.add_argument("--ts", default="1e3,1e4", help="comma separated t values")
    p.add_argument("--resolution", type=int, default=16, help="quadrature points per unit length (at least 8)")
    p.add_argument("--bump", choices=("exp", "quintic"), default="exp", help="smooth step used for the bump")
    p.set_defaults(func=cmd_transfer_check)
    subs["transfer-check"] = p
    return parser, subs


def _resolve(argv) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc.strerror or exc}") from exc
        if cfg.get("command", args.command) != args.command:
            raise InvalidArgumentError(f"config {args.config} is for {cfg['command']!r}, not {args.command!r}")
        cfg.pop("command", None)
        known = {a.dest for a in subs[args.command]._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise InvalidArgumentError(f"config {args.config} has unknown keys: {', '.join(unknown)}")
        subs[args.command].set_defaults(**{k: v for k, v in cfg.items() if k not in _NOT_ECHOED})
        args = parser.parse_args(argv)
    if args.threads < 1:
        raise InvalidArgumentError("--threads must be at least 1")
    if args.out_dir is None:
        args.out_dir = f"wienerlab-{args.command}"
    return args


def config_echo(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}


def main(argv=None) -> int:
    try:
        args = _resolve(argv)
        out = Output(args.out_dir)
        out.write_json("config.json", config_echo(args))
        return args.func(args, out)
    except (WienerLabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
