"""Command-line front end.

Every subcommand writes a report whose first line (CSV) or ``config`` key
(JSON) records the full run configuration.  ``dslab --config REPORT`` reruns
a configuration; the regenerated report is byte-identical to the original.
Exit status: 0 on success, 1 on computational errors, 2 on usage errors, with
a JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import mpmath

from . import __version__
from .approx import (
    ApproxFunction,
    constant,
    ds_chain_family,
    equal_weight_prime_family,
    khintchine_family,
    multiplicative_psi,
    parse_psi_expression,
    restricted_denominators,
    series_sweep,
)
from .correlation import (
    chung_erdos_check,
    gcd_sum,
    overlap_collapse_report,
    overlap_grid,
    quasi_independence_ratio,
    variance_sum,
)
from .errors import DomainError, PrecisionError, UnsupportedInputError
from .gcdgraph import (
    AUDIT_HEADER,
    WeightedSupport,
    anatomy_count,
    anatomy_count_bruteforce,
    build_edges,
    compress,
    divisor_anatomy_sum,
    divisor_anatomy_sum_bruteforce,
    main_theorem_report,
    prop54_report,
)
from .orbit import continued_fraction, monte_carlo_union, schmidt_ratio
from .reals import DEFAULT_PREC, CertifiedReal, parse_real, random_sample
from .serial import frac_str, parse_frac
from .torus import build_Aq, union_all

# Keys that never enter the embedded config: they do not change the report.
_RUNTIME_KEYS = ("output", "threads", "config", "format_override")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- argument definitions ------------------------------------------------------------------


def _frac_arg(text: str) -> str:
    try:
        return frac_str(parse_frac(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("output")
    g.add_argument("--output", "-o", help="report path (default: stdout)")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--threads", type=int, default=1, help="parallelism cap; output does not depend on it")
    g.add_argument("--precision", type=int, default=DEFAULT_PREC, help="working precision in bits")


def _psi_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("approximation function")
    g.add_argument("--psi-file", help="psi as a JSON file")
    g.add_argument("--psi-const", type=_frac_arg, help="constant psi")
    g.add_argument("--psi", dest="psi_expr", help='explicit psi, e.g. "2:1/6,3:1/6"')
    g.add_argument("--family", choices=("khintchine", "ds-chain", "restricted", "multiplicative"))
    g.add_argument("--c", type=_frac_arg, help="khintchine: numerator constant")
    g.add_argument("--s", type=_frac_arg, help="khintchine: log exponent")
    g.add_argument("--q0", type=int, help="ds-chain: base denominator")
    g.add_argument("--m", type=int, help="ds-chain: chain length")
    g.add_argument("--scale", type=_frac_arg, help="ds-chain: largest value")
    g.add_argument("--seq", choices=("primes", "powers_of_2", "squarefree", "all"), help="restricted: allowed denominators")
    g.add_argument("--theta-const", type=_frac_arg, help="restricted/multiplicative: constant theta")
    g.add_argument("--beta", help="multiplicative: real beta (golden, sqrt(d), num/den, mpmath expression)")
    g.add_argument("--psi-Q", type=int, help="multiplicative: support bound")


def _range(p: argparse.ArgumentParser) -> None:
    p.add_argument("--X", type=int, required=True)
    p.add_argument("--Y", type=int, required=True)


def _coprime(p: argparse.ArgumentParser) -> None:
    p.add_argument("--coprime", dest="coprime_only", action=argparse.BooleanOptionalAction, default=True,
                   help="use A_q (reduced fractions); --no-coprime uses E_q")


def _support_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--V", required=True, help='support "q:w,q:w,..."')
    p.add_argument("--W", help="second support (default: same as --V)")
    p.add_argument("--t", type=_frac_arg, default="1")
    p.add_argument("--C", type=_frac_arg, default="0")


def build_parser() -> _Parser:
    parser = _Parser(prog="dslab", description="Experiments in metric Diophantine approximation.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="rerun from a config file or a previous report")
    parser.add_argument("--output", "-o", dest="config_output", help="with --config: report path")
    parser.add_argument("--threads", type=int, dest="config_threads", default=1, help="with --config: parallelism")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)

    p = sub.add_parser("series", help="partial sums of psi and phi*psi/q")
    _psi_flags(p)
    p.add_argument("--Q", required=True, help="one bound or a comma list")
    _common(p)

    p = sub.add_parser("measure", help="measure of A_q or E_q")
    _psi_flags(p)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--gamma", type=_frac_arg, default="0")
    p.add_argument("--intervals", action="store_true", help="list the intervals instead of the measure")
    _coprime(p)
    _common(p)

    p = sub.add_parser("overlap", help="pairwise overlaps against the sieve bound")
    _psi_flags(p)
    _range(p)
    _common(p)

    p = sub.add_parser("variance", help="variance sum and quasi-independence ratio")
    _psi_flags(p)
    _range(p)
    _coprime(p)
    _common(p)

    p = sub.add_parser("gcdsum", help="certified GCD sum")
    _psi_flags(p)
    p.add_argument("--Q", type=int, required=True)
    _common(p)

    p = sub.add_parser("chung-erdos", help="finite Chung-Erdos lower bound against the union")
    _psi_flags(p)
    _range(p)
    _coprime(p)
    _common(p)

    p = sub.add_parser("collapse", help="union of E_q against the sum of measures")
    _psi_flags(p)
    p.add_argument("--compare", action="store_true", help="also report the equal-weight prime family")
    p.add_argument("--prime-start", type=int, help="first prime candidate of the comparison family")
    p.add_argument(
        "--match", choices=("psi", "phi"), default="psi", help="comparison keeps sum psi (psi) or sum phi(q) psi(q)/q (phi)"
    )
    _common(p)

    p = sub.add_parser("graph", help="edge sets, reduced-threshold sums, main-theorem diagnostics")
    _support_flags(p)
    p.add_argument("--report", choices=("edges", "prop54", "main"), default="edges")
    p.add_argument("--j", type=int, default=0, help="prop54: level j")
    p.add_argument("--threshold", type=_frac_arg, default="10", help="prop54: harmonic threshold")
    p.add_argument("--epsilon", type=_frac_arg, default="2/5", help="main: exponent offset")
    p.add_argument("--p0", type=int, default=100, help="main: prime cutoff")
    _common(p)

    p = sub.add_parser("compress", help="audit of the prime-compression identities")
    _support_flags(p)
    p.add_argument("--p", default="all", help="prime or comma list (default: every prime of the graph)")
    _common(p)

    p = sub.add_parser("anatomy", help="anatomy counts against brute force")
    p.add_argument("--x", type=int, help="bound for the unweighted count")
    p.add_argument("--M", type=int, help="integer for the divisor sum")
    p.add_argument("--t", type=_frac_arg, required=True)
    p.add_argument("--c", type=_frac_arg, required=True)
    _common(p)

    p = sub.add_parser("orbit", help="continued fractions, hitting counts and Schmidt ratios")
    _psi_flags(p)
    p.add_argument("--alpha", help="real alpha (golden, sqrt(d), num/den, mpmath expression)")
    p.add_argument("--seed", type=int, help="random alphas from this seed")
    p.add_argument("--count", type=int, default=1, help="number of random alphas")
    p.add_argument("--report", choices=("schmidt", "cf"), default="schmidt")
    p.add_argument("--Q", type=int, help="schmidt: bound on q")
    p.add_argument("--n", type=int, default=10, help="cf: number of partial quotients")
    p.add_argument("--gamma", type=_frac_arg, default="0")
    _coprime(p)
    _common(p)

    p = sub.add_parser("montecarlo", help="Monte Carlo estimate of the union measure")
    _psi_flags(p)
    _range(p)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--exact", action="store_true", help="also compute the exact union")
    _coprime(p)
    _common(p)
    return parser


# -- helpers -------------------------------------------------------------------------------


def _psi(a) -> ApproxFunction:
    sources = [x for x in (a.psi_file, a.psi_const, a.psi_expr, a.family) if x is not None]
    if len(sources) != 1:
        raise UsageError("give exactly one of --psi-file, --psi-const, --psi, --family")
    if a.psi_file:
        return ApproxFunction.load(a.psi_file)
    if a.psi_const:
        return constant(parse_frac(a.psi_const))
    if a.psi_expr:
        try:
            return parse_psi_expression(a.psi_expr)
        except ValueError as exc:
            raise UsageError(f"bad --psi: {exc}") from None
    need = {
        "khintchine": ("c", "s"),
        "ds-chain": ("q0", "m", "scale"),
        "restricted": ("seq", "theta_const"),
        "multiplicative": ("beta", "theta_const", "psi_Q"),
    }[a.family]
    missing = [k for k in need if getattr(a, k) is None]
    if missing:
        raise UsageError(f"--family {a.family} needs " + ", ".join("--" + k.replace("_", "-") for k in missing))
    if a.family == "khintchine":
        return khintchine_family(parse_frac(a.c), parse_frac(a.s))
    if a.family == "ds-chain":
        return ds_chain_family(a.q0, a.m, parse_frac(a.scale))
    theta = constant(parse_frac(a.theta_const))
    if a.family == "restricted":
        return restricted_denominators(a.seq, theta)
    return multiplicative_psi(parse_real(a.beta), theta, a.psi_Q, prec=a.precision)


def _support(text: str) -> WeightedSupport:
    try:
        pairs = {}
        for item in text.split(","):
            q, v = item.split(":")
            pairs[int(q)] = parse_frac(v)
    except ValueError:
        raise UsageError(f"bad support {text!r}; expected q:w,q:w,...") from None
    return WeightedSupport.of(pairs)


def _check_range(a) -> None:
    if a.X < 1 or a.X > a.Y:
        raise UsageError(f"empty or invalid range [{a.X}, {a.Y}]")


def _decimal(x: CertifiedReal, digits: int = 20) -> str:
    with mpmath.workdps(digits + 10):
        v = mpmath.mpf(x.mid.numerator) / x.mid.denominator
        return mpmath.nstr(v, digits)


def _decimal_big(x: CertifiedReal, digits: int = 20) -> str:
    # values far outside the float range
    return _decimal(x, digits)


def _alphas(a):
    if (a.alpha is None) == (a.seed is None):
        raise UsageError("give exactly one of --alpha, --seed")
    if a.alpha is not None:
        return [(a.alpha, parse_real(a.alpha))]
    if a.count < 1:
        raise UsageError("--count must be positive")
    return [(f"seed={a.seed}:index={k}", random_sample(a.seed, k, a.precision)) for k in range(a.count)]


# -- subcommands ---------------------------------------------------------------------------
# Each returns (header, rows, comments).


def _run_series(a):
    try:
        Qs = [int(x) for x in a.Q.split(",")]
    except ValueError:
        raise UsageError(f"bad --Q {a.Q!r}") from None
    if any(Q < 1 for Q in Qs):
        raise UsageError("--Q values must be positive")
    rows = [[Q, frac_str(s1), frac_str(s2)] for Q, s1, s2 in series_sweep(_psi(a), Qs)]
    return ["Q", "sum_psi", "sum_phi_psi_over_q"], rows, []


def _run_measure(a):
    if a.q < 1:
        raise UsageError("--q must be positive")
    psi = _psi(a)
    s = build_Aq(a.q, psi(a.q), a.coprime_only, parse_frac(a.gamma))
    if a.intervals:
        return ["left_num", "left_den", "right_num", "right_den"], [list(r) for r in s.csv_rows()], []
    return ["q", "measure"], [[a.q, frac_str(s.measure())]], []


def _run_overlap(a):
    _check_range(a)
    reps = overlap_grid(_psi(a), a.X, a.Y, threads=a.threads)
    return ["q", "r", "exact_overlap", "bound", "ratio"], [r.csv_row() for r in reps], []


def _run_variance(a):
    _check_range(a)
    psi = _psi(a)
    double, single = variance_sum(psi, a.X, a.Y, a.coprime_only)
    ratio = quasi_independence_ratio(psi, a.X, a.Y, a.coprime_only)
    return ["X", "Y", "double_sum", "single_sum", "ratio"], [[a.X, a.Y, frac_str(double), frac_str(single), frac_str(ratio)]], []


def _run_gcdsum(a):
    if a.Q < 1:
        raise UsageError("--Q must be positive")
    v = gcd_sum(_psi(a), a.Q, prec=a.precision)
    return (
        ["Q", "lower", "upper", "decimal"],
        [[a.Q, frac_str(v.lo), frac_str(v.hi), _decimal(v, 30)]],
        [f"decimal column: midpoint to 30 digits; enclosure computed at {a.precision} bits"],
    )


def _run_chung_erdos(a):
    _check_range(a)
    r = chung_erdos_check(_psi(a), a.X, a.Y, a.coprime_only)
    return ["X", "Y", "lower_bound", "union_measure", "holds"], [[a.X, a.Y, frac_str(r.lower_bound), frac_str(r.union_measure), str(r.holds).lower()]], []


def _run_collapse(a):
    psi = _psi(a)
    fams = [("input", psi)]
    if a.compare:
        fams.append(("equal-weight-primes", equal_weight_prime_family(psi, a.prime_start, a.match)))
    rows = []
    for name, f in fams:
        r = overlap_collapse_report(f)
        rows.append([name, frac_str(r.sum_of_measures), frac_str(r.union_measure), frac_str(r.ratio)])
    return ["family", "sum_of_measures", "union_measure", "ratio"], rows, []


def _graph_supports(a):
    V = _support(a.V)
    W = _support(a.W) if a.W else V
    if parse_frac(a.t) < 1:
        raise UsageError("--t must be at least 1")
    return V, W


def _run_graph(a):
    V, W = _graph_supports(a)
    if a.report == "edges":
        g = build_edges(V, W, a.t, a.C, threads=a.threads)
        rows = [[v, w] for v, w in g.sorted_edges()]
        return ["v", "w"], rows, [], g.to_json()
    if a.report == "prop54":
        if a.j < 0:
            raise UsageError("--j must be nonnegative")
        r = prop54_report(V, a.j, a.threshold, prec=a.precision)
        row = [r.j, frac_str(r.threshold), r.edge_count, frac_str(r.total), _decimal(r.exp_minus_j), _decimal(r.scaled)]
        return ["j", "threshold", "edges", "sum", "exp_minus_j", "sum_times_exp_j"], [row], ["reduced thresholds are not the threshold 10 of the asymptotic statement"]
    r = main_theorem_report(V, W, a.t, a.C, a.epsilon, p0=a.p0, prec=a.precision)
    row = [frac_str(r.edge_measure), frac_str(r.mu_V), frac_str(r.mu_W), r.prime_count, r.P_eps, r.p0,
           frac_str(r.epsilon), _decimal_big(r.bound), _decimal_big(r.ratio)]
    header = ["edge_measure", "mu_V", "mu_W", "prime_count", "P_eps", "p0", "epsilon", "bound", "ratio"]
    return header, [row], ["diagnostic only: bound and ratio are decimal midpoints of certified enclosures"]


def _run_compress(a):
    V, W = _graph_supports(a)
    g = build_edges(V, W, a.t, a.C, threads=a.threads)
    if a.p == "all":
        primes = sorted(g.prime_set())
    else:
        try:
            primes = [int(x) for x in a.p.split(",")]
        except ValueError:
            raise UsageError(f"bad --p {a.p!r}") from None
    rows = []
    for p in primes:
        for i in (0, 1):
            for j in (0, 1):
                rows.extend(compress(g, p, i, j).audit_rows())
    return AUDIT_HEADER, rows, ["rows per (p,i,j): measure-V, measure-W, edge-measure, edges-outside, extra-primes"]


def _run_anatomy(a):
    if a.x is None and a.M is None:
        raise UsageError("give --x and/or --M")
    rows = []
    if a.x is not None:
        if a.x < 1:
            raise UsageError("--x must be positive")
        v, o = anatomy_count(a.x, a.t, a.c), anatomy_count_bruteforce(a.x, a.t, a.c)
        rows.append(["anatomy_count", a.x, a.t, a.c, v, o, str(v == o).lower()])
    if a.M is not None:
        if a.M < 1:
            raise UsageError("--M must be positive")
        v, o = divisor_anatomy_sum(a.M, a.t, a.c), divisor_anatomy_sum_bruteforce(a.M, a.t, a.c)
        rows.append(["divisor_anatomy_sum", a.M, a.t, a.c, v, o, str(v == o).lower()])
    return ["op", "n", "t", "c", "value", "oracle", "agree"], rows, []


def _run_orbit(a):
    alphas = _alphas(a)
    seeds = f"seed={a.seed} count={a.count}" if a.seed is not None else "seed=none"
    comments = [f"{seeds} precision={a.precision}"]
    if a.report == "cf":
        if a.n < 1:
            raise UsageError("--n must be positive")
        rows = []
        for name, alpha in alphas:
            cl = continued_fraction(alpha, a.n, prec=a.precision)
            for k, (term, (p, q)) in enumerate(zip(cl.terms, cl.convergents)):
                rows.append([name, k, term, p, q])
        return ["alpha_id", "k", "a_k", "p_k", "q_k"], rows, comments
    if a.Q is None or a.Q < 1:
        raise UsageError("--report schmidt needs a positive --Q")
    psi = _psi(a)
    rows = []
    for name, alpha in alphas:
        r = schmidt_ratio(alpha, psi, a.Q, a.coprime_only, parse_frac(a.gamma))
        exp = frac_str(r.expected.lo) if r.expected.is_exact else frac_str(r.expected.mid)
        rows.append([name, a.Q, r.hits, exp, _decimal(r.ratio, 12)])
    comments.append("expected_num/den is exact when Q <= 5000, else the midpoint of a certified enclosure; ratio is decimal")
    return ["alpha_id", "Q", "hits", "expected_num/den", "ratio"], rows, comments


def _run_montecarlo(a):
    _check_range(a)
    if a.samples < 1:
        raise UsageError("--samples must be positive")
    psi = _psi(a)
    r = monte_carlo_union(psi, a.X, a.Y, a.samples, a.seed, a.coprime_only, threads=a.threads)
    row = [a.X, a.Y, a.samples, a.seed, r.hits, repr(r.estimate), repr(r.stderr)]
    header = ["X", "Y", "samples", "seed", "hits", "estimate", "stderr"]
    if a.exact:
        sets = [build_Aq(q, v, a.coprime_only) for q, v in sorted(psi.values(a.X, a.Y).items())]
        header.append("exact_union")
        row.append(frac_str(union_all(sets).measure()))
    return header, [row], [f"seed={a.seed} samples={a.samples} sample_bits=64"]


RUNNERS = {
    "series": _run_series,
    "measure": _run_measure,
    "overlap": _run_overlap,
    "variance": _run_variance,
    "gcdsum": _run_gcdsum,
    "chung-erdos": _run_chung_erdos,
    "collapse": _run_collapse,
    "graph": _run_graph,
    "compress": _run_compress,
    "anatomy": _run_anatomy,
    "orbit": _run_orbit,
    "montecarlo": _run_montecarlo,
}


# -- config handling -----------------------------------------------------------------------


def config_of(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _RUNTIME_KEYS and not k.startswith("config_")}
    return cfg


def _argv_from_config(cfg: dict, parser: _Parser) -> list[str]:
    sub = cfg.get("subcommand")
    if sub not in RUNNERS:
        raise UsageError(f"config has unknown subcommand {sub!r}")
    subparser = parser._subparsers._group_actions[0].choices[sub]
    by_dest = {act.dest: act for act in subparser._actions if act.option_strings}
    argv = [sub]
    for key, value in cfg.items():
        if key == "subcommand" or value is None:
            continue
        act = by_dest.get(key)
        if act is None or key in _RUNTIME_KEYS:
            raise UsageError(f"config key {key!r} is not a flag of {sub}")
        flag = max(act.option_strings, key=len)
        if isinstance(act, argparse.BooleanOptionalAction):
            argv.append(act.option_strings[0 if value else 1])
        elif act.nargs == 0:
            if value:
                argv.append(flag)
        else:
            argv.extend([flag, str(value)])
    return argv


def _load_config(path: str) -> dict:
    with open(path) as fh:
        text = fh.read()
    first = text.splitlines()[0] if text else ""
    if first.startswith("# config="):
        return json.loads(first[len("# config="):])
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not a config file or report ({exc})") from None
    return obj["config"] if isinstance(obj, dict) and "config" in obj and "version" in obj else obj


def render(args, header, rows, comments, extra=None) -> str:
    cfg = config_of(args)
    if args.format == "json":
        results = [dict(zip(header, r)) for r in rows]
        env = {"config": cfg, "results": results, "version": __version__}
        if extra is not None:
            env["graph"] = extra
        if comments:
            env["notes"] = comments
        return json.dumps(env, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    buf.write("# config=" + json.dumps(cfg, sort_keys=True, separators=(",", ":")) + "\n")
    for c in comments:
        buf.write("# " + c + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _error(kind: str, message: str, code: int, subcommand=None) -> int:
    rec = {"error": kind, "message": message, "exit_status": code}
    if subcommand:
        rec["subcommand"] = subcommand
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    sub = None
    try:
        args = parser.parse_args(argv)
        if args.config:
            if args.subcommand:
                raise UsageError("--config cannot be combined with a subcommand")
            cfg = _load_config(args.config)
            extra = []
            if args.config_output:
                extra += ["--output", args.config_output]
            extra += ["--threads", str(args.config_threads)]
            args = parser.parse_args(_argv_from_config(cfg, parser) + extra)
        if not args.subcommand:
            raise UsageError("a subcommand is required (see --help)")
        sub = args.subcommand
        if args.threads < 1:
            raise UsageError("--threads must be positive")
        out = RUNNERS[sub](args)
        text = render(args, *out)
    except UsageError as exc:
        return _error("usage", str(exc), 2, sub)
    except (DomainError, UnsupportedInputError, PrecisionError, ArithmeticError, ValueError) as exc:
        return _error(type(exc).__name__, str(exc), 1, sub)
    except OSError as exc:
        return _error("io", str(exc), 1, sub)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
