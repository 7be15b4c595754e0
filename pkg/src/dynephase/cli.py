"""Command-line interface.

Every command writes a table (CSV with ``# `` metadata lines, or a JSON
object with a ``meta`` member) to stdout or ``--out``.  Exit status is 0 on
success, 1 for invalid input (including unknown flags) and 2 for numerical
failures.

Examples
--------
::

    dynephase hmatrix --scheme mark1 --dim 8
    dynephase variance --beta 5
    dynephase figure --id 5 --nmax 100
    dynephase simulate --beta 2 --trajectories 100000 --seed 7 --estimator mark2
"""

import argparse
import json
import math
import sys

import numpy as np

from . import __version__, asymptotics
from ._accel import backend
from .errors import DynephaseError, ValidationError
from .figures import ERROR_TAIL_CAP, FIGURE_IDS, FigureDataset, figure_dataset, format_float
from .optimal import error_probability, min_error_state, optimal_variance_state
from .phasestats import excess_variance, holevo_variance, mu_from_H, phase_distribution
from .pom import SCHEMES, build_h, canonical_scheme
from .states import DEFAULT_TAIL_CAP, coherent_state, required_truncation
from .trajectories import SdeConfig, simulate_ostensible, weighted_phase_histogram

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _add_common(p):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", metavar="PATH", help="write to PATH instead of stdout")


def _add_h(p, dim_default=None):
    p.add_argument("--dim", type=int, default=dim_default, help="H-matrix dimension (largest photon number)")
    p.add_argument("--series-terms", type=int, default=None, help="mark II series length")


def build_parser():
    parser = _Parser(prog="dynephase", description="Phase statistics of canonical, heterodyne and adaptive dyne measurements.")
    parser.add_argument("--version", action="version", version=f"dynephase {__version__}")
    sub = parser.add_subparsers(dest="verb", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("hmatrix", help="export an H matrix")
    p.add_argument("--scheme", required=True)
    _add_h(p, 100)
    _add_common(p)

    for verb, helptext in (("variance", "Holevo variance of a coherent state"), ("excess", "excess phase variance of a coherent state")):
        p = sub.add_parser(verb, help=helptext)
        p.add_argument("--scheme", default=None, help="one scheme (default: all)")
        p.add_argument("--beta", type=float, required=True)
        _add_h(p)
        _add_common(p)

    p = sub.add_parser("distribution", help="phase density of a coherent state")
    p.add_argument("--scheme", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--grid", type=int, default=4096)
    _add_h(p)
    _add_common(p)

    p = sub.add_parser("optimal", help="minimum-variance state with at most N photons")
    p.add_argument("--scheme", required=True)
    p.add_argument("--nmax", type=int, required=True)
    _add_h(p)
    _add_common(p)

    p = sub.add_parser("error", help="M-ary phase-keying error probability")
    p.add_argument("--scheme", default=None, help="one scheme (default: all)")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--beta", type=float, help="coherent-state amplitude")
    g.add_argument("--nmax", type=int, help="optimal state with at most N photons")
    p.add_argument("--m", type=int, default=4, help="alphabet size (default 4)")
    _add_h(p)
    _add_common(p)

    p = sub.add_parser("simulate", help="Monte Carlo of the adaptive feedback loop")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--estimator", choices=("mark1", "mark2"), default="mark1")
    p.add_argument("--trajectories", type=int, default=100_000)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--v0", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("rotation", "euler"), default="rotation")
    p.add_argument("--grid", type=int, default=64, help="histogram bins")
    p.add_argument("--samples", metavar="PATH", help="also dump phi_hat, Re C, Im C to PATH")
    _add_common(p)

    p = sub.add_parser("asymptote", help="closed-form asymptotic values with validity flags")
    p.add_argument("--scheme", default=None, help="one scheme (default: all)")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--nmax", type=int, default=None)
    p.add_argument("--m", type=int, default=4)
    _add_common(p)

    p = sub.add_parser("figure", help="dataset behind a comparison plot")
    p.add_argument("--id", type=int, required=True, choices=FIGURE_IDS)
    p.add_argument("--nmax", type=int, default=None)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--grid", type=int, default=None)
    _add_h(p)
    _add_common(p)
    return parser


# -- commands --------------------------------------------------------------------------

def _schemes(arg, allowed=SCHEMES):
    if arg is None:
        return list(allowed)
    s = canonical_scheme(arg)
    if s not in allowed:
        raise ValidationError(f"scheme {s!r} not available here; expected one of {allowed}")
    return [s]


def _h(args, scheme, dim):
    st = args.series_terms if scheme == "mark2" else None
    return build_h(scheme, dim, series_terms=st)


def _coherent_dim(args, tail_cap=DEFAULT_TAIL_CAP):
    if args.beta < 0:
        raise ValidationError("beta must be non-negative")
    return args.dim if args.dim is not None else max(100, required_truncation(args.beta, tail_cap))


def _table(columns, rows, meta=None, figure_id=0):
    return FigureDataset(figure_id, tuple(columns), rows, meta or {})


def cmd_hmatrix(args):
    h = _h(args, canonical_scheme(args.scheme), args.dim)
    cols = ["m"] + [f"n{n}" for n in range(h.dim + 1)]
    rows = [tuple([m] + [float(x) for x in row]) for m, row in enumerate(h.entries)]
    meta = {"scheme": h.scheme, "dim": h.dim}
    for k in ("series_terms", "tail_estimate", "diag_deviation"):
        if h.meta.get(k) is not None:
            meta[k] = h.meta[k]
    return _table(cols, rows, meta)


def cmd_variance(args):
    d = _coherent_dim(args)
    st = coherent_state(args.beta, truncation=d)
    rows = []
    for s in _schemes(args.scheme):
        v = holevo_variance(mu_from_H(_h(args, s, d), st))
        asym = asymptotics.coherent_variance_asymptotic(s, args.beta) if args.beta > 0 else math.inf
        valid = asymptotics.validity("coherent_variance", s, beta=args.beta)["valid"]
        rows.append((s, args.beta, v, asym, int(valid)))
    return _table(("scheme", "beta", "V", "V_asym", "asym_valid"), rows, {"dim": d})


def cmd_excess(args):
    d = _coherent_dim(args)
    st = coherent_state(args.beta, truncation=d)
    rows = []
    for s in _schemes(args.scheme, ("heterodyne", "mark1", "mark2")):
        ex = excess_variance(_h(args, s, d), st)
        asym = asymptotics.coherent_excess_asymptotic(s, args.beta) if args.beta > 0 else math.inf
        valid = asymptotics.validity("excess", s, beta=args.beta)["valid"]
        rows.append((s, args.beta, ex, asym, int(valid)))
    return _table(("scheme", "beta", "excess", "excess_asym", "asym_valid"), rows, {"dim": d})


def cmd_distribution(args):
    d = _coherent_dim(args)
    s = canonical_scheme(args.scheme)
    dist = phase_distribution(_h(args, s, d), coherent_state(args.beta, truncation=d), args.grid)
    with np.errstate(divide="ignore"):
        logs = np.log10(dist.density)
    rows = [(float(p), float(x), float(lx)) for p, x, lx in zip(dist.grid, dist.density, logs)]
    return _table(("phi", "P", "log10_P"), rows, {"scheme": s, "dim": d, "beta": args.beta})


def cmd_optimal(args):
    s = canonical_scheme(args.scheme)
    d = args.dim if args.dim is not None else args.nmax
    res = optimal_variance_state(_h(args, s, d), args.nmax)
    rows = [(n, float(a)) for n, a in enumerate(res.state.amplitudes)]
    meta = {
        "scheme": s,
        "nmax": args.nmax,
        "V_min": res.value,
        "V_min_asym": asymptotics.vmin_asymptotic(s, args.nmax) if args.nmax >= 1 else math.inf,
        "asym_valid": asymptotics.validity("vmin", s, N=args.nmax)["valid"],
    }
    return _table(("n", "psi"), rows, meta)


def cmd_error(args):
    rows = []
    if args.beta is not None:
        d = _coherent_dim(args, ERROR_TAIL_CAP)
        st = coherent_state(args.beta, truncation=d, tail_cap=ERROR_TAIL_CAP)
        for s in _schemes(args.scheme):
            e = error_probability(_h(args, s, d), args.m, st)
            asym = asymptotics.error_asymptotic(s, args.beta, args.m) / math.log(10) if args.beta > 0 else math.nan
            rows.append((s, args.beta, args.m, e, math.log10(e) if e > 0 else -math.inf, asym))
        return _table(("scheme", "beta", "M", "E", "log10E", "log10E_asym"), rows, {"dim": d})
    d = args.dim if args.dim is not None else args.nmax
    for s in _schemes(args.scheme):
        e = min_error_state(_h(args, s, d), args.m, args.nmax).value
        rows.append((s, args.nmax, args.m, e, math.log10(e) if e > 0 else -math.inf))
    return _table(("scheme", "nmax", "M", "E_min", "log10E_min"), rows, {"dim": d})


def cmd_simulate(args):
    cfg = SdeConfig(steps=args.steps, v0=args.v0, seed=args.seed, trajectories=args.trajectories, method=args.method)
    samples = simulate_ostensible(cfg)
    if args.samples:
        with open(args.samples, "w", newline="\n") as fh:
            fh.write(samples.to_csv())
    hist = weighted_phase_histogram(samples, args.beta, args.estimator, args.grid)
    width = 2.0 * math.pi / args.grid
    se = np.sqrt(np.clip(np.diag(hist.covariance), 0.0, None))
    rows = [
        (float(p), float(p + width), float(m), float(m / width), float(e))
        for p, m, e in zip(hist.grid, hist.bin_mass, se)
    ]
    meta = {
        "estimator": args.estimator,
        "effective_sample_size": hist.effective_sample_size,
        "total_weight": hist.total_weight,
        "log_weight_shift": hist.log_weight_shift,
        "projections": samples.projections,
        "refined_steps": samples.refined_steps,
        "backend": samples.backend,
    }
    return _table(("phi_lo", "phi_hi", "mass", "density", "mass_std_error"), rows, meta)


def cmd_asymptote(args):
    rows = []
    for s in _schemes(args.scheme):
        if args.beta is not None:
            b = args.beta
            for q, f in (
                ("coherent_variance", lambda: asymptotics.coherent_variance_asymptotic(s, b)),
                ("excess", lambda: asymptotics.coherent_excess_asymptotic(s, b)),
                ("log_error", lambda: asymptotics.error_asymptotic(s, b, args.m)),
                ("log_tail", lambda: asymptotics.tail_estimate(s, b)),
            ):
                val = f()
                flags = asymptotics.validity(q.replace("log_", ""), s, beta=b)
                rows.append((s, q, b, val, int(flags["valid"]), int(flags["leading_order_only"])))
        if args.nmax is not None:
            flags = asymptotics.validity("vmin", s, N=args.nmax)
            rows.append((s, "vmin", args.nmax, asymptotics.vmin_asymptotic(s, args.nmax), int(flags["valid"]), 0))
    if not rows:
        raise ValidationError("asymptote needs --beta and/or --nmax")
    meta = {
        "M": args.m,
        "crossover_beta": asymptotics.crossover_beta(args.m),
        "mark2_regime_switch": asymptotics.mark2_regime_switch(args.m),
        "asymptotic_threshold": {s: asymptotics.asymptotic_threshold(s) for s in SCHEMES},
    }
    return _table(("scheme", "quantity", "argument", "value", "valid", "leading_order_only"), rows, meta)


def cmd_figure(args):
    return figure_dataset(args.id, dim=args.dim, nmax=args.nmax, M=args.m, grid=args.grid, series_terms=args.series_terms)


COMMANDS = {
    "hmatrix": cmd_hmatrix,
    "variance": cmd_variance,
    "excess": cmd_excess,
    "distribution": cmd_distribution,
    "optimal": cmd_optimal,
    "error": cmd_error,
    "simulate": cmd_simulate,
    "asymptote": cmd_asymptote,
    "figure": cmd_figure,
}


# -- output ------------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else format_float(x)
    return x


def _flags(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}


def render(dataset, args):
    header = {"version": __version__, "command": args.verb, "flags": _flags(args), "backend": backend()}
    if hasattr(args, "seed"):
        header["seed"] = args.seed
    if args.format == "json":
        body = json.loads(dataset.to_json())
        if args.verb != "figure":
            body.pop("figure", None)
        body["meta"] = _jsonable({**header, **dataset.meta})
        return json.dumps(body) + "\n"
    lines = [f"# dynephase {__version__}", f"# command: {args.verb}"]
    lines.append("# flags: " + json.dumps(_jsonable(header["flags"]), sort_keys=True))
    if "seed" in header:
        lines.append(f"# seed: {args.seed}")
    for k, v in dataset.meta.items():
        lines.append(f"# {k}: " + (json.dumps(_jsonable(v)) if isinstance(v, dict) else _meta_value(v)))
    return "\n".join(lines) + "\n" + dataset.to_csv()


def _meta_value(v):
    if isinstance(v, bool) or isinstance(v, str):
        return str(v).lower() if isinstance(v, bool) else v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def main(argv=None):
    """Run one command; returns the process exit status."""
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        text = render(COMMANDS[args.verb](args), args)
    except ValidationError as exc:
        print(f"dynephase: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DynephaseError, ArithmeticError) as exc:
        print(f"dynephase: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
