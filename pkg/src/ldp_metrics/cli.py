"""Command-line interface: analyze, sweep, posterior, verify."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import LdpMetricsError, UnknownSuite
from .finite import (EnumerationBudget, digit_utility, distribution_utility,
                     tally_utility)
from .population import limit_predictions, population_report
from .posterior import posterior_dirichlet_mixture, posterior_moments
from .prior import McConfig, RNG_ALGORITHM
from .protocol import analyze_structure, worst_case_privacy
from .specs import parse_params, parse_prior, parse_protocol, split_spec
from .verify import run_suite, sweep_rows

SWEEP_COLUMNS = ("protocol", "param", "ldp", "s_wc", "s_mu", "s_mu_se", "u_as", "u_as_se",
                 "f_mu", "f_mu_se", "bound_uas", "bound_fmu")
N_SWEEP_COLUMNS = ("protocol", "param", "u_distr", "u_distr_se", "u_tally", "u_digit", "u_digit_se")


def _num(v):
    """JSON-safe number: inf and nan become strings."""
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else str(v)


def _est(e):
    if e is None:
        return None
    return {"value": _num(e.value), "std_error": _num(e.std_error), "sample_count": e.sample_count,
            "seed": e.seed, "method": e.method}


def _provenance(args):
    return {"tool": "ldp-metrics", "version": __version__, "seed": args.seed,
            "samples": args.samples, "rng": RNG_ALGORITHM}


def _config(args) -> McConfig:
    return McConfig(sample_count=args.samples, seed=args.seed, workers=args.workers)


def _budget(args) -> EnumerationBudget:
    return EnumerationBudget.from_env(mc=_config(args))


def analyze_report(args) -> dict:
    q = parse_protocol(args.protocol)
    prior = parse_prior(args.prior, q.a)
    cfg = _config(args)
    st = analyze_structure(q)
    rep = population_report(q, prior, cfg)
    lim = limit_predictions(q, prior, cfg, u_as=rep.u_as)
    report = {
        "provenance": _provenance(args),
        "protocol": {"spec": args.protocol, "a": q.a, "b": q.b},
        "prior": prior.alpha.tolist(),
        "structure": {"ldp_level": _num(st.ldp_level), "rank": st.rank, "faithful": st.faithful,
                      "reachable_outputs": len(st.reachable_outputs), "class_count": st.class_count},
        "s_wc": _num(worst_case_privacy(q)),
        "s_mu": _est(rep.s_mu),
        "u_as": _est(rep.u_as),
        "f_mu": _est(rep.f_mu),
        "tradeoff_bounds": None if rep.bounds is None else
        {"bound_uas": _num(rep.bounds.bound_uas), "bound_fmu": _num(rep.bounds.bound_fmu)},
        "limits": {"u_distr": lim.u_distr_limit, "u_tally": lim.u_tally_limit,
                   "digit_slope": lim.digit_slope,
                   "one_minus_udistr_scale": _est(lim.one_minus_udistr_scale), "r_mu": _est(lim.r_mu)},
        "errors": [],
    }
    if args.n is not None:
        budget = _budget(args)
        finite = {"n": args.n}
        for key, fn in (("u_distr", distribution_utility), ("u_tally", tally_utility), ("u_digit", digit_utility)):
            try:
                finite[key] = _est(fn(q, prior, args.n, budget))
            except LdpMetricsError as exc:
                finite[key] = None
                report["errors"].append({"field": key, "error": type(exc).__name__, "message": str(exc)})
        report["finite"] = finite
    return report


def _text(obj, indent=0) -> str:
    pad = "  " * indent
    lines = []
    for k, v in obj.items():
        if isinstance(v, dict) and not {"value", "std_error"} <= v.keys():
            lines.append(f"{pad}{k}:")
            lines.append(_text(v, indent + 1))
        elif isinstance(v, dict):
            se = f" +- {v['std_error']:.3g}" if isinstance(v["std_error"], float) and v["std_error"] else ""
            lines.append(f"{pad}{k}: {v['value']}{se} [{v['method']}]")
        else:
            lines.append(f"{pad}{k}: {v}")
    return "\n".join(lines)


def _emit(text: str, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj, fmt):
    if fmt == "text":
        return _text(obj) + "\n"
    return json.dumps(obj, indent=2) + "\n"


def cmd_analyze(args) -> int:
    _emit(_dump(analyze_report(args), args.format), args.out)
    return 0


def parse_grid(text: str) -> list:
    """'0.5,1,2' or 'start:stop:step' (inclusive of stop within rounding)."""
    text = text.strip()
    if not text:
        raise ValueError("empty grid")
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        grid = [round(start + i * step, 12) for i in range(count)]
    else:
        grid = [float(v) for v in text.split(",")]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be nonempty and strictly increasing")
    return grid


PRESETS = {
    "2": (("grr", "rappor", "oue", "blh"), "a", "2:8:1", {"eps": 2.0}),
    "3": (("grr", "rappor", "oue", "blh"), "eps", "0.1:8:0.1", {"a": 3}),
}


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([r[c] if isinstance(r[c], str) else format(r[c], ".17g") for c in columns])
    return buf.getvalue()


def _n_sweep(families, grid, fixed, args):
    from .specs import build_family

    rows = []
    budget = _budget(args)
    for fam in families:
        q = build_family(fam, fixed)
        prior = parse_prior(args.prior, q.a)
        for n in grid:
            ud = distribution_utility(q, prior, int(n), budget)
            ut = tally_utility(q, prior, int(n), budget)
            try:
                dg = digit_utility(q, prior, int(n), budget)
                dv, ds = dg.value, dg.std_error
            except LdpMetricsError:
                dv = ds = math.nan
            rows.append({"protocol": fam, "param": n, "u_distr": ud.value, "u_distr_se": ud.std_error,
                         "u_tally": ut.value, "u_digit": dv, "u_digit_se": ds})
    return rows


def cmd_sweep(args) -> int:
    if args.figure:
        families, vary, grid_text, fixed = PRESETS[args.figure]
    else:
        if not args.protocol:
            raise ValueError("sweep needs --protocol (family with fixed params) or --figure")
        families, fixed = [], {}
        for spec in args.protocol:
            fam, params = split_spec(spec)
            families.append(fam)
            if fixed and params != fixed:
                raise ValueError("all swept protocols must share the fixed parameters")
            fixed = params
        vary = args.vary
        grid_text = args.grid
        if vary is None or grid_text is None:
            raise ValueError("sweep needs --vary and --grid")
    grid = parse_grid(grid_text)
    key = {"eps": "eps", "epsilon": "eps", "a": "a", "n": "n"}[vary]
    if key == "n":
        rows, columns = _n_sweep(families, grid, fixed, args), N_SWEEP_COLUMNS
    else:
        rows, columns = sweep_rows(families, key, grid, fixed, args.prior, _config(args)), SWEEP_COLUMNS
    if args.format == "json":
        text = json.dumps({"provenance": _provenance(args),
                           "rows": [{k: (_num(v) if not isinstance(v, str) else v) for k, v in r.items()} for r in rows]},
                          indent=2) + "\n"
    else:
        text = _csv(rows, columns)
    _emit(text, args.out)
    return 0


def cmd_posterior(args) -> int:
    q = parse_protocol(args.protocol)
    prior = parse_prior(args.prior, q.a)
    counts = [int(v) for v in parse_counts(args.counts)]
    mix = posterior_dirichlet_mixture(q, prior, counts, budget=_budget(args))
    moments = posterior_moments(mix)
    top = mix.top(args.top)
    out = {
        "provenance": _provenance(args),
        "protocol": args.protocol, "counts": counts, "prior": prior.alpha.tolist(),
        "log_normalizer": mix.log_normalizer,
        "component_count": mix.size,
        "components": [{"weight": float(w), "alpha": al.tolist()} for w, al in zip(top.weights, top.alphas)],
        "marginals": [[{"weight": w, "beta": list(ab)} for w, ab in top.marginal(x)] for x in range(q.a)],
        "moments": {"mean": moments.mean.tolist(), "variance": moments.variance.tolist(), "method": moments.method},
    }
    text = _dump(out, "json" if args.format != "text" else "text")
    _emit(text, args.out)
    return 0


def parse_counts(text: str) -> list:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise ValueError(f"bad counts {text!r}; expected comma-separated integers") from None


def cmd_verify(args) -> int:
    checks = run_suite(args.suite, args.seed)
    ok = all(c.passed for c in checks)
    if args.format == "json":
        text = json.dumps({"provenance": _provenance(args), "suite": args.suite, "passed": ok,
                           "checks": [c.to_dict() for c in checks]}, indent=2) + "\n"
    else:
        text = "\n".join(c.line() for c in checks)
        text += f"\n{sum(c.passed for c in checks)}/{len(checks)} checks passed\n"
    _emit(text, args.out)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--prior", default="jeffreys", help="'jeffreys' or 'dirichlet:a1,a2,...'")
    common.add_argument("--samples", type=int, default=200_000, help="Monte-Carlo sample count")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--n", type=int, default=None, help="number of users for finite-n metrics")
    common.add_argument("--out", default=None, help="write output to this path")

    parser = argparse.ArgumentParser(prog="ldp-metrics", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="report all metrics of one protocol")
    p.add_argument("--protocol", required=True, help="builtin spec (e.g. grr:a=4,eps=2) or JSON path")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", parents=[common], help="tabulate metrics over a parameter grid")
    p.add_argument("--protocol", action="append", help="family with fixed params, e.g. grr:a=3 (repeatable)")
    p.add_argument("--vary", choices=("eps", "epsilon", "a", "n"))
    p.add_argument("--grid", help="'v1,v2,...' or 'start:stop:step'")
    p.add_argument("--figure", choices=tuple(PRESETS), help="preset sweep: 2 = privacy vs alphabet size at eps=2, 3 = all metrics vs eps at a=3")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("posterior", parents=[common], help="exact posterior given report counts")
    p.add_argument("--protocol", required=True)
    p.add_argument("--counts", required=True, help="comma-separated report counts, one per output")
    p.add_argument("--top", type=int, default=1000, help="number of mixture components to print")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("--suite", required=True, help="theorems | closed-forms | oracle | paper-numbers")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnknownSuite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LdpMetricsError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
