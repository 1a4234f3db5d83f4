"""Command-line interface.

Exit codes: 0 success, 1 input error, 2 some optimization cell did not converge.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import closedform, multiuser, problemfile, singleuser, staticmodel
from .errors import RateCacheError
from .fixtures import dsbs_table
from .probcore import CachingProblem, JointPmf, TestChannel

EXIT_OK, EXIT_INPUT, EXIT_NONCONV = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _vcard(text):
    if text == "auto":
        return None
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("--vcard must be >= 1")
    return v


def _write(out, text):
    if out is None:
        sys.stdout.write(text)
    else:
        problemfile.write_text_atomic(out, text)


def _kv(pairs):
    return "".join(f"{k}={problemfile._fmt(v)}\n" for k, v in pairs)


def _witness_dir(out):
    return Path(str(out) + ".witnesses")


def _boundary_rows(boundary, curve_id, out, write_witnesses=True):
    """CSV rows for a hull; sidecar certificates go next to ``out``."""
    rows = []
    wdir = _witness_dir(out) if out is not None and write_witnesses else None
    if wdir is not None:
        wdir.mkdir(exist_ok=True)
    slopes = boundary.slopes() if len(boundary.points) > 1 else np.array([])
    for i, pt in enumerate(boundary.points):
        g = boundary.gammas[i] if boundary.gammas else None
        if g is None:
            # analytic endpoints: smallest weight at which they are optimal
            if i == 0:
                g = 0.0
            elif slopes.size and slopes[i - 1] < 0:
                g = -1.0 / slopes[i - 1]
        wid = ""
        if wdir is not None and boundary.witnesses and boundary.witnesses[i] is not None:
            wid = f"{curve_id}_{i:04d}"
            problemfile.write_certificate(boundary.witnesses[i], wdir / f"{wid}.json")
        ok = boundary.converged[i] if boundary.converged else True
        rows.append((curve_id, pt.r_c, pt.r_u, g, ok, wid))
    return rows


# --------------------------------------------------------------------------
# commands


def cmd_trace(args) -> int:
    problem = problemfile.load_problem(args.problem)
    cfg = singleuser.TracerConfig(n_tradeoff_points=args.points, n_restarts=args.restarts, seed=args.seed,
                                  v_card=args.vcard, refine_rounds=args.refine_rounds)
    b = singleuser.trace_boundary(problem, cfg)
    rows = _boundary_rows(b, "boundary", args.out)
    _write(args.out, problemfile.boundary_csv(rows))
    nonconv = b.diagnostics.get("nonconverged", [])
    if nonconv:
        print(f"warning: {len(nonconv)} scalarization cell(s) hit the iteration cap", file=sys.stderr)
        return EXIT_NONCONV
    return EXIT_OK


def cmd_oracle(args) -> int:
    problem = problemfile.load_problem(args.problem)
    b = singleuser.grid_oracle(problem, 1.0 / args.grid, args.vcard)
    _write(args.out, problemfile.boundary_csv(_boundary_rows(b, "oracle", args.out)))
    return EXIT_OK


def _eval_aux(problem, aux):
    if isinstance(aux, TestChannel):
        pt = singleuser.achievable_point(problem, aux)
        return [("r_c", pt.r_c), ("r_u", pt.r_u)]
    fn = {multiuser.GwAuxiliary: multiuser.pu_gw_corner, multiuser.CcAuxiliary: multiuser.cc_gw_corner,
          multiuser.SsrAuxiliary: multiuser.ssr_corner}[type(aux)]
    return list(fn(problem, aux).as_dict().items())


def cmd_eval(args) -> int:
    problem = problemfile.load_problem(args.problem)
    aux = problemfile.parse_certificate(args.channel, problem)
    _write(None, _kv(_eval_aux(problem, aux)))
    return EXIT_OK


def cmd_rcstar(args) -> int:
    problem = problemfile.load_problem(args.problem)
    cfg = singleuser.TracerConfig(seed=args.seed)
    res = singleuser.rc_star(problem, args.eps, cfg)
    if args.witness:
        problemfile.write_certificate(res.witness, args.witness)
    _write(None, _kv([("rc_star", res.value), ("r_u", res.r_u), ("ru_star", singleuser.ru_star(problem)),
                      ("candidates", res.n_candidates)]))
    return EXIT_OK


def cmd_example1(args) -> int:
    if not 0.0 < args.q < 0.5:
        raise closedform.DomainError(f"--q must lie in (0, 1/2), got {args.q!r}")
    rows = closedform.example1_curves(args.q, args.steps)
    _write(args.out, problemfile.boundary_csv([(c, rc, ru, None, True, "") for c, rc, ru in rows]))
    return EXIT_OK


EXAMPLE2_HEADER = ("table", "r", "r_u", "r_c_it", "r_c_static", "r_u_static_1", "r_u_static_2")


def cmd_example2(args) -> int:
    lines = [",".join(EXAMPLE2_HEADER)]
    for k in range(args.steps + 1):
        r = 2.0 * k / args.steps
        it = multiuser.ssr_example2_boundary(r)
        st = staticmodel.example2_static_region(r)
        lines.append(",".join(problemfile._fmt(v) for v in
                              ("region", r, it.r_u, it.r_c, st.r_c, *st.r_u_by_request)))
    for r_u, c_it, c_st in staticmodel.example2_gap_report():
        r = 2.0 - 2.0 * r_u
        st = staticmodel.example2_static_region(r)
        lines.append(",".join(problemfile._fmt(v) for v in ("gap", r, r_u, c_it, c_st, *st.r_u_by_request)))
    _write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def _static_spec(path):
    p = problemfile.parse_problem(path)
    if isinstance(p, CachingProblem):
        p = staticmodel.IndependentSourceSpec.from_problem(p)
    return p


def cmd_static(args) -> int:
    spec = _static_spec(args.problem)
    if args.static_cmd == "compound":
        cfg = staticmodel.CompoundConfig(seed=args.seed)
        res = staticmodel.compound_rate(spec, args.rc, cfg)
        if args.witness:
            problemfile.write_certificate(res.witness, args.witness)
        pairs = [("compound_rate", res.value), ("r_c", res.r_c)]
        pairs += [(f"r_u[{y}]", v) for y, v in zip(spec.y_alphabet, res.r_u_by_request)]
        _write(None, _kv(pairs))
        return EXIT_OK if res.converged else EXIT_NONCONV
    problem = spec.to_problem()
    if args.static_cmd == "eval":
        ch = problemfile.parse_certificate(args.channel, problem)
        prof = staticmodel.static_corner(spec, ch)
        pairs = [("r_c", prof.r_c)] + [(f"r_u[{y}]", v) for y, v in zip(spec.y_alphabet, prof.r_u_by_request)]
        _write(None, _kv(pairs + [("worst_case", prof.worst_case)]))
        return EXIT_OK
    # adaptive: one channel, or every witness of the traced region
    if args.channel:
        chans = [problemfile.parse_certificate(args.channel, problem)]
    else:
        b = singleuser.trace_boundary(problem, singleuser.TracerConfig(seed=args.seed))
        chans = [w for w in b.witnesses if w is not None]
    delta = 0.0
    lines = []
    for ch in chans:
        a = staticmodel.adaptive_point(spec, ch)
        t = singleuser.achievable_point(problem, ch)
        delta = max(delta, abs(a.r_c - t.r_c), abs(a.r_u - t.r_u))
        lines.append((a.r_c, a.r_u))
    out = "".join(f"r_c={problemfile._fmt(c)} r_u={problemfile._fmt(u)}\n" for c, u in lines)
    _write(None, out + _kv([("crosscheck_delta", delta)]))
    return EXIT_OK


def cmd_closed(args) -> int:
    c = args.closed_cmd
    if c in ("independent", "nested"):
        spec = closedform.ComponentSpec(args.entropies, args.pmf)
        fn = closedform.independent_boundary if c == "independent" else closedform.nested_boundary
        pairs = [("r_u", fn(spec, args.r))]
    elif c == "uniform":
        res = closedform.uniform_request_boundary(problemfile.load_problem(args.problem), args.r,
                                                  singleuser.TracerConfig(seed=args.seed))
        pairs = [("r_u", res.value), ("gamma_min", res.gamma_min), ("h_xbar", res.h_xbar)]
    elif c == "rcrit":
        pairs = [("r_crit", closedform.dsbs_rcrit(args.q))]
    elif c == "wyner":
        if args.problem:
            joint = closedform.component_joint(problemfile.load_problem(args.problem))
        elif args.q is not None:
            joint = JointPmf(dsbs_table(args.q))
        else:
            raise closedform.ValidationError("wyner needs --problem or --q")
        res = closedform.wyner_common_info(joint, args.vcard, seed=args.seed)
        pairs = [("wyner_ci", res.value), ("total_correlation", res.total_correlation)]
        if not res.converged:
            _write(None, _kv(pairs))
            return EXIT_NONCONV
    elif c == "dsbs-point":
        pt, _ = closedform.dsbs_inner_point(args.q, args.alpha)
        pairs = [("r_c", pt.r_c), ("r_u", pt.r_u)]
    else:  # dsbs-outer
        pairs = [("r_u", closedform.dsbs_outer_bound(args.q, args.rc))]
    _write(None, _kv(pairs))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ratecache", description="Cache/update rate trade-offs for caching with request side information.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    t = sub.add_parser("trace", help="trace the single-user boundary")
    t.add_argument("--problem", required=True)
    t.add_argument("--points", type=int, default=48)
    t.add_argument("--restarts", type=int, default=32)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--vcard", type=_vcard, default=None)
    t.add_argument("--refine-rounds", type=int, default=8)
    t.add_argument("--out")
    t.set_defaults(func=cmd_trace)

    o = sub.add_parser("oracle", help="brute-force boundary over a simplex grid of channels")
    o.add_argument("--problem", required=True)
    o.add_argument("--grid", type=int, default=16, help="grid denominator K (step 1/K)")
    o.add_argument("--vcard", type=int, default=2)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    e = sub.add_parser("eval", help="evaluate a certificate (single- or two-user)")
    e.add_argument("--problem", required=True)
    e.add_argument("--channel", required=True)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("rcstar", help="cache rate needed for zero update rate")
    r.add_argument("--problem", required=True)
    r.add_argument("--eps", type=float, default=1e-9)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--witness")
    r.set_defaults(func=cmd_rcstar)

    x1 = sub.add_parser("example1", help="DSBS inner/outer bound curves")
    x1.add_argument("--q", type=float, default=0.1)
    x1.add_argument("--steps", type=int, default=100)
    x1.add_argument("--out")
    x1.set_defaults(func=cmd_example1)

    x2 = sub.add_parser("example2", help="sequential vs static model comparison")
    x2.add_argument("--steps", type=int, default=20)
    x2.add_argument("--out")
    x2.set_defaults(func=cmd_example2)

    s = sub.add_parser("static", help="static-request model")
    ssub = s.add_subparsers(dest="static_cmd", required=True, parser_class=_Parser)
    sc = ssub.add_parser("compound")
    sc.add_argument("--problem", required=True)
    sc.add_argument("--rc", type=float, required=True)
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--witness")
    sa = ssub.add_parser("adaptive")
    sa.add_argument("--problem", required=True)
    sa.add_argument("--channel")
    sa.add_argument("--seed", type=int, default=0)
    se = ssub.add_parser("eval")
    se.add_argument("--problem", required=True)
    se.add_argument("--channel", required=True)
    s.set_defaults(func=cmd_static)

    c = sub.add_parser("closed", help="closed-form queries")
    csub = c.add_subparsers(dest="closed_cmd", required=True, parser_class=_Parser)
    for name in ("independent", "nested"):
        q = csub.add_parser(name)
        q.add_argument("--entropies", type=_floats, required=True)
        q.add_argument("--pmf", type=_floats, required=True)
        q.add_argument("--r", type=float, required=True)
    q = csub.add_parser("uniform")
    q.add_argument("--problem", required=True)
    q.add_argument("--r", type=float, required=True)
    q.add_argument("--seed", type=int, default=0)
    q = csub.add_parser("rcrit")
    q.add_argument("--q", type=float, required=True)
    q = csub.add_parser("wyner")
    q.add_argument("--problem")
    q.add_argument("--q", type=float)
    q.add_argument("--vcard", type=int, default=2)
    q.add_argument("--seed", type=int, default=0)
    q = csub.add_parser("dsbs-point")
    q.add_argument("--q", type=float, required=True)
    q.add_argument("--alpha", type=float, required=True)
    q = csub.add_parser("dsbs-outer")
    q.add_argument("--q", type=float, required=True)
    q.add_argument("--rc", type=float, required=True)
    c.set_defaults(func=cmd_closed)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (RateCacheError, ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
