"""Command line entry point: ``sumset-lab <command> [options]``.

Sets are given with ``--a`` / ``--b`` as a path to a file of comma separated
residues or as the comma separated list itself. Every command prints (or
writes to ``--out``) one JSON document, or CSV with ``--format csv``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction

from . import __version__
from .errors import SumsetLabError
from .rng import RNG_NAME, as_rng


def _frac(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _context(args):
    from .zp import line, modp

    if args.p is not None:
        return modp(args.p)
    if args.window is not None:
        return line(args.window)
    raise SystemExit("one of --p or --window is required")


def _read_set(ctx, value: str | None, what: str):
    from .zp import parse

    if value is None:
        raise SystemExit(f"--{what} is required")
    text = open(value, encoding="utf-8").read() if os.path.exists(value) else value
    return parse(ctx, text.replace("\n", ",").strip(","))


def _interval(ctx, text: str):
    from .zp import IntervalZp

    left, length = (int(t) for t in text.split(","))
    return IntervalZp(ctx, left, length)


def _parts(ctx, text: str):
    parts = tuple(_interval(ctx, chunk) for chunk in text.split(";"))
    if len(parts) != 3:
        raise SystemExit("interval parts need three 'left,length' entries separated by ';'")
    return parts


def _elems(s) -> list[int]:
    return list(s.elements())


def _default_target(a, b) -> int:
    n = len(a) + len(b) - 1
    return min(n, a.ctx.modulus) if a.ctx.is_modp else n


# --- commands ------------------------------------------------------------------------------

def cmd_kernel(args) -> dict:
    from .kernel import ap_distance, popularity_partition, rep_profile, sumset

    ctx = _context(args)
    a = _read_set(ctx, args.a, "a")
    b = _read_set(ctx, args.b, "b") if args.b is not None else a
    s = sumset(a, b)
    out = {"context": str(ctx), "size_a": len(a), "size_b": len(b), "sumset": _elems(s), "sumset_size": len(s),
           "cd_bound": _default_target(a, b) if a and b else 0}
    if args.rep:
        out["rep"] = {str(k): v for k, v in rep_profile(a, b).as_dict().items()}
    if args.alpha is not None:
        part = popularity_partition(a, b, args.alpha)
        out["popularity"] = {"alpha": str(args.alpha), "popular": _elems(part.popular),
                             "unpopular": _elems(part.unpopular), "gamma_count": part.gamma_count}
    if args.ap:
        fit = ap_distance(a, b if args.b is not None else None, cap=args.ap_cap)
        out["ap"] = {"distance": fit.distance, "start": fit.progression.start,
                     "difference": fit.progression.difference, "length": fit.progression.length,
                     "exact": fit.exact}
    return out


def cmd_witness(args) -> dict:
    from .kernel import sumset
    from .witness import chernoff_lower_bound, find_witness, mc_expected_sumset

    ctx = _context(args)
    a, b = _read_set(ctx, args.a, "a"), _read_set(ctx, args.b, "b")
    target = args.target if args.target is not None else _default_target(a, b)
    rng, _ = as_rng(args.seed)
    res, route = find_witness(a, b, (args.c1, args.c2), target, rng, random_tries=args.tries,
                              local_steps=args.local_steps, exhaustive_cap=args.exhaustive_cap)
    out = {"c1": args.c1, "c2": args.c2, "target": target, "route": route, "found": res is not None}
    if res is not None:
        out.update(a_sub=_elems(res.a_sub), b_sub=_elems(res.b_sub), achieved=len(sumset(res.a_sub, res.b_sub)))
    if args.mc_trials:
        est = mc_expected_sumset(a, b, (args.c1, args.c2), args.mc_trials, rng, mode=args.mode)
        out["mc"] = est.to_dict()
        if args.mode == "points":
            out["chernoff_lower_bound"] = chernoff_lower_bound(a, b, args.c1, args.c2)
    return out


def cmd_frontier(args) -> dict:
    from .witness import witness_frontier

    ctx = _context(args)
    a = _read_set(ctx, args.a, "a")
    b = _read_set(ctx, args.b, "b") if args.b is not None else a
    target = args.target if args.target is not None else _default_target(a, b)
    front = witness_frontier(a, b, target, cap=args.cap)
    return {"target": target, "frontier": [[f.c1, f.c2] for f in front],
            "products": [f.c1 * f.c2 for f in front]}


def _construction_params(args):
    from .constructions import ConstructionParams

    return ConstructionParams(k=args.k, t=args.t, gamma=args.gamma, gamma_prime=args.gamma_prime,
                              alpha=args.alpha, c=args.c, max_samples=args.max_samples,
                              theoretical=args.theoretical)


def cmd_construct(args) -> dict:
    from .constructions import lemma_fg_expectation_check, thm5_construct

    ctx = _context(args)
    x, y = _read_set(ctx, args.a, "a"), _read_set(ctx, args.b, "b")
    I, J = _interval(ctx, args.I), _interval(ctx, args.J)
    params = _construction_params(args)
    rng, _ = as_rng(args.seed)
    res = thm5_construct(x, y, I, J, (args.c1, args.c2), params, rng)
    out = {"params": params.to_dict(), **res.to_dict()}
    if args.fg_trials:
        out["fg_check"] = lemma_fg_expectation_check(x, y, I, J, (args.c1, args.c2), params,
                                                     args.fg_trials, rng).to_dict()
    return out


def cmd_surgery(args) -> dict:
    from .constructions import PRACTICAL_LADDER, THEORETICAL_LADDER, lemma7_surgery

    ctx = _context(args)
    a, b = _read_set(ctx, args.a, "a"), _read_set(ctx, args.b, "b")
    ladder = THEORETICAL_LADDER if args.theoretical else PRACTICAL_LADDER
    s = lemma7_surgery(a, b, _interval(ctx, args.I), _interval(ctx, args.J), args.beta, args.gamma, ladder)
    return s.to_dict()


def cmd_stickout(args) -> dict:
    from .constructions import stickout_search
    from .zp import ZpSet

    ctx = _context(args)
    x, y = _read_set(ctx, args.a, "a"), _read_set(ctx, args.b, "b")
    z = _read_set(ctx, args.z, "z") if args.z is not None else ZpSet.empty(ctx)
    res = stickout_search(x, y, z, (args.c1, args.c2), args.seed, max_restarts=args.restarts)
    return res.to_dict()


def cmd_families(args) -> dict:
    from .constructions import FamiliesConfig, lemma10_families, verify_families

    ctx = _context(args)
    ip, jp = _parts(ctx, args.I_parts), _parts(ctx, args.J_parts)
    cfg = FamiliesConfig(Fraction(1, 2**10)) if args.theoretical else FamiliesConfig()
    fam = lemma10_families(ip, jp, args.alpha, args.beta, cfg)
    return {**fam.to_dict(), "checks": verify_families(fam, ip, jp)}


def cmd_pipeline(args) -> dict:
    from .constructions import PipelineConfig, thm1_pipeline
    from .errors import StageFailed

    ctx = _context(args)
    a, b = _read_set(ctx, args.a, "a"), _read_set(ctx, args.b, "b")
    cfg = PipelineConfig(fast_path=not args.no_fast_path, c=args.c)
    try:
        res = thm1_pipeline(a, b, (args.c1, args.c2), args.alpha, args.beta, args.seed, cfg)
    except StageFailed as exc:
        return {"found": False, "failed_stage": exc.stage, "diagnostics": exc.diagnostics,
                "config": cfg.to_dict()}
    return {"config": cfg.to_dict(), **res.to_dict()}


def cmd_process(args) -> dict:
    from .process import COMPLETED, ProcessParams, claim_b_check, run_process, theorem2_check

    ctx = _context(args)
    a, b = _read_set(ctx, args.a, "a"), _read_set(ctx, args.b, "b")
    params = ProcessParams(args.epsilon, args.K, args.delta)
    trace = run_process(a, b, params, args.seed)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="\n") as fh:
            for st in trace.steps:
                fh.write(json.dumps(st.to_dict(), separators=(",", ":")) + "\n")
    out = trace.to_dict()
    if trace.terminal == COMPLETED:
        out["claim_b"] = claim_b_check(trace).to_dict()
    out["theorem2"] = theorem2_check(trace, args.trials, args.seed).to_dict()
    return out


def cmd_experiment_run(args) -> dict:
    from .experiments import load_config, run_experiment

    cfg = load_config(args.config)
    rec = run_experiment(cfg, args.out or cfg.output or ".", jobs=args.jobs)
    return {"name": cfg.name, "config_hash": rec.config_hash, "rows": len(rec.rows), "files": list(rec.paths),
            "summary": rec.summary}


def cmd_experiment_report(args) -> dict:
    from .experiments import gnuplot_script, read_record, summarize

    header, rows = read_record(args.rows)
    summary = summarize(header["operation"], rows, header["config"].get("threshold", 0.95))
    out = {"operation": header["operation"], "config_hash": header["config_hash"], "summary": summary}
    if args.gnuplot:
        out["gnuplot"] = gnuplot_script(args.gnuplot, header["operation"])
    return out


# --- parser ----------------------------------------------------------------------------------

def _add_sets(sp, b_required=True, with_b=True):
    sp.add_argument("--p", type=int, help="prime modulus (Z_p mode)")
    sp.add_argument("--window", type=int, help="integer-line window size instead of --p")
    sp.add_argument("--a", help="set A: file path or comma list")
    if with_b:
        sp.add_argument("--b", help="set B: file path or comma list" + ("" if b_required else " (default A)"))


def _globals(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags with suppressed defaults, so
    # "sumset-lab --seed 5 kernel ..." keeps the 5
    g = argparse.ArgumentParser(add_help=False)
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g.add_argument("--seed", type=int, default=d(0))
    g.add_argument("--jobs", type=int, default=d(1))
    g.add_argument("--out", default=d(None), help="output file (directory for experiment run)")
    g.add_argument("--format", choices=("json", "csv"), default=d("json"))
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _globals(True)
    ap = argparse.ArgumentParser(prog="sumset-lab", parents=[_globals(False)],
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("kernel", parents=[common], help="sumset, representation counts, popularity, AP fit")
    _add_sets(sp, b_required=False)
    sp.add_argument("--rep", action="store_true", help="include r(x) for every sum")
    sp.add_argument("--alpha", type=_frac, help="popularity threshold")
    sp.add_argument("--ap", action="store_true", help="brute-force AP distance")
    sp.add_argument("--ap-cap", type=int, default=101)
    sp.set_defaults(func=cmd_kernel)

    sp = sub.add_parser("witness", parents=[common], help="search for a budgeted witness pair")
    _add_sets(sp)
    sp.add_argument("--c1", type=int, required=True)
    sp.add_argument("--c2", type=int, required=True)
    sp.add_argument("--target", type=int)
    sp.add_argument("--tries", type=int, default=200)
    sp.add_argument("--local-steps", type=int, default=20000)
    sp.add_argument("--exhaustive-cap", type=int, default=10**5)
    sp.add_argument("--mc-trials", type=int, default=0, help="also estimate E|A'+B'|")
    sp.add_argument("--mode", choices=("points", "subset"), default="points")
    sp.set_defaults(func=cmd_witness)

    sp = sub.add_parser("frontier", parents=[common], help="exact Pareto frontier of witness budgets")
    _add_sets(sp, b_required=False)
    sp.add_argument("--target", type=int)
    sp.add_argument("--cap", type=int, default=10**8)
    sp.set_defaults(func=cmd_frontier)

    sp = sub.add_parser("construct", parents=[common], help="fibre-family witness for near-interval sets")
    _add_sets(sp)
    sp.add_argument("--I", required=True, help="interval containing A as 'left,length'")
    sp.add_argument("--J", required=True, help="interval containing B as 'left,length'")
    sp.add_argument("--c1", type=int, required=True)
    sp.add_argument("--c2", type=int, required=True)
    sp.add_argument("--k", type=int, default=4)
    sp.add_argument("--t", type=int, default=6)
    sp.add_argument("--gamma", type=_frac, default=Fraction(1, 20))
    sp.add_argument("--gamma-prime", type=_frac)
    sp.add_argument("--alpha", type=_frac, default=Fraction(1, 2))
    sp.add_argument("--c", type=int, default=8)
    sp.add_argument("--max-samples", type=int, default=16)
    sp.add_argument("--theoretical", action="store_true")
    sp.add_argument("--fg-trials", type=int, default=0, help="also run the family expectation check")
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("surgery", parents=[common], help="balance the end masses of two near-intervals")
    _add_sets(sp)
    sp.add_argument("--I", required=True)
    sp.add_argument("--J", required=True)
    sp.add_argument("--beta", type=_frac, required=True)
    sp.add_argument("--gamma", type=_frac, required=True)
    sp.add_argument("--theoretical", action="store_true")
    sp.set_defaults(func=cmd_surgery)

    sp = sub.add_parser("stickout", parents=[common], help="pair whose sums escape a forbidden set")
    _add_sets(sp)
    sp.add_argument("--z", help="forbidden set Z: file path or comma list")
    sp.add_argument("--c1", type=int, required=True)
    sp.add_argument("--c2", type=int, required=True)
    sp.add_argument("--restarts", type=int, default=100)
    sp.set_defaults(func=cmd_stickout)

    sp = sub.add_parser("families", parents=[common], help="tile families covering the outside pieces")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--window", type=int)
    sp.add_argument("--I-parts", required=True, help="'l1,n1;l2,n2;l3,n3'")
    sp.add_argument("--J-parts", required=True)
    sp.add_argument("--alpha", type=_frac, required=True)
    sp.add_argument("--beta", type=_frac, required=True)
    sp.add_argument("--theoretical", action="store_true")
    sp.set_defaults(func=cmd_families)

    sp = sub.add_parser("pipeline", parents=[common], help="end-to-end witness search")
    _add_sets(sp)
    sp.add_argument("--c1", type=int, required=True)
    sp.add_argument("--c2", type=int, required=True)
    sp.add_argument("--alpha", type=_frac, required=True)
    sp.add_argument("--beta", type=_frac, required=True)
    sp.add_argument("--c", type=int, default=1, help="gate c1*c2 >= c*max(|A|,|B|)")
    sp.add_argument("--no-fast-path", action="store_true")
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("process", parents=[common], help="popularity-filtering process")
    _add_sets(sp)
    sp.add_argument("--epsilon", type=_frac, default=Fraction(1, 2))
    sp.add_argument("--K", type=_frac, default=Fraction(2))
    sp.add_argument("--delta", type=_frac, default=Fraction(1, 10))
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--trace", help="write one JSON object per step to this file")
    sp.set_defaults(func=cmd_process)

    ep = sub.add_parser("experiment", parents=[common], help="run or summarise a configured sweep")
    esub = ep.add_subparsers(dest="action", required=True)
    rp = esub.add_parser("run", parents=[common])
    rp.add_argument("config", help="TOML experiment config")
    rp.set_defaults(func=cmd_experiment_run)
    rp = esub.add_parser("report", parents=[common])
    rp.add_argument("rows", help="rows.jsonl written by 'experiment run'")
    rp.add_argument("--gnuplot", metavar="CSV", help="include a gnuplot script for this summary CSV")
    rp.set_defaults(func=cmd_experiment_report)
    return ap


def _to_csv(payload: dict) -> str:
    from .experiments import csv_text

    if isinstance(payload.get("summary"), list) and payload["summary"]:
        return csv_text(payload["summary"])
    flat = {k: (json.dumps(v, separators=(",", ":")) if isinstance(v, (list, dict)) else v)
            for k, v in payload.items()}
    return csv_text([flat])


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    try:
        import numpy as np

        if isinstance(o, np.generic):
            return o.item()
    except ImportError:  # pragma: no cover
        pass
    raise TypeError(f"cannot serialise {type(o).__name__}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        payload = args.func(args)
    except SumsetLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if args.command != "experiment":
        payload = {"command": args.command, "seed": args.seed, "rng": RNG_NAME, **payload}
    if args.format == "csv":
        text = _to_csv(payload)
    else:
        text = json.dumps(payload, indent=2, default=_json_default) + "\n"
    if args.out and args.command != "experiment":
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
