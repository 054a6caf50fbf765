"""Instance generators, experiment sweeps, and their on-disk records.

A run is fixed by its config and master seed. Rows go to ``<name>.rows.jsonl``
(one header line, then one object per instance, keys in a fixed order) and a
summary recomputed from those rows goes to ``<name>.summary.csv``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import tomli

from .errors import CapExceeded, ConfigError, InfeasibleSpec, SchemaVersionError, StageFailed, SumsetLabError
from .kernel import as_fraction, sumset
from .rng import shard_rng
from .witness import find_witness, witness_frontier
from .zp import Context, ZpSet, interval, is_prime, modp

SCHEMA_VERSION = 1
FAMILIES = ("random", "interval", "holes", "two_aps", "sidon")
OPERATIONS = ("estimate_constant", "frontier", "pipeline", "process")


# --- instances ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InstanceSpec:
    family: str
    p: int
    n: int
    hole_rate: float = 0.05
    seed: int = 0


def _check_spec(spec: InstanceSpec) -> None:
    if spec.family not in FAMILIES:
        raise InfeasibleSpec(f"unknown family {spec.family!r}; choose from {FAMILIES}")
    if not is_prime(spec.p):
        raise InfeasibleSpec(f"p = {spec.p} is not prime")
    if not (1 <= spec.n <= spec.p):
        raise InfeasibleSpec(f"n = {spec.n} outside [1, p = {spec.p}]")
    if not (0 <= spec.hole_rate < 1):
        raise InfeasibleSpec(f"hole rate {spec.hole_rate} outside [0, 1)")


def greedy_sidon(p: int, n: int) -> list[int]:
    """First n residues of the greedy B2 set of Z_p (ascending scan, all x+y distinct, x <= y)."""
    chosen: list[int] = []
    sums = np.zeros(p, dtype=bool)
    for x in range(p):
        new = [(x + y) % p for y in chosen] + [(2 * x) % p]
        if len(set(new)) == len(new) and not sums[new].any():
            chosen.append(x)
            sums[new] = True
            if len(chosen) == n:
                return chosen
    raise InfeasibleSpec(f"greedy Sidon set in Z_{p} stops at {len(chosen)} < {n} elements")


def _two_aps(p: int, n: int, diff: int, rng) -> ZpSet:
    n1 = n // 2
    gap = int(rng.integers(1, max(2, (p - n) // 2)))
    start = int(rng.integers(p))
    steps = np.concatenate((np.arange(n1), n1 + gap + np.arange(n - n1)))
    return ZpSet.from_array(modp(p), np.unique((start + diff * steps) % p))


def generate_instance(spec: InstanceSpec, index: int) -> tuple[Context, ZpSet, ZpSet, dict]:
    """(context, A, B, descriptor) for instance ``index``; a pure function of (spec, index)."""
    _check_spec(spec)
    p, n = spec.p, spec.n
    ctx = modp(p)
    rng = shard_rng(spec.seed, p, n, index)
    info: dict = {"family": spec.family, "p": p, "n": n, "index": index}
    if spec.family == "interval":
        a = b = interval(ctx, 0, n)
    elif spec.family == "random":
        a, b = (ZpSet.from_array(ctx, np.sort(rng.choice(p, n, replace=False))) for _ in range(2))
    elif spec.family == "holes":
        if 2 * n > p:
            raise InfeasibleSpec("holes family needs 2n <= p")
        keep_a = rng.random(n) >= spec.hole_rate
        keep_b = rng.random(n) >= spec.hole_rate
        keep_a[0] = keep_b[0] = True
        a = ZpSet.from_array(ctx, np.flatnonzero(keep_a))
        b = ZpSet.from_array(ctx, np.flatnonzero(keep_b))
        info.update(holes_a=n - len(a), holes_b=n - len(b), hole_rate=spec.hole_rate)
    elif spec.family == "two_aps":
        if 2 * n > p:
            raise InfeasibleSpec("two_aps family needs 2n <= p")
        diff = int(rng.integers(1, p))
        a, b = _two_aps(p, n, diff, rng), _two_aps(p, n, diff, rng)
        info["difference"] = diff
    else:
        a = b = ZpSet.from_array(ctx, greedy_sidon(p, n))
    info.update(size_a=len(a), size_b=len(b))
    return ctx, a, b, info


# --- config ------------------------------------------------------------------------------

_TOP_KEYS = {"name", "seed", "operation", "output", "generator", "sweep", "params"}
_GEN_KEYS = {"family", "p", "n", "hole_rate"}
_SWEEP_KEYS = {"C", "seeds", "threshold"}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    operation: str
    family: str
    p: tuple[int, ...]
    n: tuple[int, ...]
    seed: int = 0
    hole_rate: float = 0.05
    C: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 6.0, 8.0)
    seeds: int = 50
    threshold: float = 0.95
    params: dict = field(default_factory=dict)
    output: str | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["p"], out["n"], out["C"] = list(self.p), list(self.n), list(self.C)
        return out

    def digest(self) -> str:
        body = {k: v for k, v in self.to_dict().items() if k != "output"}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]

    def cells(self) -> list[tuple[int, int]]:
        return [(p, n) for p in self.p for n in self.n]


def _as_tuple(value, kind, where: str) -> tuple:
    items = value if isinstance(value, list) else [value]
    try:
        return tuple(kind(v) for v in items)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a parsed config, naming the offending field on failure."""
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown top-level field {key!r}")
    for key in ("name", "operation", "generator"):
        if key not in raw:
            raise ConfigError(f"missing field {key!r}")
    gen, sweep = raw["generator"], raw.get("sweep", {})
    if not isinstance(gen, dict) or not isinstance(sweep, dict):
        raise ConfigError("[generator] and [sweep] must be tables")
    for key in gen:
        if key not in _GEN_KEYS:
            raise ConfigError(f"unknown field generator.{key}")
    for key in sweep:
        if key not in _SWEEP_KEYS:
            raise ConfigError(f"unknown field sweep.{key}")
    if raw["operation"] not in OPERATIONS:
        raise ConfigError(f"operation: {raw['operation']!r} not one of {OPERATIONS}")
    for key in ("family", "p", "n"):
        if key not in gen:
            raise ConfigError(f"missing field generator.{key}")
    if gen["family"] not in FAMILIES:
        raise ConfigError(f"generator.family: {gen['family']!r} not one of {FAMILIES}")
    cfg = ExperimentConfig(
        name=str(raw["name"]), operation=raw["operation"], family=gen["family"],
        p=_as_tuple(gen["p"], int, "generator.p"), n=_as_tuple(gen["n"], int, "generator.n"),
        seed=int(raw.get("seed", 0)), hole_rate=float(gen.get("hole_rate", 0.05)),
        C=_as_tuple(sweep.get("C", list(ExperimentConfig.C)), float, "sweep.C"),
        seeds=int(sweep.get("seeds", 50)), threshold=float(sweep.get("threshold", 0.95)),
        params=dict(raw.get("params", {})), output=raw.get("output"))
    if cfg.seeds < 1:
        raise ConfigError("sweep.seeds must be >= 1")
    for p, n in cfg.cells():
        try:
            _check_spec(InstanceSpec(cfg.family, p, n, cfg.hole_rate, cfg.seed))
        except InfeasibleSpec as exc:
            raise ConfigError(f"generator: {exc}") from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    """Parse a TOML config; syntax errors carry tomli's line/column message."""
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


# --- per-instance work -------------------------------------------------------------------

def _budget(C: float, n: int, size: int) -> int:
    return max(1, min(size, math.ceil(C * math.sqrt(n))))


def _row_estimate(cfg: ExperimentConfig, p: int, n: int, k: int) -> list[dict]:
    spec = InstanceSpec(cfg.family, p, n, cfg.hole_rate, cfg.seed)
    _, a, b, info = generate_instance(spec, k)
    target = min(p, len(a) + len(b) - 1)
    cap = int(cfg.params.get("exhaustive_cap", 10**5))
    rows = []
    for ci, C in enumerate(cfg.C):
        c1, c2 = _budget(C, n, len(a)), _budget(C, n, len(b))
        res, route = find_witness(a, b, (c1, c2), target, shard_rng(cfg.seed, p, n, k, ci),
                                  random_tries=int(cfg.params.get("random_tries", 200)),
                                  local_steps=int(cfg.params.get("local_steps", 20000)), exhaustive_cap=cap)
        # re-verify with an independent kernel call before anything is recorded
        achieved = len(sumset(res.a_sub, res.b_sub)) if res is not None else None
        ok = res is not None and achieved >= target and res.a_sub <= a and res.b_sub <= b
        rows.append({"p": p, "n": n, "instance": k, "C": C, "c1": c1, "c2": c2, "target": target,
                     "found": bool(ok), "route": route, "achieved": achieved, "regime": _regime(p, n),
                     "descriptor": info})
    return rows


def _regime(p: int, n: int) -> str:
    return "n<=p/3" if 3 * n <= p else "question1"


def _row_frontier(cfg: ExperimentConfig, p: int, n: int, k: int) -> list[dict]:
    spec = InstanceSpec(cfg.family, p, n, cfg.hole_rate, cfg.seed)
    _, a, b, info = generate_instance(spec, k)
    target = min(p, len(a) + len(b) - 1)
    cap = int(cfg.params.get("exhaustive_cap", 10**8))
    try:
        front = witness_frontier(a, b, target, cap)
    except CapExceeded as exc:
        return [{"p": p, "n": n, "instance": k, "target": target, "cap_exceeded": True, "error": str(exc),
                 "frontier": None, "min_product": None, "product_ratio": None, "monotone": None,
                 "descriptor": info}]
    pairs = [[f.c1, f.c2] for f in front]
    products = [c1 * c2 for c1, c2 in pairs]
    monotone = all(x[0] < y[0] and x[1] > y[1] for x, y in zip(pairs, pairs[1:]))
    return [{"p": p, "n": n, "instance": k, "target": target, "cap_exceeded": False, "error": None,
             "frontier": pairs, "min_product": min(products) if products else None,
             "product_ratio": min(products) / max(len(a), len(b)) if products else None,
             "monotone": monotone, "descriptor": info}]


def _row_pipeline(cfg: ExperimentConfig, p: int, n: int, k: int) -> list[dict]:
    from .constructions import PipelineConfig, thm1_pipeline

    spec = InstanceSpec(cfg.family, p, n, cfg.hole_rate, cfg.seed)
    _, a, b, info = generate_instance(spec, k)
    alpha = as_fraction(cfg.params.get("alpha", 0.5))
    beta = as_fraction(cfg.params.get("beta", 0.1))
    pc = PipelineConfig(fast_path=bool(cfg.params.get("fast_path", True)))
    rows = []
    for ci, C in enumerate(cfg.C):
        c1, c2 = _budget(C, n, len(a)), _budget(C, n, len(b))
        row = {"p": p, "n": n, "instance": k, "C": C, "c1": c1, "c2": c2, "target": len(a) + len(b) - 1}
        try:
            res = thm1_pipeline(a, b, (c1, c2), alpha, beta, shard_rng(cfg.seed, p, n, k, ci), pc)
            achieved = len(sumset(res.witness.a_sub, res.witness.b_sub))
            row.update(found=achieved >= row["target"], branch=res.branch, achieved=achieved, failed_stage=None)
        except StageFailed as exc:
            row.update(found=False, branch="bound" if exc.stage == "bound" else "structured", achieved=None,
                       failed_stage=exc.stage)
        except SumsetLabError as exc:
            row.update(found=False, branch="gate", achieved=None, failed_stage=type(exc).__name__)
        row["descriptor"] = info
        rows.append(row)
    return rows


def _row_process(cfg: ExperimentConfig, p: int, n: int, k: int) -> list[dict]:
    from .process import ProcessParams, run_process, theorem2_check

    spec = InstanceSpec(cfg.family, p, n, cfg.hole_rate, cfg.seed)
    _, a, b, info = generate_instance(spec, k)
    params = ProcessParams(as_fraction(cfg.params.get("epsilon", 0.5)), as_fraction(cfg.params.get("K", 2)),
                           as_fraction(cfg.params.get("delta", 0.1)))
    trace = run_process(a, b, params)
    chk = theorem2_check(trace, int(cfg.params.get("trials", 200)), shard_rng(cfg.seed, p, n, k))
    return [{"p": p, "n": n, "instance": k, "terminal": trace.terminal, "steps": len(trace.steps),
             "shao_rate": trace.shao_rate(), "designated": chk.step, "mean": chk.estimate.mean,
             "std_error": chk.estimate.std_error, "target": chk.target, "flag": bool(chk.flag),
             "descriptor": info}]


_WORKERS = {"estimate_constant": _row_estimate, "frontier": _row_frontier,
            "pipeline": _row_pipeline, "process": _row_process}


def _task(args) -> list[dict]:
    cfg, p, n, k = args
    return _WORKERS[cfg.operation](cfg, p, n, k)


# --- summaries ---------------------------------------------------------------------------

def summarize(operation: str, rows: list[dict], threshold: float = 0.95) -> list[dict]:
    """One summary line per (p, n) cell, or per (p, n, C) for the budget sweeps."""
    if operation in ("estimate_constant", "pipeline"):
        rate = defaultdict(list)
        for r in rows:
            rate[(r["p"], r["n"], r["C"])].append(r["found"])
        out = []
        cells = sorted({(p, n) for p, n, _ in rate})
        for p, n in cells:
            cs = sorted(C for q, m, C in rate if (q, m) == (p, n))
            rates = {C: float(np.mean(rate[(p, n, C)])) for C in cs}
            c_min = next((C for C in cs if rates[C] >= threshold), None)
            for C in cs:
                out.append({"p": p, "n": n, "C": C, "instances": len(rate[(p, n, C)]),
                            "success_rate": rates[C], "C_min": c_min, "regime": _regime(p, n)})
        return out
    if operation == "frontier":
        cells = defaultdict(list)
        for r in rows:
            cells[(r["p"], r["n"])].append(r)
        out = []
        for (p, n), rs in sorted(cells.items()):
            ok = [r for r in rs if not r["cap_exceeded"]]
            ratios = [r["product_ratio"] for r in ok if r["product_ratio"] is not None]
            out.append({"p": p, "n": n, "instances": len(rs), "cap_exceeded": len(rs) - len(ok),
                        "monotone": all(r["monotone"] for r in ok),
                        "mean_product_ratio": float(np.mean(ratios)) if ratios else None,
                        "max_product_ratio": max(ratios) if ratios else None})
        return out
    if operation == "process":
        cells = defaultdict(list)
        for r in rows:
            cells[(r["p"], r["n"])].append(r)
        out = []
        for (p, n), rs in sorted(cells.items()):
            terms = defaultdict(int)
            for r in rs:
                terms[r["terminal"]] += 1
            rates = [r["shao_rate"] for r in rs if r["shao_rate"] is not None]
            out.append({"p": p, "n": n, "instances": len(rs),
                        "flag_rate": float(np.mean([r["flag"] for r in rs])),
                        "shao_rate": float(np.mean(rates)) if rates else None,
                        "terminals": ";".join(f"{k}={v}" for k, v in sorted(terms.items()))})
        return out
    raise ConfigError(f"unknown operation {operation!r}")


# --- records -----------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentRecord:
    config: ExperimentConfig
    config_hash: str
    rows: list[dict]
    summary: list[dict]
    paths: tuple[str, ...] = ()


def _json_line(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def csv_text(rows: list[dict]) -> str:
    """CSV with the first row's keys as header, LF line endings."""
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, out_dir=None, jobs: int = 1) -> ExperimentRecord:
    """Run every (cell, instance) task and persist rows plus summary.

    Tasks run in a process pool when ``jobs > 1``; results come back in
    task order, so files are identical for any worker count.
    """
    tasks = [(cfg, p, n, k) for p, n in cfg.cells() for k in range(cfg.seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_task, tasks))
    else:
        chunks = [_task(t) for t in tasks]
    rows = []
    for chunk in chunks:
        for r in chunk:
            rows.append({"index": len(rows), **r})
    summary = summarize(cfg.operation, rows, cfg.threshold)
    digest = cfg.digest()
    paths: tuple[str, ...] = ()
    out_dir = out_dir if out_dir is not None else cfg.output
    if out_dir is not None:
        paths = write_record(Path(out_dir), cfg, digest, rows, summary)
    return ExperimentRecord(cfg, digest, rows, summary, paths)


def write_record(out_dir: Path, cfg: ExperimentConfig, digest: str, rows, summary) -> tuple[str, str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    rows_path = out_dir / f"{cfg.name}.rows.jsonl"
    summary_path = out_dir / f"{cfg.name}.summary.csv"
    header = {"kind": "header", "schema_version": SCHEMA_VERSION, "config_hash": digest,
              "operation": cfg.operation, "config": cfg.to_dict()}
    with open(rows_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_json_line(header))
        for r in rows:
            fh.write(_json_line({"kind": "row", **r}))
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text(summary))
    return str(rows_path), str(summary_path)


def read_record(path) -> tuple[dict, list[dict]]:
    """(header, rows) from a rows file; unknown schema versions are rejected."""
    with open(path, encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("kind") != "header":
        raise SchemaVersionError(f"{path}: missing header line")
    header = lines[0]
    if header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionError(f"{path}: schema version {header.get('schema_version')!r}, expected {SCHEMA_VERSION}")
    rows = [{k: v for k, v in r.items() if k != "kind"} for r in lines[1:]]
    return header, rows


def report(path, threshold: float | None = None) -> list[dict]:
    header, rows = read_record(path)
    thr = header["config"].get("threshold", 0.95) if threshold is None else threshold
    return summarize(header["operation"], rows, thr)


def gnuplot_script(summary_csv: str, operation: str) -> str:
    """Plot script for a summary CSV written by this module."""
    if operation in ("estimate_constant", "pipeline"):
        return (f"set datafile separator ','\nset key autotitle columnhead\n"
                f"set xlabel 'C'\nset ylabel 'success rate'\nset yrange [0:1.05]\n"
                f"plot '{summary_csv}' using 3:5 with linespoints\n")
    if operation == "frontier":
        return (f"set datafile separator ','\nset key autotitle columnhead\n"
                f"set xlabel 'n'\nset ylabel 'min c1*c2 / n'\n"
                f"plot '{summary_csv}' using 2:6 with points\n")
    return (f"set datafile separator ','\nset key autotitle columnhead\n"
            f"set xlabel 'n'\nset ylabel 'flag rate'\nplot '{summary_csv}' using 2:4 with points\n")


def estimate_constant(family: str, p_values, n_values, C_grid, seeds: int = 50, threshold: float = 0.95,
                      seed: int = 0, hole_rate: float = 0.05, jobs: int = 1, **params) -> list[dict]:
    """Success rate of the witness search at budgets ceil(C sqrt(n)) and the smallest passing C per cell."""
    if not list(C_grid):
        return []
    cfg = ExperimentConfig("estimate_constant", "estimate_constant", family, tuple(p_values), tuple(n_values),
                           seed, hole_rate, tuple(float(c) for c in C_grid), seeds, threshold, dict(params))
    return run_experiment(cfg, None, jobs).summary


def frontier_experiment(family: str, p: int, n_values, seeds: int = 50, seed: int = 0,
                        jobs: int = 1, **params) -> tuple[list[dict], list[dict]]:
    """Exhaustive Pareto frontiers per instance, and their per-n aggregate."""
    cfg = ExperimentConfig("frontier", "frontier", family, (p,), tuple(n_values), seed, seeds=seeds,
                           params=dict(params))
    rec = run_experiment(cfg, None, jobs)
    return rec.rows, rec.summary
