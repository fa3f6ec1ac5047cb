"""Replicated experiment orchestration.

A plan bundles a growth configuration with a replicate count, a statistic
selection, and tolerances.  Replicates get decorrelated seeds through a
fixed splitmix64 mix of (base seed, replicate index), run independently
(optionally in worker processes), and fold into aggregates in ascending
replicate order regardless of completion order -- so a rerun of the same
plan is byte-identical, and so is a rerun under any worker count.

Wall-clock time is kept on the in-memory summary only and never
serialized; every serialized byte is a pure function of the plan.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import estimators as est
from . import theory
from .configio import config_hash, render_config
from .errors import ArgumentError
from .growth import grow
from .kernels import GrowthConfig

__all__ = [
    "ExperimentPlan",
    "RunSummary",
    "run",
    "tv_distance",
    "replicate_seed",
    "splitmix64",
]

_STATISTICS = ("degree", "fringe", "root", "clt", "delay-scan")

_DEFAULT_TOLERANCES = {
    "degree_tv": 0.02,
    "fringe_abs": 0.02,
    "pair_abs": 0.02,
    "clt_var_rel": 0.25,
}

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One scramble round of the splitmix64 generator (public constants)."""
    x &= _MASK64
    z = (x + _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def replicate_seed(base_seed: int, r: int) -> int:
    """Derived seed for replicate r: splitmix64(base + (r+1) * gamma)."""
    return splitmix64((base_seed + (r + 1) * _GAMMA) & _MASK64)


@dataclass(frozen=True)
class ExperimentPlan:
    config: GrowthConfig
    replicates: int = 1
    statistics: tuple = ("degree",)
    tolerances: dict = field(default_factory=dict)
    outdir: str | None = None
    scan_grid: tuple | None = None
    degree_kmax: int = 200
    workers: int = 1

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ArgumentError("replicates must be >= 1")
        stats = tuple(self.statistics)
        object.__setattr__(self, "statistics", stats)
        if not stats:
            raise ArgumentError("select at least one statistic")
        for s in stats:
            if s not in _STATISTICS:
                raise ArgumentError(f"unknown statistic {s!r}; choose from {_STATISTICS}")
        unknown = set(self.tolerances) - set(_DEFAULT_TOLERANCES)
        if unknown:
            raise ArgumentError(f"unknown tolerance keys: {sorted(unknown)}")
        if ("clt" in stats or "root" in stats) and self.config.kernel.kind != "affine":
            raise ArgumentError(
                "clt/root statistics rely on affine-kernel constants; use an affine kernel"
            )
        if "clt" in stats and self.replicates < 2:
            raise ArgumentError("clt statistic needs at least 2 replicates")
        if self.workers < 1:
            raise ArgumentError("workers must be >= 1")

    def resolved_tolerances(self) -> dict:
        out = dict(_DEFAULT_TOLERANCES)
        out.update(self.tolerances)
        return out


@dataclass(frozen=True)
class RunSummary:
    payload: dict  # everything that gets serialized
    ok: bool
    wall_time: float  # in-memory only, deliberately not serialized

    @property
    def statistics(self) -> dict:
        return self.payload["statistics"]

    @property
    def checks(self) -> dict:
        return self.payload["checks"]


# ---------------------------------------------------------------------------
# Total variation
# ---------------------------------------------------------------------------


def tv_distance(empirical, theory_probs) -> float:
    """Half-L1 over the compared support, plus the lumped remainder gap.

    empirical may be a DegreeHist (compared on degrees 1..len(theory)),
    a FringeCensus (compared on the theory table's codes), or a plain
    probability vector aligned with theory_probs.
    """
    if isinstance(empirical, est.DegreeHist):
        th = np.asarray(theory_probs, dtype=np.float64)
        emp = np.zeros(len(th))
        upto = min(len(th) + 1, len(empirical.counts))
        emp[: upto - 1] = empirical.counts[1:upto]
        emp = emp / empirical.n
    elif isinstance(empirical, est.FringeCensus):
        codes = sorted(theory_probs)
        th = np.array([theory_probs[c] for c in codes])
        emp = np.array([empirical.freq(c) for c in codes])
    else:
        emp = np.asarray(empirical, dtype=np.float64)
        th = np.asarray(theory_probs, dtype=np.float64)
        if emp.shape != th.shape:
            raise ArgumentError("probability vectors must share a support")
    rem_gap = abs((1.0 - emp.sum()) - (1.0 - th.sum()))
    return 0.5 * (float(np.abs(emp - th).sum()) + rem_gap)


# ---------------------------------------------------------------------------
# Replicate execution
# ---------------------------------------------------------------------------


def _replicate_record(args) -> dict:
    """One replicate worth of raw statistics (picklable, order-agnostic)."""
    config, stats, r = args
    cfg = dataclasses.replace(config, seed=replicate_seed(config.seed, r))
    trace = grow(cfg)
    rec: dict = {"replicate": r, "retries": trace.retries}
    hist = est.degree_hist(trace)
    if "degree" in stats:
        rec["degree_counts"] = hist.counts
    if "fringe" in stats:
        census = est.fringe_census(trace, cap=cfg.fringe_cap)
        pairs = est.extended_fringe_census(trace, cap=cfg.fringe_cap)
        rec["fringe_counts"] = census.counts
        rec["fringe_truncated"] = census.truncated
        rec["pair_counts"] = pairs.counts
        rec["pair_truncated"] = pairs.truncated
    if "root" in stats:
        alpha = config.kernel.alpha
        consts = theory.root_degree_constants(alpha, config.beta, config.delay)
        ex = consts.ex_x_truncated if consts.regime == "heavy" else None
        traj = est.root_trajectory(trace, consts.theta, ex_x=ex)
        rec["root_ns"] = traj.ns
        rec["root_values"] = traj.values
        rec["root_over_ntheta"] = traj.over_ntheta
        rec["root_over_ex"] = traj.over_truncated_mean
    if "clt" in stats:
        rec["n1"] = hist.count(1)
    return rec


def _collect_records(plan: ExperimentPlan) -> list:
    jobs = [(plan.config, plan.statistics, r) for r in range(plan.replicates)]
    if plan.workers == 1 or plan.replicates == 1:
        return [_replicate_record(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=plan.workers) as pool:
        return list(pool.map(_replicate_record, jobs, chunksize=1))


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def _aggregate_degree(plan: ExperimentPlan, records: list, lam: float) -> tuple[dict, dict]:
    config = plan.config
    maxlen = max(len(r["degree_counts"]) for r in records)
    pooled = np.zeros(maxlen, dtype=np.int64)
    for r in records:
        c = r["degree_counts"]
        pooled[: len(c)] += c
    total = plan.replicates * config.n_final
    kmax = min(plan.degree_kmax, maxlen - 1)
    p_theory = theory.degree_law(config.kernel, lam, max(kmax, 1))
    emp = pooled[1 : kmax + 1] / total
    tv = tv_distance(emp, p_theory[:kmax])
    tol = plan.resolved_tolerances()["degree_tv"]
    stat = {
        "pooled_counts": pooled,
        "kmax": kmax,
        "p_theory": p_theory,
        "tv": tv,
        "leaf_fraction": float(pooled[1] / total) if maxlen > 1 else 0.0,
    }
    check = {"tv": tv, "tolerance": tol, "ok": bool(tv <= tol)}
    return stat, check


def _aggregate_fringe(plan: ExperimentPlan, records: list, lam: float) -> tuple[dict, dict]:
    config = plan.config
    counts: dict = {}
    pair_counts: dict = {}
    truncated = 0
    pair_truncated = 0
    for r in records:
        for code, c in r["fringe_counts"].items():
            counts[code] = counts.get(code, 0) + c
        truncated += r["fringe_truncated"]
        for pair, c in r["pair_counts"].items():
            pair_counts[pair] = pair_counts.get(pair, 0) + c
        pair_truncated += r["pair_truncated"]
    total = plan.replicates * config.n_final
    table = theory.fringe_recursion(config.fringe_cap, config.kernel, lam)
    chain = theory.extended_fringe_law(table, 1)
    gaps = {
        code: abs(counts.get(code, 0) / total - p) for code, p in table.probs.items()
    }
    pair_gaps = {
        pair: abs(pair_counts.get(pair, 0) / total - mass)
        for pair, mass in chain.items()
        if mass >= 0.01
    }
    tols = plan.resolved_tolerances()
    max_gap = max(gaps.values())
    max_pair_gap = max(pair_gaps.values()) if pair_gaps else 0.0
    stat = {
        "counts": counts,
        "pair_counts": pair_counts,
        "truncated": truncated,
        "pair_truncated": pair_truncated,
        "theory": dict(table.probs),
        "pair_theory": chain,
        "max_abs_gap": max_gap,
        "max_pair_abs_gap": max_pair_gap,
        "total_vertices": total,
    }
    check = {
        "max_abs_gap": max_gap,
        "tolerance": tols["fringe_abs"],
        "max_pair_abs_gap": max_pair_gap,
        "pair_tolerance": tols["pair_abs"],
        "ok": bool(max_gap <= tols["fringe_abs"] and max_pair_gap <= tols["pair_abs"]),
    }
    return stat, check


def _aggregate_root(plan: ExperimentPlan, records: list) -> tuple[dict, dict]:
    ns = records[0]["root_ns"]
    values = np.stack([r["root_values"] for r in records])
    over_ntheta = np.stack([r["root_over_ntheta"] for r in records])
    over_ex = None
    if records[0]["root_over_ex"] is not None:
        over_ex = np.stack([r["root_over_ex"] for r in records])
    # relative drift of the normalized trajectory over the last grid octave
    if over_ntheta.shape[1] >= 2:
        drift = np.abs(over_ntheta[:, -1] - over_ntheta[:, -2]) / np.maximum(
            over_ntheta[:, -2], 1e-300
        )
    else:
        drift = np.zeros(over_ntheta.shape[0])
    stat = {
        "ns": ns,
        "values": values,
        "over_ntheta": over_ntheta,
        "over_ex": over_ex,
        "mean_over_ntheta": over_ntheta.mean(axis=0),
        "last_octave_drift": drift,
    }
    return stat, {"ok": True, "informational": True}


def _aggregate_clt(plan: ExperimentPlan, records: list) -> tuple[dict, dict]:
    config = plan.config
    alpha = config.kernel.alpha
    consts = theory.clt_constants(alpha)
    n = config.n_final
    s = np.array(
        [math.sqrt(n) * (r["n1"] / n - consts.p1) for r in records], dtype=np.float64
    )
    var = float(s.var(ddof=1))
    rel = abs(var - consts.sigma1_sq) / consts.sigma1_sq
    tol = plan.resolved_tolerances()["clt_var_rel"]
    stat = {
        "s_values": s,
        "mean": float(s.mean()),
        "variance": var,
        "sigma1_sq": consts.sigma1_sq,
        "p1": consts.p1,
    }
    check = {"variance_rel_err": rel, "tolerance": tol, "ok": bool(rel <= tol)}
    return stat, check


def _default_scan_grid(n_final: int) -> list:
    top = max(10_000, min(n_final, 1_000_000))
    grid = []
    e = 4
    while True:
        v = int(round(10.0 ** (e / 2.0)))
        if v > top:
            break
        grid.append(v)
        e += 1
    if grid[-1] != top:
        grid.append(top)
    return grid


def _aggregate_scan(plan: ExperimentPlan) -> tuple[dict, dict]:
    grid = list(plan.scan_grid) if plan.scan_grid is not None else _default_scan_grid(
        plan.config.n_final
    )
    scan = est.delay_condition_scan(plan.config.delay, grid, seed=plan.config.seed)
    stat = {
        "ns": scan.ns,
        "e_values": scan.e_values,
        "stderrs": scan.stderrs,
        "lemma_values": scan.lemma_values,
        "verdict": scan.verdict,
        "method": scan.method,
    }
    return stat, {"verdict": scan.verdict, "ok": bool(scan.verdict == "satisfied")}


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, dict):
        return {_json_key(k): _jsonable(v) for k, v in sorted(obj.items(), key=lambda kv: _json_key(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _json_key(key) -> str:
    if isinstance(key, tuple):
        return "|".join(str(k) for k in key)
    return str(key)


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv(rows, header: str) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_outputs(plan: ExperimentPlan, payload: dict, stats: dict) -> None:
    outdir = plan.outdir
    os.makedirs(outdir, exist_ok=True)
    _write(os.path.join(outdir, "config_echo.txt"), render_config(plan.config, plan.replicates))
    _write(
        os.path.join(outdir, "summary.json"),
        json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n",
    )
    n = plan.config.n_final
    if "degree" in stats:
        d = stats["degree"]
        rows = []
        for k in range(1, d["kmax"] + 1):
            rows.append((n, k, int(d["pooled_counts"][k]), d["p_theory"][k - 1]))
        _write(os.path.join(outdir, "degree_hist.csv"), _csv(rows, "n,k,count,p_theory"))
    if "fringe" in stats:
        f = stats["fringe"]
        rows = []
        for code in sorted(set(f["counts"]) | set(f["theory"])):
            rows.append((n, code, f["counts"].get(code, 0), f["theory"].get(code, 0.0)))
        _write(os.path.join(outdir, "fringe.csv"), _csv(rows, "n,code,count,prob_theory"))
    if "root" in stats:
        r = stats["root"]
        rows = []
        for i in range(r["values"].shape[0]):
            for j, nj in enumerate(r["ns"]):
                ex_cell = r["over_ex"][i, j] if r["over_ex"] is not None else float("nan")
                rows.append((i, int(nj), r["values"][i, j], r["over_ntheta"][i, j], ex_cell))
        _write(
            os.path.join(outdir, "root.csv"),
            _csv(rows, "replicate,n_j,M,M_over_ntheta,M_over_EXn"),
        )
    if "clt" in stats:
        rows = [(i, s) for i, s in enumerate(stats["clt"]["s_values"])]
        _write(os.path.join(outdir, "clt.csv"), _csv(rows, "replicate,s_r"))
    if "delay-scan" in stats:
        sc = stats["delay-scan"]
        rows = [
            (int(sc["ns"][i]), sc["e_values"][i], sc["stderrs"][i], sc["verdict"])
            for i in range(len(sc["ns"]))
        ]
        _write(os.path.join(outdir, "delay_scan.csv"), _csv(rows, "n,e_n,stderr,verdict"))


# ---------------------------------------------------------------------------
# The driver
# ---------------------------------------------------------------------------


def run(plan: ExperimentPlan) -> RunSummary:
    t0 = time.perf_counter()
    config = plan.config
    needs_growth = any(s != "delay-scan" for s in plan.statistics)
    records = _collect_records(plan) if needs_growth else []

    lam = None
    if "degree" in plan.statistics or "fringe" in plan.statistics:
        lam = theory.solve_malthusian(config.kernel).lambda_star

    stats: dict = {}
    checks: dict = {}
    if "degree" in plan.statistics:
        stats["degree"], checks["degree"] = _aggregate_degree(plan, records, lam)
    if "fringe" in plan.statistics:
        stats["fringe"], checks["fringe"] = _aggregate_fringe(plan, records, lam)
    if "root" in plan.statistics:
        stats["root"], checks["root"] = _aggregate_root(plan, records)
    if "clt" in plan.statistics:
        stats["clt"], checks["clt"] = _aggregate_clt(plan, records)
    if "delay-scan" in plan.statistics:
        stats["delay-scan"], checks["delay-scan"] = _aggregate_scan(plan)

    retries = [r["retries"] for r in records] or [0]
    ok = all(c["ok"] for c in checks.values())
    payload = {
        "config_hash": config_hash(config, plan.replicates),
        "config_echo": render_config(config, plan.replicates),
        "replicates": plan.replicates,
        "statistics": stats,
        "checks": checks,
        "tolerances": plan.resolved_tolerances(),
        "ok": ok,
        "retry_total": int(sum(retries)),
        "retry_mean": float(sum(retries) / len(retries)),
    }
    if plan.outdir is not None:
        _write_outputs(plan, payload, stats)
    return RunSummary(payload=payload, ok=ok, wall_time=time.perf_counter() - t0)
