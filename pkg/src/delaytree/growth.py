"""Tree growth engine: traces, snapshot indices, and parent samplers.

A grown tree is recorded as a :class:`TreeTrace`: birth-order parent
pointers plus, per vertex, the delay it drew and the snapshot time it
consulted.  Parent choice within a snapshot is implemented three ways, all
distributionally identical where their preconditions hold:

* ``edge``   -- endpoint-list trick, exact for uniform and affine kernels.
  The flat array of edge endpoints restricted to its first 2(m-1) entries
  contains each vertex v <= m exactly graph-degree(v in snapshot m) times,
  so a uniform entry plus a uniform-vertex mixture realises
  P(v) = (deg + alpha) / Psi(m) in O(1).
* ``rejection`` -- Fenwick-indexed proposal from the *current* weights
  restricted to [1..m], thinned by f(deg in snapshot)/f(deg now).  Exact
  for any monotone kernel; expected retries = Psi(n)-to-Psi(m) ratio.
* ``scan`` -- linear scan of snapshot weights.  Exact for every kernel and
  the oracle the other two are tested against.

Degrees that enter attachment weights are graph degrees (child count, +1
for the parent edge; the root simply has its child count, clamped to 1 at
time 1 where nothing is sampled anyway).
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, StrategyError
from .kernels import AttachmentKernel, GrowthConfig, snapshot_times

__all__ = [
    "Fenwick",
    "SnapshotIndex",
    "TreeTrace",
    "grow",
    "trace_from_parents",
    "deg_at",
    "weight_degree",
    "psi_recomputed",
    "sample_parent_scan",
    "sample_parent_affine",
    "sample_parent_rejection",
    "attachment_distribution",
    "edge_trick_distribution",
    "rejection_distribution",
    "export_trace",
    "load_trace",
]


class Fenwick:
    """Binary indexed tree over vertex weights, 1-based."""

    __slots__ = ("n", "tree")

    def __init__(self, n: int):
        self.n = n
        self.tree = [0.0] * (n + 1)

    def add(self, i: int, delta: float) -> None:
        n, tree = self.n, self.tree
        while i <= n:
            tree[i] += delta
            i += i & (-i)

    def prefix(self, i: int) -> float:
        tree = self.tree
        s = 0.0
        while i > 0:
            s += tree[i]
            i -= i & (-i)
        return s

    def search(self, r: float) -> int:
        """Smallest index i with prefix(i) >= r (assumes 0 <= r <= total)."""
        idx = 0
        bit = 1 << (self.n.bit_length() - 1)
        tree, n = self.tree, self.n
        while bit:
            nxt = idx + bit
            if nxt <= n and tree[nxt] < r:
                r -= tree[nxt]
                idx = nxt
            bit >>= 1
        return idx + 1


@dataclass
class SnapshotIndex:
    """Flat edge-endpoint list plus (optionally) the Fenwick weight index.

    ``edge_endpoints[2j-2 : 2j]`` holds (parent, child) of the j-th edge,
    the one created by vertex j+1.  Restricted to the first 2(m-1) entries
    the multiset of endpoints satisfies, for every vertex v <= m,
    count(v) + 1{v == 1} = deg_at(v, m): only the root lacks a parent edge.
    """

    edge_endpoints: np.ndarray
    fenwick: Fenwick | None = None


@dataclass
class TreeTrace:
    """Complete record of one growth run (or a hand-built tree).

    ``parents[v]`` is the parent of vertex v (v >= 2), ``child_times[v]``
    the sorted birth times of v's children, ``psi[m]`` the total attachment
    weight of the time-m tree, ``xis[v]``/``snapshots[v]`` the delay drawn
    and snapshot consulted by vertex v (0 for hand-built traces and for the
    deterministic vertex 2).
    """

    kernel: AttachmentKernel
    n: int
    parents: np.ndarray
    child_times: list
    psi: np.ndarray
    xis: np.ndarray
    snapshots: np.ndarray
    index: SnapshotIndex
    retries: int = 0
    config: GrowthConfig | None = None

    def children_count_final(self) -> np.ndarray:
        """c[v] = number of children of v at the final time (c[0] unused)."""
        c = np.bincount(self.parents[2 : self.n + 1], minlength=self.n + 1)
        return c[: self.n + 1]


# ---------------------------------------------------------------------------
# Degree views
# ---------------------------------------------------------------------------


def deg_at(trace: TreeTrace, v: int, m: int) -> int:
    """Reported degree of v at time m: 1 + children born by m; 0 if unborn.

    The root counts like everyone else (degree 1 at birth), so on the
    3-chain deg_at(1, 3) == 2.
    """
    if m < 1 or m > trace.n:
        raise ArgumentError(f"snapshot time {m} outside 1..{trace.n}")
    if v < 1 or v > trace.n:
        raise ArgumentError(f"vertex {v} outside 1..{trace.n}")
    if v > m:
        return 0
    return 1 + bisect_right(trace.child_times[v], m)


def weight_degree(trace: TreeTrace, v: int, m: int) -> int:
    """Graph degree of v in the time-m snapshot, as used by the samplers.

    Equals deg_at for every vertex except the root, which has no parent
    edge; at m = 1 the lone root is clamped to degree 1 by convention.
    """
    if m < 1 or m > trace.n:
        raise ArgumentError(f"snapshot time {m} outside 1..{trace.n}")
    if v < 1 or v > m:
        raise ArgumentError(f"vertex {v} not alive at time {m}")
    cnt = bisect_right(trace.child_times[v], m)
    if v == 1:
        return cnt if cnt >= 1 else 1
    return cnt + 1


def _snapshot_weight_degrees(trace: TreeTrace, m: int) -> np.ndarray:
    """Vector of weight degrees of vertices 1..m (index 0 = vertex 1)."""
    counts = np.bincount(trace.parents[2 : m + 1], minlength=m + 1)[1 : m + 1]
    counts[1:] += 1
    if counts[0] < 1:
        counts[0] = 1
    return counts


def psi_recomputed(trace: TreeTrace, m: int) -> float:
    """Total weight of the time-m tree, summed from scratch."""
    if m < 1 or m > trace.n:
        raise ArgumentError(f"snapshot time {m} outside 1..{trace.n}")
    if m == 1:
        return trace.kernel.evaluate(1)
    wd = _snapshot_weight_degrees(trace, m)
    return float(np.sum(trace.kernel.evaluate_array(wd)))


# ---------------------------------------------------------------------------
# Parent samplers (single draws on a frozen or growing trace)
# ---------------------------------------------------------------------------


def sample_parent_scan(trace: TreeTrace, m: int, kernel: AttachmentKernel, rng) -> int:
    """Linear-scan oracle: exact inverse-CDF over snapshot weights."""
    if m == 1:
        return 1
    w = kernel.evaluate_array(_snapshot_weight_degrees(trace, m))
    cum = np.cumsum(w)
    r = rng.random() * cum[-1]
    v = int(np.searchsorted(cum, r, side="right")) + 1
    return min(v, m)


def sample_parent_affine(trace: TreeTrace, m: int, alpha: float, rng) -> int:
    """Endpoint-list sampler for f(k) = k + alpha, exact in O(1).

    With probability m*alpha/Psi(m) a uniform vertex of [1..m], otherwise a
    uniform entry of the first 2(m-1) edge endpoints; Psi(m) =
    2(m-1) + m*alpha.
    """
    if m == 1:
        return 1
    if alpha > 0.0:
        psi_m = 2.0 * (m - 1) + m * alpha
        if rng.random() * psi_m < m * alpha:
            idx = int(rng.random() * m)
            return min(idx, m - 1) + 1
    top = 2 * (m - 1)
    e = int(rng.random() * top)
    if e >= top:
        e = top - 1
    return int(trace.index.edge_endpoints[e])


def sample_parent_rejection(trace: TreeTrace, index: SnapshotIndex, m: int, kernel: AttachmentKernel, rng) -> int:
    """Prefix-proposal + thinning sampler, exact for monotone kernels.

    Proposes v <= m with probability proportional to its *current* weight
    (Fenwick prefix search) and accepts with probability
    f(deg in snapshot m) / f(deg now) <= 1.  Increments ``trace.retries``
    once per rejected proposal.
    """
    if not getattr(kernel, "monotone", False):
        raise StrategyError("rejection sampling requires a monotone kernel")
    if index.fenwick is None:
        raise ArgumentError("trace has no Fenwick index; build one or use scan")
    if m == 1:
        return 1
    fen = index.fenwick
    total = fen.prefix(m)
    while True:
        v = fen.search(rng.random() * total)
        d_now = weight_degree(trace, v, trace.n)
        d_snap = weight_degree(trace, v, m)
        if d_snap == d_now:
            return v
        if rng.random() * kernel.evaluate(d_now) < kernel.evaluate(d_snap):
            return v
        trace.retries += 1


# ---------------------------------------------------------------------------
# Exact attachment distributions (for oracle comparisons; no sampling)
# ---------------------------------------------------------------------------


def attachment_distribution(trace: TreeTrace, m: int, kernel: AttachmentKernel) -> np.ndarray:
    """P(parent = v) over v = 1..m from snapshot weights (ground truth)."""
    if m == 1:
        return np.array([1.0])
    w = kernel.evaluate_array(_snapshot_weight_degrees(trace, m)).astype(np.float64)
    return w / w.sum()


def edge_trick_distribution(trace: TreeTrace, m: int, alpha: float) -> np.ndarray:
    """Law of :func:`sample_parent_affine`, from the endpoint array itself."""
    if m == 1:
        return np.array([1.0])
    ends = trace.index.edge_endpoints[: 2 * (m - 1)]
    counts = np.bincount(ends, minlength=m + 1)[1 : m + 1].astype(np.float64)
    psi_m = 2.0 * (m - 1) + m * alpha
    return (counts + alpha) / psi_m


def rejection_distribution(trace: TreeTrace, m: int, kernel: AttachmentKernel) -> np.ndarray:
    """Law of :func:`sample_parent_rejection` via the thinning algebra."""
    if m == 1:
        return np.array([1.0])
    d_snap = _snapshot_weight_degrees(trace, m)
    counts_now = np.bincount(trace.parents[2 : trace.n + 1], minlength=trace.n + 1)[1 : m + 1]
    counts_now[1:] += 1
    if counts_now[0] < 1:
        counts_now[0] = 1
    w_now = kernel.evaluate_array(counts_now).astype(np.float64)
    accept = kernel.evaluate_array(d_snap) / w_now
    mass = w_now * accept
    return mass / mass.sum()


# ---------------------------------------------------------------------------
# Growth
# ---------------------------------------------------------------------------


def grow(config: GrowthConfig) -> TreeTrace:
    """Grow a tree to ``config.n_final`` vertices; deterministic in the seed.

    Draw order is fixed: one vectorised block of delays for vertices
    3..n_final, then the per-step attachment draws.  Vertex 2 attaches to
    the root deterministically.
    """
    strategy = config.resolve_sampler()
    kernel = config.kernel
    n_final = config.n_final
    rng = np.random.default_rng(config.seed)
    f1 = kernel.evaluate(1)

    parents = np.zeros(n_final + 1, dtype=np.int64)
    xis = np.zeros(n_final + 1)
    snaps = np.zeros(n_final + 1, dtype=np.int64)
    child_times: list = [[] for _ in range(n_final + 1)]
    endpoints = np.zeros(2 * (n_final - 1), dtype=np.int64)
    parents[2] = 1
    snaps[2] = 1
    child_times[1].append(2)
    endpoints[0] = 1
    endpoints[1] = 2

    index = SnapshotIndex(edge_endpoints=endpoints)
    trace = TreeTrace(
        kernel=kernel,
        n=2,
        parents=parents,
        child_times=child_times,
        psi=np.zeros(2),
        xis=xis,
        snapshots=snaps,
        index=index,
        config=config,
    )

    steps = n_final - 2
    if steps > 0:
        tail = config.delay.sample_many(rng, steps)
        ms = snapshot_times(np.arange(2, n_final), tail, config.beta)
        xis[3:] = tail
        snaps[3:] = ms
        if strategy == "edge":
            _loop_edge(trace, kernel, ms, rng)
        elif strategy == "rejection":
            _loop_rejection(trace, kernel, ms, rng)
        else:
            _loop_scan(trace, kernel, ms, rng)

    trace.n = n_final
    if strategy == "edge" or steps == 0:
        # uniform/affine increments are constant from vertex 3 onwards:
        # f(1) + [f(d+1) - f(d)] = 1 for uniform, 2 + alpha for affine
        psi = np.empty(n_final + 1)
        psi[0] = 0.0
        psi[1] = f1
        psi[2] = 2.0 * f1
        if n_final >= 3:
            inc = 1.0 if kernel.kind == "uniform" else 2.0 + getattr(kernel, "alpha", 0.0)
            psi[2:] = 2.0 * f1 + np.cumsum(np.concatenate(([0.0], np.full(n_final - 2, inc))))
        trace.psi = psi
    return trace


def _loop_edge(trace: TreeTrace, kernel, ms, rng) -> None:
    parents = trace.parents
    child_times = trace.child_times
    endpoints = trace.index.edge_endpoints
    steps = len(ms)
    uniform_kernel = kernel.kind == "uniform"
    alpha = 0.0 if uniform_kernel else kernel.alpha
    if uniform_kernel:
        picks = rng.random(steps)
        for t in range(steps):
            m = ms[t]
            if m == 1:
                v = 1
            else:
                v = int(picks[t] * m)
                v = min(v, m - 1) + 1
            k = t + 3
            parents[k] = v
            endpoints[2 * k - 4] = v
            endpoints[2 * k - 3] = k
            child_times[v].append(k)
    elif alpha == 0.0:
        picks = rng.random(steps)
        for t in range(steps):
            m = ms[t]
            if m == 1:
                v = 1
            else:
                top = 2 * (m - 1)
                e = int(picks[t] * top)
                if e >= top:
                    e = top - 1
                v = endpoints[e]
            k = t + 3
            parents[k] = v
            endpoints[2 * k - 4] = v
            endpoints[2 * k - 3] = k
            child_times[v].append(k)
    else:
        branch = rng.random(steps)
        picks = rng.random(steps)
        for t in range(steps):
            m = ms[t]
            if m == 1:
                v = 1
            else:
                psi_m = 2.0 * (m - 1) + m * alpha
                if branch[t] * psi_m < m * alpha:
                    v = int(picks[t] * m)
                    v = min(v, m - 1) + 1
                else:
                    top = 2 * (m - 1)
                    e = int(picks[t] * top)
                    if e >= top:
                        e = top - 1
                    v = endpoints[e]
            k = t + 3
            parents[k] = v
            endpoints[2 * k - 4] = v
            endpoints[2 * k - 3] = k
            child_times[v].append(k)


def _loop_rejection(trace: TreeTrace, kernel, ms, rng) -> None:
    n_final = trace.parents.shape[0] - 1
    parents = trace.parents
    child_times = trace.child_times
    endpoints = trace.index.edge_endpoints
    f1 = kernel.evaluate(1)
    fen = Fenwick(n_final)
    fen.add(1, f1)
    fen.add(2, f1)
    trace.index.fenwick = fen
    wdeg = [0] * (n_final + 1)
    wdeg[1] = 1
    wdeg[2] = 1
    psi_vals = [f1, 2.0 * f1]
    psi_run = 2.0 * f1
    evaluate = kernel.evaluate
    for t in range(len(ms)):
        m = int(ms[t])
        k = t + 3
        if m == 1:
            v = 1
        else:
            total = fen.prefix(m)
            while True:
                v = fen.search(rng.random() * total)
                d_now = wdeg[v]
                cnt = bisect_right(child_times[v], m)
                d_snap = (cnt if cnt >= 1 else 1) if v == 1 else cnt + 1
                if d_snap == d_now:
                    break
                if rng.random() * evaluate(d_now) < evaluate(d_snap):
                    break
                trace.retries += 1
        parents[k] = v
        endpoints[2 * k - 4] = v
        endpoints[2 * k - 3] = k
        child_times[v].append(k)
        d_old = wdeg[v]
        wdeg[v] = d_old + 1
        wdeg[k] = 1
        delta = evaluate(d_old + 1) - evaluate(d_old)
        fen.add(v, delta)
        fen.add(k, f1)
        psi_run += f1 + delta
        psi_vals.append(psi_run)
    trace.psi = np.concatenate(([0.0], psi_vals))


def _loop_scan(trace: TreeTrace, kernel, ms, rng) -> None:
    parents = trace.parents
    child_times = trace.child_times
    endpoints = trace.index.edge_endpoints
    f1 = kernel.evaluate(1)
    wdeg = np.zeros(trace.parents.shape[0], dtype=np.int64)
    wdeg[1] = 1
    wdeg[2] = 1
    psi_vals = [f1, 2.0 * f1]
    psi_run = 2.0 * f1
    for t in range(len(ms)):
        m = int(ms[t])
        k = t + 3
        if m == 1:
            v = 1
        else:
            counts = np.bincount(parents[2 : m + 1], minlength=m + 1)[1 : m + 1]
            counts[1:] += 1
            if counts[0] < 1:
                counts[0] = 1
            w = kernel.evaluate_array(counts)
            cum = np.cumsum(w)
            r = rng.random() * cum[-1]
            v = int(np.searchsorted(cum, r, side="right")) + 1
            v = min(v, m)
        parents[k] = v
        endpoints[2 * k - 4] = v
        endpoints[2 * k - 3] = k
        child_times[v].append(k)
        d_old = int(wdeg[v])
        wdeg[v] = d_old + 1
        wdeg[k] = 1
        delta = kernel.evaluate(d_old + 1) - kernel.evaluate(d_old)
        psi_run += f1 + delta
        psi_vals.append(psi_run)
    trace.psi = np.concatenate(([0.0], psi_vals))


# ---------------------------------------------------------------------------
# Hand-built traces and export
# ---------------------------------------------------------------------------


def trace_from_parents(parents, kernel: AttachmentKernel, with_fenwick: bool = True) -> TreeTrace:
    """Build a full TreeTrace from explicit parent pointers.

    ``parents[v]`` is the parent of vertex v for v = 2..n (1-based; leading
    entries ignored).  Delays and snapshots are recorded as zeros.
    """
    n = len(parents) - 1
    if n < 1:
        raise ArgumentError("parent array must cover at least vertex 1")
    parr = np.zeros(n + 1, dtype=np.int64)
    child_times: list = [[] for _ in range(n + 1)]
    for v in range(2, n + 1):
        p = int(parents[v])
        if not (1 <= p < v):
            raise ArgumentError(f"vertex {v} has invalid parent {p}")
        parr[v] = p
        child_times[p].append(v)
    endpoints = np.zeros(max(2 * (n - 1), 0), dtype=np.int64)
    for v in range(2, n + 1):
        endpoints[2 * v - 4] = parr[v]
        endpoints[2 * v - 3] = v
    # replay births to accumulate psi exactly as the engine would
    f1 = kernel.evaluate(1)
    psi = np.zeros(n + 1)
    psi[1] = f1
    wdeg = [0] * (n + 1)
    wdeg[1] = 1
    for v in range(2, n + 1):
        p = int(parr[v])
        if v == 2:
            delta = 0.0
        else:
            delta = kernel.evaluate(wdeg[p] + 1) - kernel.evaluate(wdeg[p])
            wdeg[p] += 1
        wdeg[v] = 1
        psi[v] = psi[v - 1] + f1 + delta
    index = SnapshotIndex(edge_endpoints=endpoints)
    trace = TreeTrace(
        kernel=kernel,
        n=n,
        parents=parr,
        child_times=child_times,
        psi=psi,
        xis=np.zeros(n + 1),
        snapshots=np.zeros(n + 1, dtype=np.int64),
        index=index,
    )
    if with_fenwick and n >= 1:
        fen = Fenwick(n)
        final_wd = _snapshot_weight_degrees(trace, n) if n >= 2 else np.array([1])
        for v in range(1, n + 1):
            fen.add(v, kernel.evaluate(int(final_wd[v - 1])))
        index.fenwick = fen
    return trace


def export_trace(trace: TreeTrace, path, config_hash: str = "") -> None:
    """Write the trace as 'child parent xi m' lines, one vertex per line."""
    with open(path, "w") as fh:
        fh.write("# delaytree trace v1\n")
        fh.write(f"# config_hash = {config_hash}\n")
        fh.write(f"# n = {trace.n}\n")
        fh.write("# columns: child parent xi m\n")
        fh.write("1 0 0 0\n")
        for v in range(2, trace.n + 1):
            fh.write(f"{v} {int(trace.parents[v])} {float(trace.xis[v])!r} {int(trace.snapshots[v])}\n")


def load_trace(path) -> dict:
    """Read an exported trace back into plain arrays (for audits/tests)."""
    header: dict = {}
    parents: list[int] = [0, 0]
    xis: list[float] = [0.0, 0.0]
    ms: list[int] = [0, 0]
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "=" in line:
                    key, _, val = line[1:].partition("=")
                    header[key.strip()] = val.strip()
                continue
            child, parent, xi, m = line.split()
            v = int(child)
            if v == 1:
                continue
            if v != len(parents):
                raise ArgumentError(f"trace file out of birth order at vertex {v}")
            parents.append(int(parent))
            xis.append(float(xi))
            ms.append(int(m))
    return {"header": header, "parents": parents, "xis": xis, "snapshots": ms}
