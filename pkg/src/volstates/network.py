"""Directed information-flow networks over symbolized volatility states.

Decoded state trajectories (in transaction time) are mapped onto a shared
clock grid, densified by a sliding block maximum, and compared pairwise with
transfer-entropy style plug-in estimates.  The resulting asymmetric flow
matrix supports node strengths, matrix reordering, a symmetric dissimilarity
for hierarchical clustering, and thresholded edge-list export.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import leaves_list, linkage
from scipy.spatial.distance import squareform

from .encoding import ReturnSeries
from .errors import InvalidInputError

DEFAULT_PATTERN_CAP = 4096


@dataclass
class SymbolSeries:
    """Ordinal symbols on a uniform clock grid.

    Symbol 0 means "no transaction"; positive ordinals are volatility states
    with higher = more volatile.  ``unit`` records the grid resolution.
    ``collisions`` flags grid units that held more than one transaction (the
    maximal ordinal was kept); ``degenerate`` flags a single-symbol series.
    """

    symbols: np.ndarray
    unit: float = 1.0
    collisions: int = 0
    degenerate: bool = False

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=np.int64)
        if self.symbols.ndim != 1:
            raise InvalidInputError("symbols must be one-dimensional")
        if np.any(self.symbols < 0):
            raise InvalidInputError("symbols must be nonnegative")
        if self.unit <= 0:
            raise InvalidInputError("clock unit must be positive")
        self.degenerate = len(np.unique(self.symbols)) <= 1

    def __len__(self):
        return len(self.symbols)


def to_clock_symbols(labels, timestamps, unit: float,
                     t_start: float | None = None,
                     t_end: float | None = None) -> SymbolSeries:
    """Place transaction-time state labels on a uniform clock grid.

    Each grid unit gets the state of the transaction it contains, or 0 when
    no transaction falls inside it.  If several transactions land in one
    unit the maximal ordinal is kept and the collision is counted.  An
    explicit ``[t_start, t_end)`` span lets several instruments share one
    chronological grid.
    """
    labels = np.asarray(labels, dtype=np.int64)
    ts = np.asarray(timestamps, dtype=float)
    if labels.shape != ts.shape:
        raise InvalidInputError("one timestamp per label required")
    if len(ts) == 0:
        raise InvalidInputError("empty series")
    if np.any(np.diff(ts) < 0):
        raise InvalidInputError("timestamps must be sorted ascending")
    if unit <= 0:
        raise InvalidInputError("clock unit must be positive")
    lo = float(ts[0]) if t_start is None else float(t_start)
    hi = float(ts[-1]) if t_end is None else float(t_end)
    n_units = int(np.floor((hi - lo) / unit)) + 1
    if n_units < 1:
        raise InvalidInputError("time span does not cover a single unit")
    grid = np.zeros(n_units, dtype=np.int64)
    idx = np.floor((ts - lo) / unit).astype(np.int64)
    keep = (idx >= 0) & (idx < n_units)
    collisions = 0
    for i, s in zip(idx[keep], labels[keep]):
        if grid[i] != 0:
            collisions += 1
        grid[i] = max(grid[i], s)
    return SymbolSeries(grid, unit=unit, collisions=collisions)


def block_max_summarize(s: SymbolSeries, w: int) -> SymbolSeries:
    """Centered sliding maximum with an odd block length ``w``.

    Filters uninformative zeros out of a sparse clock-grid series while
    keeping the volatility ordinals.  The output covers the interior
    positions where the full block fits, so its length is ``n - w + 1``.
    """
    if w < 1 or w % 2 == 0:
        raise InvalidInputError("block length must be odd and >= 1")
    sym = s.symbols
    if w > len(sym):
        raise InvalidInputError("block length exceeds the series length")
    if w == 1:
        return SymbolSeries(sym.copy(), unit=s.unit)
    view = np.lib.stride_tricks.sliding_window_view(sym, w)
    return SymbolSeries(view.max(axis=1), unit=s.unit)


def _check_aligned(sx: SymbolSeries, sy: SymbolSeries):
    if len(sx) != len(sy):
        raise InvalidInputError("series must be equal length and aligned")
    if len(sx) == 0:
        raise InvalidInputError("empty series")


def te_lag_lead(sx: SymbolSeries, sy: SymbolSeries,
                top: int | None = None) -> float:
    """Lag-and-lead information flow from ``sx`` to ``sy``.

    Plug-in estimate of sum_a P(Y=top, X=a) * ln[P(Y=top|a) / P(Y=top)]
    where ``top`` is the highest volatility state of ``sy`` (its maximal
    positive symbol by default).  Both series are assumed block-max
    summarized on the same grid, so the contemporaneous joint already mixes
    lagged and leading transactions.  Zero-count terms contribute 0.
    """
    _check_aligned(sx, sy)
    y = sy.symbols
    x = sx.symbols
    if top is None:
        top = int(y.max())
    if top <= 0:
        return 0.0
    n = len(y)
    is_top = y == top
    p_top = is_top.mean()
    if p_top in (0.0, 1.0):
        return 0.0
    total = 0.0
    for a in np.unique(x):
        sel = x == a
        p_a = sel.mean()
        p_joint = (is_top & sel).sum() / n
        if p_joint == 0.0:
            continue
        total += p_joint * np.log(p_joint / (p_a * p_top))
    return float(total)


def te_classic(sx: SymbolSeries, sy: SymbolSeries, lag: int,
               pattern_cap: int = DEFAULT_PATTERN_CAP) -> float:
    """Classic transfer entropy from ``sx`` to ``sy`` with ``lag`` past steps.

    Plug-in estimate over empirical frequencies of
    (Y_t, Y_{t-lag..t-1}, X_{t-lag..t-1}); zero-count terms contribute 0.
    Refuses to run when the number of distinct history patterns exceeds
    ``pattern_cap`` (use a smaller lag or coarser alphabet instead).
    """
    _check_aligned(sx, sy)
    if lag < 1:
        raise InvalidInputError("lag must be >= 1")
    x = sx.symbols
    y = sy.symbols
    n = len(y)
    if n <= lag:
        raise InvalidInputError("series shorter than the requested lag")
    rows = n - lag
    yh = np.lib.stride_tricks.sliding_window_view(y[:-1], lag)[:rows]
    xh = np.lib.stride_tricks.sliding_window_view(x[:-1], lag)[:rows]
    yt = y[lag:]
    both = np.column_stack([yh, xh])
    if len(np.unique(both, axis=0)) > pattern_cap:
        raise InvalidInputError(
            f"more than {pattern_cap} distinct history patterns; "
            "reduce the lag or coarsen the symbols")
    # Integer-encode the three conditioning objects for fast counting.
    _, yh_id = np.unique(yh, axis=0, return_inverse=True)
    _, bh_id = np.unique(both, axis=0, return_inverse=True)
    _, yt_id = np.unique(yt, return_inverse=True)

    def counts(ids):
        _, inv, cnt = np.unique(ids, axis=0, return_inverse=True,
                                return_counts=True)
        return cnt[inv]

    c_full = counts(np.column_stack([yt_id, bh_id]))   # (y_t, y_hist, x_hist)
    c_bh = counts(bh_id)                                # (y_hist, x_hist)
    c_yy = counts(np.column_stack([yt_id, yh_id]))      # (y_t, y_hist)
    c_yh = counts(yh_id)                                # (y_hist)
    # Each row contributes p(row)*log-ratio; summing per-row 1/rows-weighted
    # terms is the same as summing over distinct outcomes.
    ratio = (c_full / c_bh) / (c_yy / c_yh)
    return float(np.sum(np.log(ratio)) / rows)


def simple_binning(returns, q: int) -> SymbolSeries:
    """Symbolize returns by empirical q-quantile bins (symbols 1..q)."""
    if q < 2:
        raise InvalidInputError("need at least two bins")
    values = returns.values if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    edges = np.quantile(values, np.linspace(0, 1, q + 1)[1:-1])
    return SymbolSeries(np.searchsorted(edges, values, side="left") + 1)


@dataclass
class TEMatrix:
    """Square asymmetric flow matrix; entry (i, j) is the flow i -> j."""

    nodes: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InvalidInputError("flow matrix must be square")
        if len(self.nodes) != v.shape[0]:
            raise InvalidInputError("one node id per matrix row required")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("flow values must be finite")
        np.fill_diagonal(self.values, 0.0)

    @property
    def n(self) -> int:
        return len(self.nodes)


def flow_matrix(symbol_map: dict, measure=te_lag_lead, **kwargs) -> TEMatrix:
    """All ordered-pair flows between the given symbol series.

    ``symbol_map`` maps node id -> SymbolSeries (equal-length, aligned).
    """
    nodes = list(symbol_map)
    if len(nodes) < 2:
        raise InvalidInputError("need at least two nodes")
    vals = np.zeros((len(nodes), len(nodes)))
    for i, a in enumerate(nodes):
        for j, b in enumerate(nodes):
            if i != j:
                vals[i, j] = measure(symbol_map[a], symbol_map[b], **kwargs)
    return TEMatrix(nodes, vals)


def node_strengths(m: TEMatrix):
    """Incoming (column-sum) and outgoing (row-sum) strengths, diagonal excluded."""
    return m.values.sum(axis=0), m.values.sum(axis=1)


def reorder_matrix(m: TEMatrix):
    """Permutations sorting rows by outgoing and columns by incoming strength.

    Both ascending; ties stay in node-id order.  Returns
    ``(row_perm, col_perm)`` as index arrays into the original order.
    """
    ns_in, ns_out = node_strengths(m)
    return (np.argsort(ns_out, kind="stable"),
            np.argsort(ns_in, kind="stable"))


def dissimilarity(m: TEMatrix) -> np.ndarray:
    """Symmetric dissimilarity in [0, 1] from the asymmetric flows.

    Similarity is the average of the two directed flows; dissimilarity is
    its min-max rescale flipped so the most similar pair scores 0 and the
    least similar pair 1 (off-diagonal pairs only).
    """
    if m.n < 2:
        raise InvalidInputError("need at least two nodes")
    sim = (m.values + m.values.T) / 2.0
    off = ~np.eye(m.n, dtype=bool)
    lo, hi = sim[off].min(), sim[off].max()
    if hi == lo:
        raise InvalidInputError("all pairwise similarities are equal; "
                                "dissimilarity rescale is undefined")
    dis = (hi - sim) / (hi - lo)
    np.fill_diagonal(dis, 0.0)
    return dis


def build_network(m: TEMatrix, top_k: int | None = None,
                  min_weight: float | None = None):
    """Strongest-edge subnetwork as a directed weighted edge list.

    Keeps either the ``top_k`` heaviest edges or all edges with weight >=
    ``min_weight`` (exactly one filter must be given).  Nodes without an
    incident surviving edge are dropped.  Returns ``(edges, nodes)`` with
    edges as (src, dst, weight) sorted by descending weight.
    """
    if (top_k is None) == (min_weight is None):
        raise InvalidInputError("give exactly one of top_k or min_weight")
    pairs = [(m.values[i, j], i, j)
             for i in range(m.n) for j in range(m.n) if i != j]
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    if top_k is not None:
        if top_k < 1:
            raise InvalidInputError("top_k must be >= 1")
        pairs = pairs[:top_k]
    else:
        pairs = [p for p in pairs if p[0] >= min_weight]
    edges = [(m.nodes[i], m.nodes[j], w) for w, i, j in pairs]
    used = []
    for src, dst, _ in edges:
        for node in (src, dst):
            if node not in used:
                used.append(node)
    return edges, used


def cluster_dissimilarity(dis: np.ndarray):
    """Average-linkage tree over a precomputed dissimilarity matrix.

    Returns ``(linkage_matrix, leaf_order)``; the leaf order is the heatmap
    permutation that keeps merged nodes adjacent.
    """
    dis = np.asarray(dis, dtype=float)
    if dis.ndim != 2 or dis.shape[0] != dis.shape[1]:
        raise InvalidInputError("dissimilarity matrix must be square")
    if not np.allclose(dis, dis.T):
        raise InvalidInputError("dissimilarity matrix must be symmetric")
    d = dis.copy()
    np.fill_diagonal(d, 0.0)
    link = linkage(squareform(d, checks=False), method="average")
    return link, leaves_list(link)
