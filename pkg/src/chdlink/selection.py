"""Relay selection: max-min-distance metrics, drift-based metric reuse, and
the buffer-aware choice of transmission mode.

The selection stage sees the estimated channels only.  Metric tables cache
every candidate value so that buffer-eligibility filtering re-runs just the
cheap argmax, never the distance enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .signal import BPSK, difference_vectors


# ---------------------------------------------------------------------------
# uplink (MA) metrics
# ---------------------------------------------------------------------------

@dataclass
class MaMetricTable:
    """Cached uplink metrics.

    g_sub[k, n, u] is the minimum over candidate differences d of
    (Es/Ms) * ||H_u d||^2 for square block u of the cluster-k -> relay-n
    matrix; g_relay folds the min over u, g_cluster the max over relays,
    g_max the max over clusters.  Ties resolve to the lowest index.
    """

    g_sub: np.ndarray
    g_relay: np.ndarray
    g_cluster: np.ndarray
    best_relay: np.ndarray
    best_cluster: int
    g_max: float


def ma_metrics(uplink_csi: np.ndarray, es: float, ms: int,
               alphabet: np.ndarray = BPSK) -> MaMetricTable:
    """Evaluate the uplink selection metric for every (cluster, relay, block).

    `uplink_csi` has shape (K, N, 2*U*Ms, 2*Ms); the estimated channels are
    expected here whenever CSI is imperfect.
    """
    K, N, rows, cols = uplink_csi.shape
    if cols != 2 * ms or rows % cols:
        raise ValueError("uplink matrices must stack square 2Ms x 2Ms blocks")
    U = rows // cols
    diffs = difference_vectors(2 * ms, alphabet)
    blocks = uplink_csi.reshape(K, N, U, cols, cols)
    hd = blocks @ diffs                                      # (K, N, U, 2Ms, D)
    g_sub = (es / ms) * np.sum(np.abs(hd) ** 2, axis=3).min(axis=3)
    g_relay = g_sub.min(axis=2)
    g_cluster = g_relay.max(axis=1)
    best_relay = np.argmax(g_relay, axis=1)
    best_cluster = int(np.argmax(g_cluster))
    return MaMetricTable(
        g_sub=g_sub,
        g_relay=g_relay,
        g_cluster=g_cluster,
        best_relay=best_relay,
        best_cluster=best_cluster,
        g_max=float(g_cluster[best_cluster]),
    )


# ---------------------------------------------------------------------------
# downlink (BC) metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BcCandidates:
    """Enumeration of downlink transmit hypotheses shared by all clusters.

    Relay sets {n, l} with n <= l in lexicographic order; pairs n < l use
    all V*V antenna-block combinations, singleton sets n = l combine two
    distinct blocks (v < v') of the one relay.  Candidates are ordered by
    (set, v, v') so that a first-occurrence argmax realizes the tie-break.
    """

    set_first: np.ndarray
    set_second: np.ndarray
    cand_set: np.ndarray
    cand_v: np.ndarray
    cand_vp: np.ndarray

    @property
    def n_sets(self) -> int:
        return len(self.set_first)

    @property
    def n_candidates(self) -> int:
        return len(self.cand_set)


@lru_cache(maxsize=None)
def bc_candidates(n_relays: int, v_blocks: int) -> BcCandidates:
    sets = [(n, l) for n in range(n_relays) for l in range(n, n_relays)]
    cand = []
    for s, (n, l) in enumerate(sets):
        if n < l:
            cand.extend((s, v, vp) for v in range(v_blocks) for vp in range(v_blocks))
        else:
            cand.extend((s, v, vp) for v in range(v_blocks)
                        for vp in range(v + 1, v_blocks))
    if not cand:
        raise ValueError("no downlink candidates: need N >= 2 or V >= 2")
    cand = np.array(cand, dtype=np.intp)
    first = np.array([n for n, _ in sets], dtype=np.intp)
    second = np.array([l for _, l in sets], dtype=np.intp)
    return BcCandidates(set_first=first, set_second=second,
                        cand_set=cand[:, 0], cand_v=cand[:, 1], cand_vp=cand[:, 2])


@dataclass
class BcMetricTable:
    """Cached downlink metrics.

    g_pair_sub[k, c] is the worse of the two per-source metrics for
    candidate c (combined matrix, coefficient Es/(2Ms)); g_pair folds the
    max over antenna pairs per relay set (-inf where a set has no valid
    antenna pair), g_cluster the max over sets, g_max the max over clusters.
    """

    cands: BcCandidates
    g_pair_sub: np.ndarray
    g_pair: np.ndarray
    g_cluster: np.ndarray
    best_cand: np.ndarray
    best_cluster: int
    g_max: float

    def relays_for(self, cluster: int) -> tuple:
        c = self.best_cand[cluster]
        s = self.cands.cand_set[c]
        return int(self.cands.set_first[s]), int(self.cands.set_second[s])

    def antennas_for(self, cluster: int) -> tuple:
        c = self.best_cand[cluster]
        return int(self.cands.cand_v[c]), int(self.cands.cand_vp[c])


def combine_downlink(downlink: np.ndarray, f1: int, f2: int, v: int, vp: int,
                     side: int, cluster: int, ms: int) -> np.ndarray:
    """Sum of block v of relay f1 and block v' of relay f2 toward one source."""
    h1 = downlink[f1, side, cluster][:, v * ms:(v + 1) * ms]
    h2 = downlink[f2, side, cluster][:, vp * ms:(vp + 1) * ms]
    return h1 + h2


def bc_metrics(downlink_csi: np.ndarray, es: float, ms: int,
               cands: BcCandidates | None = None,
               alphabet: np.ndarray = BPSK) -> BcMetricTable:
    """Evaluate the downlink selection metric for every candidate.

    `downlink_csi` has shape (N, 2, K, Ms, V*Ms).  For each candidate the
    per-source metrics are computed on the combined matrix and the smaller
    of the two is kept before the maximizing reductions.
    """
    N, sides, K, rows, cols = downlink_csi.shape
    if rows != ms or cols % ms:
        raise ValueError("downlink matrices must hold V square Ms x Ms blocks")
    V = cols // ms
    if cands is None:
        cands = bc_candidates(N, V)
    diffs = difference_vectors(ms, alphabet)
    # (K, 2, N, V, Ms, Ms) view: per-relay transmit blocks
    blocks = downlink_csi.reshape(N, sides, K, ms, V, ms)
    blocks = np.transpose(blocks, (2, 1, 0, 4, 3, 5))
    n = cands.set_first[cands.cand_set]
    l = cands.set_second[cands.cand_set]
    combined = blocks[:, :, n, cands.cand_v] + blocks[:, :, l, cands.cand_vp]
    hd = combined @ diffs                                    # (K, 2, C, Ms, D)
    per_source = (es / (2.0 * ms)) * np.sum(np.abs(hd) ** 2, axis=3).min(axis=3)
    g_pair_sub = per_source.min(axis=1)                      # (K, C)

    g_pair = np.full((K, cands.n_sets), -np.inf)
    for k in range(K):
        np.maximum.at(g_pair[k], cands.cand_set, g_pair_sub[k])
    best_cand = np.argmax(g_pair_sub, axis=1)
    g_cluster = g_pair_sub[np.arange(K), best_cand]
    best_cluster = int(np.argmax(g_cluster))
    return BcMetricTable(
        cands=cands,
        g_pair_sub=g_pair_sub,
        g_pair=g_pair,
        g_cluster=g_cluster,
        best_cand=best_cand,
        best_cluster=best_cluster,
        g_max=float(g_cluster[best_cluster]),
    )


# ---------------------------------------------------------------------------
# drift observation and metric reuse
# ---------------------------------------------------------------------------

def drift_check(current: np.ndarray, last: np.ndarray | None, p: float) -> bool:
    """True when the cached metrics may be reused.

    Compares the present matrix of the previously chosen link against the
    copy stored at the last recomputation: reuse iff
    ||H_pres - H_last||^2 / ||H_last||^2 <= p.  A missing or zero-norm
    reference forces recomputation.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if last is None:
        return False
    denom = float(np.sum(np.abs(last) ** 2))
    if denom == 0.0:
        return False
    dn = float(np.sum(np.abs(current - last) ** 2))
    return dn / denom <= p


@dataclass
class DriftState:
    """Reference matrices, cached tables and recomputation counters.

    The uplink reference is the full receive matrix of the table-argmax
    (cluster, relay); the downlink reference concatenates the argmax relay
    set's matrices toward both sources.  Counters track the two directions
    independently.
    """

    last_uplink: np.ndarray | None = None
    last_downlink: np.ndarray | None = None
    ma_table: MaMetricTable | None = None
    bc_table: BcMetricTable | None = None
    recompute_ul: int = 0
    recompute_dl: int = 0


# ---------------------------------------------------------------------------
# mode selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionDecision:
    """Outcome of one slot's selection: mode, cluster and transmit resources."""

    mode: str
    cluster: int
    relay: int | None = None
    relays: tuple | None = None
    antennas: tuple | None = None
    metric: float = 0.0


def _ma_decision(ma: MaMetricTable, eligible: np.ndarray) -> SelectionDecision | None:
    masked = np.where(eligible, ma.g_cluster, -np.inf)
    k = int(np.argmax(masked))
    if masked[k] == -np.inf:
        return None
    return SelectionDecision(mode="MA", cluster=k, relay=int(ma.best_relay[k]),
                             metric=float(ma.g_cluster[k]))


def _bc_decision(bc: BcMetricTable, k: int) -> SelectionDecision:
    return SelectionDecision(mode="BC", cluster=int(k), relays=bc.relays_for(k),
                             antennas=bc.antennas_for(k),
                             metric=float(bc.g_cluster[k]))


def _bc_decision_eligible(bc: BcMetricTable, eligible: np.ndarray) -> SelectionDecision | None:
    masked = np.where(eligible, bc.g_cluster, -np.inf)
    k = int(np.argmax(masked))
    if masked[k] == -np.inf:
        return None
    return _bc_decision(bc, k)


def mode_select(ma: MaMetricTable, bc: BcMetricTable, buffers, L: int,
                G: float, ms: int) -> SelectionDecision:
    """Choose the transmission mode, cluster and relay resources of a slot.

    Rule: when more than L slot-groups are buffered overall, broadcast from
    the fullest cluster's buffer; otherwise compare the two directions'
    best metrics against the threshold G (uplink on a ratio >= G).  Clusters
    are only eligible for MA with room to store, and for BC with at least
    one group buffered; when the ruled mode has no eligible cluster the
    other mode runs instead.

    `buffers` is a BufferSummary (occupancy per cluster, capacity, totals).
    """
    if L < 0 or int(L) != L:
        raise ValueError("L must be a nonnegative integer")
    occupancy = np.asarray(buffers.occupancy)
    can_store = occupancy + ms <= buffers.capacity
    can_extract = occupancy >= ms

    if buffers.total / ms > L:
        return _bc_decision(bc, buffers.fullest)

    ratio = np.inf if bc.g_max == 0.0 else ma.g_max / bc.g_max
    if ratio >= G:
        decision = _ma_decision(ma, can_store)
        if decision is None:
            decision = _bc_decision_eligible(bc, can_extract)
    else:
        decision = _bc_decision_eligible(bc, can_extract)
        if decision is None:
            decision = _ma_decision(ma, can_store)
    if decision is None:
        raise RuntimeError("no feasible transmission mode; buffer bank violates J >= Ms")
    return decision


# ---------------------------------------------------------------------------
# threshold estimation
# ---------------------------------------------------------------------------

def estimate_G(samples_ma, samples_bc) -> float:
    """Ratio of the two directions' mean best metrics."""
    samples_ma = np.asarray(samples_ma, dtype=float)
    samples_bc = np.asarray(samples_bc, dtype=float)
    if samples_ma.size == 0 or samples_bc.size == 0:
        raise ValueError("threshold estimation needs samples from both directions")
    return float(samples_ma.mean() / samples_bc.mean())


class GThresholdEstimator:
    """Running estimate of the mode threshold.

    Accumulates the best uplink and downlink metrics of every slot in which
    the respective table was recomputed (plus optional calibration draws
    taken before the first slot) and exposes the ratio of their means.
    """

    def __init__(self):
        self._sum_ul = 0.0
        self._n_ul = 0
        self._sum_dl = 0.0
        self._n_dl = 0

    def add_uplink(self, g_max: float):
        self._sum_ul += g_max
        self._n_ul += 1

    def add_downlink(self, g_max: float):
        self._sum_dl += g_max
        self._n_dl += 1

    def value(self) -> float:
        if self._n_ul == 0 or self._n_dl == 0:
            raise ValueError("threshold estimation needs samples from both directions")
        return (self._sum_ul / self._n_ul) / (self._sum_dl / self._n_dl)
