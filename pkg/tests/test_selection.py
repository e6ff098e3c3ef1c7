from itertools import combinations, product

import numpy as np
import pytest

from chdlink.buffers import BufferSummary
from chdlink.selection import (GThresholdEstimator, MaMetricTable,
                               bc_candidates, bc_metrics, combine_downlink,
                               drift_check, estimate_G, ma_metrics,
                               mode_select)


# --------------------------------------------------------------------------
# independent oracle: metric by full enumeration of unordered candidate pairs
# --------------------------------------------------------------------------

def oracle_min_distance(h, coeff):
    """min over BPSK vector pairs x_i != x_j of coeff*||h (x_i - x_j)||^2."""
    n = h.shape[1]
    vectors = [np.array([1.0 - 2.0 * b for b in bits], dtype=complex)
               for bits in product((0, 1), repeat=n)]
    best = None
    for xi, xj in combinations(vectors, 2):
        val = coeff * float(np.sum(np.abs(h @ (xi - xj)) ** 2))
        if best is None or val < best:
            best = val
    return best


class TestMaMetrics:
    def test_identity_block_value(self):
        # brute-force derived: min difference has one +-2 entry, value 4*Es/Ms
        for es, ms in ((2.0, 2), (3.0, 1), (6.0, 3)):
            h = np.eye(2 * ms, dtype=complex)[None, None]
            table = ma_metrics(h, es, ms)
            expected = oracle_min_distance(h[0, 0], es / ms)
            assert expected == pytest.approx(4.0 * es / ms)
            assert table.g_max == pytest.approx(expected)

    def test_zero_matrix_gives_zero(self):
        h = np.zeros((1, 1, 4, 4), dtype=complex)
        assert ma_metrics(h, 2.0, 2).g_max == 0.0

    def test_scale_homogeneity(self):
        rng = np.random.default_rng(0)
        h = rng.standard_normal((1, 1, 4, 4)) + 1j * rng.standard_normal((1, 1, 4, 4))
        base = ma_metrics(h, 2.0, 2).g_max
        scaled = ma_metrics(3.0 * h, 2.0, 2).g_max
        assert scaled == pytest.approx(9.0 * base)

    @pytest.mark.parametrize("ms,u", [(1, 1), (1, 2), (2, 1), (2, 2)])
    def test_matches_pairwise_oracle(self, ms, u):
        # independent plain-loop oracle; tolerance covers the GEMM/GEMV
        # rounding difference between the two evaluation paths
        rng = np.random.default_rng(ms * 10 + u)
        es = 1.7
        for _ in range(25):
            h = rng.standard_normal((2, 3, 2 * u * ms, 2 * ms)) \
                + 1j * rng.standard_normal((2, 3, 2 * u * ms, 2 * ms))
            table = ma_metrics(h, es, ms)
            for k in range(2):
                for n in range(3):
                    for uu in range(u):
                        block = h[k, n, uu * 2 * ms:(uu + 1) * 2 * ms]
                        assert table.g_sub[k, n, uu] == pytest.approx(
                            oracle_min_distance(block, es / ms), rel=1e-12)

    @pytest.mark.parametrize("ms", [1, 2])
    def test_difference_set_equals_full_pair_set(self, ms):
        # same numeric pipeline over both enumerations: bit-exact equality
        from chdlink.signal import candidate_vectors, difference_vectors
        rng = np.random.default_rng(30 + ms)
        symbols, _ = candidate_vectors(2 * ms)
        i, j = np.triu_indices(symbols.shape[1], k=1)
        full = symbols[:, i] - symbols[:, j]
        dedup = difference_vectors(2 * ms)
        for _ in range(50):
            h = rng.standard_normal((4 * ms, 2 * ms)) \
                + 1j * rng.standard_normal((4 * ms, 2 * ms))
            m_full = np.sum(np.abs(h @ full) ** 2, axis=0).min()
            m_dedup = np.sum(np.abs(h @ dedup) ** 2, axis=0).min()
            assert m_full == m_dedup

    def test_reduction_consistency(self):
        rng = np.random.default_rng(5)
        h = rng.standard_normal((3, 4, 8, 4)) + 1j * rng.standard_normal((3, 4, 8, 4))
        t = ma_metrics(h, 2.0, 2)
        assert np.array_equal(t.g_relay, t.g_sub.min(axis=2))
        assert np.array_equal(t.g_cluster, t.g_relay.max(axis=1))
        assert t.g_max == t.g_cluster.max()
        assert t.g_max == t.g_cluster[t.best_cluster]
        assert np.all(t.g_sub >= 0)

    def test_argmax_attains_max_min_distance(self):
        # exhaustive sweep: the selected (cluster, relay) maximizes the
        # per-candidate worst-case distance
        rng = np.random.default_rng(6)
        h = rng.standard_normal((2, 4, 4, 2)) + 1j * rng.standard_normal((2, 4, 4, 2))
        t = ma_metrics(h, 1.0, 1)
        per_candidate = {}
        for k in range(2):
            for n in range(4):
                per_candidate[(k, n)] = min(
                    oracle_min_distance(h[k, n, 2 * u:2 * u + 2], 1.0)
                    for u in range(2))
        best = max(per_candidate.values())
        chosen = (t.best_cluster, int(t.best_relay[t.best_cluster]))
        assert per_candidate[chosen] == pytest.approx(best)
        assert t.g_max == pytest.approx(best)

    def test_tie_break_lowest_indices(self):
        h = np.zeros((2, 2, 2, 2), dtype=complex)
        h[0, 0] = np.eye(2)
        h[0, 1] = np.eye(2)
        h[1, 0] = np.eye(2)
        t = ma_metrics(h, 1.0, 1)
        assert t.best_cluster == 0
        assert t.best_relay[0] == 0

    def test_scale_monotonicity_single_candidate(self):
        rng = np.random.default_rng(7)
        h = rng.standard_normal((1, 3, 4, 4)) + 1j * rng.standard_normal((1, 3, 4, 4))
        before = ma_metrics(h, 2.0, 2)
        h2 = h.copy()
        h2[0, 1] *= 1.5
        after = ma_metrics(h2, 2.0, 2)
        assert after.g_relay[0, 1] >= before.g_relay[0, 1]
        assert after.g_relay[0, 0] == before.g_relay[0, 0]
        assert after.g_relay[0, 2] == before.g_relay[0, 2]


class TestBcCandidates:
    def test_set_count(self):
        for n, v in ((10, 2), (3, 1), (2, 3)):
            c = bc_candidates(n, v)
            assert c.n_sets == n + n * (n - 1) // 2

    def test_candidate_count(self):
        c = bc_candidates(10, 2)
        # pairs n<l get V^2 antenna pairs, singletons get C(V,2)
        assert c.n_candidates == 45 * 4 + 10 * 1

    def test_no_candidates_rejected(self):
        with pytest.raises(ValueError):
            bc_candidates(1, 1)


class TestBcMetrics:
    def test_two_identity_relays(self):
        # both blocks identity: combined 2*I, coeff Es/(2Ms) = 1, min diff 2
        dn = np.zeros((2, 2, 1, 1, 1), dtype=complex)
        dn[:, :, 0] = 1.0
        t = bc_metrics(dn, es=2.0, ms=1)
        assert t.g_max == pytest.approx(16.0)

    def test_min_over_sources(self):
        # side 1 combined gain 1, side 2 combined gain 2 -> worse side kept
        dn = np.zeros((2, 2, 1, 1, 1), dtype=complex)
        dn[0, 0, 0] = 1.0   # relay 0 toward S1
        dn[0, 1, 0] = 2.0   # relay 0 toward S2
        t = bc_metrics(dn, es=2.0, ms=1)
        c = bc_candidates(2, 1)
        # set {0,1}: relay 1 contributes 0, so combined gains are 1 and 2
        pair_idx = int(np.nonzero((c.set_first == 0) & (c.set_second == 1))[0][0])
        cand_idx = int(np.nonzero(c.cand_set == pair_idx)[0][0])
        assert t.g_pair_sub[0, cand_idx] == pytest.approx(min(4.0, 16.0))

    def test_zero_plus_identity_matches_single(self):
        dn = np.zeros((2, 2, 1, 1, 1), dtype=complex)
        dn[0, :, 0] = 1.0
        t = bc_metrics(dn, es=2.0, ms=1)
        c = t.cands
        pair_idx = int(np.nonzero((c.set_first == 0) & (c.set_second == 1))[0][0])
        cand_idx = int(np.nonzero(c.cand_set == pair_idx)[0][0])
        single = oracle_min_distance(np.ones((1, 1), dtype=complex), 1.0)
        assert t.g_pair_sub[0, cand_idx] == pytest.approx(single)

    @pytest.mark.parametrize("ms", [1, 2])
    def test_matches_pairwise_oracle(self, ms):
        rng = np.random.default_rng(20 + ms)
        es = 2.3
        N, V, K = 3, 2, 2
        dn = rng.standard_normal((N, 2, K, ms, V * ms)) \
            + 1j * rng.standard_normal((N, 2, K, ms, V * ms))
        t = bc_metrics(dn, es, ms)
        c = t.cands
        for k in range(K):
            for ci in range(c.n_candidates):
                s = c.cand_set[ci]
                f1, f2 = int(c.set_first[s]), int(c.set_second[s])
                v, vp = int(c.cand_v[ci]), int(c.cand_vp[ci])
                vals = []
                for side in (0, 1):
                    h = combine_downlink(dn, f1, f2, v, vp, side, k, ms)
                    vals.append(oracle_min_distance(h, es / (2 * ms)))
                assert t.g_pair_sub[k, ci] == pytest.approx(min(vals), rel=1e-12)

    def test_reduction_consistency(self):
        rng = np.random.default_rng(23)
        dn = rng.standard_normal((4, 2, 3, 2, 4)) \
            + 1j * rng.standard_normal((4, 2, 3, 2, 4))
        t = bc_metrics(dn, 2.0, 2)
        c = t.cands
        for k in range(3):
            for s in range(c.n_sets):
                mask = c.cand_set == s
                expected = t.g_pair_sub[k, mask].max() if mask.any() else -np.inf
                assert t.g_pair[k, s] == expected
            assert t.g_cluster[k] == t.g_pair_sub[k].max()
            assert t.g_cluster[k] == t.g_pair_sub[k, t.best_cand[k]]
        assert t.g_max == t.g_cluster.max()

    def test_singleton_set_uses_distinct_blocks(self):
        # one relay, two blocks: the only candidate combines block 0 and 1
        rng = np.random.default_rng(24)
        dn = rng.standard_normal((1, 2, 1, 1, 2)) \
            + 1j * rng.standard_normal((1, 2, 1, 1, 2))
        t = bc_metrics(dn, 2.0, 1)
        assert t.cands.n_candidates == 1
        assert t.relays_for(0) == (0, 0)
        assert t.antennas_for(0) == (0, 1)
        vals = []
        for side in (0, 1):
            h = dn[0, side, 0][:, 0:1] + dn[0, side, 0][:, 1:2]
            vals.append(oracle_min_distance(h, 1.0))
        assert t.g_max == pytest.approx(min(vals))


class TestDriftCheck:
    def test_zero_drift_reused(self):
        h = np.ones((2, 2), dtype=complex)
        assert drift_check(h, h.copy(), p=0.0)

    def test_doubled_matrix_recomputes(self):
        h = np.ones((2, 2), dtype=complex)
        assert not drift_check(2.0 * h, h, p=0.99)
        assert drift_check(2.0 * h, h, p=1.0)

    def test_missing_reference_recomputes(self):
        assert not drift_check(np.ones((2, 2), complex), None, p=1.0)

    def test_zero_reference_recomputes(self):
        h = np.ones((2, 2), dtype=complex)
        assert not drift_check(h, np.zeros_like(h), p=1.0)

    def test_threshold_boundary(self):
        h = np.ones(4, dtype=complex)
        scaled = 1.1 * h  # DN/||h||^2 = 0.01
        assert drift_check(scaled, h, p=0.0100001)
        assert not drift_check(scaled, h, p=0.0099)

    def test_invalid_p(self):
        with pytest.raises(ValueError):
            drift_check(np.ones(2, complex), np.ones(2, complex), p=1.5)


def _ma_table(g_cluster, best_relay=None):
    g_cluster = np.asarray(g_cluster, dtype=float)
    k = len(g_cluster)
    if best_relay is None:
        best_relay = np.zeros(k, dtype=np.intp)
    best = int(np.argmax(g_cluster))
    return MaMetricTable(
        g_sub=g_cluster[:, None, None], g_relay=g_cluster[:, None],
        g_cluster=g_cluster, best_relay=np.asarray(best_relay),
        best_cluster=best, g_max=float(g_cluster[best]))


def _bc_table(g_cluster, n=2, v=1):
    from chdlink.selection import BcMetricTable
    g_cluster = np.asarray(g_cluster, dtype=float)
    cands = bc_candidates(n, v)
    K = len(g_cluster)
    g_pair_sub = np.tile(g_cluster[:, None], (1, cands.n_candidates))
    g_pair = np.tile(g_cluster[:, None], (1, cands.n_sets))
    best = int(np.argmax(g_cluster))
    return BcMetricTable(
        cands=cands, g_pair_sub=g_pair_sub, g_pair=g_pair,
        g_cluster=g_cluster, best_cand=np.zeros(K, dtype=np.intp),
        best_cluster=best, g_max=float(g_cluster[best]))


def _summary(occupancy, capacity=6, ms=2):
    occ = np.asarray(occupancy)
    return BufferSummary(occupancy=occ, total=int(occ.sum()),
                         fullest=int(np.argmax(occ)), capacity=capacity,
                         group_size=ms)


class TestModeSelect:
    def test_buffered_group_forces_bc(self):
        d = mode_select(_ma_table([5.0, 1.0]), _bc_table([1.0, 9.0]),
                        _summary([2, 0]), L=0, G=1.0, ms=2)
        assert d.mode == "BC"
        assert d.cluster == 0  # fullest buffer wins, not the metric argmax

    def test_fullest_cluster_tie_break(self):
        d = mode_select(_ma_table([1.0, 1.0]), _bc_table([1.0, 2.0]),
                        _summary([2, 2]), L=0, G=1.0, ms=2)
        assert d.mode == "BC" and d.cluster == 0

    def test_ratio_at_threshold_picks_ma(self):
        d = mode_select(_ma_table([2.0, 1.0]), _bc_table([1.0, 1.0]),
                        _summary([0, 0]), L=0, G=2.0, ms=2)
        assert d.mode == "MA" and d.cluster == 0

    def test_ratio_below_threshold_picks_bc(self):
        d = mode_select(_ma_table([1.0, 1.0]), _bc_table([1.0, 3.0]),
                        _summary([2, 2]), L=5, G=5.0, ms=2)
        assert d.mode == "BC" and d.cluster == 1

    def test_bc_infeasible_falls_back_to_ma(self):
        # rule says BC but all buffers empty
        d = mode_select(_ma_table([1.0, 2.0]), _bc_table([4.0, 1.0]),
                        _summary([0, 0]), L=0, G=10.0, ms=2)
        assert d.mode == "MA" and d.cluster == 1

    def test_ma_infeasible_falls_back_to_bc(self):
        # rule says MA but every buffer is full (L high enough not to force)
        d = mode_select(_ma_table([1.0, 2.0]), _bc_table([4.0, 1.0]),
                        _summary([6, 6]), L=99, G=0.1, ms=2)
        assert d.mode == "BC" and d.cluster == 0

    def test_ma_restricted_to_clusters_with_room(self):
        d = mode_select(_ma_table([9.0, 2.0]), _bc_table([1.0, 1.0]),
                        _summary([6, 0]), L=99, G=0.5, ms=2)
        assert d.mode == "MA" and d.cluster == 1

    def test_decision_carries_bc_resources(self):
        bc = _bc_table([1.0, 3.0], n=3, v=2)
        d = mode_select(_ma_table([0.1, 0.1]), bc, _summary([0, 4]),
                        L=0, G=1.0, ms=2)
        assert d.relays == bc.relays_for(1)
        assert d.antennas == bc.antennas_for(1)

    def test_invalid_L(self):
        with pytest.raises(ValueError):
            mode_select(_ma_table([1.0]), _bc_table([1.0]), _summary([0]),
                        L=-1, G=1.0, ms=2)


class TestThresholdEstimation:
    def test_constant_sequences(self):
        assert estimate_G([3.0, 3.0], [1.5, 1.5]) == pytest.approx(2.0)

    def test_single_samples(self):
        assert estimate_G([4.0], [2.0]) == pytest.approx(2.0)

    def test_sample_means(self):
        assert estimate_G([2.0, 4.0], [1.0, 3.0]) == pytest.approx(1.5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            estimate_G([], [1.0])

    def test_running_estimator_matches_batch(self):
        est = GThresholdEstimator()
        ma = [2.0, 4.0, 6.0]
        bc = [1.0, 3.0]
        for v in ma:
            est.add_uplink(v)
        for v in bc:
            est.add_downlink(v)
        assert est.value() == pytest.approx(estimate_G(ma, bc))

    def test_estimator_needs_both_directions(self):
        est = GThresholdEstimator()
        est.add_uplink(1.0)
        with pytest.raises(ValueError):
            est.value()
