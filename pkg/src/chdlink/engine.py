"""Slot-loop engine: channel evolution, drift-gated metric recomputation,
mode selection, transmission and detection, buffering, delivery scoring and
the per-slot worst-case pairwise error probability.

One engine instance owns one (SNR, seed) cell and is strictly sequential;
cells are independent and may run in parallel processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .buffers import BufferBank, PacketGroup
from .channel import ChannelParams, ChannelSet, CsiErrorParams, Topology, \
    corrupt_csi, slot_channels
from .selection import BcCandidates, DriftState, GThresholdEstimator, \
    SelectionDecision, bc_candidates, bc_metrics, combine_downlink, \
    drift_check, ma_metrics, mode_select
from .signal import BPSK, NoiseParams, bpsk_demodulate, bpsk_modulate, \
    difference_vectors, ml_detect_downlink, ml_detect_uplink, \
    synthesize_downlink, synthesize_uplink, xor_combine, xor_recover


class ConfigError(ValueError):
    """Invalid simulation configuration; lists every violated constraint."""


@dataclass(frozen=True)
class SimConfig:
    """Full description of one experiment (all SNR points share it).

    `packets` counts delivered slot-groups (Ms packets each, T symbols per
    packet); a run terminates once that many groups have been scored end to
    end.  `p` is the drift-reuse threshold, `L` the buffer threshold that
    forces broadcast slots.
    """

    K: int = 5
    N: int = 10
    Ms: int = 2
    U: int = 2
    V: int = 2
    J: int = 6
    L: int = 0
    p: float = 0.0
    snr_db: tuple = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
    packets: int = 10000
    T: int = 100
    n0: float = 1.0
    channel: ChannelParams = field(default_factory=ChannelParams)
    csi: CsiErrorParams = field(default_factory=CsiErrorParams)
    seed: int = 12345
    calibration_draws: int = 100
    # test/diagnostic knobs: bypass the drift gate, disable receiver noise,
    # or record the per-slot decision sequence
    force_recompute: bool = False
    noise_enabled: bool = True
    collect_decisions: bool = False
    max_slots: int | None = None

    def validate(self):
        problems = []
        for name in ("K", "N", "Ms", "U", "V", "T", "packets"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be a positive integer")
        if self.V > 2 * self.U:
            problems.append("V*Ms transmit antennas exceed the 2*U*Ms available")
        if self.J % self.Ms:
            problems.append("J must be a multiple of Ms")
        if self.J < self.Ms:
            problems.append("J must hold at least one group of Ms packets")
        if self.L < 0 or int(self.L) != self.L:
            problems.append("L must be a nonnegative integer")
        if not 0.0 <= self.p <= 1.0:
            problems.append("p must lie in [0, 1]")
        if self.n0 <= 0:
            problems.append("n0 must be > 0")
        if len(self.snr_db) == 0:
            problems.append("snr_db grid must not be empty")
        if self.seed < 0:
            problems.append("seed must be nonnegative")
        if self.calibration_draws < 0:
            problems.append("calibration_draws must be nonnegative")
        if self.N < 2 and self.V < 2:
            problems.append("downlink needs N >= 2 relays or V >= 2 blocks")
        if self.max_slots is not None and self.max_slots < 1:
            problems.append("max_slots must be positive when given")
        if problems:
            raise ConfigError("; ".join(problems))

    def topology(self) -> Topology:
        return Topology(self.K, self.N, self.Ms, self.U, self.V)


@dataclass
class RunStats:
    """Accumulated counters of one (SNR, seed) cell.

    Error counts are split by the source at which the partner's bits were
    recovered; delays are per delivered packet; recomputation counters per
    direction; the worst-case PEP samples are kept as running moments, both
    pooled and per executed mode.
    """

    snr_db: float
    errors_at_s1: int = 0
    errors_at_s2: int = 0
    bits_at_s1: int = 0
    bits_at_s2: int = 0
    delay_sum: float = 0.0
    delay_sumsq: float = 0.0
    delay_count: int = 0
    recompute_ul: int = 0
    recompute_dl: int = 0
    slots_total: int = 0
    slots_ma: int = 0
    slots_bc: int = 0
    pep_sum: float = 0.0
    pep_sumsq: float = 0.0
    pep_count: int = 0
    pep_sum_ma: float = 0.0
    pep_count_ma: int = 0
    pep_sum_bc: float = 0.0
    pep_count_bc: int = 0
    groups_stored: int = 0
    groups_delivered: int = 0
    residual_groups: int = 0

    @property
    def bit_errors(self) -> int:
        return self.errors_at_s1 + self.errors_at_s2

    @property
    def bits_total(self) -> int:
        return self.bits_at_s1 + self.bits_at_s2

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total if self.bits_total else 0.0

    @property
    def ber_se(self) -> float:
        if not self.bits_total:
            return 0.0
        b = self.ber
        return float(np.sqrt(b * (1.0 - b) / self.bits_total))

    @property
    def avg_delay(self) -> float | None:
        if not self.delay_count:
            return None
        return self.delay_sum / self.delay_count

    @property
    def delay_se(self) -> float:
        if self.delay_count < 2:
            return 0.0
        mean = self.delay_sum / self.delay_count
        var = max(0.0, self.delay_sumsq / self.delay_count - mean * mean)
        return float(np.sqrt(var / self.delay_count))

    @property
    def mmd_rate_ul(self) -> float:
        return self.recompute_ul / self.slots_total if self.slots_total else 0.0

    @property
    def mmd_rate_dl(self) -> float:
        return self.recompute_dl / self.slots_total if self.slots_total else 0.0

    @property
    def pep_mean(self) -> float:
        return self.pep_sum / self.pep_count if self.pep_count else 0.0

    @property
    def pep_se(self) -> float:
        if self.pep_count < 2:
            return 0.0
        mean = self.pep_mean
        var = max(0.0, self.pep_sumsq / self.pep_count - mean * mean)
        return float(np.sqrt(var / self.pep_count))

    @property
    def pep_mean_ma(self) -> float:
        return self.pep_sum_ma / self.pep_count_ma if self.pep_count_ma else 0.0

    @property
    def pep_mean_bc(self) -> float:
        return self.pep_sum_bc / self.pep_count_bc if self.pep_count_bc else 0.0

    def merge(self, other: "RunStats") -> "RunStats":
        """Pure, order-independent accumulation of two partial cells."""
        if other.snr_db != self.snr_db:
            raise ValueError("cannot merge stats from different SNR points")
        out = RunStats(snr_db=self.snr_db)
        for name in (
            "errors_at_s1", "errors_at_s2", "bits_at_s1", "bits_at_s2",
            "delay_sum", "delay_sumsq", "delay_count", "recompute_ul",
            "recompute_dl", "slots_total", "slots_ma", "slots_bc",
            "pep_sum", "pep_sumsq", "pep_count", "pep_sum_ma",
            "pep_count_ma", "pep_sum_bc", "pep_count_bc", "groups_stored",
            "groups_delivered", "residual_groups",
        ):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        return out


@dataclass
class SlotOutcome:
    """What one slot did, for slot-level inspection in tests and demos."""

    slot: int
    decision: SelectionDecision
    recomputed_ul: bool
    recomputed_dl: bool
    bit_errors: int
    bits: int
    delays: np.ndarray | None
    pep: float


def worst_case_distance(h: np.ndarray, mode: str,
                        alphabet: np.ndarray = BPSK) -> float:
    """Smallest squared candidate-pair distance through `h`.

    min over x_i != x_j of ||H (x_i - x_j)||^2, halved in BC mode where two
    relays split the transmit energy.
    """
    diffs = difference_vectors(h.shape[1], alphabet)
    dmin = float(np.sum(np.abs(h @ diffs) ** 2, axis=0).min())
    if mode == "BC":
        dmin *= 0.5
    elif mode != "MA":
        raise ValueError("mode must be 'MA' or 'BC'")
    return dmin


def theoretical_pep(h: np.ndarray, mode: str, es: float, ms: int, n0: float,
                    alphabet: np.ndarray = BPSK) -> float:
    """Worst-case pairwise error probability of cooperative detection.

    1 - (1 - Q(sqrt(Es * D'_min / (2 N0 Ms))))^2 with Q the standard normal
    tail and D'_min the mode-dependent worst-case distance of `h`.
    """
    dmin = worst_case_distance(h, mode, alphabet)
    q = norm.sf(np.sqrt(es * dmin / (2.0 * n0 * ms)))
    # algebraically 1 - (1 - q)^2; this form avoids the cancellation that
    # would flatten small values to zero
    return float(q * (2.0 - q))


class Engine:
    """Protocol state machine for one SNR point."""

    def __init__(self, cfg: SimConfig, snr_db: float,
                 seed_seq: np.random.SeedSequence):
        cfg.validate()
        self.cfg = cfg
        self.topo = cfg.topology()
        self.snr_db = float(snr_db)
        self.es = cfg.n0 * 10.0 ** (self.snr_db / 10.0)
        self.noise = NoiseParams(cfg.n0) if cfg.noise_enabled else None
        streams = seed_seq.spawn(6)
        (self.rng_up, self.rng_dn, self.rng_csi,
         self.rng_noise, self.rng_bits, rng_calib) = (
            np.random.Generator(np.random.PCG64(s)) for s in streams)
        self.channels: ChannelSet | None = None
        self.buffers = BufferBank(cfg.K, cfg.J, cfg.Ms)
        self.cands: BcCandidates = bc_candidates(cfg.N, cfg.V)
        self.drift = DriftState()
        self.estimator = GThresholdEstimator()
        self.stats = RunStats(snr_db=self.snr_db)
        self.decisions: list | None = [] if cfg.collect_decisions else None
        self.slot = 0
        self._ul_key = None
        self._dl_key = None
        self._up_hat = None
        self._dn_hat = None
        if cfg.calibration_draws:
            self._calibrate(rng_calib)

    # -- setup -------------------------------------------------------------

    def _calibrate(self, rng: np.random.Generator):
        """Warm-start the mode threshold from independent channel draws."""
        cfg = self.cfg
        for _ in range(cfg.calibration_draws):
            chans = slot_channels(None, cfg.channel, self.topo, rng, rng)
            up_hat = corrupt_csi(chans.uplink, cfg.csi, self.es, rng)
            dn_hat = corrupt_csi(chans.downlink, cfg.csi, self.es / 2.0, rng)
            self.estimator.add_uplink(ma_metrics(up_hat, self.es, cfg.Ms).g_max)
            self.estimator.add_downlink(
                bc_metrics(dn_hat, self.es, cfg.Ms, self.cands).g_max)

    # -- per-slot machinery -------------------------------------------------

    def _csi_views(self, chans: ChannelSet):
        up = corrupt_csi(chans.uplink, self.cfg.csi, self.es, self.rng_csi)
        dn = corrupt_csi(chans.downlink, self.cfg.csi, self.es / 2.0, self.rng_csi)
        return up, dn

    def _downlink_reference(self, dn_hat: np.ndarray, key) -> np.ndarray:
        k, f1, f2 = key
        mats = [dn_hat[f1, 0, k].ravel(), dn_hat[f1, 1, k].ravel()]
        if f2 != f1:
            mats += [dn_hat[f2, 0, k].ravel(), dn_hat[f2, 1, k].ravel()]
        return np.concatenate(mats)

    def _refresh_uplink(self, up_hat: np.ndarray) -> bool:
        cfg = self.cfg
        if self.drift.ma_table is not None and not cfg.force_recompute:
            k, n = self._ul_key
            if drift_check(up_hat[k, n], self.drift.last_uplink, cfg.p):
                return False
        table = ma_metrics(up_hat, self.es, cfg.Ms)
        self.drift.ma_table = table
        self._ul_key = (table.best_cluster,
                        int(table.best_relay[table.best_cluster]))
        self.drift.last_uplink = up_hat[self._ul_key].copy()
        self.drift.recompute_ul += 1
        self.stats.recompute_ul += 1
        self.estimator.add_uplink(table.g_max)
        return True

    def _refresh_downlink(self, dn_hat: np.ndarray) -> bool:
        cfg = self.cfg
        if self.drift.bc_table is not None and not cfg.force_recompute:
            current = self._downlink_reference(dn_hat, self._dl_key)
            if drift_check(current, self.drift.last_downlink, cfg.p):
                return False
        table = bc_metrics(dn_hat, self.es, cfg.Ms, self.cands)
        self.drift.bc_table = table
        k = table.best_cluster
        f1, f2 = table.relays_for(k)
        self._dl_key = (k, f1, f2)
        self.drift.last_downlink = self._downlink_reference(dn_hat, self._dl_key).copy()
        self.drift.recompute_dl += 1
        self.stats.recompute_dl += 1
        self.estimator.add_downlink(table.g_max)
        return True

    def _run_ma(self, decision: SelectionDecision) -> tuple:
        cfg = self.cfg
        k, g = decision.cluster, decision.relay
        bits = self.rng_bits.integers(0, 2, size=(2 * cfg.Ms, cfg.T),
                                      dtype=np.uint8)
        x = bpsk_modulate(bits)
        y = synthesize_uplink(x, self.channels.uplink[k, g], self.es, cfg.Ms,
                              self.noise, self.rng_noise)
        xhat = ml_detect_uplink(y, self._up_hat[k, g], self.es, cfg.Ms)
        bits_hat = bpsk_demodulate(xhat)
        payload = xor_combine(bits_hat[:cfg.Ms], bits_hat[cfg.Ms:])
        group = PacketGroup(payload=payload, truth_x1=bits[:cfg.Ms].copy(),
                            truth_x2=bits[cfg.Ms:].copy(), birth_slot=self.slot)
        self.buffers.store(k, group, self.slot)
        self.stats.groups_stored += 1
        self.stats.slots_ma += 1
        pep = theoretical_pep(self.channels.uplink[k, g], "MA", self.es,
                              cfg.Ms, cfg.n0)
        self.stats.pep_sum_ma += pep
        self.stats.pep_count_ma += 1
        return 0, 0, None, pep

    def _run_bc(self, decision: SelectionDecision) -> tuple:
        cfg = self.cfg
        k = decision.cluster
        f1, f2 = decision.relays
        v, vp = decision.antennas
        group, delays = self.buffers.extract(k, self.slot)
        z = bpsk_modulate(group.payload)
        errors = 0
        pep = 0.0
        for side in (0, 1):
            h_true = combine_downlink(self.channels.downlink, f1, f2, v, vp,
                                      side, k, cfg.Ms)
            h_hat = combine_downlink(self._dn_hat, f1, f2, v, vp, side, k, cfg.Ms)
            y = synthesize_downlink(z, h_true, self.es, cfg.Ms, self.noise,
                                    self.rng_noise)
            zhat = bpsk_demodulate(ml_detect_downlink(y, h_hat, self.es, cfg.Ms))
            if side == 0:
                est = xor_recover(group.truth_x1, zhat)
                err = int(np.count_nonzero(est != group.truth_x2))
                self.stats.errors_at_s1 += err
                self.stats.bits_at_s1 += est.size
            else:
                est = xor_recover(group.truth_x2, zhat)
                err = int(np.count_nonzero(est != group.truth_x1))
                self.stats.errors_at_s2 += err
                self.stats.bits_at_s2 += est.size
            errors += err
            pep = max(pep, theoretical_pep(h_true, "BC", self.es, cfg.Ms, cfg.n0))
        self.stats.delay_sum += float(delays.sum())
        self.stats.delay_sumsq += float(np.sum(delays.astype(float) ** 2))
        self.stats.delay_count += delays.size
        self.stats.groups_delivered += 1
        self.stats.slots_bc += 1
        self.stats.pep_sum_bc += pep
        self.stats.pep_count_bc += 1
        return errors, 2 * cfg.Ms * cfg.T, delays, pep

    def run_slot(self) -> SlotOutcome:
        """Advance the protocol by one time slot (exactly one mode runs)."""
        cfg = self.cfg
        self.channels = slot_channels(self.channels, cfg.channel, self.topo,
                                      self.rng_up, self.rng_dn)
        self._up_hat, self._dn_hat = self._csi_views(self.channels)
        recomputed_ul = self._refresh_uplink(self._up_hat)
        recomputed_dl = self._refresh_downlink(self._dn_hat)
        decision = mode_select(self.drift.ma_table, self.drift.bc_table,
                               self.buffers.summary(), cfg.L,
                               self.estimator.value(), cfg.Ms)
        if self.decisions is not None:
            self.decisions.append(decision)
        if decision.mode == "MA":
            errors, bits, delays, pep = self._run_ma(decision)
        else:
            errors, bits, delays, pep = self._run_bc(decision)
        self.stats.pep_sum += pep
        self.stats.pep_sumsq += pep * pep
        self.stats.pep_count += 1
        self.stats.slots_total += 1
        outcome = SlotOutcome(slot=self.slot, decision=decision,
                              recomputed_ul=recomputed_ul,
                              recomputed_dl=recomputed_dl, bit_errors=errors,
                              bits=bits, delays=delays, pep=pep)
        self.slot += 1
        return outcome

    def run(self) -> RunStats:
        """Loop slots until the configured number of groups is delivered."""
        cfg = self.cfg
        limit = cfg.max_slots if cfg.max_slots is not None else max(
            1000, 200 * cfg.packets)
        while self.stats.groups_delivered < cfg.packets:
            if self.slot >= limit:
                raise RuntimeError(
                    f"slot budget exhausted after {self.slot} slots with "
                    f"{self.stats.groups_delivered}/{cfg.packets} groups delivered")
            self.run_slot()
        self.stats.residual_groups = int(
            self.buffers.summary().total // cfg.Ms)
        return self.stats


def run_cell(cfg: SimConfig, snr_db: float, snr_index: int) -> RunStats:
    """Simulate one SNR point; seeding is a pure function of (seed, index)."""
    seq = np.random.SeedSequence([int(cfg.seed), int(snr_index)])
    return Engine(cfg, snr_db, seq).run()


def run_experiment(cfg: SimConfig) -> list:
    """Run every SNR point of the grid; deterministic given the config."""
    cfg.validate()
    return [run_cell(cfg, snr, i) for i, snr in enumerate(cfg.snr_db)]
