"""Modulation, AWGN synthesis, exhaustive ML detection and XOR network coding.

All functions are pure; randomness is always passed in as a Generator.  The
constellation is a parameter (an array of complex points indexed by their
bit label) so higher orders can be plugged in, but BPSK is the working
alphabet of the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

# bit 0 -> +1, bit 1 -> -1
BPSK = np.array([1.0 + 0.0j, -1.0 + 0.0j])


@dataclass(frozen=True)
class NoiseParams:
    """AWGN level: per-entry complex variance n0 (n0/2 per real dimension)."""

    n0: float = 1.0

    def __post_init__(self):
        if self.n0 <= 0:
            raise ValueError("n0 must be > 0")


def bpsk_modulate(bits: np.ndarray) -> np.ndarray:
    """Map bits to BPSK symbols (0 -> +1, 1 -> -1), preserving shape."""
    bits = np.asarray(bits)
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be binary")
    return BPSK[bits.astype(np.intp)]


def bpsk_demodulate(symbols: np.ndarray) -> np.ndarray:
    """Hard-slice BPSK symbols back to bits."""
    return (np.real(symbols) < 0).astype(np.uint8)


def _bits_per_symbol(alphabet: np.ndarray) -> int:
    m = int(round(np.log2(len(alphabet))))
    if 2 ** m != len(alphabet):
        raise ValueError("alphabet size must be a power of two")
    return m


def _cached_candidates(n_streams: int, alphabet_key: bytes):
    alphabet = np.frombuffer(alphabet_key, dtype=complex)
    m = _bits_per_symbol(alphabet)
    ns = len(alphabet)
    idx = np.array(list(product(range(ns), repeat=n_streams)), dtype=np.intp).T
    symbols = alphabet[idx]                       # (n_streams, ns**n_streams)
    bits = np.zeros((n_streams * m, idx.shape[1]), dtype=np.uint8)
    for s in range(n_streams):
        for b in range(m):
            bits[s * m + b] = (idx[s] >> (m - 1 - b)) & 1
    symbols.setflags(write=False)
    bits.setflags(write=False)
    return symbols, bits


_cached_candidates = lru_cache(maxsize=None)(_cached_candidates)


def candidate_vectors(n_streams: int, alphabet: np.ndarray = BPSK):
    """All transmit hypotheses for `n_streams` symbols, canonically ordered.

    Returns (symbols, bits): symbols is (n_streams, Ns**n_streams) with
    column c holding the candidate whose stream bits, read as a big-endian
    integer, equal c.  The exhaustive detectors break ties by the lowest
    column index, which makes this ordering part of the detection contract.
    """
    return _cached_candidates(int(n_streams), np.ascontiguousarray(alphabet).tobytes())


def _cached_differences(n_streams: int, alphabet_key: bytes):
    symbols, _ = _cached_candidates(n_streams, alphabet_key)
    n = symbols.shape[1]
    cols_i, cols_j = np.triu_indices(n, k=1)
    diffs = symbols[:, cols_i] - symbols[:, cols_j]   # (n_streams, n*(n-1)/2)
    # d and -d give the same metric; canonicalize the sign on the first
    # nonzero entry, then deduplicate exactly via rounded keys.
    first = np.argmax(np.abs(diffs) > 1e-12, axis=0)
    lead = diffs[first, np.arange(diffs.shape[1])]
    flip = (np.real(lead) < -1e-12) | ((np.abs(np.real(lead)) <= 1e-12) & (np.imag(lead) < 0))
    diffs[:, flip] = -diffs[:, flip]
    keys = np.round(diffs.T, 9)
    _, unique_idx = np.unique(keys.view(float).reshape(keys.shape[0], -1),
                              axis=0, return_index=True)
    out = np.ascontiguousarray(diffs[:, np.sort(unique_idx)])
    out.setflags(write=False)
    return out


_cached_differences = lru_cache(maxsize=None)(_cached_differences)


def difference_vectors(n_streams: int, alphabet: np.ndarray = BPSK) -> np.ndarray:
    """Distinct nonzero candidate differences x_i - x_j, one per +/- pair.

    min over unordered candidate pairs of ||H (x_i - x_j)||^2 equals the min
    of ||H d||^2 over these columns, which is what the selection metrics
    enumerate instead of the quadratically larger pair set.
    """
    return _cached_differences(int(n_streams), np.ascontiguousarray(alphabet).tobytes())


def _check_alphabet(x: np.ndarray, alphabet: np.ndarray):
    dist = np.abs(x[..., None] - alphabet)
    if not np.all(dist.min(axis=-1) < 1e-9):
        raise ValueError("symbol vector contains points outside the constellation")


def _awgn(shape, noise: NoiseParams | None, rng: np.random.Generator | None):
    if noise is None:
        return 0.0
    if rng is None:
        raise ValueError("rng required when noise is enabled")
    scale = np.sqrt(noise.n0 / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synthesize_uplink(x: np.ndarray, h: np.ndarray, es: float, ms: int,
                      noise: NoiseParams | None = None,
                      rng: np.random.Generator | None = None,
                      alphabet: np.ndarray = BPSK) -> np.ndarray:
    """Received uplink vector(s): sqrt(Es/Ms) * H @ x + n.

    `x` holds 2*Ms symbols per channel use, either a single vector or a
    (2*Ms, T) block of T uses over the same quasi-static H.
    """
    x = np.asarray(x)
    if x.shape[0] != 2 * ms or h.shape[1] != 2 * ms:
        raise ValueError("uplink dimensions do not match 2*Ms streams")
    _check_alphabet(x, alphabet)
    y = np.sqrt(es / ms) * (h @ x)
    return y + _awgn(y.shape, noise, rng)


def synthesize_downlink(z: np.ndarray, hcomb: np.ndarray, es: float, ms: int,
                        noise: NoiseParams | None = None,
                        rng: np.random.Generator | None = None,
                        erf: float | None = None,
                        alphabet: np.ndarray = BPSK) -> np.ndarray:
    """Received downlink vector(s): sqrt(E_Rf/(2*Ms)) * Hcomb @ z + n.

    Hcomb is the sum of the two chosen relay transmit blocks.  The relay
    energy is tied to the source energy; passing erf != es is rejected.
    """
    if erf is not None and erf != es:
        raise ValueError("relay transmit energy must equal the source energy")
    z = np.asarray(z)
    if z.shape[0] != ms or hcomb.shape != (ms, ms):
        raise ValueError("downlink dimensions do not match Ms streams")
    _check_alphabet(z, alphabet)
    y = np.sqrt(es / (2.0 * ms)) * (hcomb @ z)
    return y + _awgn(y.shape, noise, rng)


def _exhaustive_argmin(y: np.ndarray, cand_signals: np.ndarray) -> np.ndarray:
    """Column indices of the nearest candidate signal for each received use.

    Ties resolve to the lowest candidate index (np.argmin keeps the first
    minimum), matching the canonical candidate ordering.
    """
    single = y.ndim == 1
    yb = y[:, None] if single else y
    # ||y - s||^2 = ||y||^2 - 2 Re<y, s> + ||s||^2; the ||y||^2 term is
    # constant per use and dropped.
    cross = np.real(yb.conj().T @ cand_signals)        # (T, n_cand)
    energy = np.sum(np.abs(cand_signals) ** 2, axis=0)
    idx = np.argmin(energy[None, :] - 2.0 * cross, axis=1)
    return idx[0] if single else idx


def ml_detect_uplink(y: np.ndarray, hhat: np.ndarray, es: float, ms: int,
                     alphabet: np.ndarray = BPSK) -> np.ndarray:
    """Exhaustive ML over all Ns**(2*Ms) uplink hypotheses.

    Returns the symbol vector(s) minimizing ||y - sqrt(Es/Ms) Hhat x'||^2,
    shaped like the transmitted block.
    """
    symbols, _ = candidate_vectors(2 * ms, alphabet)
    signals = np.sqrt(es / ms) * (hhat @ symbols)
    return symbols[:, _exhaustive_argmin(np.asarray(y), signals)]


def ml_detect_downlink(y: np.ndarray, hhat_comb: np.ndarray, es: float, ms: int,
                       alphabet: np.ndarray = BPSK) -> np.ndarray:
    """Exhaustive ML over all Ns**Ms downlink hypotheses."""
    symbols, _ = candidate_vectors(ms, alphabet)
    signals = np.sqrt(es / (2.0 * ms)) * (hhat_comb @ symbols)
    return symbols[:, _exhaustive_argmin(np.asarray(y), signals)]


def xor_combine(x1hat: np.ndarray, x2hat: np.ndarray) -> np.ndarray:
    """Bitwise XOR of the two decoded source blocks (the stored payload)."""
    x1hat = np.asarray(x1hat)
    x2hat = np.asarray(x2hat)
    if x1hat.shape != x2hat.shape:
        raise ValueError("bit blocks must share a shape")
    return np.bitwise_xor(x1hat.astype(np.uint8), x2hat.astype(np.uint8))


def xor_recover(own: np.ndarray, zhat: np.ndarray) -> np.ndarray:
    """Recover the partner's bits from the XOR payload and one's own bits."""
    return xor_combine(own, zhat)
