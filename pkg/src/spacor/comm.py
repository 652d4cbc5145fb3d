"""GSM and spatial-multiplexing links over a flat MIMO channel.

Candidate ``i`` of a :class:`CandidateSet` always carries the bit word ``i``
(MSB first), so bit errors follow from XOR-ing detected and sent indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .allocation import CombinationMap, int_to_bits
from .config import SystemConfig
from .waveform import gsm_encode, psk_constellation, tx_vector

__all__ = [
    "CommChannel",
    "CandidateSet",
    "gsm_candidates",
    "smx_candidates",
    "smx_order_for_rate",
    "candidate_set",
    "rayleigh_channel",
    "noise_variance",
    "channel_apply",
    "ml_detect",
    "ml_detect_batch",
    "ber_experiment",
    "mi_estimate",
    "MODES",
    "FADING",
]

MODES = ("GSM", "SMX")
FADING = ("rayleigh", "awgn")


@dataclass(frozen=True)
class CommChannel:
    H: np.ndarray               # (M_R_c, M)
    noise_variance: float

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=complex))
        if not np.all(np.isfinite(H)):
            raise ValueError("channel matrix has non-finite entries")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be >= 0")
        object.__setattr__(self, "H", H)


@dataclass(frozen=True)
class CandidateSet:
    """All channel inputs of one signalling mode.

    Attributes
    ----------
    X : (M, C) complex array
        Column ``i`` is the transmit vector for bit word ``i``.
    R : int
        Bits per symbol, ``C == 2**R``.
    label : str
        E.g. ``"GSM-QPSK"``.
    """

    X: np.ndarray
    R: int
    label: str

    def __len__(self) -> int:
        return self.X.shape[1]

    @property
    def M(self) -> int:
        return self.X.shape[0]

    @property
    def bits(self) -> np.ndarray:
        """(C, R) bit table."""
        return np.array([int_to_bits(i, self.R) for i in range(len(self))], dtype=np.uint8)


_PSK_NAMES = {2: "BPSK", 4: "QPSK"}


def _psk_name(J: int) -> str:
    return _PSK_NAMES.get(J, f"{J}PSK")


def gsm_candidates(cfg: SystemConfig, cmap: CombinationMap | None = None) -> CandidateSet:
    if cfg.M_T_c < 1:
        raise ValueError("GSM needs at least one communication element")
    cmap = cmap or CombinationMap(cfg.M, cfg.M_T_c)
    R = cfg.bits_per_symbol
    X = np.empty((cfg.M, 1 << R), dtype=complex)
    for i in range(1 << R):
        X[:, i] = tx_vector(gsm_encode(int_to_bits(i, R), cfg, cmap)[0], cfg.M)
    return CandidateSet(X, R, f"GSM-{_psk_name(cfg.J)}")


def smx_candidates(M: int, M_T_c: int, J: int) -> CandidateSet:
    """Spatial multiplexing on elements ``0..M_T_c-1``, one J-PSK point each."""
    if not 1 <= M_T_c <= M:
        raise ValueError("need 1 <= M_T_c <= M")
    pts = psk_constellation(J)
    nb = int(round(math.log2(J)))
    R = M_T_c * nb
    X = np.zeros((M, 1 << R), dtype=complex)
    for i in range(1 << R):
        for e in range(M_T_c):
            X[e, i] = pts[(i >> (nb * (M_T_c - 1 - e))) & (J - 1)]
    return CandidateSet(X, R, f"SMX-{_psk_name(J)}")


def smx_order_for_rate(cfg: SystemConfig) -> int:
    """PSK order giving SMX on M_T_c elements the GSM rate."""
    R = cfg.bits_per_symbol
    if R % cfg.M_T_c:
        raise ValueError(f"rate {R} is not divisible by M_T_c={cfg.M_T_c}")
    return 1 << (R // cfg.M_T_c)


def candidate_set(mode: str, cfg: SystemConfig) -> CandidateSet:
    mode = mode.upper()
    if mode == "GSM":
        return gsm_candidates(cfg)
    if mode == "SMX":
        return smx_candidates(cfg.M, cfg.M_T_c, smx_order_for_rate(cfg))
    raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")


def rayleigh_channel(n: int, M_R_c: int, M: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. channel matrices with unit-variance circular Gaussian entries."""
    shape = (n, M_R_c, M)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def noise_variance(snr_db: float, M_T_c: int) -> float:
    """sigma^2 = M_T_c / SNR: received symbol energy per antenna over noise power."""
    return M_T_c / 10 ** (snr_db / 10)


def _noise(shape, var: float, rng: np.random.Generator) -> np.ndarray:
    s = math.sqrt(var / 2)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def channel_apply(ch: CommChannel, x: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape != (ch.H.shape[1],):
        raise ValueError(f"transmit vector of length {ch.H.shape[1]} expected")
    y = ch.H @ x
    if ch.noise_variance > 0:
        if rng is None:
            raise ValueError("noisy channel needs an rng")
        y = y + _noise(y.shape, ch.noise_variance, rng)
    return y


def ml_detect(y: np.ndarray, ch: CommChannel, cands: CandidateSet) -> int:
    """Index of the candidate minimising ``||y - H x||^2`` (lowest index on ties)."""
    if len(cands) == 0:
        raise ValueError("empty candidate set")
    return int(ml_detect_batch(np.asarray(y)[None, :], ch.H[None], cands)[0])


def ml_detect_batch(Y: np.ndarray, H: np.ndarray, cands: CandidateSet) -> np.ndarray:
    """Vectorised :func:`ml_detect` for ``Y (n, M_R_c)`` and ``H (n, M_R_c, M)``."""
    return kernels.ml_search(Y, H, cands.X)


def _channels(fading: str, n: int, cfg: SystemConfig, M_R: int, rng) -> np.ndarray:
    if fading == "rayleigh":
        return rayleigh_channel(n, M_R, cfg.M, rng)
    if fading == "awgn":
        if M_R != cfg.M:
            raise ValueError("awgn fading needs M_R_c == M (identity channel)")
        return np.broadcast_to(np.eye(cfg.M, dtype=complex), (n, M_R, cfg.M))
    raise ValueError(f"unknown fading {fading!r}, expected one of {FADING}")


def _popcount(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64)
    count = np.zeros(v.shape, dtype=np.int64)
    while np.any(v):
        count += (v & np.uint64(1)).astype(np.int64)
        v >>= np.uint64(1)
    return count


def ber_experiment(mode: str, cfg: SystemConfig, snr_db: Sequence[float], n_symbols: int,
                   rng: np.random.Generator, fading: str = "rayleigh",
                   chunk: int = 20000) -> np.ndarray:
    """Uncoded bit error rate per SNR point with exhaustive ML detection.

    Each symbol sees a fresh channel matrix; all ``R`` bits are counted.
    """
    cands = candidate_set(mode, cfg)
    M_R = cfg.M_R_c
    out = np.empty(len(snr_db))
    for i, snr in enumerate(snr_db):
        var = noise_variance(snr, cfg.M_T_c)
        errors = 0
        for s in range(0, n_symbols, chunk):
            n = min(chunk, n_symbols - s)
            idx = rng.integers(0, len(cands), n)
            H = _channels(fading, n, cfg, M_R, rng)
            Y = np.einsum("nrm,mn->nr", H, cands.X[:, idx]) + _noise((n, M_R), var, rng)
            det = ml_detect_batch(Y, H, cands)
            errors += int(_popcount(np.bitwise_xor(det, idx)).sum())
        out[i] = errors / (n_symbols * cands.R)
    return out


def mi_estimate(mode: str, cfg: SystemConfig, snr_db: Sequence[float], n_mc: int,
                rng: np.random.Generator, fading: str = "rayleigh",
                chunk: int = 20000) -> np.ndarray:
    """Monte Carlo mutual information of the uniform candidate input, bits/symbol.

    ``I = R - E[log2 sum_x' exp((||y-Hx||^2 - ||y-Hx'||^2)/sigma^2)]``,
    clamped to ``[0, R]``.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    cands = candidate_set(mode, cfg)
    M_R = cfg.M_R_c
    out = np.empty(len(snr_db))
    for i, snr in enumerate(snr_db):
        var = noise_variance(snr, cfg.M_T_c)
        acc = 0.0
        for s in range(0, n_mc, chunk):
            n = min(chunk, n_mc - s)
            idx = rng.integers(0, len(cands), n)
            H = _channels(fading, n, cfg, M_R, rng)
            Y = np.einsum("nrm,mn->nr", H, cands.X[:, idx]) + _noise((n, M_R), var, rng)
            acc += float(kernels.mi_terms(Y, H, cands.X, idx, 1.0 / var).sum())
        out[i] = min(max(cands.R - acc / n_mc, 0.0), float(cands.R))
    return out
