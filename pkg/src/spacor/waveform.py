"""Chirp, PSK/GSM symbol mapping and the joint radar-communication waveform.

The joint waveform is produced in three steps: the data block is split into
GSM symbols (spatial bits select the communication elements, constellation
bits the PSK points), the chirp is weighted by the steering vector, and the
communication chips are inserted into the radar waveform on the elements the
allocation assigns to communication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .allocation import AllocationPattern, CombinationMap, bits_to_int, int_to_bits
from .config import SystemConfig

__all__ = [
    "ChirpParams",
    "chirp",
    "chirp_in_samples",
    "snap",
    "gray_encode",
    "gray_decode",
    "psk_constellation",
    "psk_modulate",
    "psk_demodulate",
    "GsmSymbol",
    "gsm_encode",
    "gsm_decode",
    "tx_vector",
    "beamform_weights",
    "JrcWaveform",
    "build_jrc_waveform",
    "write_waveform",
    "read_waveform",
]

_SNAP = 1e-7


def snap(u: np.ndarray) -> np.ndarray:
    """Round values within 1e-7 of an integer onto it.

    Sample-unit times computed from float products land a hair away from the
    integers that window edges are defined on.
    """
    u = np.asarray(u, dtype=float)
    r = np.rint(u)
    return np.where(np.abs(u - r) < _SNAP, r, u)


@dataclass(frozen=True)
class ChirpParams:
    mu: float
    T_r: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("chirp rate mu must be positive")

    @property
    def B_r(self) -> float:
        return self.mu * self.T_r

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "ChirpParams":
        return cls(mu=cfg.mu, T_r=cfg.T_r)


def chirp(p: ChirpParams, t) -> np.ndarray:
    """Baseband chirp g(t/T_r) exp(j pi mu (t - T_r/2)^2), zero outside [0, T_r)."""
    t = np.asarray(t, dtype=float)
    inside = (t >= 0.0) & (t < p.T_r)
    return np.where(inside, np.exp(1j * np.pi * p.mu * (t - p.T_r / 2) ** 2), 0.0)


def chirp_in_samples(u, cfg: SystemConfig) -> np.ndarray:
    """Chirp evaluated at ``u`` sample periods after its start.

    Same waveform as :func:`chirp` but with the support test done in sample
    units so that integer sample offsets hit the window edges exactly.
    """
    u = snap(u)
    n_pulse = snap(cfg.T_r * cfg.F_s)
    inside = (u >= 0.0) & (u < n_pulse)
    t = u * cfg.T_s
    return np.where(inside, np.exp(1j * np.pi * cfg.mu * (t - cfg.T_r / 2) ** 2), 0.0)


# -- PSK --------------------------------------------------------------------

def gray_encode(i: int) -> int:
    return i ^ (i >> 1)


def gray_decode(g: int) -> int:
    i = 0
    while g:
        i ^= g
        g >>= 1
    return i


def _log2_order(J: int) -> int:
    if J < 2 or J & (J - 1):
        raise ValueError(f"PSK order must be a power of two >= 2, got {J}")
    return int(round(math.log2(J)))


def psk_constellation(J: int) -> np.ndarray:
    """Points indexed by bit-word value: entry ``w`` is the point for word ``w``.

    Word ``w`` sits at phase position ``gray_decode(w)``, so neighbouring
    points differ in exactly one bit.
    """
    _log2_order(J)
    pos = np.array([gray_decode(w) for w in range(J)])
    return np.exp(2j * np.pi * pos / J)


def psk_modulate(bits: Sequence[int], J: int) -> complex:
    """Gray-mapped J-PSK point for one ``log2 J``-bit word (MSB first)."""
    nb = _log2_order(J)
    if len(bits) != nb:
        raise ValueError(f"J={J} needs {nb}-bit words, got {len(bits)} bits")
    return complex(psk_constellation(J)[bits_to_int(bits)])


def psk_demodulate(point: complex, J: int) -> list[int]:
    """Hard decision: bits of the nearest J-PSK point."""
    nb = _log2_order(J)
    w = int(np.argmin(np.abs(psk_constellation(J) - point)))
    return int_to_bits(w, nb)


# -- GSM --------------------------------------------------------------------

@dataclass(frozen=True)
class GsmSymbol:
    comm_elements: tuple[int, ...]
    symbols: np.ndarray

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=complex)
        if len(set(self.comm_elements)) != len(self.comm_elements):
            raise ValueError("communication elements must be distinct")
        if sym.shape != (len(self.comm_elements),):
            raise ValueError("one symbol per communication element")
        if not np.allclose(np.abs(sym), 1.0):
            raise ValueError("PSK symbols must be unit modulus")
        object.__setattr__(self, "symbols", sym)


def _bits_layout(cfg: SystemConfig, cmap: CombinationMap | None) -> tuple[CombinationMap, int, int]:
    cmap = cmap or CombinationMap(cfg.M, cfg.M_T_c)
    nb = _log2_order(cfg.J)
    return cmap, nb, cmap.n_bits + cfg.M_T_c * nb


def gsm_encode(data: Sequence[int], cfg: SystemConfig, cmap: CombinationMap | None = None) -> list[GsmSymbol]:
    """Split a bit stream into GSM symbols.

    Per symbol the first ``floor(log2 C(M, M_T_c))`` bits pick the
    communication elements; the remaining bits form ``M_T_c`` PSK words given
    to the selected elements in increasing index order.
    """
    cmap, nb, R = _bits_layout(cfg, cmap)
    bits = np.asarray(data, dtype=np.int64).ravel()
    if bits.size % R:
        raise ValueError(f"bit stream length {bits.size} is not a multiple of R={R}")
    out = []
    for s in range(bits.size // R):
        word = bits[s * R:(s + 1) * R]
        elems = cmap.from_bits(word[: cmap.n_bits])
        cbits = word[cmap.n_bits:]
        syms = [psk_modulate(cbits[i * nb:(i + 1) * nb], cfg.J) for i in range(cfg.M_T_c)]
        out.append(GsmSymbol(tuple(elems), np.array(syms)))
    return out


def gsm_decode(symbols: Sequence[GsmSymbol], cfg: SystemConfig, cmap: CombinationMap | None = None) -> np.ndarray:
    cmap, _, _ = _bits_layout(cfg, cmap)
    bits: list[int] = []
    for sym in symbols:
        bits += cmap.to_bits(sym.comm_elements)
        for point in sym.symbols:
            bits += psk_demodulate(point, cfg.J)
    return np.array(bits, dtype=np.int64)


def tx_vector(sym: GsmSymbol, M: int) -> np.ndarray:
    """Length-M channel input with the symbol's PSK points on its elements."""
    x = np.zeros(M, dtype=complex)
    x[list(sym.comm_elements)] = sym.symbols
    return x


# -- radar weighting and the joint waveform ---------------------------------

def beamform_weights(cfg: SystemConfig) -> np.ndarray:
    """Steering weights exp(-j 2 pi m d sin(theta_T)), m = 0..M-1."""
    m = np.arange(cfg.M)
    return np.exp(-1j * m * cfg.steer_spatial_freq)


@dataclass(frozen=True)
class JrcWaveform:
    """Per-element baseband samples of one pulse.

    ``radar_mask[m, k]`` is True when element ``m`` carries radar chips in
    slot ``k``. Radar and communication live in different bands, so the two
    kinds of chip are kept apart by this tag rather than summed.
    """

    samples: np.ndarray          # (M, N_r) complex
    radar_mask: np.ndarray       # (M, K) bool
    slot_of_sample: np.ndarray   # (N_r,) int
    F_s: float

    @property
    def M(self) -> int:
        return self.samples.shape[0]

    @property
    def N_r(self) -> int:
        return self.samples.shape[1]

    def band_tags(self) -> np.ndarray:
        """``(M, K)`` array of ``"radar"`` / ``"comm"`` labels."""
        return np.where(self.radar_mask, "radar", "comm")

    def radar_part(self) -> np.ndarray:
        return np.where(self.radar_mask[:, self.slot_of_sample], self.samples, 0.0)

    def comm_part(self) -> np.ndarray:
        return np.where(self.radar_mask[:, self.slot_of_sample], 0.0, self.samples)


def build_jrc_waveform(
    alloc: AllocationPattern,
    gsm: Sequence[GsmSymbol] | None,
    cfg: SystemConfig,
) -> JrcWaveform:
    """Combine the steered chirp and the GSM symbols into per-element rows.

    Radar chips are slot-gated pieces of one phase-continuous chirp;
    communication chips hold the element's PSK point (times
    ``cfg.comm_scale``) for the whole slot.
    """
    if alloc.K != cfg.K or alloc.M != cfg.M:
        raise ValueError("allocation does not match the configuration")
    mask = alloc.mask  # (K, M)
    has_comm = bool(np.any(~mask))
    if has_comm:
        if gsm is None or len(gsm) != cfg.K:
            raise ValueError(f"need {cfg.K} GSM symbols, one per slot")
        for k, sym in enumerate(gsm):
            if tuple(sorted(sym.comm_elements)) != alloc.comm(k):
                raise ValueError(
                    f"slot {k}: GSM elements {sym.comm_elements} do not match "
                    f"allocation comm set {alloc.comm(k)}"
                )
    n = np.arange(cfg.N_r)
    slot = np.minimum((snap(n / cfg.chip_samples)).astype(np.int64), cfg.K - 1)
    h = chirp_in_samples(n, cfg)
    w = beamform_weights(cfg)
    samples = np.zeros((cfg.M, cfg.N_r), dtype=complex)
    radar_rows = mask[slot].T  # (M, N_r)
    samples[radar_rows] = (w[:, None] * h[None, :])[radar_rows]
    if has_comm:
        for k, sym in enumerate(gsm):
            cols = slot == k
            for m, point in zip(sym.comm_elements, sym.symbols):
                samples[m, cols] = cfg.comm_scale * point
    return JrcWaveform(samples, mask.T.copy(), slot, cfg.F_s)


def write_waveform(path: str | Path, wf: JrcWaveform) -> tuple[Path, Path]:
    """Dump samples as interleaved little-endian float32 (I, Q), row-major.

    A sidecar ``<path>.hdr`` text file records ``M``, ``N_r`` and ``F_s``.
    """
    path = Path(path)
    inter = np.empty((wf.M, wf.N_r, 2), dtype="<f4")
    inter[..., 0] = wf.samples.real
    inter[..., 1] = wf.samples.imag
    path.write_bytes(inter.tobytes())
    hdr = path.with_name(path.name + ".hdr")
    hdr.write_text(f"M = {wf.M}\nN_r = {wf.N_r}\nF_s = {wf.F_s!r}\n")
    return path, hdr


def read_waveform(path: str | Path) -> tuple[np.ndarray, float]:
    path = Path(path)
    meta = {}
    for line in path.with_name(path.name + ".hdr").read_text().splitlines():
        if "=" in line:
            k, v = (s.strip() for s in line.split("=", 1))
            meta[k] = v
    M, N = int(meta["M"]), int(meta["N_r"])
    raw = np.frombuffer(path.read_bytes(), dtype="<f4").reshape(M, N, 2)
    return raw[..., 0].astype(float) + 1j * raw[..., 1].astype(float), float(meta["F_s"])
