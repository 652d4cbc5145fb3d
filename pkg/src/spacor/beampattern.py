"""Delay-direction transmit beam patterns.

The instantaneous pattern of one pulse is

    chi(tau_d, f) = sum_k eta(k, tau_d) * rho(k, f)

with ``rho(k, f) = sum_l exp(j m_{k,l} f)`` the slot-``k`` transmit gain and
``eta(k, tau_d)`` the correlation, over slot ``k``, of the chirp delayed by
``tau_d`` with the reference chirp. Closed forms for the full array, Fix1 and
the mean and variance under random allocation live alongside.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .allocation import AllocationPattern, Scheme, sample_radar_masks
from .config import SystemConfig
from .waveform import snap

__all__ = [
    "BeamGrid",
    "BeamPatternSurface",
    "dirichlet",
    "transmit_gain",
    "default_tau_tilde",
    "chip_correlations",
    "beampattern_instant",
    "beampattern_at",
    "sample_beampatterns",
    "pattern_moments",
    "peak_normalizer",
    "full_closed",
    "fix1_closed",
    "expected_closed",
    "variance_closed",
    "variance_gamma",
    "angular_resolution",
    "first_null",
    "write_surface_csv",
]

_SING = 1e-9


def _sym_unit(n: int) -> np.ndarray:
    # n points on [-1, 1], exactly zero at the centre for odd n
    h = (n - 1) / 2
    return (np.arange(n) - h) / h


@dataclass(frozen=True)
class BeamGrid:
    tau_d: np.ndarray      # delay offsets [s]
    f_theta: np.ndarray    # spatial-frequency offsets [rad]

    def __post_init__(self):
        for name in ("tau_d", "f_theta"):
            a = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if a.ndim != 1 or a.size < 1:
                raise ValueError(f"{name} must be a non-empty 1-D array")
            if a.size > 1 and np.any(np.diff(a) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, a)

    @property
    def shape(self) -> tuple[int, int]:
        return self.tau_d.size, self.f_theta.size

    @classmethod
    def symmetric(cls, cfg: SystemConfig, n_tau: int = 101, n_f: int = 101,
                  tau_span: float | None = None) -> "BeamGrid":
        """Grid over ``[-tau_span, tau_span] x [-pi, pi]``; default span 5/B_r."""
        tau_span = 5.0 / cfg.B_r if tau_span is None else tau_span
        return cls(tau_span * _sym_unit(n_tau), np.pi * _sym_unit(n_f))


@dataclass
class BeamPatternSurface:
    values: np.ndarray     # (n_tau, n_f)
    grid: BeamGrid
    kind: str              # instant | mean | variance | closed_form

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def normalized(self, scale: float) -> "BeamPatternSurface":
        return BeamPatternSurface(self.values / scale, self.grid, self.kind)


def dirichlet(f, M: int) -> np.ndarray:
    """sin(M f / 2) / sin(f / 2), with the removable singularity set to its limit."""
    f = np.asarray(f, dtype=float)
    s = np.sin(f / 2)
    small = np.abs(s) < _SING
    safe = np.where(small, 1.0, s)
    # limit at f = 2 pi n is M * (-1)^(n (M-1))
    n = np.rint(f / (2 * np.pi))
    limit = M * np.where((n * (M - 1)) % 2 == 0, 1.0, -1.0)
    return np.where(small, limit, np.sin(M * f / 2) / safe)


def transmit_gain(indices, f_theta) -> np.ndarray:
    """rho = sum_l exp(j m_l f) for one slot's radar indices."""
    m = np.asarray(indices, dtype=float)
    f = np.asarray(f_theta, dtype=float)
    return np.exp(1j * np.multiply.outer(f, m)).sum(axis=-1)


def default_tau_tilde(cfg: SystemConfig) -> float:
    """Reference delay used by the beam-pattern routines: 2 T_r."""
    return 2.0 * cfg.T_r


def chip_correlations(cfg: SystemConfig, tau_d, tau_tilde: float | None = None) -> np.ndarray:
    """eta(k, tau_d) for every slot and delay offset, shape ``(K, len(tau_d))``.

    Receive samples sit at ``t_n = T_r + n T_s``, ``n < N_rec``.
    """
    tau_d = np.atleast_1d(np.asarray(tau_d, dtype=float))
    tau_tilde = default_tau_tilde(cfg) if tau_tilde is None else float(tau_tilde)
    lo, hi = tau_tilde + tau_d.min(), tau_tilde + tau_d.max() + cfg.T_r
    for t0, t1 in ((tau_tilde, tau_tilde + cfg.T_r), (lo, hi)):
        if t0 < cfg.T_r - 1e-15 or t1 > cfg.T_pri + 1e-15:
            raise ValueError(
                f"echo span [{t0:.6g}, {t1:.6g}) s leaves the receive window "
                f"[{cfg.T_r:.6g}, {cfg.T_pri:.6g}) s"
            )
    s = float(snap((tau_tilde - cfg.T_r) * cfg.F_s))
    n0 = int(math.ceil(s))
    v0 = n0 - s
    n_pulse = float(snap(cfg.T_r * cfg.F_s))
    n_valid = int(math.ceil(n_pulse - v0))
    n_valid = max(0, min(n_valid, cfg.N_rec - n0))
    a = math.pi * cfg.mu * cfg.T_s ** 2
    return kernels.chip_correlations(tau_d * cfg.F_s, v0, n_valid, n_pulse,
                                     float(cfg.chip_samples), cfg.K, a)


def _gain_matrix(mask: np.ndarray, f_theta: np.ndarray) -> np.ndarray:
    # (..., K, M) mask -> (..., K, F) transmit gains
    M = mask.shape[-1]
    E = np.exp(1j * np.multiply.outer(np.arange(M), f_theta))
    return mask.astype(float) @ E


def beampattern_instant(
    alloc: AllocationPattern, cfg: SystemConfig, grid: BeamGrid, tau_tilde: float | None = None
) -> BeamPatternSurface:
    """Complex pattern of one pulse over the grid, from the exact discrete sums."""
    eta = chip_correlations(cfg, grid.tau_d, tau_tilde)
    rho = _gain_matrix(alloc.mask, grid.f_theta)
    return BeamPatternSurface(eta.T @ rho, grid, "instant")


def beampattern_at(alloc: AllocationPattern, cfg: SystemConfig, tau_d, f_theta,
                   tau_tilde: float | None = None) -> np.ndarray:
    """Pattern at paired points ``(tau_d[i], f_theta[i])``."""
    tau_d = np.atleast_1d(np.asarray(tau_d, dtype=float))
    f = np.atleast_1d(np.asarray(f_theta, dtype=float))
    eta = chip_correlations(cfg, tau_d, tau_tilde)
    rho = _gain_matrix(alloc.mask, f)
    return np.sum(eta * rho, axis=0)


def sample_beampatterns(
    cfg: SystemConfig,
    scheme: Scheme | str,
    tau_d,
    f_theta,
    n_trials: int,
    rng: np.random.Generator,
    tau_tilde: float | None = None,
    chunk: int = 4096,
) -> np.ndarray:
    """Instantaneous patterns of ``n_trials`` random pulses at paired points.

    Returns an ``(n_trials, n_points)`` complex array; allocations follow the
    uniform random model of :func:`spacor.allocation.sample_radar_masks`.
    """
    tau_d = np.atleast_1d(np.asarray(tau_d, dtype=float))
    f = np.atleast_1d(np.asarray(f_theta, dtype=float))
    eta = chip_correlations(cfg, tau_d, tau_tilde)              # (K, P)
    E = np.exp(1j * np.multiply.outer(np.arange(cfg.M), f))      # (M, P)
    out = np.empty((n_trials, tau_d.size), dtype=complex)
    # keep the (chunk, K, P) intermediate near 64 MB
    chunk = max(1, min(chunk, (1 << 22) // max(1, cfg.K * tau_d.size)))
    for s in range(0, n_trials, chunk):
        n = min(chunk, n_trials - s)
        masks = sample_radar_masks(scheme, cfg, n, rng).astype(float)
        # sum_k eta[k,p] sum_m mask[t,k,m] E[m,p]
        out[s:s + n] = np.einsum("tkm,mp,kp->tp", masks, E, eta, optimize=True)
    return out


def pattern_moments(
    cfg: SystemConfig,
    scheme: Scheme | str,
    grid: BeamGrid,
    n_trials: int,
    rng: np.random.Generator,
    tau_tilde: float | None = None,
) -> tuple[BeamPatternSurface, BeamPatternSurface]:
    """Monte Carlo mean and variance surfaces over ``n_trials`` random pulses.

    The pattern is linear in the allocation mask, so the sample mean and the
    sample second moment of the surface follow exactly from the first and
    second sample moments of the masks; no per-trial surface is formed.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    K, M = cfg.K, cfg.M
    masks = sample_radar_masks(scheme, cfg, n_trials, rng).reshape(n_trials, K * M).astype(float)
    m1 = masks.mean(axis=0)
    m2 = masks.T @ masks / n_trials
    eta = chip_correlations(cfg, grid.tau_d, tau_tilde)                   # (K, T)
    E = np.exp(1j * np.multiply.outer(np.arange(M), grid.f_theta))        # (M, F)
    B = (eta[:, None, :, None] * E[None, :, None, :]).reshape(K * M, -1)  # (KM, T*F)
    mean = m1 @ B
    second = np.einsum("ap,ap->p", B, m2 @ B.conj()).real
    var = np.maximum(second - np.abs(mean) ** 2, 0.0)
    shape = grid.shape
    return (BeamPatternSurface(mean.reshape(shape), grid, "mean"),
            BeamPatternSurface(var.reshape(shape), grid, "variance"))


def peak_normalizer(scheme: Scheme | str, cfg: SystemConfig) -> float:
    """Expected pattern value at the origin, n_radar * N_r."""
    n = cfg.M if Scheme.parse(scheme) is Scheme.FULL else cfg.M_T_r
    return float(n * cfg.N_r)


# -- closed forms -----------------------------------------------------------

def _mesh(grid: BeamGrid) -> tuple[np.ndarray, np.ndarray]:
    return np.meshgrid(grid.tau_d, grid.f_theta, indexing="ij")


def full_closed(cfg: SystemConfig, grid: BeamGrid) -> BeamPatternSurface:
    """Full array: N_r |sinc(B_r tau_d)| |sin(M f/2) / sin(f/2)|."""
    t, f = _mesh(grid)
    v = cfg.N_r * np.abs(np.sinc(cfg.B_r * t)) * np.abs(dirichlet(f, cfg.M))
    return BeamPatternSurface(v, grid, "closed_form")


def fix1_closed(cfg: SystemConfig, grid: BeamGrid) -> BeamPatternSurface:
    """Fix1: N_r |sinc(B_r tau_d)| |sin(M_T_r f/2) / sin(f/2)|.

    Obtained by putting the contiguous indices ``m_{k,l} = l`` in every
    slot; the peak is ``M_T_r N_r``.
    """
    t, f = _mesh(grid)
    v = cfg.N_r * np.abs(np.sinc(cfg.B_r * t)) * np.abs(dirichlet(f, cfg.M_T_r))
    return BeamPatternSurface(v, grid, "closed_form")


def expected_closed(cfg: SystemConfig, grid: BeamGrid) -> BeamPatternSurface:
    """|E chi| under random allocation: (M_T_r N_r / M) |sinc| |D_M|."""
    full = full_closed(cfg, grid)
    return BeamPatternSurface(full.values * cfg.M_T_r / cfg.M, grid, "mean")


def variance_gamma(cfg: SystemConfig, tau_d, scheme: Scheme | str) -> np.ndarray:
    scheme = Scheme.parse(scheme)
    tau_d = np.asarray(tau_d, dtype=float)
    if scheme is Scheme.SPACOR:
        return np.sinc(cfg.B_r * tau_d / cfg.K) ** 2 / cfg.K
    if scheme is Scheme.FIX2:
        return np.sinc(cfg.B_r * tau_d) ** 2
    raise ValueError(f"variance closed form defined for SpaCoR and Fix2, not {scheme.value}")


def variance_closed(cfg: SystemConfig, grid: BeamGrid, scheme: Scheme | str = Scheme.SPACOR) -> BeamPatternSurface:
    """Variance of chi / E{chi(0,0)} for SpaCoR or Fix2 random allocations."""
    M, Mr = cfg.M, cfg.M_T_r
    t, f = _mesh(grid)
    D2 = dirichlet(f, M) ** 2
    bracket = (Mr - M) / (Mr * M ** 2 * (M - 1)) * D2 + (M - Mr) / (Mr * (M - 1))
    v = variance_gamma(cfg, t, scheme) * bracket
    # the bracket vanishes at f = 0; clip the rounding residue
    return BeamPatternSurface(np.maximum(v, 0.0), grid, "variance")


def angular_resolution(scheme: Scheme | str, cfg: SystemConfig) -> float:
    """Half the null-to-null mainlobe width, in spatial-frequency units."""
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.FIX1:
        return 2 * np.pi / cfg.M_T_r
    return 2 * np.pi / cfg.M


def first_null(f_theta, magnitude, floor: float = 1e-3) -> float:
    """Smallest positive f where ``magnitude`` has its first local minimum.

    Returns ``nan`` when no minimum below ``floor * max`` exists.
    """
    f = np.asarray(f_theta, dtype=float)
    mag = np.asarray(magnitude, dtype=float)
    pos = f > 0
    f, mag = f[pos], mag[pos]
    thresh = floor * np.max(np.abs(magnitude))
    for i in range(1, len(mag)):
        right_ok = i == len(mag) - 1 or mag[i] <= mag[i + 1]
        if mag[i] <= mag[i - 1] and right_ok and mag[i] <= thresh:
            return float(f[i])
    return float("nan")


def write_surface_csv(path: str | Path, surface: BeamPatternSurface) -> None:
    """Columns ``tau_d_s, f_theta_rad, value``; complex values are written as magnitudes."""
    vals = surface.values
    if np.iscomplexobj(vals):
        vals = np.abs(vals)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau_d_s", "f_theta_rad", "value"])
        for i, t in enumerate(surface.grid.tau_d):
            for j, f in enumerate(surface.grid.f_theta):
                w.writerow([f"{t:.9e}", f"{f:.9f}", f"{vals[i, j]:.9e}"])
