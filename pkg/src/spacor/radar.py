"""Radar echoes, the on-grid delay/angle dictionary and OMP recovery.

Receive samples are taken at ``t_n = T_r + n T_s`` for ``n < N_rec``, i.e.
the receive window follows the pulse. The echo of a unit target at delay
``tau`` and spatial frequency ``vartheta`` on element ``m`` is

    h_m[n] = exp(-j 2 pi f_c tau + j m vartheta)
             * sum_k rho_k(vartheta) g((t_n - k T_c - tau)/T_c) h(t_n - tau)

with ``rho_k`` the slot-``k`` transmit gain towards ``vartheta`` for the
steered array.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .allocation import AllocationPattern
from .config import SystemConfig
from .waveform import chirp_in_samples, snap

__all__ = [
    "Target",
    "TargetScene",
    "load_scene",
    "save_scene",
    "DelayAngleGrid",
    "EchoBlock",
    "RecoveredScene",
    "RecoveryError",
    "SensingMatrixTooLarge",
    "wrap_angle",
    "slot_gains",
    "chip_waveforms",
    "echo_template",
    "echo_templates",
    "support_window",
    "radar_noise_sigma",
    "noise_floor_epsilon",
    "synthesize_echo",
    "build_sensing_matrix",
    "ChipDictionary",
    "omp_recover",
    "generate_clutter",
    "hit_test",
    "write_recovery_csv",
]


class RecoveryError(RuntimeError):
    """OMP selected a dependent atom; the support cannot be refitted."""


class SensingMatrixTooLarge(MemoryError):
    pass


def wrap_angle(x):
    """Map angles to [-pi, pi)."""
    return (np.asarray(x, dtype=float) + np.pi) % (2 * np.pi) - np.pi


# -- scenes -----------------------------------------------------------------

@dataclass(frozen=True)
class Target:
    tau: float
    vartheta: float
    alpha: complex = 1.0 + 0j
    clutter: bool = False


@dataclass
class TargetScene:
    targets: list[Target] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.targets)

    def __iter__(self):
        return iter(self.targets)

    def __add__(self, other: "TargetScene") -> "TargetScene":
        return TargetScene(self.targets + other.targets)

    @property
    def true_targets(self) -> list[Target]:
        return [t for t in self.targets if not t.clutter]

    def validate(self, cfg: SystemConfig) -> None:
        lo, hi = cfg.T_r, cfg.T_pri - cfg.T_r
        for t in self.targets:
            if not lo - 1e-15 <= t.tau < hi:
                raise ValueError(f"target delay {t.tau:.6g} s outside [{lo:.6g}, {hi:.6g}) s")
            if not -np.pi <= t.vartheta < np.pi:
                raise ValueError(f"spatial frequency {t.vartheta} outside [-pi, pi)")


def load_scene(path: str | Path) -> TargetScene:
    """Read a scene CSV with columns ``tau_s, vartheta_rad, alpha_re, alpha_im``."""
    targets = []
    with open(path, newline="") as fh:
        rows = (line for line in fh if line.strip() and not line.lstrip().startswith("#"))
        for row in csv.DictReader(rows):
            try:
                targets.append(Target(
                    float(row["tau_s"]),
                    float(row["vartheta_rad"]),
                    complex(float(row["alpha_re"]), float(row.get("alpha_im") or 0.0)),
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: malformed scene row {row}: {exc}") from None
    return TargetScene(targets)


def save_scene(path: str | Path, scene: TargetScene) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau_s", "vartheta_rad", "alpha_re", "alpha_im"])
        for t in scene:
            w.writerow([repr(t.tau), repr(t.vartheta), repr(t.alpha.real), repr(t.alpha.imag)])


# -- grid -------------------------------------------------------------------

@dataclass(frozen=True)
class DelayAngleGrid:
    """``tau^p = tau_min + p/P (tau_max - tau_min)``, ``vartheta^q = -pi + 2 pi q / Q``."""

    tau_min: float
    tau_max: float
    P: int
    Q: int

    def __post_init__(self):
        if self.P < 1 or self.Q < 1 or not self.tau_max > self.tau_min:
            raise ValueError("grid needs P, Q >= 1 and tau_max > tau_min")

    @classmethod
    def around(cls, cfg: SystemConfig, tau_start: float, P: int, oversample: int = 5) -> "DelayAngleGrid":
        """Grid with spacings 1/(oversample B_r) and 2 pi/(oversample M)."""
        dtau = 1.0 / (oversample * cfg.B_r)
        return cls(tau_start, tau_start + P * dtau, P, oversample * cfg.M)

    @property
    def dtau(self) -> float:
        return (self.tau_max - self.tau_min) / self.P

    @property
    def dtheta(self) -> float:
        return 2 * np.pi / self.Q

    @property
    def taus(self) -> np.ndarray:
        return self.tau_min + np.arange(self.P) / self.P * (self.tau_max - self.tau_min)

    @property
    def thetas(self) -> np.ndarray:
        return -np.pi + 2 * np.pi * np.arange(self.Q) / self.Q

    @property
    def size(self) -> int:
        return self.P * self.Q

    def check(self, cfg: SystemConfig) -> None:
        if self.dtau > 1.0 / cfg.B_r * (1 + 1e-9):
            raise ValueError("delay spacing exceeds 1/B_r")
        if self.dtheta > 2 * np.pi / cfg.M * (1 + 1e-9):
            raise ValueError("angle spacing exceeds 2 pi/M")

    def column(self, p: int, q: int) -> int:
        return p * self.Q + q

    def cell(self, column: int) -> tuple[int, int]:
        return divmod(int(column), self.Q)

    def delay_cell(self, tau: float) -> int:
        return int(np.rint(snap((tau - self.tau_min) / self.dtau)))

    def angle_cell(self, vartheta: float) -> int:
        return int(np.rint((wrap_angle(vartheta) + np.pi) / self.dtheta)) % self.Q

    def point(self, p: int, q: int) -> tuple[float, float]:
        return float(self.taus[p]), float(self.thetas[q])


# -- templates --------------------------------------------------------------

def slot_gains(alloc: AllocationPattern, vartheta, cfg: SystemConfig) -> np.ndarray:
    """rho_k(vartheta) = sum_l exp(j m_{k,l} (vartheta - vartheta_T)), shape (K, len)."""
    th = np.atleast_1d(np.asarray(vartheta, dtype=float)) - cfg.steer_spatial_freq
    E = np.exp(1j * np.multiply.outer(np.arange(cfg.M), th))
    return alloc.mask.astype(float) @ E


def _sample_offsets(tau, cfg: SystemConfig, n: np.ndarray) -> np.ndarray:
    # (t_n - tau) in samples, t_n = T_r + n T_s
    return snap(n[None, :] + (cfg.T_r - np.atleast_1d(tau))[:, None] * cfg.F_s)


def chip_waveforms(tau, cfg: SystemConfig, window: tuple[int, int] | None = None) -> np.ndarray:
    """Slot-gated chirp pieces ``g((t_n - k T_c - tau)/T_c) h(t_n - tau)``.

    Returns shape ``(len(tau), K, N_w)`` over the sample window.
    """
    n0, n1 = window or (0, cfg.N_rec)
    n = np.arange(n0, n1)
    u = _sample_offsets(tau, cfg, n)                         # (T, N_w)
    h = chirp_in_samples(u, cfg)
    slot = np.floor(u / cfg.chip_samples + 1e-9).astype(np.int64)
    k = np.arange(cfg.K)[None, :, None]
    return np.where(slot[:, None, :] == k, h[:, None, :], 0.0)


def echo_templates(tau: float, vartheta: float, alloc: AllocationPattern, cfg: SystemConfig,
                   window: tuple[int, int] | None = None) -> np.ndarray:
    """Noise-free unit echo on all elements, shape ``(M, N_w)``."""
    n0, n1 = window or (0, cfg.N_rec)
    u = _sample_offsets([tau], cfg, np.arange(n0, n1))[0]
    slot = np.floor(u / cfg.chip_samples + 1e-9).astype(np.int64)
    inside = (slot >= 0) & (slot < cfg.K)
    rho = slot_gains(alloc, [vartheta], cfg)[:, 0]            # (K,)
    base = np.where(inside, rho[np.clip(slot, 0, cfg.K - 1)] * chirp_in_samples(u, cfg), 0.0)
    phase = np.exp(-2j * np.pi * cfg.f_c * tau + 1j * np.arange(cfg.M) * vartheta)
    return phase[:, None] * base[None, :]


def echo_template(m: int, n, tau: float, vartheta: float, alloc: AllocationPattern,
                  cfg: SystemConfig) -> np.ndarray:
    """h_m[n, tau, vartheta] at the requested sample indices."""
    n = np.atleast_1d(np.asarray(n, dtype=np.int64))
    lo, hi = int(n.min()), int(n.max()) + 1
    return echo_templates(tau, vartheta, alloc, cfg, (lo, hi))[m, n - lo]


def support_window(cfg: SystemConfig, tau_min: float, tau_max: float, margin: int = 2) -> tuple[int, int]:
    """Smallest sample range holding every echo with delay in [tau_min, tau_max]."""
    lo = int(math.floor((tau_min - cfg.T_r) * cfg.F_s)) - margin
    hi = int(math.ceil(tau_max * cfg.F_s)) + margin + 1
    return max(lo, 0), min(hi, cfg.N_rec)


# -- echoes -----------------------------------------------------------------

@dataclass
class EchoBlock:
    samples: np.ndarray      # (M, N_w)
    n_start: int = 0

    @property
    def window(self) -> tuple[int, int]:
        return self.n_start, self.n_start + self.samples.shape[1]

    def flat(self) -> np.ndarray:
        """Stacked vector with entry ``m N_w + n``."""
        return self.samples.reshape(-1)


def radar_noise_sigma(cfg: SystemConfig, snr_db: float) -> float:
    """sigma_r from SNR = M_T_r^2 P_t / sigma_r^2."""
    return math.sqrt(cfg.M_T_r ** 2 * cfg.transmit_power / 10 ** (snr_db / 10))


def noise_floor_epsilon(sigma: float, n_samples: int) -> float:
    """Residual threshold sigma sqrt(2 n) for the OMP stopping rule."""
    return sigma * math.sqrt(2 * n_samples)


def synthesize_echo(scene: TargetScene, alloc: AllocationPattern, cfg: SystemConfig,
                    noise_sigma: float = 0.0, rng: np.random.Generator | None = None,
                    window: tuple[int, int] | None = None) -> EchoBlock:
    """Sum of target echoes plus circular white Gaussian noise of variance sigma^2."""
    scene.validate(cfg)
    n0, n1 = window or (0, cfg.N_rec)
    y = np.zeros((cfg.M, n1 - n0), dtype=complex)
    for t in scene:
        if t.alpha != 0:
            y += t.alpha * echo_templates(t.tau, t.vartheta, alloc, cfg, (n0, n1))
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("noise needs an rng")
        y += noise_sigma / math.sqrt(2) * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return EchoBlock(y, n0)


def build_sensing_matrix(grid: DelayAngleGrid, alloc: AllocationPattern, cfg: SystemConfig,
                         window: tuple[int, int] | None = None,
                         max_bytes: int = 1 << 28) -> np.ndarray:
    """Dense observation matrix, ``A[m N_w + n, p Q + q] = h_m[n, tau^p, vartheta^q]``."""
    n0, n1 = window or (0, cfg.N_rec)
    rows, cols = cfg.M * (n1 - n0), grid.size
    if rows * cols * 16 > max_bytes:
        raise SensingMatrixTooLarge(
            f"{rows} x {cols} complex matrix exceeds {max_bytes} bytes; "
            "restrict the sample window or use ChipDictionary"
        )
    return ChipDictionary(grid, alloc, cfg, (n0, n1)).dense()


@lru_cache(maxsize=16)
def _chip_gram(cfg: SystemConfig, taus: tuple, window: tuple[int, int]):
    chips = chip_waveforms(np.array(taus), cfg, window)       # (P, K, N_w)
    P, K, N = chips.shape
    flat = chips.reshape(P * K, N)
    flat_h = np.ascontiguousarray(flat.conj())
    gram = (flat_h @ flat.T).reshape(P, K, P, K)
    for a in (chips, flat_h, gram):
        a.setflags(write=False)
    return chips, flat_h, gram


class ChipDictionary:
    """Matrix-free view of the observation matrix.

    Every column factorises into a delay phase, a receive steering phase, the
    slot gains of the allocation and the gated chirp pieces. Correlations and
    Gram entries are assembled from the allocation-independent chip Gram
    matrix, so swapping allocations costs only the small gain products.
    """

    def __init__(self, grid: DelayAngleGrid, alloc: AllocationPattern, cfg: SystemConfig,
                 window: tuple[int, int] | None = None):
        self.grid, self.alloc, self.cfg = grid, alloc, cfg
        self.window = window or support_window(cfg, grid.tau_min, grid.tau_max)
        self.chips, self._chips_h, self.chip_gram = _chip_gram(cfg, tuple(grid.taus), self.window)
        th = grid.thetas
        self.rho = slot_gains(alloc, th, cfg)                                 # (K, Q)
        self.rx = np.exp(1j * np.multiply.outer(np.arange(cfg.M), th))        # (M, Q)
        self.delay_phase = np.exp(-2j * np.pi * cfg.f_c * grid.taus)           # (P,)
        self._norms2 = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.cfg.M * (self.window[1] - self.window[0]), self.grid.size

    def dense(self) -> np.ndarray:
        base = np.einsum("pkn,kq->pqn", self.chips, self.rho)                 # (P, Q, N)
        cols = (self.delay_phase[:, None, None, None] * self.rx.T[None, :, :, None]
                * base[:, :, None, :])                                         # (P, Q, M, N)
        P, Q, M, N = cols.shape
        return cols.reshape(P * Q, M * N).T.copy()

    def correlate(self, y: np.ndarray) -> np.ndarray:
        """A^H y for a stacked echo vector."""
        Y = np.asarray(y, dtype=complex).reshape(self.cfg.M, -1)
        P, K = self.grid.P, self.cfg.K
        z = (self._chips_h @ Y.T) @ self.rx.conj()                            # (P*K, Q)
        c = (z.reshape(P, K, -1) * self.rho.conj()[None]).sum(axis=1)
        return (self.delay_phase.conj()[:, None] * c).reshape(-1)

    def column_norms2(self) -> np.ndarray:
        if self._norms2 is None:
            P = self.grid.P
            Gd = self.chip_gram[np.arange(P), :, np.arange(P), :]             # (P, K, K)
            quad = np.einsum("kq,pkl,lq->pq", self.rho.conj(), Gd, self.rho)
            self._norms2 = (self.cfg.M * quad.real).reshape(-1)
        return self._norms2

    def gram_columns(self, cols: Sequence[int]) -> np.ndarray:
        """A^H A[:, cols], shape (n_atoms, len(cols))."""
        out = np.empty((self.grid.size, len(cols)), dtype=complex)
        for i, col in enumerate(cols):
            ps, qs = self.grid.cell(col)
            g = self.chip_gram[:, :, ps, :] @ self.rho[:, qs]                 # (P, K)
            tx = np.einsum("kq,pk->pq", self.rho.conj(), g)
            rx = self.rx.conj().T @ self.rx[:, qs]                             # (Q,)
            ph = self.delay_phase.conj()[:, None] * self.delay_phase[ps]
            out[:, i] = (ph * rx[None, :] * tx).reshape(-1)
        return out


# -- OMP --------------------------------------------------------------------

@dataclass
class RecoveredScene:
    entries: list[tuple[tuple[int, int], complex]]
    residual_norm: float
    residual_history: list[float]

    def cells(self) -> list[tuple[int, int]]:
        return [c for c, _ in self.entries]


def _usable_norms(norms):
    # atoms nulled by the transmit pattern (e.g. Fix1 at vartheta = pi) are never selectable
    return np.where(norms > 1e-9 * norms.max(), norms, np.inf)


def _omp_dense(y, A, grid_Q, L_max, eps):
    norms = _usable_norms(np.linalg.norm(A, axis=0))
    support: list[int] = []
    r = y.copy()
    hist = [float(np.linalg.norm(r))]
    b = np.zeros(0, dtype=complex)
    floor = max(eps, 1e-10 * hist[0])
    while len(support) < L_max and hist[-1] > floor:
        j = int(np.argmax(np.abs(A.conj().T @ r) / norms))
        if j in support:
            raise RecoveryError(f"atom {j} selected twice; selected columns are dependent")
        support.append(j)
        As = A[:, support]
        sv = np.linalg.svd(As, compute_uv=False)
        if sv[-1] <= 1e-10 * sv[0]:
            raise RecoveryError(f"selected columns {support} are rank deficient")
        b = np.linalg.lstsq(As, y, rcond=None)[0]
        r = y - As @ b
        hist.append(float(np.linalg.norm(r)))
    return support, b, hist


def _omp_gram(y, D: ChipDictionary, L_max, eps):
    norms = _usable_norms(np.sqrt(np.maximum(D.column_norms2(), 0.0)))
    c0 = D.correlate(y)
    y2 = float(np.vdot(y, y).real)
    support: list[int] = []
    gcols = np.zeros((c0.size, 0), dtype=complex)
    corr = c0
    hist = [math.sqrt(y2)]
    b = np.zeros(0, dtype=complex)
    # residual energy from y2 - c^H b loses ~1e-8 relative precision
    floor = max(eps, 1e-6 * hist[0])
    while len(support) < L_max and hist[-1] > floor:
        j = int(np.argmax(np.abs(corr) / norms))
        if j in support:
            raise RecoveryError(f"atom {j} selected twice; selected columns are dependent")
        support.append(j)
        gcols = np.hstack([gcols, D.gram_columns([j])])
        Gs = gcols[support, :]
        if np.linalg.cond(Gs) > 1e12:
            raise RecoveryError(f"selected columns {support} are rank deficient")
        b = np.linalg.solve(Gs, c0[support])
        corr = c0 - gcols @ b
        res2 = y2 - float(np.vdot(c0[support], b).real)
        hist.append(math.sqrt(max(res2, 0.0)))
    return support, b, hist


def omp_recover(y, A, L_max: int, epsilon: float = 0.0, grid: DelayAngleGrid | None = None) -> RecoveredScene:
    """Orthogonal matching pursuit.

    Each iteration adds the atom with the largest normalised correlation to
    the residual and refits all selected amplitudes by least squares. Stops
    after ``L_max`` atoms or when the residual norm drops to ``epsilon``.

    Parameters
    ----------
    y : EchoBlock or array
        Echo; blocks are stacked element-major.
    A : ndarray or ChipDictionary
        Dense observation matrix (``grid`` required for cell indices) or the
        matrix-free dictionary.
    """
    if L_max < 1:
        raise ValueError("L_max must be >= 1")
    if isinstance(y, EchoBlock):
        y = y.flat()
    y = np.asarray(y, dtype=complex).reshape(-1)
    if isinstance(A, ChipDictionary):
        grid = A.grid
        support, b, hist = _omp_gram(y, A, L_max, epsilon)
    else:
        if grid is None:
            raise ValueError("dense recovery needs the grid to label atoms")
        support, b, hist = _omp_dense(y, np.asarray(A), grid.Q, L_max, epsilon)
    entries = [(grid.cell(j), complex(a)) for j, a in zip(support, b)]
    return RecoveredScene(entries, hist[-1], hist)


# -- clutter and scoring ----------------------------------------------------

def generate_clutter(scene: TargetScene, cfg: SystemConfig, scr_db: float,
                     rng: np.random.Generator, n_clutter: int = 2) -> TargetScene:
    """Append Rayleigh clutter scatterers in the first target's range cell.

    Angles are uniform outside the mainlobe ``|vartheta - vartheta_T| <= 2 pi/M``;
    the mean-square amplitude is ``|alpha_target|^2 / SCR``.
    """
    if not scene.true_targets:
        raise ValueError("clutter needs at least one target")
    ref = scene.true_targets[0]
    scr = 10 ** (scr_db / 10)
    # E|a|^2 = 2 s^2 for a Rayleigh amplitude of scale s
    scale = abs(ref.alpha) / math.sqrt(2 * scr) if np.isfinite(scr) else 0.0
    extra = []
    for _ in range(n_clutter):
        while True:
            th = rng.uniform(-np.pi, np.pi)
            if abs(wrap_angle(th - cfg.steer_spatial_freq)) > 2 * np.pi / cfg.M:
                break
        amp = rng.rayleigh(scale) if scale > 0 else 0.0
        phase = rng.uniform(0, 2 * np.pi)
        extra.append(Target(ref.tau, float(th), complex(amp * np.exp(1j * phase)), clutter=True))
    return TargetScene(scene.targets + extra)


def hit_test(truth: TargetScene | Iterable[Target], rec: RecoveredScene, grid: DelayAngleGrid) -> np.ndarray:
    """Per true target: recovered in its delay cell within half an angle cell."""
    targets = truth.true_targets if isinstance(truth, TargetScene) else [t for t in truth if not t.clutter]
    hits = np.zeros(len(targets), dtype=bool)
    for i, t in enumerate(targets):
        p_t = grid.delay_cell(t.tau)
        for (p, q), _ in rec.entries:
            if p != p_t:
                continue
            err = abs(float(wrap_angle(grid.thetas[q] - t.vartheta)))
            if err <= grid.dtheta / 2 + 1e-12:
                hits[i] = True
                break
    return hits


def write_recovery_csv(path: str | Path, rec: RecoveredScene, grid: DelayAngleGrid) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "q", "tau_s", "vartheta_rad", "amp_re", "amp_im", "residual"])
        for (p, q), a in rec.entries:
            tau, th = grid.point(p, q)
            w.writerow([p, q, f"{tau:.12e}", f"{th:.9f}", f"{a.real:.9e}", f"{a.imag:.9e}",
                        f"{rec.residual_norm:.9e}"])
