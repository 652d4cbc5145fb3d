"""Seeded Monte Carlo campaigns and their CSV output.

Every random stream is derived from ``numpy.random.SeedSequence`` with the
master seed and the position of the draw (sweep index, trial, scheme), so a
rerun with the same seed reproduces every byte of the output, whatever the
number of worker processes.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .allocation import Scheme, make_allocation
from .beampattern import (
    BeamGrid,
    angular_resolution,
    beampattern_instant,
    expected_closed,
    first_null,
    pattern_moments,
    peak_normalizer,
    write_surface_csv,
)
from .comm import ber_experiment, candidate_set, mi_estimate, smx_order_for_rate
from .config import SystemConfig, validate_config
from .radar import (
    ChipDictionary,
    DelayAngleGrid,
    Target,
    TargetScene,
    generate_clutter,
    hit_test,
    load_scene,
    omp_recover,
    radar_noise_sigma,
    synthesize_echo,
    write_recovery_csv,
)

__all__ = [
    "KINDS",
    "ExperimentSpec",
    "ResultRow",
    "ResultTable",
    "default_sweep",
    "bundled_scene",
    "scene_grid",
    "run_beampattern",
    "run_resolve",
    "run_hitrate",
    "run_ber",
    "run_mi",
    "run",
]

KINDS = ("beampattern", "resolve", "hitrate", "ber", "mi")

_SWEEP_NAMES = {
    "beampattern": "grid",
    "resolve": "snr_db",
    "hitrate": "scr_db",
    "ber": "snr_db",
    "mi": "snr_db",
}


def default_sweep(kind: str) -> tuple[float, ...]:
    if kind in ("ber", "mi"):
        return tuple(float(x) for x in range(-10, 31, 2))
    if kind == "hitrate":
        return tuple(float(x) for x in range(-10, 21, 3))
    if kind == "resolve":
        return (0.0,)
    if kind == "beampattern":
        return (101.0, 101.0)
    raise ValueError(f"unknown experiment kind {kind!r}")


_DEFAULT_TRIALS = {"beampattern": 10_000, "resolve": 100, "hitrate": 4000, "ber": 100_000, "mi": 10_000}


@dataclass
class ExperimentSpec:
    """What to run.

    ``sweep`` holds SNR values in dB (resolve, ber, mi), SCR values in dB
    (hitrate) or the grid size ``(n_tau, n_f)`` (beampattern). ``options``
    carries kind-specific settings such as ``scene`` or ``schemes``.
    """

    kind: str
    cfg: SystemConfig = field(default_factory=SystemConfig)
    sweep: tuple[float, ...] = ()
    trials: int = 0
    seed: int = 0
    out: Path | None = None
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}, expected one of {KINDS}")
        if not self.sweep:
            self.sweep = default_sweep(self.kind)
        self.sweep = tuple(float(x) for x in self.sweep)
        if not self.trials:
            self.trials = _DEFAULT_TRIALS[self.kind]
        if self.trials < 1:
            raise ValueError("trial count must be >= 1")
        if self.seed < 0 or self.seed >= 1 << 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.out is not None:
            self.out = Path(self.out)
        validate_config(self.cfg)

    @property
    def sweep_name(self) -> str:
        return _SWEEP_NAMES[self.kind]

    def option(self, key: str, default: Any = None) -> Any:
        return self.options.get(key, default)

    def rng(self, *key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, *key]))


@dataclass(frozen=True)
class ResultRow:
    sweep: float
    scheme: str
    metric: str
    value: float
    trials: int
    seed: int


def _fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        return repr(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


@dataclass
class ResultTable:
    sweep_name: str
    rows: list[ResultRow] = field(default_factory=list)

    HEADER = ("scheme", "metric", "value", "trials", "seed")

    def add(self, sweep: float, scheme: str, metric: str, value: float, trials: int, seed: int) -> None:
        self.rows.append(ResultRow(float(sweep), str(scheme), metric, float(value), int(trials), int(seed)))

    def value(self, sweep: float, scheme: str, metric: str) -> float:
        for r in self.rows:
            if r.sweep == float(sweep) and r.scheme == scheme and r.metric == metric:
                return r.value
        raise KeyError((sweep, scheme, metric))

    def series(self, scheme: str, metric: str) -> tuple[np.ndarray, np.ndarray]:
        sel = [r for r in self.rows if r.scheme == scheme and r.metric == metric]
        return np.array([r.sweep for r in sel]), np.array([r.value for r in sel])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow((self.sweep_name,) + self.HEADER)
        for r in self.rows:
            w.writerow((_fmt(r.sweep), r.scheme, r.metric, _fmt(r.value), r.trials, r.seed))
        return buf.getvalue()

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        return path


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    # executor.map preserves order, so output bytes never depend on workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _schemes(spec: ExperimentSpec, default: Sequence[Scheme]) -> list[Scheme]:
    names = spec.option("schemes")
    if not names:
        return list(default)
    if isinstance(names, str):
        names = [n.strip() for n in names.split(",") if n.strip()]
    return [Scheme.parse(n) for n in names]


def _out_dir(spec: ExperimentSpec) -> Path | None:
    if spec.out is None:
        return None
    spec.out.mkdir(parents=True, exist_ok=True)
    return spec.out


# -- beam patterns ----------------------------------------------------------

def run_beampattern(spec: ExperimentSpec) -> tuple[ResultTable, dict[str, Any]]:
    """Normalised surfaces of Full, Fix1 and one SpaCoR and Fix2 realisation.

    Each surface is divided by its scheme's expected origin value. The
    SpaCoR mean over ``trials`` pulses is compared against the closed form.
    """
    cfg = spec.cfg
    if len(spec.sweep) != 2 or min(spec.sweep) < 3:
        raise ValueError("beampattern sweep must be the grid size (n_tau, n_f), each >= 3")
    n_tau, n_f = (int(x) for x in spec.sweep)
    grid = BeamGrid.symmetric(cfg, n_tau, n_f)
    table = ResultTable("grid")
    surfaces = {}
    for i, scheme in enumerate((Scheme.FULL, Scheme.SPACOR, Scheme.FIX1, Scheme.FIX2)):
        alloc = make_allocation(scheme, cfg, rng=spec.rng(0, i))
        surf = beampattern_instant(alloc, cfg, grid).normalized(peak_normalizer(scheme, cfg))
        surfaces[scheme.value] = surf
        mag = surf.magnitude()
        it, jf = np.unravel_index(np.argmax(mag), mag.shape)
        cut = mag[int(np.argmin(np.abs(grid.tau_d))), :]
        pos = grid.f_theta >= 0
        table.add(0, scheme.value, "peak", mag.max(), 1, spec.seed)
        table.add(0, scheme.value, "peak_tau_d_s", grid.tau_d[it], 1, spec.seed)
        table.add(0, scheme.value, "peak_f_theta_rad", grid.f_theta[jf], 1, spec.seed)
        table.add(0, scheme.value, "first_null_rad", first_null(grid.f_theta[pos], cut[pos]), 1, spec.seed)
        table.add(0, scheme.value, "angular_resolution_rad", angular_resolution(scheme, cfg), 1, spec.seed)

    mean, var = pattern_moments(cfg, Scheme.SPACOR, grid, spec.trials, spec.rng(1))
    norm = peak_normalizer(Scheme.SPACOR, cfg)
    mean = mean.normalized(norm)
    surfaces["SpaCoR_mean"] = mean
    surfaces["SpaCoR_variance"] = var.normalized(norm ** 2)
    closed = expected_closed(cfg, grid).normalized(norm)
    err = np.abs(np.abs(mean.values) - closed.magnitude()).max()
    table.add(0, "SpaCoR_mean", "max_abs_error_vs_closed_form", err, spec.trials, spec.seed)
    cut = mean.magnitude()[int(np.argmin(np.abs(grid.tau_d))), :]
    pos = grid.f_theta >= 0
    # Monte Carlo residue at the nulls shrinks like 1/sqrt(trials)
    floor = min(0.1, max(1e-3, 5.0 / math.sqrt(spec.trials)))
    table.add(0, "SpaCoR_mean", "first_null_rad", first_null(grid.f_theta[pos], cut[pos], floor),
              spec.trials, spec.seed)

    out = _out_dir(spec)
    if out is not None:
        for name, surf in surfaces.items():
            write_surface_csv(out / f"beampattern_{name}.csv", surf)
        table.write(out / "beampattern.csv")
    return table, surfaces


# -- radar recovery ---------------------------------------------------------

def bundled_scene(name: str) -> TargetScene:
    """Scene shipped with the package: ``two_targets`` or ``six_targets``."""
    ref = resources.files("spacor") / "scenes" / f"{name}.csv"
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled scene {name!r}")
    with resources.as_file(ref) as path:
        return load_scene(path)


def scene_grid(scene: TargetScene, cfg: SystemConfig, margin: int = 5, oversample: int = 5) -> DelayAngleGrid:
    """Default grid covering the scene delays with ``margin`` cells either side."""
    taus = [t.tau for t in scene]
    dtau = 1.0 / (oversample * cfg.B_r)
    span = int(math.ceil((max(taus) - min(taus)) / dtau - 1e-9))
    grid = DelayAngleGrid.around(cfg, min(taus) - margin * dtau, span + 2 * margin + 1, oversample)
    if grid.tau_min < cfg.T_r or grid.tau_max > cfg.T_pri - cfg.T_r:
        raise ValueError("scene delays too close to the receive window edges")
    return grid


def _resolve_scenes(spec: ExperimentSpec) -> list[tuple[str, TargetScene]]:
    scene = spec.option("scene")
    if scene:
        if isinstance(scene, TargetScene):
            return [("scene", scene)]
        path = Path(scene)
        return [(path.stem, load_scene(path))]
    return [(n, bundled_scene(n)) for n in ("two_targets", "six_targets")]


def _resolve_point(args) -> list[tuple]:
    spec, i_snr, snr, scene_name, scene, schemes = args
    cfg = spec.cfg
    grid = scene_grid(scene, cfg)
    sigma = radar_noise_sigma(cfg, snr)
    L = len(scene)
    rows = []
    first = {}
    for i_s, scheme in enumerate(schemes):
        hits = np.zeros((spec.trials, len(scene.true_targets)), dtype=bool)
        for t in range(spec.trials):
            rng = spec.rng(i_snr, t, i_s)
            alloc = make_allocation(scheme, cfg, rng=rng)
            D = ChipDictionary(grid, alloc, cfg)
            y = synthesize_echo(scene, alloc, cfg, sigma, rng, D.window)
            rec = omp_recover(y, D, L)
            hits[t] = hit_test(scene, rec, grid)
            if t == 0:
                first[scheme.value] = rec
        label = f"{scene_name}:{scheme.value}"
        for j in range(hits.shape[1]):
            rows.append((snr, label, f"hit_rate_target_{j}", hits[:, j].mean()))
        rows.append((snr, label, "all_hit_rate", hits.all(axis=1).mean()))
        rows.append((snr, label, "total_hits", int(hits.sum())))
    return rows, first, grid


def run_resolve(spec: ExperimentSpec) -> ResultTable:
    """Recover known scenes with OMP (sparsity = scene size) and score hits."""
    schemes = _schemes(spec, (Scheme.SPACOR, Scheme.FIX1))
    for _, scene in _resolve_scenes(spec):
        scene.validate(spec.cfg)
    jobs = [(spec, i, snr, name, scene, schemes)
            for i, snr in enumerate(spec.sweep) for name, scene in _resolve_scenes(spec)]
    results = _pmap(_resolve_point, jobs, int(spec.option("workers", 1)))
    table = ResultTable("snr_db")
    out = _out_dir(spec)
    for job, (rows, first, grid) in zip(jobs, results):
        for snr, label, metric, value in rows:
            table.add(snr, label, metric, value, spec.trials, spec.seed)
        if out is not None:
            for scheme, rec in first.items():
                write_recovery_csv(out / f"recovery_{job[3]}_{scheme}_snr{_fmt(job[2])}.csv", rec, grid)
    if out is not None:
        table.write(out / "resolve.csv")
    return table


def _hitrate_point(args) -> list[tuple]:
    spec, i_scr, scr, schemes = args
    cfg = spec.cfg
    tau0 = float(spec.option("target_delay", 40e-6))
    snr = float(spec.option("radar_snr_db", 0.0))
    target = TargetScene([Target(tau0, cfg.steer_spatial_freq)])
    grid = scene_grid(target, cfg)
    sigma = radar_noise_sigma(cfg, snr)
    hits = np.zeros(len(schemes), dtype=np.int64)
    for t in range(spec.trials):
        # clutter shared across schemes; allocation and noise per scheme
        scene = generate_clutter(target, cfg, scr, spec.rng(i_scr, t, 0))
        for i_s, scheme in enumerate(schemes):
            rng = spec.rng(i_scr, t, 1 + i_s)
            alloc = make_allocation(scheme, cfg, rng=rng)
            D = ChipDictionary(grid, alloc, cfg)
            y = synthesize_echo(scene, alloc, cfg, sigma, rng, D.window)
            rec = omp_recover(y, D, len(scene))
            hits[i_s] += bool(hit_test(scene, rec, grid)[0])
    return [(scr, s.value, int(h)) for s, h in zip(schemes, hits)]


def run_hitrate(spec: ExperimentSpec) -> ResultTable:
    """Hit rate of a mainlobe target in the presence of two Rayleigh clutters."""
    schemes = _schemes(spec, (Scheme.FULL, Scheme.SPACOR, Scheme.FIX2, Scheme.FIX1))
    jobs = [(spec, i, scr, schemes) for i, scr in enumerate(spec.sweep)]
    table = ResultTable("scr_db")
    n = spec.trials
    for rows in _pmap(_hitrate_point, jobs, int(spec.option("workers", 1))):
        for scr, scheme, h in rows:
            p = h / n
            table.add(scr, scheme, "hit_rate", p, n, spec.seed)
            table.add(scr, scheme, "hit_rate_stderr", math.sqrt(p * (1 - p) / n), n, spec.seed)
    out = _out_dir(spec)
    if out is not None:
        table.write(out / "hitrate.csv")
    return table


# -- communications ---------------------------------------------------------

def _comm_modes(spec: ExperimentSpec) -> list[tuple[str, SystemConfig]]:
    orders = spec.option("gsm_orders", (4, 8))
    if isinstance(orders, str):
        orders = [int(x) for x in orders.split(",") if x.strip()]
    modes = []
    for J in orders:
        c = spec.cfg.replace(J=int(J))
        smx_order_for_rate(c)
        modes += [("GSM", c), ("SMX", c)]
    return modes


def _comm_point(args):
    spec, i_snr, snr, i_m, mode, cfg, metric = args
    rng = spec.rng(i_snr, i_m)
    fading = spec.option("fading", "rayleigh")
    fn = ber_experiment if metric == "ber" else mi_estimate
    value = fn(mode, cfg, [snr], spec.trials, rng, fading=fading)[0]
    cands = candidate_set(mode, cfg)
    return snr, cands.label, cands.R, value


def _run_comm(spec: ExperimentSpec, metric: str) -> ResultTable:
    modes = _comm_modes(spec)
    jobs = [(spec, i, snr, j, mode, c, metric)
            for i, snr in enumerate(spec.sweep) for j, (mode, c) in enumerate(modes)]
    table = ResultTable("snr_db")
    curves = []
    for snr, label, R, value in _pmap(_comm_point, jobs, int(spec.option("workers", 1))):
        table.add(snr, label, metric, value, spec.trials, spec.seed)
        table.add(snr, label, "rate_bits", R, spec.trials, spec.seed)
        curves.append((snr, label, R, value))
    out = _out_dir(spec)
    if out is not None:
        table.write(out / f"{spec.kind}.csv")
        col = "ber" if metric == "ber" else "mi_bits"
        with open(out / f"{spec.kind}_curves.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["snr_db", "mode", "rate_bits", col, "n_symbols", "seed"])
            for snr, label, R, value in curves:
                w.writerow([_fmt(snr), label, R, _fmt(value), spec.trials, spec.seed])
    return table


def run_ber(spec: ExperimentSpec) -> ResultTable:
    """BER of GSM and rate-matched SMX for each configured GSM PSK order."""
    return _run_comm(spec, "ber")


def run_mi(spec: ExperimentSpec) -> ResultTable:
    return _run_comm(spec, "mi_bits")


_RUNNERS = {
    "beampattern": lambda s: run_beampattern(s)[0],
    "resolve": run_resolve,
    "hitrate": run_hitrate,
    "ber": run_ber,
    "mi": run_mi,
}


def run(spec: ExperimentSpec) -> ResultTable:
    return _RUNNERS[spec.kind](spec)
