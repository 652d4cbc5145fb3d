"""System configuration for the GSM-based dual-function radar-communications link.

:class:`SystemConfig` is the single source of truth for array size, antenna
split, chirp timing and communication parameters. :func:`validate_config`
checks the design constraints and :func:`load_config` reads the key-value
configuration file format described in the README.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from pathlib import Path
from typing import Any, Mapping

__all__ = [
    "ConfigError",
    "SystemConfig",
    "validate_config",
    "load_config",
    "dump_config",
    "config_from_mapping",
    "table1_config",
]

# snapping tolerance for quantities that should be integers in sample units
_SAMPLE_EPS = 1e-6


class ConfigError(ValueError):
    """Raised when a configuration violates a design constraint.

    Attributes
    ----------
    constraint : str
        Short identifier of the violated constraint, e.g. ``"K^2 < B_r*T_r"``.
    """

    def __init__(self, constraint: str, message: str):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


def _floor_samples(x: float) -> int:
    # floor that tolerates 1499.9999999 from float products
    return int(math.floor(x + _SAMPLE_EPS))


@dataclasses.dataclass(frozen=True)
class SystemConfig:
    """Physical and signalling parameters of the DFRC transmitter.

    Defaults reproduce the experiment settings (M=4, two radar elements,
    2.5 us symbols, 30 us pulse) with a 50 MHz chirp sampled at 50 MHz.
    """

    M: int = 4                    # array elements
    M_T_r: int = 2                # radar transmit elements per slot
    M_T_c: int = 2                # comm transmit elements per slot
    K: int = 12                   # symbol slots per pulse
    T_c: float = 2.5e-6           # symbol duration [s]
    T_r: float = 30e-6            # pulse width [s]
    T_pri: float = 200e-6         # pulse repetition interval [s]
    B_r: float = 50e6             # chirp bandwidth [Hz]
    F_s: float = 50e6             # sample rate [Hz]
    f_c: float = 5.1e9            # carrier [Hz], enters only as a phase
    d_over_lambda: float = 0.5    # element spacing in wavelengths
    J: int = 4                    # PSK order
    M_R_c: int = 4                # comm receive antennas
    theta_T: float = 0.0          # steering direction [rad]
    comm_scale: float = 1.0       # comm chip amplitude relative to radar chips

    # -- derived quantities -------------------------------------------------
    @property
    def mu(self) -> float:
        """Chirp frequency modulation rate B_r / T_r [Hz/s]."""
        return self.B_r / self.T_r

    @property
    def T_s(self) -> float:
        return 1.0 / self.F_s

    @property
    def N_r(self) -> int:
        """Samples per pulse, floor(T_r * F_s)."""
        return _floor_samples(self.T_r * self.F_s)

    @property
    def N_rec(self) -> int:
        """Samples in the receive window, floor((T_pri - T_r) * F_s)."""
        return _floor_samples((self.T_pri - self.T_r) * self.F_s)

    @property
    def chip_samples(self) -> float:
        """Symbol duration expressed in samples (T_c * F_s)."""
        return self.T_c * self.F_s

    @property
    def spatial_bits(self) -> int:
        """Bits carried by the antenna selection, floor(log2 C(M, M_T_c))."""
        if self.M_T_c == 0:
            return 0
        return int(math.floor(math.log2(math.comb(self.M, self.M_T_c))))

    @property
    def bits_per_symbol(self) -> int:
        """GSM rate R = M_T_c log2 J + floor(log2 C(M, M_T_c))."""
        return self.M_T_c * int(round(math.log2(self.J))) + self.spatial_bits

    @property
    def steer_spatial_freq(self) -> float:
        """Spatial frequency of the steering direction, 2 pi d sin(theta_T)."""
        return 2.0 * math.pi * self.d_over_lambda * math.sin(self.theta_T)

    @property
    def transmit_power(self) -> float:
        """Average power of a unit-modulus pulse over one PRI, T_r / T_pri."""
        return self.T_r / self.T_pri

    @property
    def radar_only(self) -> bool:
        return self.M_T_c == 0

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def table1_config(**overrides: Any) -> SystemConfig:
    """Experiment settings of the prototype study, with optional overrides."""
    return SystemConfig(**overrides)


def validate_config(cfg: SystemConfig) -> SystemConfig:
    """Check every design constraint and return ``cfg`` unchanged.

    Raises
    ------
    ConfigError
        Naming the first constraint that fails.
    """
    if cfg.M < 2:
        raise ConfigError("M >= 2", f"need at least two elements, got M={cfg.M}")
    if cfg.M_T_r + cfg.M_T_c != cfg.M:
        raise ConfigError(
            "M_T_r + M_T_c = M",
            f"{cfg.M_T_r} + {cfg.M_T_c} != {cfg.M}",
        )
    if cfg.M_T_r < 1:
        raise ConfigError("M_T_r >= 1", f"got M_T_r={cfg.M_T_r}")
    # M_T_c = 0 is the radar-only reference (full array)
    if cfg.M_T_c < 0:
        raise ConfigError("M_T_c >= 1", f"got M_T_c={cfg.M_T_c}")
    if cfg.K < 1:
        raise ConfigError("K >= 1", f"got K={cfg.K}")
    for name in ("T_c", "T_r", "T_pri", "B_r", "F_s"):
        if not getattr(cfg, name) > 0:
            raise ConfigError(f"{name} > 0", f"got {name}={getattr(cfg, name)}")
    if abs(cfg.K * cfg.T_c - cfg.T_r) > cfg.T_s:
        raise ConfigError(
            "T_r = K*T_c",
            f"K*T_c={cfg.K * cfg.T_c:.6g} s differs from T_r={cfg.T_r:.6g} s "
            "by more than one sample period",
        )
    if not cfg.K ** 2 < cfg.B_r * cfg.T_r:
        raise ConfigError(
            "K^2 < B_r*T_r",
            f"K^2={cfg.K ** 2} >= B_r*T_r={cfg.B_r * cfg.T_r:.6g}",
        )
    if cfg.F_s < cfg.B_r:
        raise ConfigError("F_s >= B_r", f"F_s={cfg.F_s:.6g} < B_r={cfg.B_r:.6g}")
    if cfg.d_over_lambda > 0.5:
        raise ConfigError(
            "d/lambda <= 1/2", f"d_over_lambda={cfg.d_over_lambda} allows grating lobes"
        )
    if cfg.T_pri < 2 * cfg.T_r:
        raise ConfigError(
            "T_pri >= 2*T_r", f"T_pri={cfg.T_pri:.6g} s cannot hold a full echo"
        )
    if cfg.J < 2 or cfg.J & (cfg.J - 1):
        raise ConfigError("J power of two", f"got J={cfg.J}")
    if cfg.M_R_c < 1:
        raise ConfigError("M_R_c >= 1", f"got M_R_c={cfg.M_R_c}")
    return cfg


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SystemConfig)}
_CASTS = {"int": int, "float": float}


def config_from_mapping(values: Mapping[str, Any], base: SystemConfig | None = None) -> SystemConfig:
    """Build a :class:`SystemConfig` from string or numeric values.

    Unknown keys raise :class:`ConfigError`. ``M_T_c`` is derived from
    ``M - M_T_r`` when only one of the split sizes is given.
    """
    base = base or SystemConfig()
    changes: dict[str, Any] = {}
    for key, raw in values.items():
        if key not in _FIELD_TYPES:
            raise ConfigError("known keys", f"unknown configuration key {key!r}")
        cast = _CASTS[_FIELD_TYPES[key]]
        try:
            changes[key] = cast(float(raw)) if cast is int else cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError("typed values", f"{key}={raw!r}: {exc}") from None
    if "M_T_r" in changes and "M_T_c" not in changes:
        changes["M_T_c"] = changes.get("M", base.M) - changes["M_T_r"]
    elif "M_T_c" in changes and "M_T_r" not in changes:
        changes["M_T_r"] = changes.get("M", base.M) - changes["M_T_c"]
    if "K" in changes and "T_c" not in changes and "T_r" not in changes:
        changes["T_c"] = base.T_r / changes["K"]
    return dataclasses.replace(base, **changes)


def _read_sections(path: str | Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (M vs m)
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[system]\n" + text
    parser.read_string(text)
    return parser


def load_config(path: str | Path) -> tuple[SystemConfig, dict[str, str]]:
    """Read a configuration file.

    The file holds ``key = value`` lines. Keys under ``[system]`` (or before
    any section header) map one-to-one to :class:`SystemConfig` fields; keys
    under ``[experiment]`` are returned verbatim for the harness.

    Returns
    -------
    cfg : SystemConfig
        Validated configuration.
    experiment : dict
        Raw experiment options.
    """
    parser = _read_sections(path)
    system = dict(parser["system"]) if parser.has_section("system") else {}
    experiment = dict(parser["experiment"]) if parser.has_section("experiment") else {}
    cfg = validate_config(config_from_mapping(system))
    return cfg, experiment


def dump_config(cfg: SystemConfig, path: str | Path, experiment: Mapping[str, Any] | None = None) -> None:
    lines = ["[system]"]
    lines += [f"{k} = {v!r}" for k, v in cfg.to_dict().items()]
    if experiment:
        lines += ["", "[experiment]"]
        lines += [f"{k} = {v}" for k, v in experiment.items()]
    Path(path).write_text("\n".join(lines) + "\n")
