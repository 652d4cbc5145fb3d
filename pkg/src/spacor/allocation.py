"""Antenna allocation patterns for the Full, Fix1, Fix2 and SpaCoR schemes.

An allocation assigns, for every symbol slot of a pulse, ``M_T_r`` elements
to radar; the remaining elements carry communication symbols. SpaCoR picks
the communication subset per slot from the spatial bits through a
:class:`CombinationMap`.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .config import SystemConfig

__all__ = [
    "Scheme",
    "CombinationMap",
    "combination_index_map",
    "AllocationPattern",
    "make_allocation",
    "sample_radar_masks",
    "bits_to_int",
    "int_to_bits",
]


class Scheme(str, enum.Enum):
    FULL = "Full"
    FIX1 = "Fix1"
    FIX2 = "Fix2"
    SPACOR = "SpaCoR"

    @classmethod
    def parse(cls, name: "str | Scheme") -> "Scheme":
        if isinstance(name, Scheme):
            return name
        for s in cls:
            if s.value.lower() == str(name).lower():
                return s
        raise ValueError(f"unknown scheme {name!r}; expected one of {[s.value for s in cls]}")


def bits_to_int(bits: Sequence[int]) -> int:
    """MSB-first bit word to integer."""
    value = 0
    for b in bits:
        value = (value << 1) | (int(b) & 1)
    return value


def int_to_bits(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


class CombinationMap:
    """Bijection between spatial-bit words and communication element subsets.

    The default table enumerates ``M_T_c``-combinations of ``range(M)`` in
    lexicographic order and keeps the first ``2**floor(log2 C(M, M_T_c))``.
    A custom ``table`` (one combination per word, word ``i`` at position
    ``i``) replaces the default, e.g. to reproduce a particular mapping rule.
    """

    def __init__(self, M: int, M_T_c: int, table: Iterable[Sequence[int]] | None = None):
        if not 1 <= M_T_c <= M:
            raise ValueError(f"need 1 <= M_T_c <= M, got M_T_c={M_T_c}, M={M}")
        self.M = M
        self.M_T_c = M_T_c
        self.n_bits = int(math.floor(math.log2(math.comb(M, M_T_c))))
        size = 1 << self.n_bits
        if table is None:
            combos = list(itertools.islice(itertools.combinations(range(M), M_T_c), size))
        else:
            combos = [tuple(sorted(int(i) for i in c)) for c in table]
            if len(combos) != size:
                raise ValueError(f"table must list exactly {size} combinations, got {len(combos)}")
            for c in combos:
                if len(c) != M_T_c or len(set(c)) != M_T_c or not all(0 <= i < M for i in c):
                    raise ValueError(f"invalid combination {c} for M={M}, M_T_c={M_T_c}")
            if len(set(combos)) != size:
                raise ValueError("table combinations must be distinct")
        self._combos = combos
        self._index = {c: i for i, c in enumerate(combos)}

    def __len__(self) -> int:
        return len(self._combos)

    def __repr__(self) -> str:
        return f"CombinationMap(M={self.M}, M_T_c={self.M_T_c}, n_bits={self.n_bits})"

    @property
    def combinations(self) -> list[tuple[int, ...]]:
        return list(self._combos)

    def combination(self, index: int) -> tuple[int, ...]:
        return self._combos[index]

    def index(self, combination: Sequence[int]) -> int:
        return self._index[tuple(sorted(int(i) for i in combination))]

    def from_bits(self, bits: Sequence[int]) -> tuple[int, ...]:
        if len(bits) != self.n_bits:
            raise ValueError(f"expected {self.n_bits} spatial bits, got {len(bits)}")
        return self._combos[bits_to_int(bits)]

    def to_bits(self, combination: Sequence[int]) -> list[int]:
        return int_to_bits(self.index(combination), self.n_bits)


def combination_index_map(M: int, M_T_c: int, table=None) -> CombinationMap:
    return CombinationMap(M, M_T_c, table)


@dataclass(frozen=True)
class AllocationPattern:
    """Radar element indices per slot.

    ``radar`` has shape ``(K, n_radar)`` with strictly increasing rows; the
    communication set of a slot is the complement in ``range(M)``.
    """

    radar: np.ndarray
    M: int

    def __post_init__(self):
        radar = np.asarray(self.radar, dtype=np.int64)
        if radar.ndim != 2 or radar.shape[1] < 1:
            raise ValueError("radar indices must be a (K, n_radar) array")
        if np.any(radar < 0) or np.any(radar >= self.M):
            raise ValueError("radar index out of range")
        if radar.shape[1] > 1 and np.any(np.diff(radar, axis=1) <= 0):
            raise ValueError("radar indices must be strictly increasing within a slot")
        radar.setflags(write=False)
        object.__setattr__(self, "radar", radar)

    @property
    def K(self) -> int:
        return self.radar.shape[0]

    @property
    def n_radar(self) -> int:
        return self.radar.shape[1]

    @property
    def mask(self) -> np.ndarray:
        """Boolean ``(K, M)`` array, True where the element transmits radar."""
        m = np.zeros((self.K, self.M), dtype=bool)
        np.put_along_axis(m, self.radar, True, axis=1)
        return m

    def comm(self, k: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(~self.mask[k]))

    def slot(self, k: int) -> tuple[int, ...]:
        return tuple(int(i) for i in self.radar[k])

    def is_constant(self) -> bool:
        return bool(np.all(self.radar == self.radar[0]))


def _fixed(indices: Sequence[int], K: int, M: int) -> AllocationPattern:
    return AllocationPattern(np.tile(np.asarray(indices, dtype=np.int64), (K, 1)), M)


def _random_subset(rng: np.random.Generator, M: int, size: int) -> np.ndarray:
    return np.sort(rng.choice(M, size=size, replace=False))


def make_allocation(
    scheme: Scheme | str,
    cfg: SystemConfig,
    spatial_bits: Sequence[int] | np.ndarray | None = None,
    rng: np.random.Generator | int | None = None,
    cmap: CombinationMap | None = None,
) -> AllocationPattern:
    """Allocation pattern of one pulse.

    Parameters
    ----------
    scheme : Scheme or str
        Full uses every element in every slot; Fix1 the contiguous low-index
        sub-array; Fix2 one uniformly random subset held for the pulse;
        SpaCoR a per-slot subset.
    spatial_bits : sequence of int, optional
        SpaCoR only: ``K * cmap.n_bits`` bits, consumed slot by slot. Each
        word selects the communication subset through ``cmap``.
    rng : Generator or int, optional
        Randomness for Fix2, and for SpaCoR when no bits are given. In that
        case each slot's communication subset is uniform over *all*
        ``C(M, M_T_c)`` combinations, the statistical model under which the
        beam-pattern moments hold.
    """
    scheme = Scheme.parse(scheme)
    M, K = cfg.M, cfg.K
    if scheme is Scheme.FULL:
        return _fixed(range(M), K, M)
    if scheme is Scheme.FIX1:
        return _fixed(range(cfg.M_T_r), K, M)
    if cfg.M_T_c < 1:
        raise ValueError(f"{scheme.value} needs at least one communication element")
    if scheme is Scheme.FIX2:
        rng = np.random.default_rng(rng)
        return _fixed(_random_subset(rng, M, cfg.M_T_r), K, M)

    # SpaCoR
    if spatial_bits is not None:
        cmap = cmap or CombinationMap(M, cfg.M_T_c)
        bits = np.asarray(spatial_bits, dtype=np.int64).ravel()
        need = K * cmap.n_bits
        if bits.size < need:
            raise ValueError(f"SpaCoR needs {need} spatial bits for K={K} slots, got {bits.size}")
        mask = np.ones((K, M), dtype=bool)
        for k in range(K):
            comm = cmap.from_bits(bits[k * cmap.n_bits:(k + 1) * cmap.n_bits])
            mask[k, list(comm)] = False
        radar = np.nonzero(mask)[1].reshape(K, cfg.M_T_r)
        return AllocationPattern(radar, M)
    if rng is None:
        raise ValueError("SpaCoR allocation needs spatial bits or an rng")
    rng = np.random.default_rng(rng)
    radar = np.stack([_random_subset(rng, M, cfg.M_T_r) for _ in range(K)])
    return AllocationPattern(radar, M)


def sample_radar_masks(
    scheme: Scheme | str, cfg: SystemConfig, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``n`` allocation masks at once, shape ``(n, K, M)``.

    Vectorised equivalent of calling :func:`make_allocation` ``n`` times with
    the uniform random model.
    """
    scheme = Scheme.parse(scheme)
    M, K = cfg.M, cfg.K
    if scheme in (Scheme.FULL, Scheme.FIX1):
        mask = make_allocation(scheme, cfg).mask
        return np.broadcast_to(mask, (n, K, M)).copy()
    slots = n if scheme is Scheme.FIX2 else n * K
    # a random permutation's first M_T_r entries is a uniform subset
    keys = rng.random((slots, M))
    chosen = np.argsort(keys, axis=1)[:, : cfg.M_T_r]
    mask = np.zeros((slots, M), dtype=bool)
    np.put_along_axis(mask, chosen, True, axis=1)
    if scheme is Scheme.FIX2:
        return np.repeat(mask[:, None, :], K, axis=1)
    return mask.reshape(n, K, M)
