"""Hamming-distance randomness metrics, Shannon entropy, TRN extraction and lock strength."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import MappingError
from .model import DegaussTrace, DeviceLibrary, MagneticState

SECONDS_PER_YEAR = 3.156e7


class MappingMode(str, enum.Enum):
    FOUR_STATE = "four-state"
    BINARY_DIRECTION = "binary-direction"


# {SD-right, vortex-CW} -> 1, {SD-left, vortex-CCW} -> 0
DEFAULT_GROUPING = {1: 1, 2: 0, 3: 1, 4: 0}
# states 1+4 vs 2+3
ALT_GROUPING = {1: 1, 2: 0, 3: 0, 4: 1}


@dataclass(frozen=True)
class StateMapping:
    mode: MappingMode
    grouping: tuple[tuple[int, int], ...]

    def __post_init__(self):
        table = dict(self.grouping)
        if sorted(table) != [1, 2, 3, 4]:
            raise MappingError("mapping must assign every state 1-4 exactly once")
        if self.mode is MappingMode.BINARY_DIRECTION and set(table.values()) - {0, 1}:
            raise MappingError("binary mapping must map onto {0, 1}")

    @classmethod
    def four_state(cls) -> "StateMapping":
        return cls(MappingMode.FOUR_STATE, tuple((s, s) for s in range(1, 5)))

    @classmethod
    def binary_direction(cls, alternative: bool = False) -> "StateMapping":
        grouping = ALT_GROUPING if alternative else DEFAULT_GROUPING
        return cls(MappingMode.BINARY_DIRECTION, tuple(sorted(grouping.items())))

    @property
    def is_binary(self) -> bool:
        return self.mode is MappingMode.BINARY_DIRECTION

    @property
    def symbols(self) -> list[int]:
        return sorted(set(dict(self.grouping).values()))

    def lookup_table(self) -> np.ndarray:
        table = np.full(5, -1, dtype=np.int64)
        for state, symbol in self.grouping:
            table[state] = symbol
        return table

    def apply(self, codes) -> np.ndarray:
        """Map state codes to symbols; rejects OFF (paramagnetic) dots."""
        codes = _as_codes(codes)
        if np.any(codes == MagneticState.OFF):
            raise MappingError("paramagnetic OFF dots cannot be analysed; gate the circuit first")
        if codes.size and (codes.min() < 0 or codes.max() > 4):
            raise MappingError("state codes must lie in 0..4")
        return self.lookup_table()[codes]


def _as_codes(data) -> np.ndarray:
    if isinstance(data, DegaussTrace):
        return data.codes.astype(np.int64)
    if isinstance(data, np.ndarray):
        return data.astype(np.int64)
    items = list(data)
    if items and isinstance(items[0], DegaussTrace):
        return np.array([t.codes for t in items], dtype=np.int64)
    return np.asarray(items, dtype=np.int64)


def hamming_distance(a, b, mapping: StateMapping) -> int:
    """Number of positions where the mapped sequences differ."""
    ma, mb = mapping.apply(a), mapping.apply(b)
    if ma.shape != mb.shape:
        raise ValueError(f"sequence lengths differ: {ma.shape[-1]} vs {mb.shape[-1]}")
    return int(np.count_nonzero(ma != mb))


@dataclass(frozen=True)
class FhdResult:
    mean_fhd: float
    hd_counts: np.ndarray  # hd_counts[h] = number of pairs at Hamming distance h
    n_dots: int
    n_traces: int

    @property
    def pair_count(self) -> int:
        return self.n_traces * (self.n_traces - 1) // 2

    @property
    def pairwise_fhd_values(self) -> np.ndarray:
        """Bin centres of the histogram: h / N for h = 0..N."""
        return np.arange(self.n_dots + 1) / self.n_dots

    def histogram(self) -> list[tuple[float, float, int]]:
        """``(bin_lo, bin_hi, count)`` rows, bin width 1/N, centred on each attainable FHD."""
        width = 1.0 / self.n_dots
        return [
            ((h - 0.5) * width, (h + 0.5) * width, int(c)) for h, c in enumerate(self.hd_counts)
        ]

    def gaussian_fit(self) -> tuple[float, float]:
        """Mean and standard deviation of the pairwise FHD distribution."""
        x = self.pairwise_fhd_values
        w = self.hd_counts / self.hd_counts.sum()
        mu = float(np.dot(w, x))
        return mu, float(math.sqrt(np.dot(w, (x - mu) ** 2)))


def _symbol_matrix(traces, mapping: StateMapping) -> np.ndarray:
    symbols = mapping.apply(_as_codes(traces))
    if symbols.ndim != 2:
        raise ValueError("expected a sequence of traces")
    return symbols


def fhd_intra(traces, mapping: StateMapping, *, block: int = 512) -> FhdResult:
    """Mean pairwise fractional Hamming distance over all unique trace pairs."""
    symbols = _symbol_matrix(traces, mapping)
    m, n = symbols.shape
    if m < 2:
        raise ValueError("fhd_intra needs at least two traces")
    if n < 1:
        raise ValueError("traces must contain at least one dot")
    alphabet = np.array(mapping.symbols)
    onehot = (symbols[:, :, None] == alphabet[None, None, :]).reshape(m, -1).astype(np.int32)
    counts = np.zeros(n + 1, dtype=np.int64)
    # rows are processed in fixed blocks so the reduction order never changes
    for start in range(0, m, block):
        stop = min(start + block, m)
        agree = onehot[start:stop] @ onehot.T
        hd = n - agree
        rows = np.arange(start, stop)[:, None]
        upper = np.arange(m)[None, :] > rows
        counts += np.bincount(hd[upper], minlength=n + 1)
    pairs = m * (m - 1) // 2
    mean = float(np.dot(np.arange(n + 1), counts) / (pairs * n))
    return FhdResult(mean, counts, n, m)


def fhd_from_counts(symbols: np.ndarray, alphabet: Sequence[int]) -> float:
    """Mean pairwise FHD from per-position symbol counts, without forming pairs."""
    m, n = symbols.shape
    sq = sum((np.count_nonzero(symbols == s, axis=0).astype(float) ** 2) for s in alphabet)
    disagreeing_pairs = (m * m - sq).sum() / 2.0
    return float(disagreeing_pairs / (m * (m - 1) / 2.0) / n)


def fhd_bootstrap_se(traces, mapping: StateMapping, rng, n_boot: int = 200) -> float:
    """Bootstrap standard error of fhd_intra, resampling whole traces."""
    symbols = _symbol_matrix(traces, mapping)
    m = symbols.shape[0]
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    stats = [fhd_from_counts(symbols[rng.integers(0, m, m)], mapping.symbols) for _ in range(n_boot)]
    return float(np.std(stats, ddof=1))


def expected_fhd(distributions: Iterable[Sequence[float]]) -> float:
    """Expected mismatch rate between two independent draws, averaged over dots."""
    total, n = 0.0, 0
    for dist in distributions:
        p = np.asarray(dist, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"distribution {list(p)} does not sum to 1")
        total += 1.0 - float(np.dot(p, p))
        n += 1
    if n == 0:
        raise ValueError("need at least one dot")
    return total / n


def direction_distributions(library: DeviceLibrary) -> list[tuple[float, float]]:
    return [(p.p_dir_rcw, 1.0 - p.p_dir_rcw) for p in library.profiles]


def four_state_distributions(library: DeviceLibrary) -> list[tuple[float, float, float, float]]:
    return [
        (p.p_sd * p.p_dir_rcw, p.p_sd * (1 - p.p_dir_rcw), p.p_v * p.p_dir_rcw, p.p_v * (1 - p.p_dir_rcw))
        for p in library.profiles
    ]


def shannon_entropy_bit(p: float) -> float:
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability {p} outside [0, 1]")
    return sum(-q * math.log2(q) for q in (p, 1.0 - p) if q > 0.0)


@dataclass(frozen=True)
class EntropyReport:
    per_bit: tuple[float, ...]

    @property
    def total(self) -> float:
        return math.fsum(self.per_bit)

    @property
    def mean(self) -> float:
        return self.total / len(self.per_bit)

    @property
    def n_dots(self) -> int:
        return len(self.per_bit)


def total_entropy(library: DeviceLibrary, mapping: StateMapping | None = None) -> EntropyReport:
    """Entropy of the direction subclass, summed over the library's dots."""
    mapping = mapping or StateMapping.binary_direction()
    if not mapping.is_binary:
        raise MappingError("entropy is defined over the binary direction subclass only")
    if not library.profiles:
        raise ValueError("library is empty")
    return EntropyReport(tuple(shannon_entropy_bit(p.p_dir_rcw) for p in library.profiles))


def sequence_count(h_total: float) -> float:
    """Number of distinguishable sequences carried by ``h_total`` bits of entropy."""
    if h_total < 0:
        raise ValueError("entropy must be non-negative")
    return 2.0 ** h_total


def extract_bits(trace, mapping: StateMapping | None = None) -> np.ndarray:
    """One bit per dot, in reading order."""
    mapping = mapping or StateMapping.binary_direction()
    if not mapping.is_binary:
        raise MappingError("bit extraction needs a binary mapping")
    return mapping.apply(trace).astype(np.uint8)


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in np.ravel(bits))


def monobit_statistic(bits) -> float:
    """|#ones - #zeros| / sqrt(n); approximately |N(0, 1)| for unbiased bits."""
    bits = np.ravel(np.asarray(bits))
    n = bits.size
    ones = int(np.count_nonzero(bits))
    return abs(2 * ones - n) / math.sqrt(n)


def runs_statistic(bits) -> float:
    """Standardised number of runs (Wald-Wolfowitz); approximately N(0, 1) for random bits."""
    bits = np.ravel(np.asarray(bits)).astype(np.int8)
    n = bits.size
    pi = bits.mean()
    if n < 2 or pi in (0.0, 1.0):
        return math.inf
    runs = 1 + int(np.count_nonzero(bits[1:] != bits[:-1]))
    expected = 2 * n * pi * (1 - pi) + 1 - 2 * pi * (1 - pi)
    var = 2 * n * pi * (1 - pi) * (2 * n * pi * (1 - pi) - 1) / (n - 1)
    return (runs - expected) / math.sqrt(var)


@dataclass(frozen=True)
class LockStrength:
    h_total: float
    sequences: float
    guesses_per_second: float

    @property
    def seconds(self) -> float:
        return self.sequences / self.guesses_per_second

    @property
    def years(self) -> float:
        return self.seconds / SECONDS_PER_YEAR


def lock_strength_from_entropy(h_total: float, guesses_per_second: float) -> LockStrength:
    if guesses_per_second <= 0:
        raise ValueError("guess rate must be positive")
    return LockStrength(h_total, sequence_count(h_total), guesses_per_second)


def lock_strength(libraries: Sequence[DeviceLibrary], guesses_per_second: float) -> LockStrength:
    """Brute-force resistance of a password drawn from all active circuits' dots."""
    if not libraries:
        raise ValueError("need at least one active circuit")
    h = math.fsum(total_entropy(lib).total for lib in libraries)
    return lock_strength_from_entropy(h, guesses_per_second)
