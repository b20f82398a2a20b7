"""Challenge-response machinery: CRP counting, majority-voted responses, verification, BER."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ChallengeError, InactiveDotError
from .model import Device, DeviceLibrary, MagneticState, StateClass, as_generator, degauss_batch

TABLE_TRIALS = (1, 5, 11, 27)


@dataclass(frozen=True)
class Challenge:
    """Ordered selection of 1-based dot positions."""

    positions: tuple[int, ...]

    def __post_init__(self):
        positions = tuple(int(p) for p in self.positions)
        if not positions:
            raise ChallengeError("a challenge needs at least one dot")
        if len(set(positions)) != len(positions):
            raise ChallengeError(f"duplicate positions in challenge {positions}")
        if min(positions) < 1:
            raise ChallengeError("positions are 1-based")
        object.__setattr__(self, "positions", positions)

    @classmethod
    def parse(cls, text: str) -> "Challenge":
        try:
            return cls(tuple(int(tok) for tok in text.replace(" ", "").split(",") if tok))
        except ValueError as exc:
            raise ChallengeError(f"cannot parse challenge {text!r}: {exc}") from None

    def __len__(self) -> int:
        return len(self.positions)

    def __str__(self) -> str:
        return ",".join(map(str, self.positions))

    def check(self, n_dots: int) -> None:
        bad = [p for p in self.positions if p > n_dots]
        if bad:
            raise ChallengeError(f"positions {bad} exceed the {n_dots} available dots")


@dataclass(frozen=True)
class Response:
    states: tuple[StateClass, ...]
    trials_used: int

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(StateClass.parse(s) for s in self.states))
        if self.trials_used < 1 or self.trials_used % 2 == 0:
            raise ValueError("responses are majority votes over an odd number of trials")

    def __str__(self) -> str:
        return ",".join(s.value for s in self.states)


def _require_odd(T: int) -> None:
    if T < 1 or T % 2 == 0:
        raise ValueError(f"majority voting needs an odd trial count, got T={T}")


def crp_count(P: int, D: int, k: int) -> int:
    """Number of challenge-response pairs for k-dot challenges over P p-bits and D d-bits.

    Each p-bit in a challenge doubles the admissible responses.
    """
    if min(P, D, k) < 0:
        raise ValueError("P, D and k must be non-negative")
    if k > P + D:
        raise ValueError(f"challenge size k={k} exceeds the {P + D} available dots")
    return sum(math.comb(P, m) * math.comb(D, k - m) * 2**m for m in range(min(P, k) + 1))


def respond_batch(device: Device, challenge: Challenge, T: int, repetitions: int, rng,
                  *, noise: float = 0.0) -> np.ndarray:
    """Majority-voted SD flags, shape ``(repetitions, k)``.

    Positions index the device's dots in reading order. ``noise`` flips each
    observed class independently with that probability (readout error).
    """
    _require_odd(T)
    rng = as_generator(rng)
    n_dots = len(device.reading_order())
    challenge.check(n_dots)
    codes = degauss_batch(device, repetitions * T, rng)
    cols = np.array(challenge.positions) - 1
    picked = codes[:, cols]
    if np.any(picked == MagneticState.OFF):
        off = sorted({challenge.positions[j] for j in np.nonzero((picked == 0).any(axis=0))[0]})
        raise InactiveDotError(f"challenged dots {off} read as paramagnetic OFF")
    is_sd = picked <= MagneticState.SD_LEFT
    if noise > 0:
        is_sd ^= rng.random(is_sd.shape) < noise
    sd_votes = is_sd.reshape(repetitions, T, len(challenge)).sum(axis=1)
    return 2 * sd_votes > T


def respond(device: Device, challenge: Challenge, T: int, rng, *, noise: float = 0.0) -> Response:
    """Degauss ``T`` times and report the majority class of each challenged dot."""
    flags = respond_batch(device, challenge, T, 1, rng, noise=noise)[0]
    return Response(tuple(StateClass.SD if f else StateClass.VORTEX for f in flags), T)


@dataclass(frozen=True)
class VerifyResult:
    mismatches: int
    passed: bool
    threshold: int


def verify(response: Response, library: DeviceLibrary, challenge: Challenge,
           threshold: int | None = None) -> VerifyResult:
    """Compare a response with the enrolled majority states.

    Passes when at most ``threshold`` positions disagree (default ``k // 2``).
    """
    if len(response.states) != len(challenge):
        raise ChallengeError("response and challenge lengths differ")
    challenge.check(len(library))
    if threshold is None:
        threshold = len(challenge) // 2
    mismatches = sum(
        state is not library.profile(pos).majority_state
        for pos, state in zip(challenge.positions, response.states)
    )
    return VerifyResult(mismatches, mismatches <= threshold, threshold)


@lru_cache(maxsize=4096)
def _majority_error_exact(p_e: Fraction, T: int) -> Fraction:
    q = 1 - p_e
    return sum(
        (math.comb(T, k) * p_e**k * q ** (T - k) for k in range(T // 2 + 1, T + 1)),
        Fraction(0),
    )


def majority_error_probability(p_e: float, T: int) -> float:
    """Probability that more than half of ``T`` independent readings are wrong."""
    _require_odd(T)
    if not 0.0 <= p_e <= 1.0:
        raise ValueError(f"error probability {p_e} outside [0, 1]")
    return float(_majority_error_exact(Fraction(p_e), T))


def ber_closed_form(library: DeviceLibrary, challenge: Challenge, T: int) -> float:
    """Expected fraction of challenged bits whose majority vote disagrees with enrollment."""
    challenge.check(len(library))
    errors = [majority_error_probability(library.profile(p).minority_probability, T)
              for p in challenge.positions]
    return math.fsum(errors) / len(errors)


def ber_curve(library: DeviceLibrary, challenge: Challenge, trials: Iterable[int]) -> list[tuple[int, float]]:
    return [(T, ber_closed_form(library, challenge, T)) for T in trials]


@dataclass(frozen=True)
class BerEstimate:
    ber: float
    stderr: float
    per_dot: tuple[float, ...]
    repetitions: int


def ber_empirical(device: Device, library: DeviceLibrary, challenge: Challenge, T: int,
                  repetitions: int, rng, *, noise: float = 0.0) -> BerEstimate:
    """Monte-Carlo BER: ``repetitions`` majority-voted responses scored against ``library``.

    The standard error combines the per-dot binomial variances.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    challenge.check(len(library))
    flags = respond_batch(device, challenge, T, repetitions, rng, noise=noise)
    enrolled = np.array([library.profile(p).majority_state is StateClass.SD for p in challenge.positions])
    per_dot = (flags != enrolled).mean(axis=0)
    k = len(challenge)
    stderr = math.sqrt(float(np.sum(per_dot * (1 - per_dot))) / repetitions) / k
    return BerEstimate(float(per_dot.mean()), stderr, tuple(float(x) for x in per_dot), repetitions)


@dataclass(frozen=True)
class BerRow:
    challenge: Challenge
    n_pbits: int
    ber: dict[int, float]  # T -> BER fraction


def ber_row(library: DeviceLibrary, challenge: Challenge, trials: Sequence[int] = TABLE_TRIALS) -> BerRow:
    n_pbits = sum(library.profile(p).is_pbit for p in challenge.positions)
    return BerRow(challenge, n_pbits, {T: ber_closed_form(library, challenge, T) for T in trials})
