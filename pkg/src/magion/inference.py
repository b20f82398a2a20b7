"""Probabilistic device fingerprinting.

Two enrolled libraries are told apart by observing the SD/vortex class of a few
p-bits after each degauss. Each observed dot is labelled with the library that
makes the observation more likely; the fraction of dots labelled "1" in a
trial is that trial's authentication probability, and the running mean over
trials drives the decision.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ChallengeError
from .model import Device, DeviceLibrary, StateClass, as_generator
from .puf import TABLE_TRIALS, Challenge, ber_row, respond_batch

ABSTAIN = 0


class Decision(str, enum.Enum):
    SAMPLE1 = "Sample1"
    SAMPLE2 = "Sample2"
    UNDECIDED = "Undecided"


class AlignmentMode(str, enum.Enum):
    LIKELIHOOD = "likelihood"
    MAJORITY = "majority"


def _check_positions(challenge: Challenge, *libraries: DeviceLibrary) -> None:
    for lib in libraries:
        try:
            challenge.check(len(lib))
        except ChallengeError as exc:
            raise ChallengeError(f"library {lib.device_id}/{lib.circuit_id}: {exc}") from None


def mismatch_probability(p_v1: float, p_v2: float) -> float:
    return p_v1 + p_v2 - 2.0 * p_v1 * p_v2


def mismatch_probability_expanded(p_v1: float, p_v2: float) -> float:
    return p_v1 * (1.0 - p_v2) + (1.0 - p_v1) * p_v2


def pfhd_inter(lib1: DeviceLibrary, lib2: DeviceLibrary, challenge: Challenge) -> float:
    """Expected fraction of challenged dots whose SD/vortex class differs between two devices."""
    _check_positions(challenge, lib1, lib2)
    total = math.fsum(
        mismatch_probability(lib1.profile(p).p_v, lib2.profile(p).p_v) for p in challenge.positions
    )
    return total / len(challenge)


@dataclass(frozen=True)
class CrpCandidate:
    challenge: Challenge
    pfhd: float
    n_pbits: tuple[int, int]
    ber1: dict[int, float]
    ber2: dict[int, float]


def select_crps(lib1: DeviceLibrary, lib2: DeviceLibrary, k: int = 5, target: float = 0.5,
                tolerance: float = 0.01, trials: Sequence[int] = TABLE_TRIALS) -> list[CrpCandidate]:
    """All k-dot challenges with |pFHD - target| <= tolerance, closest first."""
    n = min(len(lib1), len(lib2))
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in 1..{n}")
    pv1 = np.array([p.p_v for p in lib1.profiles[:n]])
    pv2 = np.array([p.p_v for p in lib2.profiles[:n]])
    mism = pv1 + pv2 - 2 * pv1 * pv2
    hits = []
    for combo in itertools.combinations(range(n), k):
        value = float(mism[list(combo)].sum() / k)
        # a small slack keeps values printed at the boundary from being lost to rounding
        if abs(value - target) <= tolerance + 1e-12:
            hits.append((abs(value - target), combo, value))
    hits.sort(key=lambda h: (h[0], h[1]))
    out = []
    for _, combo, value in hits:
        ch = Challenge(tuple(i + 1 for i in combo))
        r1, r2 = ber_row(lib1, ch, trials), ber_row(lib2, ch, trials)
        out.append(CrpCandidate(ch, value, (r1.n_pbits, r2.n_pbits), r1.ber, r2.ber))
    return out


def _label(observed: StateClass, lib1_dot, lib2_dot, mode: AlignmentMode) -> int:
    if mode is AlignmentMode.MAJORITY:
        match1 = observed is lib1_dot.majority_state
        match2 = observed is lib2_dot.majority_state
        if match1 == match2:
            return ABSTAIN
        return 1 if match1 else 2
    p1, p2 = lib1_dot.p_class(observed), lib2_dot.p_class(observed)
    if p1 == p2:
        return ABSTAIN
    return 1 if p1 > p2 else 2


def _trial_probability(labels: Sequence[int]) -> float:
    score = sum(1.0 if lab == 1 else 0.5 if lab == ABSTAIN else 0.0 for lab in labels)
    return score / len(labels)


def classify_trial(observation: Sequence, lib1: DeviceLibrary, lib2: DeviceLibrary, challenge: Challenge,
                   mode: AlignmentMode = AlignmentMode.LIKELIHOOD) -> tuple[tuple[int, ...], float]:
    """Label each observed dot 1 or 2 (0 = abstain) and return the fraction labelled 1.

    Abstentions count one half toward the fraction.
    """
    if len(observation) != len(challenge):
        raise ChallengeError("observation length differs from challenge length")
    _check_positions(challenge, lib1, lib2)
    labels = tuple(
        _label(StateClass.parse(obs), lib1.profile(pos), lib2.profile(pos), AlignmentMode(mode))
        for obs, pos in zip(observation, challenge.positions)
    )
    return labels, _trial_probability(labels)


@dataclass(frozen=True)
class InferenceRun:
    trial_labels: tuple[tuple[int, ...], ...]
    per_trial_prob: tuple[float, ...]
    cumulative_prob: tuple[float, ...]

    @property
    def decision(self) -> Decision:
        return decide(self.cumulative_prob[-1])

    def rows(self) -> list[tuple[int, float, float]]:
        return [(i, p, c) for i, (p, c) in enumerate(zip(self.per_trial_prob, self.cumulative_prob), start=1)]


def decide(cumulative: float) -> Decision:
    if cumulative > 0.5:
        return Decision.SAMPLE1
    if cumulative < 0.5:
        return Decision.SAMPLE2
    return Decision.UNDECIDED


def infer(observations: Sequence[Sequence], lib1: DeviceLibrary, lib2: DeviceLibrary, challenge: Challenge,
          mode: AlignmentMode = AlignmentMode.LIKELIHOOD) -> InferenceRun:
    """Classify each trial in turn and accumulate the running mean probability."""
    if not observations:
        raise ValueError("need at least one observation")
    labels, per_trial, cumulative = [], [], []
    running = 0.0
    for t, obs in enumerate(observations, start=1):
        lab, prob = classify_trial(obs, lib1, lib2, challenge, mode)
        labels.append(lab)
        per_trial.append(prob)
        running += prob
        cumulative.append(running / t)
    return InferenceRun(tuple(labels), tuple(per_trial), tuple(cumulative))


def observations_from_labels(label_rows: Sequence[Sequence[int]], lib1: DeviceLibrary, lib2: DeviceLibrary,
                             challenge: Challenge) -> list[tuple[StateClass, ...]]:
    """Recover the observed classes behind recorded likelihood labels.

    Label 1 at a dot means the observed class was the one more likely under
    ``lib1``; label 2 the one more likely under ``lib2``.
    """
    _check_positions(challenge, lib1, lib2)
    out = []
    for row in label_rows:
        if len(row) != len(challenge):
            raise ChallengeError("label row length differs from challenge length")
        obs = []
        for lab, pos in zip(row, challenge.positions):
            sd_favours_1 = lib1.profile(pos).p_sd > lib2.profile(pos).p_sd
            if lib1.profile(pos).p_sd == lib2.profile(pos).p_sd:
                raise ValueError(f"dot {pos} has equal enrolled probabilities; labels carry no information")
            want_sd = (int(lab) == 1) == sd_favours_1
            obs.append(StateClass.SD if want_sd else StateClass.VORTEX)
        out.append(tuple(obs))
    return out


def poisson_binomial_pmf(probabilities: Sequence[float]) -> np.ndarray:
    """Distribution of the number of successes among independent Bernoulli trials."""
    pmf = np.array([1.0])
    for p in probabilities:
        pmf = np.convolve(pmf, [1.0 - p, p])
    return pmf


@dataclass(frozen=True)
class AcceptProbability:
    per_dot: tuple[float, ...]
    majority: float

    @property
    def mean_per_trial(self) -> float:
        return math.fsum(self.per_dot) / len(self.per_dot)


def per_trial_accept_prob(true_lib: DeviceLibrary, lib1: DeviceLibrary, lib2: DeviceLibrary,
                          challenge: Challenge) -> AcceptProbability:
    """Exact per-dot probability of label 1 and probability that a strict majority of dots gets label 1."""
    _check_positions(challenge, true_lib, lib1, lib2)
    per_dot = []
    for pos in challenge.positions:
        truth = true_lib.profile(pos)
        per_dot.append(math.fsum(
            truth.p_class(cls)
            for cls in StateClass
            if _label(cls, lib1.profile(pos), lib2.profile(pos), AlignmentMode.LIKELIHOOD) == 1
        ))
    k = len(per_dot)
    pmf = poisson_binomial_pmf(per_dot)
    need = k // 2 + 1
    return AcceptProbability(tuple(per_dot), float(pmf[need:].sum()))


@dataclass(frozen=True)
class InferenceSimulation:
    per_trial: np.ndarray  # (runs, trials)
    cumulative_final: np.ndarray  # (runs,)

    @property
    def accuracy(self) -> float:
        """Fraction of runs whose final decision is Sample 1."""
        return float(np.mean(self.cumulative_final > 0.5))

    @property
    def mean_per_trial(self) -> float:
        return float(self.per_trial.mean())

    @property
    def per_trial_stderr(self) -> float:
        return float(self.per_trial.std(ddof=1) / math.sqrt(self.per_trial.size))

    @property
    def single_trial_accuracy(self) -> float:
        return float(np.mean(self.per_trial[:, 0] > 0.5))


def simulate_inference(device: Device, lib1: DeviceLibrary, lib2: DeviceLibrary, challenge: Challenge,
                       trials: int, runs: int, rng) -> InferenceSimulation:
    """Monte-Carlo inference runs against a simulated device (one degauss per trial)."""
    _check_positions(challenge, lib1, lib2)
    rng = as_generator(rng)
    sd = respond_batch(device, challenge, 1, runs * trials, rng)  # (runs*trials, k)
    # lookup: label-1 score for observing SD / vortex at each challenged dot
    score = np.empty((2, len(challenge)))
    for j, pos in enumerate(challenge.positions):
        for row, cls in ((0, StateClass.VORTEX), (1, StateClass.SD)):
            lab = _label(cls, lib1.profile(pos), lib2.profile(pos), AlignmentMode.LIKELIHOOD)
            score[row, j] = 1.0 if lab == 1 else 0.5 if lab == ABSTAIN else 0.0
    per_dot = np.where(sd, score[1], score[0])
    per_trial = per_dot.mean(axis=1).reshape(runs, trials)
    return InferenceSimulation(per_trial, per_trial.mean(axis=1))
