"""Dot arrays, circuits, gating, degauss sampling and enrollment.

A device is a set of circuits laid out on a grid of dots. Gating a circuit with
a negative voltage activates its dots; each active dot then carries a
:class:`DotProfile` giving the probability of settling into a single-domain
(SD) or vortex state after a degauss, plus the probability of the
"right / clockwise" direction subclass.

Sampling treats the SD/vortex class and the direction subclass of a dot as
independent draws, and dots as independent of each other.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    EmptyDeviceError,
    InvalidProfileError,
    MajorityTieError,
    UnknownCircuitError,
    UnsupportedProtocolError,
)

Coord = tuple[int, int]


class MagneticState(enum.IntEnum):
    """Observable state of one dot after a degauss. Values are the CSV state codes."""

    OFF = 0
    SD_RIGHT = 1
    SD_LEFT = 2
    VORTEX_CW = 3
    VORTEX_CCW = 4

    @property
    def is_sd(self) -> bool:
        return self in (MagneticState.SD_RIGHT, MagneticState.SD_LEFT)

    @property
    def is_vortex(self) -> bool:
        return self in (MagneticState.VORTEX_CW, MagneticState.VORTEX_CCW)

    @property
    def state_class(self) -> "StateClass":
        if self is MagneticState.OFF:
            raise ValueError("paramagnetic OFF dots have no SD/vortex class")
        return StateClass.SD if self.is_sd else StateClass.VORTEX

    @classmethod
    def compose(cls, is_sd: bool, is_rcw: bool) -> "MagneticState":
        if is_sd:
            return cls.SD_RIGHT if is_rcw else cls.SD_LEFT
        return cls.VORTEX_CW if is_rcw else cls.VORTEX_CCW


class StateClass(str, enum.Enum):
    SD = "SD"
    VORTEX = "V"

    @classmethod
    def parse(cls, value: "str | StateClass") -> "StateClass":
        if isinstance(value, StateClass):
            return value
        text = str(value).strip().upper()
        if text in ("SD", "S", "1"):
            return cls.SD
        if text in ("V", "VORTEX", "0"):
            return cls.VORTEX
        raise ValueError(f"unknown state class {value!r}")


class BitKind(str, enum.Enum):
    DBIT = "d"
    PBIT = "p"


def _check_probability(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and 0.0 <= value <= 1.0):
        raise InvalidProfileError(f"{name}={value!r} is not a probability in [0, 1]")


@dataclass(frozen=True)
class DotProfile:
    """Per-dot state probabilities.

    ``p_dir_rcw`` is the probability of the {SD-right, vortex-CW} subclass;
    the complementary {SD-left, vortex-CCW} subclass has ``1 - p_dir_rcw``.
    """

    position: int
    p_sd: float
    p_v: float
    p_dir_rcw: float = 0.5

    SUM_TOLERANCE = 1e-6

    def __post_init__(self):
        if int(self.position) != self.position or self.position < 1:
            raise InvalidProfileError(f"position must be a 1-based index, got {self.position!r}")
        _check_probability("p_sd", self.p_sd)
        _check_probability("p_v", self.p_v)
        _check_probability("p_dir_rcw", self.p_dir_rcw)
        if abs(self.p_sd + self.p_v - 1.0) > self.SUM_TOLERANCE:
            raise InvalidProfileError(
                f"dot {self.position}: p_sd + p_v = {self.p_sd + self.p_v!r}, expected 1"
            )

    @classmethod
    def from_p_sd(cls, position: int, p_sd: float, p_dir_rcw: float = 0.5) -> "DotProfile":
        _check_probability("p_sd", p_sd)
        return cls(position, p_sd, 1.0 - p_sd, p_dir_rcw)

    @property
    def bit_kind(self) -> BitKind:
        return BitKind.DBIT if self.p_sd in (0.0, 1.0) else BitKind.PBIT

    @property
    def is_pbit(self) -> bool:
        return self.bit_kind is BitKind.PBIT

    @property
    def majority_state(self) -> StateClass:
        if self.p_sd == 0.5:
            raise MajorityTieError(f"dot {self.position}: p_sd = 0.5 has no majority state")
        return StateClass.SD if self.p_sd > 0.5 else StateClass.VORTEX

    @property
    def minority_probability(self) -> float:
        """Probability of observing the non-majority class in a single degauss."""
        return min(self.p_sd, self.p_v)

    def p_class(self, cls: StateClass) -> float:
        return self.p_sd if StateClass.parse(cls) is StateClass.SD else self.p_v


@dataclass(frozen=True)
class GatingEvent:
    voltage: float
    duration: float  # minutes

    def __post_init__(self):
        if not math.isfinite(self.voltage) or not math.isfinite(self.duration):
            raise ValueError("gating voltage and duration must be finite")
        if self.duration < 0:
            raise ValueError(f"gating duration must be non-negative, got {self.duration}")

    @property
    def activates(self) -> bool:
        return self.voltage < 0 and self.duration > 0


@dataclass(frozen=True)
class CircuitLayout:
    circuit_id: str
    dot_positions: tuple[Coord, ...]
    gating_history: tuple[GatingEvent, ...] = ()

    def __post_init__(self):
        coords = tuple((int(r), int(c)) for r, c in self.dot_positions)
        if len(set(coords)) != len(coords):
            raise ValueError(f"circuit {self.circuit_id}: duplicate dot positions")
        object.__setattr__(self, "dot_positions", tuple(sorted(coords)))
        object.__setattr__(self, "gating_history", tuple(self.gating_history))

    @property
    def activation(self) -> bool:
        return any(event.activates for event in self.gating_history)

    @property
    def total_gating_minutes(self) -> float:
        return sum(event.duration for event in self.gating_history if event.activates)

    def __len__(self) -> int:
        return len(self.dot_positions)


def grid_positions(rows: int, cols: int, origin: Coord = (0, 0)) -> tuple[Coord, ...]:
    """Coordinates of a ``rows x cols`` block in reading order."""
    r0, c0 = origin
    return tuple((r0 + r, c0 + c) for r in range(rows) for c in range(cols))


@dataclass(frozen=True)
class Device:
    """Circuits plus the current per-dot profiles, keyed by grid coordinate.

    Treat instances as immutable: operations return updated copies.
    """

    device_id: str
    circuits: tuple[CircuitLayout, ...]
    profiles: Mapping[Coord, DotProfile] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "circuits", tuple(self.circuits))
        seen: set[Coord] = set()
        ids: set[str] = set()
        for circuit in self.circuits:
            if circuit.circuit_id in ids:
                raise ValueError(f"duplicate circuit id {circuit.circuit_id!r}")
            ids.add(circuit.circuit_id)
            overlap = seen.intersection(circuit.dot_positions)
            if overlap:
                raise ValueError(f"dot positions shared between circuits: {sorted(overlap)}")
            seen.update(circuit.dot_positions)
        object.__setattr__(self, "profiles", dict(self.profiles))

    @classmethod
    def from_library(cls, library: "DeviceLibrary", positions: Sequence[Coord] | None = None) -> "Device":
        """Single-circuit device whose active dots follow ``library``'s probabilities."""
        n = len(library.profiles)
        coords = tuple(positions) if positions is not None else grid_positions(1, n)
        if len(coords) != n:
            raise ValueError("need one grid position per library profile")
        gating = library.gating if library.gating is not None else GatingEvent(-10.0, 60.0)
        circuit = CircuitLayout(library.circuit_id, coords, (gating,))
        ordered = circuit.dot_positions
        return cls(library.device_id, (circuit,), dict(zip(ordered, library.profiles)))

    def circuit(self, circuit_id: str) -> CircuitLayout:
        for circuit in self.circuits:
            if circuit.circuit_id == circuit_id:
                return circuit
        raise UnknownCircuitError(f"device {self.device_id!r} has no circuit {circuit_id!r}")

    def reading_order(self) -> list[Coord]:
        return sorted(c for circuit in self.circuits for c in circuit.dot_positions)

    def active_coords(self) -> list[Coord]:
        active = {c for circuit in self.circuits if circuit.activation for c in circuit.dot_positions}
        return [c for c in self.reading_order() if c in active]

    @property
    def activation(self) -> dict[str, bool]:
        return {circuit.circuit_id: circuit.activation for circuit in self.circuits}

    def _columns(self, active_only: bool):
        """Reading-order coordinates and their (p_sd, p_dir, active) vectors."""
        active = set(self.active_coords())
        coords = [c for c in self.reading_order() if (c in active or not active_only)]
        p_sd = np.zeros(len(coords))
        p_dir = np.zeros(len(coords))
        mask = np.zeros(len(coords), dtype=bool)
        for i, coord in enumerate(coords):
            if coord not in active:
                continue
            profile = self.profiles.get(coord)
            if profile is None:
                raise InvalidProfileError(f"active dot {coord} has no profile")
            p_sd[i], p_dir[i], mask[i] = profile.p_sd, profile.p_dir_rcw, True
        return coords, p_sd, p_dir, mask


@dataclass(frozen=True)
class DegaussTrace:
    trial_index: int
    states: tuple[MagneticState, ...]

    @property
    def codes(self) -> np.ndarray:
        return np.fromiter((int(s) for s in self.states), dtype=np.int8, count=len(self.states))

    def __len__(self) -> int:
        return len(self.states)

    @classmethod
    def from_codes(cls, trial_index: int, codes: Sequence[int]) -> "DegaussTrace":
        return cls(trial_index, tuple(MagneticState(int(c)) for c in codes))


def as_generator(rng: "np.random.Generator | int | None") -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def spawn_generators(seed: int, n: int) -> list[np.random.Generator]:
    """Independent per-worker streams derived from one root seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def sample_codes(p_sd: np.ndarray, p_dir: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` degauss outcomes for dots with the given probabilities.

    Returns state codes (1-4) with shape ``(n, len(p_sd))``. Each outcome uses
    two uniforms per dot (class, then direction), laid out so that one call
    with ``n`` rows consumes the stream exactly like ``n`` calls with one row.
    """
    p_sd = np.asarray(p_sd, dtype=float)
    p_dir = np.asarray(p_dir, dtype=float)
    u = rng.random((n, 2, p_sd.shape[0]))
    is_sd = u[:, 0, :] < p_sd
    is_rcw = u[:, 1, :] < p_dir
    # SD: 1 (right) / 2 (left); vortex: 3 (CW) / 4 (CCW)
    return (1 + 2 * (~is_sd) + (~is_rcw)).astype(np.int8)


def degauss_batch(device: Device, n: int, rng, *, active_only: bool = False) -> np.ndarray:
    """``n`` degauss outcomes as an ``(n, N)`` array of state codes, OFF = 0."""
    coords, p_sd, p_dir, mask = device._columns(active_only)
    if not coords:
        raise EmptyDeviceError(f"device {device.device_id!r} has no {'active ' if active_only else ''}dots")
    codes = sample_codes(p_sd, p_dir, n, as_generator(rng))
    codes[:, ~mask] = MagneticState.OFF
    return codes


def degauss_sample(device: Device, rng, *, trial_index: int = 0, active_only: bool = False) -> DegaussTrace:
    """One degauss of the whole device, in reading order.

    Never-gated dots read as :attr:`MagneticState.OFF`. With ``active_only`` the
    trace covers only active dots, as the randomness analytics expect.
    """
    codes = degauss_batch(device, 1, rng, active_only=active_only)[0]
    return DegaussTrace.from_codes(trial_index, codes)


@dataclass(frozen=True)
class GatingCalibration:
    """Per-circuit anchor profiles indexed by cumulative gating time (minutes).

    Each anchor lists ``(p_sd, p_dir_rcw)`` per dot in circuit reading order.
    Between anchors the probabilities are interpolated linearly; outside the
    anchor range they are held at the nearest anchor.
    """

    anchors: Mapping[str, Mapping[float, Sequence[tuple[float, float]]]]

    def profiles_at(self, circuit_id: str, minutes: float) -> list[tuple[float, float]]:
        try:
            table = self.anchors[circuit_id]
        except KeyError:
            raise UnknownCircuitError(f"no calibration for circuit {circuit_id!r}") from None
        times = sorted(table)
        values = np.array([table[t] for t in times], dtype=float)  # (anchors, dots, 2)
        if len(times) == 1:
            out = values[0]
        else:
            out = np.empty(values.shape[1:])
            for d in range(values.shape[1]):
                for j in range(2):
                    out[d, j] = np.interp(minutes, times, values[:, d, j])
        return [(float(a), float(b)) for a, b in out]


def apply_gating(device: Device, circuit_id: str, event: GatingEvent, calibration: GatingCalibration) -> Device:
    """Gate one circuit and return the updated device.

    The circuit's profiles are re-derived from ``calibration`` at the circuit's
    cumulative gating time. A zero-duration event is a no-op.
    """
    circuit = device.circuit(circuit_id)
    if event.voltage >= 0:
        raise UnsupportedProtocolError(
            f"only negative gate voltages are supported, got {event.voltage} V"
        )
    if event.duration == 0:
        return device
    gated = replace(circuit, gating_history=circuit.gating_history + (event,))
    anchor = calibration.profiles_at(circuit_id, gated.total_gating_minutes)
    if len(anchor) != len(gated):
        raise ValueError(
            f"calibration for circuit {circuit_id!r} has {len(anchor)} dots, circuit has {len(gated)}"
        )
    profiles = dict(device.profiles)
    for idx, (coord, (p_sd, p_dir)) in enumerate(zip(gated.dot_positions, anchor), start=1):
        profiles[coord] = DotProfile.from_p_sd(idx, p_sd, p_dir)
    circuits = tuple(gated if c.circuit_id == circuit_id else c for c in device.circuits)
    return Device(device.device_id, circuits, profiles)


@dataclass(frozen=True)
class DeviceLibrary:
    """Enrolled fingerprint of one circuit: profiles ordered by reading position."""

    device_id: str
    circuit_id: str
    gating: GatingEvent | None
    profiles: tuple[DotProfile, ...]
    enrollment_trials: int
    synthetic_fields: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        object.__setattr__(self, "synthetic_fields", tuple(self.synthetic_fields))
        if self.enrollment_trials < 1:
            raise ValueError("enrollment_trials must be >= 1")
        for expected, profile in enumerate(self.profiles, start=1):
            if profile.position != expected:
                raise InvalidProfileError(
                    f"profiles must be ordered by position 1..N; slot {expected} holds {profile.position}"
                )
            profile.majority_state  # rejects p_sd == 0.5

    def __len__(self) -> int:
        return len(self.profiles)

    def profile(self, position: int) -> DotProfile:
        if not 1 <= position <= len(self.profiles):
            raise KeyError(f"position {position} not in library {self.device_id}/{self.circuit_id}")
        return self.profiles[position - 1]

    @property
    def p_sd(self) -> np.ndarray:
        return np.array([p.p_sd for p in self.profiles])

    @property
    def p_dir_rcw(self) -> np.ndarray:
        return np.array([p.p_dir_rcw for p in self.profiles])

    @property
    def n_pbits(self) -> int:
        return sum(p.is_pbit for p in self.profiles)

    @property
    def n_dbits(self) -> int:
        return len(self.profiles) - self.n_pbits

    @property
    def mean_p_sd(self) -> float:
        return float(np.mean(self.p_sd))


def enroll(device: Device, trials: int, rng, *, circuit_id: str | None = None) -> DeviceLibrary:
    """Estimate per-dot probabilities from ``trials`` degauss samples.

    With several active circuits, ``circuit_id`` picks the one to enroll.
    """
    if trials < 1:
        raise ValueError("enrollment needs at least one trial")
    active = [c for c in device.circuits if c.activation]
    if not active:
        raise EmptyDeviceError(f"device {device.device_id!r} has no active dots to enroll")
    if circuit_id is None:
        if len(active) > 1:
            raise ValueError("several circuits are active; pass circuit_id")
        circuit = active[0]
    else:
        circuit = device.circuit(circuit_id)
        if not circuit.activation:
            raise EmptyDeviceError(f"circuit {circuit_id!r} is not active")

    codes = degauss_batch(device, trials, rng, active_only=True)
    columns = [device.active_coords().index(c) for c in circuit.dot_positions]
    codes = codes[:, columns]
    sd_counts = np.isin(codes, (MagneticState.SD_RIGHT, MagneticState.SD_LEFT)).sum(axis=0)
    rcw_counts = np.isin(codes, (MagneticState.SD_RIGHT, MagneticState.VORTEX_CW)).sum(axis=0)

    profiles = []
    for pos, (n_sd, n_rcw) in enumerate(zip(sd_counts, rcw_counts), start=1):
        if 2 * n_sd == trials:
            raise MajorityTieError(
                f"dot {pos}: {n_sd} SD vs {trials - n_sd} vortex outcomes; re-enroll with an odd trial count"
            )
        profiles.append(DotProfile(pos, n_sd / trials, (trials - n_sd) / trials, n_rcw / trials))
    gating = circuit.gating_history[-1] if circuit.gating_history else None
    return DeviceLibrary(device.device_id, circuit.circuit_id, gating, tuple(profiles), trials)


@dataclass(frozen=True)
class TamperReport:
    violations: tuple[str, ...]
    observed: Mapping[str, bool]

    @property
    def tampered(self) -> bool:
        return bool(self.violations)


def tamper_check(device: Device, expected_activation: Mapping[str, bool]) -> TamperReport:
    """List circuits whose activation differs from the expected design.

    Circuits missing from ``expected_activation`` are expected to be OFF.
    """
    observed = device.activation
    violations = tuple(
        cid for cid, active in observed.items() if active != bool(expected_activation.get(cid, False))
    )
    return TamperReport(violations, observed)
