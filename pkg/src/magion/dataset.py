"""Transcribed published tables and the device libraries built from them.

The CSV tables under ``magion/data`` hold the published numbers exactly as
printed (percent values). Libraries for Sample 1 / Sample 2 circuit A and
Sample 1 circuit B are derived from them and shipped as JSON.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from decimal import Decimal
from importlib import resources
from pathlib import Path

from .errors import ChecksumError
from .io import dumps_library, load_library, sha256_file
from .model import (
    CircuitLayout,
    Device,
    DeviceLibrary,
    DotProfile,
    GatingCalibration,
    GatingEvent,
    StateClass,
    grid_positions,
)
from .puf import Challenge

DATA_VERSION = 1

# the only circuit-B SD statistic published is the circuit-wide 8.7%
CIRCUIT_B_PLACEHOLDER_P_SD = 0.087

LIBRARY_FILES = {
    "sample1-A": "libraries/sample1_circuitA.json",
    "sample2-A": "libraries/sample2_circuitA.json",
    "sample1-B": "libraries/sample1_circuitB.json",
}

TABLE_FILES = (
    "supp_table1_circuit_b.csv",
    "supp_table2_circuit_a.csv",
    "supp_table3_enrolled.csv",
    "table1_crps.csv",
    "supp_table4_labels.csv",
)

TABLE_S4_CHALLENGE = Challenge((13, 7, 9, 18, 17))

# 10 x 10 array: circuit A in the bottom-left block, circuit B in the top-right block.
# The exact dot shapes are not published; these blocks only fix reading order.
CIRCUIT_A_COORDS = grid_positions(3, 6, origin=(7, 0))
CIRCUIT_B_COORDS = grid_positions(4, 6, origin=(0, 4))


def data_dir() -> Path:
    return Path(str(resources.files("magion") / "data"))


def pct(text: str) -> float:
    """Printed percentage -> probability, without binary rounding artefacts."""
    return float(Decimal(text.strip().rstrip("%")) / 100)


def _read(name: str) -> list[dict]:
    with open(data_dir() / name, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@dataclass(frozen=True)
class DirectionRow:
    dot: int
    p_rcw: float
    p_lccw: float
    entropy_printed: float


@dataclass(frozen=True)
class EnrolledRow:
    dot: int
    p_sd: tuple[float, float]
    p_v: tuple[float, float]
    majority: tuple[StateClass, StateClass]


@dataclass(frozen=True)
class Table1Row:
    challenge: Challenge
    n_pbits: tuple[int, int]
    ber_pct: tuple[dict[int, float], dict[int, float]]
    pfhd: float


def _direction_table(name: str) -> list[DirectionRow]:
    return [
        DirectionRow(int(r["dot"]), pct(r["p_rcw_pct"]), pct(r["p_lccw_pct"]), float(r["entropy_bit"]))
        for r in _read(name)
    ]


def supp_table1() -> list[DirectionRow]:
    """Direction-subclass probabilities, Sample 1 circuit B (24 dots)."""
    return _direction_table("supp_table1_circuit_b.csv")


def supp_table2() -> list[DirectionRow]:
    """Direction-subclass probabilities, Sample 1 circuit A (18 dots)."""
    return _direction_table("supp_table2_circuit_a.csv")


def supp_table3() -> list[EnrolledRow]:
    return [
        EnrolledRow(
            int(r["dot"]),
            (pct(r["s1_p_sd_pct"]), pct(r["s2_p_sd_pct"])),
            (pct(r["s1_p_v_pct"]), pct(r["s2_p_v_pct"])),
            (StateClass.parse(r["s1_majority"]), StateClass.parse(r["s2_majority"])),
        )
        for r in _read("supp_table3_enrolled.csv")
    ]


def table1() -> list[Table1Row]:
    rows = []
    for r in _read("table1_crps.csv"):
        bers = tuple({T: float(r[f"{s}_ber_{T}"]) for T in (1, 5, 11, 27)} for s in ("s1", "s2"))
        rows.append(Table1Row(
            Challenge.parse(r["dot_positions"]),
            (int(r["s1_n_pbits"]), int(r["s2_n_pbits"])),
            bers,
            float(r["pfhd_inter"]),
        ))
    return rows


@dataclass(frozen=True)
class TableS4:
    challenge: Challenge
    labels: tuple[tuple[int, ...], ...]
    per_trial_pct: tuple[float, ...]
    cumulative_pct: dict[int, float]  # trial -> printed cumulative value (only where printed)


def supp_table4() -> TableS4:
    rows = _read("supp_table4_labels.csv")
    cols = [f"dot_{p}" for p in TABLE_S4_CHALLENGE.positions]
    return TableS4(
        TABLE_S4_CHALLENGE,
        tuple(tuple(int(r[c]) for c in cols) for r in rows),
        tuple(float(r["printed_per_trial_pct"]) for r in rows),
        {int(r["trial"]): float(r["printed_cumulative_pct"]) for r in rows if r["printed_cumulative_pct"]},
    )


def build_libraries() -> dict[str, DeviceLibrary]:
    """Derive the shipped libraries from the transcribed tables."""
    s3 = supp_table3()
    dir_a = supp_table2()
    dir_b = supp_table1()
    sample1_a = DeviceLibrary(
        "sample1", "A", GatingEvent(-10.0, 60.0),
        tuple(DotProfile(r.dot, r.p_sd[0], r.p_v[0], d.p_rcw) for r, d in zip(s3, dir_a)),
        enrollment_trials=100,
    )
    sample2_a = DeviceLibrary(
        "sample2", "A", GatingEvent(-10.0, 30.0),
        tuple(DotProfile(r.dot, r.p_sd[1], r.p_v[1], 0.5) for r in s3),
        enrollment_trials=100,
        synthetic_fields=("p_dir_rcw",),
    )
    sample1_b = DeviceLibrary(
        "sample1", "B", GatingEvent(-10.0, 60.0),
        tuple(DotProfile.from_p_sd(d.dot, CIRCUIT_B_PLACEHOLDER_P_SD, d.p_rcw) for d in dir_b),
        enrollment_trials=100,
        synthetic_fields=("p_sd", "p_v"),
    )
    return {"sample1-A": sample1_a, "sample2-A": sample2_a, "sample1-B": sample1_b}


LIBRARY_NOTES = {
    "sample1-A": "SD/vortex probabilities and direction probabilities as published for circuit A, t=60 min.",
    "sample2-A": "SD/vortex probabilities as published for circuit A, t=30 min; direction probabilities "
                 "unpublished, set to 0.5 (synthetic).",
    "sample1-B": "Direction probabilities as published for circuit B; per-dot SD probabilities unpublished, "
                 "set to the circuit-wide 8.7% (synthetic).",
}


def library_path(name: str) -> Path:
    try:
        return data_dir() / LIBRARY_FILES[name]
    except KeyError:
        raise KeyError(f"unknown shipped library {name!r}; choose from {sorted(LIBRARY_FILES)}") from None


def shipped_library(name: str) -> DeviceLibrary:
    return load_library(library_path(name))


def manifest_path() -> Path:
    return data_dir() / "MANIFEST.json"


def shipped_files() -> list[str]:
    return list(TABLE_FILES) + list(LIBRARY_FILES.values())


def verify_manifest() -> dict[str, str]:
    """Check every shipped data file against its recorded SHA-256."""
    manifest = json.loads(manifest_path().read_text(encoding="utf-8"))
    if manifest.get("data_version") != DATA_VERSION:
        raise ChecksumError(f"data manifest version {manifest.get('data_version')} != {DATA_VERSION}")
    recorded = manifest["files"]
    for name in shipped_files():
        digest = sha256_file(data_dir() / name)
        if recorded.get(name) != digest:
            raise ChecksumError(f"{name}: checksum mismatch")
    return recorded


def rebuild_data(directory: Path | None = None) -> None:
    """Regenerate the library JSON files and the manifest from the CSV tables."""
    directory = Path(directory) if directory is not None else data_dir()
    for name, lib in build_libraries().items():
        target = directory / LIBRARY_FILES[name]
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(dumps_library(lib, LIBRARY_NOTES[name]), encoding="utf-8")
    files = {name: sha256_file(directory / name) for name in shipped_files()}
    (directory / "MANIFEST.json").write_text(
        json.dumps({"data_version": DATA_VERSION, "files": files}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def reference_calibration() -> GatingCalibration:
    """Gating-time anchors: circuit A at 30 min (Sample 2) and 60 min (Sample 1); circuit B at 60 min."""
    s1a, s2a, s1b = (shipped_library(n) for n in ("sample1-A", "sample2-A", "sample1-B"))

    def anchor(lib):
        return [(p.p_sd, p.p_dir_rcw) for p in lib.profiles]

    return GatingCalibration({
        "A": {30.0: anchor(s2a), 60.0: anchor(s1a)},
        "B": {60.0: anchor(s1b)},
    })


def reference_device(device_id: str = "sample1") -> Device:
    """The two-circuit reference array, with nothing gated yet."""
    return Device(device_id, (CircuitLayout("A", CIRCUIT_A_COORDS), CircuitLayout("B", CIRCUIT_B_COORDS)))
