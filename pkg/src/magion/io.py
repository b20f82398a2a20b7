"""Library JSON documents, trace CSVs and plot-data files."""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import jsonschema
import numpy as np

from .errors import ChecksumError, InvalidProfileError, MajorityTieError, SchemaError
from .inference import InferenceRun
from .model import DegaussTrace, DeviceLibrary, DotProfile, GatingEvent
from .randomness import FhdResult

SCHEMA_VERSION = 1
LIBRARY_KIND = "magion.device-library"
SUM_TOLERANCE = 1e-6

_PROB = {"type": "number", "minimum": 0, "maximum": 1}

LIBRARY_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind", "device_id", "circuit_id", "gating", "enrollment_trials", "profiles"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"const": LIBRARY_KIND},
        "device_id": {"type": "string"},
        "circuit_id": {"type": "string"},
        "gating": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["voltage_v", "duration_min"],
                    "properties": {"voltage_v": {"type": "number"}, "duration_min": {"type": "number", "minimum": 0}},
                    "additionalProperties": False,
                },
            ]
        },
        "enrollment_trials": {"type": "integer", "minimum": 1},
        "synthetic_fields": {"type": "array", "items": {"type": "string"}},
        "notes": {"type": "string"},
        "profiles": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["position", "p_sd", "p_v", "p_dir_rcw", "majority_state", "bit_kind"],
                "properties": {
                    "position": {"type": "integer", "minimum": 1},
                    # probability ranges are checked as profile invariants, not schema
                    "p_sd": {"type": "number"},
                    "p_v": {"type": "number"},
                    "p_dir_rcw": {"type": "number"},
                    "majority_state": {"enum": ["SD", "V"]},
                    "bit_kind": {"enum": ["d", "p"]},
                },
                "additionalProperties": False,
            },
        },
        "checksum": {"type": "string", "pattern": "^sha256:[0-9a-f]{64}$"},
    },
    "additionalProperties": False,
}


def _canonical_checksum(doc: Mapping) -> str:
    body = {k: v for k, v in doc.items() if k != "checksum"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return "sha256:" + hashlib.sha256(blob.encode("utf-8")).hexdigest()


def library_to_dict(library: DeviceLibrary, notes: str | None = None) -> dict:
    doc: dict = {
        "schema_version": SCHEMA_VERSION,
        "kind": LIBRARY_KIND,
        "device_id": library.device_id,
        "circuit_id": library.circuit_id,
        "gating": None if library.gating is None else {
            "voltage_v": float(library.gating.voltage),
            "duration_min": float(library.gating.duration),
        },
        "enrollment_trials": int(library.enrollment_trials),
        "synthetic_fields": list(library.synthetic_fields),
    }
    if notes:
        doc["notes"] = notes
    doc["profiles"] = [
        {
            "position": p.position,
            "p_sd": float(p.p_sd),
            "p_v": float(p.p_v),
            "p_dir_rcw": float(p.p_dir_rcw),
            "majority_state": p.majority_state.value,
            "bit_kind": p.bit_kind.value,
        }
        for p in library.profiles
    ]
    doc["checksum"] = _canonical_checksum(doc)
    return doc


def dumps_library(library: DeviceLibrary, notes: str | None = None) -> str:
    return json.dumps(library_to_dict(library, notes), indent=2) + "\n"


def save_library(library: DeviceLibrary, path, notes: str | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_library(library, notes), encoding="utf-8")
    return path


def library_from_dict(doc: Mapping) -> DeviceLibrary:
    """Validate a parsed library document and build the library.

    Raises SchemaError, ChecksumError or InvalidProfileError, in that order of checking.
    """
    try:
        jsonschema.validate(doc, LIBRARY_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None
    if "checksum" in doc and doc["checksum"] != _canonical_checksum(doc):
        raise ChecksumError("library checksum does not match its contents")

    profiles = []
    for entry in doc["profiles"]:
        pos = entry["position"]
        p_sd, p_v = entry["p_sd"], entry["p_v"]
        if abs(p_sd + p_v - 1.0) > SUM_TOLERANCE:
            raise InvalidProfileError(f"dot {pos}: p_sd + p_v = {p_sd + p_v}")
        profile = DotProfile(pos, p_sd, p_v, entry["p_dir_rcw"])
        try:
            majority = profile.majority_state.value
        except MajorityTieError as exc:
            raise InvalidProfileError(str(exc)) from None
        if majority != entry["majority_state"]:
            raise InvalidProfileError(f"dot {pos}: stored majority {entry['majority_state']} contradicts p_sd={p_sd}")
        if profile.bit_kind.value != entry["bit_kind"]:
            raise InvalidProfileError(f"dot {pos}: stored bit kind {entry['bit_kind']} contradicts p_sd={p_sd}")
        profiles.append(profile)

    gating = doc["gating"]
    return DeviceLibrary(
        device_id=doc["device_id"],
        circuit_id=doc["circuit_id"],
        gating=None if gating is None else GatingEvent(gating["voltage_v"], gating["duration_min"]),
        profiles=tuple(profiles),
        enrollment_trials=doc["enrollment_trials"],
        synthetic_fields=tuple(doc.get("synthetic_fields", ())),
    )


def loads_library(text: str) -> DeviceLibrary:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    return library_from_dict(doc)


def load_library(path) -> DeviceLibrary:
    return loads_library(Path(path).read_text(encoding="utf-8"))


def library_notes(path) -> str | None:
    return json.loads(Path(path).read_text(encoding="utf-8")).get("notes")


def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def save_traces(traces: Sequence[DegaussTrace] | np.ndarray, path) -> Path:
    """Write traces as ``trial,dot_1,...,dot_N`` with state codes 0-4."""
    if isinstance(traces, np.ndarray):
        codes = traces
        indices = range(len(codes))
    else:
        codes = np.array([t.codes for t in traces]) if traces else np.zeros((0, 0), dtype=np.int8)
        indices = [t.trial_index for t in traces]
    n = codes.shape[1] if codes.ndim == 2 else 0
    header = ["trial"] + [f"dot_{i}" for i in range(1, n + 1)]
    return _write_csv(path, header, ([i, *map(int, row)] for i, row in zip(indices, codes)))


def load_traces(path) -> list[DegaussTrace]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "trial" or any(h != f"dot_{i}" for i, h in enumerate(header[1:], start=1)):
            raise SchemaError(f"{path}: expected header trial,dot_1,...,dot_N")
        try:
            return [DegaussTrace.from_codes(int(row[0]), [int(x) for x in row[1:]]) for row in reader]
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"{path}: bad trace row: {exc}") from None


def fmt(x: float, digits: int = 6) -> str:
    return f"{x:.{digits}f}"


def write_histogram(result: FhdResult | None, path) -> Path:
    rows = [] if result is None else [(fmt(lo), fmt(hi), c) for lo, hi, c in result.histogram()]
    return _write_csv(path, ["bin_lo", "bin_hi", "count"], rows)


def write_ber_curves(curves: Mapping[str, Sequence[tuple[int, float]]], path) -> Path:
    """Columns ``T`` then one ``BER_<label>`` column per curve, all sharing the same T values."""
    labels = list(curves)
    ts = [t for t, _ in curves[labels[0]]] if labels else []
    rows = []
    for i, T in enumerate(ts):
        rows.append([T] + [fmt(curves[label][i][1], 9) for label in labels])
    return _write_csv(path, ["T"] + [f"BER_{label}" for label in labels], rows)


def write_inference(run: InferenceRun, path) -> Path:
    return _write_csv(
        path,
        ["trial", "per_trial_prob", "cumulative_prob"],
        [(t, fmt(p), fmt(c)) for t, p, c in run.rows()],
    )


def emit_plot_data(result, path) -> Path:
    """Write the CSV behind an FHD histogram, a BER-vs-T curve set or an inference run."""
    if result is None or isinstance(result, FhdResult):
        return write_histogram(result, path)
    if isinstance(result, InferenceRun):
        return write_inference(result, path)
    if isinstance(result, Mapping):
        return write_ber_curves(result, path)
    raise TypeError(f"no plot-data format for {type(result).__name__}")


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return _write_csv(path, header, rows)


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def output_dir(default=None) -> Path:
    """Output directory, overridable through ``MAGION_OUTPUT_DIR``."""
    env = os.environ.get("MAGION_OUTPUT_DIR")
    return Path(env if env else (default if default is not None else "."))
