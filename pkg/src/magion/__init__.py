"""Magneto-ionic dot arrays as TRNG, PUF and probabilistic-inference primitives."""

from .errors import MagionError
from .model import (
    BitKind,
    CircuitLayout,
    DegaussTrace,
    Device,
    DeviceLibrary,
    DotProfile,
    GatingCalibration,
    GatingEvent,
    MagneticState,
    StateClass,
    apply_gating,
    degauss_batch,
    degauss_sample,
    enroll,
    tamper_check,
)
from .puf import Challenge, Response, ber_closed_form, ber_empirical, crp_count, respond, verify
from .randomness import StateMapping, expected_fhd, fhd_intra, hamming_distance, shannon_entropy_bit

__version__ = "0.1.0"
