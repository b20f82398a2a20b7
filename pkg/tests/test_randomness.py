import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magion import dataset
from magion.errors import MappingError
from magion.model import Device, DegaussTrace, DeviceLibrary, DotProfile, GatingEvent, degauss_batch
from magion.randomness import (
    StateMapping,
    expected_fhd,
    extract_bits,
    fhd_bootstrap_se,
    fhd_from_counts,
    fhd_intra,
    hamming_distance,
    lock_strength,
    lock_strength_from_entropy,
    monobit_statistic,
    sequence_count,
    shannon_entropy_bit,
    total_entropy,
)

FOUR = StateMapping.four_state()
BINARY = StateMapping.binary_direction()

traces_st = st.integers(1, 6).flatmap(
    lambda n: st.lists(st.lists(st.integers(1, 4), min_size=n, max_size=n), min_size=2, max_size=8)
)


def brute_fhd(traces, mapping):
    """Oracle: explicit loop over unique pairs."""
    pairs = list(itertools.combinations(traces, 2))
    n = len(traces[0])
    return sum(hamming_distance(a, b, mapping) for a, b in pairs) / (len(pairs) * n)


class TestHamming:
    def test_identity(self):
        assert hamming_distance((1, 3, 4), (1, 3, 4), FOUR) == 0

    def test_full_mismatch(self):
        assert hamming_distance((1, 2), (2, 1), FOUR) == 2

    def test_binary_grouping(self):
        assert list(BINARY.apply((1, 4, 2))) == [1, 0, 0]
        assert list(BINARY.apply((3, 4, 3))) == [1, 0, 1]
        assert hamming_distance((1, 4, 2), (3, 4, 3), BINARY) == 1

    def test_errors(self):
        with pytest.raises(ValueError):
            hamming_distance((1, 2), (1, 2, 3), FOUR)
        with pytest.raises(MappingError):
            hamming_distance((0, 2), (1, 2), FOUR)


class TestFhd:
    def test_hand_example(self):
        res = fhd_intra([(1, 2), (1, 3), (2, 2)], FOUR)
        assert res.mean_fhd == pytest.approx(4 / 6)
        assert list(res.hd_counts) == [0, 2, 1]

    def test_identical(self):
        assert fhd_intra([(1, 4, 3)] * 5, FOUR).mean_fhd == 0.0

    def test_needs_two_traces(self):
        with pytest.raises(ValueError):
            fhd_intra([(1, 2)], FOUR)

    def test_accepts_trace_objects(self):
        traces = [DegaussTrace.from_codes(i, c) for i, c in enumerate([(1, 2), (1, 3), (2, 2)])]
        assert fhd_intra(traces, FOUR).mean_fhd == pytest.approx(4 / 6)

    @settings(max_examples=60, deadline=None)
    @given(traces_st)
    def test_matches_pair_enumeration(self, traces):
        for mapping in (FOUR, BINARY, StateMapping.binary_direction(alternative=True)):
            res = fhd_intra(traces, mapping, block=3)
            assert res.mean_fhd == pytest.approx(brute_fhd(traces, mapping), abs=1e-12)
            assert res.hd_counts.sum() == res.pair_count
            assert 0.0 <= res.mean_fhd <= 1.0
            symbols = mapping.apply(traces)
            assert fhd_from_counts(symbols, mapping.symbols) == pytest.approx(res.mean_fhd, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(traces_st, st.permutations([1, 2, 3, 4]))
    def test_relabel_invariance(self, traces, perm):
        relabelled = [[perm[c - 1] for c in t] for t in traces]
        assert fhd_intra(relabelled, FOUR).mean_fhd == pytest.approx(fhd_intra(traces, FOUR).mean_fhd)

    @settings(max_examples=40, deadline=None)
    @given(traces_st)
    def test_groupings_agree(self, traces):
        # the alternative grouping is the default one with vortex chirality swapped
        alt = StateMapping.binary_direction(alternative=True)
        flip_vortex = [[{3: 4, 4: 3}.get(c, c) for c in t] for t in traces]
        assert fhd_intra(flip_vortex, alt).mean_fhd == pytest.approx(fhd_intra(traces, BINARY).mean_fhd)

    def test_histogram_binning(self):
        res = fhd_intra([(1, 2, 3), (1, 3, 3), (2, 2, 4)], FOUR)
        rows = res.histogram()
        assert len(rows) == 4
        assert all(hi - lo == pytest.approx(1 / 3) for lo, hi, _ in rows)
        assert rows[1][0] < 1 / 3 < rows[1][1]

    def test_circuit_a_monte_carlo(self, s1):
        exp = expected_fhd([(p.p_dir_rcw, 1 - p.p_dir_rcw) for p in s1.profiles])
        assert 0.49 <= exp <= 0.50
        codes = degauss_batch(Device.from_library(s1), 2000, 5, active_only=True)
        res = fhd_intra(codes, BINARY)
        se = fhd_bootstrap_se(codes, BINARY, 6)
        assert abs(res.mean_fhd - 0.493) <= 0.02
        assert abs(res.mean_fhd - exp) <= 3 * se
        mu, _ = res.gaussian_fit()
        assert mu == pytest.approx(res.mean_fhd)


class TestExpectedFhd:
    def test_uniform(self):
        assert expected_fhd([(0.5, 0.5)]) == 0.5
        assert expected_fhd([(0.25,) * 4]) == 0.75

    def test_bad_distribution(self):
        with pytest.raises(ValueError):
            expected_fhd([(0.5, 0.6)])


class TestEntropy:
    def test_values(self):
        assert shannon_entropy_bit(0.5) == 1.0
        assert shannon_entropy_bit(1.0) == 0.0
        assert round(shannon_entropy_bit(0.6129), 3) == 0.963
        with pytest.raises(ValueError):
            shannon_entropy_bit(1.2)

    @given(st.floats(0.0, 1.0))
    def test_symmetry_and_bounds(self, p):
        h = shannon_entropy_bit(p)
        assert h == pytest.approx(shannon_entropy_bit(1 - p), abs=1e-12)
        assert 0.0 <= h <= 1.0 + 1e-15

    def test_library_means(self, s1, s1b):
        assert abs(total_entropy(s1).mean - 0.99) <= 0.005
        assert abs(total_entropy(s1b).mean - 0.97) <= 0.005

    def test_fair_coins(self):
        profiles = tuple(DotProfile.from_p_sd(i, 0.0, 0.5) for i in range(1, 7))
        lib = DeviceLibrary("d", "A", GatingEvent(-1.0, 1.0), profiles, 1)
        assert total_entropy(lib).total == 6.0

    def test_four_state_rejected(self, s1):
        with pytest.raises(MappingError):
            total_entropy(s1, FOUR)

    def test_sequence_count(self):
        assert sequence_count(0.0) == 1.0
        assert f"{sequence_count(41.0065):.2e}" == "2.21e+12"
        assert sequence_count(3.0) < sequence_count(3.5)


class TestTrng:
    def test_direct_mapping(self):
        assert list(extract_bits(DegaussTrace.from_codes(0, (1, 3, 2)))) == [1, 1, 0]

    def test_four_state_rejected(self):
        with pytest.raises(MappingError):
            extract_bits((1, 2), FOUR)

    def test_length_matches_active_dots(self, s1b):
        codes = degauss_batch(Device.from_library(s1b), 1, 0, active_only=True)
        assert extract_bits(codes[0]).shape == (24,)

    def test_monobit(self):
        profiles = tuple(DotProfile.from_p_sd(i, 0.3, 0.5) for i in range(1, 101))
        lib = DeviceLibrary("d", "A", GatingEvent(-1.0, 1.0), profiles, 1)
        bits = extract_bits(degauss_batch(Device.from_library(lib), 1000, 4))
        assert bits.size == 100_000
        assert monobit_statistic(bits) < 4


class TestLockStrength:
    def test_single_coin(self):
        res = lock_strength_from_entropy(1.0, 1.0)
        assert res.sequences == 2.0 and res.seconds == 2.0

    def test_hundred_dots(self):
        res = lock_strength_from_entropy(100 * 0.98, 1e9)
        assert f"{res.sequences:.2e}" == "3.17e+29"
        assert abs(math.log(res.years / 1e13)) <= math.log(1.1)

    def test_two_circuits(self, s1, s1b):
        res = lock_strength([s1, s1b], 1e9)
        assert 2.21e12 / 2 <= res.sequences <= 2.21e12 * 2
        assert res.h_total == pytest.approx(total_entropy(s1).total + total_entropy(s1b).total)


def test_circuit_b_four_state_fhd_near_expected(s1b):
    # four-state FHD of the synthetic circuit-B model should match its collision oracle
    from magion.randomness import four_state_distributions

    codes = degauss_batch(Device.from_library(s1b), 1500, 8, active_only=True)
    res = fhd_intra(codes, FOUR)
    exp = expected_fhd(four_state_distributions(s1b))
    assert abs(res.mean_fhd - exp) <= 3 * fhd_bootstrap_se(codes, FOUR, 9)
    assert dataset.CIRCUIT_B_PLACEHOLDER_P_SD == 0.087
