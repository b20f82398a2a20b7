import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magion.errors import ChallengeError, InactiveDotError
from magion.model import CircuitLayout, Device, DeviceLibrary, DotProfile, GatingEvent, StateClass
from magion.puf import (
    Challenge,
    Response,
    ber_closed_form,
    ber_curve,
    ber_empirical,
    crp_count,
    majority_error_probability,
    respond,
    respond_batch,
    verify,
)

SD, V = StateClass.SD, StateClass.VORTEX
odd_T = st.integers(0, 13).map(lambda i: 2 * i + 1)


def enumerate_crps(P, D, k):
    """Oracle: list every (challenge, response) pair explicitly.

    Dots 0..P-1 are p-bits (either class is a valid response), the rest are
    d-bits with a single fixed response.
    """
    pairs = 0
    for combo in itertools.combinations(range(P + D), k):
        options = [(SD, V) if dot < P else (V,) for dot in combo]
        pairs += sum(1 for _ in itertools.product(*options))
    return pairs


def majority_error_by_enumeration(p_e, T):
    """Oracle: sum the probability of every error pattern with a wrong majority."""
    total = 0.0
    for pattern in itertools.product((0, 1), repeat=T):
        wrong = sum(pattern)
        if 2 * wrong > T:
            total += p_e**wrong * (1 - p_e) ** (T - wrong)
    return total


def library_of(p_sds):
    profiles = tuple(DotProfile.from_p_sd(i, p) for i, p in enumerate(p_sds, 1))
    return DeviceLibrary("dev", "A", GatingEvent(-10.0, 60.0), profiles, 101)


class TestCrpCount:
    @pytest.mark.parametrize("P,D,k,expected", [(0, 18, 5, 8568), (7, 11, 5, 41174), (9, 9, 5, 60858)])
    def test_published_counts(self, P, D, k, expected):
        assert crp_count(P, D, k) == expected

    @pytest.mark.parametrize("P,D", [(P, D) for P in range(0, 13) for D in range(0, 13 - P)])
    def test_exhaustive_enumeration(self, P, D):
        for k in range(0, P + D + 1):
            assert crp_count(P, D, k) == enumerate_crps(P, D, k)

    def test_no_pbits_is_binomial(self):
        for D in range(1, 20):
            for k in range(D + 1):
                assert crp_count(0, D, k) == math.comb(D, k)

    def test_oversized_challenge(self):
        with pytest.raises(ValueError):
            crp_count(2, 2, 5)

    def test_shipped_library_counts(self, s1, s2):
        assert crp_count(s1.n_pbits, s1.n_dbits, 5) == 41174
        assert crp_count(s2.n_pbits, s2.n_dbits, 5) == 60858


class TestMajorityError:
    @settings(max_examples=80, deadline=None)
    @given(st.floats(0.0, 1.0), st.sampled_from([1, 3, 5, 7, 9, 11]))
    def test_matches_enumeration(self, p_e, T):
        assert majority_error_probability(p_e, T) == pytest.approx(majority_error_by_enumeration(p_e, T), abs=1e-12)

    def test_dot13_sd_response(self):
        # probability a T=5 vote reports SD for a 91.1% SD dot: 1 - (q^5 + 5pq^4 + 10p^2q^3)
        p, q = 0.911, 0.089
        by_hand = 1 - (q**5 + 5 * p * q**4 + 10 * p**2 * q**3)
        assert 1 - majority_error_probability(q, 5) == pytest.approx(by_hand, abs=1e-15)
        assert round(by_hand, 4) == 0.9939

    def test_even_T_rejected(self):
        with pytest.raises(ValueError):
            majority_error_probability(0.1, 4)

    def test_small_values_keep_precision(self):
        # a 3.2% dot at T=27 is ~1.6e-14 and must not collapse to 0
        assert majority_error_probability(0.032, 5) == pytest.approx(3.1215e-4, rel=1e-4)
        assert 0 < majority_error_probability(0.032, 27) < 1e-12


class TestBerClosedForm:
    def test_spot_values(self, s1, s2):
        ch = Challenge((5, 11, 12, 14, 15))
        assert f"{100 * ber_closed_form(s1, ch, 1):.3g}" == "0.64"
        assert f"{100 * ber_closed_form(s1, ch, 5):.1g}" == "0.006"
        assert f"{100 * ber_closed_form(s2, ch, 1):.4g}" == "18.02"
        # printed 19.440; the two-decimal enrolled values give 19.42
        assert 100 * ber_closed_form(s1, Challenge((7, 9, 13, 17, 18)), 1) == pytest.approx(19.44, abs=0.06)

    def test_all_dbits_zero(self):
        lib = library_of([0.0, 1.0, 0.0])
        assert all(ber_closed_form(lib, Challenge((1, 2, 3)), T) == 0.0 for T in (1, 5, 27))

    def test_coin_flip_dots(self):
        lib = library_of([0.5 - 1e-12, 0.0, 0.5 + 1e-12, 0.0])
        assert ber_closed_form(lib, Challenge((1, 2, 3, 4)), 1) == pytest.approx(0.25)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0).filter(lambda p: p != 0.5), min_size=1, max_size=6))
    def test_monotone_in_T(self, p_sds):
        lib = library_of(p_sds)
        ch = Challenge(tuple(range(1, len(p_sds) + 1)))
        curve = [b for _, b in ber_curve(lib, ch, range(1, 30, 2))]
        assert all(b <= a + 1e-15 for a, b in zip(curve, curve[1:]))

    def test_position_out_of_range(self, s1):
        with pytest.raises(ChallengeError):
            ber_closed_form(s1, Challenge((1, 19)), 1)


class TestRespond:
    def test_dbit_always_vortex(self, s1):
        dev = Device.from_library(s1)
        flags = respond_batch(dev, Challenge((1, 2, 4)), 5, 200, 0)
        assert not flags.any()

    def test_even_T(self, s1):
        with pytest.raises(ValueError):
            respond(Device.from_library(s1), Challenge((1,)), 2, 0)

    def test_inactive_dot(self):
        dev = Device("d", (CircuitLayout("A", ((0, 0), (0, 1))),), {})
        with pytest.raises(InactiveDotError) as info:
            respond(dev, Challenge((2,)), 1, 0)
        assert info.value.code == "tamper-or-inactive"

    def test_dot13_vote_frequency(self, s1):
        n = 10_000
        flags = respond_batch(Device.from_library(s1), Challenge((13,)), 5, n, 1)[:, 0]
        p = 1 - majority_error_probability(0.089, 5)
        assert abs(flags.mean() - p) <= 3 * math.sqrt(p * (1 - p) / n)

    def test_permutation_equivariance(self, s1):
        dev = Device.from_library(s1)
        a = respond_batch(dev, Challenge((7, 9, 13, 17, 18)), 3, 50, 4)
        b = respond_batch(dev, Challenge((18, 13, 7, 17, 9)), 3, 50, 4)
        order = [4, 2, 0, 3, 1]
        assert np.array_equal(a[:, order], b)

    def test_seed_determinism(self, s1):
        dev = Device.from_library(s1)
        ch = Challenge((7, 9, 13))
        assert respond(dev, ch, 5, 42) == respond(dev, ch, 5, 42)


class TestVerify:
    def test_perfect_match(self, s1):
        ch = Challenge((7, 9, 13, 17, 18))
        resp = Response(tuple(s1.profile(p).majority_state for p in ch.positions), 1)
        res = verify(resp, s1, ch)
        assert (res.mismatches, res.passed, res.threshold) == (0, True, 2)

    def test_two_and_three_mismatches(self, s1):
        ch = Challenge((1, 2, 3, 4, 6))  # all vortex majority
        assert verify(Response((SD, SD, V, V, V), 1), s1, ch).passed
        assert not verify(Response((SD, SD, SD, V, V), 1), s1, ch).passed

    def test_unknown_position(self, s1):
        with pytest.raises(ChallengeError):
            verify(Response((V,), 1), s1, Challenge((30,)))


class TestBerEmpirical:
    def test_all_dbits_exact_zero(self, s1):
        est = ber_empirical(Device.from_library(s1), s1, Challenge((1, 2, 4, 6, 8)), 1, 1000, 0)
        assert est.ber == 0.0 and est.stderr == 0.0

    @pytest.mark.parametrize("name,positions,expected", [
        ("s1", (7, 9, 13, 17, 18), 0.1944),
        ("s2", (5, 11, 12, 14, 15), 0.1802),
    ])
    def test_single_trial(self, name, positions, expected, s1, s2):
        lib = {"s1": s1, "s2": s2}[name]
        est = ber_empirical(Device.from_library(lib), lib, Challenge(positions), 1, 100_000, 10)
        assert abs(est.ber - expected) <= 0.004
        assert abs(est.ber - ber_closed_form(lib, Challenge(positions), 1)) <= 4 * est.stderr

    def test_noise_raises_error_rate(self, s1):
        dev, ch = Device.from_library(s1), Challenge((1, 2, 4))
        assert ber_empirical(dev, s1, ch, 1, 5000, 0, noise=0.1).ber == pytest.approx(0.1, abs=0.015)
