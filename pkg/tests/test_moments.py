"""Khinchine moments, Stirling/partition combinatorics, moment-to-tail."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from picardlab import (
    CoefficientVector,
    MomentBound,
    bell_number,
    decoupled_moment_check,
    exact_moment,
    khinchine_ratio,
    partition_classes,
    stirling2,
    stirling_refined_bound_check,
    surjection_count,
    tail_from_moments,
)
from picardlab.moments import _term_coefficient_identity, p_star

BELL = [1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975]


def test_coefficient_vector_contract():
    cv = CoefficientVector((3.0, 4.0))
    assert cv.is_real
    assert cv.l2 == 5.0
    assert not CoefficientVector((1j,)).is_real
    with pytest.raises(ValueError):
        CoefficientVector(tuple([1.0] * 25))
    with pytest.raises(ValueError):
        CoefficientVector(())


def test_exact_moment_closed_forms():
    assert exact_moment((1.0, 1.0), 4) == pytest.approx(8.0, rel=1e-14)
    assert exact_moment((1.0, 1.0, 1.0), 4) == pytest.approx(21.0, rel=1e-14)
    # p = 2 is the l2 norm squared, any coefficients
    assert exact_moment((0.3, -1.2, 2.0), 2) == pytest.approx(
        0.3**2 + 1.2**2 + 2.0**2, rel=1e-14)
    # complex vector: |eps1 + i eps2|^2 = 2 for every sign pattern
    assert exact_moment((1.0, 1.0j), 4) == pytest.approx(4.0, rel=1e-14)


def test_exact_moment_validation():
    with pytest.raises(ValueError):
        exact_moment((1.0,), 3)
    with pytest.raises(ValueError):
        exact_moment((1.0,), 14)


def test_khinchine_ratio_closed_forms():
    assert khinchine_ratio((1.0,), 2) == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-12)
    assert khinchine_ratio((1.0, 1.0, 1.0), 4) == pytest.approx(
        21.0**0.25 / (2.0 * math.sqrt(3.0)), rel=1e-12)
    # one coefficient: |sum| = |c| always, so the ratio is exactly 1/sqrt(p)
    for p in (2.0, 4.0, 6.0):
        assert khinchine_ratio((2.5,), p) == pytest.approx(1.0 / math.sqrt(p), rel=1e-12)
    # odd p goes through the Monte Carlo branch; still exact for K = 1
    assert khinchine_ratio((2.5,), 3.0) == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-12)
    with pytest.raises(ValueError):
        khinchine_ratio((1.0,), 1.5)


def test_khinchine_ratio_below_one_on_200_vectors():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(200):
        k = int(rng.integers(1, 11))
        c = rng.standard_normal(k) * float(rng.uniform(0.1, 10.0))
        p = (2, 4, 6, 8)[trial % 4]
        ratio = khinchine_ratio(tuple(c), p)
        worst = max(worst, ratio)
        assert 0.0 < ratio <= 1.0 + 1e-9
    print(f"\nworst Khinchine ratio over 200 vectors: {worst:.6f}")


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=10).filter(
        lambda v: sum(x * x for x in v) > 0.01),
    st.sampled_from([2, 4, 6, 8]),
)
def test_khinchine_property(coeffs, p):
    # exact_moment cross-checks enumeration against the multinomial formula
    # internally and raises on mismatch, so this exercises both routes
    ratio = khinchine_ratio(tuple(coeffs), p)
    assert 0.0 < ratio <= 1.0 + 1e-9


def test_decoupled_moment_check_uniform():
    res = decoupled_moment_check(
        lambda rng, shape: rng.uniform(-1.0, 1.0, shape), K=8, p=4, trials=10**5)
    assert res.term_identity_ok
    assert res.c_measured <= 1.2
    assert res.ok
    print(f"\nmeasured decoupling constant: {res.c_measured:.4f}")


def test_decoupled_moment_check_validation():
    sampler = lambda rng, shape: rng.uniform(-1.0, 1.0, shape)
    with pytest.raises(ValueError):
        decoupled_moment_check(sampler, K=4, p=4, trials=100)
    with pytest.raises(ValueError):
        decoupled_moment_check(sampler, K=4, p=3, trials=10**4)
    with pytest.raises(ValueError):
        decoupled_moment_check(lambda rng, shape: np.zeros((3, 3)), K=4, p=4,
                               trials=10**4)


def test_term_coefficient_identity_examples():
    """j = 2, ks = (1,1): coupled coefficient 4!/(2!2!) = 6 factors exactly as
    [2!/(1!1!)] * [4!/2!] * [1!/2!]^2 = 2 * 12 * 1/4 = 6, with the last factor
    below 1."""
    assert _term_coefficient_identity(2, (1, 1))
    assert _term_coefficient_identity(2, (2,))
    assert _term_coefficient_identity(4, (2, 1, 1))
    assert math.factorial(4) // (math.factorial(2) * math.factorial(2)) == 6
    assert 6 <= 2 * 12


def test_stirling2_values_and_validation():
    assert stirling2(4, 2) == 7
    assert stirling2(3, 2) == 3
    assert stirling2(0, 0) == 1
    assert stirling2(4, 0) == 0
    for n in range(1, 21):
        assert stirling2(n, 1) == 1
        assert stirling2(n, n) == 1
    with pytest.raises(ValueError):
        stirling2(2, 3)
    with pytest.raises(ValueError):
        stirling2(31, 2)


def test_surjection_counts():
    assert surjection_count(4, 2) == 14
    assert 14 <= 2**4
    assert surjection_count(5, 3) == 150
    assert 150 / 3**2 <= 3**3
    for n in range(1, 8):
        assert surjection_count(n, n) == math.factorial(n)
    with pytest.raises(ValueError):
        surjection_count(3, 0)
    with pytest.raises(ValueError):
        surjection_count(2, 3)


def test_stirling_refined_bounds_exhaustive():
    for j in range(1, 21):
        for r in range(1, j + 1):
            verdict = stirling_refined_bound_check(j, r)
            assert verdict.binomial_ok
            if r < j:
                assert verdict.refined_ok is True
            else:
                assert verdict.refined_ok is None
            assert verdict.ok
    with pytest.raises(ValueError):
        stirling_refined_bound_check(21, 2)


def test_partition_classes_small():
    by_profile = {pc.multiplicities: pc for pc in partition_classes(2)}
    assert by_profile[(2,)].count == 1 and by_profile[(2,)].r == 1
    assert by_profile[(1, 1)].count == 1 and by_profile[(1, 1)].r == 2

    classes4 = {pc.multiplicities: pc for pc in partition_classes(4)}
    assert classes4[(4,)].count == 1
    assert classes4[(3, 1)].count == 4
    assert classes4[(2, 2)].count == 3
    assert classes4[(2, 1, 1)].count == 6
    assert classes4[(1, 1, 1, 1)].count == 1
    # the two r = 2 profiles together realize S(4, 2) = 7
    assert classes4[(3, 1)].count + classes4[(2, 2)].count == stirling2(4, 2)
    assert classes4[(3, 1)].r_odd == 2
    assert classes4[(2, 2)].r_odd == 0


def test_partition_classes_sum_to_stirling_and_bell():
    for j in range(1, 9):
        classes = partition_classes(j)
        per_r: dict[int, int] = {}
        for pc in classes:
            per_r[pc.r] = per_r.get(pc.r, 0) + pc.count
        for r, total in per_r.items():
            assert total == stirling2(j, r)
        assert sum(pc.count for pc in classes) == bell_number(j)
    with pytest.raises(ValueError):
        partition_classes(13)


def test_bell_numbers():
    for j, expect in enumerate(BELL):
        assert bell_number(j) == expect


def test_moment_bound_validation():
    with pytest.raises(ValueError):
        MomentBound(c=0.0, alpha=1.0, n_scale=1.0, k=2.0)
    with pytest.raises(ValueError):
        MomentBound(c=1.0, alpha=1.0, n_scale=1.0, k=0.5)
    mb = MomentBound(c=1.0, alpha=1.0, n_scale=1.0, k=1.0)
    with pytest.raises(ValueError):
        p_star(mb, 0.0)
    with pytest.raises(ValueError):
        tail_from_moments(mb, -1.0)


def test_tail_plug_in_value():
    """c = N = 1, k = 1, lam = 4e: p* = (4e/e)^2 = 16 and the bound equals
    e^2 exp(-16)."""
    mb = MomentBound(c=1.0, alpha=1.0, n_scale=1.0, k=1.0)
    lam = 4.0 * math.e
    assert p_star(mb, lam) == pytest.approx(16.0, rel=1e-12)
    expect = math.e**2 * math.exp(-16.0)
    assert tail_from_moments(mb, lam) == pytest.approx(expect, rel=1e-12)
    assert expect == pytest.approx(8.315e-07, rel=1e-3)


def test_tail_monotonicity():
    mb = MomentBound(c=0.7, alpha=1.0, n_scale=3.0, k=2.0)
    lams = [0.5, 1.0, 2.0, 4.0, 8.0]
    tails = [tail_from_moments(mb, lam) for lam in lams]
    assert all(a > b for a, b in zip(tails, tails[1:]))
    bigger_c = MomentBound(c=1.4, alpha=1.0, n_scale=3.0, k=2.0)
    for lam in lams:
        assert tail_from_moments(bigger_c, lam) > tail_from_moments(mb, lam)


def test_tail_scale_invariance():
    """Only the product N^alpha * lam enters: halving lam while doubling the
    scale leaves the bound unchanged."""
    a = MomentBound(c=0.9, alpha=1.0, n_scale=5.0, k=3.0)
    b = MomentBound(c=0.9, alpha=1.0, n_scale=10.0, k=3.0)
    for lam in (0.3, 1.0, 6.0):
        assert tail_from_moments(a, lam) == pytest.approx(
            tail_from_moments(b, lam / 2.0), rel=1e-12)


def test_p_star_clamped_at_p0():
    mb = MomentBound(c=5.0, alpha=1.0, n_scale=1.0, k=2.0, p0=2.0)
    assert p_star(mb, 1e-6) == 2.0
    # beyond the clamp point p* grows with lam
    assert p_star(mb, 1e3) > 2.0
