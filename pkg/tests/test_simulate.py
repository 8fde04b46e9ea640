import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rcbar.estimate import empirical_moment
from rcbar.model import BivariateGaussian, Degenerate, GaussianInitial, ModelSpec, derive_moment_set
from rcbar.simulate import (
    UNIFORMS_PER_PAIR,
    RngStream,
    mix_seed,
    mix_seeds,
    pairs_from_uniforms,
    sample_pair,
    simulate_tree,
    splitmix64,
)
from rcbar.theory import s_moments

from conftest import noise_free_spec, random_valid_specs, reference_spec, valid_specs


def test_splitmix64_known_value():
    # first output of the reference SplitMix64 generator seeded with 0
    assert splitmix64(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF


def test_mix_seed_vectorised_agrees():
    r = np.arange(1000)
    assert mix_seeds(12345, r).tolist() == [mix_seed(12345, int(i)) for i in r]


def test_mix_seeds_distinct_on_a_million_replicates():
    seeds = mix_seeds(0xDEADBEEF, np.arange(10**6))
    assert np.unique(seeds).size == 10**6


def test_uniforms_strictly_inside_unit_interval():
    u = RngStream(7).uniforms(10**6)
    assert u.min() > 0.0 and u.max() < 1.0


def test_uniform_extremes_stay_finite_under_inverse_cdf():
    law = BivariateGaussian(0, 0, 1, 1, 0)
    lo = 2.0**-53
    hi = (2.0**53 - 1) * 2.0**-53
    x, y = law.from_uniforms(np.array([lo, hi]), np.array([hi, lo]))
    assert np.all(np.isfinite(x)) and np.all(np.isfinite(y))


def test_stream_is_seed_deterministic():
    assert np.array_equal(RngStream(99).uniforms(50), RngStream(99).uniforms(50))
    assert not np.array_equal(RngStream(99).uniforms(50), RngStream(100).uniforms(50))


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_stream_rejects_out_of_range_seed(seed):
    with pytest.raises(ValueError):
        RngStream(seed)


def test_sample_pair_degenerate():
    assert sample_pair(Degenerate(0.5, 0.7), RngStream(1)) == (0.5, 0.7)


def test_sample_pair_consumes_fixed_uniforms():
    a, b = RngStream(5), RngStream(5)
    sample_pair(Degenerate(0, 0), a)
    b.uniforms(UNIFORMS_PER_PAIR)
    assert np.array_equal(a.uniforms(3), b.uniforms(3))


def test_sample_pair_same_seed_same_draw():
    law = BivariateGaussian(1, 2, 0.5, 3.0, 0.3)
    assert sample_pair(law, RngStream(8)) == sample_pair(law, RngStream(8))


def test_uncorrelated_gaussian_pairs():
    n = 10**6
    d = pairs_from_uniforms(BivariateGaussian(0, 0, 1, 1, 0), RngStream(2).uniforms(2 * n).reshape(n, 2))
    assert abs(np.corrcoef(d.T)[0, 1]) < 3 / math.sqrt(n)


def test_correlated_gaussian_pairs():
    n = 10**6
    law = BivariateGaussian(1.0, -2.0, 0.5, 2.0, -0.6)
    d = pairs_from_uniforms(law, RngStream(3).uniforms(2 * n).reshape(n, 2))
    cov = np.cov(d.T)
    np.testing.assert_allclose(d.mean(axis=0), [1.0, -2.0], atol=5 * 2.0 / math.sqrt(n))
    np.testing.assert_allclose(cov, [[0.25, -0.6], [-0.6, 4.0]], rtol=0.01, atol=0.005)


def test_noise_free_tree_by_hand():
    tree = simulate_tree(noise_free_spec(), 2, 0)
    assert tree.values.tolist() == [1, 1.5, 1.5, 1.75, 1.75, 1.75, 1.75]


def test_noise_free_tree_matches_closed_form():
    # every node of generation g equals 2 - 2**-g
    tree = simulate_tree(noise_free_spec(), 12, 3)
    np.testing.assert_array_equal(tree.values, 2.0 - 2.0 ** -tree.generations().astype(float))


def test_same_seed_bitwise_identical():
    spec = reference_spec()
    assert simulate_tree(spec, 8, 42) == simulate_tree(spec, 8, 42)
    assert simulate_tree(spec, 8, 42) != simulate_tree(spec, 8, 43)


@given(valid_specs(), st.integers(1, 7), st.integers(0, 2**64 - 1))
def test_extension_keeps_existing_nodes(spec, n, seed):
    short = simulate_tree(spec, n, seed)
    longer = simulate_tree(spec, n + 1, seed)
    assert np.array_equal(longer.values[: len(short)], short.values)


def test_generation_count_domain():
    with pytest.raises(ValueError):
        simulate_tree(reference_spec(), 0, 1)


def test_gaussian_initial_is_drawn():
    spec = ModelSpec(Degenerate(0.5, 0.5), Degenerate(1, 1), GaussianInitial(0.0, 1.0))
    roots = {simulate_tree(spec, 1, s).x(1) for s in range(20)}
    assert len(roots) == 20


def test_deep_tree_mean_near_s1():
    tree = simulate_tree(reference_spec(), 16, 2024)
    assert empirical_moment(tree, 1) == pytest.approx(2.0, rel=0.02)


@pytest.mark.slow
@pytest.mark.parametrize("spec", random_valid_specs(3, 11) + [reference_spec()])
def test_tree_averages_match_s_moments(spec):
    s = s_moments(derive_moment_set(spec), 4)
    avgs = np.array([[empirical_moment(simulate_tree(spec, 16, 7000 + r), p) for p in range(1, 5)] for r in range(20)])
    mean = avgs.mean(axis=0)
    sem = avgs.std(axis=0, ddof=1) / math.sqrt(avgs.shape[0])
    for p in range(1, 5):
        assert abs(mean[p - 1] - s[p]) <= 5 * sem[p - 1], (p, mean[p - 1], s[p], sem[p - 1])
