import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atlab.noise import (
    NoiseKind,
    NoiseSpec,
    initial_perturbation,
    min_pairwise_distance,
    sign_normal_noise,
    tile_design,
    tlhs_design,
    uniform_noise,
)

EPS = 8.0 / 255.0


def strata_of(design, m, radius):
    return np.floor(m * (design + radius) / (2.0 * radius)).astype(int)


def test_uniform_within_augmented_radius():
    # radius = k * eps with k = 2
    mat = uniform_noise(50, 30, 2 * EPS, seed=0)
    assert np.all(mat >= -2 * EPS)
    assert np.all(mat < 2 * EPS)


def test_uniform_mean_within_clt_bound():
    n = 100_000
    radius = 0.1
    mat = uniform_noise(100, n // 100, radius, seed=1)
    # variance of U(-r, r) is r^2 / 3
    sigma_mean = radius / np.sqrt(3.0 * n)
    assert abs(mat.mean()) < 3.0 * sigma_mean


def test_uniform_deterministic_per_seed():
    assert np.array_equal(uniform_noise(8, 5, 0.3, seed=9), uniform_noise(8, 5, 0.3, seed=9))


@pytest.mark.parametrize("radius", [0.0, -1.0])
def test_uniform_rejects_nonpositive_radius(radius):
    with pytest.raises(ValueError, match="radius"):
        uniform_noise(4, 4, radius, seed=0)


def test_tlhs_single_row_spans_whole_box():
    vals = np.concatenate([tlhs_design(1, 16, 0.5, seed=s)[0] for s in range(40)])
    assert np.all(vals >= -0.5)
    assert np.all(vals < 0.5)
    # single stratum = the whole range; draws should fill it
    assert vals.min() < -0.3 and vals.max() > 0.3


def test_tlhs_m4_d1_hits_four_distinct_strata():
    design = tlhs_design(4, 1, EPS, seed=5)
    s = strata_of(design, 4, EPS)
    assert sorted(s[:, 0].tolist()) == [0, 1, 2, 3]


@settings(max_examples=60, deadline=None)
@given(m=st.integers(2, 8), d=st.integers(1, 12), seed=st.integers(0, 10_000))
def test_tlhs_stratification_property(m, d, seed):
    design = tlhs_design(m, d, EPS, seed=seed)
    s = strata_of(design, m, EPS)
    expect = np.arange(m)
    for j in range(d):
        assert np.array_equal(np.sort(s[:, j]), expect)


def test_tlhs_marginal_range_half_open():
    design = tlhs_design(6, 200, EPS, seed=3)
    assert np.all(design >= -EPS)
    assert np.all(design < EPS)


def test_tlhs_linear_in_radius_exact_for_pow2():
    base = tlhs_design(5, 7, EPS, seed=12)
    for c in (2.0, 4.0, 0.5):
        assert np.array_equal(tlhs_design(5, 7, c * EPS, seed=12), c * base)


def test_tlhs_linear_in_radius_general():
    base = tlhs_design(5, 7, EPS, seed=12)
    c = 3.0
    assert np.allclose(tlhs_design(5, 7, c * EPS, seed=12), c * base, rtol=1e-15, atol=0)


def test_tile_order_blocks_by_duplicate():
    design = np.array([[1.0, 2.0], [3.0, 4.0]])
    tiled = tile_design(design, 3)
    expect = np.array([[1, 2], [1, 2], [1, 2], [3, 4], [3, 4], [3, 4]], dtype=float)
    assert np.array_equal(tiled, expect)


def test_tile_m1_stacks_single_row():
    design = np.array([[7.0, 8.0, 9.0]])
    tiled = tile_design(design, 4)
    assert tiled.shape == (4, 3)
    assert np.all(tiled == design[0])


def test_tile_rows_within_block_identical():
    design = tlhs_design(3, 5, 0.2, seed=1)
    n = 4
    tiled = tile_design(design, n)
    for j in range(3):
        block = tiled[j * n : (j + 1) * n]
        assert np.all(block == block[0])


def test_tile_layout_validation():
    design = np.ones((2, 3))
    out = tile_design(design, 2, batch_shape=(4, 3))
    assert out.shape == (4, 3)
    with pytest.raises(ValueError, match="layout"):
        tile_design(design, 2, batch_shape=(5, 3))


def test_sign_normal_entries_exactly_pm_step():
    step = 0.031
    mat = sign_normal_noise(20, 50, step, seed=2)
    assert np.all(np.abs(mat) == step)


def test_sign_normal_balance():
    mat = sign_normal_noise(200, 500, 1.0, seed=4)
    n = mat.size
    frac_pos = np.mean(mat > 0)
    assert abs(frac_pos - 0.5) < 3.0 * np.sqrt(0.25 / n)


def test_sign_normal_rejects_zero_step():
    with pytest.raises(ValueError, match="step"):
        sign_normal_noise(4, 4, 0.0, seed=0)


def test_min_pairwise_distance_hand_case():
    pts = np.array([[0.0, 0.0], [3.0, 4.0], [10.0, 10.0]])
    assert min_pairwise_distance(pts) == pytest.approx(5.0)


def test_min_pairwise_distance_identical_rows():
    assert min_pairwise_distance(np.array([[1.0, 2.0], [1.0, 2.0]])) == 0.0


def test_min_pairwise_distance_scaling_homogeneous():
    rng = np.random.default_rng(6)
    pts = rng.normal(size=(5, 8))
    d0 = min_pairwise_distance(pts)
    assert min_pairwise_distance(2.5 * pts) == pytest.approx(2.5 * d0, rel=1e-12)


def test_min_pairwise_distance_needs_two_rows():
    with pytest.raises(ValueError):
        min_pairwise_distance(np.ones((1, 4)))


def test_tlhs_dominates_uniform_small_version():
    # directional mini-version of the space-filling benchmark
    tl, un = [], []
    for seed in range(200):
        tl.append(min_pairwise_distance(tlhs_design(3, 256, EPS, seed)))
        un.append(min_pairwise_distance(uniform_noise(3, 256, EPS, seed + 10_000)))
    assert np.mean(tl) > np.mean(un)


def test_initial_perturbation_dispatch():
    spec = NoiseSpec(NoiseKind.TLHS, radius=EPS, m=3, seed=7)
    delta = initial_perturbation(spec, n=4, d=6)
    assert delta.shape == (12, 6)
    design = tlhs_design(3, 6, EPS, seed=7)
    assert np.array_equal(delta, tile_design(design, 4))

    uspec = NoiseSpec(NoiseKind.UNIFORM, radius=0.2, m=2, seed=8)
    assert np.array_equal(initial_perturbation(uspec, 3, 5), uniform_noise(6, 5, 0.2, seed=8))


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(NoiseKind.UNIFORM, radius=-0.1)
    with pytest.raises(ValueError):
        NoiseSpec(NoiseKind.UNIFORM, radius=0.1, m=0)
