import math

import numpy as np
import pytest

from modematch import shapeopt as so
from modematch import wavepacket as wp
from modematch.errors import ConvergenceError


@pytest.fixture(scope="module")
def optimum():
    spec = so.OptimizeSpec(0.25)
    w, curv = so.optimize_shape(spec)
    return spec, w, curv


def test_optimum_is_the_gaussian_preset(optimum):
    spec, w, curv = optimum
    g = wp.build_preset(wp.PresetSpec("gaussian", domain=wp.NATIVE_X), grid=spec.grid)
    assert wp.l2_distance(w, g) < 1e-3
    assert so.gaussian_distance(w) < 1e-3
    assert abs(wp.moment(w, 2, centered=True) - 0.25) < 1e-8
    # <p^2> = 1 / (4 dx)
    assert curv == pytest.approx(1.0, abs=1e-4)
    assert so.uncertainty_product(w) == pytest.approx(0.25, abs=1e-4)


def test_optimum_is_real_symmetric_and_nodeless(optimum):
    _, w, _ = optimum
    s = w.samples
    assert np.all(s.imag == 0)
    # the first sample is the pinned boundary; the rest mirror about the centre
    assert np.max(np.abs(s[1:] - s[1:][::-1])) < 1e-8
    dens = np.abs(s) ** 2 * w.grid_step
    cdf = np.cumsum(dens)
    central = (cdf > 0.005) & (cdf < 0.995)
    assert np.all(s.real[central] > 0)


@pytest.mark.parametrize("variance", [1.0, 2.0])
def test_uncertainty_saturated(variance):
    w, curv = so.optimize_shape(so.OptimizeSpec(variance))
    assert curv == pytest.approx(1 / (4 * variance), rel=1e-4)
    assert so.uncertainty_product(w) == pytest.approx(0.25, abs=1e-4)


def test_scaling_symmetry():
    a, _ = so.optimize_shape(so.OptimizeSpec(0.5))
    b, _ = so.optimize_shape(so.OptimizeSpec(2.0))
    # the grids are dilations of each other by 2, so dilating a is a per-sample rescale
    assert b.grid_step == pytest.approx(2 * a.grid_step, rel=1e-14)
    assert np.max(np.abs(b.samples - a.samples / math.sqrt(2))) < 1e-6


def test_ground_state_variance_decreases_with_multiplier():
    spec = so.OptimizeSpec(1.0)
    lo, hi = spec.bracket
    mus = np.geomspace(lo, hi, 9)
    variances = [so.ground_state(spec, mu).variance for mu in mus]
    assert all(b < a for a, b in zip(variances, variances[1:]))


def test_bracket_must_straddle_target():
    with pytest.raises(ValueError):
        so.optimize_shape(so.OptimizeSpec(1.0, mu_bracket=(10.0, 20.0)))


def test_non_convergence_reported():
    with pytest.raises(ConvergenceError):
        so.optimize_shape(so.OptimizeSpec(1.0, max_bisections=2))


def test_spec_validation():
    with pytest.raises(ValueError):
        so.OptimizeSpec(0.0)
    with pytest.raises(ValueError):
        so.OptimizeSpec(1.0, mu_bracket=(2.0, 1.0))
    with pytest.raises(ValueError):
        so.OptimizeSpec(1.0, n_points=8)


def test_uncertainty_products_of_presets(dsl):
    assert so.uncertainty_product(dsl) > 0.26
    rect = wp.build_preset(wp.PresetSpec("rectangular"))
    assert so.uncertainty_product(rect) > 0.25


def test_gaussian_distance_values(gaussian, dsl):
    assert so.gaussian_distance(gaussian) < 1e-10
    assert so.gaussian_distance(dsl) > 1e-2


def test_other_packets_curve_more(optimum):
    _, _, best = optimum
    for kind in ("gaussian", "double_lorentzian", "rectangular", "one_sided_exponential"):
        w = so.preset_at_variance(kind, 0.25)
        assert wp.moment(w, 2, centered=True) == pytest.approx(0.25, rel=1e-9)
        assert wp.curvature(w, wp.NATIVE_SHIFT) >= best - 1e-6
    rng = np.random.default_rng(0)
    for _ in range(10):
        w = so.random_smooth_packet(rng, 0.25)
        assert wp.moment(w, 2, centered=True) == pytest.approx(0.25, rel=1e-9)
        assert wp.curvature(w, wp.NATIVE_SHIFT) >= best - 1e-6
    with pytest.raises(ValueError):
        so.preset_at_variance("lorentzian", 0.25)


def test_optimum_writes_csv(tmp_path, optimum):
    _, w, _ = optimum
    path = tmp_path / "psi.csv"
    wp.write_csv(w, path)
    back = wp.read_csv(path, domain=wp.NATIVE_X)
    assert wp.l2_distance(back, w) < 1e-12
