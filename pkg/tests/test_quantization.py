import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from somlab import quantization as q
from somlab.engine import GainSchedule
from somlab.stimuli import (DegenerateStateError, Density1D, Discrete, UniformBox,
                            linear_density, truncated_gaussian)
from somlab.topology import Neighborhood

U = UniformBox(0.0, 1.0)


def midpoints(n):
    return (2 * np.arange(1, n + 1) - 1) / (2.0 * n)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_uniform_midpoint_distortion(n):
    npt.assert_allclose(q.distortion(midpoints(n), U), 1 / (24 * n * n), rtol=1e-13)


def test_distortion_simple_values():
    npt.assert_allclose(q.distortion([0.0], U), 1 / 6, rtol=1e-15)
    # coinciding code points behave like a single one
    npt.assert_allclose(q.distortion([0.5, 0.5], U), 1 / 24, rtol=1e-15)
    val, se = q.distortion([0.5], U, method="mc", n_samples=100_000, return_se=True)
    assert abs(val - 1 / 24) < 4 * se


def test_planar_distortion():
    w = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])
    npt.assert_allclose(q.distortion(w, UniformBox([0, 0], [1, 1])), 1 / 48, rtol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.02, 0.98), min_size=2, max_size=6, unique=True),
       st.sampled_from(["uniform", "linear", "gaussian"]))
def test_gradient_matches_finite_differences(values, law):
    dist = {"uniform": U, "linear": linear_density(), "gaussian": truncated_gaussian()}[law]
    w = np.array(values)
    if np.min(np.abs(w[:, None] - w[None, :]) + np.eye(len(w))) < 1e-3:
        return
    g = q.distortion_gradient(w, dist)[:, 0]
    h = 1e-6
    fd = np.array([(q.distortion(w + h * e, dist) - q.distortion(w - h * e, dist)) / (2 * h)
                   for e in np.eye(len(w))])
    npt.assert_allclose(g, fd, atol=1e-8)


def test_gradient_needs_distinct_points():
    with pytest.raises(DegenerateStateError):
        q.distortion_gradient([0.3, 0.3], U)


def _two_point_linear_oracle():
    # f(x) = 2x: lower cell mean 2t/3, upper cell mean (2/3)(1 + t + t^2)/(1 + t)
    lo = lambda t: 2 * t / 3
    hi = lambda t: 2 * (1 + t + t * t) / (3 * (1 + t))
    t = optimize.bisect(lambda t: t - 0.5 * (lo(t) + hi(t)), 0.1, 0.9, xtol=1e-15)
    return np.array([lo(t), hi(t)])


def test_two_point_optimum_of_the_linear_density():
    rep = q.optimal_quantizer_1d(2, linear_density())
    npt.assert_allclose(rep.state[:, 0], _two_point_linear_oracle(), atol=1e-12)
    npt.assert_allclose(rep.state[:, 0], [0.412022659166, 0.824045318332], atol=1e-11)


@pytest.mark.parametrize("n", [3, 10])
def test_uniform_optimum_is_the_midpoint_grid(n):
    rep = q.optimal_quantizer_1d(n, U)
    npt.assert_allclose(rep.state[:, 0], midpoints(n), atol=1e-12)
    npt.assert_allclose(rep.masses, 1.0 / n, atol=1e-12)
    assert rep.distinct


def test_optimum_needs_log_concavity():
    with pytest.raises(ValueError):
        q.optimal_quantizer_1d(3, Density1D(lambda x: 1.5 * (2 * x - 1) ** 2 + 0.5))


@pytest.mark.parametrize("n", [2, 4, 8])
def test_quantized_measure_of_midpoints(n):
    rep = q.optimal_quantizer_1d(n, U)
    qm = q.quantized_measure(rep, U)
    npt.assert_allclose(qm.f_distance, 1 / (12 * n * n), rtol=1e-12)
    npt.assert_allclose(qm.ks_distance, 1 / (2 * n), rtol=1e-12)


def test_quantized_measure_of_the_linear_density_against_quadrature():
    from scipy import integrate
    rep = q.optimal_quantizer_1d(3, linear_density())
    atoms, cum = rep.state[:, 0], np.cumsum(rep.masses)
    Fn = lambda x: cum[np.searchsorted(atoms, x, side="right") - 1] if x >= atoms[0] else 0.0
    pts = list(atoms)
    ref, _ = integrate.quad(lambda x: (Fn(x) - x * x) ** 2, 0, 1, points=pts, epsabs=1e-14)
    npt.assert_allclose(q.quantized_measure(rep, linear_density()).f_distance, ref, rtol=1e-9)


def test_quantized_integration():
    for n in (10, 20):
        val = q.quantize_integrate(lambda x: x ** 2, q.midpoint_quantizer(n))
        npt.assert_allclose(val, 1 / 3 - 1 / (12 * n * n), rtol=1e-14)
    rows = q.integration_study(lambda x: x ** 2, 1 / 3, [10, 20, 40])
    npt.assert_allclose([r["ratio"] for r in rows[1:]], [4.0, 4.0], rtol=1e-9)


def test_zero_neighbor_training_needs_robbins_monro():
    with pytest.raises(ValueError):
        q.train_0neighbor(U, 4, GainSchedule.constant(0.1), 10, np.random.default_rng(0))


def test_zero_neighbor_training_small():
    rep = q.train_0neighbor(U, 2, GainSchedule.power(100, 2000, 1), 200_000, np.random.default_rng(0))
    npt.assert_allclose(np.sort(rep.state[:, 0]), [0.25, 0.75], atol=2e-2)


def test_zador_scan_one_dimensional():
    rows = q.zador_scan([2, 4], U)
    npt.assert_allclose([r["scaled_distortion"] for r in rows], 1 / 24, rtol=1e-12)


def test_best_local_quantizer_in_the_square():
    rep = q.best_local_quantizer(4, UniformBox([0, 0], [1, 1]), 4, np.random.default_rng(0))
    npt.assert_allclose(rep.distortion, 1 / 48, rtol=1e-6)
    npt.assert_allclose(rep.scaled_distortion, 4 / 48, rtol=1e-6)


def test_magnification_of_uniform_is_flat():
    rep = q.magnification_experiment(U, 6)
    npt.assert_allclose([r["spacing_density"] for r in rep.density_rows], 1.0, rtol=1e-10)
    npt.assert_allclose([r["zador_density"] for r in rep.density_rows], 1.0, rtol=1e-10)
    assert len(rep.measure_rows) == 6


def test_discrete_potential():
    d = Discrete([0.0, 0.2, 0.5, 0.9, 1.0])
    w = np.array([0.1, 0.6, 0.95])
    # 0-neighbor potential is the distortion
    npt.assert_allclose(q.discrete_potential(w, d, Neighborhood.indicator0()), q.distortion(w, d))
    # winners 0, 0, 1, 2, 2; step(1) adds the lattice neighbors of each winner
    by_hand = 0.5 * np.mean([0.01 + 0.36, 0.01 + 0.16, 0.16 + 0.01 + 0.2025,
                             0.09 + 0.0025, 0.16 + 0.0025])
    npt.assert_allclose(q.discrete_potential(w, d, Neighborhood.step(1)), by_hand, rtol=1e-14)
