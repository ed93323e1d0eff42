import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

from somlab import meanfield as mf
from somlab.engine import NetworkState
from somlab.stimuli import UniformBox, linear_density, truncated_gaussian
from somlab.topology import Lattice, Neighborhood

U = UniformBox(0.0, 1.0)
MSTAR = np.array([0.3, 0.5, 0.7])


def field(n=3, nb="step(1)", dist=U, **kw):
    return mf.MeanField(Lattice.string(n), Neighborhood.from_name(nb), dist, **kw)


def test_h_by_hand():
    # cells [0, 0.4] and [0.4, 1]
    h = field(2, "indicator-0")(np.array([0.2, 0.6])).value
    npt.assert_allclose(h[:, 0], [0.0, -0.06], atol=1e-16)


def test_h_vanishes_at_the_three_unit_equilibrium():
    assert np.max(np.abs(field()(MSTAR).value)) < 1e-15


def test_jacobian_at_the_three_unit_equilibrium():
    jac = mf.jacobian_h(field(), MSTAR)
    expected = np.array([[0.6, -0.15, -0.15],
                         [0.0, 1.0, 0.0],
                         [-0.15, -0.15, 0.6]])
    npt.assert_allclose(jac.matrix, expected, atol=1e-9)
    npt.assert_allclose(np.sort(jac.flow_eigenvalues().real), [-1.0, -0.75, -0.45], atol=1e-9)
    assert jac.flagged == []


def test_solve_equilibrium_and_report():
    rep = mf.solve_equilibrium(field(), NetworkState.from_values([0.1, 0.4, 0.95]))
    npt.assert_allclose(rep.state[:, 0], MSTAR, atol=1e-12)
    assert rep.verdict == "stable"
    assert rep.cooperative
    npt.assert_allclose(rep.top_real_parts(1), [-0.45], atol=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 9), st.integers(0, 3))
def test_linear_system_matches_newton(n, k):
    nb = Neighborhood.step(k)
    lin = mf.uniform_limit_linear_system(n, nb).weights[:, 0]
    if np.any(np.diff(lin) <= 1e-9):
        return  # coinciding solution: the cell structure assumed by the system breaks down
    m = mf.MeanField(Lattice.string(n), nb, U)
    assert np.max(np.abs(m(lin).value)) < 1e-13
    rep = mf.solve_equilibrium(m, NetworkState.from_values(lin + 1e-4 * np.sin(np.arange(n))))
    npt.assert_allclose(rep.state[:, 0], lin, atol=1e-10)


def test_linear_system_small_cases():
    npt.assert_allclose(mf.uniform_limit_linear_system(3, Neighborhood.step(1)).weights[:, 0], MSTAR,
                        atol=1e-15)
    npt.assert_allclose(mf.uniform_limit_linear_system(4, Neighborhood.indicator0()).weights[:, 0],
                        [0.125, 0.375, 0.625, 0.875], atol=1e-15)
    with pytest.raises(ValueError):
        mf.uniform_limit_linear_system(3, Neighborhood.table([1.0, 0.5]))


def test_ode_flow_reaches_the_equilibrium():
    res = mf.ode_flow(field(), np.array([0.1, 0.2, 0.9]), 60.0)
    npt.assert_allclose(res.final[:, 0], MSTAR, atol=1e-9)
    assert res.times[0] == 0.0 and res.times[-1] == 60.0
    same = mf.ode_flow(field(), np.array([0.1, 0.2, 0.9]), 0.0)
    npt.assert_array_equal(same.final[:, 0], [0.1, 0.2, 0.9])


def test_monte_carlo_field_agrees_with_exact():
    w = np.array([0.15, 0.45, 0.8])
    exact = field()(w).value
    noisy = field(policy="monte-carlo", n_samples=200_000, seed=3)(w)
    assert np.all(np.abs(noisy.value - exact) <= 4 * noisy.se)
    with pytest.raises(ValueError):
        mf.solve_equilibrium(field(policy="monte-carlo"), w)


def test_quadrature_policy_matches_closed_form():
    g = truncated_gaussian()
    w = np.array([0.2, 0.35, 0.5, 0.9])
    a = field(4, "step(1)", g)(w).value
    b = field(4, "step(1)", g, policy="quadrature-1d")(w).value
    npt.assert_allclose(a, b, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.01, 0.99), min_size=5, max_size=5, unique=True),
       st.sampled_from(["uniform", "gaussian", "linear"]))
def test_cooperativity_on_ordered_states(values, law):
    dist = {"uniform": U, "gaussian": truncated_gaussian(), "linear": linear_density()}[law]
    w = np.sort(values)
    if np.min(np.diff(w)) < 1e-3:
        return
    jac = mf.jacobian_h(field(5, "step(1)", dist), w)
    assert jac.off_diagonal_max() <= 1e-8


def test_stability_verdict_band():
    assert mf.stability_verdict(-1e-3) == "stable"
    assert mf.stability_verdict(1e-3) == "unstable"
    assert mf.stability_verdict(1e-10) == "inconclusive"


def test_grid_state_layout():
    g = mf.grid_state([[0.1, 0.2], [0.7, 0.8, 0.9]])
    assert g.lattice.dims == (2, 3)
    npt.assert_array_equal(g.weights[g.lattice.index(1, 2)], [0.2, 0.9])


def test_grid_equilibrium_residual():
    g = mf.grid_state([MSTAR, MSTAR])
    m = mf.MeanField(g.lattice, Neighborhood.indicator8(), UniformBox([0, 0], [1, 1]))
    assert np.max(np.abs(m(g).value)) < 1e-12


def test_grid_sweep_verdicts():
    rows = mf.grid_stability_sweep([(2, 2), (4, 2)], Neighborhood.indicator0())
    assert [r["verdict"] for r in rows] == ["stable", "unstable"]
    assert all(r["residual"] < 1e-12 for r in rows)


def test_dimension_selection_closed_form_and_thin_noise():
    flat = mf.dimension_selection_experiment(MSTAR, Neighborhood.step(1), U, 0.0)
    # transverse rates sum_j Lambda(i, j) mu(C_j) with masses (0.4, 0.2, 0.4)
    npt.assert_allclose(np.sort(flat.eigenvalues.real), [-1, -1, -0.75, -0.6, -0.6, -0.45], atol=1e-9)
    thin = mf.dimension_selection_experiment(MSTAR, Neighborhood.step(1), U, 0.01)
    npt.assert_allclose(np.sort(thin.eigenvalues.real), np.sort(flat.eigenvalues.real), atol=1e-3)
    assert thin.verdict == "stable"
    with pytest.raises(ValueError):
        mf.dimension_selection_experiment(MSTAR, Neighborhood.step(1), U, -0.1)
