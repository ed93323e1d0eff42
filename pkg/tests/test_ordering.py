import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, strategies as st

from somlab import meanfield
from somlab.engine import NetworkState
from somlab.ordering import (classify_1d, classify_fpp, exit_time_experiment,
                             hitting_time_experiment, invariant_concentration_experiment)
from somlab.stimuli import UniformBox
from somlab.topology import Lattice, Neighborhood

U = UniformBox(0.0, 1.0)
SQUARE = UniformBox([0, 0], [1, 1])


@pytest.mark.parametrize("values, status", [
    ((0.1, 0.2, 0.3), "increasing"),
    ((0.3, 0.2, 0.9), "unordered"),
    ((0.7, 0.1), "decreasing"),
    ((0.2, 0.2, 0.5), "unordered"),
])
def test_classify_1d(values, status):
    assert classify_1d(NetworkState.from_values(values)).status == status


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=10))
def test_reversal_swaps_increasing_and_decreasing(values):
    v = classify_1d(np.array(values)).status
    r = classify_1d(np.array(values[::-1])).status
    swap = {"increasing": "decreasing", "decreasing": "increasing", "unordered": "unordered"}
    assert r == swap[v]


def test_classify_1d_rejects_planar_states():
    with pytest.raises(ValueError):
        classify_1d(np.zeros((3, 2)))


def test_classify_fpp():
    g = NetworkState(np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float), Lattice.grid(2, 2))
    assert classify_fpp(g)
    swapped = NetworkState(g.weights[[1, 0, 2, 3]], g.lattice)
    assert not classify_fpp(swapped)
    assert classify_fpp(meanfield.grid_state([[0.3, 0.5, 0.7]] * 2))
    with pytest.raises(ValueError):
        classify_fpp(NetworkState(np.zeros((6, 2)), Lattice.grid(3, 2)))


def test_ordered_starts_hit_at_time_zero():
    rep = hitting_time_experiment(Lattice.string(6), U, Neighborhood.step(1), 0.1, 5, 100, seed=1,
                                  start="ordered")
    npt.assert_array_equal(rep.times, 0)
    two = hitting_time_experiment(Lattice.string(2), U, Neighborhood.step(1), 0.1, 5, 100, seed=1)
    npt.assert_array_equal(two.times, 0)


def test_hitting_report_is_deterministic_and_worker_independent():
    args = (Lattice.string(5), U, Neighborhood.step(1), 0.1, 8, 50_000)
    a = hitting_time_experiment(*args, seed=9)
    b = hitting_time_experiment(*args, seed=9, workers=3)
    npt.assert_array_equal(a.times, b.times)
    s = a.summary()
    assert s["count_finite"] == 8 and s["max"] <= 50_000
    npt.assert_allclose(s["mean"], a.times.mean())
    assert [r["seed"] for r in a.rows()] == [9 ^ k for k in range(8)]


def test_timeouts_are_recorded():
    rep = hitting_time_experiment(Lattice.string(10), U, Neighborhood.step(1), 0.1, 3, 5, seed=0)
    assert np.all(rep.times == -1)
    assert rep.summary()["timeouts"] == 3


def test_frozen_process_never_exits():
    rep = exit_time_experiment(Lattice.string(5), U, Neighborhood.step(1), 0.0, 10, 1000, seed=0)
    assert rep.count_finite == 0


def test_exit_needs_an_organized_start():
    with pytest.raises(ValueError):
        exit_time_experiment(Lattice.string(3), U, Neighborhood.step(1), 0.1, 1, 10, seed=0,
                             start=NetworkState.from_values([0.5, 0.1, 0.9]))


def test_grid_exit_can_be_recorded():
    start = meanfield.grid_state([[0.3, 0.5, 0.7]] * 2)
    rep = exit_time_experiment(Lattice.grid(3, 3), SQUARE, Neighborhood.indicator8(), 0.2, 400, 1000,
                               seed=11, start=start)
    assert rep.count_finite >= 1
    assert rep.event == "exit"


def test_concentration_table():
    rows = invariant_concentration_experiment([0.1, 0.01], [0.3, 0.5, 0.7], U, Neighborhood.step(1),
                                              2000, 0, seed=4)
    assert all(r.mean_distance == r.final_distance for r in rows)
    again = invariant_concentration_experiment([0.1], [0.3, 0.5, 0.7], U, Neighborhood.step(1),
                                               2000, 0, seed=4)
    assert again[0].mean_distance == rows[0].mean_distance


def test_trial_csv(tmp_path):
    rep = hitting_time_experiment(Lattice.string(4), U, Neighborhood.step(1), 0.1, 3, 10_000, seed=2)
    rep.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "trial,seed,tau" and len(lines) == 4
