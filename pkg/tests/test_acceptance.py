"""Acceptance criteria, each at its stated scale and tolerance.

Every test prints one PASS/FAIL line; the lines are repeated at the end of
the pytest run.  Run just this file with::

    pytest tests/test_acceptance.py -v
"""

import warnings

import numpy as np

from somlab import categorical, meanfield, quantization
from somlab import _kernels
from somlab.engine import GainSchedule, NetworkState
from somlab.ordering import exit_time_experiment, hitting_time_experiment, \
    invariant_concentration_experiment
from somlab.stimuli import UniformBox, linear_density, truncated_gaussian
from somlab.topology import Lattice, Neighborhood

U = UniformBox(0.0, 1.0)
SQUARE = UniformBox([0.0, 0.0], [1.0, 1.0])
MSTAR = np.array([0.3, 0.5, 0.7])


def midpoints(n):
    return (2 * np.arange(1, n + 1) - 1) / (2.0 * n)


def random_ordered(rng, n, min_gap=1e-3):
    while True:
        w = np.sort(rng.random(n))
        if np.min(np.diff(w)) >= min_gap:
            return w


def test_01_ordering_is_reached(criterion):
    rep = hitting_time_experiment(Lattice.string(10), U, Neighborhood.step(1), 0.1,
                                  trials=200, budget=10 ** 6, seed=1)
    s = rep.summary()
    criterion(1, "ordering within 1e6 steps (n=10, step(1), eps=0.1)", s["count_finite"] == 200,
              f"{s['count_finite']}/200 ordered, median tau {s['median']:.0f}, max {s['max']}")


def test_02_ordered_set_is_absorbing(criterion):
    rep = exit_time_experiment(Lattice.string(10), U, Neighborhood.step(1), 0.1,
                               trials=50, budget=10 ** 6, seed=2, start="ordered")
    criterion(2, "no exit from the ordered set (50 x 1e6 steps)", rep.count_finite == 0,
              f"{rep.count_finite} exits")


def test_03_decreasing_gain_convergence(criterion):
    from somlab.engine import run, trial_rng
    lattice = Lattice.string(3)
    within = 0
    for k in range(100):
        rng = trial_rng(3, k)
        st = NetworkState.ordered(lattice, U, rng)
        final = run(st, U, GainSchedule.power(1, 100, 1), Neighborhood.step(1), 10 ** 6, rng).state
        within += np.max(np.abs(final.weights[:, 0] - MSTAR)) <= 1e-2
    criterion(3, "eps_t = 1/(100+t) reaches (0.3, 0.5, 0.7) within 1e-2", within >= 95,
              f"{within}/100 trials")


def test_04_zero_neighbor_optimum(criterion):
    n = 10
    target = midpoints(n)
    devs = []
    for seed in range(5):
        rep = quantization.train_0neighbor(U, n, GainSchedule.power(1000, 1e5, 1), 10 ** 6,
                                           np.random.default_rng(seed))
        devs.append(np.max(np.abs(rep.state[:, 0] - target)))
    mf = meanfield.MeanField(Lattice.string(n), Neighborhood.indicator0(), U)
    start = target + 0.02 * np.sin(np.arange(n))
    eq = meanfield.solve_equilibrium(mf, NetworkState.from_values(start))
    gap = np.max(np.abs(eq.state[:, 0] - target))
    ok = max(devs) <= 1e-2 and gap <= 1e-8
    criterion(4, "0-neighbor SOM and Newton find (2i-1)/20", ok,
              f"worst trained deviation {max(devs):.2e} over 5 runs, Newton gap {gap:.1e}")


def test_05_distortion_scaling(criterion):
    errs = []
    for n in (2, 4, 8, 16):
        rep = quantization.optimal_quantizer_1d(n, U)
        errs.append(abs(n * n * rep.distortion - 1 / 24) * 24)
        errs.append(abs(n * n * quantization.distortion(midpoints(n), U) - 1 / 24) * 24)
    lin = linear_density()
    s32 = quantization.optimal_quantizer_1d(32, lin).scaled_distortion
    s64 = quantization.optimal_quantizer_1d(64, lin).scaled_distortion
    change = abs(s64 - s32) / s32
    ok = max(errs) < 1e-12 and change < 0.10
    criterion(5, "n^2 V_n = 1/24 (uniform) and settling for f = 2x", ok,
              f"max relative error {max(errs):.1e}, f=2x change 32->64 {change:.2%}")


def test_06_gradient_consistency(criterion):
    rng = np.random.default_rng(6)
    laws = [U, linear_density(), truncated_gaussian()]
    worst = 0.0
    for k in range(20):
        dist = laws[k % 3]
        w = random_ordered(rng, 2 + k % 7, min_gap=0.01)
        rng.shuffle(w)
        g = quantization.distortion_gradient(w, dist)[:, 0]
        h = 1e-6
        fd = np.array([(quantization.distortion(w + h * e, dist) - quantization.distortion(w - h * e, dist))
                       / (2 * h) for e in np.eye(len(w))])
        worst = max(worst, np.max(np.abs(g - fd)) / np.max(np.abs(g)))
    criterion(6, "grad V_n against central differences", worst <= 1e-5,
              f"worst relative error {worst:.1e} over 20 states")


def test_07_one_step_drift(criterion):
    rng = np.random.default_rng(7)
    n, eps, N = 3, 0.1, 100_000
    nb = Neighborhood.step(1)
    lam = nb.matrix(Lattice.string(n))
    mf = meanfield.MeanField(Lattice.string(n), nb, U)
    gains = np.array([eps])
    cw, idx = np.ones((1, 1)), np.zeros(1, dtype=np.int64)
    worst = 0.0
    for _ in range(10):
        w0 = rng.random((n, 1))
        xs = U.sample(rng, N)
        moves = np.empty((N, n))
        for s in range(N):
            w = w0.copy()
            _kernels.som_steps(w, xs[s:s + 1], gains, lam, cw, idx)
            moves[s] = w[:, 0] - w0[:, 0]
        se = moves.std(axis=0, ddof=1) / np.sqrt(N)
        z = np.abs(moves.mean(axis=0) + eps * mf(w0).value[:, 0]) / se
        worst = max(worst, float(z.max()))
    criterion(7, "empirical one-step drift = -eps h(m)", worst <= 3.0,
              f"largest deviation {worst:.2f} standard errors over 10 states")


def test_08_cooperativity(criterion):
    rng = np.random.default_rng(8)
    worst = -np.inf
    for dist in (U, truncated_gaussian()):
        mf = meanfield.MeanField(Lattice.string(5), Neighborhood.step(1), dist)
        for _ in range(20):
            worst = max(worst, meanfield.jacobian_h(mf, random_ordered(rng, 5)).off_diagonal_max())
    criterion(8, "off-diagonal dh_i/dm_j <= 1e-8 on ordered states", worst <= 1e-8,
              f"largest off-diagonal entry {worst:.2e} (40 states)")


def test_09_grid_equilibrium(criterion):
    g = meanfield.grid_state([MSTAR, MSTAR])
    mf = meanfield.MeanField(g.lattice, Neighborhood.indicator8(), SQUARE)
    res = float(np.max(np.abs(mf(g).value)))
    criterion(9, "3x3 product state is an equilibrium (indicator-8)", mf.policy == "planar" and res < 1e-6,
              f"|h|_inf = {res:.1e}")


def test_10_grid_order_is_not_absorbing(criterion):
    start = meanfield.grid_state([MSTAR, MSTAR])
    rep = exit_time_experiment(Lattice.grid(3, 3), SQUARE, Neighborhood.indicator8(), 0.2,
                               trials=10 ** 4, budget=10 ** 3, seed=10, start=start)
    criterion(10, "exit from the doubly increasing set", rep.count_finite >= 1,
              f"{rep.count_finite} exits in 1e4 trials of 1e3 steps")


def test_11_dimension_selection(criterion):
    rep = meanfield.dimension_selection_experiment(MSTAR, Neighborhood.step(1), U, 0.01)
    criterion(11, "thin second dimension keeps the 1-D equilibrium stable", rep.max_real_eig < 0,
              f"max real flow eigenvalue {rep.max_real_eig:.4f}")


def test_12_invariant_concentration(criterion):
    rows = invariant_concentration_experiment([0.1, 0.01], MSTAR, U, Neighborhood.step(1),
                                              burn_in=10 ** 4, horizon=10 ** 6, seed=12)
    d = {r.eps: r.mean_distance for r in rows}
    criterion(12, "smaller constant gain concentrates closer to m*", d[0.01] < d[0.1],
              f"mean distance {d[0.1]:.4f} at eps=0.1, {d[0.01]:.4f} at eps=0.01")


def test_13_quantized_integration(criterion):
    ns = [10, 20, 40]
    rows = quantization.integration_study(lambda x: x ** 2, 1 / 3, ns)
    value_err = max(abs(r["value"] - (1 / 3 - 1 / (12 * n * n))) for r, n in zip(rows, ns))
    ratios = [r["ratio"] for r in rows[1:]]
    ok = value_err < 1e-10 and all(3.8 <= r <= 4.2 for r in ratios)
    criterion(13, "midpoint quantization of x^2", ok,
              f"closed-form gap {value_err:.1e}, error ratios {', '.join(f'{r:.6f}' for r in ratios)}")


def test_14_quantized_measure(criterion):
    out = {}
    for name, dist in (("uniform", U), ("f=2x", linear_density())):
        out[name] = [quantization.optimal_quantizer_1d(n, dist).f_distance for n in (2, 4, 8, 16)]
    ok = all(np.all(np.diff(v) < 0) for v in out.values())
    criterion(14, "|F_n - F|^2 strictly decreasing", ok,
              "; ".join(f"{k}: " + ", ".join(f"{x:.3e}" for x in v) for k, v in out.items()))


def test_15_korresp_structure(criterion):
    T = np.ones((6, 6), dtype=int)
    T[:3, :3] = 20
    T[3:, 3:] = 20
    table = categorical.ContingencyTable(T)
    f = table.frequencies
    good = 0
    for seed in range(20):
        mp = categorical.korresp_run(table, 20_000, np.random.default_rng(seed))
        good += all(mp.adjacent(i, 6 + int(np.argmax(f[i]))) for i in range(6))
    criterion(15, "block structure recovered by the contingency map", good >= 18, f"{good}/20 runs")


def test_16_burt_integrity_and_determinism(criterion):
    rng = np.random.default_rng(16)
    broken = 0
    for _ in range(1000):
        K = int(rng.integers(1, 6))
        sizes = rng.integers(1, 5, K)
        N = int(rng.integers(1, 60))
        resp = np.column_stack([rng.integers(0, m, N) for m in sizes])
        burt = categorical.build_burt(resp.tolist(), modalities=[list(range(m)) for m in sizes])
        broken += not all(categorical.check_invariants(burt).values())
    T = np.ones((6, 6), dtype=int)
    T[:3, :3] = 20
    T[3:, 3:] = 20
    resp = [(f"r{i}", f"c{j}") for i in range(6) for j in range(6) for _ in range(T[i, j])]
    burt = categorical.build_burt(resp)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a = categorical.kacm_run(burt, 5000, np.random.default_rng(99))
        b = categorical.kacm_run(burt, 5000, np.random.default_rng(99))
    same = a == b and a.weights.tobytes() == b.weights.tobytes()
    criterion(16, "Burt invariants exact, seeded pipeline bitwise reproducible", broken == 0 and same,
              f"{broken} broken tables of 1000, reruns identical: {same}")
