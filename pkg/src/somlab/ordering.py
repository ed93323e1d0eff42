"""Organization predicates and Monte Carlo experiments around them.

A 1-D string state is *increasing* when ``m_1 < ... < m_n`` strictly and
*decreasing* when the reverse holds; both sets are absorbing for the
two-neighbor process with a constant gain.  On a square ``n x n`` grid in
the plane the doubly increasing set requires the first coordinate to
increase strictly along lattice axis 1 and the second along axis 2.  That
set is entered with positive probability but is not absorbing, so exit
experiments must be able to record exits.

Trials use the seed ``master ^ trial`` and run independently; reports are
merged by trial index so the worker count never changes a result.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _kernels
from .engine import GainSchedule, NetworkState, trial_rng, trial_seed
from .reports import write_table
from .topology import Lattice, Neighborhood

__all__ = [
    "OrderingVerdict",
    "HittingTimeReport",
    "ConcentrationRow",
    "classify_1d",
    "classify_fpp",
    "hitting_time_experiment",
    "exit_time_experiment",
    "invariant_concentration_experiment",
]

TIMEOUT = -1
FIRST_CHUNK = 1024
MAX_CHUNK = 1 << 16


@dataclass(frozen=True)
class OrderingVerdict:
    status: str
    in_fpp: Optional[bool] = None

    @property
    def ordered(self) -> bool:
        return self.status in ("increasing", "decreasing")


def classify_1d(state) -> OrderingVerdict:
    """Strict ordering of a 1-D string state; any tie is unordered."""
    w = state.weights if isinstance(state, NetworkState) else np.asarray(state, dtype=float)
    if isinstance(state, NetworkState) and state.lattice.kind != "string-1d":
        raise ValueError("classify_1d needs a string lattice")
    if w.ndim == 2:
        if w.shape[1] != 1:
            raise ValueError(f"classify_1d needs d=1, got d={w.shape[1]}")
        w = w[:, 0]
    if w.ndim != 1:
        raise ValueError("classify_1d needs a 1-D state")
    diff = np.diff(w)
    if np.all(diff > 0):
        return OrderingVerdict("increasing")
    if np.all(diff < 0):
        return OrderingVerdict("decreasing")
    return OrderingVerdict("unordered")


def _check_square(state: NetworkState) -> int:
    lat = state.lattice
    if lat.kind != "grid-2d" or state.dim != 2:
        raise ValueError("the doubly increasing set is defined for planar grid states")
    n1, n2 = lat.dims
    if n1 != n2:
        raise ValueError(f"the doubly increasing set needs a square grid, got {n1}x{n2}")
    return n1


def classify_fpp(state: NetworkState) -> bool:
    """Whether both coordinates increase strictly along their own lattice axis."""
    n1 = _check_square(state)
    return _kernels.predicate(state.weights, _kernels.PRED_FPP, n1)


@dataclass
class HittingTimeReport:
    """Per-trial first times (``-1`` for a budget timeout).

    ``event`` says what was timed: ``"hit"`` or ``"exit"``.
    """

    times: np.ndarray
    seeds: np.ndarray
    budget: int
    event: str = "hit"

    @property
    def trials(self) -> int:
        return len(self.times)

    @property
    def finite(self) -> np.ndarray:
        return self.times[self.times >= 0]

    @property
    def count_finite(self) -> int:
        return int(self.finite.size)

    def summary(self) -> dict:
        f = self.finite
        return dict(
            event=self.event,
            trials=self.trials,
            count_finite=self.count_finite,
            timeouts=self.trials - self.count_finite,
            budget=self.budget,
            mean=float(f.mean()) if f.size else np.nan,
            median=float(np.median(f)) if f.size else np.nan,
            max=int(f.max()) if f.size else TIMEOUT,
        )

    def rows(self) -> list:
        return [dict(trial=k, seed=int(s), tau=int(t))
                for k, (s, t) in enumerate(zip(self.seeds, self.times))]

    def to_csv(self, path) -> None:
        write_table(path, ["trial", "seed", "tau"], self.rows())


def _predicate_code(lattice: Lattice, predicate: Optional[str]):
    if predicate is None:
        predicate = "ordered-1d" if lattice.kind == "string-1d" else "fpp"
    if predicate == "ordered-1d":
        if lattice.kind != "string-1d":
            raise ValueError("ordered-1d needs a string lattice")
        return _kernels.PRED_ORDERED, 1
    if predicate == "fpp":
        if lattice.kind != "grid-2d" or lattice.dims[0] != lattice.dims[1]:
            raise ValueError("the fpp predicate needs a square grid")
        return _kernels.PRED_FPP, lattice.dims[0]
    raise ValueError(f"unknown predicate {predicate!r}")


def _first_time(w, dist, schedule, lam, code, n1, target, budget, rng) -> int:
    """Steps until the predicate equals ``target`` (0 if it already does)."""
    if _kernels.predicate(w, code, n1) == target:
        return 0
    cw = np.ones(w.shape[1])
    done = 0
    chunk = FIRST_CHUNK
    while done < budget:
        k = min(chunk, budget - done)
        xs = np.ascontiguousarray(dist.sample(rng, k))
        gs = np.ascontiguousarray(schedule(done + np.arange(k)), dtype=np.float64)
        hit = _kernels.som_steps_until(w, xs, gs, lam, cw, code, n1, target)
        if hit >= 0:
            return done + hit
        done += k
        chunk = min(2 * chunk, MAX_CHUNK)
    return TIMEOUT


Start = Union[str, NetworkState, Callable]


def _start_state(start: Start, lattice: Lattice, dist, rng) -> NetworkState:
    if isinstance(start, NetworkState):
        return start.copy()
    if callable(start):
        return start(lattice, dist, rng)
    if start == "random":
        return NetworkState.random(lattice, dist, rng)
    if start == "ordered":
        return NetworkState.ordered(lattice, dist, rng)
    raise ValueError(f"unknown start {start!r}")


def _schedule(eps) -> Optional[GainSchedule]:
    if isinstance(eps, GainSchedule):
        return eps
    eps = float(eps)
    if eps == 0.0:
        return None
    return GainSchedule.constant(eps)


def _trials(fn, trials: int, workers: int) -> np.ndarray:
    if workers <= 1 or trials <= 1:
        out = [fn(k) for k in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(fn, range(trials)))
    return np.array(out, dtype=np.int64)


def hitting_time_experiment(lattice: Lattice, dist, nbhd: Neighborhood, eps,
                            trials: int, budget: int, seed: int,
                            predicate: Optional[str] = None, start: Start = "random",
                            workers: int = 1) -> HittingTimeReport:
    """First time each trial enters the organized set.

    ``eps`` is a constant gain or a ``GainSchedule``.  Each trial draws its
    start and inputs from ``trial_rng(seed, trial)``.
    """
    code, n1 = _predicate_code(lattice, predicate)
    sched = _schedule(eps)
    lam = nbhd.matrix(lattice)

    def one(k):
        rng = trial_rng(seed, k)
        st = _start_state(start, lattice, dist, rng)
        if sched is None:
            return 0 if _kernels.predicate(st.weights, code, n1) else TIMEOUT
        return _first_time(st.weights, dist, sched, lam, code, n1, True, budget, rng)

    seeds = np.array([trial_seed(seed, k) for k in range(trials)], dtype=np.int64)
    return HittingTimeReport(_trials(one, trials, workers), seeds, budget, "hit")


def exit_time_experiment(lattice: Lattice, dist, nbhd: Neighborhood, eps,
                         trials: int, budget: int, seed: int,
                         predicate: Optional[str] = None, start: Start = "ordered",
                         workers: int = 1) -> HittingTimeReport:
    """First time each trial leaves the organized set (``-1``: never left).

    The predicate is checked after every single step.  ``eps = 0`` freezes
    the process, so no trial can exit.
    """
    code, n1 = _predicate_code(lattice, predicate)
    sched = _schedule(eps)
    lam = nbhd.matrix(lattice)

    def one(k):
        rng = trial_rng(seed, k)
        st = _start_state(start, lattice, dist, rng)
        if not _kernels.predicate(st.weights, code, n1):
            raise ValueError(f"trial {k}: start state is not in the organized set")
        if sched is None:
            return TIMEOUT
        return _first_time(st.weights, dist, sched, lam, code, n1, False, budget, rng)

    seeds = np.array([trial_seed(seed, k) for k in range(trials)], dtype=np.int64)
    return HittingTimeReport(_trials(one, trials, workers), seeds, budget, "exit")


@dataclass
class ConcentrationRow:
    eps: float
    mean_distance: float
    final_distance: float


def invariant_concentration_experiment(eps_values: Sequence[float], reference, dist,
                                       nbhd: Neighborhood, burn_in: int, horizon: int,
                                       seed: int, start: Start = "ordered",
                                       lattice: Optional[Lattice] = None) -> list:
    """Time-averaged ``|m(t) - m*|`` under each constant gain.

    The process runs ``burn_in`` steps, then the Euclidean distance to
    ``reference`` (the mean-field equilibrium) is averaged over the next
    ``horizon`` steps.  ``horizon = 0`` reports the distance at the end of
    the burn-in.  Every gain value uses the same seed.
    """
    ref = reference.weights if isinstance(reference, NetworkState) else np.asarray(reference, dtype=float)
    if ref.ndim == 1:
        ref = ref[:, None]
    ref = np.ascontiguousarray(ref)
    lattice = lattice or Lattice.string(ref.shape[0])
    lam = nbhd.matrix(lattice)
    cw = np.ones(ref.shape[1])
    rows = []
    for eps in eps_values:
        rng = np.random.default_rng(seed)
        st = _start_state(start, lattice, dist, rng)
        w = st.weights
        sched = _schedule(eps)
        total = 0.0
        done = 0
        while done < burn_in + horizon:
            k = min(MAX_CHUNK, burn_in - done) if done < burn_in else min(MAX_CHUNK, burn_in + horizon - done)
            xs = np.ascontiguousarray(dist.sample(rng, k))
            gs = np.full(k, float(eps)) if sched is None else np.ascontiguousarray(
                sched(done + np.arange(k)), dtype=np.float64)
            if sched is None:
                gs[:] = 0.0
            if done < burn_in:
                _kernels.som_steps(w, xs, gs, lam, cw[None, :], np.zeros(k, dtype=np.int64))
            else:
                total += _kernels.som_steps_distance(w, xs, gs, lam, cw, ref)
            done += k
        final = float(np.linalg.norm(w - ref))
        mean = total / horizon if horizon > 0 else final
        rows.append(ConcentrationRow(float(eps), float(mean), final))
    return rows
