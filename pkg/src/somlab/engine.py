"""The Kohonen stochastic process.

A state is ``n`` weight vectors in ``Omega``.  One step draws ``x``, finds
the winning unit ``i0`` and moves every unit toward ``x``::

    m_i <- m_i - eps_t * Lambda(i0, i) * (m_i - x)

Long runs go through compiled kernels in chunks; inputs come from a single
``numpy`` generator, so a run is a deterministic function of its seed.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import _kernels
from .topology import Lattice, Neighborhood

__all__ = [
    "NetworkState",
    "GainSchedule",
    "Metric",
    "RunResult",
    "winner",
    "step",
    "gain",
    "run",
    "drive",
    "update_directions",
    "trial_seed",
    "trial_rng",
]

DEFAULT_CHUNK = 1 << 16


def trial_seed(master_seed: int, trial: int) -> int:
    """Per-trial seed: master seed XOR trial index."""
    return int(master_seed) ^ int(trial)


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(trial_seed(master_seed, trial))


@dataclass
class NetworkState:
    weights: np.ndarray
    lattice: Lattice
    time: int = 0

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim == 1:
            w = w[:, None]
        if w.ndim != 2:
            raise ValueError("weights must be an (n, d) array")
        if w.shape[0] != self.lattice.n_units:
            raise ValueError(f"{w.shape[0]} weights for a lattice of {self.lattice.n_units} units")
        self.weights = w

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "NetworkState":
        return NetworkState(self.weights.copy(), self.lattice, self.time)

    @classmethod
    def from_values(cls, values, lattice: Optional[Lattice] = None) -> "NetworkState":
        w = np.asarray(values, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        return cls(w, lattice or Lattice.string(w.shape[0]))

    @classmethod
    def random(cls, lattice: Lattice, dist, rng: np.random.Generator) -> "NetworkState":
        """i.i.d. weights drawn from ``dist``."""
        return cls(dist.sample(rng, lattice.n_units), lattice)

    @classmethod
    def uniform(cls, lattice: Lattice, dist, rng: np.random.Generator) -> "NetworkState":
        """i.i.d. weights uniform on the box of ``dist``."""
        u = rng.random((lattice.n_units, dist.dim))
        return cls(dist.lower + u * (dist.upper - dist.lower), lattice)

    @classmethod
    def ordered(cls, lattice: Lattice, dist, rng: np.random.Generator) -> "NetworkState":
        """A random organized start.

        On a string the weights are sorted uniforms on the box (first
        coordinate increasing).  On a grid, coordinate ``k`` is sorted along
        lattice axis ``k`` independently, which lands in the doubly
        increasing set.
        """
        st = cls.uniform(lattice, dist, rng)
        w = st.weights
        if lattice.kind == "string-1d":
            order = np.argsort(w[:, 0], kind="stable")
            st.weights = w[order]
            return st
        n1, n2 = lattice.dims
        cube = w.reshape(n2, n1, w.shape[1]).copy()
        cube[:, :, 0] = np.sort(cube[:, :, 0], axis=1)
        if w.shape[1] > 1:
            cube[:, :, 1] = np.sort(cube[:, :, 1], axis=0)
        st.weights = cube.reshape(w.shape)
        return st


@dataclass(frozen=True)
class GainSchedule:
    """Adaptation gain ``eps_t``.

    Kinds
    -----
    ``constant(eps)``
    ``power(a, b, gamma)``: ``a / (b + t) ** gamma``
    ``log(A)``: ``A / ln(t + e)``
    ``two_phase(eps, switch, gamma)``: ``eps`` until ``switch``, then
    ``eps * (switch / t) ** gamma``.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        p = self.params
        if self.kind == "constant":
            (eps,) = p
            ok = 0.0 < eps < 1.0
        elif self.kind == "power":
            a, b, g = p
            ok = a > 0 and b > 0 and g > 0 and 0.0 < a / b ** g < 1.0
        elif self.kind == "log":
            (A,) = p
            ok = 0.0 < A < 1.0
        elif self.kind == "two_phase":
            eps, switch, g = p
            ok = 0.0 < eps < 1.0 and switch >= 1 and g > 0
        else:
            raise ValueError(f"unknown gain schedule kind {self.kind!r}")
        if not ok:
            raise ValueError(f"gain schedule {self.kind}{p} leaves ]0, 1[")

    @classmethod
    def constant(cls, eps: float) -> "GainSchedule":
        return cls("constant", (float(eps),))

    @classmethod
    def power(cls, a: float, b: float, gamma: float = 1.0) -> "GainSchedule":
        return cls("power", (float(a), float(b), float(gamma)))

    @classmethod
    def log(cls, A: float) -> "GainSchedule":
        return cls("log", (float(A),))

    @classmethod
    def two_phase(cls, eps: float, switch: int, gamma: float = 1.0) -> "GainSchedule":
        return cls("two_phase", (float(eps), int(switch), float(gamma)))

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        p = self.params
        if self.kind == "constant":
            out = np.full(t.shape, p[0])
        elif self.kind == "power":
            out = p[0] / (p[1] + t) ** p[2]
        elif self.kind == "log":
            out = p[0] / np.log(t + np.e)
        else:
            eps, switch, g = p
            out = np.where(t < switch, eps, eps * (switch / np.maximum(t, switch)) ** g)
        return out if out.ndim else float(out)

    @property
    def robbins_monro(self) -> bool:
        """Sum of gains diverges and sum of squared gains converges."""
        if self.kind in ("power", "two_phase"):
            return 0.5 < self.params[2] <= 1.0
        return False


def gain(schedule: GainSchedule, t: int) -> float:
    if t < 0:
        raise ValueError("time must be non-negative")
    return schedule(t)


@dataclass(frozen=True)
class Metric:
    """Winner metric: Euclidean, or chi-square with reference masses."""

    kind: str = "euclidean"
    masses: Optional[tuple] = None

    def __post_init__(self):
        if self.kind == "euclidean":
            return
        if self.kind != "chi2":
            raise ValueError(f"unknown metric {self.kind!r}")
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or np.any(m <= 0):
            raise ValueError("chi2 masses must be strictly positive")
        if abs(m.sum() - 1.0) > 1e-9:
            raise ValueError("chi2 masses must sum to 1")
        object.__setattr__(self, "masses", tuple(m.tolist()))

    @classmethod
    def chi2(cls, masses) -> "Metric":
        return cls("chi2", tuple(np.asarray(masses, dtype=float).tolist()))

    def coordinate_weights(self, d: int) -> np.ndarray:
        if self.kind == "euclidean":
            return np.ones(d)
        cw = 1.0 / np.asarray(self.masses)
        if cw.size != d:
            raise ValueError(f"metric has {cw.size} masses for dimension {d}")
        return cw

    def distance(self, u, v) -> float:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        cw = self.coordinate_weights(u.size)
        return float(np.sqrt(np.sum(cw * (u - v) ** 2)))


EUCLIDEAN = Metric()


def winner(state: NetworkState, x, metric: Metric = EUCLIDEAN) -> int:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cw = metric.coordinate_weights(state.dim)
    d2 = (cw * (state.weights - x) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def step(state: NetworkState, x, eps: float, nbhd: Neighborhood,
         metric: Metric = EUCLIDEAN) -> NetworkState:
    """One update; returns a new state with ``time + 1``."""
    if not 0.0 < eps < 1.0:
        raise ValueError("gain must lie in ]0, 1[")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    i0 = winner(state, x, metric)
    lam = nbhd(np.array([state.lattice.distance(i0, i) for i in range(state.n)]))
    w = state.weights - eps * lam[:, None] * (state.weights - x)
    return NetworkState(w, state.lattice, state.time + 1)


def update_directions(weights, xs, lam_matrix, cw=None) -> np.ndarray:
    """``H(x, m)`` for a batch of inputs, shape ``(N, n, d)``.

    One step with gain ``eps`` moves ``m`` to ``m - eps * H(x, m)``.
    """
    w = np.asarray(weights, dtype=float)
    xs = np.asarray(xs, dtype=float).reshape(-1, w.shape[1])
    cw = np.ones(w.shape[1]) if cw is None else cw
    d2 = (cw * (xs[:, None, :] - w[None, :, :]) ** 2).sum(axis=2)
    win = np.argmin(d2, axis=1)
    return lam_matrix[win][:, :, None] * (w[None, :, :] - xs[:, None, :])


def drive(state: NetworkState, inputs, gains, nbhd_matrix, cw_table=None,
          cw_index=None) -> NetworkState:
    """Apply a prepared input and gain sequence in place; returns ``state``."""
    inputs = np.ascontiguousarray(inputs, dtype=np.float64).reshape(-1, state.dim)
    gains = np.ascontiguousarray(gains, dtype=np.float64)
    if cw_table is None:
        cw_table = np.ones((1, state.dim))
    if cw_index is None:
        cw_index = np.zeros(inputs.shape[0], dtype=np.int64)
    _kernels.som_steps(state.weights, inputs, gains,
                       np.ascontiguousarray(nbhd_matrix, dtype=np.float64),
                       np.ascontiguousarray(cw_table, dtype=np.float64),
                       np.ascontiguousarray(cw_index, dtype=np.int64))
    state.time += inputs.shape[0]
    return state


@dataclass
class RunResult:
    state: NetworkState
    observations: Dict[str, List] = field(default_factory=dict)
    trajectory: Optional[np.ndarray] = None


def run(initial: NetworkState, dist, schedule: GainSchedule, nbhd: Neighborhood,
        steps: int, rng: np.random.Generator,
        observers: Optional[Dict[str, Callable]] = None, stride: int = 1000,
        metric: Metric = EUCLIDEAN, record: bool = False) -> RunResult:
    """Simulate ``steps`` updates from a copy of ``initial``.

    Observers are called as ``obs(state)`` at ``t = 0`` and then every
    ``stride`` steps (and at the end); their outputs are stored as
    ``(time, value)`` pairs.  ``record=True`` keeps the state at the same
    instants.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    state = initial.copy()
    observers = dict(observers or {})
    obs: Dict[str, List] = {k: [] for k in observers}
    frames = []
    lam = nbhd.matrix(state.lattice)
    cw = metric.coordinate_weights(state.dim)[None, :]
    watching = bool(observers) or record
    chunk = stride if watching else DEFAULT_CHUNK

    def look():
        for name, fn in observers.items():
            obs[name].append((state.time, fn(state)))
        if record:
            frames.append(state.weights.copy())

    if watching:
        look()
    done = 0
    while done < steps:
        k = min(chunk, steps - done)
        xs = dist.sample(rng, k)
        gs = schedule(state.time + np.arange(k))
        drive(state, xs, gs, lam, cw)
        done += k
        if watching:
            look()
    traj = np.array(frames) if record else None
    return RunResult(state, obs, traj)
