"""Mean vector field of the SOM process and its equilibria.

For a state ``m`` with Voronoi cells ``C_j``::

    h_i(m) = sum_j Lambda(i, j) * integral over C_j of (m_i - x) mu(dx)

so that ``h(m)`` is the expected one-step update direction and the mean
dynamics are ``dm/dt = -h(m)``.  Jacobians below are Jacobians of ``h``
(central finite differences); stability is read off the flow matrix
``-grad h``.
"""

from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .engine import NetworkState, update_directions
from .stimuli import (DegenerateStateError, Product, UniformBox, voronoi_adjacency,
                      voronoi_moments)
from .topology import Lattice, Neighborhood

__all__ = [
    "MeanField",
    "HField",
    "Jacobian",
    "EquilibriumReport",
    "EquilibriumError",
    "IntegrationError",
    "OdeResult",
    "evaluate_h",
    "jacobian_h",
    "ode_flow",
    "analyze_equilibrium",
    "solve_equilibrium",
    "uniform_limit_linear_system",
    "grid_state",
    "grid_stability_sweep",
    "dimension_selection_experiment",
    "stability_verdict",
]

STABILITY_BAND = 1e-8
FD_STEP = 1e-5


class EquilibriumError(RuntimeError):
    def __init__(self, message, best_state=None, best_residual=np.inf):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_state = best_state
        self.best_residual = best_residual


class IntegrationError(RuntimeError):
    pass


class HField(NamedTuple):
    value: np.ndarray
    se: Optional[np.ndarray] = None


class MeanField:
    """``h`` for a lattice, neighborhood and input law.

    Parameters
    ----------
    policy : {"auto", "exact-1d", "quadrature-1d", "planar", "discrete", "monte-carlo"}
        How cell integrals are evaluated.  ``auto`` picks the exact 1-D
        path when closed forms exist, adaptive quadrature for other 1-D
        densities, polygon quadrature for continuous laws on planar boxes,
        exact sums for discrete laws and Monte Carlo otherwise.
    n_samples, seed
        Monte Carlo sample size and base seed.
    """

    def __init__(self, lattice: Lattice, nbhd: Neighborhood, dist,
                 policy: str = "auto", n_samples: int = 100_000, seed: int = 0):
        self.lattice = lattice
        self.nbhd = nbhd
        self.dist = dist
        self.lam = nbhd.matrix(lattice)
        if policy == "auto":
            policy = self._auto_policy(dist)
        if policy not in ("exact-1d", "quadrature-1d", "planar", "discrete", "monte-carlo"):
            raise ValueError(f"unknown policy {policy!r}")
        self.policy = policy
        self.n_samples = int(n_samples)
        self.seed = int(seed)

    @staticmethod
    def _auto_policy(dist):
        if not dist.continuous:
            return "discrete"
        if dist.dim == 1:
            if isinstance(dist, UniformBox) or getattr(dist, "antiderivatives", None):
                return "exact-1d"
            return "quadrature-1d"
        if dist.dim == 2:
            return "planar"
        return "monte-carlo"

    @property
    def deterministic(self) -> bool:
        return self.policy != "monte-carlo"

    def _weights(self, state):
        w = state.weights if isinstance(state, NetworkState) else np.asarray(state, dtype=float)
        return w[:, None] if w.ndim == 1 else w

    def __call__(self, state, seed: Optional[int] = None) -> HField:
        w = self._weights(state)
        if self.policy == "monte-carlo":
            rng = np.random.default_rng(self.seed if seed is None else seed)
            xs = self.dist.sample(rng, self.n_samples)
            H = update_directions(w, xs, self.lam)
            return HField(H.mean(axis=0), H.std(axis=0, ddof=1) / np.sqrt(len(xs)))
        method = {"exact-1d": "exact", "quadrature-1d": "exact",
                  "planar": "planar", "discrete": "exact"}[self.policy]
        mom = voronoi_moments(self.dist, w, method=method,
                              require_distinct=self.policy != "discrete")
        lam_mass = self.lam @ mom.mass
        return HField(lam_mass[:, None] * w - self.lam @ mom.first)

    def adjacency(self, state):
        w = self._weights(state)
        if w.shape[1] > 2:
            return None
        return voronoi_adjacency(w, self.dist.lower, self.dist.upper)


def evaluate_h(mf: MeanField, state) -> HField:
    return mf(state)


@dataclass
class Jacobian:
    """Central-difference Jacobian of ``h`` (flattened unit-major)."""

    matrix: np.ndarray
    flagged: List[int] = field(default_factory=list)

    def off_diagonal_max(self) -> float:
        off = self.matrix - np.diag(np.diag(self.matrix))
        mask = ~np.eye(len(off), dtype=bool)
        return float(off[mask].max()) if mask.any() else -np.inf

    def flow_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of ``-grad h``, sorted by decreasing real part."""
        ev = np.linalg.eigvals(-self.matrix)
        return ev[np.argsort(-ev.real)]


def jacobian_h(mf: MeanField, state, step: float = FD_STEP) -> Jacobian:
    """Central finite differences of ``h``.

    Columns whose ``+/- step`` perturbation changes the Voronoi adjacency
    are listed in ``flagged``.  Monte Carlo fields reuse one stream per
    column for both perturbations (common random numbers).
    """
    w0 = mf._weights(state).copy()
    n, d = w0.shape
    N = n * d
    J = np.empty((N, N))
    base_adj = mf.adjacency(w0)
    flagged = []
    for c in range(N):
        i, k = divmod(c, d)
        wp, wm = w0.copy(), w0.copy()
        wp[i, k] += step
        wm[i, k] -= step
        seed = None if mf.deterministic else mf.seed + 7919 * (c + 1)
        hp = mf(wp, seed=seed).value
        hm = mf(wm, seed=seed).value
        J[:, c] = ((hp - hm) / (2 * step)).ravel()
        if base_adj is not None and (mf.adjacency(wp) != base_adj or mf.adjacency(wm) != base_adj):
            flagged.append(c)
    return Jacobian(J, flagged)


def stability_verdict(max_real: float, band: float = STABILITY_BAND) -> str:
    if max_real < -band:
        return "stable"
    if max_real > band:
        return "unstable"
    return "inconclusive"


@dataclass
class EquilibriumReport:
    state: np.ndarray
    residual: float
    max_real_eig: float
    eigenvalues: np.ndarray
    cooperative: bool
    verdict: str
    jacobian: Optional[Jacobian] = None
    iterations: int = 0

    def top_real_parts(self, k: int = 5) -> np.ndarray:
        return self.eigenvalues.real[:k]


def analyze_equilibrium(mf: MeanField, state, coop_tol: float = 1e-8,
                        step: float = FD_STEP) -> EquilibriumReport:
    """Residual, flow spectrum and cooperativity of ``h`` at ``state``."""
    w = mf._weights(state)
    res = float(np.max(np.abs(mf(w).value)))
    jac = jacobian_h(mf, w, step)
    ev = jac.flow_eigenvalues()
    mx = float(ev.real[0])
    return EquilibriumReport(w.copy(), res, mx, ev, jac.off_diagonal_max() <= coop_tol,
                             stability_verdict(mx), jac)


@dataclass
class OdeResult:
    times: np.ndarray
    states: np.ndarray
    dt: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _rk4(mf, w, dt, nsteps, every):
    f = lambda m: -mf(m).value
    out = [w.copy()]
    for s in range(nsteps):
        k1 = f(w)
        k2 = f(w + 0.5 * dt * k1)
        k3 = f(w + 0.5 * dt * k2)
        k4 = f(w + dt * k3)
        w = w + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (s + 1) % every == 0 or s + 1 == nsteps:
            out.append(w.copy())
    return w, out


def ode_flow(mf: MeanField, initial, horizon: float, dt: float = 0.05,
             tol: float = 1e-9, max_halvings: int = 6, samples: int = 100) -> OdeResult:
    """Integrate ``dm/dt = -h(m)`` with classical RK4 at a fixed step.

    The run is repeated with half the step; if the two endpoints differ by
    more than ``tol`` the step is halved again, up to ``max_halvings``
    times, after which :class:`IntegrationError` is raised.  The returned
    trajectory is the finer of the last accepted pair.
    """
    if not mf.deterministic:
        raise ValueError("ODE flow needs a deterministic mean field")
    w0 = mf._weights(initial).astype(float)
    if horizon <= 0:
        return OdeResult(np.array([0.0]), w0[None].copy(), dt)
    nsteps = max(1, int(np.ceil(horizon / dt)))
    h_dt = horizon / nsteps
    coarse, _ = _rk4(mf, w0.copy(), h_dt, nsteps, nsteps)
    for _ in range(max_halvings + 1):
        nsteps *= 2
        h_dt = horizon / nsteps
        every = max(1, nsteps // samples)
        fine, frames = _rk4(mf, w0.copy(), h_dt, nsteps, every)
        if np.max(np.abs(fine - coarse)) <= tol:
            times = np.minimum(np.arange(len(frames)) * every * h_dt, horizon)
            times[-1] = horizon
            return OdeResult(times, np.array(frames), h_dt)
        coarse = fine
    raise IntegrationError(f"step halving did not settle below {tol} (last dt {h_dt})")


def solve_equilibrium(mf: MeanField, initial, tol: float = 1e-12, max_iter: int = 60,
                      step: float = FD_STEP, ode_horizon: float = 200.0) -> EquilibriumReport:
    """Zero of ``h`` by damped Newton with a finite-difference Jacobian.

    The Newton step is halved until the residual decreases.  If Newton
    stalls, the state is pushed along the ODE flow for ``ode_horizon``
    and Newton is restarted once.
    """
    if not mf.deterministic:
        raise ValueError("equilibrium solving needs a deterministic mean field")
    w = mf._weights(initial).astype(float).copy()
    best_w, best_r = w.copy(), np.inf

    def newton(w):
        nonlocal best_w, best_r
        hv = mf(w).value
        r = np.max(np.abs(hv))
        for it in range(max_iter):
            if r < best_r:
                best_w, best_r = w.copy(), r
            if r <= tol:
                return w, it
            J = jacobian_h(mf, w, step).matrix
            try:
                delta = np.linalg.solve(J, -hv.ravel()).reshape(w.shape)
            except np.linalg.LinAlgError:
                return None, it
            lam = 1.0
            while lam > 1e-9:
                trial = w + lam * delta
                try:
                    ht = mf(trial).value
                except DegenerateStateError:
                    lam *= 0.5
                    continue
                rt = np.max(np.abs(ht))
                if rt < r:
                    break
                lam *= 0.5
            else:
                return None, it
            w, hv, r = trial, ht, rt
        if r < best_r:
            best_w, best_r = w.copy(), r
        return (w, max_iter) if r <= tol else (None, max_iter)

    sol, iters = newton(w)
    if sol is None:
        flowed = ode_flow(mf, best_w, ode_horizon, dt=0.1, tol=1e-6).final
        sol, more = newton(flowed)
        iters += more
    if sol is None:
        raise EquilibriumError("Newton iteration did not converge", best_w, best_r)
    rep = analyze_equilibrium(mf, sol, step=step)
    rep.iterations = iters
    return rep


def uniform_limit_linear_system(n: int, nbhd: Neighborhood, lower: float = 0.0,
                                upper: float = 1.0) -> NetworkState:
    """Ordered equilibrium for a uniform law on ``[lower, upper]``.

    With a 0/1 neighborhood of radius ``k`` unit ``i`` sees the union of
    the cells ``i-k .. i+k``, an interval ``[A_i, B_i]``, and ``h_i = 0``
    means ``m_i = (A_i + B_i) / 2``.  The end points are either the support
    bounds or midpoints of adjacent weights, which makes the conditions a
    linear ``n x n`` system.
    """
    if not nbhd.is_binary:
        raise ValueError(f"the equilibrium conditions are linear only for 0/1 neighborhoods, got {nbhd}")
    k = len(nbhd.values) - 1
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    for i in range(n):
        lo, hi = max(0, i - k), min(n - 1, i + k)
        A[i, i] += 2.0
        if lo == 0:
            rhs[i] += lower
        else:
            A[i, lo - 1] -= 0.5
            A[i, lo] -= 0.5
        if hi == n - 1:
            rhs[i] += upper
        else:
            A[i, hi] -= 0.5
            A[i, hi + 1] -= 0.5
    try:
        m = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular equilibrium system for n={n}, {nbhd}") from exc
    return NetworkState.from_values(m)


def grid_state(axes: Sequence) -> NetworkState:
    """Product state on an ``n1 x n2`` grid from per-axis 1-D states.

    Unit ``(i1, i2)`` (flat index ``i1 + n1 * i2``) gets weight
    ``(axes[0][i1], axes[1][i2])``.
    """
    if len(axes) != 2:
        raise ValueError("grid states are built on 2-D lattices")
    ax = [np.asarray(a.weights[:, 0] if isinstance(a, NetworkState) else a, dtype=float).ravel()
          for a in axes]
    n1, n2 = ax[0].size, ax[1].size
    X, Y = np.meshgrid(ax[0], ax[1], indexing="xy")  # shape (n2, n1)
    w = np.stack([X.ravel(), Y.ravel()], axis=1)
    return NetworkState(w, Lattice.grid(n1, n2))


def _axis_neighborhood(nbhd: Neighborhood) -> Neighborhood:
    if not nbhd.is_binary:
        raise ValueError("grid sweeps need a product (0/1 Chebyshev) neighborhood")
    return Neighborhood.step(len(nbhd.values) - 1)


def grid_stability_sweep(shapes, nbhd: Neighborhood, factors=None) -> list:
    """Residual and flow spectrum of grid equilibria for several ``(n1, n2)``.

    Each axis equilibrium is solved on a string with the matching radius,
    then the product state is analysed with polygon quadrature.  Rows are
    reported, nothing is asserted.
    """
    if factors is None:
        factors = (UniformBox(0.0, 1.0), UniformBox(0.0, 1.0))
    axis_nbhd = _axis_neighborhood(nbhd)
    rows = []
    for n1, n2 in shapes:
        axes = []
        for n_l, fac in zip((n1, n2), factors):
            start = NetworkState.from_values(np.linspace(0.1, 0.9, n_l) if n_l > 1 else [0.5])
            mf1 = MeanField(Lattice.string(n_l), axis_nbhd, fac)
            axes.append(solve_equilibrium(mf1, start).state[:, 0])
        st = grid_state(axes)
        mf = MeanField(st.lattice, nbhd, Product(list(factors)))
        rep = analyze_equilibrium(mf, st)
        rows.append(dict(n1=n1, n2=n2, residual=rep.residual,
                         max_real_eig=rep.max_real_eig, verdict=rep.verdict))
    return rows


@dataclass
class DimensionSelectionReport:
    state: np.ndarray
    residual: float
    eigenvalues: np.ndarray
    max_real_eig: float
    verdict: str
    base_eigenvalues: np.ndarray


def dimension_selection_experiment(base_state, nbhd: Neighborhood, base_dist,
                                   sigma: float, offset: Optional[float] = None,
                                   policy: str = "auto") -> DimensionSelectionReport:
    """Stability of a 1-D equilibrium inside a thin second dimension.

    The augmented law is ``base_dist x Uniform[-sigma, sigma]`` and the
    augmented state puts every unit at transverse coordinate ``offset``
    (default: the noise mean, 0).  ``sigma = 0`` is handled in closed form:
    the transverse block then decouples with relaxation rates
    ``sum_j Lambda(i, j) mu(C_j)``.
    """
    base = base_state if isinstance(base_state, NetworkState) else NetworkState.from_values(base_state)
    lattice = base.lattice
    mf1 = MeanField(lattice, nbhd, base_dist)
    base_rep = analyze_equilibrium(mf1, base)
    off = 0.0 if offset is None else float(offset)
    w = np.hstack([base.weights, np.full((base.n, 1), off)])
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        mom = voronoi_moments(base_dist, base.weights, require_distinct=True)
        rates = mf1.lam @ mom.mass
        J1 = jacobian_h(mf1, base).matrix
        n = base.n
        J = np.zeros((2 * n, 2 * n))
        J[0::2, 0::2] = J1
        J[1::2, 1::2] = np.diag(rates)
        h1 = mf1(base).value
        h = np.hstack([h1, (rates * off)[:, None]])
        ev = np.linalg.eigvals(-J)
    else:
        dist = Product([base_dist, UniformBox(-sigma, sigma)])
        mf = MeanField(lattice, nbhd, dist, policy=policy)
        h = mf(w).value
        ev = jacobian_h(mf, w).flow_eigenvalues()
    ev = ev[np.argsort(-ev.real)]
    mx = float(ev.real[0])
    return DimensionSelectionReport(w, float(np.max(np.abs(h))), ev, mx,
                                    stability_verdict(mx), base_rep.eigenvalues)
