"""Distortion, optimal quantizers and quantization-based integration.

The distortion of a state is

    V_n(m) = 1/2 * integral of min_i |m_i - x|^2 mu(dx)

with the 1/2 kept everywhere, so that ``distortion_gradient`` is the exact
gradient of ``distortion`` and coincides with the 0-neighbor mean field.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from . import meanfield
from .engine import GainSchedule, NetworkState, run
from .stimuli import (DegenerateStateError, Discrete, UniformBox,
                      interval_cells, voronoi_moments)
from .topology import Lattice, Neighborhood

__all__ = [
    "QuantizerReport",
    "QuantizedMeasure",
    "MagnificationReport",
    "distortion",
    "distortion_gradient",
    "train_0neighbor",
    "optimal_quantizer_1d",
    "best_local_quantizer",
    "zador_scan",
    "quantized_measure",
    "quantize_integrate",
    "integration_study",
    "magnification_experiment",
    "discrete_potential",
]


def _w(state):
    w = state.weights if isinstance(state, NetworkState) else np.asarray(state, dtype=float)
    return w[:, None] if w.ndim == 1 else w


def _central_1d(dist, w):
    """Per-unit ``integral over C_i of (x - m_i)^2``, 1-D continuous laws."""
    m = w[:, 0]
    a, b, owner = interval_cells(m, dist.lower[0], dist.upper[0])
    if isinstance(dist, UniformBox):
        L = dist.upper[0] - dist.lower[0]
        out = ((b - m) ** 3 - (a - m) ** 3) / (3 * L)
    else:
        m0, m1, m2 = dist.interval_moments(a, b)
        out = m2 - 2 * m * m1 + m * m * m0
    return np.where(owner, out, 0.0)


def distortion(state, dist, method: str = "auto", n_samples: int = 400_000,
               rng: Optional[np.random.Generator] = None, return_se: bool = False):
    """``V_n`` of a state (coinciding weights allowed).

    Exact for 1-D and discrete laws, polygon quadrature for planar boxes,
    Monte Carlo otherwise; ``return_se=True`` gives ``(value, se)`` with
    ``se = 0`` on deterministic paths.
    """
    w = _w(state)
    se = 0.0
    if not dist.continuous:
        d2 = ((dist.points[:, None, :] - w[None, :, :]) ** 2).sum(axis=2)
        val = 0.5 * d2.min(axis=1).mean()
    elif dist.dim == 1 and method in ("auto", "exact"):
        val = 0.5 * _central_1d(dist, w).sum()
    elif dist.dim == 2 and method in ("auto", "planar"):
        mom = voronoi_moments(dist, w, method="planar")
        val = 0.5 * float(np.sum(mom.mass * (w ** 2).sum(axis=1)
                                 - 2 * (w * mom.first).sum(axis=1) + mom.second))
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        xs = dist.sample(rng, n_samples)
        d2 = ((xs[:, None, :] - w[None, :, :]) ** 2).sum(axis=2).min(axis=1)
        val = 0.5 * d2.mean()
        se = 0.5 * d2.std(ddof=1) / np.sqrt(n_samples)
    val = float(val)
    return (val, float(se)) if return_se else val


def distortion_gradient(state, dist, method: str = "auto") -> np.ndarray:
    """``grad V_n``: row ``i`` is ``mu(C_i) * (m_i - mean of C_i)``.

    Needs pairwise distinct weights.
    """
    w = _w(state)
    mom = voronoi_moments(dist, w, method="exact" if method == "auto" and (
        not dist.continuous or dist.dim == 1) else method, require_distinct=True)
    return mom.mass[:, None] * w - mom.first


@dataclass
class QuantizerReport:
    state: np.ndarray
    distortion: float
    masses: np.ndarray
    label: str = ""
    f_distance: Optional[float] = None
    gradient_residual: Optional[float] = None
    extras: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.state.shape[0]

    @property
    def dim(self) -> int:
        return self.state.shape[1]

    @property
    def scaled_distortion(self) -> float:
        """``n^(2/d) * V_n``."""
        return self.n ** (2.0 / self.dim) * self.distortion

    @property
    def distinct(self) -> bool:
        w = self.state
        return all(not np.any(np.all(w[i + 1:] == w[i], axis=1)) for i in range(len(w)))


def _report(w, dist, label, **extras) -> QuantizerReport:
    mom = voronoi_moments(dist, w)
    rep = QuantizerReport(w.copy(), distortion(w, dist), mom.mass, label, extras=extras)
    try:
        rep.gradient_residual = float(np.max(np.abs(distortion_gradient(w, dist))))
    except DegenerateStateError:
        rep.gradient_residual = None
    if dist.dim == 1:
        rep.f_distance = quantized_measure(rep, dist).f_distance
    return rep


def train_0neighbor(dist, n: int, schedule: GainSchedule, steps: int,
                    rng: np.random.Generator, initial=None) -> QuantizerReport:
    """Competitive learning (0-neighbor SOM) as stochastic gradient descent on ``V_n``.

    The limit is a local minimum in general; in 1-D under log-concavity it
    is the unique ordered optimum.
    """
    if not schedule.robbins_monro:
        raise ValueError("0-neighbor training needs a Robbins-Monro gain schedule")
    lattice = Lattice.string(n)
    if initial is None:
        initial = NetworkState.ordered(lattice, dist, rng)
    elif not isinstance(initial, NetworkState):
        initial = NetworkState.from_values(initial, lattice)
    res = run(initial, dist, schedule, Neighborhood.indicator0(), steps, rng)
    return _report(res.state.weights, dist, "trained", steps=steps)


def _h_mu(dist) -> bool:
    if isinstance(dist, UniformBox):
        return True
    return bool(getattr(dist, "h_mu", False))


def optimal_quantizer_1d(n: int, dist, tol: float = 1e-13, max_lloyd: int = 3000) -> QuantizerReport:
    """The unique ordered optimal ``n``-quantizer of a log-concave 1-D law.

    Lloyd's fixed point (each code point moved to its cell mean) is iterated
    from the quantile start, then polished and cross-checked by damped
    Newton on ``grad V_n``.  ``extras`` records the Lloyd iteration count and
    the Lloyd/Newton gap.
    """
    if dist.dim != 1 or not dist.continuous:
        raise ValueError("optimal_quantizer_1d needs a continuous 1-D law")
    if not _h_mu(dist):
        raise ValueError("log-concavity of the input law is not certified")
    lo, hi = dist.lower[0], dist.upper[0]
    probs = (2 * np.arange(1, n + 1) - 1) / (2.0 * n)
    m = np.asarray(dist.from_uniform(probs[:, None]), dtype=float)[:, 0]
    m = np.clip(m, lo + 1e-12, hi - 1e-12)
    it = 0
    for it in range(1, max_lloyd + 1):
        mom = voronoi_moments(dist, m[:, None], require_distinct=True)
        new = mom.first[:, 0] / mom.mass
        step = np.max(np.abs(new - m))
        m = new
        if step <= tol:
            break
    lloyd = m.copy()
    mf = meanfield.MeanField(Lattice.string(n), Neighborhood.indicator0(), dist)
    try:
        eq = meanfield.solve_equilibrium(mf, lloyd[:, None], tol=1e-15 if n < 8 else 1e-14)
        polished = eq.state[:, 0]
    except meanfield.EquilibriumError as exc:
        raise meanfield.EquilibriumError(
            f"optimal quantizer n={n}: Newton polish failed", exc.best_state,
            exc.best_residual) from exc
    gap = float(np.max(np.abs(polished - lloyd)))
    rep = _report(polished[:, None], dist, "exact optimum", lloyd_iterations=it,
                  lloyd_newton_gap=gap)
    if not rep.distinct:
        raise RuntimeError(f"optimal quantizer n={n} has coinciding code points")
    return rep


def _lloyd_planar(w, dist, max_iter=2000, tol=1e-11):
    for _ in range(max_iter):
        mom = voronoi_moments(dist, w, method="planar")
        live = mom.mass > 0
        new = w.copy()
        new[live] = mom.first[live] / mom.mass[live, None]
        if np.max(np.abs(new - w)) <= tol:
            return new
        w = new
    return w


def best_local_quantizer(n: int, dist, restarts: int, rng: np.random.Generator,
                         sgd_steps: Optional[int] = None) -> QuantizerReport:
    """Best local minimum of ``V_n`` over random restarts (continuous laws, d >= 2).

    Each restart runs competitive learning from a random state, then Lloyd
    polishing with exact planar centroids (Monte Carlo centroids for
    ``d > 2`` are not offered).
    """
    if dist.dim != 2 or not dist.continuous:
        raise ValueError("restart search is implemented for continuous planar laws")
    sgd_steps = 500 * n if sgd_steps is None else sgd_steps
    best = None
    lattice = Lattice.string(n)
    for _ in range(restarts):
        st = NetworkState.random(lattice, dist, rng)
        st = run(st, dist, GainSchedule.power(2.0, 4.0, 0.75), Neighborhood.indicator0(),
                 sgd_steps, rng).state
        w = _lloyd_planar(st.weights, dist)
        v = distortion(w, dist)
        if best is None or v < best[0]:
            best = (v, w)
    return _report(best[1], dist, f"best local minimum over {restarts} restarts",
                   restarts=restarts)


def zador_scan(ns: Sequence[int], dist, restarts: int = 20,
               rng: Optional[np.random.Generator] = None) -> list:
    """Rows ``(n, distortion, scaled_distortion, f_distance, label)``.

    ``scaled_distortion = n^(2/d) V_n(m*_n)`` should settle as ``n`` grows.
    """
    rows = []
    rng = np.random.default_rng(0) if rng is None else rng
    for n in ns:
        if dist.dim == 1:
            rep = optimal_quantizer_1d(n, dist)
        else:
            rep = best_local_quantizer(n, dist, restarts, rng)
        rows.append(dict(n=n, distortion=rep.distortion, scaled_distortion=rep.scaled_distortion,
                         f_distance=rep.f_distance if rep.f_distance is not None else np.nan,
                         label=rep.label))
    return rows


@dataclass
class QuantizedMeasure:
    atoms: np.ndarray
    weights: np.ndarray
    f_distance: Optional[float] = None
    ks_distance: Optional[float] = None


def _sq_gap_integral(dist, c, s, t):
    """``integral_s^t (c - F(x))^2 dx``."""
    if t <= s:
        return 0.0
    if isinstance(dist, UniformBox):
        W = dist.upper[0] - dist.lower[0]
        Fs, Ft = dist.cdf(s), dist.cdf(t)
        return float(W / 3.0 * ((c - Fs) ** 3 - (c - Ft) ** 3))
    val, _ = integrate.quad(lambda x: (c - float(dist.cdf(x))) ** 2, s, t,
                            epsabs=1e-15, epsrel=1e-12, limit=200)
    return val


def quantized_measure(report: QuantizerReport, dist) -> QuantizedMeasure:
    """The Voronoi-weighted discrete measure ``sum_i mu(C_i) delta_{m_i}``.

    In 1-D also returns ``integral (F_n - F)^2`` (piecewise between atoms)
    and the Kolmogorov-Smirnov distance ``sup |F_n - F|``.
    """
    atoms = report.state
    weights = np.asarray(report.masses, dtype=float)
    qm = QuantizedMeasure(atoms.copy(), weights.copy())
    if atoms.shape[1] != 1 or not dist.continuous:
        return qm
    order = np.argsort(atoms[:, 0], kind="stable")
    a = atoms[order, 0]
    cum = np.concatenate([[0.0], np.cumsum(weights[order])])
    edges = np.concatenate([[dist.lower[0]], a, [dist.upper[0]]])
    total = 0.0
    ks = 0.0
    for k in range(len(edges) - 1):
        s, t, c = edges[k], edges[k + 1], cum[k]
        total += _sq_gap_integral(dist, c, s, t)
        ks = max(ks, abs(c - float(dist.cdf(s))), abs(c - float(dist.cdf(t))))
    qm.f_distance = float(total)
    qm.ks_distance = float(ks)
    return qm


def quantize_integrate(g: Callable, report: QuantizerReport) -> float:
    """``sum_i mu(C_i) g(m_i)``; ``g`` is vectorized over code points.

    For 1-D quantizers ``g`` receives a flat array of code points, otherwise
    an ``(n, d)`` array.
    """
    pts = report.state[:, 0] if report.dim == 1 else report.state
    vals = np.asarray(g(pts), dtype=float)
    return float(np.dot(report.masses, vals))


def midpoint_quantizer(n: int, dist=None) -> QuantizerReport:
    """The uniform optimum ``(2i - 1) / 2n`` on ``[0, 1]``."""
    dist = UniformBox(0.0, 1.0) if dist is None else dist
    w = ((2 * np.arange(1, n + 1) - 1) / (2.0 * n))[:, None]
    return _report(w, dist, "midpoints")


def integration_study(g: Callable, exact: float, ns: Sequence[int], dist=None,
                      quantizer: Optional[Callable] = None) -> list:
    """Quantized integral of ``g`` for each ``n``, its error and the error ratio to the previous ``n``."""
    dist = UniformBox(0.0, 1.0) if dist is None else dist
    if quantizer is None:
        quantizer = (lambda n: midpoint_quantizer(n, dist)) if isinstance(dist, UniformBox) \
            else (lambda n: optimal_quantizer_1d(n, dist))
    rows = []
    prev = None
    for n in ns:
        val = quantize_integrate(g, quantizer(n))
        err = abs(val - exact)
        rows.append(dict(n=n, value=val, error=err,
                         ratio=(prev / err) if prev is not None and err > 0 else np.nan))
        prev = err
    return rows


@dataclass
class MagnificationReport:
    """Code-point density of an optimal quantizer next to ``f`` and ``f^(1/3)``.

    ``density_rows`` are evaluated between consecutive code points ``x_k``:
    the spacing density ``1 / (n (m_{k+1} - m_k))``, the input density
    ``f(x_k)`` and the normalized power ``f(x_k)^(1/3) / integral f^(1/3)``.
    ``measure_rows`` list the atoms and weights of the quantized measure.
    ``fitted_exponent`` is the least-squares slope of log spacing density
    against log ``f`` (descriptive only).
    """

    n: int
    density_rows: list
    measure_rows: list
    fitted_exponent: float


def magnification_experiment(dist, n: int) -> MagnificationReport:
    rep = optimal_quantizer_1d(n, dist)
    m = rep.state[:, 0]
    pdf = lambda x: np.asarray(dist.pdf(np.asarray(x, dtype=float)[..., None]), dtype=float)
    lo, hi = dist.lower[0], dist.upper[0]
    norm, _ = integrate.quad(lambda x: float(pdf(x)) ** (1.0 / 3.0), lo, hi, limit=200)
    rows = []
    if n > 1:
        mids = 0.5 * (m[1:] + m[:-1])
        spacing = 1.0 / (n * np.diff(m))
        fx = pdf(mids)
        zad = fx ** (1.0 / 3.0) / norm
        rows = [dict(x=x, spacing_density=s, f=fv, zador_density=z)
                for x, s, fv, z in zip(mids, spacing, fx, zad)]
    measure = [dict(atom=a, weight=wt) for a, wt in zip(m, rep.masses)]
    exponent = np.nan
    if len(rows) >= 2:
        lf = np.log([r["f"] for r in rows])
        ls = np.log([r["spacing_density"] for r in rows])
        if np.ptp(lf) > 0:
            exponent = float(np.polyfit(lf, ls, 1)[0])
    return MagnificationReport(n, rows, measure, exponent)


def discrete_potential(state, dist: Discrete, nbhd: Neighborhood, lattice: Optional[Lattice] = None) -> float:
    """Intra-class variance extended to neighbor classes.

    ``1/(2N) * sum_l sum_j Lambda(i(l), j) |m_j - x_l|^2`` with ``i(l)`` the
    winner of data point ``x_l`` (lowest index on ties).
    """
    w = _w(state)
    if lattice is None:
        lattice = state.lattice if isinstance(state, NetworkState) else Lattice.string(len(w))
    lam = nbhd.matrix(lattice)
    d2 = ((dist.points[:, None, :] - w[None, :, :]) ** 2).sum(axis=2)
    win = np.argmin(d2, axis=1)
    return float(0.5 * np.mean(np.sum(lam[win] * d2, axis=1)))
