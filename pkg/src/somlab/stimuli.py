"""Input distributions and Voronoi cell integrals.

Every distribution lives on a bounded box ``Omega``.  Samples are produced
from i.i.d. uniforms (``rng.random``) through per-coordinate inverse
distribution functions, so a stream drawn in chunks is identical to the
same stream drawn at once.

The quantities every mean-field and distortion formula needs are the
zeroth, first and second moments of ``mu`` over the Voronoi cells of a
state.  :func:`voronoi_moments` computes them exactly for 1-D laws and
discrete laws, by polygon clipping plus Gauss quadrature on boxes in the
plane, and by Monte Carlo (with standard errors) otherwise.
"""

import csv
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate, special

__all__ = [
    "UniformBox",
    "Density1D",
    "Product",
    "Discrete",
    "CellStats",
    "CellMoments",
    "DegenerateStateError",
    "linear_density",
    "truncated_gaussian",
    "cell_statistics",
    "voronoi_moments",
    "load_points_csv",
]

CDF_KNOTS = 2 ** 14


class DegenerateStateError(ValueError):
    """Raised when coinciding weights make a cell integral ill defined."""

    def __init__(self, pairs):
        self.pairs = list(pairs)
        super().__init__(f"coinciding units {self.pairs}")


class CellStats(NamedTuple):
    mass: float
    mean: np.ndarray
    mass_se: float = 0.0
    mean_se: Optional[np.ndarray] = None

    @property
    def empty(self) -> bool:
        return self.mass == 0.0


class CellMoments(NamedTuple):
    """Per-cell integrals of ``1``, ``x`` and ``|x|^2`` against ``mu``."""

    mass: np.ndarray
    first: np.ndarray
    second: np.ndarray
    mass_se: Optional[np.ndarray] = None
    first_se: Optional[np.ndarray] = None
    second_se: Optional[np.ndarray] = None

    @property
    def exact(self) -> bool:
        return self.mass_se is None

    def means(self) -> np.ndarray:
        """Conditional means; NaN rows for empty cells."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.first / self.mass[:, None]


class _Distribution:
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    continuous = True

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.from_uniform(rng.random((size, self.dim)))

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


class UniformBox(_Distribution):
    """Uniform law on the box ``[lower, upper]``."""

    def __init__(self, lower=0.0, upper=1.0, dim: Optional[int] = None):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if dim is not None:
            lower = np.broadcast_to(lower, (dim,)).copy()
            upper = np.broadcast_to(upper, (dim,)).copy()
        if lower.shape != upper.shape:
            raise ValueError("lower and upper bounds differ in shape")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("bounds must be finite")
        if np.any(lower >= upper):
            raise ValueError("need lower < upper on every axis")
        self.lower, self.upper = lower, upper
        self.dim = lower.size
        self.volume = float(np.prod(upper - lower))

    def __repr__(self):
        return f"UniformBox({self.lower.tolist()}, {self.upper.tolist()})"

    def from_uniform(self, u):
        return self.lower + u * (self.upper - self.lower)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lower) & (x <= self.upper), axis=-1)
        return np.where(inside, 1.0 / self.volume, 0.0)

    def cdf(self, x):
        if self.dim != 1:
            raise ValueError("cdf is only defined for 1-D laws")
        lo, hi = self.lower[0], self.upper[0]
        return np.clip((np.asarray(x, dtype=float) - lo) / (hi - lo), 0.0, 1.0)

    def mean(self):
        return 0.5 * (self.lower + self.upper)

    def interval_moments(self, a, b):
        """Mass, first and second moment of ``[a, b]`` (vectorized, 1-D)."""
        lo, hi = self.lower[0], self.upper[0]
        a = np.clip(a, lo, hi)
        b = np.clip(b, lo, hi)
        L = hi - lo
        return (b - a) / L, (b * b - a * a) / (2 * L), (b ** 3 - a ** 3) / (3 * L)


class Density1D(_Distribution):
    """A law on ``[0, 1]`` with density ``f``.

    Parameters
    ----------
    f : callable
        Vectorized density on ``[0, 1]``.
    log_concave : {"strict", "concave", "none"}
        Declared shape of ``ln f``.  A declaration other than ``"none"`` is
        spot-checked on a grid of 1000 interior points.
    positive_endpoints : bool
        User assertion that ``f(0+) + f(1-) > 0`` (cannot be checked
        numerically); together with ``log_concave="concave"`` it certifies
        the hypothesis used by the 1-D convergence theory.
    antiderivatives : tuple of 3 callables, optional
        ``x -> int_0^x t**k f(t) dt`` for ``k = 0, 1, 2``.  When given, cell
        integrals are exact; otherwise adaptive quadrature is used.
    """

    lower = np.array([0.0])
    upper = np.array([1.0])
    dim = 1

    def __init__(self, f: Callable, log_concave: str = "none",
                 positive_endpoints: bool = False,
                 antiderivatives: Optional[Sequence[Callable]] = None,
                 name: str = "density"):
        if log_concave not in ("strict", "concave", "none"):
            raise ValueError(f"bad log_concave value {log_concave!r}")
        self.f = f
        self.name = name
        self.log_concave = log_concave
        self.positive_endpoints = bool(positive_endpoints)
        self.antiderivatives = tuple(antiderivatives) if antiderivatives else None
        total, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=200)
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"density integrates to {total!r}, not 1")
        grid = np.linspace(0.0, 1.0, 1001)
        if np.any(np.asarray(f(grid)) < 0):
            raise ValueError("density takes negative values")
        if log_concave != "none":
            self._check_log_concave()
        self._knots = np.linspace(0.0, 1.0, CDF_KNOTS + 1)
        self._cdf_table = self._build_cdf_table()

    def __repr__(self):
        return f"Density1D({self.name})"

    @property
    def h_mu(self) -> bool:
        return self.log_concave == "strict" or (
            self.log_concave == "concave" and self.positive_endpoints)

    def _check_log_concave(self):
        x = np.linspace(0.0, 1.0, 1002)[1:-1]
        with np.errstate(divide="ignore"):
            lf = np.log(np.asarray(self.f(x), dtype=float))
        if not np.all(np.isfinite(lf)):
            raise ValueError("log-concave density must be positive inside ]0, 1[")
        if np.max(np.diff(lf, 2)) > 1e-8:
            raise ValueError("declared log-concave density fails the second-difference check")

    def _build_cdf_table(self):
        if self.antiderivatives:
            table = np.asarray(self.antiderivatives[0](self._knots), dtype=float)
        else:
            nodes, wts = np.polynomial.legendre.leggauss(8)
            h = 1.0 / CDF_KNOTS
            left = self._knots[:-1]
            pts = left[:, None] + 0.5 * h * (nodes[None, :] + 1.0)
            pieces = 0.5 * h * (np.asarray(self.f(pts)) * wts).sum(axis=1)
            table = np.concatenate([[0.0], np.cumsum(pieces)])
        table = np.maximum.accumulate(table)
        return table / table[-1]

    def pdf(self, x):
        """Density at points of shape ``(..., 1)``."""
        x1 = np.asarray(x, dtype=float)[..., 0]
        inside = (x1 >= 0) & (x1 <= 1)
        return np.where(inside, self.f(np.clip(x1, 0, 1)), 0.0)

    def from_uniform(self, u):
        return np.interp(u, self._cdf_table, self._knots)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        if self.antiderivatives:
            return np.asarray(self.antiderivatives[0](x), dtype=float)
        # table value at the knot below, plus Gauss-Legendre on the remainder
        k = np.minimum((x * CDF_KNOTS).astype(int), CDF_KNOTS - 1)
        left = self._knots[k]
        nodes, wts = np.polynomial.legendre.leggauss(8)
        half = 0.5 * (x - left)
        pts = left[..., None] + half[..., None] * (nodes + 1.0)
        tail = half * (np.asarray(self.f(pts)) * wts).sum(axis=-1)
        return np.clip(self._cdf_table[k] + tail, 0.0, 1.0)

    def mean(self):
        return np.array([self._moments_scalar(0.0, 1.0)[1]])

    def _moments_scalar(self, a, b):
        if b <= a:
            return 0.0, 0.0, 0.0
        out = []
        for k in range(3):
            val, _ = integrate.quad(lambda t: t ** k * self.f(t), a, b,
                                    epsabs=1e-15, epsrel=1e-13, limit=200)
            out.append(val)
        return tuple(out)

    def interval_moments(self, a, b):
        a = np.clip(np.asarray(a, dtype=float), 0.0, 1.0)
        b = np.clip(np.asarray(b, dtype=float), 0.0, 1.0)
        if self.antiderivatives:
            F0, F1, F2 = self.antiderivatives
            return F0(b) - F0(a), F1(b) - F1(a), F2(b) - F2(a)
        ab = np.broadcast_arrays(a, b)
        res = np.array([self._moments_scalar(x, y) for x, y in zip(ab[0].ravel(), ab[1].ravel())])
        res = res.reshape(ab[0].shape + (3,))
        return res[..., 0], res[..., 1], res[..., 2]


def linear_density() -> Density1D:
    """``f(x) = 2x`` on ``[0, 1]``."""
    return Density1D(
        lambda x: 2.0 * np.asarray(x, dtype=float),
        log_concave="strict",
        antiderivatives=(lambda x: x ** 2,
                         lambda x: 2.0 * x ** 3 / 3.0,
                         lambda x: x ** 4 / 2.0),
        name="2x",
    )


def truncated_gaussian(loc: float = 0.5, scale: float = 0.25) -> Density1D:
    """Normal(loc, scale) conditioned on ``[0, 1]``; strictly log-concave."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    z0, z1 = -loc / scale, (1.0 - loc) / scale
    Z = special.ndtr(z1) - special.ndtr(z0)
    phi = lambda z: np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)

    def pdf(x):
        return phi((np.asarray(x, dtype=float) - loc) / scale) / (scale * Z)

    def F0(x):
        return (special.ndtr((x - loc) / scale) - special.ndtr(z0)) / Z

    def F1(x):
        z = (x - loc) / scale
        return (loc * (special.ndtr(z) - special.ndtr(z0)) - scale * (phi(z) - phi(z0))) / Z

    def F2(x):
        z = (x - loc) / scale
        dPhi = special.ndtr(z) - special.ndtr(z0)
        return (loc * loc * dPhi - 2 * loc * scale * (phi(z) - phi(z0))
                + scale * scale * (dPhi - (z * phi(z) - z0 * phi(z0)))) / Z

    return Density1D(pdf, log_concave="strict", antiderivatives=(F0, F1, F2),
                     name=f"truncnorm({loc},{scale})")


class Product(_Distribution):
    """Independent coordinates, one 1-D law per axis."""

    def __init__(self, factors: Sequence):
        factors = list(factors)
        if not factors:
            raise ValueError("product needs at least one factor")
        for fac in factors:
            if fac.dim != 1 or not fac.continuous:
                raise ValueError("product factors must be continuous 1-D laws")
        self.factors = factors
        self.dim = len(factors)
        self.lower = np.concatenate([f.lower for f in factors])
        self.upper = np.concatenate([f.upper for f in factors])

    def __repr__(self):
        return f"Product({self.factors})"

    def from_uniform(self, u):
        cols = [fac.from_uniform(u[:, [k]]) for k, fac in enumerate(self.factors)]
        return np.hstack(cols)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1])
        for k, fac in enumerate(self.factors):
            out = out * fac.pdf(x[..., k:k + 1])
        return out

    def mean(self):
        return np.concatenate([f.mean() for f in self.factors])


class Discrete(_Distribution):
    """Uniform law on ``N`` points inside a declared box."""

    continuous = False

    def __init__(self, points, lower=None, upper=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] < 1:
            raise ValueError("discrete law needs at least one point")
        self.points = pts
        self.dim = pts.shape[1]
        self.lower = pts.min(axis=0) if lower is None else np.broadcast_to(
            np.asarray(lower, dtype=float), (self.dim,)).copy()
        self.upper = pts.max(axis=0) if upper is None else np.broadcast_to(
            np.asarray(upper, dtype=float), (self.dim,)).copy()
        if np.any(pts < self.lower) or np.any(pts > self.upper):
            raise ValueError("data points lie outside the declared box")

    def __repr__(self):
        return f"Discrete(N={len(self.points)}, d={self.dim})"

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def sample(self, rng, size):
        return self.from_uniform(rng.random((size, 1)))

    def from_uniform(self, u):
        idx = np.minimum((u[:, 0] * self.n_points).astype(np.int64), self.n_points - 1)
        return self.points[idx]

    def mean(self):
        return self.points.mean(axis=0)

    def cdf(self, x):
        if self.dim != 1:
            raise ValueError("cdf is only defined for 1-D laws")
        srt = np.sort(self.points[:, 0])
        return np.searchsorted(srt, np.asarray(x, dtype=float), side="right") / self.n_points


def load_points_csv(path, lower=None, upper=None) -> Discrete:
    """Read a discrete law from a CSV with a header row and one point per row."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    try:
        [float(v) for v in header]
    except ValueError:
        pass
    else:
        raise ValueError(f"{path}: a header row is required")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: rows do not match the header width")
    return Discrete(data, lower, upper)


# --- Voronoi cell integrals -------------------------------------------------

def _coinciding(weights):
    n = len(weights)
    pairs = []
    for i in range(n):
        same = np.all(weights[i + 1:] == weights[i], axis=1)
        pairs.extend((i, i + 1 + j) for j in np.flatnonzero(same))
    return pairs


def interval_cells(x, lower, upper):
    """Voronoi intervals of 1-D weights ``x``.

    Returns ``(a, b, owner)``: ``owner[i]`` is False for units that share a
    weight with a lower-indexed unit (their cell is empty, ``a = b``).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    order = np.argsort(x, kind="stable")
    xs = x[order]
    keep = np.concatenate([[True], np.diff(xs) > 0])
    reps = order[keep]
    vals = xs[keep]
    bounds = np.concatenate([[lower], 0.5 * (vals[1:] + vals[:-1]), [upper]])
    a = np.zeros(n)
    b = np.zeros(n)
    owner = np.zeros(n, dtype=bool)
    a[reps], b[reps], owner[reps] = bounds[:-1], bounds[1:], True
    return a, b, owner


def _moments_1d(dist, w):
    """Exact cell moments for a 1-D continuous law; ties go to the lowest index."""
    a, b, owner = interval_cells(w[:, 0], dist.lower[0], dist.upper[0])
    m0, m1, m2 = dist.interval_moments(a, b)
    return CellMoments(np.where(owner, m0, 0.0), np.where(owner, m1, 0.0)[:, None],
                       np.where(owner, m2, 0.0))


def _moments_discrete(dist, w):
    pts = dist.points
    d2 = ((pts[:, None, :] - w[None, :, :]) ** 2).sum(axis=2)
    win = np.argmin(d2, axis=1)
    n = w.shape[0]
    N = dist.n_points
    mass = np.bincount(win, minlength=n) / N
    first = np.zeros_like(w, dtype=float)
    np.add.at(first, win, pts / N)
    second = np.bincount(win, weights=(pts ** 2).sum(axis=1), minlength=n) / N
    return CellMoments(mass, first, second)


def _clip_polygon(poly, a, c):
    """Keep the part of convex polygon ``poly`` where ``a . x <= c``."""
    if len(poly) == 0:
        return poly
    s = poly @ a - c
    if np.all(s <= 0):
        return poly
    if np.all(s >= 0):
        return poly[:0]
    out = []
    k = len(poly)
    for i in range(k):
        p, q = poly[i], poly[(i + 1) % k]
        sp, sq = s[i], s[(i + 1) % k]
        if sp <= 0:
            out.append(p)
        if (sp < 0 < sq) or (sq < 0 < sp):
            out.append(p + (sp / (sp - sq)) * (q - p))
    return np.array(out) if out else poly[:0]


def voronoi_polygons(w, lower, upper):
    """Voronoi cells of planar points ``w`` inside a box, as vertex arrays.

    Coinciding points: the lowest index keeps the cell, the others are empty.
    """
    n = w.shape[0]
    box = np.array([[lower[0], lower[1]], [upper[0], lower[1]],
                    [upper[0], upper[1]], [lower[0], upper[1]]])
    sq = (w ** 2).sum(axis=1)
    polys = []
    for i in range(n):
        poly = box
        for j in range(n):
            if j == i:
                continue
            a = 2.0 * (w[j] - w[i])
            if not np.any(a):
                if j < i:
                    poly = poly[:0]
                    break
                continue
            poly = _clip_polygon(poly, a, sq[j] - sq[i])
            if len(poly) == 0:
                break
        polys.append(poly)
    return polys


_GL = np.polynomial.legendre.leggauss(7)


def _triangle_rule():
    x, wt = _GL
    s = 0.5 * (x + 1.0)
    ws = 0.5 * wt
    S, T = np.meshgrid(s, s, indexing="ij")
    W = np.outer(ws, ws) * S
    # collapsed square -> reference triangle (barycentric weights on B-A, C-A)
    return (S * (1 - T)).ravel(), (S * T).ravel(), W.ravel()


_TRI_U, _TRI_V, _TRI_W = _triangle_rule()


def polygon_integrals(poly, pdf):
    """Integrals of ``pdf``, ``x pdf`` and ``|x|^2 pdf`` over a convex polygon."""
    if len(poly) < 3:
        return 0.0, np.zeros(2), 0.0
    A = poly[0]
    B = poly[1:-1]
    C = poly[2:]
    e1, e2 = B - A, C - A
    det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    pts = (A[None, None, :] + _TRI_U[None, :, None] * e1[:, None, :]
           + _TRI_V[None, :, None] * e2[:, None, :])
    wts = det[:, None] * _TRI_W[None, :]
    dens = pdf(pts) * wts
    mass = dens.sum()
    first = (dens[..., None] * pts).sum(axis=(0, 1))
    second = (dens * (pts ** 2).sum(axis=-1)).sum()
    return float(mass), first, float(second)


def _moments_planar(dist, w):
    polys = voronoi_polygons(w, dist.lower, dist.upper)
    n = w.shape[0]
    mass = np.zeros(n)
    first = np.zeros((n, 2))
    second = np.zeros(n)
    for i, poly in enumerate(polys):
        mass[i], first[i], second[i] = polygon_integrals(poly, dist.pdf)
    return CellMoments(mass, first, second)


def _moments_mc(dist, w, n_samples, rng):
    x = dist.sample(rng, n_samples)
    n = w.shape[0]
    win = np.empty(n_samples, dtype=np.int64)
    block = 1 << 16
    for s in range(0, n_samples, block):
        xb = x[s:s + block]
        d2 = ((xb[:, None, :] - w[None, :, :]) ** 2).sum(axis=2)
        win[s:s + block] = np.argmin(d2, axis=1)
    onehot_count = np.bincount(win, minlength=n)
    mass = onehot_count / n_samples
    first = np.zeros_like(w, dtype=float)
    np.add.at(first, win, x)
    first /= n_samples
    sqn = (x ** 2).sum(axis=1)
    second = np.bincount(win, weights=sqn, minlength=n) / n_samples
    # standard errors of sample means of indicator-weighted quantities
    first_sq = np.zeros_like(w, dtype=float)
    np.add.at(first_sq, win, x ** 2)
    first_sq /= n_samples
    second_sq = np.bincount(win, weights=sqn ** 2, minlength=n) / n_samples
    root = np.sqrt(n_samples)
    mass_se = np.sqrt(np.maximum(mass - mass ** 2, 0)) / root
    first_se = np.sqrt(np.maximum(first_sq - first ** 2, 0)) / root
    second_se = np.sqrt(np.maximum(second_sq - second ** 2, 0)) / root
    return CellMoments(mass, first, second, mass_se, first_se, second_se)


def voronoi_moments(dist, weights, method: str = "auto", n_samples: int = 200_000,
                    rng: Optional[np.random.Generator] = None,
                    require_distinct: bool = False) -> CellMoments:
    """Zeroth, first and second moments of ``dist`` over the Voronoi cells.

    Parameters
    ----------
    dist : distribution
    weights : array_like, shape (n, d)
    method : {"auto", "exact", "planar", "mc"}
        ``auto`` picks ``exact`` for 1-D continuous and all discrete laws,
        ``planar`` for continuous boxes in the plane, ``mc`` otherwise.
    n_samples, rng
        Monte Carlo sample size and stream (``mc`` only).  Reusing a stream
        seed across calls gives common random numbers.
    require_distinct : bool
        Raise :class:`DegenerateStateError` on coinciding weights.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    if w.shape[1] != dist.dim:
        raise ValueError(f"state has dimension {w.shape[1]}, law has {dist.dim}")
    if require_distinct:
        pairs = _coinciding(w)
        if pairs:
            raise DegenerateStateError(pairs)
    if method == "auto":
        if not dist.continuous or dist.dim == 1:
            method = "exact"
        elif dist.dim == 2:
            method = "planar"
        else:
            method = "mc"
    if method == "exact":
        if not dist.continuous:
            return _moments_discrete(dist, w)
        if dist.dim != 1:
            raise ValueError("exact cell integrals need a 1-D or discrete law")
        return _moments_1d(dist, w)
    if method == "planar":
        if dist.dim != 2 or not dist.continuous:
            raise ValueError("planar cell integrals need a continuous 2-D law")
        return _moments_planar(dist, w)
    if method == "mc":
        if rng is None:
            rng = np.random.default_rng(0)
        return _moments_mc(dist, w, n_samples, rng)
    raise ValueError(f"unknown method {method!r}")


def cell_statistics(dist, cell, **kwargs) -> CellStats:
    """Mass and conditional mean of ``mu`` on one cell.

    ``cell`` is either an interval ``(a, b)`` of a 1-D law or a pair
    ``(weights, i)`` naming the Voronoi cell of unit ``i`` in a state.
    An empty cell gives mass 0 and a NaN mean.
    """
    first, second = cell
    if np.ndim(first) == 0 and np.ndim(second) == 0:
        if dist.dim != 1:
            raise ValueError("interval cells need a 1-D law")
        a, b = float(first), float(second)
        if b < a:
            raise ValueError("interval must have a <= b")
        if not dist.continuous:
            x = dist.points[:, 0]
            inside = (x >= a) & (x <= b)
            mass = inside.mean()
            mean = np.array([x[inside].mean()]) if inside.any() else np.array([np.nan])
            return CellStats(float(mass), mean)
        m0, m1, _ = dist.interval_moments(a, b)
        m0, m1 = float(m0), float(m1)
        mean = np.array([m1 / m0]) if m0 > 0 else np.array([np.nan])
        return CellStats(m0, mean)
    weights, i = first, int(second)
    mom = voronoi_moments(dist, weights, **kwargs)
    mass = float(mom.mass[i])
    if mass == 0.0:
        return CellStats(0.0, np.full(dist.dim, np.nan))
    mean = mom.first[i] / mass
    if mom.exact:
        return CellStats(mass, mean)
    # delta-method standard error of a ratio of two Monte Carlo means
    mean_se = np.sqrt(mom.first_se[i] ** 2 + (mean * mom.mass_se[i]) ** 2) / mass
    return CellStats(mass, mean, float(mom.mass_se[i]), mean_se)


def voronoi_adjacency(weights, lower=None, upper=None) -> frozenset:
    """Pairs ``(i, j)``, ``i < j``, whose Voronoi cells share a border.

    1-D: consecutive distinct sorted weights.  2-D: cells (clipped to the
    box) with a common edge.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    if w.shape[1] == 1:
        order = np.argsort(w[:, 0], kind="stable")
        return frozenset(tuple(sorted((int(a), int(b))))
                         for a, b in zip(order[:-1], order[1:]))
    if w.shape[1] != 2:
        raise ValueError("adjacency is implemented for d <= 2")
    polys = voronoi_polygons(w, lower, upper)
    sq = (w ** 2).sum(axis=1)
    scale = 1e-10 * max(1.0, float(np.abs(w).max()))
    pairs = set()
    for i, poly in enumerate(polys):
        if len(poly) < 3:
            continue
        for j in range(w.shape[0]):
            if j == i:
                continue
            a = 2.0 * (w[j] - w[i])
            on = np.abs(poly @ a - (sq[j] - sq[i])) <= scale
            if on.sum() >= 2:
                pairs.add((min(i, j), max(i, j)))
    return frozenset(pairs)
