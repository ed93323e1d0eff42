"""Unit lattices and time-invariant neighborhood functions.

Units are addressed by 0-based flattened indices.  On a ``grid-2d``
lattice of shape ``(n1, n2)`` the unit with axis indices ``(i1, i2)``
has flat index ``i1 + n1 * i2``: the first axis varies fastest, so that
weight coordinate ``k`` of a well organized map increases along lattice
axis ``k``.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Lattice",
    "Neighborhood",
    "unit_distance",
    "neighborhood_value",
]


@dataclass(frozen=True)
class Lattice:
    """A 1-D string of ``n`` units or a 2-D grid of ``n1 x n2`` units."""

    kind: str
    dims: tuple

    def __post_init__(self):
        dims = tuple(int(k) for k in np.atleast_1d(self.dims))
        if self.kind == "string-1d":
            if len(dims) != 1:
                raise ValueError("string-1d lattice takes a single size")
        elif self.kind == "grid-2d":
            if len(dims) != 2:
                raise ValueError("grid-2d lattice takes two sizes (n1, n2)")
        else:
            raise ValueError(f"unknown lattice kind {self.kind!r}")
        if min(dims) < 1:
            raise ValueError(f"lattice sizes must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def string(cls, n: int) -> "Lattice":
        return cls("string-1d", (n,))

    @classmethod
    def grid(cls, n1: int, n2: int) -> "Lattice":
        return cls("grid-2d", (n1, n2))

    @property
    def n_units(self) -> int:
        return int(np.prod(self.dims))

    def coords(self, i: int) -> tuple:
        """Axis indices of flat unit ``i``."""
        self._check(i)
        if self.kind == "string-1d":
            return (i,)
        n1 = self.dims[0]
        return (i % n1, i // n1)

    def index(self, *coords: int) -> int:
        if self.kind == "string-1d":
            (i,) = coords
        else:
            i1, i2 = coords
            if not (0 <= i1 < self.dims[0] and 0 <= i2 < self.dims[1]):
                raise IndexError(f"grid coordinates {coords} out of range {self.dims}")
            i = i1 + self.dims[0] * i2
        self._check(i)
        return i

    def _check(self, i):
        if not 0 <= i < self.n_units:
            raise IndexError(f"unit {i} out of range for {self.n_units} units")

    def distance(self, i: int, j: int) -> int:
        self._check(i)
        self._check(j)
        if self.kind == "string-1d":
            return abs(i - j)
        (a1, a2), (b1, b2) = self.coords(i), self.coords(j)
        return max(abs(a1 - b1), abs(a2 - b2))

    def distance_matrix(self) -> np.ndarray:
        """All pairwise unit distances as an ``(n, n)`` integer array."""
        idx = np.arange(self.n_units)
        if self.kind == "string-1d":
            return np.abs(idx[:, None] - idx[None, :])
        n1 = self.dims[0]
        r, c = idx % n1, idx // n1
        return np.maximum(np.abs(r[:, None] - r[None, :]),
                          np.abs(c[:, None] - c[None, :]))

    @property
    def diameter(self) -> int:
        return max(self.dims) - 1


def unit_distance(lattice: Lattice, i: int, j: int) -> int:
    return lattice.distance(i, j)


@dataclass(frozen=True)
class Neighborhood:
    """Neighborhood weights stored per lattice distance.

    ``values[k]`` is the weight given to a unit at distance ``k`` from the
    winner; distances past the table get weight 0.
    """

    values: tuple
    kind: str = "table"
    _array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.size == 0:
            raise ValueError("neighborhood table must be non-empty")
        if vals[0] != 1.0:
            raise ValueError(f"neighborhood weight at distance 0 must be 1, got {vals[0]}")
        if np.any(vals < 0) or np.any(vals > 1):
            raise ValueError("neighborhood weights must lie in [0, 1]")
        if np.any(np.diff(vals) > 0):
            raise ValueError("neighborhood weights must be non-increasing in distance")
        object.__setattr__(self, "values", tuple(float(v) for v in vals))
        object.__setattr__(self, "_array", vals)

    @classmethod
    def step(cls, k: int) -> "Neighborhood":
        """Weight 1 up to distance ``k``, 0 beyond."""
        if k < 0:
            raise ValueError("step radius must be >= 0")
        return cls((1.0,) * (k + 1), kind=f"step({k})")

    @classmethod
    def indicator0(cls) -> "Neighborhood":
        return cls((1.0,), kind="indicator-0")

    @classmethod
    def indicator8(cls) -> "Neighborhood":
        # Chebyshev radius 1 on a grid is the 8-neighbor setting
        return cls((1.0, 1.0), kind="indicator-8")

    @classmethod
    def table(cls, values: Sequence[float]) -> "Neighborhood":
        return cls(tuple(values), kind="table")

    @classmethod
    def from_name(cls, name: str) -> "Neighborhood":
        """Parse ``indicator-0``, ``indicator-8``, ``step(k)`` or ``table(a, b, ...)``."""
        name = name.strip().replace(" ", "")
        if name == "indicator-0":
            return cls.indicator0()
        if name == "indicator-8":
            return cls.indicator8()
        if name.startswith("step(") and name.endswith(")"):
            return cls.step(int(name[5:-1]))
        if name.startswith("table(") and name.endswith(")"):
            return cls.table([float(v) for v in name[6:-1].split(",")])
        raise ValueError(f"cannot parse neighborhood {name!r}")

    @property
    def is_binary(self) -> bool:
        return bool(np.all(self._array == 1.0))

    def __call__(self, dist):
        dist = np.asarray(dist)
        if np.any(dist < 0):
            raise ValueError("distance must be non-negative")
        out = np.zeros(dist.shape, dtype=float)
        inside = dist < self._array.size
        out[inside] = self._array[dist[inside]]
        return out if out.ndim else float(out)

    def matrix(self, lattice: Lattice) -> np.ndarray:
        """The ``(n, n)`` matrix ``Lambda[winner, unit]`` for ``lattice``."""
        return self(lattice.distance_matrix())

    def satisfies_h_lambda(self, n: int) -> bool:
        """True iff some ``k0 < (n - 1) / 2`` has ``Lambda(k0 + 1) < Lambda(k0)``."""
        k0 = 0
        while k0 < (n - 1) / 2:
            if self(k0 + 1) < self(k0):
                return True
            k0 += 1
        return False


def neighborhood_value(nbhd: Neighborhood, dist: int) -> float:
    return nbhd(dist)
