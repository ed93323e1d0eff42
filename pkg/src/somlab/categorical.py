"""Self-organizing maps of categorical data.

Two pipelines map the modalities of qualitative variables onto a lattice,
so that associated modalities land in the same or neighboring units:

* ``korresp_run`` for two variables, from a ``p x q`` contingency table;
* ``kacm_run`` for ``K`` variables, from their Burt table.

Distances between profiles use the chi-square metric

    d^2(u, v) = sum_t (u_t - v_t)^2 / f_t

where ``f_t`` is the marginal frequency of coordinate ``t``.
"""

import csv
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import _kernels
from .engine import GainSchedule
from .reports import write_table
from .topology import Lattice, Neighborhood

__all__ = [
    "IngestionError",
    "ContingencyTable",
    "BurtTable",
    "ModalityMap",
    "chi2_distance",
    "korresp_build_D",
    "korresp_run",
    "build_burt",
    "check_invariants",
    "kacm_run",
    "read_contingency_csv",
    "read_responses_csv",
    "default_lattice",
    "default_schedule",
]


class IngestionError(ValueError):
    pass


def chi2_distance(u, v, masses) -> float:
    """Chi-square distance between two profiles with reference masses.

    Examples
    --------
    >>> chi2_distance([0.5, 0.5], [0.25, 0.75], [0.5, 0.5])
    0.5
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    f = np.asarray(masses, dtype=float)
    if not (u.shape == v.shape == f.shape) or u.ndim != 1:
        raise ValueError("profiles and masses must be 1-D arrays of equal length")
    if np.any(f <= 0):
        raise ValueError("chi-square masses must be positive (a modality was never observed)")
    return float(np.sqrt(np.sum((u - v) ** 2 / f)))


@dataclass
class ContingencyTable:
    """Counts ``n_ij`` crossing the modalities of two variables."""

    counts: np.ndarray
    row_labels: Optional[List[str]] = None
    col_labels: Optional[List[str]] = None
    row_name: str = "rows"
    col_name: str = "columns"

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2:
            raise ValueError("a contingency table is a 2-D array")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        if c.sum() <= 0:
            raise ValueError("the grand total must be positive")
        self.counts = c
        p, q = c.shape
        self.row_labels = list(self.row_labels) if self.row_labels is not None else [f"r{i + 1}" for i in range(p)]
        self.col_labels = list(self.col_labels) if self.col_labels is not None else [f"c{j + 1}" for j in range(q)]
        if len(self.row_labels) != p or len(self.col_labels) != q:
            raise ValueError("label counts do not match the table shape")

    @property
    def shape(self):
        return self.counts.shape

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def row_masses(self) -> np.ndarray:
        return self.frequencies.sum(axis=1)

    @property
    def col_masses(self) -> np.ndarray:
        return self.frequencies.sum(axis=0)

    def _nonempty(self):
        if np.any(self.counts.sum(axis=1) == 0):
            raise ValueError(f"row {int(np.argmin(self.counts.sum(axis=1)))} of the table is empty")
        if np.any(self.counts.sum(axis=0) == 0):
            raise ValueError(f"column {int(np.argmin(self.counts.sum(axis=0)))} of the table is empty")

    def row_profiles(self) -> np.ndarray:
        """``r(i)``: row ``i`` divided by its total."""
        self._nonempty()
        c = self.counts.astype(float)
        return c / c.sum(axis=1, keepdims=True)

    def col_profiles(self) -> np.ndarray:
        """``c(j)``: column ``j`` divided by its total, as rows."""
        self._nonempty()
        c = self.counts.astype(float)
        return (c / c.sum(axis=0, keepdims=True)).T


def korresp_build_D(table: ContingencyTable) -> np.ndarray:
    """The ``(p + q) x (q + p)`` data matrix.

    Row ``i < p`` is ``(r(i), c(j(i)))`` with ``j(i)`` the most probable
    column given row ``i``; row ``p + j`` is ``(r(i(j)), c(j))`` likewise.
    Ties go to the lowest index.
    """
    r = table.row_profiles()
    c = table.col_profiles()
    j_of_i = np.argmax(r, axis=1)
    i_of_j = np.argmax(c, axis=1)
    top = np.hstack([r, c[j_of_i]])
    bottom = np.hstack([r[i_of_j], c])
    return np.vstack([top, bottom])


@dataclass
class ModalityMap:
    """Unit assigned to each modality on a lattice."""

    labels: List[str]
    questions: List[str]
    units: np.ndarray
    lattice: Lattice
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.units = np.asarray(self.units, dtype=np.int64)
        if not (len(self.labels) == len(self.questions) == len(self.units)):
            raise ValueError("labels, questions and units must have equal length")

    def _index(self, modality) -> int:
        if isinstance(modality, (int, np.integer)):
            return int(modality)
        q, _, lab = modality.partition(":") if ":" in modality else (None, None, modality)
        for k, (qq, ll) in enumerate(zip(self.questions, self.labels)):
            if ll == lab and (q is None or q == qq):
                return k
        raise KeyError(modality)

    def unit_of(self, modality) -> int:
        return int(self.units[self._index(modality)])

    def coords(self, modality) -> tuple:
        return self.lattice.coords(self.unit_of(modality))

    def lattice_distance(self, a, b) -> int:
        return self.lattice.distance(self.unit_of(a), self.unit_of(b))

    def adjacent(self, a, b) -> bool:
        """Same unit or neighboring units (lattice distance at most 1)."""
        return self.lattice_distance(a, b) <= 1

    def classes(self) -> Dict[int, List[str]]:
        out: Dict[int, List[str]] = {}
        for q, lab, u in zip(self.questions, self.labels, self.units):
            out.setdefault(int(u), []).append(f"{q}:{lab}")
        return dict(sorted(out.items()))

    def rows(self) -> list:
        out = []
        for q, lab, u in zip(self.questions, self.labels, self.units):
            c = self.lattice.coords(int(u))
            row, col = (c[1], c[0]) if len(c) == 2 else (0, c[0])
            out.append(dict(modality=lab, question=q, unit_row=row, unit_col=col))
        return out

    def to_csv(self, path) -> None:
        write_table(path, ["modality", "question", "unit_row", "unit_col"], self.rows())

    def report_text(self) -> str:
        lines = []
        for u, members in self.classes().items():
            c = self.lattice.coords(u)
            pos = f"({c[1]}, {c[0]})" if len(c) == 2 else f"({c[0]})"
            lines.append(f"unit {u} {pos}: " + ", ".join(members))
        return "\n".join(lines) + "\n"

    def __eq__(self, other):
        return (isinstance(other, ModalityMap) and self.labels == other.labels
                and self.questions == other.questions
                and np.array_equal(self.units, other.units) and self.lattice == other.lattice)


def default_lattice() -> Lattice:
    return Lattice.grid(7, 7)


def default_schedule(steps: int) -> GainSchedule:
    """Constant 0.1 for the first half of the run, then decay in ``1/t``."""
    return GainSchedule.two_phase(0.1, max(1, steps // 2), 1.0)


def _initial_weights(D, n_units, rng):
    # random convex mixtures of data rows, so every weight is a valid profile pair
    mix = rng.dirichlet(np.ones(D.shape[0]), size=n_units)
    return np.ascontiguousarray(mix @ D)


def _assign(D, w, cw_rows):
    units = np.empty(D.shape[0], dtype=np.int64)
    for k in range(D.shape[0]):
        d2 = (cw_rows[k] * (w - D[k]) ** 2).sum(axis=1)
        units[k] = int(np.argmin(d2))
    return units


def korresp_run(table: ContingencyTable, steps: int, rng: np.random.Generator,
                lattice: Optional[Lattice] = None, schedule: Optional[GainSchedule] = None,
                nbhd: Optional[Neighborhood] = None, winner: str = "block") -> ModalityMap:
    """Map the row and column modalities of a contingency table.

    Inputs alternate strictly between a random row-type line of the data
    matrix (even steps) and a random column-type line (odd steps).  With
    ``winner="block"`` a row-type input is compared on the first ``q``
    coordinates only, with masses ``f_.j``, and a column-type input on the
    last ``p`` coordinates, with masses ``f_i.``; ``winner="full"`` uses
    the whole vector with both mass sets.  The full weight vector is
    updated in both cases.
    """
    if winner not in ("block", "full"):
        raise ValueError("winner must be 'block' or 'full'")
    lattice = lattice or default_lattice()
    schedule = schedule or default_schedule(steps)
    nbhd = nbhd or Neighborhood.step(1)
    D = korresp_build_D(table)
    p, q = table.shape
    inv_col = 1.0 / table.col_masses
    inv_row = 1.0 / table.row_masses
    if winner == "block":
        cw_table = np.array([np.r_[inv_col, np.zeros(p)], np.r_[np.zeros(q), inv_row]])
    else:
        full = np.r_[inv_col, inv_row]
        cw_table = np.array([full, full])
    w = _initial_weights(D, lattice.n_units, rng)
    if steps > 0:
        kind = np.arange(steps) % 2
        pick = np.where(kind == 0, rng.integers(0, p, steps), p + rng.integers(0, q, steps))
        gains = np.ascontiguousarray(schedule(np.arange(steps)), dtype=np.float64)
        _kernels.som_steps(w, np.ascontiguousarray(D[pick]), gains, nbhd.matrix(lattice),
                           cw_table, kind.astype(np.int64))
    cw_rows = np.vstack([np.repeat(cw_table[:1], p, axis=0), np.repeat(cw_table[1:], q, axis=0)])
    units = _assign(D, w, cw_rows)
    labels = table.row_labels + table.col_labels
    questions = [table.row_name] * p + [table.col_name] * q
    return ModalityMap(labels, questions, units, lattice, w)


@dataclass
class BurtTable:
    """Symmetric ``M x M`` table of all pairwise crossings of ``K`` questions."""

    counts: np.ndarray
    sizes: tuple
    questions: List[str] = field(default_factory=list)
    modalities: List[List[str]] = field(default_factory=list)
    n_individuals: int = 0

    @property
    def M(self) -> int:
        return int(sum(self.sizes))

    @property
    def K(self) -> int:
        return len(self.sizes)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def block(self, k: int, l: int) -> np.ndarray:
        o = self.offsets
        return self.counts[o[k]:o[k + 1], o[l]:o[l + 1]]

    @property
    def modality_counts(self) -> np.ndarray:
        return np.diag(self.counts).copy()

    @property
    def labels(self) -> List[str]:
        return [lab for mods in self.modalities for lab in mods]

    @property
    def question_of(self) -> List[str]:
        return [q for q, mods in zip(self.questions, self.modalities) for _ in mods]


def build_burt(responses, modalities: Optional[Sequence[Sequence]] = None,
               questions: Optional[Sequence[str]] = None) -> BurtTable:
    """Burt table ``Z^T Z`` of ``N`` individuals answering ``K`` questions.

    ``responses`` holds one row of ``K`` answers per individual.  Without
    ``modalities`` each question's modalities are its sorted observed
    answers.
    """
    rows = [list(r) for r in responses]
    if not rows:
        raise IngestionError("no individuals: the Burt table would be all zero")
    K = len(rows[0])
    for n, r in enumerate(rows):
        if len(r) != K:
            raise IngestionError(f"row {n} has {len(r)} answers, expected {K}")
    questions = list(questions) if questions is not None else [f"q{k + 1}" for k in range(K)]
    if modalities is None:
        modalities = [sorted({r[k] for r in rows}) for k in range(K)]
    modalities = [list(m) for m in modalities]
    if len(modalities) != K or len(questions) != K:
        raise IngestionError("one modality list and one name per question are required")
    lookup = [{m: i for i, m in enumerate(mods)} for mods in modalities]
    sizes = tuple(len(m) for m in modalities)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    Z = np.zeros((len(rows), int(offsets[-1])), dtype=np.int64)
    for n, r in enumerate(rows):
        for k, ans in enumerate(r):
            try:
                Z[n, offsets[k] + lookup[k][ans]] = 1
            except KeyError:
                raise IngestionError(
                    f"row {n}, question {questions[k]!r}: {ans!r} is not a valid modality") from None
    B = Z.T @ Z
    return BurtTable(B, sizes, questions, [[str(m) for m in mods] for mods in modalities], len(rows))


def check_invariants(burt: BurtTable) -> Dict[str, bool]:
    """Exact integer checks of the Burt table structure."""
    B = burt.counts
    out = dict(symmetric=bool(np.array_equal(B, B.T)))
    diag_ok = True
    rowsum_ok = True
    for k in range(burt.K):
        Bkk = burt.block(k, k)
        diag_ok &= bool(np.array_equal(Bkk, np.diag(np.diag(Bkk))))
        for l in range(burt.K):
            if l != k:
                rowsum_ok &= bool(np.array_equal(burt.block(k, l).sum(axis=1), np.diag(Bkk)))
    out["diagonal_blocks"] = diag_ok
    out["block_row_sums"] = rowsum_ok
    out["total"] = bool(B.sum() == burt.K ** 2 * burt.n_individuals)
    return out


def kacm_run(burt: BurtTable, steps: int, rng: np.random.Generator,
             lattice: Optional[Lattice] = None, schedule: Optional[GainSchedule] = None,
             nbhd: Optional[Neighborhood] = None) -> ModalityMap:
    """Map all modalities of a Burt table.

    Rows of the table are normalized to profiles and drawn with probability
    proportional to the modality count ``B_tt``.  The winner uses the
    chi-square metric with masses equal to the overall modality
    frequencies.  Modalities never observed are dropped with a warning.
    """
    lattice = lattice or default_lattice()
    schedule = schedule or default_schedule(steps)
    nbhd = nbhd or Neighborhood.step(1)
    counts = burt.modality_counts
    keep = np.flatnonzero(counts > 0)
    labels = [burt.labels[t] for t in keep]
    questions = [burt.question_of[t] for t in keep]
    if keep.size < burt.M:
        dropped = [f"{burt.question_of[t]}:{burt.labels[t]}" for t in np.flatnonzero(counts == 0)]
        warnings.warn(f"zero-frequency modalities excluded: {', '.join(dropped)}", stacklevel=2)
    B = burt.counts[np.ix_(keep, keep)].astype(float)
    X = B / B.sum(axis=1, keepdims=True)
    freq = B.sum(axis=0) / B.sum()
    cw = (1.0 / freq)[None, :]
    w = _initial_weights(X, lattice.n_units, rng)
    if steps > 0:
        prob = counts[keep] / counts[keep].sum()
        pick = rng.choice(keep.size, size=steps, p=prob)
        gains = np.ascontiguousarray(schedule(np.arange(steps)), dtype=np.float64)
        _kernels.som_steps(w, np.ascontiguousarray(X[pick]), gains, nbhd.matrix(lattice),
                           cw, np.zeros(steps, dtype=np.int64))
    units = _assign(X, w, np.repeat(cw, X.shape[0], axis=0))
    return ModalityMap(labels, questions, units, lattice, w)


def read_contingency_csv(path, row_name: str = "rows", col_name: str = "columns") -> ContingencyTable:
    """Header row of column labels (first cell ignored), then ``label, counts...``."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if len(rows) < 2:
        raise IngestionError(f"{path}: need a header row and at least one data row")
    col_labels = [c.strip() for c in rows[0][1:]]
    row_labels, counts = [], []
    for n, r in enumerate(rows[1:], start=1):
        if len(r) != len(col_labels) + 1:
            raise IngestionError(f"{path}: row {n} has {len(r) - 1} counts, expected {len(col_labels)}")
        row_labels.append(r[0].strip())
        try:
            counts.append([int(v) for v in r[1:]])
        except ValueError:
            raise IngestionError(f"{path}: row {n} holds a non-integer count") from None
    return ContingencyTable(np.array(counts, dtype=np.int64), row_labels, col_labels, row_name, col_name)


def read_responses_csv(path) -> BurtTable:
    """Individuals x questions, header = question names, cells = modality labels."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        rows = [[c.strip() for c in r] for r in reader if r]
    return build_burt(rows, questions=header)
