"""Transect grid geometry, per-stage actions and path bookkeeping.

Columns and rows are 1-indexed: column 1 is the leftmost, row 1 the top.
Location ``(col, row)`` sits at ``((col-1)*spacing_h, (row-1)*spacing_v)``.
Flat location indices are column-major (column 1 rows 1..r first), which is
also the canonical order of unobserved locations in the metrics.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArity, OutOfRange


@dataclass(frozen=True)
class TransectGrid:
    rows: int
    cols: int
    spacing_h: float
    spacing_v: float

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and one column")
        if not (self.spacing_h > 0 and self.spacing_v > 0):
            raise ValueError("grid spacings must be positive")
        if self.cols <= self.rows:
            warnings.warn(
                f"transect grid {self.rows}x{self.cols} is not longer than it is tall",
                stacklevel=3,
            )

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def location(self, col: int, row: int) -> tuple[float, float]:
        if not (1 <= col <= self.cols and 1 <= row <= self.rows):
            raise OutOfRange(f"(col={col}, row={row}) outside {self.rows}x{self.cols} grid")
        return ((col - 1) * self.spacing_h, (row - 1) * self.spacing_v)

    def index(self, col: int, row: int) -> int:
        """Flat column-major index of ``(col, row)``."""
        if not (1 <= col <= self.cols and 1 <= row <= self.rows):
            raise OutOfRange(f"(col={col}, row={row}) outside {self.rows}x{self.cols} grid")
        return (col - 1) * self.rows + (row - 1)

    def locations(self, cols: int | None = None) -> np.ndarray:
        """Coordinates of the first ``cols`` columns, column-major, shape (cols*r, 2)."""
        c = self.cols if cols is None else cols
        col = np.repeat(np.arange(c), self.rows)
        row = np.tile(np.arange(self.rows), c)
        return np.column_stack([col * self.spacing_h, row * self.spacing_v]).astype(float)


@dataclass(frozen=True, order=True)
class StageAction:
    """Rows sampled in one column by the ``k`` robots (sorted, distinct)."""

    rows: tuple[int, ...]

    def __post_init__(self):
        rows = tuple(int(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        if not rows:
            raise InvalidArity("an action needs at least one row")
        if any(b <= a for a, b in zip(rows, rows[1:])):
            raise ValueError(f"action rows must be strictly increasing: {rows}")
        if rows[0] < 1:
            raise OutOfRange(f"row index {rows[0]} < 1")

    @property
    def k(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def as_action(a) -> StageAction:
    return a if isinstance(a, StageAction) else StageAction(tuple(sorted(a)))


@dataclass(frozen=True)
class Path:
    """One action per column, all with the same number of robots."""

    actions: tuple[StageAction, ...]

    def __post_init__(self):
        acts = tuple(as_action(a) for a in self.actions)
        object.__setattr__(self, "actions", acts)
        if not acts:
            raise ValueError("a path needs at least one stage")
        if len({a.k for a in acts}) != 1:
            raise ValueError("every stage of a path must use the same number of robots")

    @property
    def n(self) -> int:
        return len(self.actions)

    @property
    def k(self) -> int:
        return self.actions[0].k

    def __iter__(self):
        return iter(self.actions)

    def __len__(self):
        return len(self.actions)

    def __getitem__(self, i):
        return self.actions[i]

    def as_rows(self) -> list[tuple[int, ...]]:
        return [a.rows for a in self.actions]

    def check(self, grid: TransectGrid) -> None:
        if self.n != grid.cols:
            raise ValueError(f"path has {self.n} stages, grid has {grid.cols} columns")
        for a in self.actions:
            if a.rows[-1] > grid.rows:
                raise OutOfRange(f"row {a.rows[-1]} outside grid with {grid.rows} rows")


def n_actions(r: int, k: int) -> int:
    if not 1 <= k <= r:
        raise InvalidArity(f"need 1 <= k <= r, got k={k}, r={r}")
    return math.comb(r, k)


def enumerate_actions(r: int, k: int) -> list[StageAction]:
    """All sorted ``k``-subsets of rows ``1..r`` in lexicographic order."""
    n_actions(r, k)
    return [StageAction(c) for c in itertools.combinations(range(1, r + 1), k)]


def action_table(r: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based row arrays for every action and its complement.

    Returns ``(taken, left)`` with shapes ``(chi, k)`` and ``(chi, r-k)``.
    """
    n_actions(r, k)
    taken = np.array(list(itertools.combinations(range(r), k)), dtype=np.intp).reshape(-1, k)
    all_rows = np.arange(r)
    left = np.array([np.setdiff1d(all_rows, t) for t in taken], dtype=np.intp).reshape(len(taken), r - k)
    return taken, left


def complement(a, r: int) -> tuple[int, ...]:
    """Rows of the column not covered by ``a``, sorted."""
    chosen = set(as_action(a).rows)
    return tuple(j for j in range(1, r + 1) if j not in chosen)


def action_locations(g: TransectGrid, col: int, a) -> np.ndarray:
    """Coordinates of the rows of ``a`` in column ``col``, shape (k, 2)."""
    rows = a.rows if isinstance(a, StageAction) else tuple(sorted(a))
    return np.array([g.location(col, row) for row in rows], dtype=float).reshape(-1, 2)


def path_indices(g: TransectGrid, path: Path | Iterable) -> np.ndarray:
    """Flat indices of all sampled locations of a path, stage by stage."""
    path = path if isinstance(path, Path) else Path(tuple(path))
    return np.array([g.index(i, row) for i, a in enumerate(path, start=1) for row in a.rows], dtype=np.intp)


def unobserved_indices(g: TransectGrid, path: Path | Iterable) -> np.ndarray:
    """Flat indices of every location not on the path, column-major."""
    taken = np.zeros(g.size, dtype=bool)
    taken[path_indices(g, path)] = True
    return np.flatnonzero(~taken)


def path_locations(g: TransectGrid, path) -> np.ndarray:
    return g.locations()[path_indices(g, path)]


def unobserved_locations(g: TransectGrid, path) -> np.ndarray:
    return g.locations()[unobserved_indices(g, path)]


def window(p: Path | Sequence, i: int, m: int) -> tuple[StageAction, ...]:
    """Actions of stages ``max(1, i-m) .. i-1`` (truncated at the left edge)."""
    acts = p.actions if isinstance(p, Path) else tuple(as_action(a) for a in p)
    if not 1 <= i <= len(acts):
        raise OutOfRange(f"stage {i} outside path of length {len(acts)}")
    return tuple(acts[max(1, i - m) - 1 : i - 1])
