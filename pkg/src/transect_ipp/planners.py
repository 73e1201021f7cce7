"""Path planners for k-robot transect sampling.

Six planners share one request type:

``mepp_m``
    Windowed maximum-entropy dynamic program of Markov order ``m``.
``m2ipp_m``
    Windowed maximum-mutual-information dynamic program (window ``2m``).
``gmepp`` / ``gm2ipp``
    Forward greedy planners conditioning on the full history.
``exact_mepp`` / ``exact_m2ipp``
    Exhaustive enumeration over all ``chi**n`` paths (desk-scale oracles).

Internally an action is an index into the lexicographic action list
(:func:`transect.enumerate_actions`) and a window of ``a`` consecutive actions
is the base-``chi`` number whose most significant digit is the oldest action.

Stationarity cache
------------------
The kernel depends only on coordinate differences, so the reward of taking
action ``x_i`` after window ``x_{i-m:i-1}`` does not depend on ``i``. The
dynamic programs therefore factorize each distinct joint entropy once, on a
block of ``m+1`` (resp. ``2m+1``) leading columns, and reuse the resulting
reward table at every stage. For ``mepp_m`` this performs exactly
``chi**(m+1) + chi**m`` factorizations independent of ``n``; the
``entropy_evals`` counter instead reports the entropy terms consumed by the
recursion, ``chi**m + (n-m) * chi**(m+1)``, which grows linearly in ``n``.
For ``m2ipp_m``, ``mi_evals`` is ``chi**(2m) + (n-2m) * chi**(2m+1)``.

Ties
----
Every argmax picks the first candidate (lexicographic order) whose value is
within ``TIE_TOL`` of the maximum. Exhaustive planners apply the same rule
over paths in lexicographic order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import BudgetExceeded, NoUnobserved, UnknownWindow
from .gp_core import (
    EvalCounter,
    GpHyperParams,
    conditional_entropy,
    cov_matrix,
    mutual_information,
    subset_entropies,
)
from .transect import (
    Path,
    StageAction,
    TransectGrid,
    action_table,
    as_action,
    enumerate_actions,
    n_actions,
)

ALGORITHMS = ("mepp_m", "m2ipp_m", "gmepp", "gm2ipp", "exact_mepp", "exact_m2ipp")
DP_ALGORITHMS = ("mepp_m", "m2ipp_m")
TIE_TOL = 1e-12
DEFAULT_BUDGET = 10**7

# paths per chunk in the exhaustive planners
_PATH_CHUNK = 1 << 16


@dataclass(frozen=True)
class PlanRequest:
    grid: TransectGrid
    params: GpHyperParams
    k: int
    algorithm: str
    m: int | None = None
    budget_guard: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        n_actions(self.grid.rows, self.k)
        if self.algorithm in DP_ALGORITHMS:
            if self.m is None or self.m < 1:
                raise ValueError(f"{self.algorithm} needs a Markov order m >= 1")
            n = self.grid.cols
            if self.algorithm == "mepp_m" and not self.m < n:
                raise ValueError(f"mepp_m needs m < n (m={self.m}, n={n})")
            if self.algorithm == "m2ipp_m" and not 2 * self.m < n:
                raise ValueError(f"m2ipp_m needs 2m < n (m={self.m}, n={n})")
        if self.budget_guard < 1:
            raise ValueError("budget_guard must be positive")

    @property
    def chi(self) -> int:
        return n_actions(self.grid.rows, self.k)


@dataclass
class ValueTable:
    """Optimal values and successor actions for every window of every stage.

    Row ``s`` of ``values`` / ``best`` belongs to stage ``first_stage + s``;
    the last row is the terminal stage ``n``. Column ``w`` is the window whose
    base-``chi`` digits are the action indices of the previous ``arity``
    stages, oldest first.
    """

    kind: str
    m: int
    arity: int
    n: int
    first_stage: int
    actions: tuple[StageAction, ...]
    values: np.ndarray
    best: np.ndarray

    @property
    def chi(self) -> int:
        return len(self.actions)

    @property
    def stages(self) -> range:
        return range(self.first_stage, self.n + 1)

    def window_index(self, window) -> int:
        window = tuple(window)
        if len(window) != self.arity:
            raise ValueError(f"window must have {self.arity} actions, got {len(window)}")
        lookup = {a: j for j, a in enumerate(self.actions)}
        w = 0
        for a in window:
            try:
                j = lookup[as_action(a)]
            except (KeyError, ValueError) as exc:
                raise UnknownWindow(f"action {a!r} is not a valid action") from exc
            w = w * self.chi + j
        return w

    def value(self, window, stage: int | None = None) -> float:
        s = self._row(stage)
        return float(self.values[s, self.window_index(window)])

    def _row(self, stage):
        stage = self.first_stage if stage is None else stage
        if stage not in self.stages:
            raise UnknownWindow(f"stage {stage} has no table (stages {self.first_stage}..{self.n})")
        return stage - self.first_stage


@dataclass
class PlanResult:
    algorithm: str
    path: Path
    objective: float
    entropy_evals: int = 0
    mi_evals: int = 0
    factorizations: int = 0
    work: int = 0
    wall_time: float = 0.0
    table: ValueTable | None = field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "objective": self.objective,
            "entropy_evals": self.entropy_evals,
            "mi_evals": self.mi_evals,
            "factorizations": self.factorizations,
            "work": self.work,
            "wall_time": self.wall_time,
        }


def first_argmax(values, tol: float = TIE_TOL) -> int:
    """Index of the first entry within ``tol`` of the maximum of a 1-D array."""
    return int(_backend.kernels.first_argmax(np.asarray(values, dtype=float)[None, :], tol)[0])


def _digits(chi: int, length: int) -> np.ndarray:
    """All base-``chi`` digit strings of ``length``, lexicographic, shape (chi**length, length)."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.intp)
    grids = np.indices((chi,) * length).reshape(length, -1).T
    return np.ascontiguousarray(grids, dtype=np.intp)


def _digits_range(chi: int, length: int, lo: int, hi: int) -> np.ndarray:
    e = np.arange(lo, hi, dtype=np.int64)
    powers = chi ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return ((e[:, None] // powers[None, :]) % chi).astype(np.intp)


def _select(digits, cols, table, r):
    """Flat block indices of ``table[digits[:, j]]`` rows for each column ``j`` in ``cols``."""
    parts = [j * r + table[digits[:, j]] for j in cols]
    if not parts:
        return np.zeros((len(digits), 0), dtype=np.intp)
    return np.concatenate(parts, axis=1)


def _block_entropies(K, digits, x_cols, u_cols, taken, left, r, counter):
    idx = np.concatenate(
        [_select(digits, x_cols, taken, r), _select(digits, u_cols, left, r)], axis=1
    )
    return subset_entropies(K, idx, counter)


def _check_budget(count, req, what):
    if count > req.budget_guard:
        raise BudgetExceeded(f"{req.algorithm}: {what} = {count} exceeds budget_guard {req.budget_guard}")


def _trace(prefix_digits, w, best, chi, arity, steps):
    """Follow the policy table from window ``w`` for ``steps`` stages."""
    picks = list(int(d) for d in prefix_digits)
    stride = chi ** (arity - 1)
    for s in range(steps):
        a = int(best[s, w])
        picks.append(a)
        w = (w % stride) * chi + a
    return picks


def _to_path(picks, actions):
    return Path(tuple(actions[a] for a in picks))


def build_mepp_table(grid: TransectGrid, params: GpHyperParams, k: int, m: int, counter=None):
    """Reward tables of the order-``m`` entropy recursion.

    Returns ``(term, h_window)`` where ``term[w, a]`` is the conditional
    entropy of action ``a`` given window ``w`` and ``h_window[w]`` the joint
    entropy of window ``w`` placed in the first ``m`` columns.
    """
    r = grid.rows
    taken, left = action_table(r, k)
    chi = len(taken)
    K = cov_matrix(grid.locations(cols=m + 1), params)
    h_ext = _block_entropies(K, _digits(chi, m + 1), range(m + 1), (), taken, left, r, counter)
    h_window = _block_entropies(K, _digits(chi, m), range(m), (), taken, left, r, counter)
    term = h_ext.reshape(chi**m, chi) - h_window[:, None]
    return np.ascontiguousarray(term), h_window


def solve_mepp_m(req: PlanRequest) -> PlanResult:
    t0 = time.perf_counter()
    grid, k, m, n = req.grid, req.k, req.m, req.grid.cols
    chi = req.chi
    _check_budget(chi ** (m + 1), req, "chi**(m+1)")
    counter = EvalCounter()
    term, h_window = build_mepp_table(grid, req.params, k, m, counter)

    values, best = _backend.kernels.dp_backward(term, term, n - m - 1, TIE_TOL)
    first = h_window + values[0]
    w = first_argmax(first)
    actions = tuple(enumerate_actions(grid.rows, k))
    picks = _trace(_digits_range(chi, m, w, w + 1)[0], w, best, chi, m, n - m)

    counter.entropy_evals = chi**m + (n - m) * chi ** (m + 1)
    table = ValueTable("mepp_m", m, m, n, m + 1, actions, values, best)
    return PlanResult(
        "mepp_m",
        _to_path(picks, actions),
        float(first[w]),
        entropy_evals=counter.entropy_evals,
        factorizations=counter.factorizations,
        work=counter.work,
        wall_time=time.perf_counter() - t0,
        table=table,
    )


def build_m2ipp_tables(grid: TransectGrid, params: GpHyperParams, k: int, m: int, counter=None):
    """Reward tables of the order-``m`` mutual-information recursion.

    Returns ``(interior, terminal, first)``. With the window ``x_{i-2m:i-1}``
    in block columns ``1..2m`` and the action in column ``2m+1``:

    * ``interior[w, a] = I(x_{i-m}; u_{i-2m:i} | x_{i-2m:i-m-1})``
    * ``terminal[w, a] = I(x_{i-m:i}; u_{i-2m:i} | x_{i-2m:i-m-1})``
    * ``first[w] = I(x_{1:m}; u_{1:2m})`` for the first ``2m`` columns.

    Each conditional MI is assembled from four joint entropies,
    ``I(A;B|C) = H(A,C) - H(C) - H(A,B,C) + H(B,C)``.
    """
    r = grid.rows
    taken, left = action_table(r, k)
    chi = len(taken)
    c = 2 * m + 1
    K = cov_matrix(grid.locations(cols=c), params)
    D = _digits(chi, c)
    cond = range(m)
    all_cols = range(c)

    def ent(digits, x_cols, u_cols):
        return _block_entropies(K, digits, x_cols, u_cols, taken, left, r, counter)

    h_c = ent(_digits(chi, m), cond, ())
    h_ac = ent(_digits(chi, m + 1), range(m + 1), ())
    h_bc = ent(D, cond, all_cols)
    h_abc = ent(D, range(m + 1), all_cols)
    h_x = ent(D, all_cols, ())
    h_all = subset_entropies(K, np.arange(c * r)[None, :], counter)[0]

    e = np.arange(chi**c)
    h_c_e = h_c[e // chi ** (m + 1)]
    interior = h_ac[e // chi**m] - h_c_e - h_abc + h_bc
    terminal = h_x - h_c_e - h_all + h_bc

    D2 = _digits(chi, 2 * m)
    h_u2 = ent(D2, (), range(2 * m))
    h_xu2 = ent(D2, cond, range(2 * m))
    first = h_c[np.arange(chi ** (2 * m)) // chi**m] + h_u2 - h_xu2

    shape = (chi ** (2 * m), chi)
    return (
        np.ascontiguousarray(interior.reshape(shape)),
        np.ascontiguousarray(terminal.reshape(shape)),
        first,
    )


def solve_m2ipp_m(req: PlanRequest) -> PlanResult:
    t0 = time.perf_counter()
    grid, k, m, n = req.grid, req.k, req.m, req.grid.cols
    if k >= grid.rows:
        raise NoUnobserved("m2ipp_m needs k < r")
    chi = req.chi
    _check_budget(chi ** (2 * m + 1), req, "chi**(2m+1)")
    counter = EvalCounter()
    interior, terminal, first_mi = build_m2ipp_tables(grid, req.params, k, m, counter)

    values, best = _backend.kernels.dp_backward(interior, terminal, n - 2 * m - 1, TIE_TOL)
    first = first_mi + values[0]
    w = first_argmax(first)
    actions = tuple(enumerate_actions(grid.rows, k))
    picks = _trace(_digits_range(chi, 2 * m, w, w + 1)[0], w, best, chi, 2 * m, n - 2 * m)

    counter.mi_evals = chi ** (2 * m) + (n - 2 * m) * chi ** (2 * m + 1)
    table = ValueTable("m2ipp_m", m, 2 * m, n, 2 * m + 1, actions, values, best)
    return PlanResult(
        "m2ipp_m",
        _to_path(picks, actions),
        float(first[w]),
        mi_evals=counter.mi_evals,
        factorizations=counter.factorizations,
        work=counter.work,
        wall_time=time.perf_counter() - t0,
        table=table,
    )


def _exhaustive(req: PlanRequest, score_chunk):
    grid, k, n = req.grid, req.k, req.grid.cols
    chi = req.chi
    total = chi**n
    _check_budget(total, req, "chi**n")
    scores = np.empty(total)
    for lo in range(0, total, _PATH_CHUNK):
        hi = min(total, lo + _PATH_CHUNK)
        scores[lo:hi] = score_chunk(_digits_range(chi, n, lo, hi))
    e = first_argmax(scores)
    picks = _digits_range(chi, n, e, e + 1)[0]
    return _to_path(picks, tuple(enumerate_actions(grid.rows, k))), float(scores[e]), total


def solve_exact_mepp(req: PlanRequest) -> PlanResult:
    t0 = time.perf_counter()
    grid, r = req.grid, req.grid.rows
    taken, left = action_table(r, req.k)
    K = cov_matrix(grid.locations(), req.params)
    counter = EvalCounter()
    cols = range(grid.cols)

    def score(digits):
        return _block_entropies(K, digits, cols, (), taken, left, r, counter)

    path, obj, total = _exhaustive(req, score)
    counter.entropy_evals = total
    return PlanResult(
        "exact_mepp", path, obj,
        entropy_evals=total,
        factorizations=counter.factorizations,
        work=counter.work,
        wall_time=time.perf_counter() - t0,
    )


def solve_exact_m2ipp(req: PlanRequest) -> PlanResult:
    t0 = time.perf_counter()
    grid, r = req.grid, req.grid.rows
    if req.k >= r:
        raise NoUnobserved("exact_m2ipp needs k < r")
    taken, left = action_table(r, req.k)
    K = cov_matrix(grid.locations(), req.params)
    counter = EvalCounter()
    cols = range(grid.cols)
    _check_budget(req.chi**grid.cols, req, "chi**n")
    h_all = subset_entropies(K, np.arange(grid.size)[None, :], counter)[0]

    def score(digits):
        hx = _block_entropies(K, digits, cols, (), taken, left, r, counter)
        hu = _block_entropies(K, digits, (), cols, taken, left, r, counter)
        return hx + hu - h_all

    path, obj, total = _exhaustive(req, score)
    return PlanResult(
        "exact_m2ipp", path, obj,
        mi_evals=total,
        factorizations=counter.factorizations,
        work=counter.work,
        wall_time=time.perf_counter() - t0,
    )


def solve_gmepp(req: PlanRequest) -> PlanResult:
    t0 = time.perf_counter()
    grid, r, n = req.grid, req.grid.rows, req.grid.cols
    taken, _ = action_table(r, req.k)
    chi = len(taken)
    K = cov_matrix(grid.locations(), req.params)
    counter = EvalCounter()
    history = np.zeros(0, dtype=np.intp)
    h_hist = 0.0
    picks = []
    for i in range(n):
        cand = np.concatenate([np.broadcast_to(history, (chi, len(history))), i * r + taken], axis=1)
        h = subset_entropies(K, cand, counter)
        a = first_argmax(h - h_hist)
        picks.append(a)
        history, h_hist = cand[a], float(h[a])
        counter.entropy_evals += chi
    return PlanResult(
        "gmepp",
        _to_path(picks, tuple(enumerate_actions(r, req.k))),
        h_hist,
        entropy_evals=counter.entropy_evals,
        factorizations=counter.factorizations,
        work=counter.work,
        wall_time=time.perf_counter() - t0,
    )


def solve_gm2ipp(req: PlanRequest) -> PlanResult:
    t0 = time.perf_counter()
    grid, r, n = req.grid, req.grid.rows, req.grid.cols
    if req.k >= r:
        raise NoUnobserved("gm2ipp needs k < r")
    taken, _ = action_table(r, req.k)
    chi = len(taken)
    K = cov_matrix(grid.locations(), req.params)
    counter = EvalCounter()
    h_all = subset_entropies(K, np.arange(grid.size)[None, :], counter)[0]
    history = np.zeros(0, dtype=np.intp)
    picks = []
    best_mi = 0.0
    for i in range(n):
        cand = np.concatenate([np.broadcast_to(history, (chi, len(history))), i * r + taken], axis=1)
        mask = np.ones((chi, grid.size), dtype=bool)
        np.put_along_axis(mask, cand, False, axis=1)
        rest = np.nonzero(mask)[1].reshape(chi, grid.size - cand.shape[1])
        mi = subset_entropies(K, cand, counter) + subset_entropies(K, rest, counter) - h_all
        a = first_argmax(mi)
        picks.append(a)
        history, best_mi = cand[a], float(mi[a])
        counter.mi_evals += chi
    return PlanResult(
        "gm2ipp",
        _to_path(picks, tuple(enumerate_actions(r, req.k))),
        best_mi,
        mi_evals=counter.mi_evals,
        factorizations=counter.factorizations,
        work=counter.work,
        wall_time=time.perf_counter() - t0,
    )


SOLVERS = {
    "mepp_m": solve_mepp_m,
    "m2ipp_m": solve_m2ipp_m,
    "gmepp": solve_gmepp,
    "gm2ipp": solve_gm2ipp,
    "exact_mepp": solve_exact_mepp,
    "exact_m2ipp": solve_exact_m2ipp,
}


def solve(req: PlanRequest) -> PlanResult:
    return SOLVERS[req.algorithm](req)


def query_policy(table: ValueTable, window, stage: int | None = None) -> StageAction:
    """Best next action after ``window`` at ``stage`` (default: first DP stage).

    The table covers every window, including ones off the planned path, so
    this answers replanning queries after a disturbance without re-solving.
    """
    s = table._row(stage)
    w = table.window_index(window)
    return table.actions[int(table.best[s, w])]


def _cols_x(grid, path, cols):
    return np.array(
        [grid.location(c, row) for c in cols for row in path[c - 1].rows], dtype=float
    ).reshape(-1, 2)


def _cols_u(grid, path, cols):
    out = []
    for c in cols:
        chosen = set(path[c - 1].rows)
        out.extend(grid.location(c, row) for row in range(1, grid.rows + 1) if row not in chosen)
    return np.array(out, dtype=float).reshape(-1, 2)


def path_entropy(path: Path, grid: TransectGrid, params: GpHyperParams) -> float:
    """Joint entropy of all measurements along ``path``."""
    path = path if isinstance(path, Path) else Path(tuple(path))
    return conditional_entropy(_cols_x(grid, path, range(1, grid.cols + 1)), [], params)


def mepp_surrogate(path: Path, grid: TransectGrid, params: GpHyperParams, m: int) -> float:
    """Windowed entropy objective: ``H(x_{1:m}) + sum_{i>m} H(x_i | x_{i-m:i-1})``."""
    path = path if isinstance(path, Path) else Path(tuple(path))
    n = grid.cols
    total = conditional_entropy(_cols_x(grid, path, range(1, min(m, n) + 1)), [], params)
    for i in range(m + 1, n + 1):
        total += conditional_entropy(
            _cols_x(grid, path, [i]), _cols_x(grid, path, range(i - m, i)), params
        )
    return total


def m2ipp_surrogate(path: Path, grid: TransectGrid, params: GpHyperParams, m: int) -> float:
    """Windowed mutual-information objective of the order-``m`` MI planner.

    ``I(x_{1:m}; u_{1:2m}) + sum_{i=2m+1}^{n-1} I(x_{i-m}; u_{i-2m:i} | x_{i-2m:i-m-1})
    + I(x_{n-m:n}; u_{n-2m:n} | x_{n-2m:n-m-1})`` (columns 1-indexed).
    """
    path = path if isinstance(path, Path) else Path(tuple(path))
    n = grid.cols
    if not 2 * m < n:
        raise ValueError("m2ipp surrogate needs 2m < n")

    def cols(lo, hi):
        return range(lo, hi + 1)

    total = mutual_information(
        _cols_x(grid, path, cols(1, m)), _cols_u(grid, path, cols(1, 2 * m)), [], params
    )
    for i in range(2 * m + 1, n):
        total += mutual_information(
            _cols_x(grid, path, [i - m]),
            _cols_u(grid, path, cols(i - 2 * m, i)),
            _cols_x(grid, path, cols(i - 2 * m, i - m - 1)),
            params,
        )
    total += mutual_information(
        _cols_x(grid, path, cols(n - m, n)),
        _cols_u(grid, path, cols(n - 2 * m, n)),
        _cols_x(grid, path, cols(n - 2 * m, n - m - 1)),
        params,
    )
    return total
