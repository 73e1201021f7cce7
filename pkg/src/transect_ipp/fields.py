"""Field acquisition: seeded GP sampling, field files and MLE fitting.

Random numbers
--------------
Fields are reproducible across platforms and implementations. The generator
is numpy's PCG64 (PCG XSL-RR 128/64) seeded with the 64-bit ``seed`` through
``numpy.random.PCG64(seed)``. Raw 64-bit outputs ``x`` become uniforms
``u = (x >> 11) * 2**-53``; consecutive pairs ``(x1, x2)`` give two standard
normals by Box-Muller,
``sqrt(-2 log(1 - u1)) * (cos(2 pi u2), sin(2 pi u2))``.
Normal ``j`` drives flat (column-major) location ``j``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, ParseError, SearchFailed, SingularSystem, TooLarge
from .gp_core import GpHyperParams, cholesky, cov_matrix, cross_cov
from .metrics import FieldRealization
from .transect import TransectGrid

MAX_SAMPLE_LOCATIONS = 4096
_HEADER_KEYS = ("r", "n", "w1", "w2")


@dataclass(frozen=True)
class FieldSpec:
    grid: TransectGrid
    params: GpHyperParams
    seed: int

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def standard_normals(seed: int, size: int) -> np.ndarray:
    """``size`` standard normals from the documented PCG64 + Box-Muller stream."""
    pairs = (size + 1) // 2
    raw = np.random.PCG64(seed).random_raw(2 * pairs)
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:size]


def sample_field(spec: FieldSpec) -> FieldRealization:
    """Draw ``z = mu + L w`` with ``L`` the Cholesky factor of the grid covariance."""
    grid = spec.grid
    if grid.size > MAX_SAMPLE_LOCATIONS:
        raise TooLarge(f"{grid.size} locations exceed the dense sampling limit {MAX_SAMPLE_LOCATIONS}")
    L = cholesky(cov_matrix(grid.locations(), spec.params))
    z = spec.params.prior_mean + L @ standard_normals(spec.seed, grid.size)
    return FieldRealization(grid, z.reshape(grid.cols, grid.rows).T)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_field_csv(field: FieldRealization, path) -> None:
    g = field.grid
    lines = [f"# transect r={g.rows} n={g.cols} w1={_fmt(g.spacing_h)} w2={_fmt(g.spacing_v)}"]
    lines += [",".join(_fmt(v) for v in row) for row in field.values]
    FsPath(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_header(line: str) -> dict:
    if not line.startswith("# transect"):
        raise ParseError("expected header '# transect r=<int> n=<int> w1=<decimal> w2=<decimal>'", line=1)
    fields = {}
    for tok in line[len("# transect"):].split():
        key, sep, val = tok.partition("=")
        if not sep or key not in _HEADER_KEYS:
            raise ParseError(f"bad header token {tok!r}", line=1)
        fields[key] = val
    missing = [k for k in _HEADER_KEYS if k not in fields]
    if missing:
        raise ParseError(f"header is missing {', '.join(missing)}", line=1)
    try:
        return {
            "rows": int(fields["r"]),
            "cols": int(fields["n"]),
            "spacing_h": float(fields["w1"]),
            "spacing_v": float(fields["w2"]),
        }
    except ValueError as exc:
        raise ParseError(f"bad header value: {exc}", line=1) from None


def load_field_csv(path) -> FieldRealization:
    """Read a field file; the grid comes from its header line."""
    text = FsPath(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ParseError("empty field file", line=1)
    head = _parse_header(lines[0].strip())
    try:
        grid = TransectGrid(**head)
    except ValueError as exc:
        raise ParseError(str(exc), line=1) from None
    body = lines[1:]
    if len(body) != grid.rows:
        raise DimensionMismatch(f"header declares {grid.rows} rows, file has {len(body)}")
    values = np.empty((grid.rows, grid.cols))
    for i, line in enumerate(body):
        cells = line.split(",")
        if len(cells) != grid.cols:
            raise ParseError(f"expected {grid.cols} values, found {len(cells)}", line=i + 2)
        for j, cell in enumerate(cells):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ParseError(f"not a number: {cell.strip()!r}", line=i + 2, column=j + 1) from None
    return FieldRealization(grid, values)


def log_marginal_likelihood(field: FieldRealization, params: GpHyperParams) -> float:
    """Gaussian log-likelihood of every grid measurement under ``params``."""
    z = field.flat() - params.prior_mean
    L = cholesky(cov_matrix(field.grid.locations(), params))
    a = solve_triangular(L, z, lower=True)
    return float(-0.5 * a @ a - np.log(np.diagonal(L)).sum() - 0.5 * len(z) * math.log(2 * math.pi))


@dataclass(frozen=True)
class MleSearch:
    """Derivative-free MLE settings.

    Each range is ``(low, high)``; ``None`` picks a default from the data:
    signal in ``[0.1, 10] * var(z)``, noise in ``[1e-4, 1] * var(z)``,
    length-scales from half a spacing to twice the grid extent. A log-spaced
    grid of ``points`` per axis is searched exhaustively, then ``rounds``
    passes of coordinate refinement halve the log step each pass.
    ``prior_mean=None`` uses the sample mean of the field.
    """

    signal_range: tuple[float, float] | None = None
    noise_range: tuple[float, float] | None = None
    lengthscale_h_range: tuple[float, float] | None = None
    lengthscale_v_range: tuple[float, float] | None = None
    points: int = 8
    rounds: int = 3
    prior_mean: float | None = None


def _ranges(field, search):
    g = field.grid
    var = float(np.var(field.values)) or 1.0
    rs = [
        search.signal_range or (0.1 * var, 10.0 * var),
        search.noise_range or (1e-4 * var, var),
        search.lengthscale_h_range or (0.5 * g.spacing_h, 2.0 * g.cols * g.spacing_h),
        search.lengthscale_v_range or (0.5 * g.spacing_v, 2.0 * g.rows * g.spacing_v),
    ]
    for lo, hi in rs:
        if not (0 < lo <= hi):
            raise ValueError(f"search range ({lo}, {hi}) must satisfy 0 < low <= high")
    return rs


def _axis(lo, hi, points):
    if lo == hi or points == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, points)


def _grid_scores(field, mu, sig_axis, noise_axis, lh, lv):
    """Log-likelihood for every (signal, noise) at fixed length-scales.

    On a grid with distinct locations the covariance is ``s R + n I``, so one
    eigendecomposition of the correlation ``R`` serves every (s, n) pair.
    """
    locs = field.grid.locations()
    R = cross_cov(locs, locs, GpHyperParams(1.0, 0.0, lh, lv))
    lam, Q = np.linalg.eigh(0.5 * (R + R.T))
    proj = (Q.T @ (field.flat() - mu)) ** 2
    ev = sig_axis[:, None, None] * lam[None, None, :] + noise_axis[None, :, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = -0.5 * (proj / ev).sum(-1) - 0.5 * np.log(ev).sum(-1) - 0.5 * len(proj) * math.log(2 * math.pi)
    ll[~(ev > 1e-12 * ev.max(axis=-1, keepdims=True)).all(-1)] = -np.inf
    return ll


def fit_mle(field: FieldRealization, search: MleSearch | None = None) -> GpHyperParams:
    """Maximum-likelihood hyperparameters by log-grid search plus refinement."""
    search = search or MleSearch()
    mu = float(field.values.mean()) if search.prior_mean is None else float(search.prior_mean)
    ranges = _ranges(field, search)
    axes = [_axis(lo, hi, search.points) for lo, hi in ranges]

    best, best_ll = None, -np.inf
    for lh, lv in itertools.product(axes[2], axes[3]):
        ll = _grid_scores(field, mu, axes[0], axes[1], lh, lv)
        i, j = np.unravel_index(np.argmax(ll), ll.shape)
        if ll[i, j] > best_ll:
            best_ll = ll[i, j]
            best = [axes[0][i], axes[1][j], lh, lv]
    if best is None:
        raise SearchFailed("every grid candidate was singular")

    def score(theta):
        try:
            return log_marginal_likelihood(field, GpHyperParams(*theta, prior_mean=mu))
        except SingularSystem:
            return -np.inf

    best_ll = score(best)
    steps = [
        math.log(hi / lo) / (search.points - 1) if search.points > 1 and hi > lo else 0.0
        for lo, hi in ranges
    ]
    for _ in range(search.rounds):
        for ax, (lo, hi) in enumerate(ranges):
            if steps[ax] == 0.0:
                continue
            for t in (-1.0, -0.5, 0.5, 1.0):
                cand = list(best)
                cand[ax] = min(hi, max(lo, best[ax] * math.exp(t * steps[ax])))
                ll = score(cand)
                if ll > best_ll:
                    best, best_ll = cand, ll
            steps[ax] *= 0.5
    if not np.isfinite(best_ll):
        raise SearchFailed("no candidate produced a finite likelihood")
    return GpHyperParams(*(float(v) for v in best), prior_mean=mu)
