"""Evaluation metrics for a planned path: EN, MI and ER."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoUnobserved, ZeroMeanField
from .gp_core import GpHyperParams, conditional_entropy, mutual_information, posterior_mean
from .transect import Path, TransectGrid, path_indices, unobserved_indices


@dataclass(frozen=True)
class FieldRealization:
    """Measurements on every grid location; ``values[row-1, col-1]``."""

    grid: TransectGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.rows, self.grid.cols):
            raise DimensionMismatch(
                f"values have shape {v.shape}, grid is {self.grid.rows}x{self.grid.cols}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def flat(self) -> np.ndarray:
        """Values in column-major flat-index order."""
        return self.values.T.ravel()


def _split(path, grid):
    path = path if isinstance(path, Path) else Path(tuple(path))
    path.check(grid)
    if path.k >= grid.rows:
        raise NoUnobserved("every location is on the path (k = r)")
    locs = grid.locations()
    xi, ui = path_indices(grid, path), unobserved_indices(grid, path)
    return locs, xi, ui


def en_metric(path: Path, grid: TransectGrid, params: GpHyperParams) -> float:
    """Posterior joint entropy of the unobserved locations given the path (nats)."""
    locs, xi, ui = _split(path, grid)
    return conditional_entropy(locs[ui], locs[xi], params)


def mi_metric(path: Path, grid: TransectGrid, params: GpHyperParams) -> float:
    """Mutual information between path and unobserved measurements (nats)."""
    locs, xi, ui = _split(path, grid)
    return mutual_information(locs[xi], locs[ui], [], params)


def er_metric(path: Path, field: FieldRealization, params: GpHyperParams) -> float:
    """Mean-squared relative prediction error at the unobserved locations.

    ``||z_u - mu_{u|x}||^2 / (mean(z_u)^2 * n (r - k))`` with the posterior
    mean built from the field's values on the path and ``params.prior_mean``.
    """
    grid = field.grid
    locs, xi, ui = _split(path, grid)
    z = field.flat()
    z_u = z[ui]
    mu_bar = z_u.mean()
    if abs(mu_bar) < 1e-12:
        raise ZeroMeanField("mean of the unobserved truth is zero")
    pred = posterior_mean(locs[ui], locs[xi], z[xi], params)
    return float(np.sum((z_u - pred) ** 2) / (mu_bar**2 * len(ui)))


def path_sample_mean(path: Path, field: FieldRealization) -> float:
    """Mean of the measurements on the path; the plug-in prior mean for ER."""
    return float(field.flat()[path_indices(field.grid, path)].mean())
