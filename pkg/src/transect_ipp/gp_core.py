"""Gaussian-process model of the field.

Squared-exponential kernel with separate horizontal/vertical length-scales,
posterior inference, and Gaussian information measures (joint and conditional
entropy, conditional mutual information) over arbitrary location sets.

Locations are ``(horizontal, vertical)`` pairs in meters; any sequence that
``numpy.asarray`` turns into shape ``(N, 2)`` is accepted. All entropies are
in nats.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from . import _backend
from .errors import OverlappingSets, SingularSystem

LOG_2PI_E = math.log(2.0 * math.pi * math.e)

JITTER_BASE = 1e-10
JITTER_RETRIES = 3

# scratch budget (in float64 entries) for one batched log-det chunk
_CHUNK_ENTRIES = 1 << 21


@dataclass(frozen=True)
class GpHyperParams:
    """Kernel hyperparameters and constant prior mean.

    Parameters
    ----------
    signal_variance : float
        Signal variance, field units squared. Must be positive.
    noise_variance : float
        Measurement noise variance, field units squared. Non-negative.
    lengthscale_h, lengthscale_v : float
        Horizontal (along the transect) and vertical length-scales in meters.
    prior_mean : float
        Constant prior mean of the field.
    """

    signal_variance: float
    noise_variance: float
    lengthscale_h: float
    lengthscale_v: float
    prior_mean: float = 0.0

    def __post_init__(self):
        if not (self.signal_variance > 0 and math.isfinite(self.signal_variance)):
            raise ValueError("signal_variance must be positive and finite")
        if not (self.noise_variance >= 0 and math.isfinite(self.noise_variance)):
            raise ValueError("noise_variance must be non-negative and finite")
        if not (self.lengthscale_h > 0 and self.lengthscale_v > 0):
            raise ValueError("length-scales must be positive")
        if not math.isfinite(self.prior_mean):
            raise ValueError("prior_mean must be finite")

    @property
    def eta(self) -> float:
        """Noise-to-signal variance ratio."""
        return self.noise_variance / self.signal_variance

    def normalized_lengthscales(self, grid) -> tuple[float, float]:
        """Length-scales in units of grid spacing, ``(l1/w1, l2/w2)``."""
        return (self.lengthscale_h / grid.spacing_h, self.lengthscale_v / grid.spacing_v)

    def replace(self, **changes) -> GpHyperParams:
        fields = dict(
            signal_variance=self.signal_variance,
            noise_variance=self.noise_variance,
            lengthscale_h=self.lengthscale_h,
            lengthscale_v=self.lengthscale_v,
            prior_mean=self.prior_mean,
        )
        fields.update(changes)
        return GpHyperParams(**fields)


class Location(NamedTuple):
    horizontal: float
    vertical: float


def as_locations(locs) -> np.ndarray:
    arr = np.asarray(locs, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 2)
    arr = arr.reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise ValueError("location coordinates must be finite")
    return arr


def kernel(x, x2, p: GpHyperParams) -> float:
    """Covariance between two single locations."""
    dh = (x[0] - x2[0]) / p.lengthscale_h
    dv = (x[1] - x2[1]) / p.lengthscale_v
    value = p.signal_variance * math.exp(-0.5 * (dh * dh + dv * dv))
    if x[0] == x2[0] and x[1] == x2[1]:
        value += p.noise_variance
    return value


def cross_cov(a, b, p: GpHyperParams) -> np.ndarray:
    """Covariance block between location sets ``a`` and ``b``.

    The noise term is added wherever two locations coincide exactly.
    """
    a = as_locations(a)
    b = as_locations(b)
    dh = (a[:, None, 0] - b[None, :, 0]) / p.lengthscale_h
    dv = (a[:, None, 1] - b[None, :, 1]) / p.lengthscale_v
    out = p.signal_variance * np.exp(-0.5 * (dh * dh + dv * dv))
    if p.noise_variance:
        same = (a[:, None, 0] == b[None, :, 0]) & (a[:, None, 1] == b[None, :, 1])
        out[same] += p.noise_variance
    return out


def cov_matrix(locs, p: GpHyperParams) -> np.ndarray:
    """Prior covariance matrix of ``locs`` (symmetric by construction)."""
    locs = as_locations(locs)
    if len(locs) == 0:
        raise ValueError("cov_matrix needs at least one location")
    c = cross_cov(locs, locs, p)
    return 0.5 * (c + c.T)


def cholesky(c: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor with the escalating diagonal-jitter policy.

    Tries the plain factorization first, then adds
    ``1e-10 * trace/dim`` to the diagonal, escalating 10x per retry for up to
    three retries before raising :class:`SingularSystem`.
    """
    c = np.asarray(c, dtype=float)
    dim = c.shape[0]
    try:
        return np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        pass
    scale = np.trace(c) / dim if dim else 0.0
    eye = np.eye(dim)
    for attempt in range(JITTER_RETRIES):
        jitter = JITTER_BASE * 10.0**attempt * scale
        try:
            return np.linalg.cholesky(c + jitter * eye)
        except np.linalg.LinAlgError:
            continue
    raise SingularSystem(f"Cholesky failed on a {dim}x{dim} matrix after jitter")


def logdet(c: np.ndarray) -> float:
    L = cholesky(c)
    return 2.0 * float(np.log(np.diagonal(L)).sum())


def posterior_mean(u, s, z_s, p: GpHyperParams) -> np.ndarray:
    """Posterior mean at ``u`` given measurements ``z_s`` at ``s``."""
    u = as_locations(u)
    s = as_locations(s)
    z_s = np.asarray(z_s, dtype=float).ravel()
    if len(s) == 0:
        raise ValueError("posterior_mean needs at least one sampled location")
    if len(z_s) != len(s):
        raise ValueError("z_s must have one value per sampled location")
    L = cholesky(cov_matrix(s, p))
    resid = z_s - p.prior_mean
    alpha = solve_triangular(L.T, solve_triangular(L, resid, lower=True), lower=False)
    return p.prior_mean + cross_cov(u, s, p) @ alpha


def posterior_cov(u, s, p: GpHyperParams) -> np.ndarray:
    """Posterior covariance of ``u`` given observations at ``s``.

    Does not depend on the measured values. With ``s`` empty this is the
    prior covariance of ``u``.
    """
    u = as_locations(u)
    s = as_locations(s)
    if len(u) == 0:
        raise ValueError("posterior_cov needs at least one target location")
    prior = cov_matrix(u, p)
    if len(s) == 0:
        return prior
    L = cholesky(cov_matrix(s, p))
    V = solve_triangular(L, cross_cov(s, u, p), lower=True)
    post = prior - V.T @ V
    return 0.5 * (post + post.T)


def joint_entropy(c) -> float:
    """Differential entropy (nats) of a Gaussian with covariance ``c``."""
    c = np.atleast_2d(np.asarray(c, dtype=float))
    return 0.5 * (c.shape[0] * LOG_2PI_E + logdet(c))


def conditional_entropy(a, b, p: GpHyperParams) -> float:
    """``H(Z_a | Z_b)``; prior entropy of ``a`` when ``b`` is empty."""
    return joint_entropy(posterior_cov(a, b, p))


def _union(a, b):
    return np.concatenate([as_locations(a), as_locations(b)], axis=0)


def mutual_information(a, b, given, p: GpHyperParams) -> float:
    """Conditional mutual information ``I(Z_a; Z_b | Z_given)`` in nats."""
    a = as_locations(a)
    b = as_locations(b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("mutual_information needs nonempty a and b")
    same = (a[:, None, 0] == b[None, :, 0]) & (a[:, None, 1] == b[None, :, 1])
    if same.any():
        raise OverlappingSets("location sets a and b overlap")
    given = as_locations(given)
    return conditional_entropy(b, given, p) - conditional_entropy(b, _union(given, a), p)


@dataclass
class EvalCounter:
    """Instrumentation for planners.

    ``entropy_evals`` / ``mi_evals`` count information terms consumed by a
    planner's recursion (cache hits included). ``factorizations`` counts
    Cholesky factorizations actually performed and ``work`` sums ``dim**3``
    over them as a flop proxy.
    """

    entropy_evals: int = 0
    mi_evals: int = 0
    factorizations: int = 0
    work: int = 0


def _logdet_chunks(K, idx, jitter):
    kern = _backend.kernels
    B, d = idx.shape
    step = max(1, _CHUNK_ENTRIES // max(1, d * d))
    bounds = [(lo, min(B, lo + step)) for lo in range(0, B, step)]
    threads = min(_backend.thread_count(), len(bounds))
    if threads <= 1:
        parts = [kern.subset_logdet(K, idx[lo:hi], jitter[lo:hi]) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: kern.subset_logdet(K, idx[b[0]:b[1]], jitter[b[0]:b[1]]), bounds))
    if not parts:
        return np.empty(0), np.empty(0, dtype=np.uint8)
    return np.concatenate([q[0] for q in parts]), np.concatenate([q[1] for q in parts])


def subset_entropies(K, idx, counter: EvalCounter | None = None) -> np.ndarray:
    """Joint entropies of many principal submatrices of one covariance.

    Parameters
    ----------
    K : ndarray, shape (N, N)
        Covariance over a fixed set of locations.
    idx : array_like of int, shape (B, d)
        Each row selects ``d`` locations (rows/columns of ``K``).

    Returns
    -------
    ndarray, shape (B,)
        ``H`` of each selected subset, with the same jitter policy as
        :func:`cholesky` applied per subset.
    """
    K = np.ascontiguousarray(K, dtype=float)
    idx = np.ascontiguousarray(np.atleast_2d(idx), dtype=np.intp)
    B, d = idx.shape
    ld, ok = _logdet_chunks(K, idx, np.zeros(B))
    failed = np.flatnonzero(ok == 0)
    if failed.size:
        scale = np.diagonal(K)[idx[failed]].sum(axis=1) / d
        for attempt in range(JITTER_RETRIES):
            jit = JITTER_BASE * 10.0**attempt * scale
            ld_f, ok_f = _logdet_chunks(K, idx[failed], jit)
            ld[failed[ok_f == 1]] = ld_f[ok_f == 1]
            keep = ok_f == 0
            failed, scale = failed[keep], scale[keep]
            if not failed.size:
                break
        if failed.size:
            raise SingularSystem(f"{failed.size} of {B} subset covariances are singular after jitter")
    if counter is not None:
        counter.factorizations += B
        counter.work += B * d**3
    return 0.5 * (d * LOG_2PI_E + ld)
