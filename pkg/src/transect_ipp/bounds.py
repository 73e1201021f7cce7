"""Loss bounds and operation-count models for the windowed planners."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateNoise


@dataclass(frozen=True)
class BoundInputs:
    """Inputs of the loss bounds.

    ``lengthscale_norm_h`` is the horizontal length-scale divided by the
    horizontal grid spacing; ``eta`` is noise variance over signal variance.
    """

    k: int
    n: int
    m: int
    r: int
    lengthscale_norm_h: float
    eta: float

    def __post_init__(self):
        if self.k < 1 or self.n < 1 or self.m < 0 or self.r < self.k:
            raise ValueError(f"invalid sizes k={self.k}, n={self.n}, m={self.m}, r={self.r}")
        if not self.lengthscale_norm_h > 0:
            raise ValueError("lengthscale_norm_h must be positive")
        if not self.eta >= 0:
            raise ValueError("eta must be non-negative")

    @property
    def xi(self) -> float:
        """Correlation left between columns ``m+1`` apart, ``exp(-(m+1)^2 / (2 l'^2))``."""
        return math.exp(-((self.m + 1) ** 2) / (2.0 * self.lengthscale_norm_h**2))

    @property
    def chi(self) -> int:
        return math.comb(self.r, self.k)

    @classmethod
    def from_model(cls, grid, params, k: int, m: int) -> BoundInputs:
        return cls(
            k=k,
            n=grid.cols,
            m=m,
            r=grid.rows,
            lengthscale_norm_h=params.lengthscale_h / grid.spacing_h,
            eta=params.eta,
        )


def _log_term(b: BoundInputs) -> float:
    if b.eta == 0:
        raise DegenerateNoise("loss bound is infinite for eta = 0")
    return math.log1p(b.xi**2 / (b.eta * (1.0 + b.eta)))


def epsilon_mepp(b: BoundInputs) -> float:
    """Entropy loss bound ``[k(n-m)]^2 log(1 + xi^2 / (eta (1 + eta)))`` in nats."""
    if b.m > b.n:
        raise ValueError("epsilon_mepp needs m <= n")
    return float((b.k * (b.n - b.m)) ** 2) * _log_term(b)


def epsilon_m2ipp(b: BoundInputs) -> float:
    """Mutual-information loss bound in nats.

    ``k(n-2m) [rn + k(n-2m)/2] log(1 + xi^2 / (eta (1 + eta)))``.
    """
    if 2 * b.m > b.n:
        raise ValueError("epsilon_m2ipp needs 2m <= n")
    span = b.n - 2 * b.m
    return b.k * span * (b.r * b.n + 0.5 * b.k * span) * _log_term(b)


def epsilon(algo: str, b: BoundInputs) -> float:
    if algo in ("mepp", "mepp_m"):
        return epsilon_mepp(b)
    if algo in ("m2ipp", "m2ipp_m"):
        return epsilon_m2ipp(b)
    raise ValueError(f"no loss bound for algorithm {algo!r}")


def cost_model(algo: str, b: BoundInputs) -> int:
    """Dominant-term operation count; an order-of-magnitude guard, not a timing.

    ``mepp_m``: ``chi^(m+1) (n + (km)^3)``; ``m2ipp_m``:
    ``chi^(2m+1) (n + 2 (r(2m+1))^3)``; ``exact_mepp``: ``chi^n (kn)^3``;
    ``exact_m2ipp``: ``chi^n (rn)^3``; greedy planners: ``chi n (kn)^3`` and
    ``chi n (rn)^3``.
    """
    chi, k, n, m, r = b.chi, b.k, b.n, b.m, b.r
    algo = algo.replace("-", "_")
    if algo in ("mepp_m", "mepp"):
        return chi ** (m + 1) * (n + (k * m) ** 3)
    if algo in ("m2ipp_m", "m2ipp"):
        return chi ** (2 * m + 1) * (n + 2 * (r * (2 * m + 1)) ** 3)
    if algo == "exact_mepp":
        return chi**n * (k * n) ** 3
    if algo == "exact_m2ipp":
        return chi**n * (r * n) ** 3
    if algo == "gmepp":
        return chi * n * (k * n) ** 3
    if algo == "gm2ipp":
        return chi * n * (r * n) ** 3
    raise ValueError(f"unknown algorithm {algo!r}")
