"""Ambiguity-radius selection from concentration of the empirical measure.

The radius and coverage formulas are two directions of the same bound: the
probability that the empirical distribution of n samples sits within
transport distance rho of the truth is at least

    1 - exp(-n rho^2 / (2 (1 + D^2)))   if D >= 1
    1 - exp(-n rho^2 / (4 D^2))         if D < 1

where D is the diameter of the support. Both directions assume rho < D.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .core import Dataset, TransportCost, bounding_box, support_diameter

__all__ = ["Confidence", "radius_for_confidence", "coverage_probability", "estimate_diameter"]


@dataclass(frozen=True)
class Confidence:
    """Coverage level q in (0, 1)."""

    q: float

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"confidence must lie strictly in (0, 1), got {self.q}")


def _rate(d_diam: float) -> float:
    if d_diam <= 0:
        raise ValueError("support diameter must be positive")
    return 2.0 * (1.0 + d_diam**2) if d_diam >= 1.0 else 4.0 * d_diam**2


def radius_for_confidence(n: int, q: Confidence | float, d_diam: float) -> float:
    """Smallest radius covering the truth with probability at least q.

    Warns when the result reaches the support diameter: the coverage
    guarantee only holds for radii below D, though the robust model itself
    stays well defined, so the value is returned regardless.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    qv = q.q if isinstance(q, Confidence) else Confidence(q).q
    rho = math.sqrt(-math.log(1.0 - qv) / n * _rate(d_diam))
    if rho >= d_diam:
        warnings.warn(
            f"calibrated radius {rho:.4g} >= support diameter {d_diam:.4g}; "
            "the coverage guarantee does not apply at this sample size",
            RuntimeWarning,
            stacklevel=2,
        )
    return rho


def coverage_probability(n: int, rho: float, d_diam: float) -> float:
    """Coverage lower bound for a given radius; inverse of radius_for_confidence.

    The bound requires rho < D. Outside that regime the result would be
    meaningless, so NaN is returned along with a warning rather than a
    silently wrong number.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho >= d_diam:
        warnings.warn(
            f"coverage bound undefined for rho {rho:.4g} >= support diameter {d_diam:.4g}",
            RuntimeWarning,
            stacklevel=2,
        )
        return math.nan
    return 1.0 - math.exp(-n * rho**2 / _rate(d_diam))


def estimate_diameter(data: Dataset, cost: TransportCost) -> float:
    """Transport diameter of the data's bounding box.

    Exact for the box and therefore an upper bound on the pairwise data
    diameter; needs at least two distinct samples to be meaningful.
    """
    if data.n < 2:
        raise ValueError("need at least two samples to estimate a diameter")
    return support_diameter(bounding_box(data), cost)
