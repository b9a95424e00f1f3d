"""Confidence intervals and trend verdicts for Monte Carlo output.

One interval method is used everywhere and recorded in every output
header: the normal approximation at 95%. Trend claims are judged only on
CI-separated consecutive points; overlap yields "inconclusive", never
"fail".
"""

from __future__ import annotations

import math

import numpy as np

CI_METHOD = "normal-approx-95"
Z95 = 1.959963984540054


def mean_ci(values: np.ndarray) -> tuple[float, float, float]:
    """(mean, ci_low, ci_high) under the normal approximation.

    The mean uses numpy's pairwise summation over the array as given, so
    it is bit-reproducible for a fixed trial order. A single-value input
    has no spread estimate and returns nan bounds.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n == 0:
        raise ValueError("no values to aggregate")
    mean = float(values.mean())
    if n == 1:
        return mean, math.nan, math.nan
    half = Z95 * float(values.std(ddof=1)) / math.sqrt(n)
    return mean, mean - half, mean + half


def variance_ci(values: np.ndarray) -> tuple[float, float, float]:
    """(sample variance, ci_low, ci_high) via the moment-based standard
    error SE(s^2) ~= sqrt((m4 - s^4) / n), valid without normality."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n < 2:
        raise ValueError("variance needs at least two values")
    s2 = float(values.var(ddof=1))
    centered = values - values.mean()
    m4 = float((centered ** 4).mean())
    se = math.sqrt(max(m4 - s2 * s2, 0.0) / n)
    return s2, s2 - Z95 * se, s2 + Z95 * se


def intervals_disjoint(lo1: float, hi1: float, lo2: float, hi2: float) -> bool:
    """Strict separation: one interval entirely below the other."""
    return hi1 < lo2 or hi2 < lo1


def trend_verdict(means, lows, highs, direction: str = "non-increasing") -> str:
    """Judge a monotone-trend claim over consecutive points.

    Returns "fail" if any CI-separated consecutive pair moves against
    the claimed direction, "pass" if every consecutive pair is separated
    and moves with it, and "inconclusive" otherwise.
    """
    if direction not in ("non-increasing", "non-decreasing"):
        raise ValueError(f"unknown direction {direction!r}")
    sign = 1.0 if direction == "non-increasing" else -1.0
    all_separated_ok = True
    for i in range(len(means) - 1):
        separated = intervals_disjoint(lows[i], highs[i], lows[i + 1], highs[i + 1])
        if not separated:
            all_separated_ok = False
            continue
        decreasing = means[i + 1] < means[i]
        if (sign > 0) != decreasing:
            return "fail"
    return "pass" if all_separated_ok else "inconclusive"
