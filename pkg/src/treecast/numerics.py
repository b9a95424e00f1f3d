"""Saturation-safe primitives for log-ratio belief arithmetic.

A belief with bias B in [-1, 1] is carried as the log ratio
L = log((1 - B) / (1 + B)); B = +1 maps to L = -inf and B = -1 to L = +inf.
All routines here stay finite-and-exact at the saturated endpoints, which
matters in strongly biased regimes where B rounds to +-1.0 in floating
point while L still resolves the value.
"""

from __future__ import annotations

import math

import numpy as np


def expit(x: np.ndarray | float) -> np.ndarray | float:
    """1 / (1 + exp(-x)), overflow-safe, exact at +-inf."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        pos = 1.0 / (1.0 + np.exp(-x))
        ex = np.exp(x)
        neg = ex / (1.0 + ex)
        out = np.where(x >= 0, pos, neg)
    if out.ndim == 0:
        return float(out)
    return out


def bias_from_logratio(L: np.ndarray | float) -> np.ndarray | float:
    """B = 2/(1+e^L) - 1, evaluated as -tanh(L/2)."""
    out = -np.tanh(np.asarray(L, dtype=np.float64) / 2.0)
    if out.ndim == 0:
        return float(out)
    return out


def logratio_from_bias(bias: np.ndarray | float) -> np.ndarray | float:
    """L = log((1-B)/(1+B)); +-1 map to -+inf."""
    b = np.asarray(bias, dtype=np.float64)
    with np.errstate(divide="ignore"):
        out = np.log1p(-b) - np.log1p(b)
    if out.ndim == 0:
        return float(out)
    return out


def child_logterms(L: np.ndarray, epsilon: float) -> np.ndarray:
    """log((1 - eps*B)/(1 + eps*B)) for children carried as log ratios L.

    Substituting B = (1 - e^L)/(1 + e^L) gives
        log((1-eps) + (1+eps) e^L) - log((1+eps) + (1-eps) e^L),
    evaluated with logaddexp. The L = +inf endpoint (B = -1) hits
    inf - inf in that form and is pinned to its limit explicitly.
    """
    L = np.asarray(L, dtype=np.float64)
    l1m = math.log1p(-epsilon)
    l1p = math.log1p(epsilon)
    with np.errstate(invalid="ignore"):
        out = np.logaddexp(l1m, l1p + L) - np.logaddexp(l1p, l1m + L)
    if np.isinf(L).any():
        out = np.where(np.isposinf(L), l1p - l1m, out)
    return out


def sweep_to_root(leaf_logratios: np.ndarray, arity: int, depth: int,
                  epsilon: float) -> np.ndarray:
    """Combine leaf log ratios level by level up to the root.

    `leaf_logratios` has the leaf axis last (leading axes are batch);
    returns the root log ratio with the leaf axis reduced away. Children
    are summed in index order (a fixed-order reduction, reproducible
    across runs and worker counts).
    """
    L = np.asarray(leaf_logratios, dtype=np.float64)
    if L.shape[-1] != arity ** depth:
        raise ValueError(
            f"expected {arity ** depth} leaves on the last axis, got {L.shape[-1]}")
    for level in range(depth, 0, -1):
        terms = child_logterms(L, epsilon)
        L = terms.reshape(*terms.shape[:-1], -1, arity).sum(axis=-1)
    return L[..., 0]


def tv_from_logratios(Lx: np.ndarray | float, Lz: np.ndarray | float) -> np.ndarray | float:
    """|P_x(+1) - P_z(+1)| for beliefs carried as log ratios.

    Writing m = min(Lx, Lz) and M = max(Lx, Lz),
        TV = expit(M) * expit(-m) * (1 - exp(-(M - m))).
    Every factor lies in [0, 1], so the value neither overflows nor
    collapses to zero when both biases are saturated.
    """
    Lx = np.asarray(Lx, dtype=np.float64)
    Lz = np.asarray(Lz, dtype=np.float64)
    m = np.minimum(Lx, Lz)
    M = np.maximum(Lx, Lz)
    with np.errstate(invalid="ignore"):
        gap = M - m
    # equal infinities are the same point mass: distance 0
    gap = np.where(np.isnan(gap), 0.0, gap)
    out = expit(M) * expit(-m) * (-np.expm1(-gap))
    if np.ndim(out) == 0:
        return float(out)
    return out
