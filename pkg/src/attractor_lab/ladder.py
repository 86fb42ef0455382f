"""Limits of pullback sequences sampled on a horizon ladder.

Pullback values s_T = |b_T| decrease to their limit, but along power-law
cocycles they do so only like a power of T.  For y' = a y - rho y^theta the
Bernoulli variable q = s^-(theta-1) is affine in the data, so q_T grows by
increments that shrink geometrically on a geometric ladder when q has a
finite limit, and fail to shrink when it diverges.  ``ladder_limit`` uses
the last two increment ratios to extrapolate q, and falls back to the raw
value when successive values already agree to within tol.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotConverged

EPS_TRIVIAL = 1e-6
EPS_POSITIVE = 1e-3


@dataclass(frozen=True)
class LadderLimit:
    estimate: float         # limiting sup-norm
    raw: float              # value at the largest horizon
    cauchy_gap: float       # |s_K - s_{K-1}|
    method: str             # "cauchy", "extrapolated" or "divergent"
    increment_ratio: float  # d_K / d_{K-1} of the transformed sequence (nan if unused)


def _is_geometric(h) -> bool:
    r = np.asarray(h[1:]) / np.asarray(h[:-1])
    return bool(np.all(np.abs(r - r[0]) <= 1e-9 * r[0]))


def ladder_limit(horizons, values, exponent: float | None, tol: float) -> LadderLimit:
    """Estimate lim s_T from sup-norms ``values`` at increasing ``horizons``."""
    s = np.asarray(values, dtype=float)
    if s.size == 0:
        raise ValueError("empty ladder")
    raw = float(s[-1])
    gap = float(abs(s[-1] - s[-2])) if s.size >= 2 else math.inf
    if raw == 0.0:
        return LadderLimit(0.0, raw, gap, "cauchy", math.nan)
    if gap < tol:
        return LadderLimit(raw, raw, gap, "cauchy", math.nan)
    if exponent is None or s.size < 3 or not _is_geometric(horizons[-3:]):
        raise NotConverged(f"Cauchy gap {gap:.3g} exceeds tol {tol:.3g} at horizon {horizons[-1]:g}")
    if np.any(s[-3:] <= 0):
        raise NotConverged("nonpositive pullback values cannot be extrapolated")
    q = s[-3:] ** (-exponent)
    d1, d2 = q[1] - q[0], q[2] - q[1]
    if d1 <= 0 or d2 <= 0:
        raise NotConverged(f"pullback values are not monotone on the last rungs (gap {gap:.3g})")
    ratio = d2 / d1
    if ratio >= 1.0:
        # transformed sequence grows at least linearly in the rung index: q -> inf, s -> 0
        return LadderLimit(0.0, raw, gap, "divergent", float(ratio))
    q_inf = q[2] + d2 * ratio / (1.0 - ratio)
    return LadderLimit(float(q_inf ** (-1.0 / exponent)), raw, gap, "extrapolated", float(ratio))


def classify_value(sup_norm: float, positive: bool) -> str:
    """Trivial / StronglyPositive / Indeterminate for a limiting section.

    ``positive`` tells whether the lower-bound test for strong positivity
    passed (interior minimum or comparison with e0).
    """
    if sup_norm <= EPS_TRIVIAL:
        return "Trivial"
    if positive:
        return "StronglyPositive"
    return "Indeterminate"
