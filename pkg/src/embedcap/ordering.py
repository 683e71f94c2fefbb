"""Variability orderings of unit-mean interarrival laws and what they imply for capacity.

At equal means, ``X1`` is less variable than ``X2`` (convex order) when
``int_0^x P(X1 > t) dt >= int_0^x P(X2 > t) dt`` for every ``x``, or
equivalently when the Lorenz curve of ``X1`` dominates that of ``X2``.
A less variable law yields a larger zero-order capacity. NBUE laws (mean
residual life never above the mean) sit above the exponential, NWUE laws
below it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .renewal_models import (
    Family,
    InterarrivalModel,
    quantile,
    stop_loss,
    survival,
)

__all__ = [
    "Relation",
    "Aging",
    "CapacityRelation",
    "OrderingVerdict",
    "lorenz_curve",
    "convex_order_check",
    "nbue_classify",
    "predict_capacity_order",
    "default_x_grid",
    "default_p_grid",
    "ORDER_TOL",
    "AGING_TOL",
]

ORDER_TOL = 1e-9
AGING_TOL = 1e-6


class Relation(enum.Enum):
    LESS_VARIABLE = "less_variable"
    MORE_VARIABLE = "more_variable"
    INCOMPARABLE = "incomparable"


class Aging(enum.Enum):
    NBUE = "nbue"
    NWUE = "nwue"
    BOTH = "both"
    NEITHER = "neither"


class CapacityRelation(enum.Enum):
    GE = "C1>=C2"
    LE = "C1<=C2"
    UNKNOWN = "unknown"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class OrderingVerdict:
    """Outcome of a grid check of the convex order of ``X1`` against ``X2``.

    ``max_violation`` is the largest amount by which the reported relation
    fails on the grid (at most ``ORDER_TOL`` for the two ordered verdicts).
    For ``INCOMPARABLE`` it is the smaller of the two failures, i.e. how far
    the pair is from being ordered either way.
    """

    relation: Relation
    evidence_grid: np.ndarray = field(repr=False)
    max_violation: float
    criterion: str = "survival"


def default_x_grid() -> np.ndarray:
    """1000 log-spaced points covering ``[1e-3, 50]``."""
    return np.logspace(-3, math.log10(50.0), 1000)


def default_p_grid() -> np.ndarray:
    """``p = 0.001, 0.002, ..., 0.999``."""
    return np.arange(1, 1000) / 1000.0


def lorenz_curve(model: InterarrivalModel, p):
    """Lorenz curve ``L(p) = int_0^p F^{-1}(u) du`` of the unit-mean law.

    Pareto and Lognormal use closed forms; every other family goes through
    the quantile and the excess mean, ``L(p) = 1 - E[(X-q)+] - q (1-p)``
    with ``q = F^{-1}(p)``.

    Parameters
    ----------
    model : InterarrivalModel
    p : float or array_like
        Probabilities in ``[0, 1]``.
    """
    q = np.asarray(p, dtype=float)
    if np.any((q < 0) | (q > 1)) or np.any(np.isnan(q)):
        raise ValueError("p must lie in [0, 1]")
    fam, s = model.family, model.shape
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam is Family.PARETO:
            tail = 1.0 - q
            out = s * tail * (1.0 - tail ** (-1.0 / s)) + q
        elif fam is Family.LOGNORMAL:
            out = special.ndtr(special.ndtri(q) - s)
        else:
            x = np.asarray(quantile(model, q), dtype=float)
            out = 1.0 - stop_loss(model, x) - x * (1.0 - q)
    out = np.where(q == 0, 0.0, np.where(q == 1, 1.0, out))
    out = np.clip(out, 0.0, q)
    return float(out) if np.ndim(p) == 0 else out


def _verdict(gap, grid, criterion):
    # gap > 0 where X1 fails to be less variable than X2
    worst_less = float(np.max(gap))
    worst_more = float(np.max(-gap))
    if worst_less <= ORDER_TOL:
        return OrderingVerdict(Relation.LESS_VARIABLE, grid, max(worst_less, 0.0), criterion)
    if worst_more <= ORDER_TOL:
        return OrderingVerdict(Relation.MORE_VARIABLE, grid, max(worst_more, 0.0), criterion)
    return OrderingVerdict(Relation.INCOMPARABLE, grid, min(worst_less, worst_more), criterion)


def convex_order_check(m1: InterarrivalModel, m2: InterarrivalModel, grid=None,
                       criterion: str = "survival") -> OrderingVerdict:
    """Check on a grid whether ``X1`` is less or more variable than ``X2``.

    Parameters
    ----------
    m1, m2 : InterarrivalModel
        Laws to compare; both are unit mean by construction, rates are
        irrelevant.
    grid : array_like, optional
        ``x`` points for the survival criterion (default
        :func:`default_x_grid`) or ``p`` points for the Lorenz criterion
        (default :func:`default_p_grid`).
    criterion : {"survival", "lorenz"}
        ``survival`` compares integrated survival functions, ``lorenz``
        compares Lorenz curves. Both decide the same order.

    Returns
    -------
    OrderingVerdict
        ``LESS_VARIABLE`` if ``X1``'s integrated survival (or Lorenz curve)
        dominates everywhere within ``ORDER_TOL``, ``MORE_VARIABLE`` if it is
        dominated everywhere, ``INCOMPARABLE`` otherwise. Identical laws
        give ``LESS_VARIABLE`` with zero violation.
    """
    if criterion == "survival":
        g = default_x_grid() if grid is None else np.asarray(grid, dtype=float)
        # int_0^x survival = 1 - E[(X-x)+]; comparing excess means avoids
        # the cancellation of subtracting them from 1
        gap = np.asarray(stop_loss(m1, g)) - np.asarray(stop_loss(m2, g))
    elif criterion == "lorenz":
        g = default_p_grid() if grid is None else np.asarray(grid, dtype=float)
        gap = np.asarray(lorenz_curve(m2, g)) - np.asarray(lorenz_curve(m1, g))
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    if g.size == 0:
        raise ValueError("grid must not be empty")
    return _verdict(gap, g, criterion)


def nbue_classify(model: InterarrivalModel, s_grid=None) -> Aging:
    """Classify by the mean residual life ``E[X - s | X > s]`` against the mean 1.

    Points where the survival function has underflowed are skipped. The
    default grid is 1001 evenly spaced points on ``[0, 10]``.
    """
    s = np.linspace(0.0, 10.0, 1001) if s_grid is None else np.asarray(s_grid, dtype=float)
    sf = np.asarray(survival(model, s), dtype=float)
    keep = sf > 1e-250
    with np.errstate(divide="ignore", invalid="ignore"):
        mrl = np.asarray(stop_loss(model, s[keep]), dtype=float) / sf[keep]
    mrl = mrl[np.isfinite(mrl)]
    better = bool(np.all(mrl <= 1.0 + AGING_TOL))
    worse = bool(np.all(mrl >= 1.0 - AGING_TOL))
    if better and worse:
        return Aging.BOTH
    if better:
        return Aging.NBUE
    if worse:
        return Aging.NWUE
    return Aging.NEITHER


# shape ordering within a family: +1 if a larger shape means a larger capacity
_SHAPE_DIRECTION = {
    "gamma": 1,
    "weibull": 1,
    "pareto": 1,
    "lognormal": -1,
    "shifted_exponential": 1,
}


def _family_coordinates(model):
    """Every ``(family key, shape)`` under which a law fits a one-parameter family."""
    fam, s = model.family, model.shape
    if fam is Family.EXPONENTIAL:
        # Gamma xi=1, Weibull b=1, and the a -> 0 end of the shifted exponential
        return {"gamma": 1.0, "weibull": 1.0, "shifted_exponential": 0.0}
    if fam in (Family.GAMMA, Family.ERLANG):
        out = {"gamma": s}
        if s == 1:
            out.update(weibull=1.0, shifted_exponential=0.0)
        return out
    if fam is Family.WEIBULL:
        out = {"weibull": s}
        if s == 1:
            out.update(gamma=1.0, shifted_exponential=0.0)
        return out
    if fam is Family.UNIFORM:
        return {"uniform": 0.0}
    return {fam.value: s}


def predict_capacity_order(m1: InterarrivalModel, m2: InterarrivalModel, grid=None) -> CapacityRelation:
    """Expected ordering of the zero-order capacities of two laws.

    Rules are tried in turn:

    1. Same family: the shape rule (Gamma ``xi``, Weibull ``b``, Pareto ``b``
       and shifted exponential ``a`` increase capacity; Lognormal ``sigma``
       decreases it). Exponential counts as Gamma or Weibull with shape 1.
    2. Aging classes: NBUE beats NWUE, with the exponential in both.
    3. The grid convex-order check: the less variable law has the larger
       capacity.

    ``UNKNOWN`` is returned when none of them decides.
    """
    c1, c2 = _family_coordinates(m1), _family_coordinates(m2)
    for key in c1.keys() & c2.keys():
        s1, s2 = c1[key], c2[key]
        if s1 == s2:
            return CapacityRelation.GE
        direction = _SHAPE_DIRECTION.get(key, 1)
        return CapacityRelation.GE if (s1 - s2) * direction > 0 else CapacityRelation.LE

    a1, a2 = nbue_classify(m1), nbue_classify(m2)
    if a1 in (Aging.NBUE, Aging.BOTH) and a2 in (Aging.NWUE, Aging.BOTH):
        return CapacityRelation.GE
    if a1 in (Aging.NWUE, Aging.BOTH) and a2 in (Aging.NBUE, Aging.BOTH):
        return CapacityRelation.LE

    verdict = convex_order_check(m1, m2, grid)
    if verdict.relation is Relation.LESS_VARIABLE:
        return CapacityRelation.GE
    if verdict.relation is Relation.MORE_VARIABLE:
        return CapacityRelation.LE
    return CapacityRelation.UNKNOWN
