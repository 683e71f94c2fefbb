"""Bounded Greedy Match on finite realizations and the equivalent chain.

Points of the first process ``s`` may be relayed by points of the second
process ``t`` that follow them by at most ``delta``. BGM scans ``s`` once and
greedily pairs each point with the first still-undetermined point of ``t`` in
``[s_i, s_i + delta]``; that greedy choice is optimal. The chain view tracks
the gap ``Z`` between the current reference points of the two processes and
counts how often it lands inside ``[0, delta]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import bgm_kernel, chain_kernel
from .renewal_models import InterarrivalModel, sample_interarrivals

__all__ = [
    "PointSequence",
    "MatchOutcome",
    "ChainTrace",
    "DegenerateOutcomeError",
    "bgm_match",
    "brute_force_max_matching",
    "generate_renewal",
    "simulate_chain",
    "empirical_capacity",
    "capacity_from_occupancy",
    "chain_capacity",
    "BRUTE_FORCE_LIMIT",
    "BURN_IN",
]

BRUTE_FORCE_LIMIT = 24
BURN_IN = 1000
_CHUNK = 1 << 20


class DegenerateOutcomeError(ValueError):
    """No point was classified, so the matched fraction is undefined."""


@dataclass(frozen=True)
class PointSequence:
    """Strictly increasing positive arrival epochs."""

    epochs: np.ndarray

    def __post_init__(self):
        e = np.array(self.epochs, dtype=float).ravel()
        if e.size and not np.all(e > 0):
            raise ValueError("epochs must be positive")
        if np.any(np.diff(e) <= 0):
            raise ValueError("epochs must be strictly increasing")
        e.setflags(write=False)
        object.__setattr__(self, "epochs", e)

    def __len__(self):
        return len(self.epochs)

    def scaled(self, factor: float) -> "PointSequence":
        return PointSequence(self.epochs * factor)


@dataclass(frozen=True)
class MatchOutcome:
    """Result of BGM.

    ``pairs`` holds zero-based ``(index in s, index in t)`` rows. Points of
    ``t`` left after ``s`` is exhausted were never examined and are counted
    in ``undetermined_t`` rather than as chaff.
    """

    pairs: np.ndarray = field(repr=False)
    chaff_s: int
    chaff_t: int
    undetermined_t: int

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def n_points(self) -> int:
        return 2 * self.n_pairs + self.chaff_s + self.chaff_t + self.undetermined_t


@dataclass(frozen=True)
class ChainTrace:
    steps_inside: int
    steps_total: int
    final_state: float

    @property
    def occupancy(self) -> float:
        return self.steps_inside / self.steps_total


def _epochs(seq) -> np.ndarray:
    if isinstance(seq, PointSequence):
        return seq.epochs
    return PointSequence(seq).epochs


def bgm_match(s, t, delta: float) -> MatchOutcome:
    """Run Bounded Greedy Match of ``s`` into ``t`` under delay bound ``delta``.

    Parameters
    ----------
    s, t : PointSequence or array_like
        Epochs of the first and second process.
    delta : float
        Maximum delay; a pair ``(i, j)`` needs ``0 <= t[j] - s[i] <= delta``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    se, te = _epochs(s), _epochs(t)
    k = min(len(se), len(te))
    ps = np.empty(k, dtype=np.int64)
    pt = np.empty(k, dtype=np.int64)
    npairs, cs, ct, ut = bgm_kernel(se, te, float(delta), ps, pt)
    pairs = np.column_stack([ps[:npairs], pt[:npairs]])
    return MatchOutcome(pairs, int(cs), int(ct), int(ut))


def brute_force_max_matching(s, t, delta: float) -> int:
    """Largest order-preserving matching with ``0 <= t_j - s_i <= delta``.

    Dynamic programme over index pairs; limited to small inputs because it
    serves as an exhaustive reference for :func:`bgm_match`.
    """
    se, te = _epochs(s), _epochs(t)
    if len(se) + len(te) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} points in total")
    best = np.zeros((len(se) + 1, len(te) + 1), dtype=int)
    for i in range(1, len(se) + 1):
        for j in range(1, len(te) + 1):
            gap = te[j - 1] - se[i - 1]
            take = best[i - 1, j - 1] + 1 if 0 <= gap <= delta else 0
            best[i, j] = max(best[i - 1, j], best[i, j - 1], take)
    return int(best[-1, -1])


def generate_renewal(model: InterarrivalModel, n_points: int, rng: np.random.Generator) -> PointSequence:
    """Epochs of a renewal process with ``n_points`` arrivals, in physical time."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    gaps = sample_interarrivals(model, n_points, rng) / model.rate
    return PointSequence(np.cumsum(gaps))


def _start_state(model, rng):
    # gap between the first arrivals of the two processes
    first = sample_interarrivals(model, 2, rng)
    return float(first[1] - first[0])


class _ChainState:
    """Chain position plus buffered draws for the two processes.

    Draws are refilled in fixed-size chunks only when a buffer runs dry, so
    the path depends on the seed alone and not on how the run is split.
    """

    def __init__(self, model, rng, burn_in):
        self.model = model
        self.rng = rng
        self.z = _start_state(model, rng)
        self.skip = int(burn_in)
        self.x = self.y = np.empty(0)
        self.ix = self.iy = 0

    def advance(self, delta, n_steps):
        """Run ``n_steps`` counted steps; returns the visits inside ``[0, delta]``."""
        steps = inside = 0
        while steps < n_steps:
            if self.ix >= len(self.x):
                self.x, self.ix = sample_interarrivals(self.model, _CHUNK, self.rng), 0
            if self.iy >= len(self.y):
                self.y, self.iy = sample_interarrivals(self.model, _CHUNK, self.rng), 0
            self.z, self.skip, got, ins, dx, dy = chain_kernel(
                self.z, self.x[self.ix:], self.y[self.iy:], float(delta), self.skip, n_steps - steps)
            self.ix += dx
            self.iy += dy
            steps += got
            inside += ins
        return inside


def simulate_chain(model: InterarrivalModel, delta: float, n_steps: int,
                   rng: np.random.Generator, burn_in: int = BURN_IN) -> ChainTrace:
    """Simulate the BGM gap chain in normalized time.

    The chain starts from the gap between the first arrivals of the two
    processes and moves by ``-X`` above the window, ``Y - X`` inside
    ``[0, delta]`` (both ends included) and ``+Y`` below it. ``burn_in``
    initial steps are discarded before visits are counted.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if not delta > 0:
        raise ValueError("delta must be positive")
    state = _ChainState(model, rng, burn_in)
    inside = state.advance(delta, int(n_steps))
    return ChainTrace(int(inside), int(n_steps), float(state.z))


def capacity_from_occupancy(p: float) -> float:
    """Matched fraction when a share ``p`` of chain visits fall in the window.

    Each visit inside consumes two points (a pair), each outside one chaff
    point, hence ``2p / (1 + p)``.
    """
    return 2.0 * p / (1.0 + p)


def empirical_capacity(outcome: MatchOutcome) -> float:
    """Matched fraction of the classified points; undetermined tail excluded."""
    matched = 2 * outcome.n_pairs
    denom = matched + outcome.chaff_s + outcome.chaff_t
    if denom == 0:
        raise DegenerateOutcomeError("no point was classified")
    return matched / denom


def chain_capacity(model: InterarrivalModel, delta: float, n_steps: int, seed,
                   n_batches: int = 20) -> tuple[float, float]:
    """Capacity and batch-means standard error from ``n_steps`` chain steps.

    Batches are consecutive segments of one long run so the estimate equals
    the single-run value; the spread across batches gives the error bar.
    """
    rng = np.random.default_rng(seed)
    n_batches = max(1, min(n_batches, n_steps))
    sizes = np.full(n_batches, n_steps // n_batches)
    sizes[: n_steps % n_batches] += 1
    state = _ChainState(model, rng, BURN_IN)
    occ = np.empty(n_batches)
    for k, size in enumerate(sizes):
        occ[k] = state.advance(delta, int(size)) / size
    p = float(np.dot(occ, sizes) / n_steps)
    value = capacity_from_occupancy(p)
    if n_batches < 2:
        return value, math.nan
    caps = 2 * occ / (1 + occ)
    return value, float(caps.std(ddof=1) / math.sqrt(n_batches))
