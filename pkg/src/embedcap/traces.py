"""Packet-trace pipeline: parse, pick rate-matched tranches, normalize, compare.

Two tranches of ``n`` packets with similar rates are cut from a source and a
relay trace, rescaled so that their pooled mean interarrival is one, and
optionally scrambled (interarrivals permuted) to strip dependence. BGM on
the resulting pair gives an empirical capacity that is compared with the
zero-order formula for a Weibull law fitted to the pooled interarrivals.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, special

from .bgm import bgm_match, empirical_capacity
from .capacity import capacity_zero_order
from .renewal_models import InterarrivalModel

__all__ = [
    "Trace",
    "TranchePair",
    "WeibullFit",
    "ErrorRow",
    "TraceError",
    "TraceParseError",
    "EmptyTraceError",
    "NonMonotoneTraceError",
    "InsufficientDataError",
    "WeibullFitError",
    "parse_trace",
    "select_tranches",
    "normalize_pair",
    "scramble",
    "scramble_pair",
    "fit_weibull_shape",
    "capacity_error_table",
    "format_error_table",
    "CSV_HEADER",
    "OBSERVATION_LIMIT",
    "DUPLICATE_STEP",
    "SHAPE_BOUNDS",
]

CSV_HEADER = "delta,empirical_capacity,theoretical_capacity,abs_error"
OBSERVATION_LIMIT = 9000.0
DUPLICATE_STEP = 1e-9
MAX_DECREASING_FRACTION = 1e-3
SHAPE_BOUNDS = (0.05, 20.0)


class TraceError(ValueError):
    """Base class for trace input problems."""


class TraceParseError(TraceError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class EmptyTraceError(TraceError):
    pass


class NonMonotoneTraceError(TraceError):
    pass


class InsufficientDataError(TraceError):
    pass


class WeibullFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class Trace:
    """Strictly increasing packet timestamps in seconds."""

    timestamps: np.ndarray = field(repr=False)
    source_label: str = ""

    def __post_init__(self):
        t = np.array(self.timestamps, dtype=float).ravel()
        if t.size == 0:
            raise EmptyTraceError(f"trace {self.source_label!r} is empty")
        if not np.all(np.isfinite(t)):
            raise TraceError("timestamps must be finite")
        if np.any(np.diff(t) <= 0):
            raise NonMonotoneTraceError("timestamps must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "timestamps", t)

    def __len__(self):
        return len(self.timestamps)

    @property
    def interarrivals(self) -> np.ndarray:
        return np.diff(self.timestamps)

    def segment(self, offset: int, n: int) -> "Trace":
        return Trace(self.timestamps[offset:offset + n], f"{self.source_label}[{offset}:{offset + n}]")


@dataclass(frozen=True)
class TranchePair:
    """Two ``n``-packet tranches cut from a source and a relay trace.

    When ``normalized`` is set the epochs are dimensionless: interarrivals
    are divided by the pooled mean and each tranche starts one mean after
    the origin. ``sample_rate`` is the pooled rate in packets per second
    before rescaling.
    """

    source: Trace
    relay: Trace
    normalized: bool
    sample_rate: float
    offsets: tuple = (0, 0)

    def __post_init__(self):
        if len(self.source) != len(self.relay):
            raise ValueError("tranches must have the same number of packets")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")

    @property
    def n(self) -> int:
        return len(self.source)

    def pooled_interarrivals(self) -> np.ndarray:
        return np.concatenate([self.source.interarrivals, self.relay.interarrivals])


# ---------------------------------------------------------------------------
# parsing

def _read_column(lines, column, label):
    values, numbers = [], []
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        fields = text.split()
        if len(fields) < column:
            raise TraceParseError(label, lineno, f"expected at least {column} columns, found {len(fields)}")
        try:
            v = float(fields[column - 1])
        except ValueError:
            raise TraceParseError(label, lineno, f"cannot parse {fields[column - 1]!r} as a timestamp") from None
        if not math.isfinite(v):
            raise TraceParseError(label, lineno, f"timestamp {fields[column - 1]!r} is not finite")
        values.append(v)
        numbers.append(lineno)
    return np.asarray(values, dtype=float), numbers


def _separate_duplicates(t):
    """Shift the k-th repeat of a timestamp by ``k * DUPLICATE_STEP``."""
    if t.size < 2:
        return t
    same = np.concatenate([[False], np.diff(t) == 0])
    if not same.any():
        return t
    # running count of repeats within each run of equal values
    run_start = np.maximum.accumulate(np.where(~same, np.arange(t.size), 0))
    k = np.arange(t.size) - run_start
    return t + DUPLICATE_STEP * k


def parse_trace(path, column: int = 1) -> Trace:
    """Read one timestamp column from a whitespace-separated text file.

    Blank lines and lines starting with ``#`` are skipped. Columns count
    from 1. A handful of out-of-order packets (at most 0.1% of the lines)
    are put back in order. Beyond that the file is rejected. Repeated
    timestamps are spread apart by ``1e-9`` s per repeat.

    Raises
    ------
    FileNotFoundError
        The file does not exist.
    TraceParseError
        A line lacks the column or does not parse; the message carries the
        path and line number.
    EmptyTraceError
        No timestamp was found.
    NonMonotoneTraceError
        Too many timestamps go backwards.
    """
    if column < 1:
        raise ValueError("column counts from 1")
    p = Path(path)
    with open(p, encoding="utf-8", errors="replace") as fh:
        t, _ = _read_column(fh, column, str(p))
    if t.size == 0:
        raise EmptyTraceError(f"{p}: no timestamps found")
    drops = int(np.count_nonzero(np.diff(t) < 0))
    if drops > MAX_DECREASING_FRACTION * t.size:
        raise NonMonotoneTraceError(
            f"{p}: {drops} of {t.size} timestamps decrease (limit {MAX_DECREASING_FRACTION:.1%})")
    if drops:
        t = np.sort(t, kind="stable")
    t = _separate_duplicates(t)
    if np.any(np.diff(t) <= 0):
        raise NonMonotoneTraceError(f"{p}: duplicate timestamps cannot be separated at 1e-9 s")
    return Trace(t, str(p))


# ---------------------------------------------------------------------------
# tranche selection

def _window_rates(t, n, window):
    last = len(t) - max(n, window)
    offsets = np.arange(last + 1)
    span = t[offsets + window - 1] - t[offsets]
    return window / span


def _relative_gap(r1, r2):
    return np.abs(r1 - r2) / np.maximum(r1, r2)


def select_tranches(source: Trace, relay: Trace, n: int, window: int | None = None,
                    normalize: bool = True) -> TranchePair:
    """Pick the two ``n``-packet tranches whose windowed rates match best.

    The rate at an offset is ``window`` divided by the time spanned by the
    ``window`` packets starting there. Every offset of the source is paired
    with the relay offset of nearest rate, and the pair with the smallest
    relative difference ``|r1 - r2| / max(r1, r2)`` wins; ties go to the
    smallest source offset, then the smallest relay offset.

    Raises
    ------
    InsufficientDataError
        A trace has fewer than ``max(n, window)`` packets or ``n < 2``.
    """
    if window is None:
        window = n
    if n < 2 or window < 2:
        raise InsufficientDataError("tranches need at least 2 packets")
    for tr, role in ((source, "source"), (relay, "relay")):
        if len(tr) < max(n, window):
            raise InsufficientDataError(
                f"{role} trace {tr.source_label!r} has {len(tr)} packets, needs {max(n, window)}")
    r1 = _window_rates(source.timestamps, n, window)
    r2 = _window_rates(relay.timestamps, n, window)

    order = np.argsort(r2, kind="stable")
    sorted_r2 = r2[order]
    pos = np.searchsorted(sorted_r2, r1)
    lo = sorted_r2[np.clip(pos - 1, 0, len(r2) - 1)]
    hi = sorted_r2[np.clip(pos, 0, len(r2) - 1)]
    best = np.minimum(_relative_gap(r1, lo), _relative_gap(r1, hi))
    o1 = int(np.flatnonzero(best == best.min())[0])
    gaps = _relative_gap(r1[o1], r2)
    o2 = int(np.flatnonzero(gaps == gaps.min())[0])

    pair = TranchePair(source.segment(o1, n), relay.segment(o2, n), False,
                       _pooled_rate(source.timestamps[o1:o1 + n], relay.timestamps[o2:o2 + n]),
                       (o1, o2))
    return normalize_pair(pair) if normalize else pair


def _pooled_rate(a, b):
    return (len(a) + len(b) - 2) / ((a[-1] - a[0]) + (b[-1] - b[0]))


def normalize_pair(pair: TranchePair) -> TranchePair:
    """Rescale both tranches by the mean interarrival of their union.

    Each tranche is shifted so that its first packet sits one pooled mean
    after the origin, so the epochs are positive and dimensionless.
    """
    if pair.normalized:
        return pair
    a, b = pair.source.timestamps, pair.relay.timestamps
    mean = 1.0 / _pooled_rate(a, b)

    def rescale(t, label):
        return Trace(1.0 + (t - t[0]) / mean, label)

    return TranchePair(rescale(a, pair.source.source_label), rescale(b, pair.relay.source_label),
                       True, pair.sample_rate, pair.offsets)


# ---------------------------------------------------------------------------
# scrambling

def scramble(tranche: Trace, rng: np.random.Generator) -> Trace:
    """Randomly permute the interarrivals and re-accumulate from the first epoch.

    The last epoch is pinned to its original value, so the span and the
    mean interarrival are unchanged exactly; the individual interarrivals
    are preserved up to floating-point rounding of the running sum.
    """
    t = tranche.timestamps
    if len(t) < 3:
        return tranche
    gaps = rng.permutation(np.diff(t))
    out = np.empty_like(t)
    out[0] = t[0]
    out[1:] = t[0] + np.cumsum(gaps)
    out[-1] = t[-1]
    return Trace(out, tranche.source_label)


def scramble_pair(pair: TranchePair, rng: np.random.Generator) -> TranchePair:
    return TranchePair(scramble(pair.source, rng), scramble(pair.relay, rng),
                       pair.normalized, pair.sample_rate, pair.offsets)


# ---------------------------------------------------------------------------
# Weibull fit

@dataclass(frozen=True)
class WeibullFit:
    shape: float
    log_likelihood: float
    at_bound: bool
    n: int


def _weibull_loglik(b, x, logx):
    # unit-mean Weibull: scale pinned to 1 / Gamma(1 + 1/b)
    log_scale = -special.gammaln(1.0 + 1.0 / b)
    z = np.exp(b * (logx - log_scale))
    return x.size * (math.log(b) - b * log_scale) + (b - 1.0) * logx.sum() - z.sum()


def fit_weibull_shape(data, bounds=SHAPE_BOUNDS, maxiter: int = 200) -> WeibullFit:
    """Maximum-likelihood shape of a unit-mean Weibull law.

    Parameters
    ----------
    data : Trace, TranchePair or array_like
        A trace segment (its interarrivals are used), a pair (the pooled
        interarrivals of both tranches), or the interarrivals themselves.
        They should already be normalized to unit mean.
    bounds : tuple of float
        Search interval for the shape.

    Returns
    -------
    WeibullFit
        ``at_bound`` flags a maximum on the edge of ``bounds``, which is
        what nearly constant interarrivals produce.
    """
    if isinstance(data, TranchePair):
        x = data.pooled_interarrivals()
    elif isinstance(data, Trace):
        x = data.interarrivals
    else:
        x = np.asarray(data, dtype=float).ravel()
    if x.size < 2:
        raise InsufficientDataError("need at least 2 interarrivals to fit a shape")
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise ValueError("interarrivals must be positive and finite")
    logx = np.log(x)
    with np.errstate(over="ignore"):
        res = optimize.minimize_scalar(lambda b: -_weibull_loglik(b, x, logx), bounds=bounds,
                                       method="bounded", options={"maxiter": maxiter, "xatol": 1e-8})
    if not res.success:
        raise WeibullFitError(f"shape search did not converge in {maxiter} iterations")
    b = float(res.x)
    lo, hi = bounds
    at_bound = b - lo < 1e-4 * lo or hi - b < 1e-4 * hi
    return WeibullFit(b, float(-res.fun), bool(at_bound), int(x.size))


# ---------------------------------------------------------------------------
# capacity comparison

@dataclass(frozen=True)
class ErrorRow:
    delta: float
    empirical_capacity: float
    theoretical_capacity: float

    @property
    def abs_error(self) -> float:
        return abs(self.empirical_capacity - self.theoretical_capacity)


def capacity_error_table(pair: TranchePair, delta_grid, observation_limit: float = OBSERVATION_LIMIT,
                         shape: float | None = None) -> list[ErrorRow]:
    """Empirical BGM capacity against the zero-order Weibull capacity.

    Both normalized tranches are cut at ``observation_limit`` (dimensionless
    time) before matching, and ``delta`` is used directly as the delay
    since the pair runs at unit rate. The Weibull shape is fitted on the
    pooled interarrivals unless ``shape`` is given.
    """
    grid = [float(d) for d in delta_grid]
    if not grid:
        return []
    if not pair.normalized:
        pair = normalize_pair(pair)
    if shape is None:
        shape = fit_weibull_shape(pair).shape
    model = InterarrivalModel.weibull(shape)
    s = pair.source.timestamps
    t = pair.relay.timestamps
    s = s[s <= observation_limit]
    t = t[t <= observation_limit]
    rows = []
    for d in sorted(grid):
        emp = empirical_capacity(bgm_match(s, t, d))
        theo = capacity_zero_order(model, d).value
        rows.append(ErrorRow(d, emp, theo))
    return rows


def format_error_table(rows) -> str:
    """CSV text with header ``delta,empirical_capacity,theoretical_capacity,abs_error``."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(f"{r.delta!r},{r.empirical_capacity!r},{r.theoretical_capacity!r},{r.abs_error!r}\n")
    return buf.getvalue()
