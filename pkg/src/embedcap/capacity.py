"""Analytical embedding capacity from the renewal function.

All functions work with the normalized delay ``delta = rate * Delta`` and the
unit-mean law of the model. Three routes are offered:

* :func:`capacity_zero_order` -- the single-integral formula
  ``delta / (1 + (2/delta) int_0^delta m(t) dt)``;
* :func:`capacity_linear` -- the ``(2N+1)``-dimensional structured system
  whose ``(0, 0)`` inverse entry gives the occupancy of the matching window;
* Monte Carlo estimates (:func:`capacity_monte_carlo`) from the BGM chain or
  from BGM run on generated realizations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg

from . import bgm
from .renewal_models import (
    Family,
    InterarrivalModel,
    SeriesDivergenceError,
    characteristic_function,
    dispersion_index,
    has_closed_form_renewal,
    renewal_closed_form,
    renewal_function_integral,
    renewal_function_numeric,
)

__all__ = [
    "MethodKind",
    "Method",
    "CapacityEstimate",
    "SystemMatrix",
    "InfiniteVarianceError",
    "SingularMatrixError",
    "capacity_zero_order",
    "build_system_matrix",
    "capacity_linear",
    "capacity_linear_n1",
    "a00_fourier",
    "fourier_entry",
    "fourier_kernel",
    "direct_entry",
    "asymptotic_capacity_gap",
    "capacity_monte_carlo",
    "estimate_capacity",
    "omega_from_capacity",
    "COND_LIMIT",
]

COND_LIMIT = 1e12
NODES_PER_PERIOD = 1000
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


class InfiniteVarianceError(ValueError):
    """The interarrival law has an infinite second moment."""


class SingularMatrixError(np.linalg.LinAlgError):
    """The truncated system is numerically singular."""


class MethodKind(enum.Enum):
    ZERO_ORDER = "zero"
    LINEAR = "linear"
    MC_CHAIN = "mc-chain"
    MC_BGM = "mc-bgm"


@dataclass(frozen=True)
class Method:
    """How a capacity value was obtained; ``size`` is N or a sample count."""

    kind: MethodKind
    size: int | None = None

    def __str__(self):
        return self.kind.value if self.size is None else f"{self.kind.value}:{self.size}"

    @classmethod
    def parse(cls, text: str) -> "Method":
        """Parse ``zero``, ``linear:N``, ``mc-chain:steps`` or ``mc-bgm:points``.

        Sizes accept float notation (``1e6``) as long as they are integral.
        """
        name, _, arg = text.strip().partition(":")
        try:
            kind = MethodKind(name)
        except ValueError:
            raise ValueError(f"unknown method {text!r}") from None
        if kind is MethodKind.ZERO_ORDER:
            if arg:
                raise ValueError("method 'zero' takes no size")
            return cls(kind)
        if not arg:
            if kind is MethodKind.LINEAR:
                return cls(kind, 1)
            raise ValueError(f"method {name!r} needs a size, e.g. {name}:1e6")
        try:
            size = float(arg)
        except ValueError:
            raise ValueError(f"bad size in method {text!r}") from None
        if size != int(size) or size < 1:
            raise ValueError(f"size in method {text!r} must be a positive integer")
        return cls(kind, int(size))


@dataclass(frozen=True)
class CapacityEstimate:
    value: float
    method: Method
    delta: float
    stderr: float | None = None

    def __post_init__(self):
        if not -1e-12 <= self.value <= 1 + 1e-12:
            raise ValueError(f"capacity {self.value} outside [0, 1]")

    @property
    def omega0(self) -> float:
        return omega_from_capacity(self.value)


def omega_from_capacity(c: float) -> float:
    """Window occupancy ``Omega(0)`` implied by capacity ``c = 2w / (1 + w)``."""
    return c / (2.0 - c)


def _check_delta(delta):
    if not (delta > 0 and math.isfinite(delta)):
        raise ValueError(f"normalized delay must be positive and finite, got {delta}")


def _require_finite_variance(model):
    gamma = dispersion_index(model)
    if not math.isfinite(gamma):
        raise InfiniteVarianceError(f"{model} has an infinite second moment")
    return gamma


def _zero_order_value(delta, m_integral):
    return delta / (1.0 + 2.0 * m_integral / delta)


def capacity_zero_order(model: InterarrivalModel, delta: float,
                        grid_step: float | None = None) -> CapacityEstimate:
    """Zero-order capacity ``delta / (1 + (2/delta) int_0^delta m)``.

    Infinite-variance laws are accepted; their renewal function is always
    numeric.
    """
    _check_delta(delta)
    integral = renewal_function_integral(model, delta, grid_step)
    value = _zero_order_value(delta, integral)
    return CapacityEstimate(value, Method(MethodKind.ZERO_ORDER), delta)


# ---------------------------------------------------------------------------
# structured linear system

@dataclass(frozen=True)
class SystemMatrix:
    """The ``(2N+1) x (2N+1)`` matrix indexed by ``h, k`` in ``[-N, N]``.

    ``entries[h + N, k + N]`` holds ``A_hk``. Only row 0 and the diagonal are
    independent; every other entry follows from them.
    """

    order: int
    delta: float
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def __getitem__(self, hk):
        h, k = hk
        n = self.order
        if not (-n <= h <= n and -n <= k <= n):
            raise IndexError(f"index ({h}, {k}) outside [-{n}, {n}]")
        return float(self.entries[h + n, k + n])

    def row0(self) -> np.ndarray:
        return self.entries[self.order].copy()

    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    def reconstruct(self) -> np.ndarray:
        """Rebuild the full matrix from row 0 and the diagonal alone."""
        return _assemble(self.order, self.row0(), self.diagonal())

    def inverse_00(self) -> float:
        cond = np.linalg.cond(self.entries)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SingularMatrixError(f"system matrix condition number {cond:.3g} exceeds {COND_LIMIT:g}")
        lu = linalg.lu_factor(self.entries)
        rhs = np.zeros(2 * self.order + 1)
        rhs[self.order] = 1.0
        return float(linalg.lu_solve(lu, rhs)[self.order])


def _assemble(n, row0, diag):
    size = 2 * n + 1
    a = np.empty((size, size))
    idx = np.arange(-n, n + 1)
    sgn = np.where(idx % 2 == 0, 1.0, -1.0)
    # h (-1)^h A_0h
    u = idx * sgn * row0
    for i, h in enumerate(idx):
        for j, k in enumerate(idx):
            if h == k:
                a[i, j] = diag[i]
            elif h == 0:
                a[i, j] = row0[j]
            elif k == 0:
                a[i, j] = row0[i]
            else:
                a[i, j] = sgn[i] * sgn[j] / (h - k) * (u[i] - u[j])
    return a


def _simpson_nodes(delta, n_max):
    n_int = max(NODES_PER_PERIOD * n_max, int(math.ceil(delta / 1e-3)))
    n_int += n_int % 2
    return np.linspace(0.0, delta, n_int + 1)


def _m_on_nodes(model, t):
    """Renewal function on an equispaced grid starting at 0."""
    if has_closed_form_renewal(model):
        try:
            return renewal_closed_form(model, t), True
        except SeriesDivergenceError:
            pass
    step = t[1] - t[0]
    table = renewal_function_numeric(model, t[-1], step)
    return np.asarray(table.values[: len(t)], dtype=float), False


class _Moments:
    """Integrals of m(t) against the cosine/sine weights on ``[0, delta]``."""

    def __init__(self, model, delta, n_max):
        self.delta = delta
        self.t = _simpson_nodes(delta, n_max)
        self.m, analytic = _m_on_nodes(model, self.t)
        if analytic:
            self.integral = renewal_function_integral(model, delta)
        else:
            self.integral = integrate.simpson(self.m, x=self.t)

    def cos(self, k):
        if k == 0:
            return self.integral
        return integrate.simpson(self.m * np.cos(2 * math.pi * k * self.t / self.delta), x=self.t)

    def sin_ramp(self, k):
        w = (1 - self.t / self.delta) * np.sin(2 * math.pi * k * self.t / self.delta)
        return integrate.simpson(self.m * w, x=self.t)


def _row0_and_diag(mom, n):
    d = mom.delta
    row0 = np.empty(2 * n + 1)
    diag = np.empty(2 * n + 1)
    row0[n] = diag[n] = 1 - d / 2 + 2 * mom.integral / d
    for k in range(1, n + 1):
        a0k = 2 * (-1) ** k * mom.cos(k) / d
        akk = 1 + 2 / d * (mom.cos(k) + 2 * math.pi * k * mom.sin_ramp(k))
        row0[n + k] = row0[n - k] = a0k
        diag[n + k] = diag[n - k] = akk
    return row0, diag


def build_system_matrix(model: InterarrivalModel, delta: float, order: int) -> SystemMatrix:
    """Assemble the structured system of the given order ``N >= 1``.

    Cosine/sine-weighted integrals of ``m`` use composite Simpson with at
    least 1000 nodes per oscillation period.
    """
    _check_delta(delta)
    if order < 1 or order != int(order):
        raise ValueError("order must be an integer >= 1")
    order = int(order)
    _require_finite_variance(model)
    mom = _Moments(model, delta, order)
    row0, diag = _row0_and_diag(mom, order)
    return SystemMatrix(order, delta, _assemble(order, row0, diag))


def direct_entry(model: InterarrivalModel, delta: float, h: int, k: int) -> float:
    """``A_hk`` for ``h != k`` straight from its defining integral.

    Uses ``(-1)^(h-k)/(h-k) (2/delta) int m(t) [h cos(2 pi h t/delta) -
    k cos(2 pi k t/delta)] dt`` without going through row 0.
    """
    if h == k:
        raise ValueError("direct_entry is for off-diagonal entries")
    _check_delta(delta)
    mom = _Moments(model, delta, max(abs(h), abs(k), 1))
    w = h * np.cos(2 * math.pi * h * mom.t / delta) - k * np.cos(2 * math.pi * k * mom.t / delta)
    val = integrate.simpson(mom.m * w, x=mom.t)
    return (-1) ** (h - k) / (h - k) * 2 / delta * val


def capacity_linear(model: InterarrivalModel, delta: float, order: int = 1) -> CapacityEstimate:
    """Capacity from the order-``N`` system: ``Omega(0) = (delta/2) {A^-1}_00``."""
    a = build_system_matrix(model, delta, order)
    omega = delta / 2 * a.inverse_00()
    value = 2 * omega / (1 + omega)
    return CapacityEstimate(value, Method(MethodKind.LINEAR, int(order)), delta)


def capacity_linear_n1(model: InterarrivalModel, delta: float) -> CapacityEstimate:
    """First-order capacity in closed form.

    ``delta / (1 + (2/delta) int m + 2 A01^2 / (A01 - A11))``.
    """
    _check_delta(delta)
    _require_finite_variance(model)
    mom = _Moments(model, delta, 1)
    row0, diag = _row0_and_diag(mom, 1)
    a01, a11 = row0[2], diag[2]
    if a01 == a11:
        raise SingularMatrixError("A01 equals A11; first-order correction undefined")
    denom = 1 + 2 * mom.integral / delta + 2 * a01 ** 2 / (a01 - a11)
    return CapacityEstimate(delta / denom, Method(MethodKind.LINEAR, 1), delta)


# ---------------------------------------------------------------------------
# Fourier-domain entries

_CLOSED_CF = (Family.EXPONENTIAL, Family.GAMMA, Family.ERLANG, Family.UNIFORM, Family.SHIFTED_EXPONENTIAL)


def _real_kernel(model, nu, limit):
    """``Re{K/(1-K)}`` with the removable singularity at 0 patched."""
    nu = np.asarray(nu, dtype=float)
    k = np.asarray(characteristic_function(model, nu), dtype=complex)
    one_minus = 1.0 - k
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (1.0 - k.real) / (one_minus.real ** 2 + one_minus.imag ** 2) - 1.0
    return np.where(np.abs(nu) < 1e-4, limit, val)


def fourier_kernel(model: InterarrivalModel, nu):
    """``Re{K(nu) / (1 - K(nu))}``, equal to ``(gamma - 1) / 2`` near ``nu = 0``."""
    limit = (_require_finite_variance(model) - 1) / 2
    out = _real_kernel(model, nu, limit)
    return float(out) if np.ndim(nu) == 0 else out


def _panel_integral(fn, lo, hi, per_unit=1):
    """Gauss-Legendre over panels of width ``1 / per_unit`` covering ``[lo, hi]``."""
    edges = np.linspace(lo, hi, int(round((hi - lo) * per_unit)) + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    x = (mid[:, None] + half * _GL_X[None, :]).ravel()
    w = np.tile(half * _GL_W, len(mid))
    return float(np.dot(fn(x), w))


def fourier_entry(model: InterarrivalModel, delta: float, h: int, k: int, tol: float = 1e-6) -> float:
    """``A_hk`` from the frequency-domain integral of ``Re{K/(1-K)}``.

    The integral is taken in ``u = delta * nu`` with Gauss-Legendre panels
    between the sinc zeros, split further when ``K`` oscillates faster than
    the sinc factors, out to a cutoff where the integrand envelope falls
    below ``tol``. For kernels that decay without oscillating, the remainder
    replaces ``sin^2`` by its period average ``1/2``; for the oscillating
    ones (uniform, shifted exponential) it is below ``tol`` and dropped.
    Only families with a closed-form characteristic function are accepted.
    """
    _check_delta(delta)
    gamma = _require_finite_variance(model)
    if model.family not in _CLOSED_CF:
        raise NotImplementedError(f"no closed-form characteristic function for {model.family.value}")
    limit = (gamma - 1) / 2

    def integrand(u):
        return _real_kernel(model, u / delta, limit) * np.sinc(u - h) * np.sinc(u - k)

    span = max(abs(h), abs(k)) + 1
    cut = 64.0
    while cut < 2.0 ** 21:
        kk = abs(characteristic_function(model, cut / delta))
        envelope = 2 * kk / max(1 - kk, 1e-3) / (math.pi ** 2 * (cut - span))
        if envelope < tol:
            break
        cut *= 2
    oscillating = model.family in (Family.UNIFORM, Family.SHIFTED_EXPONENTIAL)
    per_unit = max(1, math.ceil(4 / delta)) if oscillating else 1
    body = _panel_integral(integrand, -cut, cut, per_unit)

    rest = 0.0
    if not oscillating:
        sign = (-1) ** (h + k)

        def tail(u):
            r = _real_kernel(model, u / delta, limit)
            return r * (1 / ((u - h) * (u - k)) + 1 / ((u + h) * (u + k)))

        rest = sign / (2 * math.pi ** 2) * integrate.quad(tail, cut, np.inf, limit=200)[0]
    base = 0.0
    if h == k:
        base = 1.0 + (delta / 2 if h == 0 else 0.0)
    return base + 2 * (body + rest)


def a00_fourier(model: InterarrivalModel, delta: float) -> float:
    """``A_00 = 1 + delta/2 + 2 int Re{K/(1-K)} delta sinc^2(delta nu) dnu``."""
    return fourier_entry(model, delta, 0, 0)


def asymptotic_capacity_gap(model: InterarrivalModel, delta: float) -> float:
    """Predicted ``1 - C`` for large delay: dispersion index over ``delta``."""
    _check_delta(delta)
    return _require_finite_variance(model) / delta


# ---------------------------------------------------------------------------
# Monte Carlo

def capacity_monte_carlo(model: InterarrivalModel, delta: float, method: Method, seed) -> CapacityEstimate:
    """Simulated capacity by the BGM chain or by BGM on generated processes.

    ``mc-bgm:n`` generates two processes of ``n`` points at the model's rate
    and matches them with physical delay ``delta / rate``; the error bar
    comes from 20 equal, independent replicas whose counts are pooled.
    """
    _check_delta(delta)
    if method.kind is MethodKind.MC_CHAIN:
        value, err = bgm.chain_capacity(model, delta, method.size, seed)
        return CapacityEstimate(value, method, delta, err)
    if method.kind is not MethodKind.MC_BGM:
        raise ValueError(f"{method} is not a Monte Carlo method")
    rng = np.random.default_rng(seed)
    reps = max(1, min(20, method.size // 50))
    sizes = np.full(reps, method.size // reps)
    sizes[: method.size % reps] += 1
    counts = np.zeros((reps, 2))
    for r, n in enumerate(sizes):
        s = bgm.generate_renewal(model, int(n), rng)
        t = bgm.generate_renewal(model, int(n), rng)
        out = bgm.bgm_match(s, t, delta / model.rate)
        counts[r] = 2 * out.n_pairs, 2 * out.n_pairs + out.chaff_s + out.chaff_t
    value = counts[:, 0].sum() / counts[:, 1].sum()
    err = None
    if reps > 1:
        err = float(np.std(counts[:, 0] / counts[:, 1], ddof=1) / math.sqrt(reps))
    return CapacityEstimate(float(value), method, delta, err)


def estimate_capacity(model: InterarrivalModel, delta: float, method, seed=None) -> CapacityEstimate:
    """Dispatch on ``method`` (a :class:`Method` or its text form).

    ``seed`` is only used by the Monte Carlo methods.
    """
    if isinstance(method, str):
        method = Method.parse(method)
    if method.kind is MethodKind.ZERO_ORDER:
        return capacity_zero_order(model, delta)
    if method.kind is MethodKind.LINEAR:
        return capacity_linear(model, delta, method.size)
    return capacity_monte_carlo(model, delta, method, seed)
