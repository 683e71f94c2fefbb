"""Interarrival laws in unit-mean form and their renewal functions.

Every model is described by its unit-mean density ``k(t)`` plus a rate; all
quantities computed here (densities, CDFs, renewal functions, characteristic
functions) refer to the unit-mean law, i.e. to the process rescaled to unit
rate. The rate only enters when realizations are generated in physical time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from ._kernels import solve_renewal_stieltjes

__all__ = [
    "Family",
    "InterarrivalModel",
    "RenewalFunctionTable",
    "TableSource",
    "SeriesDivergenceError",
    "updf",
    "cdf",
    "survival",
    "quantile",
    "stop_loss",
    "dispersion_index",
    "sample_interarrival",
    "sample_interarrivals",
    "renewal_function",
    "renewal_function_numeric",
    "renewal_closed_form",
    "renewal_function_integral",
    "has_closed_form_renewal",
    "characteristic_function",
    "default_grid_step",
]


class SeriesDivergenceError(ArithmeticError):
    """The Weibull renewal series failed its truncation criterion."""


class Family(enum.Enum):
    EXPONENTIAL = "exponential"
    GAMMA = "gamma"
    ERLANG = "erlang"
    WEIBULL = "weibull"
    UNIFORM = "uniform"
    PARETO = "pareto"
    LOGNORMAL = "lognormal"
    SHIFTED_EXPONENTIAL = "shifted_exponential"


# name of the single shape parameter carried by each family
SHAPE_NAME = {
    Family.EXPONENTIAL: None,
    Family.GAMMA: "xi",
    Family.ERLANG: "xi",
    Family.WEIBULL: "b",
    Family.UNIFORM: None,
    Family.PARETO: "b",
    Family.LOGNORMAL: "sigma",
    Family.SHIFTED_EXPONENTIAL: "a",
}


@dataclass(frozen=True)
class InterarrivalModel:
    """A renewal traffic family: a unit-mean interarrival law and a rate.

    Parameters
    ----------
    family : Family
        Distribution family.
    shape : float, optional
        The family's shape parameter (``xi`` for Gamma/Erlang, ``b`` for
        Weibull/Pareto, ``sigma`` for Lognormal, offset ``a`` for the shifted
        exponential). Must be omitted for Exponential and Uniform.
    rate : float
        Arrivals per unit time.
    """

    family: Family
    shape: float | None = None
    rate: float = 1.0

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive and finite, got {self.rate}")
        name = SHAPE_NAME[fam]
        if name is None:
            if self.shape is not None:
                raise ValueError(f"{fam.value} takes no shape parameter")
            return
        if self.shape is None:
            raise ValueError(f"{fam.value} requires parameter {name}")
        s = float(self.shape)
        object.__setattr__(self, "shape", s)
        if not math.isfinite(s):
            raise ValueError(f"{name} must be finite")
        if fam is Family.ERLANG and (s < 1 or s != int(s)):
            raise ValueError(f"erlang {name} must be an integer >= 1, got {s}")
        if fam in (Family.GAMMA, Family.WEIBULL, Family.LOGNORMAL) and s <= 0:
            raise ValueError(f"{fam.value} {name} must be > 0, got {s}")
        if fam is Family.PARETO and s <= 1:
            raise ValueError(f"pareto {name} must be > 1 for a finite mean, got {s}")
        if fam is Family.SHIFTED_EXPONENTIAL and not 0 < s < 1:
            raise ValueError(f"shifted exponential {name} must lie in (0, 1), got {s}")

    # convenience constructors
    @classmethod
    def exponential(cls, rate=1.0):
        return cls(Family.EXPONENTIAL, None, rate)

    @classmethod
    def gamma(cls, xi, rate=1.0):
        return cls(Family.GAMMA, xi, rate)

    @classmethod
    def erlang(cls, xi, rate=1.0):
        return cls(Family.ERLANG, xi, rate)

    @classmethod
    def weibull(cls, b, rate=1.0):
        return cls(Family.WEIBULL, b, rate)

    @classmethod
    def uniform(cls, rate=1.0):
        return cls(Family.UNIFORM, None, rate)

    @classmethod
    def pareto(cls, b, rate=1.0):
        return cls(Family.PARETO, b, rate)

    @classmethod
    def lognormal(cls, sigma, rate=1.0):
        return cls(Family.LOGNORMAL, sigma, rate)

    @classmethod
    def shifted_exponential(cls, a, rate=1.0):
        return cls(Family.SHIFTED_EXPONENTIAL, a, rate)

    @property
    def weibull_scale(self) -> float:
        # unit mean pins sigma = 1 / Gamma(1 + 1/b)
        return 1.0 / special.gamma(1.0 + 1.0 / self.shape)

    def gamma_shape(self) -> float | None:
        """Shape as a Gamma law (Exponential is Gamma with xi=1), else None."""
        if self.family is Family.EXPONENTIAL:
            return 1.0
        if self.family in (Family.GAMMA, Family.ERLANG):
            return self.shape
        return None

    def __str__(self):
        name = SHAPE_NAME[self.family]
        s = self.family.value
        if name is not None:
            s += f":{name}={self.shape:g}"
        if self.rate != 1.0:
            s += f"@{self.rate:g}"
        return s


class TableSource(enum.Enum):
    CLOSED_FORM = "closed_form"
    NUMERIC_RENEWAL_EQUATION = "numeric_renewal_equation"
    TRUNCATED_SERIES = "truncated_series"


@dataclass(frozen=True)
class RenewalFunctionTable:
    """The unit-rate renewal function sampled on ``0, h, 2h, ...``."""

    grid_step: float
    values: np.ndarray = field(repr=False)
    source: TableSource

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def grid(self) -> np.ndarray:
        return self.grid_step * np.arange(len(self.values))

    @property
    def t_max(self) -> float:
        return self.grid_step * (len(self.values) - 1)

    def __call__(self, t):
        """Linear interpolation on the table."""
        return np.interp(t, self.grid, self.values)

    def integral(self, upper: float | None = None) -> float:
        """Trapezoidal integral of the table from 0 to ``upper``."""
        if upper is None:
            upper = self.t_max
        if upper > self.t_max * (1 + 1e-12):
            raise ValueError("upper limit beyond the table")
        n = int(math.floor(upper / self.grid_step + 1e-9))
        v = self.values
        total = self.grid_step * (v[:n + 1].sum() - 0.5 * (v[0] + v[n]))
        rest = upper - n * self.grid_step
        if rest > 0 and n + 1 < len(v):
            end = v[n] + (v[n + 1] - v[n]) * rest / self.grid_step
            total += 0.5 * rest * (v[n] + end)
        return float(total)


def _as_array(t):
    return np.asarray(t, dtype=float)


def _scalar_or_array(x, like):
    return float(x) if np.ndim(like) == 0 else x


# ---------------------------------------------------------------------------
# densities, CDFs and friends

def updf(model: InterarrivalModel, t):
    """Unit-mean density ``k(t)``; zero below the support."""
    x = _as_array(t)
    fam, s = model.family, model.shape
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if fam is Family.EXPONENTIAL:
            out = np.exp(-x)
        elif fam in (Family.GAMMA, Family.ERLANG):
            out = np.exp(s * np.log(s) + (s - 1) * np.log(x) - s * x - special.gammaln(s))
            if s == 1:
                out = np.where(x == 0, 1.0, out)
        elif fam is Family.WEIBULL:
            sig = model.weibull_scale
            z = x / sig
            out = (s / sig) * z ** (s - 1) * np.exp(-(z ** s))
        elif fam is Family.UNIFORM:
            out = np.where(x <= 2.0, 0.5, 0.0)
        elif fam is Family.PARETO:
            c = s - 1.0
            out = (s / c) * (1 + x / c) ** (-(s + 1))
        elif fam is Family.LOGNORMAL:
            out = np.exp(-((np.log(x) + s * s / 2) ** 2) / (2 * s * s)) / (s * x * math.sqrt(2 * math.pi))
            out = np.where(x == 0, 0.0, out)
        else:
            a = s
            out = np.where(x >= a, np.exp(-(x - a) / (1 - a)) / (1 - a), 0.0)
    out = np.where(x < 0, 0.0, out)
    return _scalar_or_array(out, t)


def cdf(model: InterarrivalModel, t):
    """Unit-mean CDF ``F(t)``."""
    x = np.maximum(_as_array(t), 0.0)
    fam, s = model.family, model.shape
    if fam is Family.EXPONENTIAL:
        out = -np.expm1(-x)
    elif fam in (Family.GAMMA, Family.ERLANG):
        out = special.gammainc(s, s * x)
    elif fam is Family.WEIBULL:
        out = -np.expm1(-((x / model.weibull_scale) ** s))
    elif fam is Family.UNIFORM:
        out = np.minimum(x / 2.0, 1.0)
    elif fam is Family.PARETO:
        out = -np.expm1(-s * np.log1p(x / (s - 1)))
    elif fam is Family.LOGNORMAL:
        with np.errstate(divide="ignore"):
            out = special.ndtr((np.log(x) + s * s / 2) / s)
    else:
        a = s
        out = np.where(x >= a, -np.expm1(-(x - a) / (1 - a)), 0.0)
    return _scalar_or_array(out, t)


def survival(model: InterarrivalModel, t):
    """Survival function ``1 - F(t)``, computed without cancellation."""
    x = np.maximum(_as_array(t), 0.0)
    fam, s = model.family, model.shape
    if fam is Family.EXPONENTIAL:
        out = np.exp(-x)
    elif fam in (Family.GAMMA, Family.ERLANG):
        out = special.gammaincc(s, s * x)
    elif fam is Family.WEIBULL:
        out = np.exp(-((x / model.weibull_scale) ** s))
    elif fam is Family.UNIFORM:
        out = np.maximum(1.0 - x / 2.0, 0.0)
    elif fam is Family.PARETO:
        out = (1 + x / (s - 1)) ** (-s)
    elif fam is Family.LOGNORMAL:
        with np.errstate(divide="ignore"):
            out = special.ndtr(-(np.log(x) + s * s / 2) / s)
    else:
        a = s
        out = np.where(x >= a, np.exp(-(x - a) / (1 - a)), 1.0)
    return _scalar_or_array(out, t)


def _bisect_quantile(model, p):
    # bracket [hi/2, hi] by doubling or halving, then bisect on the CDF; the
    # relative tolerance resolves small quantiles of laws steep at the origin
    hi = 1.0
    while cdf(model, hi) < p:
        hi *= 2.0
    while hi > 1e-300 and cdf(model, hi / 2.0) >= p:
        hi /= 2.0
    lo = hi / 2.0 if cdf(model, hi / 2.0) < p else 0.0
    return optimize.bisect(lambda x: cdf(model, x) - p, lo, hi, xtol=1e-10 * hi, rtol=1e-15, maxiter=500)


def quantile(model: InterarrivalModel, p):
    """Inverse CDF of the unit-mean law.

    Families without an explicit quantile (Gamma, Erlang) are inverted by
    bisection on the CDF to 1e-10.
    """
    q = _as_array(p)
    if np.any((q < 0) | (q > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    fam, s = model.family, model.shape
    with np.errstate(divide="ignore"):
        if fam is Family.EXPONENTIAL:
            out = -np.log1p(-q)
        elif fam is Family.WEIBULL:
            out = model.weibull_scale * (-np.log1p(-q)) ** (1.0 / s)
        elif fam is Family.UNIFORM:
            out = 2.0 * q
        elif fam is Family.PARETO:
            out = (s - 1) * np.expm1(-np.log1p(-q) / s)
        elif fam is Family.LOGNORMAL:
            out = np.exp(s * special.ndtri(q) - s * s / 2)
        elif fam is Family.SHIFTED_EXPONENTIAL:
            out = s - (1 - s) * np.log1p(-q)
        else:
            flat = [
                0.0 if v == 0 else math.inf if v == 1 else _bisect_quantile(model, v)
                for v in np.atleast_1d(q).ravel()
            ]
            out = np.reshape(flat, q.shape)
    return _scalar_or_array(out, p)


def stop_loss(model: InterarrivalModel, x):
    """Excess mean ``E[(X - x)+] = int_x^inf (1 - F(t)) dt`` of the unit-mean law.

    ``1 - stop_loss(x)`` is the integrated survival function
    ``int_0^x (1 - F(t)) dt``.
    """
    t = np.maximum(_as_array(x), 0.0)
    fam, s = model.family, model.shape
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam is Family.EXPONENTIAL:
            out = np.exp(-t)
        elif fam in (Family.GAMMA, Family.ERLANG):
            out = special.gammaincc(s + 1, s * t) - t * special.gammaincc(s, s * t)
        elif fam is Family.WEIBULL:
            z = (t / model.weibull_scale) ** s
            out = special.gammaincc(1 + 1 / s, z) - t * np.exp(-z)
        elif fam is Family.UNIFORM:
            out = np.where(t < 2, (2 - t) ** 2 / 4, 0.0)
        elif fam is Family.PARETO:
            out = (1 + t / (s - 1)) ** (1 - s)
        elif fam is Family.LOGNORMAL:
            lt = np.log(t)
            out = special.ndtr((s * s / 2 - lt) / s) - t * special.ndtr(-(lt + s * s / 2) / s)
            out = np.where(t == 0, 1.0, out)
        else:
            a = s
            out = np.where(t < a, 1 - t, (1 - a) * np.exp(-(t - a) / (1 - a)))
    return _scalar_or_array(np.maximum(out, 0.0), x)


def dispersion_index(model: InterarrivalModel) -> float:
    """Variance of the unit-mean law; ``math.inf`` when it diverges."""
    fam, s = model.family, model.shape
    if fam is Family.EXPONENTIAL:
        return 1.0
    if fam in (Family.GAMMA, Family.ERLANG):
        return 1.0 / s
    if fam is Family.WEIBULL:
        return math.exp(special.gammaln(1 + 2 / s) - 2 * special.gammaln(1 + 1 / s)) - 1.0
    if fam is Family.UNIFORM:
        return 1.0 / 3.0
    if fam is Family.PARETO:
        return math.inf if s <= 2 else s / (s - 2)
    if fam is Family.LOGNORMAL:
        return math.expm1(s * s)
    return (1.0 - s) ** 2


# ---------------------------------------------------------------------------
# sampling

def sample_interarrivals(model: InterarrivalModel, size, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` unit-mean interarrivals."""
    fam, s = model.family, model.shape
    if fam is Family.EXPONENTIAL:
        return rng.standard_exponential(size)
    if fam in (Family.GAMMA, Family.ERLANG):
        return rng.standard_gamma(s, size) / s
    if fam is Family.WEIBULL:
        return model.weibull_scale * rng.weibull(s, size)
    if fam is Family.UNIFORM:
        return rng.uniform(0.0, 2.0, size)
    if fam is Family.PARETO:
        return (s - 1) * rng.pareto(s, size)
    if fam is Family.LOGNORMAL:
        return rng.lognormal(-s * s / 2, s, size)
    return s + (1 - s) * rng.standard_exponential(size)


def sample_interarrival(model: InterarrivalModel, rng: np.random.Generator) -> float:
    """One unit-mean interarrival draw."""
    return float(sample_interarrivals(model, 1, rng)[0])


# ---------------------------------------------------------------------------
# renewal functions

def default_grid_step(t_max: float) -> float:
    return min(1e-3, t_max / 1e4)


def _n_steps(t_max, grid_step):
    if not (t_max > 0 and grid_step > 0):
        raise ValueError("t_max and grid_step must be positive")
    return int(math.ceil(t_max / grid_step - 1e-9))


def _richardson(fine, mid, coarse):
    """Extrapolate the solve on step ``h`` using the solves on ``2h`` and ``4h``.

    The convergence order is estimated from the three levels rather than
    assumed: it is two for smooth densities but drops towards ``1 + xi``
    when the density behaves like ``t**(xi - 1)`` near the origin.
    """
    d_mid = fine[::2] - mid
    d_coarse = mid[::2] - coarse
    num, den = np.abs(d_coarse).sum(), np.abs(d_mid[::2]).sum()
    if den <= 1e-13 * max(1.0, np.abs(fine).sum()) or num <= den:
        return fine
    order = min(math.log2(num / den), 4.0)
    shift = d_mid / (2.0 ** order - 1.0)
    x_mid = np.arange(len(mid)) * 2.0
    return fine + np.interp(np.arange(len(fine)), x_mid, shift)


def renewal_function_numeric(model: InterarrivalModel, t_max: float,
                             grid_step: float | None = None) -> RenewalFunctionTable:
    """Solve ``m(t) = F(t) + int_0^t m(t-s) dF(s)`` on a uniform grid.

    The convolution is written in Stieltjes form, ``int_0^t F(t-s) dm(s)``,
    and each increment of ``m`` is weighted by the trapezoidal average of
    ``F`` at the two ends of its cell. Only the CDF enters, so densities that
    blow up at the origin (Gamma or Weibull with shape below one) are
    handled without special casing. Such densities cost the trapezoid its
    second order, so the solve is repeated on steps ``2h`` and ``4h`` and
    combined by Richardson extrapolation.
    """
    if grid_step is None:
        grid_step = default_grid_step(t_max)
    n = _n_steps(t_max, grid_step)
    padded = -(-n // 4) * 4
    F = np.asarray(cdf(model, grid_step * np.arange(padded + 1)), dtype=float)
    m = solve_renewal_stieltjes(F)
    if padded >= 8:
        m = _richardson(m, solve_renewal_stieltjes(F[::2]), solve_renewal_stieltjes(F[::4]))
    # rounding can leave sub-ulp dips; renewal counts never decrease
    m = np.maximum.accumulate(np.maximum(m[: n + 1], 0.0))
    return RenewalFunctionTable(grid_step, m, TableSource.NUMERIC_RENEWAL_EQUATION)


def _erlang_terms(xi: int):
    h = np.arange(1, xi)
    theta = np.exp(2j * np.pi * h / xi)
    coef = theta / (xi * (1 - theta))
    rate = xi * (1 - theta)
    return coef, rate


def _erlang_m(xi, t):
    coef, rate = _erlang_terms(int(xi))
    z = t + (coef[:, None] * -np.expm1(-rate[:, None] * t[None, :])).sum(axis=0)
    if np.any(np.abs(z.imag) > 1e-10 * np.maximum(1.0, np.abs(z.real))):
        raise ArithmeticError("Erlang renewal function left an imaginary residue")
    return z.real


def _erlang_m_integral(xi, x):
    coef, rate = _erlang_terms(int(xi))
    z = x * x / 2 + np.sum(coef * (x + np.expm1(-rate * x) / rate))
    if abs(z.imag) > 1e-10 * max(1.0, abs(z.real)):
        raise ArithmeticError("Erlang renewal integral left an imaginary residue")
    return float(z.real)


# Beyond this time the alternating uniform sum loses digits to cancellation
# (its terms grow like e^{t/2}) while m(t) - (t - 1/3) has decayed below
# 1e-11, so the linear asymptote is used instead.
_UNIFORM_SWITCH = 22.0


def _uniform_m(t):
    # U(0, 2): m(t) = sum_{k <= t/2} (-1)^k (t/2 - k)^k e^{t/2 - k} / k! - 1
    s = np.minimum(t, _UNIFORM_SWITCH) / 2.0
    out = np.full_like(s, -1.0)
    for k in range(int(np.max(s, initial=0.0)) + 1):
        u = s - k
        live = u >= 0
        term = np.where(live, (-1) ** k * np.where(live, u, 0.0) ** k * np.exp(np.where(live, u, 0.0)) / math.factorial(k), 0.0)
        out = out + term
    return np.where(t > _UNIFORM_SWITCH, t - 1.0 / 3.0, out)


def _uniform_m_integral(x):
    # int_0^x m(t) dt = 2 int_0^{x/2} (m(2s)) ds, term by term
    tail = 0.0
    if x > _UNIFORM_SWITCH:
        tail = (x * x - _UNIFORM_SWITCH ** 2) / 2.0 - (x - _UNIFORM_SWITCH) / 3.0
        x = _UNIFORM_SWITCH
    s = x / 2.0
    total = -x
    for k in range(int(s) + 1):
        u = s - k
        # int_0^u v^k e^v / k! dv = (-1)^k [e^u sum_j (-u)^j / j! - 1]
        partial = sum((-u) ** j / math.factorial(j) for j in range(k + 1))
        total += 2.0 * (-1) ** k * ((-1) ** k * (math.exp(u) * partial - 1.0))
    return total + tail


def _weibull_coefficients(b, n_terms):
    # c_n = a_n / Gamma(1 + n b), from the a_n recursion divided through by
    # Gamma(1 + n b) so that nothing overflows
    c = np.empty(n_terms)
    for i in range(n_terms):
        n = i + 1
        j = np.arange(1, n)
        w = np.exp(special.gammaln(1 + j * b) + special.gammaln(1 + (n - j) * b)
                   - special.gammaln(1 + n * b) - special.gammaln(j + 1))
        c[i] = math.exp(-special.gammaln(n + 1)) - np.dot(w, c[n - j - 1])
    return c


def _weibull_series(b, t, antiderivative=False, max_terms=200, tol=1e-12):
    """Sum the alternating Weibull renewal series at the points ``t``.

    With ``antiderivative`` each term is integrated from 0 (power ``n b + 1``).
    Raises SeriesDivergenceError when terms grow for three consecutive ``n``
    before reaching ``tol``, when ``max_terms`` is exhausted, or when the
    largest term exceeds the sum by more than ten orders of magnitude (the
    cancellation would eat the answer).
    """
    t = np.atleast_1d(_as_array(t))
    x = special.gamma(1 + 1 / b) * t
    coeffs = _weibull_coefficients(b, max_terms)
    total = np.zeros_like(t)
    biggest = np.zeros_like(t)
    prev = None
    growth = 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        logx = np.log(x)
        for i in range(max_terms):
            n = i + 1
            c = coeffs[i]
            p = n * b
            if antiderivative:
                mag = np.where(t > 0, np.exp(p * logx) * t / (p + 1), 0.0)
            else:
                mag = np.where(t > 0, np.exp(p * logx), 0.0)
            term = (-1) ** (n - 1) * c * mag
            if not np.all(np.isfinite(term)):
                raise SeriesDivergenceError("Weibull renewal series overflowed")
            size = float(np.max(np.abs(term)))
            total += term
            biggest = np.maximum(biggest, np.abs(term))
            if size < tol:
                break
            if prev is not None and size > prev:
                growth += 1
                if growth >= 3:
                    raise SeriesDivergenceError(
                        f"Weibull renewal series terms grew for 3 consecutive n (b={b})")
            else:
                growth = 0
            prev = size
        else:
            raise SeriesDivergenceError(f"Weibull renewal series not converged after {max_terms} terms")
    if np.any(biggest > 1e10 * np.maximum(np.abs(total), 1.0)):
        raise SeriesDivergenceError("Weibull renewal series lost precision to cancellation")
    return total


def has_closed_form_renewal(model: InterarrivalModel) -> bool:
    return model.family in (Family.EXPONENTIAL, Family.ERLANG, Family.WEIBULL, Family.UNIFORM) or (
        model.family is Family.GAMMA and model.shape == int(model.shape))


def renewal_closed_form(model: InterarrivalModel, t):
    """Evaluate the closed-form renewal function at arbitrary points.

    Raises NotImplementedError for families without one and
    SeriesDivergenceError when the Weibull series is unusable at ``t``.
    """
    x = np.maximum(_as_array(t), 0.0)
    flat = np.atleast_1d(x).ravel()
    fam = model.family
    if fam is Family.EXPONENTIAL or (model.gamma_shape() == 1.0):
        out = flat.copy()
    elif model.gamma_shape() is not None and model.shape == int(model.shape):
        out = _erlang_m(model.shape, flat)
    elif fam is Family.WEIBULL:
        out = _weibull_series(model.shape, flat)
    elif fam is Family.UNIFORM:
        out = _uniform_m(flat)
    else:
        raise NotImplementedError(f"no closed-form renewal function for {fam.value}")
    out = out.reshape(np.shape(x))
    return _scalar_or_array(out, t)


def _closed_form_source(model):
    return TableSource.TRUNCATED_SERIES if model.family is Family.WEIBULL else TableSource.CLOSED_FORM


def renewal_function(model: InterarrivalModel, t_max: float,
                     grid_step: float | None = None) -> RenewalFunctionTable:
    """Renewal function on ``[0, t_max]``, closed form when the family has one.

    Exponential, Erlang (and integer-shape Gamma), Uniform and Weibull use
    closed forms; everything else goes to :func:`renewal_function_numeric`.
    A Weibull series that fails its truncation test raises
    SeriesDivergenceError so the caller can choose to fall back.
    """
    if grid_step is None:
        grid_step = default_grid_step(t_max)
    n = _n_steps(t_max, grid_step)
    if not has_closed_form_renewal(model):
        return renewal_function_numeric(model, t_max, grid_step)
    grid = grid_step * np.arange(n + 1)
    values = renewal_closed_form(model, grid)
    values[0] = 0.0
    return RenewalFunctionTable(grid_step, values, _closed_form_source(model))


def renewal_function_integral(model: InterarrivalModel, x: float,
                              grid_step: float | None = None) -> float:
    """``int_0^x m(t) dt`` for the unit-rate process.

    Analytic antiderivatives are used for Exponential, Erlang, Uniform and
    the Weibull series; a divergent Weibull series and every other family
    fall back to the trapezoidal integral of the numeric table.
    """
    if x <= 0:
        return 0.0
    if has_closed_form_renewal(model):
        g = model.gamma_shape()
        if g is not None:
            if g == 1.0:
                return x * x / 2
            return _erlang_m_integral(g, x)
        if model.family is Family.UNIFORM:
            return _uniform_m_integral(x)
        try:
            return float(_weibull_series(model.shape, x, antiderivative=True)[0])
        except SeriesDivergenceError:
            pass
    return renewal_function_numeric(model, x, grid_step).integral(x)


# ---------------------------------------------------------------------------
# characteristic function

def _cf_numeric(model, f):
    w = 2 * math.pi * f
    lo = float(quantile(model, 0.5))
    dens = lambda t: updf(model, t)  # noqa: E731
    re1 = integrate.quad(dens, 0.0, lo, weight="cos", wvar=w, limit=400)[0]
    im1 = integrate.quad(dens, 0.0, lo, weight="sin", wvar=w, limit=400)[0]
    tail = lambda t: updf(model, t + lo)  # noqa: E731
    c, s = math.cos(w * lo), math.sin(w * lo)
    rc = integrate.quad(tail, 0.0, np.inf, weight="cos", wvar=w, limlst=200)[0]
    rs = integrate.quad(tail, 0.0, np.inf, weight="sin", wvar=w, limlst=200)[0]
    # shift the tail back: e^{iw(t+lo)} = e^{iw lo} e^{iwt}
    re2 = c * rc - s * rs
    im2 = s * rc + c * rs
    return complex(re1 + re2, im1 + im2)


def characteristic_function(model: InterarrivalModel, f):
    """Fourier transform ``K(f) = int k(t) exp(i 2 pi f t) dt`` of the u-PDF.

    Closed forms for Exponential, Gamma/Erlang, Uniform and the shifted
    exponential; oscillatory quadrature for the rest. ``K(0) = 1`` exactly.
    """
    fr = _as_array(f)
    fam, s = model.family, model.shape
    w = 2j * np.pi * fr
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam is Family.EXPONENTIAL:
            out = 1.0 / (1.0 - w)
        elif fam in (Family.GAMMA, Family.ERLANG):
            out = np.exp(-s * np.log1p(-w / s))
        elif fam is Family.UNIFORM:
            tiny = np.abs(fr) < 1e-9
            z = 2 * np.where(tiny, 1.0, w)
            out = np.where(tiny, 1.0 + w, np.expm1(z) / z)
        elif fam is Family.SHIFTED_EXPONENTIAL:
            out = np.exp(w * s) / (1.0 - w * (1 - s))
        else:
            flat = [1.0 + 0j if v == 0 else _cf_numeric(model, v) for v in np.atleast_1d(fr).ravel()]
            out = np.reshape(np.array(flat, dtype=complex), fr.shape)
    out = np.where(fr == 0, 1.0 + 0j, out)
    return complex(out) if np.ndim(f) == 0 else out
