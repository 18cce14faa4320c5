"""Special functions and densities used throughout the package.

Everything here is written against numpy/math directly. Densities that feed
likelihoods have log-space versions so products over many trials stay finite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# relative |a-b| below which the hypoexponential density uses the equal-mean form
HYPOEXP_SWITCH_RTOL = 1e-8


class ParameterDomainError(ValueError):
    """A distribution parameter or argument lies outside its domain."""


@dataclass(frozen=True)
class ErlangParams:
    shape: int
    rate: float

    def __post_init__(self):
        if int(self.shape) != self.shape or self.shape < 1:
            raise ParameterDomainError(f"Erlang shape must be a positive integer, got {self.shape}")
        if not self.rate > 0:
            raise ParameterDomainError(f"Erlang rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class HypoExpParams:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ParameterDomainError(f"hypoexponential means must be positive, got a={self.a}, b={self.b}")

    @property
    def mean(self) -> float:
        return self.a + self.b


@dataclass(frozen=True)
class InverseGammaParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ParameterDomainError(
                f"inverse-gamma shape and scale must be positive, got {self.shape}, {self.scale}"
            )

    @property
    def mean(self) -> float:
        return self.scale / (self.shape - 1) if self.shape > 1 else math.inf


def _check_nonneg(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise ParameterDomainError("time argument must be nonnegative")
    return t


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


# ---------------------------------------------------------------- Erlang

def erlang_logpdf(t, p: ErlangParams):
    t = _check_nonneg(t)
    k, lam = p.shape, p.rate
    with np.errstate(divide="ignore"):
        logt = np.log(t)
    # t**0 == 1 at t == 0
    term = np.where(t == 0, 0.0, (k - 1) * logt) if k > 1 else np.zeros_like(t)
    out = k * math.log(lam) + term - lam * t - math.lgamma(k)
    if k > 1:
        out = np.where(t == 0, -np.inf, out)
    return _unwrap(out)


def erlang_pdf(t, p: ErlangParams):
    """Density of the time of the ``shape``-th arrival of a rate ``rate`` Poisson process."""
    return _unwrap(np.exp(erlang_logpdf(t, p)))


def erlang_sf(t, p: ErlangParams):
    """Survival function ``P(X > t) = sum_{n<K} (lam t)^n e^{-lam t} / n!``."""
    t = _check_nonneg(t)
    x = p.rate * t
    # accumulate the Poisson terms in log space so large lam*t does not overflow
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    total = np.zeros_like(x)
    for n in range(p.shape):
        if n == 0:
            total = total + np.exp(-x)
        else:
            total = total + np.exp(np.where(x == 0, -np.inf, n * logx) - x - math.lgamma(n + 1))
    return _unwrap(np.minimum(total, 1.0))


def erlang_cdf(t, p: ErlangParams):
    """Erlang CDF, the Poisson-tail form ``1 - sum_{n<K} (lam t)^n e^{-lam t}/n!``."""
    return _unwrap(1.0 - np.asarray(erlang_sf(t, p)))


def erlang_sample(p: ErlangParams, rng: np.random.Generator, size=None):
    """Sum of ``shape`` exponential inter-arrival times."""
    if size is None:
        return float(rng.exponential(1.0 / p.rate, size=p.shape).sum())
    shape = (size,) if np.ndim(size) == 0 else tuple(size)
    return rng.exponential(1.0 / p.rate, size=shape + (p.shape,)).sum(axis=-1)


# ------------------------------------------------------- hypoexponential

def hypoexp_logpdf(t, a, b):
    """Log density of the sum of two independent exponentials with means ``a`` and ``b``.

    Vectorized over all arguments. Uses the equal-mean branch ``t e^{-t/a} / a^2``
    whenever ``|a - b| / max(a, b) < HYPOEXP_SWITCH_RTOL``; otherwise the difference of
    exponentials is rewritten with ``expm1`` around the slower stage to avoid
    cancellation. Returns ``-inf`` at ``t == 0``.
    """
    t, a, b = np.broadcast_arrays(np.asarray(t, float), np.asarray(a, float), np.asarray(b, float))
    if np.any(a <= 0) or np.any(b <= 0):
        raise ParameterDomainError("hypoexponential means must be positive")
    if np.any(t < 0):
        raise ParameterDomainError("time argument must be nonnegative")
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    equal = (hi - lo) / hi < HYPOEXP_SWITCH_RTOL
    with np.errstate(divide="ignore", invalid="ignore"):
        logt = np.log(t)
        eq = logt - t / a - 2.0 * np.log(a)
        # (e^{-t/hi} - e^{-t/lo}) / (hi - lo) = e^{-t/hi} * (-expm1(-x)) / (hi - lo),
        # x = t (1/lo - 1/hi) = t (hi - lo) / (hi lo)
        x = t * (hi - lo) / (hi * lo)
        neq = -t / hi + np.log(-np.expm1(-x)) - np.log(hi - lo)
        out = np.where(equal, eq, neq)
    out = np.where(t == 0, -np.inf, out)
    return _unwrap(out)


def hypoexp_pdf(t, p: HypoExpParams):
    t = _check_nonneg(t)
    return _unwrap(np.exp(hypoexp_logpdf(t, p.a, p.b)))


def hypoexp_cdf(t, p: HypoExpParams):
    t = _check_nonneg(t)
    a, b = p.a, p.b
    if abs(a - b) / max(a, b) < HYPOEXP_SWITCH_RTOL:
        return _unwrap(1.0 - np.exp(-t / a) * (1.0 + t / a))
    return _unwrap(1.0 - (b * np.exp(-t / b) - a * np.exp(-t / a)) / (b - a))


def hypoexp_sample(p: HypoExpParams, rng: np.random.Generator, size=None):
    """Exponential(mean a) + Exponential(mean b)."""
    return rng.exponential(p.a, size=size) + rng.exponential(p.b, size=size)


# ------------------------------------------------ regularized incomplete beta

def _betacf(q: float, a: float, b: float, tol: float = 1e-15, max_iter: int = 10_000) -> float:
    # modified Lentz evaluation of the continued fraction for I_q(a, b)
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * q / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * q / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * q / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge for a={a}, b={b}, q={q}")


def _binomial_tail(q: float, a: int, b: int) -> float:
    # I_q(a, b) = P(Binomial(a + b - 1, q) >= a)
    n = a + b - 1
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    lq, l1q = math.log(q), math.log1p(-q)
    terms = [
        math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1) + k * lq + (n - k) * l1q
        for k in range(a, n + 1)
    ]
    m = max(terms)
    return min(1.0, math.exp(m) * math.fsum(math.exp(x - m) for x in terms))


def reg_inc_beta(q: float, a: float, b: float) -> float:
    """Regularized incomplete beta function ``I_q(a, b)``.

    Integer shapes go through the exact binomial tail sum. Other shapes use the
    continued fraction on whichever side of ``(a + 1) / (a + b + 2)`` converges fast,
    with the reflection ``I_q(a, b) = 1 - I_{1-q}(b, a)`` for the other side.
    """
    if not (0.0 <= q <= 1.0):
        raise ParameterDomainError(f"q must lie in [0, 1], got {q}")
    if not (a > 0 and b > 0):
        raise ParameterDomainError(f"shape parameters must be positive, got a={a}, b={b}")
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    if float(a).is_integer() and float(b).is_integer() and a + b < 2000:
        return _binomial_tail(q, int(a), int(b))
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(q) + b * math.log1p(-q)
    )
    if q < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(q, a, b) / a
    return 1.0 - math.exp(log_front) * _betacf(1.0 - q, b, a) / b


# ------------------------------------------------------ gamma family, normal

def inverse_gamma_logpdf(t, p: InverseGammaParams):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ParameterDomainError("inverse-gamma argument must be positive")
    a, b = p.shape, p.scale
    return _unwrap(a * math.log(b) - math.lgamma(a) - (a + 1.0) * np.log(t) - b / t)


def inverse_gamma_pdf(t, p: InverseGammaParams):
    return _unwrap(np.exp(inverse_gamma_logpdf(t, p)))


def inverse_gamma_sample(p: InverseGammaParams, rng: np.random.Generator, size=None):
    return 1.0 / rng.gamma(p.shape, 1.0 / p.scale, size=size)


def normal_logpdf(t, mean, variance):
    variance = np.asarray(variance, dtype=float)
    if np.any(variance <= 0):
        raise ParameterDomainError("normal variance must be positive")
    t = np.asarray(t, dtype=float)
    return _unwrap(-0.5 * np.log(2.0 * np.pi * variance) - (t - mean) ** 2 / (2.0 * variance))


def normal_pdf(t, mean, variance):
    return _unwrap(np.exp(normal_logpdf(t, mean, variance)))
