"""Pearson correlation with exact significance, plus batch summaries.

The two-tailed p-value goes through the regularized incomplete beta
function evaluated by Lentz's continued fraction, i.e. the exact Student-t
tail rather than a normal approximation, so desk-scale n stays honest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MetricInputError


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    n: int
    t_stat: float
    p_value: float


@dataclass(frozen=True)
class Summary:
    mean: float
    stddev: float
    count: int
    min: float
    max: float


def pearson(x, y) -> float:
    """Pearson correlation coefficient, clamped to [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricInputError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise MetricInputError(f"need at least 2 points, got {x.size}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise MetricInputError("constant input vector has zero variance")
    xc = x - x.mean()
    yc = y - y.mean()
    r = float(np.dot(xc, yc) / math.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))
    return float(np.clip(r, -1.0, 1.0))


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Lentz's method for the continued fraction of the incomplete beta."""
    max_iterations = 500
    eps = 3e-16
    fpmin = 1e-300

    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iterations + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction failed to converge for a={a}, b={b}, x={x}"
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise MetricInputError(f"beta parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise MetricInputError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def t_statistic(r: float, n: int) -> float:
    """t = r * sqrt((n-2)/(1-r^2)); +/-inf at |r| = 1."""
    if abs(r) >= 1.0:
        return math.copysign(math.inf, r)
    return r * math.sqrt((n - 2) / (1.0 - r * r))


def pearson_p_value(r: float, n: int) -> float:
    """Two-tailed p for observing |r| under the null of no correlation.

    Uses the identity P(|T| > t) = I_x(nu/2, 1/2) with nu = n - 2 and
    x = nu / (nu + t^2).
    """
    if n < 3:
        raise MetricInputError(f"p-value needs n >= 3, got {n}")
    if abs(r) > 1.0:
        raise MetricInputError(f"|r| must be <= 1, got {r}")
    if abs(r) == 1.0:
        return 0.0
    t = t_statistic(r, n)
    nu = float(n - 2)
    x = nu / (nu + t * t)
    p = regularized_incomplete_beta(nu / 2.0, 0.5, x)
    return float(min(max(p, 0.0), 1.0))


def aggregate(values) -> Summary:
    """Two-pass mean and sample standard deviation with range.

    A single value reports stddev 0.0 by convention.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise MetricInputError("aggregate requires a non-empty 1-D input")
    mean = float(arr.mean())
    if arr.size > 1:
        centered = arr - mean
        stddev = math.sqrt(float(np.dot(centered, centered)) / (arr.size - 1))
    else:
        stddev = 0.0
    return Summary(
        mean=mean,
        stddev=stddev,
        count=int(arr.size),
        min=float(arr.min()),
        max=float(arr.max()),
    )
