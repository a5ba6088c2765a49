"""Student t tail probabilities and quantiles.

The survival function comes from the regularized incomplete beta function,
evaluated with the modified Lentz continued fraction. Quantiles invert it by
a bracketed Newton iteration on the log tail probability, which stays well
conditioned down to tail probabilities around 1e-300.
"""

from __future__ import annotations

import math
from functools import lru_cache

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 20000


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _stirling_tail(x: float) -> float:
    """``lgamma(x)`` minus its leading Stirling terms, for ``x >= 10``."""
    x2 = x * x
    return (1.0 / 12 - (1.0 / 360 - (1.0 / 1260 - 1.0 / (1680 * x2)) / x2) / x2) / x


def _lgamma_diff(a: float, b: float) -> float:
    """``lgamma(a + b) - lgamma(a)`` without cancellation when ``a`` is large."""
    if a < 10.0:
        return math.lgamma(a + b) - math.lgamma(a)
    return (
        (a + b - 0.5) * math.log1p(b / a) + b * math.log(a) - b
        + _stirling_tail(a + b) - _stirling_tail(a)
    )


def _log_beta(a: float, b: float) -> float:
    """``-log B(a, b)``."""
    if a < b:
        a, b = b, a
    return _lgamma_diff(a, b) - math.lgamma(b)


def _log_front(a: float, b: float, x: float) -> float:
    return _log_beta(a, b) + a * math.log(x) + b * math.log1p(-x)


def log_betainc(a: float, b: float, x: float, xc: float | None = None) -> float:
    """``log I_x(a, b)``, accurate when the result is tiny.

    ``xc`` may carry ``1 - x`` computed without cancellation.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return -math.inf
    if x == 1.0:
        return 0.0
    if x < (a + 1.0) / (a + b + 2.0):
        return _log_front(a, b, x) + math.log(_betacf(a, b, x)) - math.log(a)
    xc = 1.0 - x if xc is None else xc
    front = _log_beta(a, b) + a * math.log1p(-xc) + b * math.log(xc)
    upper = math.exp(front) * _betacf(b, a, xc) / b
    return math.log1p(-upper)


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    return math.exp(log_betainc(a, b, x))


def _central(t: float, df: float) -> float:
    """``P(0 < T < t)`` for ``t >= 0``; keeps relative accuracy near zero."""
    y = t * t / (df + t * t)
    return 0.5 * betainc(0.5, df / 2.0, y)


def _log_sf(t: float, df: float) -> float:
    """``log P(T > t)`` for ``t >= 0``."""
    if t * t < df:
        c = _central(t, df)
        if c < 0.25:
            return math.log(0.5 - c)
    x = df / (df + t * t)
    return math.log(0.5) + log_betainc(df / 2.0, 0.5, x, t * t / (df + t * t))


def t_sf(t: float, df: float) -> float:
    """Upper tail probability ``P(T > t)``."""
    if df <= 0:
        raise ValueError("df must be positive")
    if t < 0:
        return 1.0 - t_sf(-t, df)
    return math.exp(_log_sf(t, df))


def t_cdf(t: float, df: float) -> float:
    return 1.0 - t_sf(t, df) if t >= 0 else t_sf(-t, df)


def _log_pdf(t: float, df: float) -> float:
    return (
        _lgamma_diff(df / 2, 0.5)
        - 0.5 * math.log(df * math.pi)
        - (df + 1) / 2 * math.log1p(t * t / df)
    )


def t_pdf(t: float, df: float) -> float:
    return math.exp(_log_pdf(t, df))


@lru_cache(maxsize=4096)
def t_isf(p: float, df: float) -> float:
    """Upper-tail quantile: the ``t`` with ``P(T > t) = p``."""
    if not 0.0 < p < 1.0:
        raise ValueError("tail probability must lie in (0, 1)")
    if df <= 0:
        raise ValueError("df must be positive")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -t_isf(1.0 - p, df)
    if p >= 0.25:
        # solve P(0 < T < t) = 0.5 - p, exact in floating point for p in [0.25, 0.5]
        q = 0.5 - p
        return _solve(lambda t: (_central(t, df) - q, math.exp(_log_pdf(t, df))), df)
    target = math.log(p)

    def g(t):
        log_sf = _log_sf(t, df)
        # d/dt log sf = -pdf / sf
        return target - log_sf, math.exp(_log_pdf(t, df) - log_sf)

    return _solve(g, df)


def _solve(fn, df: float) -> float:
    """Root of an increasing ``fn(t) -> (value, slope)`` on ``t > 0``, bracketed Newton."""
    lo, hi = 0.0, 1.0
    while fn(hi)[0] < 0:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise ArithmeticError("tail probability too small")
    t = 0.5 * (lo + hi)
    for _ in range(400):
        val, slope = fn(t)
        if val == 0:
            return t
        if val < 0:
            lo = t
        else:
            hi = t
        step = t - val / slope if slope > 0 else math.nan
        if not lo < step < hi:
            step = 0.5 * (lo + hi)
        if abs(step - t) <= 1e-15 * step or hi - lo <= 1e-15 * hi:
            return step
        t = step
    return t


def normal_coverage(k: float) -> float:
    """Two-sided standard normal probability within ``k`` sigma."""
    return math.erf(k / math.sqrt(2.0))
