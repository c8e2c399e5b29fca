"""Student-t tail probabilities and the one-sided Welch test.

The regularized incomplete beta function is evaluated with the continued
fraction of Numerical Recipes (modified Lentz), switching to the symmetry
relation ``I_x(a, b) = 1 - I_{1-x}(b, a)`` past the mean of the beta
distribution so the fraction always converges quickly.
"""

import math

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


class DegenerateSamples(ValueError):
    """Both samples have zero variance and equal means; the t statistic is undefined."""


def _betacf(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
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


def betainc(a, b, x):
    """Regularized incomplete beta function ``I_x(a, b)`` for ``a, b > 0``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t, df):
    """``P(T <= t)`` for Student's t with (possibly fractional) ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    if t == 0.0:
        return 0.5
    tail = 0.5 * betainc(0.5 * df, 0.5, df / (df + t * t))
    return 1.0 - tail if t > 0 else tail


def welch_one_sided(sample_a, sample_b, pooled=False):
    """One-sided two-sample t-test for ``mean(a) < mean(b)``.

    Parameters
    ----------
    sample_a, sample_b : array_like
        At least two observations each.
    pooled : bool, optional
        Use Student's pooled-variance statistic instead of Welch's.

    Returns
    -------
    t : float
        Test statistic (negative when ``a`` has the lower mean).
    p : float
        ``P(T <= t)`` under the null of equal means.

    Raises
    ------
    DegenerateSamples
        Both variances are zero and the means coincide.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least two observations")
    ma, mb = float(np.mean(a)), float(np.mean(b))
    va, vb = float(np.var(a, ddof=1)), float(np.var(b, ddof=1))
    if pooled:
        df = na + nb - 2.0
        sp2 = ((na - 1) * va + (nb - 1) * vb) / df
        se2 = sp2 * (1.0 / na + 1.0 / nb)
    else:
        qa, qb = va / na, vb / nb
        se2 = qa + qb
        df = se2 * se2 / (qa * qa / (na - 1) + qb * qb / (nb - 1)) if se2 > 0 else math.nan
    if se2 == 0.0:
        if ma == mb:
            raise DegenerateSamples("both samples are constant with equal means")
        return (-math.inf, 0.0) if ma < mb else (math.inf, 1.0)
    t = (ma - mb) / math.sqrt(se2)
    return t, t_cdf(t, df)
