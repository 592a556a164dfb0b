"""Chi-squared and standard normal kernels used for critical values.

Scalar, dependency-free implementations: the chi-squared CDF is the
regularized lower incomplete gamma function (power series for small
arguments, continued fraction otherwise), and quantiles are obtained by
Newton refinement from a Wilson-Hilferty starting point with a bisection
safeguard.  The zero-degrees-of-freedom distribution is the point mass at
zero, so its quantile is identically zero.
"""

import math

from ._validation import check_prob

_EPS = 1e-16
_MAX_ITER = 300


def _lower_gamma_series(a, x):
    """P(a, x) by series; accurate for x < a + 1."""
    if x <= 0.0:
        return 0.0
    term = 1.0 / a
    total = term
    n = a
    for _ in range(_MAX_ITER):
        n += 1.0
        term *= x / n
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_gamma_contfrac(a, x):
    """Q(a, x) by modified Lentz continued fraction; accurate for x >= a + 1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _reg_lower_gamma(a, x):
    if x < 0.0:
        return 0.0
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _lower_gamma_series(a, x))
    return min(1.0, max(0.0, 1.0 - _upper_gamma_contfrac(a, x)))


def chi2_cdf(r, x):
    """CDF of the chi-squared distribution with ``r`` degrees of freedom."""
    r = int(r)
    if r < 0:
        raise ValueError(f"degrees of freedom must be >= 0, got {r}")
    x = float(x)
    if r == 0:
        # point mass at zero
        return 1.0 if x >= 0.0 else 0.0
    if x <= 0.0:
        return 0.0
    return _reg_lower_gamma(0.5 * r, 0.5 * x)


def _chi2_pdf(r, x):
    if x <= 0.0:
        return 0.0
    half = 0.5 * r
    return math.exp((half - 1.0) * math.log(x) - 0.5 * x - math.lgamma(half) - half * math.log(2.0))


def chi2_quantile(r, p):
    """Quantile of the chi-squared distribution with ``r`` degrees of freedom.

    ``r = 0`` returns 0 (point-mass convention).  Resolves ``chi2_cdf(r, q) = p``
    to roughly 1e-12 relative accuracy.
    """
    r = int(r)
    if r < 0:
        raise ValueError(f"degrees of freedom must be >= 0, got {r}")
    if r == 0:
        check_prob(p, "p")
        return 0.0
    p = check_prob(p, "p")

    # Wilson-Hilferty start
    z = normal_quantile(p)
    t = 1.0 - 2.0 / (9.0 * r) + z * math.sqrt(2.0 / (9.0 * r))
    q = r * t * t * t
    if q <= 0.0:
        q = 0.5 * r * 1e-8

    lo, hi = 0.0, None
    for _ in range(200):
        f = chi2_cdf(r, q) - p
        if f > 0.0:
            hi = q if hi is None or q < hi else hi
        else:
            lo = max(lo, q)
        deriv = _chi2_pdf(r, q)
        if deriv > 0.0:
            step = f / deriv
            q_new = q - step
        else:
            q_new = -1.0
        if not (q_new > lo and (hi is None or q_new < hi)):
            # Newton left the bracket; bisect instead
            q_new = 0.5 * (lo + hi) if hi is not None else 2.0 * max(q, 1.0)
        if abs(q_new - q) <= 1e-14 * (1.0 + q_new):
            q = q_new
            break
        q = q_new
    return q


_SQRT2 = math.sqrt(2.0)


def normal_cdf(t):
    """Standard normal CDF via the complementary error function."""
    t = float(t)
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    return 0.5 * math.erfc(-t / _SQRT2)


def _normal_pdf(t):
    return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)


# Acklam's rational approximation coefficients for the initial guess.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def normal_quantile(p):
    """Inverse standard normal CDF, refined to ~1e-15 by a Halley step."""
    p = check_prob(p, "p")
    p_low, p_high = 0.02425, 1.0 - 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= p_high:
        q = p - 0.5
        s = q * q
        x = ((((((_A[0] * s + _A[1]) * s + _A[2]) * s + _A[3]) * s + _A[4]) * s + _A[5]) * q
             / (((((_B[0] * s + _B[1]) * s + _B[2]) * s + _B[3]) * s + _B[4]) * s + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    # one Halley refinement
    e = normal_cdf(x) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    return x
