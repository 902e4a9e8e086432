"""Gaussian CDF/PPF and truncated-normal helpers for equal-mass partitioning.

The PPF is a bracketed bisection on the erf-based CDF, so the two functions
are exact inverses of each other down to float resolution.
"""

import math

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gaussian_pdf(x: float, mu: float = 0.0, sigma: float = 1.0) -> float:
    """Density of N(mu, sigma^2) at x."""
    _check_sigma(sigma)
    z = (x - mu) / sigma
    return math.exp(-0.5 * z * z) * _INV_SQRT_2PI / sigma


def gaussian_cdf(x: float, mu: float = 0.0, sigma: float = 1.0) -> float:
    """P(X <= x) for X ~ N(mu, sigma^2), via erfc to keep tail precision."""
    _check_sigma(sigma)
    z = (x - mu) / sigma
    return 0.5 * math.erfc(-z / _SQRT2)


def gaussian_ppf(p: float, mu: float = 0.0, sigma: float = 1.0) -> float:
    """x with gaussian_cdf(x, mu, sigma) = p, by bracketed bisection.

    Bisection runs until the bracket collapses to adjacent floats, then the
    endpoint whose CDF is closer to p wins; |cdf(ppf(p)) - p| stays at the
    round-off level of the CDF itself.
    """
    _check_sigma(sigma)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    lo = mu - 12.0 * sigma
    hi = mu + 12.0 * sigma
    while gaussian_cdf(lo, mu, sigma) > p:
        lo -= 12.0 * sigma
    while gaussian_cdf(hi, mu, sigma) < p:
        hi += 12.0 * sigma
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if gaussian_cdf(mid, mu, sigma) < p:
            lo = mid
        else:
            hi = mid
    if abs(gaussian_cdf(lo, mu, sigma) - p) <= abs(gaussian_cdf(hi, mu, sigma) - p):
        return lo
    return hi


def truncated_mean(lo: float, hi: float, mu: float = 0.0, sigma: float = 1.0) -> float:
    """Conditional mean of N(mu, sigma^2) restricted to [lo, hi].

    Closed form mu + sigma * (pdf(a) - pdf(b)) / (cdf(b) - cdf(a)) on the
    standardized edges; degenerates to the interval midpoint when the mass
    underflows.
    """
    _check_sigma(sigma)
    if not lo < hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    mass = 0.5 * math.erfc(-b / _SQRT2) - 0.5 * math.erfc(-a / _SQRT2)
    if mass <= 0.0:
        return 0.5 * (lo + hi)
    num = (math.exp(-0.5 * a * a) - math.exp(-0.5 * b * b)) * _INV_SQRT_2PI
    return mu + sigma * num / mass


def _check_sigma(sigma: float) -> None:
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
