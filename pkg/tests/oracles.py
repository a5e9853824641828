"""Independent oracles shared by the unit and acceptance tests."""

import math

import mpmath
import numpy as np

from dppfit.kernels import KernelModel, correlation, correlation_grad, correlation_hess
from dppfit.moments import K_grad, K_theory, cumulants, g_grad, g_theory

BOUNDARY = 1.0 / (10.0 * np.sqrt(np.pi))


def _partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def partition_cumulant(points, rho, alpha):
    """Joint cumulant density from det[C] intensities via set partitions."""

    def C(x, y):
        d2 = sum((a - b) ** 2 for a, b in zip(x, y))
        return rho * mpmath.exp(-d2 / alpha**2)

    def intensity(block):
        return mpmath.det(mpmath.matrix([[C(points[i], points[j]) for j in block] for i in block]))

    total = mpmath.mpf(0)
    for part in _partitions(list(range(len(points)))):
        k = len(part)
        term = (-1) ** (k - 1) * math.factorial(k - 1)
        for block in part:
            term *= intensity(block)
        total += term
    return total


def cumulant_errors(rng, n=20):
    """Relative errors of c2, c3, c4 against the partition oracle at ``n`` tuples."""
    mpmath.mp.dps = 40
    rho, alpha = mpmath.mpf(100), mpmath.mpf("0.03")
    cum = cumulants(KernelModel.gaussian(100, 0.03))
    errs = []
    for _ in range(n):
        x = rng.normal(scale=0.02, size=(3, 2))
        pts = [[mpmath.mpf(0), mpmath.mpf(0)]] + [[mpmath.mpf(float(v)) for v in row] for row in x]
        got = (cum.c2(x[0]), cum.c3(x[0], x[1]), cum.c4(x[0], x[1], x[2]))
        for order, value in zip((2, 3, 4), got):
            oracle = float(partition_cumulant(pts[:order], rho, alpha))
            errs.append(abs(value - oracle) / abs(oracle))
    return np.array(errs)


def _fd(f, x, h):
    """Fourth-order central difference."""
    return (8 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12 * h)


def _rel(a, b):
    return 0.0 if a == b else abs(a - b) / max(abs(a), abs(b))


def gradient_errors(rng, n=50):
    """Largest relative errors of analytic derivatives against finite differences.

    Each derivative is checked at ``n`` random ``(alpha, distance)`` points
    with ``alpha`` spanning the valid range and distances where the
    derivative is not negligible.
    """
    out = {"K_grad": 0.0, "g_grad": 0.0, "correlation_grad": 0.0, "correlation_hess": 0.0}
    for _ in range(n):
        alpha = rng.uniform(0.005, BOUNDARY)
        m = KernelModel.gaussian(100, alpha)
        h = 1e-4 * alpha

        def at(a):
            return m.with_theta((a,))

        t = rng.uniform(0.1 * alpha, 2.5 * alpha)
        out["K_grad"] = max(out["K_grad"], _rel(K_grad(m, t)[0], _fd(lambda a: K_theory(at(a), t), alpha, h)))
        out["g_grad"] = max(out["g_grad"], _rel(g_grad(m, t)[0], _fd(lambda a: g_theory(at(a), t), alpha, h)))
        r = rng.uniform(0.1 * alpha, 2.5 * alpha)
        fd = _fd(lambda a: correlation(at(a), r), alpha, h)
        out["correlation_grad"] = max(out["correlation_grad"], _rel(correlation_grad(m, r)[0], fd))
        fd2 = _fd(lambda a: correlation_grad(at(a), r)[0], alpha, h)
        out["correlation_hess"] = max(out["correlation_hess"], _rel(correlation_hess(m, r)[0, 0], fd2))
    return out
