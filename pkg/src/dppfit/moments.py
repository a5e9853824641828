"""Theoretical second-order summaries of a DPP and their derivatives.

For a DPP with kernel ``C = rho * R`` the pair correlation is
``g = 1 - R^2`` and ``K(t)`` integrates ``g`` over the ball of radius
``t``. Higher reduced factorial cumulant densities are signed cyclic
products of ``C``.
"""

from dataclasses import dataclass, field

import numpy as np

from .kernels import ball_volume, sphere_area

__all__ = [
    "SummaryCurve",
    "CumulantDensities",
    "g_theory",
    "g_grad",
    "g_hess",
    "K_theory",
    "K_grad",
    "K_hess",
    "theory_value",
    "theory_grad",
    "theory_curve",
    "cumulants",
    "intensity_clt_variance",
    "squared_integral",
    "radial_cumulative",
]

KINDS = ("K", "g")

# Gauss-Legendre rule shared by the radial integrators
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_MAX_PANELS = 20_000


@dataclass(frozen=True, eq=False)
class SummaryCurve:
    """A K or g curve tabulated on an increasing grid of distances."""

    kind: str
    grid: np.ndarray
    values: np.ndarray
    estimator: str = "theory"
    bandwidth: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        t = np.array(self.grid, dtype=float).ravel()
        v = np.array(self.values, dtype=float).ravel()
        if t.shape != v.shape:
            raise ValueError("grid and values must have the same length")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("grid must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "grid", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.grid)


def _check_kind(kind):
    if kind not in KINDS:
        raise ValueError(f"statistic must be one of {KINDS}, got {kind!r}")


def radial_cumulative(func, t, dim, scale):
    """``int_{B(0,t)} func(|x|) dx`` for each entry of ``t``.

    ``func`` maps an array of radii of shape ``s`` to an array of shape
    ``s + q``. Composite 16-point Gauss-Legendre on panels of width
    ``scale / 4`` (coarser if that would need too many panels).
    Returns an array of shape ``t.shape + q``.
    """
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    tmax = float(flat.max()) if flat.size else 0.0
    sigma = sphere_area(dim)

    def integrand(r):
        v = np.asarray(func(r), dtype=float)
        rad = sigma * r ** (dim - 1)
        return v * rad.reshape(rad.shape + (1,) * (v.ndim - r.ndim))

    h = scale / 4.0
    if tmax / h > _MAX_PANELS:
        h = tmax / _MAX_PANELS
    n_full = int(np.floor(tmax / h)) if tmax > 0 else 0
    if n_full:
        lo = np.arange(n_full) * h
        r = lo[:, None] + h * (_GL_X + 1) / 2
        vals = integrand(r)
        w = _GL_W.reshape((1, -1) + (1,) * (vals.ndim - 2))
        panel = (vals * w).sum(axis=1) * (h / 2)
        cum = np.concatenate([np.zeros((1,) + panel.shape[1:]), np.cumsum(panel, axis=0)])
    else:
        probe = np.asarray(func(np.zeros(1)))
        cum = np.zeros((1,) + probe.shape[1:])
    j = np.minimum(np.floor(flat / h).astype(int), n_full)
    start = j * h
    width = flat - start
    r = start[:, None] + width[:, None] * (_GL_X + 1) / 2
    vals = integrand(r)
    w = _GL_W.reshape((1, -1) + (1,) * (vals.ndim - 2))
    part = (vals * w).sum(axis=1) * (width / 2).reshape((-1,) + (1,) * (vals.ndim - 2))
    out = cum[j] + part
    return out.reshape(t.shape + out.shape[1:])


def g_theory(m, t):
    """Pair correlation ``1 - R(t)^2``."""
    return 1.0 - m.family.correlation(t, m.theta) ** 2


def g_grad(m, t):
    """Gradient of ``g`` in ``theta``; shape ``t.shape + (p,)``."""
    fam = m.family
    R = np.asarray(fam.correlation(t, m.theta))
    return -2.0 * R[..., None] * fam.correlation_grad(t, m.theta)


def g_hess(m, t):
    fam = m.family
    R = np.asarray(fam.correlation(t, m.theta))
    R1 = fam.correlation_grad(t, m.theta)
    R2 = fam.correlation_hess(t, m.theta)
    return -2.0 * (R1[..., :, None] * R1[..., None, :] + R[..., None, None] * R2)


def K_theory(m, t):
    """Ripley's K: volume of the t-ball minus ``int_{B(0,t)} R^2``."""
    t = np.asarray(t, dtype=float)
    fam = m.family
    sq = fam.squared_ball_integral(t, m.theta, m.dim)
    if sq is None:
        sq = radial_cumulative(
            lambda r: fam.correlation(r, m.theta) ** 2, t, m.dim, fam.length_scale(m.theta)
        )
    ball = ball_volume(t, m.dim)
    # g >= 0 bounds K by [0, |B(0,t)|]; clipping removes cancellation noise near t = 0
    return np.clip(ball - sq, 0.0, ball)


def K_grad(m, t):
    """``-2 int_{B(0,t)} R R^(1)`` by polar Gauss-Legendre quadrature."""
    fam = m.family

    def f(r):
        return -2.0 * fam.correlation(r, m.theta)[..., None] * fam.correlation_grad(r, m.theta)

    return radial_cumulative(f, t, m.dim, fam.length_scale(m.theta))


def K_hess(m, t):
    return radial_cumulative(lambda r: g_hess(m, r), t, m.dim, m.family.length_scale(m.theta))


def theory_value(m, kind, t):
    _check_kind(kind)
    return K_theory(m, t) if kind == "K" else g_theory(m, t)


def theory_grad(m, kind, t):
    _check_kind(kind)
    return K_grad(m, t) if kind == "K" else g_grad(m, t)


def theory_curve(m, kind, grid):
    """Theoretical K or g of ``m`` as a :class:`SummaryCurve`."""
    grid = np.asarray(grid, dtype=float)
    return SummaryCurve(kind, grid, theory_value(m, kind, grid), estimator="theory")


def squared_integral(m):
    """``int C^2`` over the whole space."""
    fam = m.family
    sq = fam.squared_integral(m.theta, m.dim)
    if sq is None:
        scale = fam.length_scale(m.theta)
        r_far = scale
        while fam.correlation(r_far, m.theta) ** 2 > 1e-18 and r_far < 1e6 * scale:
            r_far *= 2
        sq = float(
            radial_cumulative(lambda r: fam.correlation(r, m.theta) ** 2, r_far, m.dim, scale)
        )
    return m.rho**2 * sq


def intensity_clt_variance(m):
    """Limit of ``|D| Var(rho_hat)``: ``rho - int C^2``."""
    return m.rho - squared_integral(m)


class CumulantDensities:
    """Reduced factorial cumulant densities of orders 2, 3 and 4.

    Arguments are displacement vectors of shape ``(..., d)`` relative to
    a point at the origin.
    """

    def __init__(self, model):
        self.model = model

    def _C(self, x):
        return self.model.C_vec(x)

    def c2(self, u):
        return -self._C(u) ** 2

    def c3(self, u, v):
        u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
        return 2.0 * self._C(u) * self._C(v) * self._C(v - u)

    def c4(self, u, v, w):
        u, v, w = (np.asarray(a, dtype=float) for a in (u, v, w))
        C = self._C
        cu, cv, cw = C(u), C(v), C(w)
        cuv, cuw, cvw = C(u - v), C(u - w), C(v - w)
        return -2.0 * (cu * cv * cuw * cvw + cu * cw * cuv * cvw + cv * cw * cuv * cuw)


def cumulants(m):
    return CumulantDensities(m)
