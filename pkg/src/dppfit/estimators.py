"""Nonparametric estimators of intensity, Ripley's K and the pair correlation.

``K_hat`` defaults to minus sampling (border correction): the second
point of each ordered pair must lie in the window eroded by ``t``.
Translation and isotropic corrections are available as well. ``g_hat``
is a kernel estimator with translation edge correction.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyErosion, ZeroIntensity
from .geometry import eroded_volume, shift_overlap_volume
from .kernels import sphere_area
from .moments import SummaryCurve

__all__ = [
    "SmoothingKernel",
    "BandwidthRule",
    "EPANECHNIKOV",
    "BOX",
    "STOYAN",
    "intensity_hat",
    "bandwidth",
    "pair_differences",
    "K_hat",
    "K_CORRECTIONS",
    "isotropic_fraction",
    "g_hat",
    "pair_count_statistic",
    "default_grid",
    "summary_hat",
]

GRID_POINTS = 513


@dataclass(frozen=True)
class SmoothingKernel:
    """Symmetric probability density supported on ``[-T, T]``."""

    shape: str = "epanechnikov"
    support: float = 1.0

    def __post_init__(self):
        if self.shape not in ("epanechnikov", "box"):
            raise ValueError(f"unknown smoothing kernel {self.shape!r}")
        if not self.support > 0:
            raise ValueError("support half-width must be positive")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        T = self.support
        inside = np.abs(u) <= T
        if self.shape == "box":
            return np.where(inside, 0.5 / T, 0.0)
        return np.where(inside, 0.75 / T * (1.0 - (u / T) ** 2), 0.0)


@dataclass(frozen=True)
class BandwidthRule:
    """Stoyan's rule ``constant / sqrt(rho_hat)`` or a fixed bandwidth."""

    mode: str = "stoyan"
    constant: float = 0.15
    fixed_value: float = None

    def __post_init__(self):
        if self.mode not in ("stoyan", "fixed"):
            raise ValueError(f"unknown bandwidth mode {self.mode!r}")
        if self.mode == "fixed" and not (self.fixed_value and self.fixed_value > 0):
            raise ValueError("fixed bandwidth needs a positive fixed_value")
        if self.mode == "stoyan" and not self.constant > 0:
            raise ValueError("Stoyan constant must be positive")

    @classmethod
    def fixed(cls, value):
        return cls("fixed", fixed_value=float(value))


EPANECHNIKOV = SmoothingKernel("epanechnikov")
BOX = SmoothingKernel("box")
STOYAN = BandwidthRule()


def intensity_hat(p):
    """Number of points per unit volume."""
    return p.n / p.window.volume


def _require_points(p):
    rho = intensity_hat(p)
    if rho <= 0:
        raise ZeroIntensity("pattern is empty; intensity estimate is zero")
    return rho


def bandwidth(bw, p):
    if bw.mode == "fixed":
        return float(bw.fixed_value)
    return bw.constant / np.sqrt(_require_points(p))


def default_grid(r_min, r_max, n=GRID_POINTS):
    return np.linspace(r_min, r_max, n)


def pair_differences(p, r):
    """Index pairs ``i < j`` with ``|x_i - x_j| <= r`` and their differences.

    Returns ``(i, j, diff, dist)`` with ``diff = x_j - x_i``, sorted by
    ``(i, j)`` so results do not depend on tree traversal order.
    """
    x = p.points
    if len(x) < 2 or r <= 0:
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty, np.zeros((0, p.window.dim)), np.zeros(0)
    pairs = cKDTree(x).query_pairs(float(r), output_type="ndarray")
    if len(pairs):
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    i = pairs[:, 0].astype(np.intp)
    j = pairs[:, 1].astype(np.intp)
    diff = x[j] - x[i]
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return i, j, diff, dist


def _check_grid(grid):
    t = np.asarray(grid, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("empty distance grid")
    if np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ValueError("grid must be nonnegative and strictly increasing")
    return t


def pair_count_statistic(p, grid):
    """Border-corrected pair counts ``rho_hat^2 K_hat(t)``.

    Counts ordered pairs ``(x, y)`` with ``|x - y| <= t`` whose second
    point is at least ``t`` from the boundary, divided by the eroded
    volume. Unbiased for ``rho^2 K(t)``.
    """
    t = _check_grid(grid)
    w = p.window
    ev = eroded_volume(w, t)
    if np.any(ev <= 0):
        raise EmptyErosion(float(t[np.argmax(ev <= 0)]))
    i, j, _, dist = pair_differences(p, t[-1])
    border = w.border_distance(p.points)
    # each unordered pair is two ordered pairs, one per choice of second point
    d2 = np.concatenate([dist, dist])
    b2 = np.concatenate([border[j], border[i]])
    keep = d2 <= b2
    d2, b2 = np.sort(d2[keep]), np.sort(b2[keep])
    # pair counted at t iff d <= t <= b
    count = np.searchsorted(d2, t, side="right") - np.searchsorted(b2, t, side="left")
    return count / ev


K_CORRECTIONS = ("border", "translate", "isotropic")


def _weighted_cumulative(dist, weight, t):
    """``sum_k weight_k 1{dist_k <= t}`` for each ``t``."""
    order = np.argsort(dist, kind="stable")
    cum = np.concatenate([[0.0], np.cumsum(weight[order])])
    return cum[np.searchsorted(dist[order], t, side="right")]


def isotropic_fraction(x, r, w):
    """Fraction of the sphere of radius ``r`` about ``x`` lying in ``w``.

    Implemented for ``d <= 2`` and ``r`` at most half the shortest side,
    where at most two adjacent edges cut the circle.
    """
    x = np.asarray(x, dtype=float).reshape(-1, w.dim)
    r = np.asarray(r, dtype=float)
    if w.dim == 1:
        inside = (x[:, 0] - r >= w.lo[0]).astype(float) + (x[:, 0] + r <= w.hi[0])
        return inside / 2.0
    if w.dim != 2:
        raise ValueError("isotropic correction is implemented for d <= 2 only")
    e = np.stack(
        [x[:, 0] - w.lo[0], x[:, 1] - w.lo[1], w.hi[0] - x[:, 0], w.hi[1] - x[:, 1]], axis=1
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        half = np.arccos(np.clip(e / r[:, None], -1.0, 1.0))
    half = np.where(r[:, None] > 0, half, 0.0)
    outside = 2.0 * half.sum(axis=1)
    # arcs cut off by two adjacent edges overlap when the corner is inside the circle
    for k in range(4):
        outside -= np.maximum(half[:, k] + half[:, (k + 1) % 4] - np.pi / 2, 0.0)
    return 1.0 - outside / (2 * np.pi)


def K_hat(p, grid, correction="border"):
    """Estimator of Ripley's K on ``grid``.

    ``correction`` selects the edge correction:

    * ``"border"``: minus sampling, ``sum 1{y in D-eroded} 1{|x-y| <= t}
      / (rho_hat^2 |D-eroded|)``,
    * ``"translate"``: pairs weighted by ``1 / |D intersect D shifted by x-y|``,
    * ``"isotropic"``: pairs weighted by the inverse fraction of the circle
      through the partner that lies in the window (d <= 2).
    """
    rho = _require_points(p)
    t = _check_grid(grid)
    if correction == "border":
        values = pair_count_statistic(p, t) / rho**2
    elif correction == "translate":
        _, _, diff, dist = pair_differences(p, t[-1])
        wt = 2.0 / shift_overlap_volume(p.window, diff) if len(dist) else np.zeros(0)
        values = _weighted_cumulative(dist, wt, t) / rho**2
    elif correction == "isotropic":
        if t[-1] > np.min(p.window.sides) / 2:
            raise ValueError("isotropic correction needs t <= half the shortest side")
        i, j, _, dist = pair_differences(p, t[-1])
        x = p.points
        wt = 1.0 / isotropic_fraction(x[i], dist, p.window) + 1.0 / isotropic_fraction(
            x[j], dist, p.window
        )
        values = _weighted_cumulative(dist, wt, t) / (rho**2 * p.window.volume)
    else:
        raise ValueError(f"unknown K correction {correction!r}; choose from {K_CORRECTIONS}")
    return SummaryCurve("K", t, values, estimator=correction)


def g_hat(p, grid, kernel=EPANECHNIKOV, bw=STOYAN):
    """Translation-corrected kernel estimator of the pair correlation.

    Pairs whose translation overlap volume is zero are skipped and
    counted in ``meta["n_zero_overlap"]``.
    """
    rho = _require_points(p)
    t = _check_grid(grid)
    if t[0] <= 0:
        raise ValueError("g_hat needs a grid of strictly positive distances")
    b = bandwidth(bw, p)
    reach = kernel.support * b
    i, j, diff, dist = pair_differences(p, t[-1] + reach)
    overlap = shift_overlap_volume(p.window, diff) if len(dist) else np.zeros(0)
    zero = overlap <= 0
    n_zero = int(2 * np.count_nonzero(zero))
    dist, overlap = dist[~zero], overlap[~zero]
    order = np.argsort(dist, kind="stable")
    dist, inv_ov = dist[order], 1.0 / overlap[order]
    lo = np.searchsorted(dist, t - reach, side="left")
    hi = np.searchsorted(dist, t + reach, side="right")
    total = np.empty(len(t))
    for k in range(len(t)):
        s = slice(lo[k], hi[k])
        total[k] = np.dot(kernel((t[k] - dist[s]) / b), inv_ov[s])
    d = p.window.dim
    # factor 2: each unordered pair appears twice in the ordered sum
    values = 2.0 * total / (b * sphere_area(d) * t ** (d - 1) * rho**2)
    return SummaryCurve(
        "g",
        t,
        values,
        estimator=f"translate-{kernel.shape}",
        bandwidth=b,
        meta={"n_zero_overlap": n_zero},
    )


def summary_hat(p, kind, grid, kernel=EPANECHNIKOV, bw=STOYAN, correction="border"):
    """Dispatch to :func:`K_hat` or :func:`g_hat`."""
    if kind == "K":
        return K_hat(p, grid, correction)
    if kind == "g":
        return g_hat(p, grid, kernel, bw)
    raise ValueError(f"unknown statistic {kind!r}")
