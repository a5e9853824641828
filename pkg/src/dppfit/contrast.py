"""Minimum contrast estimation on K or g.

The discrepancy between an empirical curve and the model curve is
``U(theta) = int w(t) (J_hat(t)^c - J(t, theta)^c)^2 dt`` over
``[r_min, r_max]``, integrated with composite Simpson on a fixed grid.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import NegativeStatistic, NonPositiveStatistic, OptimizerFailure, ZeroIntensity
from .estimators import BandwidthRule, EPANECHNIKOV, STOYAN, SmoothingKernel, intensity_hat, summary_hat
from .kernels import KernelModel, ParamSpace, get_family, param_space, ALPHA_FLOOR
from .moments import theory_grad, theory_value

__all__ = [
    "ContrastSpec",
    "FitOptions",
    "FitReport",
    "TheoryStatistic",
    "default_spec",
    "contrast_value",
    "contrast_objective",
    "fit",
    "fit_generic",
]

TIE_TOL = 1e-10


@dataclass(frozen=True)
class ContrastSpec:
    """Statistic, distance range, exponent, weight and grid of the contrast."""

    statistic: str
    r_min: float
    r_max: float
    c: float = 0.5
    weight: object = None
    grid_points: int = 513

    def __post_init__(self):
        if self.statistic not in ("K", "g"):
            raise ValueError(f"statistic must be 'K' or 'g', got {self.statistic!r}")
        if not (0 <= self.r_min < self.r_max) or not np.isfinite(self.r_max):
            raise ValueError(f"need 0 <= r_min < r_max, got [{self.r_min}, {self.r_max}]")
        if self.c == 0 or not np.isfinite(self.c):
            raise ValueError("exponent c must be finite and nonzero")
        if self.r_min == 0 and self.c < 2:
            raise ValueError("r_min = 0 requires c >= 2")
        if self.statistic == "g" and self.r_min <= 0:
            raise ValueError("the g contrast requires r_min > 0")
        if int(self.grid_points) != self.grid_points or self.grid_points < 3:
            raise ValueError("grid_points must be an integer >= 3")
        if self.weight is not None and not callable(self.weight):
            raise ValueError("weight must be callable or None")

    @property
    def grid(self):
        return np.linspace(self.r_min, self.r_max, int(self.grid_points))

    def weights(self, t=None):
        t = self.grid if t is None else np.asarray(t, dtype=float)
        if self.weight is None:
            return np.ones_like(t)
        w = np.broadcast_to(np.asarray(self.weight(t), dtype=float), t.shape)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weight function must be finite and nonnegative")
        return w

    def with_weight(self, weight):
        return ContrastSpec(self.statistic, self.r_min, self.r_max, self.c, weight, self.grid_points)


def default_spec(statistic, window, grid_points=513):
    """Defaults: ``r_min = 0.01``, ``r_max`` a quarter of the shortest side,
    ``c = 0.5`` and unit weight."""
    r_max = float(np.min(window.sides)) / 4.0
    return ContrastSpec(statistic, 0.01, r_max, 0.5, None, grid_points)


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings.

    ``scan_points`` is the size of the initial grid scan for one
    parameter; ``restarts`` the number of Nelder-Mead starts otherwise.
    ``k_correction`` is the edge correction of the empirical K (see
    :func:`~dppfit.estimators.K_hat`); ``kernel`` and ``bandwidth``
    configure the empirical g.
    """

    scan_points: int = 48
    xatol: float = 1e-10
    restarts: int = 3
    max_iter: int = 2000
    seed: int = 0
    bound_tol: float = 1e-6
    alpha_floor: float = ALPHA_FLOOR
    kernel: SmoothingKernel = EPANECHNIKOV
    bandwidth: BandwidthRule = STOYAN
    k_correction: str = "isotropic"


@dataclass(frozen=True, eq=False)
class FitReport:
    theta_hat: np.ndarray
    rho_hat: float
    objective: float
    iterations: int
    converged: bool
    bound_active: bool
    box: ParamSpace = None
    asymptotic: object = None
    statistic: str = ""
    param_names: tuple = field(default=())

    def as_row(self):
        """Flat dict for CSV / JSON output."""
        row = {"statistic": self.statistic, "rho_hat": self.rho_hat}
        names = self.param_names or tuple(f"theta{i}" for i in range(len(self.theta_hat)))
        for n, v in zip(names, self.theta_hat):
            row[n] = float(v)
        row.update(
            objective=self.objective,
            iterations=self.iterations,
            converged=self.converged,
            bound_active=self.bound_active,
        )
        if self.asymptotic is not None:
            cov = np.atleast_2d(self.asymptotic.covariance)
            for a in range(cov.shape[0]):
                for b in range(cov.shape[1]):
                    row[f"cov_{a}{b}"] = float(cov[a, b])
        return row


class TheoryStatistic:
    """Theoretical K or g of a kernel family at fixed intensity.

    Provides the ``value(t, theta)`` / ``grad(t, theta)`` interface that
    :func:`fit_generic` expects.
    """

    def __init__(self, family, dim, kind, rho=1.0):
        self.family = get_family(family)
        self.dim = int(dim)
        self.kind = kind
        self.rho = float(rho)

    def _model(self, theta):
        return KernelModel(self.family, self.dim, self.rho, tuple(np.atleast_1d(theta)))

    def value(self, t, theta):
        return theory_value(self._model(theta), self.kind, t)

    def grad(self, t, theta):
        return theory_grad(self._model(theta), self.kind, t)


def _power(values, c, what):
    v = np.asarray(values, dtype=float)
    if c < 0 and np.any(v <= 0):
        raise NonPositiveStatistic(f"{what} has non-positive values; negative power c={c}")
    if c != int(c) and np.any(v < 0):
        raise NegativeStatistic(f"{what} has negative values; fractional power c={c}")
    with np.errstate(divide="ignore"):
        return v**c


def _curve_on_grid(curve, spec):
    t = spec.grid
    if len(curve.grid) == len(t) and np.allclose(curve.grid, t, rtol=0, atol=1e-14):
        return np.asarray(curve.values)
    if curve.grid[0] > t[0] + 1e-12 or curve.grid[-1] < t[-1] - 1e-12:
        raise ValueError("curve grid does not span [r_min, r_max]")
    return np.interp(t, curve.grid, curve.values)


def contrast_objective(curve, J, spec):
    """Return ``U(theta)`` as a function for a fixed empirical curve.

    ``J`` has a ``value(t, theta)`` method. The empirical side is
    transformed once.
    """
    t = spec.grid
    w = spec.weights(t)
    target = _power(_curve_on_grid(curve, spec), spec.c, "empirical curve")

    def U(theta):
        model = _power(J.value(t, theta), spec.c, "model curve")
        return float(integrate.simpson(w * (target - model) ** 2, x=t))

    return U


def contrast_value(curve, m, spec):
    """Discrepancy between ``curve`` and the theoretical curve of ``m``."""
    J = TheoryStatistic(m.family, m.dim, spec.statistic, m.rho)
    return contrast_objective(curve, J, spec)(m.theta)


def _minimize_1d(U, lo, hi, opts):
    """Grid scan then bounded Brent (golden section with parabolic steps)."""
    xs = np.linspace(lo, hi, opts.scan_points)
    vals = np.array([U(np.array([x])) for x in xs])
    nfev = len(xs)
    if not np.all(np.isfinite(vals)):
        raise OptimizerFailure("objective is not finite on the scan grid")
    k = int(np.argmin(vals))
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, len(xs) - 1)]
    best_x, best_v = xs[k], vals[k]
    res = optimize.minimize_scalar(
        lambda x: U(np.array([x])),
        bounds=(a, b),
        method="bounded",
        options={"xatol": opts.xatol, "maxiter": opts.max_iter},
    )
    nfev += res.nfev
    converged = bool(res.success)
    if res.fun < best_v:
        best_x, best_v = float(res.x), float(res.fun)
    elif k in (0, len(xs) - 1):
        # minimum on the box edge: the endpoint itself is the answer
        converged = True
    return np.array([best_x]), best_v, nfev, converged


def _minimize_nd(U, lo, hi, opts):
    """Bounded Nelder-Mead from the box centre plus random restarts."""
    rng = np.random.default_rng(opts.seed)
    starts = [(lo + hi) / 2]
    starts += [lo + (hi - lo) * rng.uniform(size=len(lo)) for _ in range(opts.restarts - 1)]
    results = []
    nfev = 0
    for x0 in starts:
        res = optimize.minimize(
            U,
            x0,
            method="Nelder-Mead",
            bounds=list(zip(lo, hi)),
            options={"xatol": opts.xatol, "fatol": 1e-14, "maxiter": opts.max_iter},
        )
        nfev += res.nfev
        x = np.clip(res.x, lo, hi)
        results.append((float(U(x)), x, bool(res.success)))
    best = min(r[0] for r in results)
    tied = [r for r in results if r[0] <= best + TIE_TOL]
    tied.sort(key=lambda r: tuple(r[1]))
    v, x, ok = tied[0]
    return x, v, nfev, ok


def fit_generic(curve, J, box, spec, options=None, *, rho_hat=float("nan"), param_names=()):
    """Minimize the contrast of ``curve`` against ``J`` over a fixed box."""
    opts = options or FitOptions()
    if not isinstance(box, ParamSpace):
        lo, hi = box
        box = ParamSpace(lo, hi)
    lo, hi = box.lower, box.upper
    U = contrast_objective(curve, J, spec)
    if np.all(hi == lo):
        x, nfev, ok = lo.copy(), 1, True
    elif box.p == 1:
        x, _, nfev, ok = _minimize_1d(U, lo[0], hi[0], opts)
    else:
        x, _, nfev, ok = _minimize_nd(U, lo, hi, opts)
    x = np.clip(x, lo, hi)
    obj = U(x)
    if not np.isfinite(obj):
        raise OptimizerFailure("objective is not finite at the returned parameter")
    span = np.where(hi > lo, hi - lo, 1.0)
    near = (x - lo <= opts.bound_tol * span) | (hi - x <= opts.bound_tol * span)
    return FitReport(
        theta_hat=x,
        rho_hat=rho_hat,
        objective=obj,
        iterations=int(nfev),
        converged=ok,
        bound_active=bool(np.any(near)),
        box=box,
        statistic=spec.statistic,
        param_names=tuple(param_names),
    )


def fit(p, family, spec, options=None, *, curve=None, asymptotic=False, asymptotic_kwargs=None):
    """Minimum contrast fit of ``family`` to pattern ``p``.

    ``rho`` is estimated by ``n / |D|``; the shape parameters are found
    over the admissible box for that intensity. A precomputed empirical
    ``curve`` may be passed to skip the estimator. With
    ``asymptotic=True`` the report carries the sandwich covariance at
    the fitted model.
    """
    opts = options or FitOptions()
    fam = get_family(family)
    rho = intensity_hat(p)
    if rho <= 0:
        raise ZeroIntensity("cannot fit an empty pattern")
    if curve is None:
        curve = summary_hat(
            p, spec.statistic, spec.grid, opts.kernel, opts.bandwidth, opts.k_correction
        )
    box = param_space(fam, rho, p.window.dim, floor=opts.alpha_floor)
    J = TheoryStatistic(fam, p.window.dim, spec.statistic, rho)
    rep = fit_generic(curve, J, box, spec, opts, rho_hat=rho, param_names=fam.param_names)
    if asymptotic:
        from .asymptotics import asymptotic_covariance

        model = KernelModel(fam, p.window.dim, rho, tuple(rep.theta_hat))
        report = asymptotic_covariance(model, spec, **(asymptotic_kwargs or {}))
        rep = FitReport(**{**rep.__dict__, "asymptotic": report})
    return rep
