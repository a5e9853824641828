"""Parametric stationary DPP kernels ``C(x) = rho * R_theta(|x|)``.

A kernel family supplies the correlation function, its derivatives in
``theta``, the radial spectral density of ``C`` and the box of admissible
parameters. Only isotropic families are supported. New families are
added by subclassing :class:`KernelFamily` and calling
:func:`register_family`.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .errors import ValidationError

__all__ = [
    "KernelFamily",
    "GaussianFamily",
    "KernelModel",
    "ParamSpace",
    "ValidationReport",
    "register_family",
    "get_family",
    "correlation",
    "correlation_grad",
    "correlation_hess",
    "spectral_density",
    "validate",
    "require_valid",
    "param_space",
    "parse_model_spec",
    "ALPHA_FLOOR",
]

ALPHA_FLOOR = 1e-4
# slack on the spectral bound so the boundary case survives rounding
SPECTRAL_TOL = 1e-12


def ball_volume(t, dim):
    """Volume of the ``dim``-ball of radius ``t``."""
    t = np.asarray(t, dtype=float)
    return np.pi ** (dim / 2) / special.gamma(dim / 2 + 1) * t**dim


def sphere_area(dim):
    """Surface area of the unit sphere in ``R^dim``."""
    return 2 * np.pi ** (dim / 2) / special.gamma(dim / 2)


class KernelFamily:
    """Interface of an isotropic kernel family.

    Subclasses must define ``name``, ``param_names`` and the methods that
    raise ``NotImplementedError`` below. The optional closed forms
    (``spectral_max``, ``squared_integral``, ``squared_ball_integral``)
    may return ``None``, in which case callers fall back to numerics.
    """

    name = None
    param_names = ()

    @property
    def n_params(self):
        return len(self.param_names)

    def check_theta(self, theta):
        """Return an error message if ``theta`` is inadmissible, else None."""
        return None

    def correlation(self, r, theta):
        raise NotImplementedError

    def correlation_grad(self, r, theta):
        """Array of shape ``r.shape + (p,)``."""
        raise NotImplementedError

    def correlation_hess(self, r, theta):
        """Array of shape ``r.shape + (p, p)``."""
        raise NotImplementedError

    def spectral_density(self, k, rho, theta, dim):
        """Fourier transform of ``C`` at frequency norm ``k``."""
        raise NotImplementedError

    def spectral_max(self, rho, theta, dim):
        """Closed-form ``(max value, argmax norm)`` of the spectral density."""
        return None

    def param_bounds(self, rho, dim, floor):
        raise NotImplementedError

    def length_scale(self, theta):
        """Distance over which the correlation decays appreciably."""
        raise NotImplementedError

    def squared_integral(self, theta, dim):
        """``int R^2`` over the whole space, or None."""
        return None

    def squared_ball_integral(self, t, theta, dim):
        """``int_{B(0,t)} R^2``, or None."""
        return None

    def __repr__(self):
        return f"{type(self).__name__}()"


class GaussianFamily(KernelFamily):
    """``R(r) = exp(-(r/alpha)^2)``."""

    name = "gaussian"
    param_names = ("alpha",)

    def check_theta(self, theta):
        if not np.isfinite(theta[0]) or theta[0] <= 0:
            return f"alpha must be positive, got {theta[0]!r}"
        return None

    def correlation(self, r, theta):
        (alpha,) = theta
        return np.exp(-((np.asarray(r, dtype=float) / alpha) ** 2))

    def correlation_grad(self, r, theta):
        (alpha,) = theta
        r = np.asarray(r, dtype=float)
        R = np.exp(-((r / alpha) ** 2))
        return (2 * r**2 / alpha**3 * R)[..., None]

    def correlation_hess(self, r, theta):
        (alpha,) = theta
        r = np.asarray(r, dtype=float)
        R = np.exp(-((r / alpha) ** 2))
        h = R * (4 * r**4 / alpha**6 - 6 * r**2 / alpha**4)
        return h[..., None, None]

    def spectral_density(self, k, rho, theta, dim):
        (alpha,) = theta
        k = np.asarray(k, dtype=float)
        return rho * (np.sqrt(np.pi) * alpha) ** dim * np.exp(-((np.pi * alpha * k) ** 2))

    def spectral_max(self, rho, theta, dim):
        return float(self.spectral_density(0.0, rho, theta, dim)), 0.0

    def param_bounds(self, rho, dim, floor):
        upper = 1.0 / (np.sqrt(np.pi) * rho ** (1.0 / dim))
        return np.array([floor]), np.array([upper])

    def length_scale(self, theta):
        return float(theta[0])

    def squared_integral(self, theta, dim):
        (alpha,) = theta
        return (np.pi * alpha**2 / 2) ** (dim / 2)

    def squared_ball_integral(self, t, theta, dim):
        (alpha,) = theta
        t = np.asarray(t, dtype=float)
        return (np.pi * alpha**2 / 2) ** (dim / 2) * special.gammainc(dim / 2, 2 * t**2 / alpha**2)


_FAMILIES = {}


def register_family(family):
    """Make ``family`` available by name to :func:`get_family`."""
    _FAMILIES[family.name] = family
    return family


def get_family(family):
    if isinstance(family, KernelFamily):
        return family
    try:
        return _FAMILIES[str(family).lower()]
    except KeyError:
        raise ValueError(f"unknown kernel family {family!r}; known: {sorted(_FAMILIES)}")


register_family(GaussianFamily())


@dataclass(frozen=True)
class KernelModel:
    """Kernel ``C = rho * R_theta`` in dimension ``dim``.

    Construction only checks types and signs; existence of the DPP is
    checked by :func:`validate`.
    """

    family: KernelFamily
    dim: int
    rho: float
    theta: tuple

    def __post_init__(self):
        fam = get_family(self.family)
        object.__setattr__(self, "family", fam)
        theta = tuple(float(v) for v in np.atleast_1d(self.theta))
        if len(theta) != fam.n_params:
            raise ValueError(f"{fam.name} expects {fam.n_params} parameters, got {len(theta)}")
        object.__setattr__(self, "theta", theta)
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("dim must be a positive integer")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "rho", float(self.rho))

    @classmethod
    def gaussian(cls, rho, alpha, dim=2):
        return cls(get_family("gaussian"), dim, rho, (alpha,))

    @property
    def p(self):
        return len(self.theta)

    def with_theta(self, theta):
        return replace(self, theta=tuple(np.atleast_1d(theta)))

    def with_rho(self, rho):
        return replace(self, rho=float(rho))

    def C(self, r):
        """Kernel value at distance ``r``."""
        return self.rho * self.family.correlation(r, self.theta)

    def C_vec(self, x):
        """Kernel value at displacement vectors ``x`` of shape ``(..., d)``."""
        x = np.asarray(x, dtype=float)
        return self.C(np.sqrt(np.einsum("...i,...i->...", x, x)))

    def describe(self):
        params = " ".join(f"{n}={v!r}" for n, v in zip(self.family.param_names, self.theta))
        return f"family={self.family.name} dim={self.dim} rho={self.rho!r} {params}"


@dataclass(frozen=True)
class ParamSpace:
    """Box of admissible shape parameters."""

    lower: np.ndarray
    upper: np.ndarray
    names: tuple = field(default=())

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(hi < lo):
            raise ValueError(f"invalid parameter box [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def p(self):
        return len(self.lower)

    def contains(self, theta):
        t = np.atleast_1d(theta)
        return bool(np.all(t >= self.lower) and np.all(t <= self.upper))

    def clip(self, theta):
        return np.clip(np.atleast_1d(theta), self.lower, self.upper)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    condition: str = ""
    message: str = ""
    witness_k: object = None
    spectral_max: float = float("nan")

    def __bool__(self):
        return self.ok


def correlation(m, r):
    return m.family.correlation(r, m.theta)


def correlation_grad(m, r):
    return m.family.correlation_grad(r, m.theta)


def correlation_hess(m, r):
    return m.family.correlation_hess(r, m.theta)


def spectral_density(m, k):
    """Spectral density of ``C`` at frequency vectors ``k`` (shape ``(..., d)``)."""
    k = np.asarray(k, dtype=float)
    if k.ndim == 0:
        knorm = np.abs(k)
    else:
        if k.shape[-1] != m.dim:
            raise ValueError(f"frequency must have {m.dim} components")
        knorm = np.sqrt(np.einsum("...i,...i->...", k, k))
    return m.family.spectral_density(knorm, m.rho, m.theta, m.dim)


def _grid_spectral_extremes(m, points=10_000):
    """Max and min of the radial spectral density on a grid.

    The grid runs from 0 to the first power of two (in units of
    ``1/length_scale``) beyond which the density stays below 1e-10.
    """
    fam = m.family
    scale = 1.0 / fam.length_scale(m.theta)
    kmax = scale
    for _ in range(60):
        if fam.spectral_density(kmax, m.rho, m.theta, m.dim) < 1e-10:
            break
        kmax *= 2
    k = np.linspace(0.0, kmax, points)
    f = fam.spectral_density(k, m.rho, m.theta, m.dim)
    i, j = int(np.argmax(f)), int(np.argmin(f))
    return f[i], k[i], f[j], k[j]


def _witness(m, knorm):
    w = np.zeros(m.dim)
    w[0] = knorm
    return w


def validate(m):
    """Check that ``m`` defines a stationary DPP.

    The conditions are ``rho > 0``, admissible ``theta``, ``C(0) = rho``,
    square integrability and ``0 <= F(C) <= 1``. The spectral bound uses
    the family's closed-form maximum when it has one.
    """
    fam = m.family
    if not np.isfinite(m.rho) or m.rho <= 0:
        return ValidationReport(False, "rho > 0", f"intensity must be positive, got {m.rho!r}")
    msg = fam.check_theta(m.theta)
    if msg:
        return ValidationReport(False, "theta admissible", msg)
    r0 = float(fam.correlation(0.0, m.theta))
    if abs(r0 - 1.0) > 1e-12:
        return ValidationReport(False, "C(0) = rho", f"R(0) = {r0!r}, expected 1")
    sq = fam.squared_integral(m.theta, m.dim)
    if sq is not None and not np.isfinite(sq):
        return ValidationReport(False, "C in L2", "kernel is not square integrable")

    closed = fam.spectral_max(m.rho, m.theta, m.dim)
    if closed is not None:
        fmax, kmax = closed
        fmin, kmin = 0.0, np.inf
    else:
        fmax, kmax, fmin, kmin = _grid_spectral_extremes(m)
    if fmin < 0:
        return ValidationReport(
            False,
            "F(C) >= 0",
            f"spectral density F(C)(k) = {fmin:.6g} < 0",
            _witness(m, kmin),
            fmax,
        )
    if fmax > 1 + SPECTRAL_TOL:
        return ValidationReport(
            False,
            "F(C) <= 1",
            f"spectral density F(C)(k) = {fmax:.6g} > 1 at |k| = {kmax:g}",
            _witness(m, kmax),
            fmax,
        )
    return ValidationReport(True, spectral_max=fmax)


def require_valid(m):
    """Raise :class:`ValidationError` unless ``validate(m)`` passes."""
    rep = validate(m)
    if not rep.ok:
        raise ValidationError(f"invalid kernel model ({m.describe()}): {rep.message}", rep)
    return rep


def param_space(family, rho, dim, floor=ALPHA_FLOOR):
    """Admissible parameter box for intensity ``rho``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    fam = get_family(family)
    lo, hi = fam.param_bounds(float(rho), int(dim), floor)
    if np.any(hi <= lo):
        raise ValueError(f"empty parameter box for rho={rho!r}: upper bound {hi} <= floor {lo}")
    return ParamSpace(lo, hi, fam.param_names)


def parse_model_spec(text):
    """Parse ``"family=gaussian dim=2 rho=100 alpha=0.03"`` into a model."""
    fields = {}
    for tok in text.replace(",", " ").split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {tok!r}")
        fields[key.strip().lower()] = val.strip()
    fam = get_family(fields.pop("family", "gaussian"))
    try:
        dim = int(fields.pop("dim", 2))
        rho = float(fields.pop("rho"))
        theta = tuple(float(fields.pop(name)) for name in fam.param_names)
    except KeyError as exc:
        raise ValueError(f"model spec is missing {exc.args[0]!r}")
    if fields:
        raise ValueError(f"unknown model keys: {sorted(fields)}")
    return KernelModel(fam, dim, rho, theta)
