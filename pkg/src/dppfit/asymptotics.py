"""Asymptotic covariance of minimum contrast estimators.

The estimator is asymptotically normal with covariance
``B^{-1} Sigma B^{-T} / |D|``. ``B`` is a one-dimensional integral over
``[r_min, r_max]``. ``Sigma`` is the limit variance of
``sqrt(|D|) int (J_hat - J) j dt`` with ``j = w J^{2c-2} J^(1)``.

Both the K and the g contrast reduce ``Sigma`` to integrals of a radial
pair weight ``psi`` against products of the kernel:

* K: ``psi(r) = int_{max(r, r_min)}^{r_max} j(t) dt`` for ``r <= r_max``,
* g: ``psi(r) = j(r) / (sigma_d r^{d-1})`` on ``[r_min, r_max]``.

Terms that are radial in one variable are integrated by Gauss-Legendre
quadrature. The remaining two- and three-fold integrals over ``R^d``
are estimated by importance sampling. Each integration variable is
drawn from a shell-stratified radial proposal shaped like ``|C|``,
``C^2`` or ``|psi|``, and the proposal density is evaluated exactly, so
the estimators are unbiased.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, interpolate

from .errors import NonPositiveStatistic, NotInvertible
from .estimators import EPANECHNIKOV
from .kernels import ball_volume, sphere_area
from .moments import squared_integral, theory_grad, theory_value
from .sampler import truncation_radius

__all__ = [
    "AsymptoticReport",
    "SigmaEstimate",
    "PairWeight",
    "j_function",
    "B_matrix",
    "pair_weight",
    "sigma_from_weight",
    "sigma_K",
    "sigma_g",
    "sigma_matrix",
    "asymptotic_covariance",
    "projected_deviation",
]

N_SAMPLES = 200_000
BLOCK = 50_000
N_SHELLS = 1024
N_TABLE = 4097
COND_MAX = 1e12
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True, eq=False)
class SigmaEstimate:
    value: np.ndarray
    stderr: np.ndarray
    terms: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class AsymptoticReport:
    B: np.ndarray
    Sigma: np.ndarray
    covariance: np.ndarray
    mc_stderr: np.ndarray
    covariance_stderr: np.ndarray
    condition: float
    n_samples: int

    def rows(self):
        """``(name, i, j, value, stderr)`` tuples for CSV output."""
        out = []
        p = self.B.shape[0]
        zeros = np.zeros((p, p))
        for name, val, se in (
            ("B", self.B, zeros),
            ("Sigma", self.Sigma, self.mc_stderr),
            ("covariance", self.covariance, self.covariance_stderr),
        ):
            for i in range(p):
                for j in range(p):
                    out.append((name, i, j, float(val[i, j]), float(se[i, j])))
        return out


@dataclass(frozen=True, eq=False)
class PairWeight:
    """Radial weight ``psi`` (values of shape ``r.shape + (p,)``) with the
    support ``[r_lo, r_hi]`` and the constants ``kappa = int J j dt`` and
    ``phi = int psi(x) dx``. ``breaks`` lists radii where ``psi`` is not
    smooth, for the deterministic quadratures."""

    psi: object
    r_lo: float
    r_hi: float
    kappa: np.ndarray
    phi: np.ndarray
    breaks: tuple = ()

    @property
    def p(self):
        return len(self.kappa)


def j_function(m, spec, t):
    """``w(t) J(t)^{2c-2} J^(1)(t)``, shape ``t.shape + (p,)``."""
    t = np.asarray(t, dtype=float)
    J = np.asarray(theory_value(m, spec.statistic, t))
    e = 2 * spec.c - 2
    if e < 0 and np.any(J <= 0):
        raise NonPositiveStatistic(
            f"theoretical {spec.statistic} is non-positive on the grid while 2c-2 < 0"
        )
    if e != int(e) and np.any(J < 0):
        raise NonPositiveStatistic("negative theoretical curve with a fractional exponent")
    Je = np.ones_like(J) if e == 0 else J**e
    return (spec.weights(t) * Je)[..., None] * theory_grad(m, spec.statistic, t)


def B_matrix(m, spec):
    """``int w J^{2c-2} J^(1) J^(1)T dt`` by composite Simpson on the contrast grid."""
    t = spec.grid
    J1 = theory_grad(m, spec.statistic, t)
    jj = j_function(m, spec, t)
    integrand = jj[:, :, None] * J1[:, None, :]
    return integrate.simpson(integrand, x=t, axis=0)


def projected_deviation(curve, m, spec):
    """``int (J_hat - J) j dt`` on the contrast grid for an empirical curve."""
    t = spec.grid
    if len(curve.grid) != len(t) or not np.allclose(curve.grid, t, rtol=0, atol=1e-14):
        raise ValueError("curve must be tabulated on the contrast grid")
    dev = np.asarray(curve.values) - theory_value(m, spec.statistic, t)
    return integrate.simpson(dev[:, None] * j_function(m, spec, t), x=t, axis=0)


def _gl_integral(func, a, b, n_panels):
    """Composite Gauss-Legendre of ``func`` over ``[a, b]`` (leading axis)."""
    edges = np.linspace(a, b, n_panels + 1)
    h = np.diff(edges)
    x = edges[:-1, None] + h[:, None] * (_GL_X + 1) / 2
    v = np.asarray(func(x.ravel()))
    v = v.reshape((n_panels, len(_GL_X)) + v.shape[1:])
    w = (_GL_W[None, :] * h[:, None] / 2).reshape((n_panels, len(_GL_X)) + (1,) * (v.ndim - 2))
    return (v * w).sum(axis=(0, 1))


def _radial_integral(func, pieces, dim, n_panels=256):
    """``int func(|x|) dx`` over shells given as a list of ``(a, b)``."""
    sigma = sphere_area(dim)

    def f(r):
        v = np.asarray(func(r))
        return v * (sigma * r ** (dim - 1)).reshape((-1,) + (1,) * (v.ndim - 1))

    return sum(_gl_integral(f, a, b, n_panels) for a, b in pieces if b > a)


def pair_weight(m, spec, n_table=N_TABLE, bandwidth=None, kernel=None):
    """Radial pair weight of the K or g contrast at model ``m``.

    For g, a positive ``bandwidth`` gives the weight of the smoothed
    estimator, ``psi_b(r) = int j(t) k_b(t - r) dt / (sigma_d r^{d-1})``,
    whose limit as ``bandwidth -> 0`` is the default.
    """
    r_min, r_max = spec.r_min, spec.r_max
    d = m.dim
    t = np.linspace(r_min, r_max, n_table)
    J = np.asarray(theory_value(m, spec.statistic, t))
    jt = j_function(m, spec, t)
    kappa = integrate.simpson(J[:, None] * jt, x=t, axis=0)
    sigma = sphere_area(d)
    if spec.statistic == "g" and bandwidth:
        return _smoothed_g_weight(m, spec, float(bandwidth), kernel or EPANECHNIKOV, n_table)
    if spec.statistic == "g":
        phi = integrate.simpson(jt, x=t, axis=0)

        def psi(r):
            r = np.asarray(r, dtype=float)
            inside = (r >= r_min) & (r <= r_max)
            rr = np.where(inside, r, r_min)
            val = j_function(m, spec, rr) / (sigma * rr ** (d - 1))[..., None]
            return np.where(inside[..., None], val, 0.0)

        return PairWeight(psi, r_min, r_max, kappa, phi, (r_min, r_max))
    # cumulative integral of j from r_min, exact per table interval
    h = np.diff(t)
    nodes = t[:-1, None] + h[:, None] * (_GL_X + 1) / 2
    jn = j_function(m, spec, nodes.ravel()).reshape(nodes.shape + (-1,))
    inc = np.einsum("ikp,k->ip", jn, _GL_W) * (h[:, None] / 2)
    cum = np.concatenate([np.zeros((1, inc.shape[1])), np.cumsum(inc, axis=0)])
    spline = interpolate.CubicHermiteSpline(t, cum, jt, axis=0)
    total = cum[-1]
    phi = integrate.simpson(ball_volume(t, d)[:, None] * jt, x=t, axis=0)

    def psi(r):
        r = np.asarray(r, dtype=float)
        rc = np.clip(r, r_min, r_max)
        val = total - spline(rc)
        return np.where((r <= r_max)[..., None], val, 0.0)

    return PairWeight(psi, 0.0, r_max, kappa, phi, (r_min, r_max))


def _smoothed_g_weight(m, spec, b, kernel, n_table):
    d = m.dim
    sigma = sphere_area(d)
    reach = kernel.support * b
    r_lo = max(spec.r_min - reach, 0.0)
    r_hi = spec.r_max + reach
    r = np.linspace(r_lo, r_hi, n_table)
    # panels of width <= b / 8 resolve the kernel; j is smooth on the t range
    n_panels = max(64, int(np.ceil((spec.r_max - spec.r_min) / (b / 8))))
    edges = np.linspace(spec.r_min, spec.r_max, n_panels + 1)
    h = np.diff(edges)
    tn = (edges[:-1, None] + h[:, None] * (_GL_X + 1) / 2).ravel()
    wn = (_GL_W[None, :] * h[:, None] / 2).ravel()
    jn = j_function(m, spec, tn) / (sigma * tn ** (d - 1))[:, None]
    lo = np.searchsorted(tn, r - reach, side="left")
    hi = np.searchsorted(tn, r + reach, side="right")
    table = np.empty((len(r), jn.shape[1]))
    for i in range(len(r)):
        s = slice(lo[i], hi[i])
        table[i] = (kernel((tn[s] - r[i]) / b) * (wn[s] / b)) @ jn[s]
    interp = interpolate.interp1d(r, table, axis=0, kind="cubic", bounds_error=False, fill_value=0.0)

    def psi(x):
        x = np.asarray(x, dtype=float)
        return np.where(((x >= r_lo) & (x <= r_hi))[..., None], interp(x), 0.0)

    # phi = int psi dx and kappa = int psi g dx
    shell = (sigma * r ** (d - 1))[:, None]
    g = 1.0 - m.family.correlation(r, m.theta) ** 2
    phi = integrate.simpson(table * shell, x=r, axis=0)
    kappa = integrate.simpson(table * shell * g[:, None], x=r, axis=0)
    return PairWeight(psi, r_lo, r_hi, kappa, phi, (r_lo, r_hi))


class _RadialProposal:
    """Isotropic density on the ball ``|x| <= r_hi`` that is constant on
    each of ``n_shells`` shells between ``r_lo`` and ``r_hi``, with shell
    masses proportional to ``profile`` at the shell midpoints."""

    def __init__(self, profile, r_lo, r_hi, dim, n_shells=N_SHELLS):
        self.dim = dim
        edges = np.linspace(r_lo, r_hi, n_shells + 1)
        mid = (edges[:-1] + edges[1:]) / 2
        vol = sphere_area(dim) / dim * (edges[1:] ** dim - edges[:-1] ** dim)
        mass = np.abs(np.asarray(profile(mid), dtype=float)) * vol
        self.empty = not np.any(mass > 0)
        if self.empty:
            return
        # keep every shell reachable so the estimator stays unbiased
        mass = np.maximum(mass, 1e-12 * mass.max())
        self.prob = mass / mass.sum()
        self.cdf = np.cumsum(self.prob)
        self.cdf[-1] = 1.0
        self.density = self.prob / vol
        self.lo_d = edges[:-1] ** dim
        self.hi_d = edges[1:] ** dim

    def sample(self, n, rng):
        """Return points of shape ``(n, d)`` and their proposal densities."""
        k = np.minimum(np.searchsorted(self.cdf, rng.random(n), side="right"), len(self.cdf) - 1)
        u = rng.random(n)
        r = (self.lo_d[k] + u * (self.hi_d[k] - self.lo_d[k])) ** (1.0 / self.dim)
        z = rng.standard_normal((n, self.dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return r[:, None] * z, self.density[k]


def _norm(x):
    return np.sqrt(np.einsum("...i,...i->...", x, x))


def _mc(draw, n_samples, seed_seq, block=BLOCK):
    """Mean and standard error of ``draw(n, rng)`` samples, merged over
    independent blocks with their own substreams (Chan's update)."""
    n_blocks = max(1, -(-n_samples // block))
    seqs = seed_seq.spawn(n_blocks)
    count, mean, m2 = 0, None, None
    left = n_samples
    for ss in seqs:
        nb = min(block, left)
        left -= nb
        x = draw(nb, np.random.default_rng(ss))
        bm = x.mean(axis=0)
        bm2 = ((x - bm) ** 2).sum(axis=0)
        if mean is None:
            count, mean, m2 = nb, bm, bm2
        else:
            delta = bm - mean
            tot = count + nb
            mean = mean + delta * nb / tot
            m2 = m2 + bm2 + delta**2 * count * nb / tot
            count = tot
    se = np.sqrt(m2 / (count - 1) / count) if count > 1 else np.full_like(mean, np.inf)
    return mean, se


def _outer(a, b):
    return a[:, :, None] * b[:, None, :]


def sigma_from_weight(m, pw, n_samples=N_SAMPLES, seed=0, r_cap=None):
    """Limit variance of ``sqrt(|D|) int (J_hat - J) j dt`` for a pair weight.

    Returns a :class:`SigmaEstimate` whose ``terms`` hold the individual
    integrals (on the scale of the unnormalized pair-count statistic).
    """
    rho, d, p = m.rho, m.dim, pw.p
    psi = pw.psi
    C = m.C_vec
    phi, kappa = np.asarray(pw.phi, float), np.asarray(pw.kappa, float)
    r_trunc = truncation_radius(m, cap=r_cap)

    def Cr(r):
        return m.C(r)

    knots = sorted({pw.r_lo, pw.r_hi, *(b for b in pw.breaks if pw.r_lo < b < pw.r_hi)})
    pieces = list(zip(knots[:-1], knots[1:]))
    psi2 = _radial_integral(
        lambda r: _outer(psi(r), psi(r)) * (rho**2 - Cr(r) ** 2)[:, None, None], pieces, d
    )
    psiC = _radial_integral(lambda r: psi(r) * (Cr(r) ** 2)[:, None], pieces, d)
    ic2 = squared_integral(m)

    qC = _RadialProposal(lambda r: Cr(r), 0.0, r_trunc, d)
    qCC = _RadialProposal(lambda r: Cr(r) ** 2, 0.0, r_trunc, d)
    qpsi = _RadialProposal(lambda r: _norm(psi(r)), pw.r_lo, pw.r_hi, d)
    seqs = dict(zip(("P2a", "P2b", "Q1", "Q2", "Q3", "P3", "P6"), np.random.SeedSequence(seed).spawn(7)))

    def P2a(n, rng):
        u, qu = qC.sample(n, rng)
        v, qv = qC.sample(n, rng)
        f = 2 * C(u) * C(v) * C(u + v) / (qu * qv)
        return _outer(psi(_norm(u)), psi(_norm(v))) * f[:, None, None]

    def P2b(n, rng):
        u, qu = qpsi.sample(n, rng)
        s, qs = qCC.sample(n, rng)
        f = C(s) ** 2 / (qu * qs)
        return _outer(psi(_norm(u)), psi(_norm(s - u))) * f[:, None, None]

    def Q1(n, rng):
        a, qa = qC.sample(n, rng)
        b, qb = qC.sample(n, rng)
        v, qv = qC.sample(n, rng)
        f = C(a) * C(b) * C(v) * C(a - b - v) / (qa * qb * qv)
        return _outer(psi(_norm(a)), psi(_norm(v))) * f[:, None, None]

    def Q2(n, rng):
        a, qa = qC.sample(n, rng)
        v, qv = qC.sample(n, rng)
        s, qs = qC.sample(n, rng)
        f = C(a) * C(v) * C(s) * C(a - s + v) / (qa * qv * qs)
        return _outer(psi(_norm(a)), psi(_norm(v))) * f[:, None, None]

    def Q3(n, rng):
        b, qb = qC.sample(n, rng)
        s1, q1 = qC.sample(n, rng)
        s2, q2 = qC.sample(n, rng)
        f = C(b) * C(s1) * C(s2) * C(s2 - s1 + b) / (qb * q1 * q2)
        return _outer(psi(_norm(b + s2)), psi(_norm(s1 - b))) * f[:, None, None]

    def P3(n, rng):
        v, qv = qC.sample(n, rng)
        y, qy = qC.sample(n, rng)
        f = 2 * C(v) * C(y) * C(y + v) / (qv * qy)
        return psi(_norm(v)) * f[:, None]

    def P6(n, rng):
        x, qx = qpsi.sample(n, rng)
        y, qy = qCC.sample(n, rng)
        z, qz = qCC.sample(n, rng)
        f = C(y) ** 2 * C(z) ** 2 / (qx * qy * qz)
        return _outer(psi(_norm(x)), psi(_norm(x + z - y))) * f[:, None, None]

    mat0, vec0 = np.zeros((p, p)), np.zeros(p)
    est = {}
    for name, draw, needs in (
        ("P2a", P2a, (qC,)),
        ("P2b", P2b, (qpsi, qCC)),
        ("Q1", Q1, (qC,)),
        ("Q2", Q2, (qC,)),
        ("Q3", Q3, (qC,)),
        ("P3", P3, (qC,)),
        ("P6", P6, (qpsi, qCC)),
    ):
        zero = vec0 if name == "P3" else mat0
        if any(q.empty for q in needs):
            est[name] = (zero.copy(), zero.copy())
        else:
            est[name] = _mc(draw, n_samples, seqs[name])

    val = {k: v[0] for k, v in est.items()}
    se = {k: v[1] for k, v in est.items()}
    oo = np.outer
    S = (
        2 * psi2
        + 4 * val["P2a"]
        - 4 * rho * val["P2b"]
        + 4 * rho * (-2 * oo(phi, psiC) + rho**2 * oo(phi, phi))
        - 2 * (val["Q1"] + val["Q2"] + val["Q3"])
        + 4 * rho * oo(phi, val["P3"])
        + 2 * val["P6"]
        - 4 * rho**2 * ic2 * oo(phi, phi)
        - 4 * rho * oo(val["P3"] - 2 * rho * ic2 * phi, kappa)
        - 8 * rho * oo(rho**2 * phi - psiC, kappa)
        + 4 * rho**2 * (rho - ic2) * oo(kappa, kappa)
    )
    # cross-correlations between entries of the same estimate are ignored
    var = (
        16 * se["P2a"] ** 2
        + 16 * rho**2 * se["P2b"] ** 2
        + 4 * (se["Q1"] ** 2 + se["Q2"] ** 2 + se["Q3"] ** 2)
        + 4 * se["P6"] ** 2
    )
    sp = se["P3"]
    var = var + (4 * rho) ** 2 * (
        np.where(np.eye(p, dtype=bool), oo(sp, phi - kappa) ** 2, oo(phi, sp) ** 2 + oo(sp, kappa) ** 2)
    )
    S = (S + S.T) / 2
    var = (var + var.T) / 2
    scale = rho**4
    terms = {k: v / scale for k, v in val.items()}
    terms.update(psi2=psi2 / scale, psiC=psiC / scale, ic2=ic2, phi=phi, kappa=kappa)
    return SigmaEstimate(S / scale, np.sqrt(var) / scale, terms)


def sigma_K(m, spec, n_samples=N_SAMPLES, seed=0, r_cap=None):
    if spec.statistic != "K":
        spec = _with_statistic(spec, "K")
    return sigma_from_weight(m, pair_weight(m, spec), n_samples, seed, r_cap)


def sigma_g(m, spec, n_samples=N_SAMPLES, seed=0, r_cap=None, bandwidth=None, kernel=None):
    """``Sigma`` of the g contrast; ``bandwidth`` selects the smoothed weight."""
    if spec.statistic != "g":
        spec = _with_statistic(spec, "g")
    pw = pair_weight(m, spec, bandwidth=bandwidth, kernel=kernel)
    return sigma_from_weight(m, pw, n_samples, seed, r_cap)


def sigma_matrix(m, spec, n_samples=N_SAMPLES, seed=0, r_cap=None, bandwidth=None, kernel=None):
    """``Sigma`` for the statistic named in ``spec``."""
    pw = pair_weight(m, spec, bandwidth=bandwidth, kernel=kernel)
    return sigma_from_weight(m, pw, n_samples, seed, r_cap)


def _with_statistic(spec, stat):
    return replace(spec, statistic=stat)


def asymptotic_covariance(
    m, spec, n_samples=N_SAMPLES, seed=0, r_cap=None, bandwidth=None, kernel=None
):
    """Sandwich covariance ``B^{-1} Sigma B^{-T}`` at the model ``m``.

    ``bandwidth`` (g only) replaces the limit ``Sigma`` by that of the
    kernel estimator at a fixed bandwidth.
    """
    B = np.atleast_2d(B_matrix(m, spec))
    B = (B + B.T) / 2
    eig = np.linalg.eigvalsh(B)
    cond = float(eig.max() / eig.min()) if eig.min() > 0 else np.inf
    if not eig.min() > 0 or cond > COND_MAX:
        raise NotInvertible(f"B is not positive definite or ill-conditioned (cond={cond:.3g})", cond)
    sig = sigma_matrix(m, spec, n_samples, seed, r_cap, bandwidth, kernel)
    Binv = np.linalg.inv(B)
    cov = Binv @ sig.value @ Binv.T
    cov = (cov + cov.T) / 2
    cov_se = np.abs(Binv) @ sig.stderr @ np.abs(Binv).T
    return AsymptoticReport(B, sig.value, cov, sig.stderr, cov_se, cond, int(n_samples))
