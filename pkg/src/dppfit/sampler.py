"""Simulation of stationary DPPs by spectral approximation on a torus.

The kernel is periodized on a box torus containing the window. Its
eigenfunctions are Fourier modes with eigenvalues ``F(C)(k / L)``; we
use the real cosine/sine basis, so every retained frequency contributes
two real eigenfunctions with the same eigenvalue. Each eigenfunction is
kept independently with probability equal to its eigenvalue, and the
resulting projection DPP is sampled point by point from its conditional
densities. Points are proposed uniformly on the torus and accepted in
two stages; the residual basis is updated with Householder reflections.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import blas

from .errors import TruncationError
from .estimators import pair_count_statistic
from .geometry import PointPattern
from .kernels import ball_volume, require_valid
from .moments import K_theory

__all__ = [
    "SamplerConfig",
    "SamplerDiagnostics",
    "PairCountCheck",
    "derive_seed",
    "truncation_radius",
    "spectral_modes",
    "sample_dpp",
    "sample_poisson",
    "pair_count_check",
]

# relative kernel size below which the torus wrap-around is ignored
WRAP_TOL = 1e-8
MAX_GRID_MODES = 50_000_000


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs of the spectral sampler.

    ``trunc_mass`` is the fraction of the total eigenvalue mass the
    retained modes must carry and ``max_modes`` caps the number of
    frequencies per axis on each side of zero. ``padding`` enlarges the
    torus beyond the window on every face.
    """

    seed: int = 0
    trunc_mass: float = 0.99999
    max_modes: int = 2048
    padding: float = 0.0

    def __post_init__(self):
        if not 0 < self.trunc_mass < 1:
            raise ValueError("trunc_mass must lie in (0, 1)")
        if int(self.max_modes) != self.max_modes or self.max_modes < 1:
            raise ValueError("max_modes must be a positive integer")
        if self.padding < 0:
            raise ValueError("padding must be nonnegative")


@dataclass(frozen=True)
class SamplerDiagnostics:
    modes_per_axis: tuple
    n_modes: int
    retained_mass: float
    expected_count: float
    n_selected: int
    torus_sides: tuple
    proposals: int


@dataclass(frozen=True)
class _ModeSet:
    freqs: np.ndarray  # integer frequencies of the half space, shape (q, d)
    eig: np.ndarray  # eigenvalue per half-space frequency
    eig0: float  # eigenvalue of the constant mode
    M: tuple
    retained_mass: float
    total_mass: float


def derive_seed(master, *keys):
    """Deterministic 64-bit seed from a master seed and integer keys."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def truncation_radius(m, tol=WRAP_TOL, cap=None):
    """Radius beyond which ``|C(r) / rho| < tol``.

    Raises :class:`TruncationError` if the correlation has not decayed
    below ``tol`` within ``cap`` (default: 10^4 length scales).
    """
    fam = m.family
    scale = fam.length_scale(m.theta)
    cap = 1e4 * scale if cap is None else float(cap)
    r = scale
    while np.abs(fam.correlation(r, m.theta)) >= tol:
        r *= 1.25
        if r > cap:
            raise TruncationError(f"correlation exceeds {tol:g} beyond the cap radius {cap:g}")
    # refine on a grid so non-monotone tails are handled
    grid = np.linspace(0.0, r, 4097)
    above = np.nonzero(np.abs(fam.correlation(grid, m.theta)) >= tol)[0]
    if len(above) == 0:
        return float(grid[1])
    return float(grid[min(above[-1] + 1, len(grid) - 1)])


def _torus_sides(m, w, cfg):
    need = 2.0 * truncation_radius(m)
    sides = w.sides + 2.0 * cfg.padding
    return np.maximum(sides, need)


def _periodized_mass(m, L):
    """Sum of all torus eigenvalues, ``vol * sum_n C(n L)``."""
    reach = truncation_radius(m, tol=1e-17)
    J = [int(np.ceil(reach / Li)) for Li in L]
    axes = [np.arange(-j, j + 1) * Li for j, Li in zip(J, L)]
    shifts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(L))
    return float(np.prod(L) * np.sum(m.C_vec(shifts)))


def _half_space(k):
    """Mask of frequencies whose first nonzero coordinate is positive."""
    mask = np.zeros(len(k), dtype=bool)
    undecided = np.ones(len(k), dtype=bool)
    for i in range(k.shape[1]):
        mask |= undecided & (k[:, i] > 0)
        undecided &= k[:, i] == 0
    return mask


def spectral_modes(m, L, cfg):
    """Choose the frequency box and tabulate eigenvalues on the torus."""
    L = np.asarray(L, dtype=float)
    d = len(L)
    total = _periodized_mass(m, L)
    kappa = 1.0 / np.max(L)
    while True:
        M = np.maximum(np.ceil(kappa * L).astype(int), 1)
        if np.any(M > cfg.max_modes):
            raise TruncationError(
                f"retained spectral mass below {cfg.trunc_mass} with max_modes={cfg.max_modes}"
            )
        if np.prod(2 * M + 1.0) > MAX_GRID_MODES:
            raise TruncationError("frequency grid too large for the requested trunc_mass")
        axes = [np.arange(-Mi, Mi + 1) for Mi in M]
        k = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
        lam = m.family.spectral_density(
            np.sqrt(((k / L) ** 2).sum(axis=1)), m.rho, m.theta, m.dim
        )
        retained = float(lam.sum())
        if retained >= cfg.trunc_mass * total:
            break
        kappa *= 1.5
    lam = np.clip(lam, 0.0, 1.0)
    half = _half_space(k)
    zero = np.all(k == 0, axis=1)
    return _ModeSet(
        freqs=k[half],
        eig=lam[half],
        eig0=float(lam[zero][0]),
        M=tuple(int(v) for v in M),
        retained_mass=retained / total,
        total_mass=total,
    )


class _ProjectionSampler:
    """Sequential sampler of the projection DPP on selected real modes."""

    def __init__(self, L, const, kc, ks, rng):
        self.L = L
        self.vol = float(np.prod(L))
        self.rng = rng
        self.const = const
        self.Kc = (2 * np.pi * kc / L).T
        self.Ks = (2 * np.pi * ks / L).T
        self.nc, self.ns = len(kc), len(ks)
        self.n = int(const) + self.nc + self.ns
        # sup of the squared feature norm: a frequency with both cos and sin
        # selected contributes exactly 2/vol, a lone one at most 2/vol
        distinct = len(np.unique(np.concatenate([kc, ks]), axis=0)) if self.n > const else 0
        self.bound = (int(const) + 2 * distinct) / self.vol
        self.proposals = 0

    def features(self, x):
        out = np.empty((len(x), self.n))
        o = 0
        if self.const:
            out[:, 0] = 1.0
            o = 1
        out[:, o : o + self.nc] = np.cos(x @ self.Kc) * np.sqrt(2.0)
        out[:, o + self.nc :] = np.sin(x @ self.Ks) * np.sqrt(2.0)
        out /= np.sqrt(self.vol)
        return out

    def run(self):
        n, d = self.n, len(self.L)
        pts = np.empty((n, d))
        U = np.asfortranarray(np.eye(n))
        for i in range(n):
            left = n - i
            x, a = self._draw(U, left)
            pts[i] = x
            # reflect a onto e_0, then drop the first column
            v = a.copy()
            v[0] += np.copysign(np.sqrt(a @ a), a[0])
            Uv = U @ v
            U = U[:, 1:]
            if U.shape[1]:
                blas.dger(-2.0 / (v @ v), Uv, v[1:], a=U, overwrite_a=True)
        return pts

    def _draw(self, U, left):
        rng = self.rng
        n = self.n
        while True:
            batch = int(np.ceil(1.1 * self.bound * self.vol / left)) + 2
            x = rng.random((batch, len(self.L))) * self.L
            self.proposals += batch
            F = self.features(x)
            nrm = np.einsum("ij,ij->i", F, F)
            keep = np.nonzero(rng.random(batch) * self.bound < nrm)[0]
            chunk = int(np.ceil(0.7 * n / left)) + 1
            for c0 in range(0, keep.size, chunk):
                idx = keep[c0 : c0 + chunk]
                A = F[idx] @ U
                dens = np.einsum("ij,ij->i", A, A)
                ok = np.nonzero(rng.random(idx.size) * nrm[idx] < dens)[0]
                if ok.size:
                    j = ok[0]
                    return x[idx[j]], A[j]


def sample_dpp(m, w, cfg=None, *, return_diagnostics=False):
    """Draw one realization of the DPP with kernel ``m`` in window ``w``.

    With ``return_diagnostics=True`` a :class:`SamplerDiagnostics` is
    returned alongside the pattern.
    """
    cfg = cfg or SamplerConfig()
    require_valid(m)
    if w.dim != m.dim:
        raise ValueError(f"window dimension {w.dim} does not match model dimension {m.dim}")
    rng = np.random.default_rng(cfg.seed)
    L = _torus_sides(m, w, cfg)
    modes = spectral_modes(m, L, cfg)
    const = bool(rng.random() < modes.eig0)
    sel_c = rng.random(len(modes.eig)) < modes.eig
    sel_s = rng.random(len(modes.eig)) < modes.eig
    sampler = _ProjectionSampler(L, const, modes.freqs[sel_c], modes.freqs[sel_s], rng)
    pts = sampler.run()
    # torus coordinates -> window coordinates, window centred in the torus
    origin = np.asarray(w.lo) - (L - w.sides) / 2
    pts = pts + origin
    pts = pts[w.contains(pts)]
    pattern = PointPattern(w, pts)
    if not return_diagnostics:
        return pattern
    diag = SamplerDiagnostics(
        modes_per_axis=modes.M,
        n_modes=int(2 * len(modes.eig) + 1),
        retained_mass=modes.retained_mass,
        expected_count=modes.total_mass,
        n_selected=sampler.n,
        torus_sides=tuple(float(v) for v in L),
        proposals=sampler.proposals,
    )
    return pattern, diag


def sample_poisson(rho, w, seed=0):
    """Homogeneous Poisson pattern with intensity ``rho`` in ``w``."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    rng = np.random.default_rng(seed)
    n = rng.poisson(rho * w.volume)
    pts = np.asarray(w.lo) + rng.random((n, w.dim)) * w.sides
    return PointPattern(w, pts)


@dataclass(frozen=True)
class PairCountCheck:
    t: float
    empirical: float
    stderr: float
    theoretical: float
    n_reps: int

    @property
    def z(self):
        if self.stderr == 0:
            return 0.0 if self.empirical == self.theoretical else np.inf
        return (self.empirical - self.theoretical) / self.stderr

    def within(self, k=3.0):
        return abs(self.empirical - self.theoretical) <= k * self.stderr


def pair_count_check(m, w, n_reps, t, cfg=None, *, poisson=False):
    """Compare the mean of ``rho_hat^2 K_hat(t)`` with ``rho^2 K(t)``.

    With ``poisson=True`` patterns are Poisson with intensity ``m.rho``
    and the reference is ``rho^2 |B(0, t)|``.
    """
    cfg = cfg or SamplerConfig()
    t = float(t)
    if t == 0:
        return PairCountCheck(0.0, 0.0, 0.0, 0.0, int(n_reps))
    vals = np.empty(n_reps)
    for r in range(n_reps):
        seed = derive_seed(cfg.seed, r)
        if poisson:
            p = sample_poisson(m.rho, w, seed)
        else:
            p = sample_dpp(m, w, SamplerConfig(seed, cfg.trunc_mass, cfg.max_modes, cfg.padding))
        vals[r] = pair_count_statistic(p, [t])[0]
    if poisson:
        theory = m.rho**2 * float(ball_volume(t, m.dim))
    else:
        theory = m.rho**2 * float(K_theory(m, t))
    se = vals.std(ddof=1) / np.sqrt(n_reps) if n_reps > 1 else np.inf
    return PairCountCheck(t, float(vals.mean()), float(se), theory, int(n_reps))
