"""Monte Carlo studies of minimum contrast estimators.

A study simulates ``replicates`` patterns per window, fits every
requested method to each pattern and tabulates bias, variance and MSE.
All randomness flows from ``master_seed``. A replicate's pattern seed
depends only on ``(master_seed, window index, replicate)``, so results
do not depend on the number of worker processes.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field, replace
import os

import numpy as np
from scipy import stats

from .asymptotics import asymptotic_covariance
from .contrast import FitOptions, default_spec, fit
from .errors import ConfigError, DppfitError, NormalityUndefined, StudyAborted
from .estimators import K_CORRECTIONS, BandwidthRule, SmoothingKernel
from .geometry import Window
from .kernels import KernelModel, get_family, require_valid
from .sampler import SamplerConfig, derive_seed, sample_dpp

__all__ = [
    "StudyConfig",
    "CellResult",
    "StudyResult",
    "NormalityRow",
    "parse_config",
    "load_config",
    "run_study",
    "write_study",
    "normality_report",
    "write_normality",
    "resolve_threads",
    "replicate_pattern",
    "fit_replicate",
]

THREADS_ENV = "DPPFIT_THREADS"
MAX_FAIL_FRACTION = 0.10
METHODS = ("K", "g")


@dataclass(frozen=True)
class StudyConfig:
    model: KernelModel
    windows: tuple
    replicates: int
    methods: tuple = METHODS
    spec_overrides: dict = field(default_factory=dict)
    master_seed: int = 0
    threads: int = 1
    trunc_mass: float = 0.99999
    max_modes: int = 2048
    kernel: str = "epanechnikov"
    bandwidth_constant: float = 0.15
    k_correction: str = "isotropic"
    hist_bins: int = 20

    def __post_init__(self):
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ConfigError("replicates must be a positive integer")
        if not self.windows:
            raise ConfigError("at least one window is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"methods must be a nonempty subset of {METHODS}, got {self.methods}")
        if self.k_correction not in K_CORRECTIONS:
            raise ConfigError(f"k_correction must be one of {K_CORRECTIONS}")
        if int(self.threads) != self.threads or self.threads < 1:
            raise ConfigError("threads must be a positive integer")
        unknown = set(self.spec_overrides) - {"r_min", "r_max", "c", "grid_points"}
        if unknown:
            raise ConfigError(f"unknown contrast overrides {sorted(unknown)}")
        object.__setattr__(self, "windows", tuple(self.windows))
        object.__setattr__(self, "methods", tuple(self.methods))
        for w in self.windows:
            if w.dim != self.model.dim:
                raise ConfigError(f"window {w} does not match model dimension {self.model.dim}")
        if "K" in self.methods and self.k_correction == "isotropic" and self.model.dim > 2:
            raise ConfigError("isotropic K correction needs dim <= 2; use translate or border")
        require_valid(self.model)
        for w in self.windows:
            for m in self.methods:
                try:
                    self.spec_for(w, m)
                except ValueError as exc:
                    raise ConfigError(f"invalid contrast settings for {m} on {w}: {exc}")

    def spec_for(self, window, method):
        spec = default_spec(method, window)
        return replace(spec, **self.spec_overrides) if self.spec_overrides else spec

    def fit_options(self, seed):
        return FitOptions(
            seed=seed,
            kernel=SmoothingKernel(self.kernel),
            bandwidth=BandwidthRule("stoyan", self.bandwidth_constant),
            k_correction=self.k_correction,
        )


@dataclass(frozen=True, eq=False)
class CellResult:
    """Estimates of one method on one window; failed fits are NaN rows."""

    window: Window
    method: str
    theta_true: np.ndarray
    estimates: np.ndarray
    errors: tuple

    @property
    def ok(self):
        return np.all(np.isfinite(self.estimates), axis=1)

    @property
    def n_fail(self):
        return int(np.count_nonzero(~self.ok))

    @property
    def n_fit(self):
        return int(np.count_nonzero(self.ok))

    def _good(self):
        return self.estimates[self.ok]

    @property
    def bias(self):
        return self._good().mean(axis=0) - self.theta_true

    @property
    def var(self):
        e = self._good()
        return ((e - e.mean(axis=0)) ** 2).mean(axis=0)

    @property
    def mse(self):
        return ((self._good() - self.theta_true) ** 2).mean(axis=0)


@dataclass(frozen=True, eq=False)
class StudyResult:
    config: StudyConfig
    cells: tuple

    def cell(self, window_index, method):
        w = self.config.windows[window_index]
        for c in self.cells:
            if c.window == w and c.method == method:
                return c
        raise KeyError((window_index, method))


def _coerce(key, val, kind):
    try:
        return kind(val)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {val!r} as {kind.__name__}")


def parse_config(text):
    """Build a :class:`StudyConfig` from flat ``key=value`` lines.

    Recognized keys::

        model.family model.dim model.rho model.<param>
        study.windows (e.g. "0 1 0 1; 0 2 0 2") or study.window_sides ("1,2,3")
        study.replicates study.methods study.master_seed study.threads study.hist_bins
        contrast.r_min contrast.r_max contrast.c contrast.grid_points
        estimator.kernel estimator.bandwidth_constant estimator.k_correction
        sampler.trunc_mass sampler.max_modes
    """
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value")
        kv[key.strip()] = val.strip()

    fam = get_family(kv.pop("model.family", "gaussian"))
    dim = _coerce("model.dim", kv.pop("model.dim", "2"), int)
    if "model.rho" not in kv:
        raise ConfigError("missing model.rho")
    rho = _coerce("model.rho", kv.pop("model.rho"), float)
    theta = []
    for name in fam.param_names:
        key = f"model.{name}"
        if key not in kv:
            raise ConfigError(f"missing {key}")
        theta.append(_coerce(key, kv.pop(key), float))
    model = KernelModel(fam, dim, rho, tuple(theta))

    if "study.windows" in kv and "study.window_sides" in kv:
        raise ConfigError("give study.windows or study.window_sides, not both")
    if "study.windows" in kv:
        windows = []
        for chunk in kv.pop("study.windows").split(";"):
            vals = [_coerce("study.windows", v, float) for v in chunk.replace(",", " ").split()]
            try:
                windows.append(Window.from_bounds(vals))
            except ValueError as exc:
                raise ConfigError(f"study.windows: {exc}")
    else:
        sides = kv.pop("study.window_sides", "1,2,3")
        windows = [
            Window.cube(_coerce("study.window_sides", s, float), dim)
            for s in sides.replace(";", ",").split(",")
            if s.strip()
        ]
    if "study.replicates" not in kv:
        raise ConfigError("missing study.replicates")
    args = dict(
        model=model,
        windows=tuple(windows),
        replicates=_coerce("study.replicates", kv.pop("study.replicates"), int),
    )
    if "study.methods" in kv:
        args["methods"] = tuple(m.strip() for m in kv.pop("study.methods").split(",") if m.strip())
    simple = {
        "study.master_seed": ("master_seed", int),
        "study.threads": ("threads", int),
        "study.hist_bins": ("hist_bins", int),
        "estimator.kernel": ("kernel", str),
        "estimator.bandwidth_constant": ("bandwidth_constant", float),
        "estimator.k_correction": ("k_correction", str),
        "sampler.trunc_mass": ("trunc_mass", float),
        "sampler.max_modes": ("max_modes", int),
    }
    for key, (name, kind) in simple.items():
        if key in kv:
            args[name] = _coerce(key, kv.pop(key), kind)
    overrides = {}
    for name, kind in (("r_min", float), ("r_max", float), ("c", float), ("grid_points", int)):
        key = f"contrast.{name}"
        if key in kv:
            overrides[name] = _coerce(key, kv.pop(key), kind)
    args["spec_overrides"] = overrides
    if kv:
        raise ConfigError(f"unknown configuration keys: {sorted(kv)}")
    try:
        return StudyConfig(**args)
    except ValueError as exc:
        raise ConfigError(str(exc))


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def resolve_threads(cfg):
    env = os.environ.get(THREADS_ENV)
    if env is None or not env.strip():
        return cfg.threads
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
    return n


def replicate_pattern(cfg, wi, rep):
    """The pattern of replicate ``rep`` on window ``wi``."""
    scfg = SamplerConfig(
        seed=derive_seed(cfg.master_seed, wi, rep),
        trunc_mass=cfg.trunc_mass,
        max_modes=cfg.max_modes,
    )
    return sample_dpp(cfg.model, cfg.windows[wi], scfg)


def fit_replicate(cfg, wi, rep, pattern, method):
    """Fit ``method`` to a replicate pattern; returns ``theta_hat``."""
    opts = cfg.fit_options(derive_seed(cfg.master_seed, wi, METHODS.index(method), rep))
    report = fit(pattern, cfg.model.family, cfg.spec_for(cfg.windows[wi], method), opts)
    return np.asarray(report.theta_hat, dtype=float)


def _replicate(args):
    """Simulate one pattern and fit every method; errors become messages."""
    cfg, wi, rep = args
    p = len(cfg.model.theta)
    out = {}
    try:
        pattern = replicate_pattern(cfg, wi, rep)
    except DppfitError as exc:
        return {m: (np.full(p, np.nan), f"simulate: {exc}") for m in cfg.methods}
    for method in cfg.methods:
        try:
            out[method] = (fit_replicate(cfg, wi, rep, pattern, method), "")
        except (DppfitError, ValueError) as exc:
            out[method] = (np.full(p, np.nan), f"{type(exc).__name__}: {exc}")
    return out


def run_study(cfg, threads=None):
    """Run the study; ``threads`` overrides the config and environment."""
    n_workers = threads if threads is not None else resolve_threads(cfg)
    tasks = [(cfg, wi, r) for wi in range(len(cfg.windows)) for r in range(cfg.replicates)]
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=1))
    else:
        results = [_replicate(t) for t in tasks]

    theta0 = np.asarray(cfg.model.theta)
    cells = []
    for wi, w in enumerate(cfg.windows):
        block = results[wi * cfg.replicates : (wi + 1) * cfg.replicates]
        for method in cfg.methods:
            est = np.array([b[method][0] for b in block])
            errs = tuple(b[method][1] for b in block)
            cell = CellResult(w, method, theta0, est, errs)
            if cell.n_fail > MAX_FAIL_FRACTION * cfg.replicates:
                first = next(e for e in errs if e)
                raise StudyAborted(
                    f"{cell.n_fail} of {cfg.replicates} replicates failed for "
                    f"method {method} on {w}; first error: {first}"
                )
            cells.append(cell)
    return StudyResult(cfg, tuple(cells))


def _fmt(x):
    return "" if not np.isfinite(x) else repr(float(x))


def write_study(result, out_dir):
    """Write ``table.csv``, ``estimates.csv`` and ``hist.csv`` to ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    cfg = result.config
    names = cfg.model.family.param_names
    multi = len(names) > 1
    paths = {k: os.path.join(out_dir, f"{k}.csv") for k in ("table", "estimates", "hist")}

    with open(paths["table"], "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        head = ["window", "method"] + (["param"] if multi else [])
        wr.writerow(head + [f"{names[0]}_true" if not multi else "true", "mse", "bias", "var", "n_fail"])
        for c in result.cells:
            for k, name in enumerate(names):
                lead = [str(c.window), c.method] + ([name] if multi else [])
                wr.writerow(
                    lead
                    + [_fmt(c.theta_true[k]), _fmt(c.mse[k]), _fmt(c.bias[k]), _fmt(c.var[k]), c.n_fail]
                )

    with open(paths["estimates"], "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["window", "method", "replicate"] + list(names) + ["error"])
        for c in result.cells:
            for r, (row, err) in enumerate(zip(c.estimates, c.errors)):
                wr.writerow([str(c.window), c.method, r] + [_fmt(v) for v in row] + [err])

    with open(paths["hist"], "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["window", "method"] + (["param"] if multi else []) + ["bin_lo", "bin_hi", "count"])
        for c in result.cells:
            good = c.estimates[c.ok]
            for k, name in enumerate(names):
                if len(good) == 0:
                    continue
                counts, edges = np.histogram(good[:, k], bins=cfg.hist_bins)
                for lo, hi, n in zip(edges[:-1], edges[1:], counts):
                    lead = [str(c.window), c.method] + ([name] if multi else [])
                    wr.writerow(lead + [_fmt(lo), _fmt(hi), int(n)])
    return paths


@dataclass(frozen=True, eq=False)
class NormalityRow:
    window: Window
    method: str
    n: int
    ad_statistic: float
    ad_critical_1pct: float
    rejected_1pct: bool
    empirical_var: float
    theoretical_var: float
    variance_ratio: float
    smoothed_var: float
    smoothed_ratio: float
    hist_counts: np.ndarray
    hist_edges: np.ndarray


def normality_report(result, model=None, min_replicates=100, bins=None, n_samples=200_000, seed=0):
    """Gaussianity diagnostics per cell (first shape parameter).

    The standardized estimates ``sqrt(|D|) (theta_hat - theta0)`` are tested
    with Anderson-Darling (normal with estimated mean and variance), and
    ``|D| Var(theta_hat)`` is compared with the sandwich covariance at the
    true model. For g cells the covariance at the Stoyan bandwidth of the
    true intensity is reported as well (``smoothed_var``); it accounts for
    the variance removed by smoothing. Pass ``model=False`` to skip the
    covariance computations.
    """
    cfg = result.config
    model = cfg.model if model is None else model
    bins = bins or cfg.hist_bins
    rows = []
    for c in result.cells:
        est = c.estimates[c.ok][:, 0]
        if len(est) < min_replicates:
            raise ValueError(f"normality diagnostics need >= {min_replicates} estimates, got {len(est)}")
        vol = c.window.volume
        z = np.sqrt(vol) * (est - c.theta_true[0])
        if np.ptp(z) == 0:
            raise NormalityUndefined(f"estimates are constant for {c.method} on {c.window}")
        ad = stats.anderson(z, dist="norm")
        crit = float(ad.critical_values[list(ad.significance_level).index(1.0)])
        emp = float(vol * np.var(est))
        theo = smooth = float("nan")
        if model is not False:
            spec = cfg.spec_for(c.window, c.method)
            theo = float(asymptotic_covariance(model, spec, n_samples, seed).covariance[0, 0])
            if c.method == "g":
                b = cfg.bandwidth_constant / np.sqrt(model.rho)
                smooth = float(
                    asymptotic_covariance(
                        model, spec, n_samples, seed, bandwidth=b, kernel=SmoothingKernel(cfg.kernel)
                    ).covariance[0, 0]
                )
        counts, edges = np.histogram(z, bins=bins)
        rows.append(
            NormalityRow(
                c.window,
                c.method,
                len(est),
                float(ad.statistic),
                crit,
                bool(ad.statistic > crit),
                emp,
                theo,
                emp / theo,
                smooth,
                emp / smooth,
                counts,
                edges,
            )
        )
    return rows


def write_normality(rows, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(
            ["window", "method", "n", "ad_statistic", "ad_critical_1pct", "rejected_1pct",
             "empirical_var", "theoretical_var", "variance_ratio", "smoothed_var", "smoothed_ratio"]
        )
        for r in rows:
            wr.writerow(
                [str(r.window), r.method, r.n, _fmt(r.ad_statistic), _fmt(r.ad_critical_1pct),
                 int(r.rejected_1pct), _fmt(r.empirical_var), _fmt(r.theoretical_var),
                 _fmt(r.variance_ratio), _fmt(r.smoothed_var), _fmt(r.smoothed_ratio)]
            )
