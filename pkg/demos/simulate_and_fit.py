"""
Simulating a Gaussian DPP and fitting it by minimum contrast
============================================================

A repulsive pattern is drawn on the unit square, its K function and
pair correlation are estimated, and the range parameter is recovered
with both contrasts. The sandwich covariance gives a rough error bar.
"""

import numpy as np

from dppfit import (
    KernelModel,
    SamplerConfig,
    Window,
    asymptotic_covariance,
    default_spec,
    fit,
    g_hat,
    g_theory,
    sample_dpp,
    validate,
)

# rho = 100 points per unit area, alpha = 0.03 (the largest alpha allowed
# at this intensity is 1 / (10 sqrt(pi)) = 0.0564)
model = KernelModel.gaussian(100.0, 0.03)
report = validate(model)
print(f"valid: {report.ok}, largest spectral density {report.spectral_max:.4f}")

window = Window.cube(2.0)
pattern = sample_dpp(model, window, SamplerConfig(seed=1))
print(f"{pattern.n} points, expected {model.rho * window.volume:.0f}")

# empirical pair correlation against the model curve
t = np.linspace(0.01, 0.1, 10)
g_emp = g_hat(pattern, t).values
for ti, ge, gt in zip(t, g_emp, g_theory(model, t)):
    print(f"t={ti:.3f}  g_hat={ge:.3f}  g={gt:.3f}")

# minimum contrast on K and on g, with default settings
for stat in ("K", "g"):
    spec = default_spec(stat, window)
    rep = fit(pattern, "gaussian", spec)
    cov = asymptotic_covariance(model, spec, n_samples=50_000, seed=0).covariance[0, 0]
    sd = np.sqrt(cov / window.volume)
    print(f"{stat}: alpha_hat = {rep.theta_hat[0]:.4f}  (asymptotic sd {sd:.4f})")
