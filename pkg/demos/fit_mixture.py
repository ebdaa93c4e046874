"""
Fitting a two-component mixture
===============================

Draw a sample from a well-separated mixture, fit it with the ECM algorithm
started from the k-bumps partition, and look at the standard errors.
"""

import numpy as np

import fmbs

truth = fmbs.MixtureParams.from_theta([0.8, 0.25, 0.25, 1.0, 5.0])
rng = np.random.default_rng(1)
y = fmbs.mix_sample(1000, truth, rng)

# %%
# The fit. Components come back ordered by beta.
res = fmbs.fit(y, 2)
print(res.params)
print(f"loglik {res.loglik:.4f} after {res.iterations} cycles, rate {res.rate_r:.3f}")

# %%
# Standard errors from the empirical information matrix, and Wald intervals.
info = fmbs.info_matrix(y, res.params)
se = fmbs.standard_errors(info)
ci = fmbs.wald_ci(res.params.theta(), se)
for name, est, s, (lo, hi), t in zip(fmbs.parameter_names(2), res.params.theta(), se, ci,
                                     truth.theta()):
    print(f"{name:7s} {est:8.4f}  se {s:.4f}  [{lo:.4f}, {hi:.4f}]  truth {t}")

# %%
# A quick look at the fitted curves: modes, median and the hazard's limit.
print("modes", np.round(fmbs.mix_modes(res.params), 4))
print("median", round(fmbs.mix_median(res.params), 4))
grid = np.array([1.0, 5.0, 20.0, 1e4])
print("hazard", np.round(fmbs.mix_hazard(grid, res.params), 4), "->",
      round(fmbs.hazard_limit(res.params), 4))
