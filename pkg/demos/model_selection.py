"""
How many components?
====================

Compare G = 1..3 by AIC and BIC, then check G = 1 against G = 2 with the
parametric bootstrap likelihood ratio test.
"""

import numpy as np

import fmbs

truth = fmbs.MixtureParams.from_theta([0.6, 0.25, 0.5, 0.5, 1.5])
y = fmbs.mix_sample(300, truth, np.random.default_rng(7))

for g in (1, 2, 3):
    res = fmbs.fit(y, g)
    aic, bic = fmbs.aic_bic(res.loglik, res.n_params, res.n_obs)
    print(f"G={g}  loglik {res.loglik:9.3f}  AIC {aic:8.3f}  BIC {bic:8.3f}")

# %%
# The likelihood ratio statistic has no chi-square reference here, so its
# null distribution is simulated from the fitted one-component model.
# B is kept small so the demo runs in well under a minute.
test = fmbs.bootstrap_lrt(y, 1, 2, B=39, seed=3)
print(f"LR = {test.stat_obs:.3f}, bootstrap p = {test.p_value:.3f} (B = {test.B})")
