"""
A small simulation study
========================

Bias, RMSE, Monte Carlo sd, mean information-based SE and Wald coverage for
the poorly separated scenario, at two sample sizes and with all three
starting partitions. Replicates are kept low so this runs in seconds; the
``fmbs study`` command runs larger grids.
"""

import sys

import fmbs
from fmbs import SCENARIO_1

reports = fmbs.run_grid([SCENARIO_1], [100, 500], ["kbumps", "kmeans", "kmedoids"],
                        replicates=50, seed=0)
for rep in reports:
    print(f"\nn={rep.n} {rep.strategy}  (failed fits: {rep.n_failed})")
    for k, name in enumerate(rep.names):
        print(f"  {name:7s} bias {rep.bias[k]:+.4f}  rmse {rep.rmse[k]:.4f}  "
              f"mc sd {rep.mc_sd[k]:.4f}  im se {rep.mean_im_se[k]:.4f}  cov {rep.cov[k]:.2f}")

# %%
# The same numbers as CSV, one row per cell and parameter.
fmbs.reports_to_csv(reports[:1], sys.stdout)
