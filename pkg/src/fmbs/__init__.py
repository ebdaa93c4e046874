"""Finite mixtures of Birnbaum-Saunders distributions: densities, ECM fitting,
standard errors, bootstrap tests and simulation studies."""

__version__ = "0.1.0"

from .errors import (DegenerateComponentError, DomainError, HazardUnderflowWarning,
                     InitializationWarning, NumericalError, SingularInformationError,
                     UnsupportedConfigurationError)
from .bs import (BsParams, a_fn, alpha_from_mode, bessel_k_ratio, bs_cdf, bs_logpdf, bs_mean,
                 bs_mode, bs_moment, bs_pdf, bs_pdf_mode_param, bs_quantile, bs_sample, bs_sf,
                 bs_var, capital_a_fn, log_bs_pdf)
from .mixture import (MixtureParams, hazard_limit, mix_cdf, mix_hazard, mix_logpdf, mix_median,
                      mix_modes, mix_moment, mix_pdf, mix_sample, mix_stationary_points,
                      mix_survival, stress_strength)
from .initialization import (InitStrategy, Partition, kbumps_partition, kmeans_partition,
                             kmedoids_partition, make_partition, moment_init, quantile_partition)
from .em import EmConfig, FitResult, aitken_stop, convergence_rate, fit, fit_from_params, loglik
from .inference import (BootstrapSE, BootstrapTestResult, aic_bic, bootstrap_lrt, bootstrap_se,
                        info_matrix, parameter_names, score_vector, score_vectors,
                        standard_errors, wald_ci)
from .study import (SCENARIO_1, SCENARIO_2, Scenario, SimulationReport, reports_to_csv,
                    reports_to_json, run_cell, run_grid)
