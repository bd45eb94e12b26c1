"""Bayesian bipartite record linkage with joint causal-effect estimation.

Two files — one holding outcomes, one holding covariates and a binary
treatment — are linked through a mixture model over field-agreement vectors
while an outcome model feeds evidence back into the linkage, so posterior
treatment-effect summaries carry the linkage uncertainty.
"""

from .causal import (AccuracyReport, AtelPosterior, atel_draw, compute_mse,
                     compute_ppv_npv, impute_counterfactuals)
from .comparators import ComparisonStore, build_comparisons, levenshtein_similarity
from .experiments import MatrixSpec, run_experiment_matrix
from .linkage import (NO_LINK, LinkageState, MixtureParams, gibbs_update_z,
                      log_prior_z, posterior_mode_links, sample_mixture_params,
                      sample_z_chain)
from .outcomes import (NoLinkParams, ParametricOutcomeParams, PositivityError,
                       PropensityFit, SplineOutcomeParams, fit_propensity,
                       outcome_log_likelihood_ratio, spline_design_row)
from .records import (CovariateRecord, Hyperparameters, LinkFieldSpec,
                      LinkSchema, OutcomeRecord, RunConfig, SplineConfig,
                      load_config, load_file_a, load_file_b, load_link_schema,
                      write_file_a, write_file_b)
from .sampler import ChainError, McmcTrace, run_chain, run_two_stage_pipeline
from .simgen import (SimConfig, TruthBundle, generate_population,
                     inject_missing_outcomes, perturb_identifiers, sim_schema)

__version__ = "0.1.0"
