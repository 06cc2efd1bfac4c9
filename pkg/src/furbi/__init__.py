"""Dependent nonparametric mixtures with full-range borrowing of information.

The package covers prior dependence quantification (tie and hyper-tie
probabilities, observable and measure-level correlations), posterior MCMC
for partially exchangeable mixture models (marginal and conditional
samplers), and evaluation pipelines for density estimation and
missing-data clustering at desk scale.
"""

from .base_measures import (BaseMeasure, ConditionalKind, ConditionalLaw,
                            G0Family, NIGParams, build_corr_matrix, conditional,
                            g0_density, p0_density, sample_corr_matrix, sample_pair)
from .blocked import BlockedChain, blocked_gibbs_equal_jumps, make_blocked_chain
from .dependence import (DependenceReport, Method, beta_closed, corr_measures,
                         corr_observables, gamma_closed, gamma_numeric,
                         hdp_dependence, mc_dependence_oracle)
from .evaluate import (DensityGrid, MetricReport, alcpo, cpo, ess, miae, mlcpo,
                       rand_index, vi_distance, vi_point_estimate)
from .ferguson_klass import FKContext, FKDraw, ferguson_klass_draw
from .latent import (HyperTieState, LabelArrays, enumerate_structures,
                     labels_to_structure, structure_count, structure_mass,
                     structure_to_labels, validate)
from .levy import (LevyFamily, LevySpec, log_tau, psi, psi_b, sample_u_exact_gamma,
                   tau)
from .models import (Dataset, MCMCConfig, ModelConfig, Runner, build,
                     gen_finance_synthetic, gen_missing_data, gen_missing_dataset,
                     gen_three_group, gen_two_group, missing_pattern_split,
                     multi_group_extension, standardize)
from .quadrature import QuadratureConfig, QuadratureError, integrate_posneg_2d
from .samplers import (GammaPrior, HyperPriors, MarginalChain, gibbs_sweep_mixture,
                       make_two_sample_chain, predictive_weights_conditional,
                       sample_first_pair, sample_within_pair, update_u)
from .special import bvn_cdf, bvn_rectangle, hyp3f2_unit

__version__ = "0.1.0"
