"""Information-theoretic privacy and utility metrics for local differential privacy protocols."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .estimate import MetricEstimate
from .protocol import (Protocol, ProtocolAnalysis, PopulationSample, analyze_structure,
                       build_protocol, compose, ldp_level, mixture, product, pushforward,
                       simulate_population, worst_case_privacy, worst_case_privacy_empirical)
from .prior import (DirichletPrior, McConfig, baseline_secret_entropy, c_mu, digamma, jeffreys,
                    log_multivariate_beta, prior_differential_entropy, sample)
from .population import (LimitPrediction, TradeoffBounds, asymptotic_utility, avg_privacy,
                         effective_participation, limit_predictions, population_report,
                         tradeoff_bounds)
from .finite import (EnumerationBudget, digit_utility, distribution_utility, entropy_tallies,
                     mutual_info_reports_vs_p, mutual_info_reports_vs_tallies,
                     mutual_info_secrets_vs_p, tally_utility)
from .catalog import (UeParams, blh_matrix, deterministic, grr, grr_asymptotic_utility_closed,
                      grr_avg_privacy_closed, grr_mutual_info_closed, identity, local_hash, oue,
                      parity, rappor_basic, ue_avg_privacy_closed, ue_mutual_info_closed,
                      unary_encoding)
from .posterior import (DirichletMixture, PosteriorDensity, grr_posterior, normalize_mc,
                        posterior_dirichlet_mixture, posterior_moments, posterior_unnormalized)
