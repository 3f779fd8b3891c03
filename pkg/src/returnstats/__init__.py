"""Return-time and cluster statistics of chaotic maps on shrinking targets.

Simulation of expanding interval maps, a hyperbolic torus map, coupled map
lattices and symbolic regenerative processes, together with the compound
Poisson / Polya-Aeppli / compound binomial limit laws their return-time
statistics converge to, and estimators + goodness-of-fit tooling to compare
the two.
"""

from .distributions import (ClusterSizeDist, CompoundSpec, DiscreteDistribution,
                            TruncationError, compound_binomial_pmf,
                            compound_poisson_pmf, empirical_distribution,
                            generating_function_eval, polya_aeppli_pmf,
                            sample_compound_poisson)
from .dynamics import (CmlSpec, CmlSystem, IntervalMap, LinearInterval,
                       LinearMod1System, OrbitState, PiecewiseSystem,
                       SingularPointError, SinePerturbedInterval,
                       TorusAffineSystem, derivative_along, orbit_visitor,
                       sample_stationary, step)
from .estimators import (ClusterStats, ReturnTimeRecord, cluster_statistics,
                         count_visits, counting_distribution, entry_time_ratio,
                         r2_overlap, return_time_records)
from .regenerative import (RegenSpec, SymbolStream, generate_stationary,
                           level_measure, regen_cluster_stats)
from .cml_theory import (CmlPrediction, DiagonalDensity, ExpansionWarning,
                         alpha_hat_integral, cml_prediction)
from .stats import (AlphaSequences, GofReport, chi_square_gof,
                    lambda_from_alpha_hat, total_variation)
from .targets import (Ball, DiagonalStrip, MeasureEstimate, TargetSet,
                      TorusStrip, contains, measure)
from .config import ExperimentConfig
from .rngstreams import trial_rng, trial_seed_sequence

__version__ = "0.1.0"
