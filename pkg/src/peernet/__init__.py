"""Simulation and estimation of network peer effects.

Linear-in-means and linear-in-sums outcome models on random graph
ensembles, OLS and 2SLS estimators with conditioning diagnostics, trace
moments of the row-normalized adjacency, and identification checks for
block models and graphons.
"""

from .dgp import Dataset, LimParams, LisParams, simulate_lim, simulate_lis
from .errors import (ConfigError, FormatError, InvalidSpecError, NumericError, SizeError,
                     SpectralValidityError)
from .estimators import Estimate, ols_lim, ols_lim_fwl, tsls_lim, tsls_lis
from .graphs import (CycleCensus, EnsembleSpec, Graph, cycle_census, gen_bipartite_union,
                     gen_clique_union, gen_erdos_renyi, gen_graphon, gen_sbm, generate,
                     spectral_radius)
from .identify import (IdentificationVerdict, SbmSpec, StepGraphon, degree_codegree_check,
                       graphon_moments, relevance_check, sbm_identification)
from .operators import MomentReport, RowNormOp, apply_word, frobenius_sq, make_word, moment_report, trace_moment

__version__ = "0.1.0"
