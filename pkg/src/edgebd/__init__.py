"""Sampling Bayesian-network structures with an edge birth-and-death process."""

from .graph import Dag, transitive_closure
from .data import (Dataset, GenerativeNetwork, load_csv, write_csv, generate, random_cpts,
                   fig1_dag, random_dag, surrogate_benchmark)
from .score import ScoreModel, parse_prior
from .trace import ChainTrace
from .bd_sampler import Move, BirthRateTable, init_rates, step, apply_move, run
from .mh_sampler import MhChain, mh_propose, mh_step, mh_run, mh_transition_matrix
from .exact import (ExactPosterior, enumerate_dags, exact_posterior, exact_edge_marginals,
                    generator_matrix, generator_stationarity_check, pairwise_balance_residual)
from .estimators import (EdgeProbEstimate, edge_probabilities, pool_estimates, error_table,
                         score_series, running_best, best_graph, graph_frequencies)

__version__ = "0.1.0"
