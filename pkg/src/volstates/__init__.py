"""volstates: multi-state volatility regime decoding for return series.

The pipeline turns a univariate series into binary excursion codes over a
ladder of quantile thresholds, segments each code by a penalized
recurrence-time search, aggregates the per-threshold decodes by weighted
hierarchical clustering, and offers HMM baselines, pattern-matching
forecasts, and information-flow networks on top of the decoded states.
"""

from .aggregation import (DEFAULT_LEVELS, DENSE_TAIL_LEVELS, ClusterResult,
                          EmissionMatrix, ThresholdLadder, cluster_states,
                          cut_tree, encode_decode, rank_features,
                          segmentation_evidence, weighted_silhouette,
                          weighted_ward_linkage)
from .encoding import (ExcursionProcess, RecurrenceSequence, ReturnSeries,
                       bits_from_gaps, encode_excursion, encode_one_sided,
                       log_returns, quantile_threshold, recurrence_times)
from .errors import (EmptySegmentError, InsufficientHistoryError,
                     InvalidInputError, InvalidThresholdError, NoModelError,
                     NoSeparatingThresholdError, VolstatesError)
from .forecasting import (ForecastConfig, ForecastErrors, bin_masses,
                          forecast_errors, isotonic_repair,
                          match_and_forecast, obs_prob_nonparam,
                          rolling_forecast)
from .hmm import (HmmParams, ImpossibleObservationError, baum_welch,
                  decoding_error_rate, forward_backward, log_likelihood,
                  viterbi)
from .model_selection import (DecodeResult, LossConfig, estimate_emission,
                              loss, max_min_threshold, optimize_theta)
from .network import (SymbolSeries, TEMatrix, block_max_summarize,
                      build_network, cluster_dissimilarity, dissimilarity,
                      flow_matrix, node_strengths, reorder_matrix,
                      simple_binning, te_classic, te_lag_lead,
                      to_clock_symbols)
from .segmentation import (SearchParams, StateAssignment, relabel_by_emission,
                           search_segments, second_level_code,
                           segments_for_threshold)
from .simulation import SimSpec, generate

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_LEVELS", "DENSE_TAIL_LEVELS", "ClusterResult", "EmissionMatrix",
    "ThresholdLadder", "cluster_states", "cut_tree", "encode_decode",
    "rank_features", "segmentation_evidence", "weighted_silhouette",
    "weighted_ward_linkage",
    "ExcursionProcess", "RecurrenceSequence", "ReturnSeries",
    "bits_from_gaps", "encode_excursion", "encode_one_sided", "log_returns",
    "quantile_threshold", "recurrence_times",
    "EmptySegmentError", "InsufficientHistoryError", "InvalidInputError",
    "InvalidThresholdError", "NoModelError", "NoSeparatingThresholdError",
    "VolstatesError",
    "ForecastConfig", "ForecastErrors", "bin_masses", "forecast_errors",
    "isotonic_repair", "match_and_forecast", "obs_prob_nonparam",
    "rolling_forecast",
    "HmmParams", "ImpossibleObservationError", "baum_welch",
    "decoding_error_rate", "forward_backward", "log_likelihood", "viterbi",
    "DecodeResult", "LossConfig", "estimate_emission", "loss",
    "max_min_threshold", "optimize_theta",
    "SymbolSeries", "TEMatrix", "block_max_summarize", "build_network",
    "cluster_dissimilarity", "dissimilarity", "flow_matrix",
    "node_strengths", "reorder_matrix", "simple_binning", "te_classic",
    "te_lag_lead", "to_clock_symbols",
    "SearchParams", "StateAssignment", "relabel_by_emission",
    "search_segments", "second_level_code", "segments_for_threshold",
    "SimSpec", "generate",
    "__version__",
]
