"""Bayesian de-mixing of a binary graph into latent Poisson blockmodel
subnetworks, with held-out link prediction and planted-overlap experiments.
"""

from .version import __version__
from .graph_io import (
    EMPTY_HELDOUT,
    GraphParseError,
    HeldoutSet,
    ObservedGraph,
    SplitError,
    parse_edge_list,
    split_holdout,
    write_graph,
)
from .sbm_kernel import (
    Assignment,
    BlockStats,
    Hyperparams,
    block_stats,
    collapsed_log_likelihood,
    crp_log_density,
    gibbs_sweep_z,
    mh_update_hyperparams,
    sample_crp,
    sample_eta,
)
from .superposition import (
    ChainStreams,
    EnsembleState,
    SweepConfig,
    full_sweep,
    resample_edges,
    run_chain,
    sample_total_count,
    split_count,
    total_rate,
)
from .prediction_eval import (
    PredictionTable,
    SimilarityVectors,
    auc,
    impute_heldout,
    predict_link_prob,
    same_block_vectors,
    structure_auc,
)
from .synth_gen import (
    GroundTruth,
    PlantedModel,
    experiment_grid,
    generate,
    planted_params,
    shift_for_lambda,
)
from .trace import ChainTrace, TraceFormatError, TraceRecord, read_trace, write_trace

__all__ = [
    "__version__",
    "EMPTY_HELDOUT", "GraphParseError", "HeldoutSet", "ObservedGraph",
    "SplitError", "parse_edge_list", "split_holdout", "write_graph",
    "Assignment", "BlockStats", "Hyperparams", "block_stats",
    "collapsed_log_likelihood", "crp_log_density", "gibbs_sweep_z",
    "mh_update_hyperparams", "sample_crp", "sample_eta",
    "ChainStreams", "EnsembleState", "SweepConfig", "full_sweep",
    "resample_edges", "run_chain", "sample_total_count", "split_count",
    "total_rate",
    "PredictionTable", "SimilarityVectors", "auc", "impute_heldout",
    "predict_link_prob", "same_block_vectors", "structure_auc",
    "GroundTruth", "PlantedModel", "experiment_grid", "generate",
    "planted_params", "shift_for_lambda",
    "ChainTrace", "TraceFormatError", "TraceRecord", "read_trace",
    "write_trace",
]
