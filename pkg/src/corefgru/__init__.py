"""Recurrent reading comprehension with coreference-biased recurrence.

The package bundles a small float64 reverse-mode autodiff core, a GRU
variant whose recurrent state can jump to a token's most recent coreferent
antecedent, a gated-attention reader built from stacks of such layers,
a synthetic entity-tracking task generator with gold coreference, and a
deterministic training/ablation harness.
"""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .cgru import (
    CGRUParams,
    GRUParams,
    StepInput,
    cell_step,
    compute_alpha,
    gru_cell_step,
    init_cgru_params,
    init_gru_params,
    run_bidirectional,
    run_direction,
    run_memory_mode,
)
from .coref import (
    NULL,
    AntecedentMap,
    CorefClusters,
    MentionSpan,
    TokenizedDocument,
    build_antecedents,
    cap_clusters,
    concat_passages,
    corrupt_annotations,
    exact_match_annotator,
    filter_clusters,
    normalize_clusters,
)
from .data import Candidate, RCInstance, read_config, read_jsonl, write_config, write_jsonl
from .errors import (
    CorefGRUError,
    CorruptCheckpoint,
    DivergenceError,
    IncompatibleCheckpoint,
    InvalidShape,
    LabelError,
    MissingMention,
    NonDeterministic,
    OrderViolation,
    OverlapError,
    RangeError,
    SpecError,
    UnsupportedOp,
    VersionError,
)
from .gradcheck import GradCheckReport, grad_check
from .reader import (
    Batch,
    CorruptionSpec,
    ReaderConfig,
    Vocab,
    attention_sum_answer,
    build_vocab,
    gated_attention,
    init_reader_params,
    make_batch,
    predict_batch,
    reader_forward,
)
from .tape import Parameters, Tape, Tensor
from .taskgen import GenSpec, generate, oracle_answer, split_instances
from .training import (
    MetricsRow,
    TrainConfig,
    TrainResult,
    evaluate,
    run_ablation,
    train,
    write_metrics_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AntecedentMap",
    "Batch",
    "CGRUParams",
    "Candidate",
    "Checkpoint",
    "CorefClusters",
    "CorefGRUError",
    "CorruptCheckpoint",
    "CorruptionSpec",
    "DivergenceError",
    "GRUParams",
    "GenSpec",
    "GradCheckReport",
    "IncompatibleCheckpoint",
    "InvalidShape",
    "LabelError",
    "MentionSpan",
    "MetricsRow",
    "MissingMention",
    "NULL",
    "NonDeterministic",
    "OrderViolation",
    "OverlapError",
    "Parameters",
    "RCInstance",
    "RangeError",
    "ReaderConfig",
    "SpecError",
    "StepInput",
    "Tape",
    "Tensor",
    "TokenizedDocument",
    "TrainConfig",
    "TrainResult",
    "UnsupportedOp",
    "VersionError",
    "Vocab",
    "attention_sum_answer",
    "build_antecedents",
    "build_vocab",
    "cap_clusters",
    "cell_step",
    "compute_alpha",
    "concat_passages",
    "corrupt_annotations",
    "evaluate",
    "exact_match_annotator",
    "filter_clusters",
    "gated_attention",
    "generate",
    "grad_check",
    "gru_cell_step",
    "init_cgru_params",
    "init_gru_params",
    "init_reader_params",
    "load_checkpoint",
    "make_batch",
    "normalize_clusters",
    "oracle_answer",
    "predict_batch",
    "read_config",
    "read_jsonl",
    "reader_forward",
    "run_ablation",
    "run_bidirectional",
    "run_direction",
    "run_memory_mode",
    "save_checkpoint",
    "split_instances",
    "train",
    "write_config",
    "write_jsonl",
    "write_metrics_csv",
]
