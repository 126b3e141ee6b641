"""Equivalence between contractive and unitary recurrent networks:
explicit 2n-state constructions, converse witnesses, and training
experiments on synthetic slow systems."""

from .equivalence import (
    EmbeddingRecord,
    EquivalenceReport,
    MismatchReport,
    converse_relu_witness,
    dof_count,
    one_state_urnn_gap,
    sigmoid_mismatch_witness,
    unitary_embedding,
    verify_equivalence,
)
from .linsys import LinearSystem, ctrb_obsv, fixed_point, linearize, transfer_function
from .rnn import (
    ContractionCertificate,
    RnnParams,
    Sequence,
    bptt_gradients,
    certify_contraction,
    forward,
    mse,
    r_squared,
    rnn_map,
    similarity_transform,
)
from .synth import Dataset, SystemSpec, bias_calibrate, generate_dataset, generate_system
from .training import TrainConfig, TrainReport, evaluate, oracle_optimal_r2, train

__version__ = "0.1.0"

__all__ = [
    "ContractionCertificate",
    "Dataset",
    "EmbeddingRecord",
    "EquivalenceReport",
    "LinearSystem",
    "MismatchReport",
    "RnnParams",
    "Sequence",
    "SystemSpec",
    "TrainConfig",
    "TrainReport",
    "bias_calibrate",
    "bptt_gradients",
    "certify_contraction",
    "converse_relu_witness",
    "ctrb_obsv",
    "dof_count",
    "evaluate",
    "fixed_point",
    "forward",
    "generate_dataset",
    "generate_system",
    "linearize",
    "mse",
    "one_state_urnn_gap",
    "oracle_optimal_r2",
    "r_squared",
    "rnn_map",
    "sigmoid_mismatch_witness",
    "similarity_transform",
    "train",
    "transfer_function",
    "unitary_embedding",
    "verify_equivalence",
]
