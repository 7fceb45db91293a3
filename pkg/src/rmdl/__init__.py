"""Random multimodel deep learning.

Train an ensemble of randomly sampled DNN, CNN and RNN classifiers, each
with its own independently drawn architecture and optimizer, and combine
their predictions by majority vote.  Everything runs on the CPU in plain
float64; given a master seed, results are bit-reproducible.
"""
from .data import DataError, load_mnist_idx, load_text_corpus, train_valid_split
from .ensemble import (ArchitectureSpec, CheckpointError, Ensemble,
                       EnsembleConfig, FeatureSpace, SamplingRanges,
                       TrainingError, build_model, load_checkpoint,
                       majority_vote_binary, majority_vote_multiclass,
                       model_seed, predict_ensemble, predict_proba,
                       sample_architecture, save_checkpoint, train_ensemble)
from .kernels import backend_name
from .metrics import MicroScores, accuracy, confusion_matrix, micro_scores
from .tensor import ShapeError

__version__ = "0.1.0"

__all__ = [
    "ArchitectureSpec", "CheckpointError", "DataError", "Ensemble",
    "EnsembleConfig", "FeatureSpace", "MicroScores", "SamplingRanges",
    "ShapeError", "TrainingError", "accuracy", "backend_name", "build_model",
    "confusion_matrix", "load_checkpoint", "load_mnist_idx",
    "load_text_corpus", "majority_vote_binary", "majority_vote_multiclass",
    "micro_scores", "model_seed", "predict_ensemble", "predict_proba",
    "sample_architecture", "save_checkpoint", "train_ensemble",
    "train_valid_split",
]
