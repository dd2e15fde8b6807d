"""Answer-aware question generation with clue prediction and copy supervision."""

from .autodiff import ParamStore, Tensor
from .config import ModelConfig
from .corpus import (
    AnnotatedExample,
    AnnotatedToken,
    ReducedTargetVocab,
    Vocabulary,
    build_reduced_target_vocab,
    build_vocabulary,
    load_corpus,
    stopword_set,
    tier_of,
)
from .labeling import LabeledExample, label_corpus, label_example
from .model import QgModel
from .training import compute_losses, train

__all__ = [
    "AnnotatedExample",
    "AnnotatedToken",
    "LabeledExample",
    "ModelConfig",
    "ParamStore",
    "QgModel",
    "ReducedTargetVocab",
    "Tensor",
    "Vocabulary",
    "build_reduced_target_vocab",
    "build_vocabulary",
    "compute_losses",
    "label_corpus",
    "label_example",
    "load_corpus",
    "stopword_set",
    "tier_of",
    "train",
]
