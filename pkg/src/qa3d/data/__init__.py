from .dataset import CorpusError, QASample, augment_question, expand_train_samples, load_dataset, write_dataset
from .proposals import ProposalFormatError, ProposalSet, load_proposals, write_proposals
from .synthetic import GeneratorConfig, SceneObject, derive_answers, generate_synthetic_dataset
from .vocab import EmbeddingTable, Vocabulary, build_vocabulary

__all__ = [
    "CorpusError",
    "EmbeddingTable",
    "GeneratorConfig",
    "ProposalFormatError",
    "ProposalSet",
    "QASample",
    "SceneObject",
    "Vocabulary",
    "augment_question",
    "build_vocabulary",
    "derive_answers",
    "expand_train_samples",
    "generate_synthetic_dataset",
    "load_dataset",
    "load_proposals",
    "write_dataset",
    "write_proposals",
]
