"""Topic-guided answer generation for audio-visual scene-aware dialog."""
from .corpus import Dialog, Vocabulary, build_vocabulary, load_dataset, tokenize
from .model import AnswerGenerator, ModelConfig
from .topics import SeedLexicon, TopicModelState, infer_topics, train_lda
from .training import TrainConfig, train

__version__ = "0.1.0"
