"""Seed-matching weak supervision with deletion-based debiasing.

Pipeline pieces: seed-match pseudo-labels, corrupt the matched documents
(seed deletion or random deletion), train a hashed bag-of-words softmax
classifier, select the most confident pseudo-labels, and self-train on
the remaining pool. Includes a matched-statistics random-flipping noise
synthesizer and exact/Monte-Carlo calculators for the seed-deletion rate
achieved by random deletion.
"""

from .analysis import (
    MetricsRecord,
    f1_metrics,
    seed_deletion_rate,
    seed_deletion_rate_fixed_count,
    seed_deletion_rate_mc,
    seed_deletion_rate_sweep,
)
from .corpus import (
    ClassSet,
    Corpus,
    Document,
    SeedLexicon,
    load_corpus,
    load_seed_lexicon,
    save_corpus,
    save_seed_lexicon,
    tokenize,
)
from .corrupt import (
    CorruptedDataset,
    CorruptedDocument,
    CorruptionSpec,
    corrupt_dataset,
    deletion_count,
    random_delete,
    seed_delete,
)
from .model import (
    ConfidenceScore,
    FeatureVector,
    LinearTextClassifier,
    TrainConfig,
    featurize,
    gradient_check,
    load_model,
    model_digest,
    predict_proba,
    save_model,
    score_dataset,
    train,
)
from .selection import SelectionReport, noise_curve, select_top
from .selftrain import RunLedger, SelfTrainConfig, evaluate, rank_and_select, run_pipeline
from .synthetic import SyntheticSpec, synthetic_corpus
from .weaklabel import (
    NoiseTransitionMatrix,
    PseudoLabel,
    PseudoLabeledDataset,
    load_pseudo_labels,
    noise_stats,
    save_pseudo_labels,
    seed_match,
    synthesize_flip_noise,
)

__version__ = "0.1.0"
