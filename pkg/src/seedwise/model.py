"""Confidence estimator: hashed bag-of-words multinomial softmax classifier.

A linear model is all the selection machinery needs: it can key on
individual tokens, which is exactly the channel through which matched
seeds bias the labels. Training is plain mini-batch SGD on mean
cross-entropy with a 1/sqrt(t) learning-rate decay, sequential and
seeded, so identical inputs give bit-identical parameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from hashlib import blake2b, sha256
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus import ClassSet, Document, SeedLexicon
from .corrupt import KIND_NONE, CorruptionSpec, corrupt_document

Example = tuple[str, tuple[str, ...], str]  # (doc id, tokens, label)

MODEL_MAGIC = b"SWM1"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 4
    learning_rate: float = 0.1
    batch_size: int = 32
    rng_seed: int = 0
    hash_dim: int = 1 << 18

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.hash_dim < 1 or self.hash_dim & (self.hash_dim - 1):
            raise ValueError("hash_dim must be a power of two")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "rng_seed": self.rng_seed,
            "hash_dim": self.hash_dim,
        }


@lru_cache(maxsize=1 << 20)
def _token_index(token: str, dim: int) -> int:
    digest = blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") & (dim - 1)


@dataclass(frozen=True)
class FeatureVector:
    """Sparse L2-normalized token counts over a hashed index space."""

    indices: np.ndarray  # int64, strictly increasing
    values: np.ndarray   # float64
    dim: int

    @property
    def is_empty(self) -> bool:
        return self.indices.size == 0


def featurize(tokens: Sequence[str], dim: int) -> FeatureVector:
    """Hash tokens into `dim` buckets, accumulate counts, L2-normalize.

    Colliding tokens share a bucket and their counts sum. Token order is
    irrelevant. An empty token list gives the (valid) zero vector.
    """
    if dim < 1 or dim & (dim - 1):
        raise ValueError("dim must be a power of two")
    counts: dict[int, float] = {}
    for token in tokens:
        idx = _token_index(token, dim)
        counts[idx] = counts.get(idx, 0.0) + 1.0
    if not counts:
        return FeatureVector(indices=np.empty(0, dtype=np.int64),
                             values=np.empty(0, dtype=np.float64), dim=dim)
    indices = np.fromiter(sorted(counts), dtype=np.int64, count=len(counts))
    values = np.array([counts[i] for i in indices], dtype=np.float64)
    values /= np.linalg.norm(values)
    return FeatureVector(indices=indices, values=values, dim=dim)


@dataclass
class ConfidenceScore:
    """Posterior of one document, together with the label it is scored at."""

    doc_id: str
    label: str
    confidence: float
    posterior: np.ndarray


class LinearTextClassifier:
    """Softmax classifier over hashed bag-of-words features.

    `weights` has shape (hash_dim, K) and `biases` shape (K,), both
    float64. Instances are cheap to share after training: prediction does
    not mutate state.
    """

    def __init__(
        self,
        classes: ClassSet,
        config: TrainConfig,
        weights: np.ndarray | None = None,
        biases: np.ndarray | None = None,
        metadata: dict | None = None,
    ) -> None:
        self.classes = classes
        self.config = config
        k = len(classes)
        self.weights = (
            np.zeros((config.hash_dim, k), dtype=np.float64) if weights is None else weights
        )
        self.biases = np.zeros(k, dtype=np.float64) if biases is None else biases
        self.metadata = metadata if metadata is not None else {}
        if self.weights.shape != (config.hash_dim, k) or self.biases.shape != (k,):
            raise ValueError("parameter shapes do not match (hash_dim, K)")

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def is_trained(self) -> bool:
        return bool(self.metadata.get("trained", False))

    def posterior_from_features(self, fv: FeatureVector) -> np.ndarray:
        logits = self.biases.copy()
        if not fv.is_empty:
            logits += fv.values @ self.weights[fv.indices]
        return _softmax(logits)

    def predict_posterior(self, tokens: Sequence[str]) -> np.ndarray:
        return self.posterior_from_features(featurize(tokens, self.config.hash_dim))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - math.log(np.exp(shifted).sum())


def _mean_loss(model: LinearTextClassifier, feats: Sequence[FeatureVector],
               label_ids: np.ndarray) -> float:
    total = 0.0
    for fv, y in zip(feats, label_ids):
        logits = model.biases.copy()
        if not fv.is_empty:
            logits += fv.values @ model.weights[fv.indices]
        total -= _log_softmax(logits)[y]
    return float(total / len(feats))


def _prepare(examples: Sequence[Example], classes: ClassSet,
             dim: int) -> tuple[list[FeatureVector], np.ndarray]:
    feats = [featurize(tokens, dim) for _, tokens, _ in examples]
    label_ids = np.array([classes.id_of(label) for _, _, label in examples], dtype=np.int64)
    return feats, label_ids


def train(
    dataset,
    config: TrainConfig = TrainConfig(),
    per_epoch: Callable[[int], Sequence[Example]] | None = None,
) -> LinearTextClassifier:
    """Fit the classifier on `dataset.training_examples()` by mini-batch SGD.

    `per_epoch`, when given, supplies that epoch's (possibly re-corrupted)
    examples instead of the static set; the shuffle stream is unaffected.
    Raises on an empty dataset; classes with no examples are recorded as a
    warning in the model metadata.
    """
    examples = list(dataset.training_examples())
    if not examples:
        raise ValueError("cannot train on an empty dataset")
    classes: ClassSet = dataset.classes

    represented = {label for _, _, label in examples}
    missing = [name for name in classes if name not in represented]

    feats, label_ids = _prepare(examples, classes, config.hash_dim)
    model = LinearTextClassifier(classes=classes, config=config)
    rng = np.random.default_rng(config.rng_seed)
    lr0 = config.learning_rate
    n = len(examples)
    k = len(classes)
    step = 0
    loss_trace: list[float] = []

    for epoch in range(config.epochs):
        if per_epoch is not None:
            epoch_examples = list(per_epoch(epoch))
            if len(epoch_examples) != n:
                raise ValueError("per_epoch must yield the same number of examples")
            feats, label_ids = _prepare(epoch_examples, classes, config.hash_dim)
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            step += 1
            lr = lr0 / math.sqrt(step)
            errors = np.empty((batch.size, k), dtype=np.float64)
            for j, i in enumerate(batch):
                errors[j] = model.posterior_from_features(feats[i])
                errors[j, label_ids[i]] -= 1.0
            scale = lr / batch.size
            model.biases -= scale * errors.sum(axis=0)
            nnz = [feats[i].indices.size for i in batch]
            if any(nnz):
                cols = np.concatenate([feats[i].indices for i in batch])
                vals = np.concatenate([feats[i].values for i in batch])
                contrib = vals[:, None] * np.repeat(errors, nnz, axis=0)
                np.add.at(model.weights, cols, -scale * contrib)
        loss_trace.append(_mean_loss(model, feats, label_ids))
        if not (np.isfinite(model.biases).all() and np.isfinite(model.weights).all()):
            raise RuntimeError(f"non-finite parameters after epoch {epoch}")

    model.metadata.update(
        {
            "trained": True,
            "num_examples": n,
            "loss_trace": loss_trace,
            "unrepresented_classes": missing,
        }
    )
    return model


def predict_proba(
    model: LinearTextClassifier,
    doc: Document,
    pseudo_label: str | None = None,
    evaluate_on: str = "original",
    spec: CorruptionSpec | None = None,
    lexicon: SeedLexicon | None = None,
) -> ConfidenceScore:
    """Posterior for one document, scored at `pseudo_label` (or the argmax).

    `evaluate_on="corrupted"` applies `spec` to the document first; the
    default scores the original text, which is also how the pipeline uses
    trained models.
    """
    if not model.is_trained:
        raise ValueError("model has not been trained")
    if evaluate_on not in ("original", "corrupted"):
        raise ValueError(f"evaluate_on must be 'original' or 'corrupted', got {evaluate_on!r}")
    tokens: Sequence[str] = doc.tokens
    if evaluate_on == "corrupted":
        working_spec = spec if spec is not None else CorruptionSpec(kind=KIND_NONE)
        label_for_corruption = pseudo_label if pseudo_label is not None else ""
        tokens = corrupt_document(doc, label_for_corruption, lexicon, working_spec).tokens
    posterior = model.predict_posterior(tokens)
    if pseudo_label is None:
        label_id = int(posterior.argmax())
        label = model.classes.name_of(label_id)
    else:
        label = pseudo_label
        label_id = model.classes.id_of(label)
    return ConfidenceScore(
        doc_id=doc.id, label=label, confidence=float(posterior[label_id]), posterior=posterior
    )


def score_dataset(
    model: LinearTextClassifier,
    dataset,
    evaluate_on: str = "original",
    spec: CorruptionSpec | None = None,
    lexicon: SeedLexicon | None = None,
) -> list[ConfidenceScore]:
    """Confidence at the pseudo-label for every entry of the dataset."""
    scores = []
    for entry in dataset.entries:
        doc = dataset.corpus.doc(entry.doc_id)
        scores.append(
            predict_proba(model, doc, pseudo_label=entry.label,
                          evaluate_on=evaluate_on, spec=spec, lexicon=lexicon)
        )
    return scores


def gradient_check(
    model: LinearTextClassifier,
    batch: Sequence[tuple[Sequence[str], str]],
    step: float = 1e-5,
    num_params: int = 64,
    rng_seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples parameters among the weight rows the batch actually touches
    plus all biases. Intended as a numerical safeguard on the update rule;
    anything above ~1e-4 means the analytic gradient is wrong.
    """
    if not batch:
        raise ValueError("gradient_check requires a non-empty batch")
    if len(batch) > 8:
        raise ValueError("gradient_check batch must have at most 8 documents")
    classes = model.classes
    k = len(classes)
    dim = model.config.hash_dim
    feats = [featurize(tokens, dim) for tokens, _ in batch]
    label_ids = np.array([classes.id_of(label) for _, label in batch], dtype=np.int64)
    b = len(batch)

    def loss() -> float:
        return _mean_loss(model, feats, label_ids)

    # Analytic gradient of the mean cross-entropy.
    grad_bias = np.zeros(k, dtype=np.float64)
    grad_rows: dict[int, np.ndarray] = {}
    for fv, y in zip(feats, label_ids):
        err = model.posterior_from_features(fv)
        err[y] -= 1.0
        grad_bias += err / b
        for idx, val in zip(fv.indices, fv.values):
            row = grad_rows.setdefault(int(idx), np.zeros(k, dtype=np.float64))
            row += (val / b) * err

    touched = sorted(grad_rows)
    candidates: list[tuple[str, int, int]] = [("b", 0, c) for c in range(k)]
    candidates.extend(("w", r, c) for r in touched for c in range(k))
    rng = np.random.default_rng(rng_seed)
    if len(candidates) > num_params:
        chosen = rng.choice(len(candidates), size=num_params, replace=False)
        candidates = [candidates[i] for i in sorted(chosen)]

    worst = 0.0
    for kind, r, c in candidates:
        target = model.biases if kind == "b" else model.weights[r]
        analytic = grad_bias[c] if kind == "b" else grad_rows[r][c]
        original = target[c]
        target[c] = original + step
        hi = loss()
        target[c] = original - step
        lo = loss()
        target[c] = original
        numeric = (hi - lo) / (2.0 * step)
        denom = max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst


def model_bytes(model: LinearTextClassifier) -> bytes:
    """Versioned, fully deterministic serialization (same model -> same bytes)."""
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "classes": list(model.classes.names),
        "config": model.config.to_dict(),
        "metadata": model.metadata,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [
        MODEL_MAGIC,
        len(header_bytes).to_bytes(4, "little"),
        header_bytes,
        np.ascontiguousarray(model.weights, dtype="<f8").tobytes(),
        np.ascontiguousarray(model.biases, dtype="<f8").tobytes(),
    ]
    return b"".join(parts)


def model_digest(model: LinearTextClassifier) -> str:
    return sha256(model_bytes(model)).hexdigest()


def save_model(model: LinearTextClassifier, path: str | Path) -> None:
    Path(path).write_bytes(model_bytes(model))


def load_model(path: str | Path) -> LinearTextClassifier:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise ValueError(f"{path}: not a seedwise model file")
    header_len = int.from_bytes(raw[4:8], "little")
    header = json.loads(raw[8:8 + header_len].decode("utf-8"))
    if header.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version")
    config = TrainConfig(**header["config"])
    classes = ClassSet(tuple(header["classes"]))
    k = len(classes)
    dim = config.hash_dim
    offset = 8 + header_len
    weights = np.frombuffer(
        raw, dtype="<f8", count=dim * k, offset=offset
    ).reshape(dim, k).astype(np.float64)
    biases = np.frombuffer(
        raw, dtype="<f8", count=k, offset=offset + dim * k * 8
    ).astype(np.float64)
    return LinearTextClassifier(
        classes=classes, config=config, weights=weights, biases=biases,
        metadata=header["metadata"],
    )


@dataclass
class TrainingSet:
    """Plain (id, tokens, label) triples satisfying the training protocol."""

    classes: ClassSet
    examples: list[Example] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.examples)

    def training_examples(self) -> Iterable[Example]:
        return iter(self.examples)
