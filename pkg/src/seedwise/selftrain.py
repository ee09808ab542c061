"""End-to-end protocol: match, corrupt, train, select, then self-train.

One run is: seed-match the corpus, train a confidence model on the
corrupted matched set, keep the most confident fraction, and then
repeatedly promote the most confident unlabeled predictions into the
training set and retrain. Every stage draws from named child streams of
one root seed, so a run is reproducible end to end.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .analysis import MetricsRecord, f1_metrics
from .corpus import Corpus, SeedLexicon
from .corrupt import (
    KIND_NONE,
    KIND_RANDOM_DELETION,
    KIND_SEED_DELETION,
    CorruptionSpec,
    corrupt_document,
)
from .model import (
    LinearTextClassifier,
    TrainConfig,
    TrainingSet,
    model_digest,
    predict_proba,
    score_dataset,
    train,
)
from .seeding import child_seed
from .selection import SelectionReport, select_top
from .weaklabel import (
    PROVENANCE_SELF_TRAIN,
    PseudoLabel,
    PseudoLabeledDataset,
    noise_stats,
    seed_match,
)


@dataclass(frozen=True)
class SelfTrainConfig:
    iterations: int = 5
    merge_fraction: float = 0.1
    selection_fraction: float = 0.5
    corruption: CorruptionSpec = CorruptionSpec()
    training: TrainConfig = TrainConfig()
    evaluate_on: str = "original"
    oracle_selection: bool = False

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0.0 <= self.merge_fraction <= 1.0:
            raise ValueError("merge_fraction must be in [0, 1]")
        if not 0.0 < self.selection_fraction <= 1.0:
            raise ValueError("selection_fraction must be in (0, 1]")
        if self.evaluate_on not in ("original", "corrupted"):
            raise ValueError("evaluate_on must be 'original' or 'corrupted'")

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "merge_fraction": self.merge_fraction,
            "selection_fraction": self.selection_fraction,
            "corruption": {
                "kind": self.corruption.kind,
                "deletion_ratio": self.corruption.deletion_ratio,
                "rng_seed": self.corruption.rng_seed,
                "resample_per_epoch": self.corruption.resample_per_epoch,
            },
            "training": self.training.to_dict(),
            "evaluate_on": self.evaluate_on,
            "oracle_selection": self.oracle_selection,
        }


@dataclass
class IterationRecord:
    iteration: int
    train_size: int
    newly_merged: int
    micro_f1: float | None
    macro_f1: float | None
    model_digest: str


@dataclass
class RunLedger:
    config: dict
    matched: int = 0
    unmatched: int = 0
    overall_noise_rate: float | None = None
    selection_size: int = 0
    selection_noise_rate: float | None = None
    records: list[IterationRecord] = field(default_factory=list)

    def append(self, record: IterationRecord) -> None:
        if self.records and record.train_size < self.records[-1].train_size:
            raise ValueError("training-set size must be non-decreasing across iterations")
        self.records.append(record)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "matched": self.matched,
            "unmatched": self.unmatched,
            "overall_noise_rate": self.overall_noise_rate,
            "selection_size": self.selection_size,
            "selection_noise_rate": self.selection_noise_rate,
            "iterations": [
                {
                    "iteration": r.iteration,
                    "train_size": r.train_size,
                    "newly_merged": r.newly_merged,
                    "micro_f1": r.micro_f1,
                    "macro_f1": r.macro_f1,
                    "model_digest": r.model_digest,
                }
                for r in self.records
            ],
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["iteration", "train_size", "newly_merged", "micro_f1", "macro_f1", "model_digest"]
            )
            for r in self.records:
                writer.writerow(
                    [
                        r.iteration,
                        r.train_size,
                        r.newly_merged,
                        "" if r.micro_f1 is None else f"{r.micro_f1:.6f}",
                        "" if r.macro_f1 is None else f"{r.macro_f1:.6f}",
                        r.model_digest,
                    ]
                )


def _corrupted_examples(
    entries: Sequence[PseudoLabel],
    corpus: Corpus,
    lexicon: SeedLexicon | None,
    spec: CorruptionSpec,
) -> list[tuple[str, tuple[str, ...], str]]:
    """Training view of the labeled set under the configured corruption.

    Seed deletion targets the bias introduced by the matching rule, so it
    skips self-train entries (their labels never came from seeds); random
    deletion applies to every document.
    """
    examples = []
    for entry in entries:
        doc = corpus.doc(entry.doc_id)
        if spec.kind == KIND_SEED_DELETION and entry.provenance == PROVENANCE_SELF_TRAIN:
            tokens = doc.tokens
        elif spec.kind == KIND_NONE:
            tokens = doc.tokens
        else:
            tokens = corrupt_document(doc, entry.label, lexicon, spec).tokens
        examples.append((entry.doc_id, tokens, entry.label))
    return examples


def _train_on_entries(
    entries: Sequence[PseudoLabel],
    corpus: Corpus,
    lexicon: SeedLexicon | None,
    corruption: CorruptionSpec,
    training: TrainConfig,
) -> LinearTextClassifier:
    base = TrainingSet(
        classes=corpus.classes,
        examples=_corrupted_examples(entries, corpus, lexicon, corruption),
    )
    per_epoch = None
    if corruption.resample_per_epoch and corruption.kind == KIND_RANDOM_DELETION:
        def per_epoch(epoch: int, _entries=tuple(entries)):
            epoch_spec = replace(corruption, rng_seed=child_seed(corruption.rng_seed, f"epoch:{epoch}"))
            return _corrupted_examples(_entries, corpus, lexicon, epoch_spec)
    return train(base, training, per_epoch=per_epoch)


def evaluate(model: LinearTextClassifier, corpus: Corpus) -> MetricsRecord:
    """Micro/macro F1 of argmax predictions over the gold-labeled documents."""
    gold, predicted = [], []
    for doc in corpus:
        if doc.gold_label is None:
            continue
        posterior = model.predict_posterior(doc.tokens)
        gold.append(doc.gold_label)
        predicted.append(corpus.classes.name_of(int(posterior.argmax())))
    if not gold:
        raise ValueError("evaluation requires gold labels")
    return f1_metrics(gold, predicted, corpus.classes)


def rank_and_select(
    dataset: PseudoLabeledDataset,
    lexicon: SeedLexicon | None,
    config: SelfTrainConfig,
) -> tuple[LinearTextClassifier, list, SelectionReport]:
    """Train the confidence model on the corrupted set and keep the top slice."""
    model = _train_on_entries(
        dataset.entries, dataset.corpus, lexicon, config.corruption, config.training
    )
    scores = score_dataset(
        model,
        dataset,
        evaluate_on=config.evaluate_on,
        spec=config.corruption,
        lexicon=lexicon,
    )
    report = select_top(dataset, scores, config.selection_fraction)
    return model, scores, report


def _oracle_selection(dataset: PseudoLabeledDataset) -> SelectionReport:
    """Keep exactly the correct pseudo-labels (diagnostic upper bound)."""
    chosen = []
    for entry in dataset.entries:
        gold = dataset.corpus.doc(entry.doc_id).gold_label
        if gold is None:
            raise ValueError("oracle selection requires gold labels")
        if gold == entry.label:
            chosen.append(entry)
    per_class: dict[str, int] = {}
    for entry in chosen:
        per_class[entry.label] = per_class.get(entry.label, 0) + 1
    return SelectionReport(
        fraction=len(chosen) / len(dataset.entries) if dataset.entries else 0.0,
        selected_ids=tuple(entry.doc_id for entry in chosen),
        noise_rate=0.0,
        per_class_counts=per_class,
    )


def merge_count(pool_size: int, fraction: float) -> int:
    """Nearest-integer share of the pool; zero stays zero (no forced merge)."""
    return math.floor(fraction * pool_size + 0.5)


def run_pipeline(
    corpus: Corpus,
    lexicon: SeedLexicon,
    config: SelfTrainConfig = SelfTrainConfig(),
) -> tuple[LinearTextClassifier, RunLedger]:
    """Run matching, selection, and self-training; return the final model.

    The ledger records one row per training round: row 0 is the model
    trained on the selected labels, later rows add the per-iteration
    merges from the unlabeled pool. Raises if seed matching produces no
    pseudo-labels at all.
    """
    matched = seed_match(corpus, lexicon)
    if not matched.entries:
        raise ValueError("no pseudo-labels produced; check the seed lexicon against the corpus")

    matched_gold = all(
        corpus.doc(entry.doc_id).gold_label is not None for entry in matched.entries
    )
    has_gold = any(doc.gold_label is not None for doc in corpus)
    ledger = RunLedger(config=config.to_dict())
    ledger.matched = len(matched.entries)
    ledger.unmatched = len(matched.unmatched_ids)
    if matched_gold:
        ledger.overall_noise_rate = noise_stats(matched).overall_noise_rate

    if config.oracle_selection:
        report = _oracle_selection(matched)
    else:
        _, _, report = rank_and_select(matched, lexicon, config)
    ledger.selection_size = len(report.selected_ids)
    ledger.selection_noise_rate = report.noise_rate

    selected = set(report.selected_ids)
    labeled = [entry for entry in matched.entries if entry.doc_id in selected]
    pool = [entry.doc_id for entry in matched.entries if entry.doc_id not in selected]
    pool.extend(matched.unmatched_ids)

    model = _train_on_entries(labeled, corpus, lexicon, config.corruption, config.training)
    metrics = evaluate(model, corpus) if has_gold else None
    ledger.append(
        IterationRecord(
            iteration=0,
            train_size=len(labeled),
            newly_merged=0,
            micro_f1=None if metrics is None else metrics.micro_f1,
            macro_f1=None if metrics is None else metrics.macro_f1,
            model_digest=model_digest(model),
        )
    )

    for iteration in range(1, config.iterations + 1):
        take = merge_count(len(pool), config.merge_fraction)
        merged = 0
        if take > 0:
            scored = []
            for doc_id in pool:
                score = predict_proba(model, corpus.doc(doc_id))
                scored.append((-score.confidence, doc_id, score.label))
            scored.sort()
            promoted = scored[:take]
            promoted_ids = {doc_id for _, doc_id, _ in promoted}
            labeled.extend(
                PseudoLabel(doc_id, label, PROVENANCE_SELF_TRAIN)
                for _, doc_id, label in promoted
            )
            pool = [doc_id for doc_id in pool if doc_id not in promoted_ids]
            merged = len(promoted)
        model = _train_on_entries(labeled, corpus, lexicon, config.corruption, config.training)
        metrics = evaluate(model, corpus) if has_gold else None
        ledger.append(
            IterationRecord(
                iteration=iteration,
                train_size=len(labeled),
                newly_merged=merged,
                micro_f1=None if metrics is None else metrics.micro_f1,
                macro_f1=None if metrics is None else metrics.macro_f1,
                model_digest=model_digest(model),
            )
        )
    return model, ledger
