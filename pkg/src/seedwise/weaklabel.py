"""Seed-matching pseudo-labels, noise statistics, and flip-noise synthesis.

The matching rule assigns the class whose seed tokens occur most often in
the document (counting repeats); ties, including zero matches, abstain.
The synthesizer replaces the matched labels with content-independent ones
while keeping the gold-vs-pseudo transition counts exactly equal, which is
what makes it a fair control for the matched labels.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .corpus import Corpus, SeedLexicon

PROVENANCE_SEED_MATCH = "seed-match"
PROVENANCE_SYNTHESIZED = "synthesized"
PROVENANCE_SELF_TRAIN = "self-train"
PROVENANCES = (PROVENANCE_SEED_MATCH, PROVENANCE_SYNTHESIZED, PROVENANCE_SELF_TRAIN)


@dataclass(frozen=True)
class PseudoLabel:
    doc_id: str
    label: str
    provenance: str

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance: {self.provenance!r}")


@dataclass
class PseudoLabeledDataset:
    """Pseudo-labels over a corpus; entries plus unmatched ids partition it."""

    corpus: Corpus
    entries: tuple[PseudoLabel, ...]
    unmatched_ids: tuple[str, ...]
    _label_by_id: dict[str, str] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.entries = tuple(self.entries)
        self.unmatched_ids = tuple(self.unmatched_ids)
        by_id: dict[str, str] = {}
        for entry in self.entries:
            if entry.doc_id in by_id:
                raise ValueError(f"duplicate entry for document id: {entry.doc_id!r}")
            if entry.label not in self.corpus.classes:
                raise ValueError(f"entry {entry.doc_id!r} has unknown class {entry.label!r}")
            by_id[entry.doc_id] = entry.label
        covered = set(by_id)
        covered.update(self.unmatched_ids)
        corpus_ids = set(self.corpus.ids())
        if covered != corpus_ids or len(by_id) + len(self.unmatched_ids) != len(corpus_ids):
            raise ValueError("entries plus unmatched ids must partition the corpus ids")
        self._label_by_id = by_id

    @classmethod
    def from_entries(cls, corpus: Corpus, entries: Sequence[PseudoLabel]) -> "PseudoLabeledDataset":
        labeled = {entry.doc_id for entry in entries}
        unmatched = tuple(doc.id for doc in corpus if doc.id not in labeled)
        return cls(corpus=corpus, entries=tuple(entries), unmatched_ids=unmatched)

    @property
    def classes(self):
        return self.corpus.classes

    def __len__(self) -> int:
        return len(self.entries)

    def label_of(self, doc_id: str) -> str:
        return self._label_by_id[doc_id]

    def training_examples(self) -> Iterator[tuple[str, tuple[str, ...], str]]:
        for entry in self.entries:
            yield entry.doc_id, self.corpus.doc(entry.doc_id).tokens, entry.label


@dataclass(eq=False)
class NoiseTransitionMatrix:
    """Integer counts of (gold class, pseudo class) pairs and derived rates."""

    classes: tuple[str, ...]
    counts: np.ndarray  # (K, K) int64, rows gold, columns pseudo

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise ValueError("counts must be K x K for K classes")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NoiseTransitionMatrix):
            return NotImplemented
        return self.classes == other.classes and np.array_equal(self.counts, other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def rates(self) -> np.ndarray:
        """Row-normalized counts; all-zero rows stay zero."""
        row_sums = self.counts.sum(axis=1, keepdims=True)
        return np.divide(
            self.counts,
            row_sums,
            out=np.zeros_like(self.counts, dtype=np.float64),
            where=row_sums > 0,
        )

    @property
    def overall_noise_rate(self) -> float:
        total = self.total
        if total == 0:
            return 0.0
        off_diagonal = total - int(np.trace(self.counts))
        return off_diagonal / total

    @property
    def per_class_noise_rate(self) -> dict[str, float]:
        rates = self.rates
        return {
            name: float(1.0 - rates[i, i]) if self.counts[i].sum() > 0 else 0.0
            for i, name in enumerate(self.classes)
        }

    def write_counts_csv(self, path: str | Path) -> None:
        _write_matrix_csv(path, self.classes, self.counts, fmt=lambda v: str(int(v)))

    def write_rates_csv(self, path: str | Path) -> None:
        _write_matrix_csv(path, self.classes, self.rates, fmt=lambda v: f"{v:.6f}")


def _write_matrix_csv(path, classes, matrix, fmt) -> None:
    lines = ["," + ",".join(classes)]
    for name, row in zip(classes, matrix):
        lines.append(name + "," + ",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def seed_match(corpus: Corpus, lexicon: SeedLexicon) -> PseudoLabeledDataset:
    """Label each document with the class whose seeds occur most often.

    Occurrences count token multiplicity. A document with no seed
    occurrences, or with two classes tied for the maximum, is left
    unmatched rather than broken arbitrarily.
    """
    missing = [name for name in lexicon.classes if name not in corpus.classes]
    if missing:
        raise ValueError(f"lexicon classes not in corpus: {missing}")

    token_class = lexicon.token_class
    entries = []
    unmatched = []
    for doc in corpus:
        counts: Counter[str] = Counter()
        for token in doc.tokens:
            owner = token_class.get(token)
            if owner is not None:
                counts[owner] += 1
        winner = _strict_argmax(counts)
        if winner is None:
            unmatched.append(doc.id)
        else:
            entries.append(PseudoLabel(doc.id, winner, PROVENANCE_SEED_MATCH))
    return PseudoLabeledDataset(corpus=corpus, entries=tuple(entries), unmatched_ids=tuple(unmatched))


def _strict_argmax(counts: Counter) -> str | None:
    if not counts:
        return None
    best = max(counts.values())
    winners = [name for name, count in counts.items() if count == best]
    return winners[0] if len(winners) == 1 else None


def _require_gold(dataset: PseudoLabeledDataset) -> None:
    missing = [
        entry.doc_id
        for entry in dataset.entries
        if dataset.corpus.doc(entry.doc_id).gold_label is None
    ]
    if missing:
        shown = ", ".join(missing[:10])
        suffix = f" (and {len(missing) - 10} more)" if len(missing) > 10 else ""
        raise ValueError(f"entries missing gold labels: {shown}{suffix}")


def noise_stats(dataset: PseudoLabeledDataset) -> NoiseTransitionMatrix:
    """Exact gold-vs-pseudo transition counts over the labeled entries."""
    _require_gold(dataset)
    classes = dataset.classes
    k = len(classes)
    counts = np.zeros((k, k), dtype=np.int64)
    for entry in dataset.entries:
        gold = dataset.corpus.doc(entry.doc_id).gold_label
        counts[classes.id_of(gold), classes.id_of(entry.label)] += 1
    return NoiseTransitionMatrix(classes=tuple(classes), counts=counts)


def synthesize_flip_noise(dataset: PseudoLabeledDataset, rng_seed: int) -> PseudoLabeledDataset:
    """Reassign pseudo-labels content-independently with identical statistics.

    Within each gold class the multiset of pseudo-labels is kept and
    uniformly permuted across that class's documents, so the transition
    matrix of the result equals the input's exactly (integer equality),
    while which document carries which label is pure chance.
    """
    _require_gold(dataset)
    by_gold: dict[str, list[int]] = defaultdict(list)
    for position, entry in enumerate(dataset.entries):
        by_gold[dataset.corpus.doc(entry.doc_id).gold_label].append(position)

    rng = np.random.default_rng(rng_seed)
    new_labels: dict[int, str] = {}
    for gold in dataset.classes:
        positions = by_gold.get(gold, [])
        if not positions:
            continue
        labels = [dataset.entries[i].label for i in positions]
        order = rng.permutation(len(labels))
        for slot, src in zip(positions, order):
            new_labels[slot] = labels[src]

    entries = tuple(
        PseudoLabel(entry.doc_id, new_labels[i], PROVENANCE_SYNTHESIZED)
        for i, entry in enumerate(dataset.entries)
    )
    return PseudoLabeledDataset(
        corpus=dataset.corpus, entries=entries, unmatched_ids=dataset.unmatched_ids
    )


def save_pseudo_labels(dataset: PseudoLabeledDataset, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for entry in dataset.entries:
            record = {"id": entry.doc_id, "pseudo_label": entry.label, "provenance": entry.provenance}
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_pseudo_labels(path: str | Path, corpus: Corpus) -> PseudoLabeledDataset:
    """Read a pseudo-label JSONL file back against its corpus."""
    path = Path(path)
    entries = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            try:
                entry = PseudoLabel(
                    doc_id=record["id"],
                    label=record["pseudo_label"],
                    provenance=record.get("provenance", PROVENANCE_SEED_MATCH),
                )
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: missing field {exc}") from None
            corpus.doc(entry.doc_id)  # unknown id -> error
            entries.append(entry)
    return PseudoLabeledDataset.from_entries(corpus, entries)
