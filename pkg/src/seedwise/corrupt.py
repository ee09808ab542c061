"""Debiasing corruptions: seed deletion and random token deletion.

Both transforms break the spurious token-to-label correlation injected by
seed matching before a confidence model is trained. Seed deletion removes
every occurrence of the matched class's seeds; random deletion removes a
fixed fraction of token positions, capped so one token always survives.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from hashlib import blake2b
from pathlib import Path
from typing import Iterator

import numpy as np

from .corpus import ClassSet, Document, SeedLexicon
from .weaklabel import PseudoLabeledDataset

KIND_SEED_DELETION = "seed-deletion"
KIND_RANDOM_DELETION = "random-deletion"
KIND_NONE = "none"
KINDS = (KIND_SEED_DELETION, KIND_RANDOM_DELETION, KIND_NONE)


@dataclass(frozen=True)
class CorruptionSpec:
    """What to delete. `deletion_ratio` only matters for random deletion."""

    kind: str = KIND_NONE
    deletion_ratio: float = 0.9
    rng_seed: int = 0
    resample_per_epoch: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown corruption kind: {self.kind!r}")
        if not 0.0 <= self.deletion_ratio <= 1.0:
            raise ValueError(f"deletion_ratio must be in [0, 1], got {self.deletion_ratio}")


@dataclass(frozen=True)
class CorruptedDocument:
    source_id: str
    tokens: tuple[str, ...]
    deleted_positions: tuple[int, ...]


def seed_delete(doc: Document, pseudo_label: str, lexicon: SeedLexicon) -> CorruptedDocument:
    """Drop every occurrence of the pseudo-label class's seed tokens.

    Seeds of other classes are kept; a document containing none of its own
    class's seeds comes back unchanged. Idempotent.
    """
    seeds = lexicon.seeds_for(pseudo_label)
    deleted = tuple(i for i, token in enumerate(doc.tokens) if token in seeds)
    kept = tuple(token for token in doc.tokens if token not in seeds)
    return CorruptedDocument(source_id=doc.id, tokens=kept, deleted_positions=deleted)


def _doc_rng(rng_seed: int, doc_id: str) -> np.random.Generator:
    # Per-document stream keyed on (seed, id): corruption is order-independent.
    digest = blake2b(f"{rng_seed}\x1f{doc_id}".encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


def deletion_count(n_tokens: int, ratio: float) -> int:
    """ceil(ratio * n), capped at n - 1 so one token always survives."""
    if n_tokens <= 0:
        return 0
    return min(math.ceil(ratio * n_tokens), n_tokens - 1)


def random_delete(doc: Document, spec: CorruptionSpec) -> CorruptedDocument:
    """Delete a uniform sample of exactly `deletion_count` token positions.

    Reproducible: the positions depend only on (spec.rng_seed, doc.id).
    Empty documents are returned unchanged.
    """
    if spec.kind != KIND_RANDOM_DELETION:
        raise ValueError(f"random_delete requires kind={KIND_RANDOM_DELETION!r}")
    n = len(doc.tokens)
    k = deletion_count(n, spec.deletion_ratio)
    if k == 0:
        return CorruptedDocument(source_id=doc.id, tokens=doc.tokens, deleted_positions=())
    rng = _doc_rng(spec.rng_seed, doc.id)
    positions = np.sort(rng.choice(n, size=k, replace=False))
    drop = set(positions.tolist())
    kept = tuple(token for i, token in enumerate(doc.tokens) if i not in drop)
    return CorruptedDocument(
        source_id=doc.id, tokens=kept, deleted_positions=tuple(int(p) for p in positions)
    )


def corrupt_document(doc: Document, pseudo_label: str, lexicon: SeedLexicon | None,
                     spec: CorruptionSpec) -> CorruptedDocument:
    if spec.kind == KIND_SEED_DELETION:
        if lexicon is None:
            raise ValueError("seed-deletion corruption requires a seed lexicon")
        return seed_delete(doc, pseudo_label, lexicon)
    if spec.kind == KIND_RANDOM_DELETION:
        return random_delete(doc, spec)
    return CorruptedDocument(source_id=doc.id, tokens=doc.tokens, deleted_positions=())


@dataclass(frozen=True)
class CorruptedEntry:
    doc_id: str
    tokens: tuple[str, ...]
    label: str
    deleted_positions: tuple[int, ...]


@dataclass
class CorruptedDataset:
    """Pseudo-labeled documents after corruption; labels are untouched."""

    classes: ClassSet
    entries: tuple[CorruptedEntry, ...]
    spec: CorruptionSpec

    def __len__(self) -> int:
        return len(self.entries)

    def training_examples(self) -> Iterator[tuple[str, tuple[str, ...], str]]:
        for entry in self.entries:
            yield entry.doc_id, entry.tokens, entry.label

    def save_jsonl(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as handle:
            for entry in self.entries:
                record = {"id": entry.doc_id, "tokens": list(entry.tokens), "pseudo_label": entry.label}
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def corrupt_dataset(
    dataset: PseudoLabeledDataset,
    lexicon: SeedLexicon | None,
    spec: CorruptionSpec,
) -> CorruptedDataset:
    """Apply the per-document transform to every labeled entry."""
    if spec.kind == KIND_SEED_DELETION and lexicon is None:
        raise ValueError("seed-deletion corruption requires a seed lexicon")
    entries = []
    for entry in dataset.entries:
        doc = dataset.corpus.doc(entry.doc_id)
        corrupted = corrupt_document(doc, entry.label, lexicon, spec)
        entries.append(
            CorruptedEntry(
                doc_id=entry.doc_id,
                tokens=corrupted.tokens,
                label=entry.label,
                deleted_positions=corrupted.deleted_positions,
            )
        )
    return CorruptedDataset(classes=dataset.classes, entries=tuple(entries), spec=spec)
