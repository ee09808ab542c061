"""Synthetic corpora with a planted, exactly controlled matching noise rate.

Each document carries class-indicative tokens of its gold class, shared
filler tokens, and repeated occurrences of one seed token. For a chosen
fraction of documents the planted seed belongs to a *different* class, so
seed matching mislabels exactly that fraction while the document body
still reflects the gold class - the same structure that makes real
matched labels biased: the seed predicts the pseudo-label perfectly, the
rest of the text predicts the gold label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import ClassSet, Corpus, Document, SeedLexicon

_CLASS_NAMES = ("alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel")


@dataclass(frozen=True)
class SyntheticSpec:
    n_docs: int = 2000
    n_classes: int = 4
    noise_rate: float = 0.25
    class_vocab_size: int = 40
    indicative_per_doc: int = 20
    filler_vocab_size: int = 200
    filler_per_doc: int = 25
    seeds_per_class: int = 2
    seed_occurrences: int = 3
    unmatched_fraction: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_classes < 2 or self.n_classes > len(_CLASS_NAMES):
            raise ValueError(f"n_classes must be in [2, {len(_CLASS_NAMES)}]")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError("noise_rate must be in [0, 1]")
        if not 0.0 <= self.unmatched_fraction < 1.0:
            raise ValueError("unmatched_fraction must be in [0, 1)")


def _spread(total: int, buckets: int) -> list[int]:
    base, extra = divmod(total, buckets)
    return [base + (1 if i < extra else 0) for i in range(buckets)]


def synthetic_corpus(spec: SyntheticSpec = SyntheticSpec()) -> tuple[Corpus, SeedLexicon]:
    """Build (corpus, lexicon) with the planted noise rate exact by count.

    The number of mismatched documents is fixed (not sampled), so the
    seed-matching noise rate over matched documents equals
    round(noise_rate * n_matched) / n_matched regardless of the seed.
    With unmatched_fraction > 0 a slice of documents receives no seed
    token at all and feeds the unlabeled pool.
    """
    rng = np.random.default_rng(spec.rng_seed)
    names = _CLASS_NAMES[: spec.n_classes]
    classes = ClassSet(tuple(names))

    class_vocab = {
        name: [f"{name}word{j:02d}" for j in range(spec.class_vocab_size)] for name in names
    }
    filler_vocab = [f"filler{j:03d}" for j in range(spec.filler_vocab_size)]
    seed_tokens = {
        name: [f"{name}seed{j}" for j in range(spec.seeds_per_class)] for name in names
    }
    lexicon = SeedLexicon({name: frozenset(seed_tokens[name]) for name in names})

    gold = [names[i % spec.n_classes] for i in range(spec.n_docs)]

    n_unmatched = round(spec.unmatched_fraction * spec.n_docs)
    n_matched = spec.n_docs - n_unmatched
    n_flipped = round(spec.noise_rate * n_matched)

    # Round-robin over classes keeps both the unmatched slice and the
    # flipped slice balanced; which documents they hit is random.
    per_class_positions = {name: [] for name in names}
    for position, label in enumerate(gold):
        per_class_positions[label].append(position)

    unmatched: set[int] = set()
    for name, quota in zip(names, _spread(n_unmatched, spec.n_classes)):
        positions = per_class_positions[name]
        chosen = rng.choice(len(positions), size=quota, replace=False)
        unmatched.update(positions[i] for i in chosen)

    flipped: dict[int, str] = {}
    for name, quota in zip(names, _spread(n_flipped, spec.n_classes)):
        candidates = [p for p in per_class_positions[name] if p not in unmatched]
        chosen = rng.choice(len(candidates), size=quota, replace=False)
        others = [other for other in names if other != name]
        for i in chosen:
            flipped[candidates[i]] = others[rng.integers(len(others))]

    documents = []
    for position, label in enumerate(gold):
        vocab = class_vocab[label]
        tokens = [vocab[i] for i in rng.integers(len(vocab), size=spec.indicative_per_doc)]
        tokens.extend(
            filler_vocab[i] for i in rng.integers(len(filler_vocab), size=spec.filler_per_doc)
        )
        if position not in unmatched:
            planted_class = flipped.get(position, label)
            seed = seed_tokens[planted_class][rng.integers(spec.seeds_per_class)]
            tokens.extend([seed] * spec.seed_occurrences)
        order = rng.permutation(len(tokens))
        text = " ".join(tokens[i] for i in order)
        documents.append(Document.from_text(f"doc{position:05d}", text, gold_label=label))

    return Corpus.build(documents, classes), lexicon
