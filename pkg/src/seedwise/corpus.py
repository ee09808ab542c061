"""Corpora, tokenization, and seed lexicons.

Everything downstream (matching, corruption, training) operates on the
token sequences produced here, so the tokenizer is deliberately dumb and
deterministic: lowercase, split on whitespace and punctuation, keep
everything else. Seeds are single whole tokens by construction.
"""

from __future__ import annotations

import csv
import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence


class _SeparatorTable(dict):
    """Lazy str.translate table sending punctuation codepoints to a space.

    Caches one entry per distinct codepoint, so the unicodedata lookup is
    paid once per character ever seen rather than once per character read.
    """

    def __missing__(self, codepoint: int) -> str:
        ch = chr(codepoint)
        mapped = " " if unicodedata.category(ch).startswith("P") else ch
        self[codepoint] = mapped
        return mapped


_SEPARATORS = _SeparatorTable()


def tokenize(raw_text: str) -> list[str]:
    """Lowercase and split into tokens.

    A token is a maximal run of characters that are neither Unicode
    whitespace nor punctuation (category P*). Punctuation-only spans
    disappear; digits and symbol characters stay inside tokens. Empty
    input yields an empty list.
    """
    return raw_text.lower().translate(_SEPARATORS).split()


@dataclass(frozen=True)
class Document:
    """One document: stable id, raw text, its token sequence, optional gold label."""

    id: str
    raw_text: str
    tokens: tuple[str, ...]
    gold_label: str | None = None

    @classmethod
    def from_text(cls, id: str, raw_text: str, gold_label: str | None = None) -> "Document":
        return cls(id=id, raw_text=raw_text, tokens=tuple(tokenize(raw_text)), gold_label=gold_label)


@dataclass(frozen=True)
class ClassSet:
    """Ordered class names with dense integer ids (0..K-1)."""

    names: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique")
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(names)})

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ValueError(f"unknown class name: {name!r}") from None

    def name_of(self, class_id: int) -> str:
        return self.names[class_id]


@dataclass(frozen=True)
class SeedLexicon:
    """Per-class sets of seed tokens.

    Each seed is a single token under `tokenize`, and no token may be a
    seed for two classes; both are checked at load time.
    """

    class_seeds: Mapping[str, frozenset[str]]
    token_class: dict[str, str] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        normalized = {name: frozenset(seeds) for name, seeds in self.class_seeds.items()}
        object.__setattr__(self, "class_seeds", normalized)
        owner: dict[str, str] = {}
        for name, seeds in normalized.items():
            for seed in seeds:
                if seed in owner:
                    raise ValueError(
                        f"seed {seed!r} appears in both {owner[seed]!r} and {name!r}"
                    )
                owner[seed] = name
        object.__setattr__(self, "token_class", owner)

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(self.class_seeds)

    def seeds_for(self, class_name: str) -> frozenset[str]:
        """Seed set for a class; empty for classes the lexicon does not cover."""
        return self.class_seeds.get(class_name, frozenset())

    def all_seeds(self) -> frozenset[str]:
        return frozenset(self.token_class)


@dataclass(frozen=True)
class Corpus:
    """Immutable snapshot of documents plus class names and document frequencies."""

    documents: tuple[Document, ...]
    classes: ClassSet
    vocabulary: Mapping[str, int]
    _by_id: dict[str, Document] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        by_id: dict[str, Document] = {}
        for doc in self.documents:
            if doc.id in by_id:
                raise ValueError(f"duplicate document id: {doc.id!r}")
            by_id[doc.id] = doc
        object.__setattr__(self, "_by_id", by_id)
        for doc in self.documents:
            if doc.gold_label is not None and doc.gold_label not in self.classes:
                raise ValueError(
                    f"document {doc.id!r} has unknown class name {doc.gold_label!r}"
                )

    @classmethod
    def build(cls, documents: Sequence[Document], classes: ClassSet) -> "Corpus":
        vocabulary = Counter()
        for doc in documents:
            vocabulary.update(set(doc.tokens))
        return cls(documents=tuple(documents), classes=classes, vocabulary=dict(vocabulary))

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def doc(self, doc_id: str) -> Document:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise ValueError(f"unknown document id: {doc_id!r}") from None

    def ids(self) -> list[str]:
        return [doc.id for doc in self.documents]

    def with_classes(self, names: Sequence[str]) -> "Corpus":
        """Same documents under an explicit class list (e.g. taken from a lexicon)."""
        return Corpus(
            documents=self.documents,
            classes=ClassSet(tuple(names)),
            vocabulary=self.vocabulary,
        )


def _records_from_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise ValueError(f"{path}:{lineno}: record is not an object")
            yield lineno, record


def _records_from_csv(path: Path) -> Iterator[tuple[int, dict]]:
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not {"id", "text"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: CSV header must contain 'id' and 'text'")
        for row in reader:
            record = {"id": row.get("id"), "text": row.get("text")}
            label = row.get("label")
            if label:
                record["label"] = label
            yield reader.line_num, record


def load_corpus(
    path: str | Path,
    format: str = "jsonl",
    classes: Sequence[str] | None = None,
) -> Corpus:
    """Load a corpus from JSONL ({"id", "text", "label"?} per line) or CSV.

    Input order is preserved. When `classes` is given, every gold label must
    belong to it; otherwise the class set is the sorted distinct gold labels
    found in the file (empty for fully unlabeled corpora).
    """
    path = Path(path)
    if format == "jsonl":
        records = _records_from_jsonl(path)
    elif format == "csv":
        records = _records_from_csv(path)
    else:
        raise ValueError(f"unknown corpus format: {format!r}")

    rows: list[tuple[int, str, str, str | None]] = []
    seen: set[str] = set()
    for lineno, record in records:
        doc_id = record.get("id")
        text = record.get("text")
        if doc_id is None or not isinstance(doc_id, str):
            raise ValueError(f"{path}:{lineno}: record missing string 'id' field")
        if text is None or not isinstance(text, str):
            raise ValueError(f"{path}:{lineno}: record missing string 'text' field")
        if doc_id in seen:
            raise ValueError(f"{path}:{lineno}: duplicate document id: {doc_id!r}")
        seen.add(doc_id)
        label = record.get("label")
        if label is not None and not isinstance(label, str):
            raise ValueError(f"{path}:{lineno}: 'label' must be a string when present")
        rows.append((lineno, doc_id, text, label))

    if classes is None:
        class_names = tuple(sorted({label for _, _, _, label in rows if label is not None}))
    else:
        class_names = tuple(classes)
        known = set(class_names)
        for lineno, doc_id, _, label in rows:
            if label is not None and label not in known:
                raise ValueError(f"{path}:{lineno}: unknown class name {label!r}")

    documents = [Document.from_text(doc_id, text, label) for _, doc_id, text, label in rows]
    return Corpus.build(documents, ClassSet(class_names))


def save_corpus(corpus: Corpus, path: str | Path, format: str = "jsonl") -> None:
    """Write a corpus back out; round-trips (id, text, label) exactly."""
    path = Path(path)
    if format == "jsonl":
        with path.open("w", encoding="utf-8") as handle:
            for doc in corpus:
                record: dict = {"id": doc.id, "text": doc.raw_text}
                if doc.gold_label is not None:
                    record["label"] = doc.gold_label
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    elif format == "csv":
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["id", "text", "label"])
            for doc in corpus:
                writer.writerow([doc.id, doc.raw_text, doc.gold_label or ""])
    else:
        raise ValueError(f"unknown corpus format: {format!r}")


def load_seed_lexicon(path: str | Path) -> SeedLexicon:
    """Load a JSON object {class: [seed, ...]}.

    Seeds are normalized by the corpus tokenizer and deduplicated per class.
    A seed that tokenizes to zero or several tokens is rejected, as is a
    seed claimed by two classes.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        raw = json.load(handle)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: seed lexicon must be a JSON object")

    class_seeds: dict[str, frozenset[str]] = {}
    for name, seeds in raw.items():
        if not isinstance(seeds, list) or not all(isinstance(s, str) for s in seeds):
            raise ValueError(f"{path}: seeds for class {name!r} must be a list of strings")
        normalized = set()
        for seed in seeds:
            tokens = tokenize(seed)
            if len(tokens) != 1:
                raise ValueError(
                    f"{path}: seed {seed!r} for class {name!r} tokenizes to "
                    f"{len(tokens)} tokens; seeds must be single tokens"
                )
            normalized.add(tokens[0])
        class_seeds[name] = frozenset(normalized)
    return SeedLexicon(class_seeds)


def save_seed_lexicon(lexicon: SeedLexicon, path: str | Path) -> None:
    payload = {name: sorted(seeds) for name, seeds in lexicon.class_seeds.items()}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
