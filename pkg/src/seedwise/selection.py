"""Confidence-ranked pseudo-label selection and its noise diagnostics."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .model import ConfidenceScore
from .weaklabel import PseudoLabeledDataset


def selected_count(n: int, fraction: float) -> int:
    """Nearest-integer share of n (half rounds up), never below 1."""
    return max(1, math.floor(fraction * n + 0.5))


@dataclass
class SelectionReport:
    fraction: float
    selected_ids: tuple[str, ...]  # descending confidence, ties by ascending id
    noise_rate: float | None       # None when gold labels are unavailable
    per_class_counts: dict[str, int]

    def to_json(self, path: str | Path) -> None:
        payload = {
            "fraction": self.fraction,
            "selected": list(self.selected_ids),
            "noise_rate": self.noise_rate,
            "per_class_counts": dict(sorted(self.per_class_counts.items())),
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def _ranked_entries(dataset: PseudoLabeledDataset,
                    scores: Sequence[ConfidenceScore]) -> list[tuple[float, str, str]]:
    by_id: dict[str, float] = {}
    for score in scores:
        if score.doc_id in by_id:
            raise ValueError(f"duplicate score for document id: {score.doc_id!r}")
        by_id[score.doc_id] = score.confidence
    missing = [entry.doc_id for entry in dataset.entries if entry.doc_id not in by_id]
    if missing:
        shown = ", ".join(missing[:10])
        raise ValueError(f"missing confidence scores for entries: {shown}")
    ranked = [(by_id[e.doc_id], e.doc_id, e.label) for e in dataset.entries]
    ranked.sort(key=lambda item: (-item[0], item[1]))
    return ranked


def select_top(
    dataset: PseudoLabeledDataset,
    scores: Sequence[ConfidenceScore],
    fraction: float,
) -> SelectionReport:
    """Keep the most confident `fraction` of the labeled entries.

    Deterministic: equal confidences are broken by ascending document id,
    so the selected set at a smaller fraction is always a subset of the
    selected set at a larger one.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if not dataset.entries:
        raise ValueError("cannot select from a dataset with no labeled entries")
    ranked = _ranked_entries(dataset, scores)
    take = selected_count(len(ranked), fraction)
    chosen = ranked[:take]

    noise_rate: float | None = None
    golds = [dataset.corpus.doc(doc_id).gold_label for _, doc_id, _ in chosen]
    if all(g is not None for g in golds):
        wrong = sum(1 for (_, _, label), gold in zip(chosen, golds) if label != gold)
        noise_rate = wrong / take
    per_class = Counter(label for _, _, label in chosen)
    return SelectionReport(
        fraction=fraction,
        selected_ids=tuple(doc_id for _, doc_id, _ in chosen),
        noise_rate=noise_rate,
        per_class_counts=dict(per_class),
    )


def noise_curve(
    dataset: PseudoLabeledDataset,
    scores: Sequence[ConfidenceScore],
    fractions: Sequence[float],
) -> list[tuple[float, float]]:
    """Noise rate of the selected subset at each requested fraction."""
    if not fractions:
        raise ValueError("fractions must be non-empty")
    for entry in dataset.entries:
        if dataset.corpus.doc(entry.doc_id).gold_label is None:
            raise ValueError(f"noise_curve requires gold labels; {entry.doc_id!r} has none")
    points = []
    for fraction in fractions:
        report = select_top(dataset, scores, fraction)
        points.append((fraction, report.noise_rate))
    return points


def write_noise_curve_csv(points: Sequence[tuple[float, float]], path: str | Path) -> None:
    lines = ["fraction,noise_rate"]
    lines.extend(f"{fraction:.6f},{rate:.6f}" for fraction, rate in points)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
