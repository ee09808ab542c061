"""Seed-deletion odds (exact and simulated), F1 metrics, and sweep tables.

The central quantity: when every token of a document is independently
deleted with probability p, the chance that all n_s seed occurrences are
removed while at least one of the n_c class-indicative tokens survives is

    rate = p**n_s * (1 - p**n_c)

Driving that rate toward 1 is what makes blind random deletion behave
like seed deletion. A fixed-count variant (delete exactly ceil(p*n) of
n = n_s + n_c positions, capped at n-1) is provided for comparison with
the corruption actually applied to datasets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import ClassSet
from .corrupt import deletion_count
from .seeding import child_seed

_MC_CHUNK = 1 << 16


def _check_query(n_seed: int, n_indicative: int, p: float) -> None:
    if n_seed < 0 or n_indicative < 0:
        raise ValueError("token counts must be non-negative")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"deletion probability must be in [0, 1], got {p}")


def seed_deletion_rate(n_seed: int, n_indicative: int, p: float) -> float:
    """Exact p**n_s * (1 - p**n_c) under independent per-token deletion."""
    _check_query(n_seed, n_indicative, p)
    return p ** n_seed * (1.0 - p ** n_indicative)


def seed_deletion_rate_mc(
    n_seed: int, n_indicative: int, p: float, trials: int, rng_seed: int = 0
) -> float:
    """Monte-Carlo estimate of `seed_deletion_rate`.

    Simulates independent deletion over the n_s + n_c marked tokens and
    counts trials where every seed is deleted and an indicative token
    survives. Chunked to bound memory; deterministic per seed.
    """
    _check_query(n_seed, n_indicative, p)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng_seed)
    hits = 0
    remaining = trials
    while remaining > 0:
        chunk = min(remaining, _MC_CHUNK)
        deleted = rng.random((chunk, n_seed + n_indicative)) < p
        seeds_gone = deleted[:, :n_seed].all(axis=1)
        indicative_left = (
            ~deleted[:, n_seed:].all(axis=1)
            if n_indicative > 0
            else np.zeros(chunk, dtype=bool)
        )
        hits += int((seeds_gone & indicative_left).sum())
        remaining -= chunk
    return hits / trials


def seed_deletion_rate_fixed_count(n_seed: int, n_indicative: int, p: float) -> float:
    """Same event under fixed-count deletion of a document with n_s + n_c tokens.

    Exactly min(ceil(p*n), n-1) positions are removed without replacement,
    mirroring the dataset corruption; the probability is hypergeometric.
    """
    _check_query(n_seed, n_indicative, p)
    n = n_seed + n_indicative
    if n_indicative == 0 or n == 0:
        return 0.0
    m = deletion_count(n, p)
    if m < n_seed:
        return 0.0
    # P(all seeds among the m deleted); all-indicative-deleted needs m = n, impossible.
    return math.comb(n - n_seed, m - n_seed) / math.comb(n, m)


@dataclass(frozen=True)
class SweepRow:
    n_seed: int
    n_indicative: int
    ratio: float
    rate_exact: float
    rate_monte_carlo: float | None = None
    rate_fixed_count: float | None = None


@dataclass
class SweepResult:
    rows: list[SweepRow]
    best_ratio: dict[tuple[int, int], float]  # (n_seed, n_indicative) -> argmax p

    def write_csv(self, path: str | Path) -> None:
        has_mc = any(row.rate_monte_carlo is not None for row in self.rows)
        has_fixed = any(row.rate_fixed_count is not None for row in self.rows)
        header = ["n_seed", "n_indicative", "ratio", "rate_exact"]
        if has_mc:
            header.append("rate_monte_carlo")
        if has_fixed:
            header.append("rate_fixed_count")
        lines = [",".join(header)]
        for row in self.rows:
            cells = [str(row.n_seed), str(row.n_indicative),
                     f"{row.ratio:.6f}", f"{row.rate_exact:.6f}"]
            if has_mc:
                cells.append("" if row.rate_monte_carlo is None else f"{row.rate_monte_carlo:.6f}")
            if has_fixed:
                cells.append("" if row.rate_fixed_count is None else f"{row.rate_fixed_count:.6f}")
            lines.append(",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def write_best_ratio_csv(self, path: str | Path) -> None:
        lines = ["n_seed,n_indicative,best_ratio"]
        for (n_seed, n_indicative), ratio in sorted(self.best_ratio.items()):
            lines.append(f"{n_seed},{n_indicative},{ratio:.6f}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def seed_deletion_rate_sweep(
    n_seed: int,
    n_indicative_values: Sequence[int],
    ratios: Sequence[float],
    trials: int = 0,
    rng_seed: int = 0,
    include_fixed_count: bool = False,
) -> SweepResult:
    """Tabulate the rate over a grid and report the best ratio per row group.

    `trials > 0` adds a Monte-Carlo column with a child seed per grid
    point. The argmax is taken over the supplied grid of the exact rate.
    """
    if not n_indicative_values or not ratios:
        raise ValueError("sweep grids must be non-empty")
    rows: list[SweepRow] = []
    best: dict[tuple[int, int], float] = {}
    for n_indicative in n_indicative_values:
        best_ratio, best_rate = None, -1.0
        for i, p in enumerate(ratios):
            exact = seed_deletion_rate(n_seed, n_indicative, p)
            mc = None
            if trials > 0:
                point_seed = child_seed(rng_seed, f"mc:{n_seed}:{n_indicative}:{i}")
                mc = seed_deletion_rate_mc(n_seed, n_indicative, p, trials, point_seed)
            fixed = (
                seed_deletion_rate_fixed_count(n_seed, n_indicative, p)
                if include_fixed_count
                else None
            )
            rows.append(SweepRow(n_seed, n_indicative, float(p), exact, mc, fixed))
            if exact > best_rate:
                best_rate, best_ratio = exact, float(p)
        best[(n_seed, n_indicative)] = best_ratio
    return SweepResult(rows=rows, best_ratio=best)


@dataclass
class MetricsRecord:
    """Micro/macro F1 with per-class breakdown and the confusion matrix."""

    classes: tuple[str, ...]
    confusion: np.ndarray  # (K, K) int64, rows gold, columns predicted
    per_class: dict[str, dict[str, float]]
    micro_f1: float
    macro_f1: float
    warnings: tuple[str, ...]

    def to_json(self, path: str | Path) -> None:
        payload = {
            "classes": list(self.classes),
            "confusion": self.confusion.tolist(),
            "per_class": self.per_class,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "warnings": list(self.warnings),
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def f1_metrics(
    gold: Sequence[str],
    predicted: Sequence[str],
    classes: ClassSet | Sequence[str],
) -> MetricsRecord:
    """Standard per-class precision/recall/F1 plus micro and macro averages.

    Macro averages over classes that appear in the gold labels; classes
    absent from gold are excluded and flagged. 0/0 ratios are taken as 0
    and flagged. Micro-F1 is computed from global counts, which for
    single-label prediction with full coverage equals accuracy.
    """
    if len(gold) != len(predicted):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(predicted)} predicted")
    class_set = classes if isinstance(classes, ClassSet) else ClassSet(tuple(classes))
    k = len(class_set)
    confusion = np.zeros((k, k), dtype=np.int64)
    for g, p in zip(gold, predicted):
        confusion[class_set.id_of(g), class_set.id_of(p)] += 1

    warnings: list[str] = []
    per_class: dict[str, dict[str, float]] = {}
    macro_terms: list[float] = []
    for i, name in enumerate(class_set):
        tp = int(confusion[i, i])
        fp = int(confusion[:, i].sum() - tp)
        fn = int(confusion[i, :].sum() - tp)
        support = tp + fn
        if tp + fp == 0:
            precision = 0.0
            if support > 0:
                warnings.append(f"class {name!r} never predicted; precision taken as 0")
        else:
            precision = tp / (tp + fp)
        recall = tp / support if support > 0 else 0.0
        f1 = _f1(precision, recall)
        per_class[name] = {
            "precision": precision, "recall": recall, "f1": f1, "support": support,
        }
        if support > 0:
            macro_terms.append(f1)
        else:
            if fp == 0:
                warnings.append(f"class {name!r} absent from gold and predictions; excluded from macro")
            else:
                warnings.append(f"class {name!r} absent from gold; excluded from macro")

    total = int(confusion.sum())
    tp_total = int(np.trace(confusion))
    fp_total = total - tp_total
    fn_total = total - tp_total
    micro_precision = tp_total / (tp_total + fp_total) if total > 0 else 0.0
    micro_recall = tp_total / (tp_total + fn_total) if total > 0 else 0.0
    micro = _f1(micro_precision, micro_recall)
    macro = sum(macro_terms) / len(macro_terms) if macro_terms else 0.0
    return MetricsRecord(
        classes=tuple(class_set.names),
        confusion=confusion,
        per_class=per_class,
        micro_f1=micro,
        macro_f1=macro,
        warnings=tuple(warnings),
    )
