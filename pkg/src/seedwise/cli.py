"""Command-line front end.

Subcommands: label, corrupt, train, select, run, analyze, synth-noise.
Bare invocations use the reference protocol defaults (deletion ratio 0.9,
50% selection, 5 self-training iterations, 4 training epochs). For `run`,
values from --config are applied over the defaults and explicit flags win
over both. Exit codes: 0 success, 2 usage or validation error, 1 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import analysis, selection, selftrain, weaklabel
from .corpus import Corpus, load_corpus, load_seed_lexicon
from .corrupt import (
    KIND_NONE,
    KIND_RANDOM_DELETION,
    KIND_SEED_DELETION,
    KINDS,
    CorruptionSpec,
    corrupt_dataset,
)
from .model import TrainConfig, load_model, save_model, score_dataset, train
from .seeding import child_seed
from .selftrain import SelfTrainConfig, run_pipeline
from .weaklabel import load_pseudo_labels, noise_stats, save_pseudo_labels, seed_match, synthesize_flip_noise

OUTPUT_ROOT_ENV = "SEEDWISE_OUTPUT_ROOT"

RUN_DEFAULTS = {
    "corpus": None,
    "format": None,
    "seeds": None,
    "kind": KIND_RANDOM_DELETION,
    "deletion_ratio": 0.9,
    "resample_per_epoch": False,
    "selection_fraction": 0.5,
    "merge_fraction": 0.1,
    "iterations": 5,
    "epochs": 4,
    "learning_rate": 0.1,
    "batch_size": 32,
    "hash_dim": 1 << 18,
    "evaluate_on": "original",
    "oracle_selection": False,
    "seed": 0,
}


def _out_dir(args: argparse.Namespace, command: str) -> Path:
    if args.out is not None:
        out = Path(args.out)
    else:
        out = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(out: Path, command: str, params: dict) -> None:
    payload = {"command": command, **params}
    (out / "config_resolved.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8"
    )


def _infer_format(path: str, explicit: str | None) -> str:
    if explicit:
        return explicit
    return "csv" if Path(path).suffix.lower() == ".csv" else "jsonl"


def _load_corpus_and_lexicon(args: argparse.Namespace, require_seeds: bool = False):
    lexicon = None
    if getattr(args, "seeds", None):
        lexicon = load_seed_lexicon(args.seeds)
    elif require_seeds:
        raise ValueError("a seed lexicon is required (--seeds)")
    fmt = _infer_format(args.corpus, getattr(args, "format", None))
    corpus = load_corpus(args.corpus, fmt)
    if len(corpus.classes) == 0:
        if lexicon is None:
            raise ValueError("corpus has no gold labels; provide --seeds for class names")
        corpus = corpus.with_classes(lexicon.classes)
    return corpus, lexicon


def _load_dataset(args: argparse.Namespace, corpus: Corpus, lexicon):
    if getattr(args, "labels", None):
        return load_pseudo_labels(args.labels, corpus)
    if lexicon is None:
        raise ValueError("either --labels or --seeds is required")
    return seed_match(corpus, lexicon)


def _corruption_spec(args: argparse.Namespace, seed: int) -> CorruptionSpec:
    return CorruptionSpec(
        kind=args.kind,
        deletion_ratio=args.ratio,
        rng_seed=child_seed(seed, "corrupt"),
        resample_per_epoch=getattr(args, "resample_per_epoch", False),
    )


def cmd_label(args: argparse.Namespace) -> int:
    out = _out_dir(args, "label")
    corpus, lexicon = _load_corpus_and_lexicon(args, require_seeds=True)
    dataset = seed_match(corpus, lexicon)
    save_pseudo_labels(dataset, out / "pseudo_labels.jsonl")
    print(f"matched {len(dataset.entries)}/{len(corpus)} documents")

    have_gold = all(
        corpus.doc(e.doc_id).gold_label is not None for e in dataset.entries
    ) and len(dataset.entries) > 0
    if have_gold:
        matrix = noise_stats(dataset)
        matrix.write_counts_csv(out / "transition_counts.csv")
        matrix.write_rates_csv(out / "transition_rates.csv")
        print(f"overall noise rate: {matrix.overall_noise_rate * 100:.2f}%")
    else:
        print("gold labels unavailable; skipping transition matrix")
    _echo_config(out, "label", {"corpus": args.corpus, "seeds": args.seeds,
                                "format": _infer_format(args.corpus, args.format)})
    return 0


def cmd_corrupt(args: argparse.Namespace) -> int:
    out = _out_dir(args, "corrupt")
    if args.kind == KIND_SEED_DELETION and not args.seeds:
        raise ValueError("seed-deletion requires --seeds")
    corpus, lexicon = _load_corpus_and_lexicon(args)
    dataset = _load_dataset(args, corpus, lexicon)
    spec = _corruption_spec(args, args.seed)
    corrupted = corrupt_dataset(dataset, lexicon, spec)
    corrupted.save_jsonl(out / "corrupted.jsonl")
    print(f"corrupted {len(corrupted)} documents ({spec.kind})")
    _echo_config(out, "corrupt", {
        "corpus": args.corpus, "seeds": args.seeds, "labels": args.labels,
        "kind": args.kind, "deletion_ratio": args.ratio, "seed": args.seed,
    })
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    out = _out_dir(args, "train")
    if args.kind == KIND_SEED_DELETION and not args.seeds:
        raise ValueError("seed-deletion requires --seeds")
    corpus, lexicon = _load_corpus_and_lexicon(args)
    dataset = _load_dataset(args, corpus, lexicon)
    spec = _corruption_spec(args, args.seed)
    corrupted = corrupt_dataset(dataset, lexicon, spec) if spec.kind != KIND_NONE else dataset
    config = TrainConfig(
        epochs=args.epochs, learning_rate=args.learning_rate, batch_size=args.batch_size,
        rng_seed=child_seed(args.seed, "train"), hash_dim=args.hash_dim,
    )
    model = train(corrupted, config)
    save_model(model, out / "model.bin")
    trace = model.metadata["loss_trace"]
    lines = ["epoch,mean_loss"] + [f"{i},{loss:.6f}" for i, loss in enumerate(trace)]
    (out / "loss_trace.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"trained on {model.metadata['num_examples']} documents; "
          f"final loss {trace[-1]:.4f}" if trace else "trained (0 epochs)")
    _echo_config(out, "train", {
        "corpus": args.corpus, "seeds": args.seeds, "labels": args.labels,
        "kind": args.kind, "deletion_ratio": args.ratio, "epochs": args.epochs,
        "learning_rate": args.learning_rate, "batch_size": args.batch_size,
        "hash_dim": args.hash_dim, "seed": args.seed,
    })
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    out = _out_dir(args, "select")
    corpus, lexicon = _load_corpus_and_lexicon(args)
    dataset = _load_dataset(args, corpus, lexicon)
    model = load_model(args.model)
    scores = score_dataset(model, dataset)
    report = selection.select_top(dataset, scores, args.fraction)
    report.to_json(out / "selection.json")
    if report.noise_rate is not None:
        print(f"selected {len(report.selected_ids)} entries; "
              f"noise rate {report.noise_rate * 100:.2f}%")
    else:
        print(f"selected {len(report.selected_ids)} entries (no gold labels)")
    if args.fractions:
        points = selection.noise_curve(dataset, scores, _parse_floats(args.fractions))
        selection.write_noise_curve_csv(points, out / "noise_curve.csv")
    _echo_config(out, "select", {
        "corpus": args.corpus, "seeds": args.seeds, "labels": args.labels,
        "model": args.model, "fraction": args.fraction, "fractions": args.fractions,
    })
    return 0


def _merge_run_params(args: argparse.Namespace) -> dict:
    params = dict(RUN_DEFAULTS)
    if args.config:
        loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(loaded) - set(RUN_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        params.update(loaded)
    for key in RUN_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    if not params["corpus"] or not params["seeds"]:
        raise ValueError("run requires corpus and seeds (flags or config file)")
    return params


def cmd_run(args: argparse.Namespace) -> int:
    out = _out_dir(args, "run")
    params = _merge_run_params(args)
    lexicon = load_seed_lexicon(params["seeds"])
    fmt = _infer_format(params["corpus"], params["format"])
    corpus = load_corpus(params["corpus"], fmt)
    if len(corpus.classes) == 0:
        corpus = corpus.with_classes(lexicon.classes)

    seed = params["seed"]
    config = SelfTrainConfig(
        iterations=params["iterations"],
        merge_fraction=params["merge_fraction"],
        selection_fraction=params["selection_fraction"],
        corruption=CorruptionSpec(
            kind=params["kind"],
            deletion_ratio=params["deletion_ratio"],
            rng_seed=child_seed(seed, "corrupt"),
            resample_per_epoch=params["resample_per_epoch"],
        ),
        training=TrainConfig(
            epochs=params["epochs"],
            learning_rate=params["learning_rate"],
            batch_size=params["batch_size"],
            rng_seed=child_seed(seed, "train"),
            hash_dim=params["hash_dim"],
        ),
        evaluate_on=params["evaluate_on"],
        oracle_selection=params["oracle_selection"],
    )
    model, ledger = run_pipeline(corpus, lexicon, config)
    ledger.to_json(out / "ledger.json")
    ledger.to_csv(out / "metrics.csv")
    save_model(model, out / "model.bin")
    last = ledger.records[-1]
    if last.micro_f1 is not None:
        print(f"final micro-F1 {last.micro_f1:.4f}, macro-F1 {last.macro_f1:.4f} "
              f"({last.train_size} training documents)")
    else:
        print(f"run complete ({last.train_size} training documents, no gold labels)")
    _echo_config(out, "run", params)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    out = _out_dir(args, "analyze")
    if args.sweep == "rsd":
        ratios = _grid(args.ratio_step)
        result = analysis.seed_deletion_rate_sweep(
            n_seed=args.n_seed,
            n_indicative_values=_parse_ints(args.n_indicative),
            ratios=ratios,
            trials=args.trials,
            rng_seed=child_seed(args.seed, "mc"),
            include_fixed_count=args.fixed_count,
        )
        result.write_csv(out / "seed_deletion_rate.csv")
        result.write_best_ratio_csv(out / "best_ratio.csv")
        for (n_seed, n_indicative), ratio in sorted(result.best_ratio.items()):
            print(f"n_seed={n_seed} n_indicative={n_indicative}: best ratio {ratio:.3f}")
    elif args.sweep == "noise-curve":
        corpus, lexicon = _load_corpus_and_lexicon(args, require_seeds=True)
        dataset = seed_match(corpus, lexicon)
        config = _self_train_config_for_sweep(args, args.seed)
        _, scores, _ = selftrain.rank_and_select(dataset, lexicon, config)
        points = selection.noise_curve(dataset, scores, _parse_floats(args.fractions))
        selection.write_noise_curve_csv(points, out / "noise_curve.csv")
        for fraction, rate in points:
            print(f"fraction {fraction:.2f}: noise rate {rate * 100:.2f}%")
    elif args.sweep == "deletion-ratio":
        corpus, lexicon = _load_corpus_and_lexicon(args, require_seeds=True)
        dataset = seed_match(corpus, lexicon)
        lines = ["deletion_ratio,noise_rate"]
        for i, ratio in enumerate(_parse_floats(args.ratios)):
            config = _self_train_config_for_sweep(
                args, child_seed(args.seed, f"grid:{i}"),
                kind=KIND_RANDOM_DELETION, ratio=ratio,
            )
            _, _, report = selftrain.rank_and_select(dataset, lexicon, config)
            lines.append(f"{ratio:.6f},{report.noise_rate:.6f}")
            print(f"ratio {ratio:.2f}: noise at {args.fraction:.0%} selection "
                  f"{report.noise_rate * 100:.2f}%")
        (out / "deletion_ratio_sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:  # pragma: no cover - argparse choices guard this
        raise ValueError(f"unknown sweep: {args.sweep!r}")
    _echo_config(out, "analyze", {k: v for k, v in vars(args).items() if k != "func"})
    return 0


def _self_train_config_for_sweep(
    args: argparse.Namespace, seed: int, kind: str | None = None, ratio: float | None = None
) -> SelfTrainConfig:
    return SelfTrainConfig(
        iterations=0,
        selection_fraction=args.fraction,
        corruption=CorruptionSpec(
            kind=kind if kind is not None else args.kind,
            deletion_ratio=ratio if ratio is not None else args.ratio,
            rng_seed=child_seed(seed, "corrupt"),
        ),
        training=TrainConfig(
            epochs=args.epochs, rng_seed=child_seed(seed, "train"), hash_dim=args.hash_dim,
        ),
    )


def cmd_synth_noise(args: argparse.Namespace) -> int:
    out = _out_dir(args, "synth-noise")
    corpus, lexicon = _load_corpus_and_lexicon(args)
    dataset = _load_dataset(args, corpus, lexicon)
    synthesized = synthesize_flip_noise(dataset, child_seed(args.seed, "flip"))
    save_pseudo_labels(synthesized, out / "synthesized.jsonl")
    original = noise_stats(dataset)
    flipped = noise_stats(synthesized)
    original.write_counts_csv(out / "transition_counts_original.csv")
    flipped.write_counts_csv(out / "transition_counts_synthesized.csv")
    match = "identical" if original == flipped else "DIFFERENT (bug)"
    print(f"transition matrices: {match}; overall noise rate "
          f"{original.overall_noise_rate * 100:.2f}%")
    _echo_config(out, "synth-noise", {
        "corpus": args.corpus, "seeds": args.seeds, "labels": args.labels, "seed": args.seed,
    })
    return 0


def _parse_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _grid(step: float) -> list[float]:
    count = round(1.0 / step)
    return [i * step for i in range(count + 1)]


def _add_io_args(parser: argparse.ArgumentParser, labels: bool = False) -> None:
    parser.add_argument("--corpus", required=True, help="corpus file (JSONL or CSV)")
    parser.add_argument("--format", choices=["jsonl", "csv"], default=None,
                        help="corpus format (default: by file extension)")
    parser.add_argument("--seeds", default=None, help="seed lexicon JSON file")
    if labels:
        parser.add_argument("--labels", default=None,
                            help="pseudo-label JSONL (default: run seed matching)")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=None,
                        help=f"output directory (default: ${OUTPUT_ROOT_ENV}/<command>)")
    parser.add_argument("--seed", type=int, default=0, help="root RNG seed")


def _add_corruption_args(parser: argparse.ArgumentParser, default_kind: str) -> None:
    parser.add_argument("--kind", choices=KINDS, default=default_kind)
    parser.add_argument("--ratio", type=float, default=0.9, help="random-deletion ratio")
    parser.add_argument("--resample-per-epoch", action="store_true", dest="resample_per_epoch")


def _add_training_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=4)
    parser.add_argument("--learning-rate", type=float, default=0.1)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--hash-dim", type=int, default=1 << 18)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seedwise",
        description="Seed-matching weak supervision with deletion-based debiasing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("label", help="seed-match a corpus and report noise statistics")
    _add_io_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("corrupt", help="apply seed deletion or random deletion")
    _add_io_args(p, labels=True)
    _add_corruption_args(p, default_kind=KIND_RANDOM_DELETION)
    _add_common(p)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("train", help="train the confidence classifier")
    _add_io_args(p, labels=True)
    _add_corruption_args(p, default_kind=KIND_NONE)
    _add_training_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("select", help="rank pseudo-labels by confidence and select")
    _add_io_args(p, labels=True)
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--fractions", default=None,
                   help="comma-separated fractions for a noise curve CSV")
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("run", help="full pipeline: match, corrupt, select, self-train")
    p.add_argument("--config", default=None, help="JSON config file (flags override)")
    p.add_argument("--corpus", default=None)
    p.add_argument("--format", choices=["jsonl", "csv"], default=None)
    p.add_argument("--seeds", default=None)
    p.add_argument("--kind", choices=KINDS, default=None)
    p.add_argument("--deletion-ratio", type=float, default=None, dest="deletion_ratio")
    p.add_argument("--resample-per-epoch", action="store_const", const=True, default=None,
                   dest="resample_per_epoch")
    p.add_argument("--selection-fraction", type=float, default=None, dest="selection_fraction")
    p.add_argument("--merge-fraction", type=float, default=None, dest="merge_fraction")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None, dest="learning_rate")
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--hash-dim", type=int, default=None, dest="hash_dim")
    p.add_argument("--evaluate-on", choices=["original", "corrupted"], default=None,
                   dest="evaluate_on")
    p.add_argument("--oracle-selection", action="store_const", const=True, default=None,
                   dest="oracle_selection")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="emit sweep tables (rates, curves)")
    p.add_argument("--sweep", choices=["rsd", "noise-curve", "deletion-ratio"], required=True)
    p.add_argument("--corpus", default=None)
    p.add_argument("--format", choices=["jsonl", "csv"], default=None)
    p.add_argument("--seeds", default=None)
    p.add_argument("--n-seed", type=int, default=1, dest="n_seed")
    p.add_argument("--n-indicative", default="1,5,10,50,200", dest="n_indicative")
    p.add_argument("--ratio-step", type=float, default=0.01, dest="ratio_step")
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--fixed-count", action="store_true", dest="fixed_count")
    p.add_argument("--kind", choices=KINDS, default=KIND_NONE)
    p.add_argument("--ratio", type=float, default=0.9)
    p.add_argument("--ratios", default="0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--fractions", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    _add_training_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth-noise", help="synthesize matched random-flipping noise")
    _add_io_args(p, labels=True)
    _add_common(p)
    p.set_defaults(func=cmd_synth_noise)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
