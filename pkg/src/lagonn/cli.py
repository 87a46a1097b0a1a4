"""Command-line entry points.

Subcommands:

- ``run``: execute growing-data runs for a (variants x regimes x seeds)
  grid, writing one CSV shard per run.
- ``report``: aggregate shards into a CSV and a plain-text table.
- ``make-synthetic``: emit a linearly separable synthetic corpus with an
  aligned embedding store.

Exit codes are part of the contract: 0 success, 1 configuration error,
2 pending embeddings (a store-backed encoder was missing texts; the
pending-texts manifest lists them), 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .adapter import AdapterConfig, DivergenceError
from .data import DatasetError, LabeledDataset, load_dataset, load_label_map, render_input
from .decoration import DecorationError, DecoratorConfig, MODES
from .encoders import MissingEmbedding, MissingEmbeddings, StoreFormatError, parse_encoder_spec
from .harness import (
    HarnessError,
    REGIMES,
    RunResult,
    aggregate,
    read_shard,
    render_report_csv,
    render_report_text,
    run_protocol,
    sample_step,
    write_shard,
)
from .pipeline import PipelineConfig, VARIANTS
from .synthetic import SyntheticConfigError, make_synthetic

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PENDING = 2
EXIT_DIVERGENCE = 3

PENDING_MANIFEST = "pending.jsonl"


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit 1 (2 means pending embeddings)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="lagonn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="execute growing-data runs and write result shards")
    run.add_argument("--dataset", nargs=2, metavar=("TRAIN", "TEST"), required=True)
    run.add_argument("--labels", required=True, help="label map JSONL path")
    run.add_argument("--encoder", required=True, help="hash:<dim> | store:<path> | synth:<path>")
    run.add_argument("--variants", nargs="+", default=list(VARIANTS))
    run.add_argument("--regimes", nargs="+", default=list(REGIMES))
    run.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2, 3, 4])
    run.add_argument("--mode", default="LABEL", choices=MODES)
    run.add_argument("--separator", default="[SEP]")
    run.add_argument("--distance-decimals", type=int, default=1)
    run.add_argument("--steps", type=int, default=10)
    run.add_argument("--head", default="logreg", choices=("logreg", "knn"))
    run.add_argument("--knn-k", type=int, default=3)
    run.add_argument("--l2", type=float, default=1.0)
    run.add_argument("--adapter-pairs", type=int, default=20)
    run.add_argument("--adapter-epochs", type=int, default=10)
    run.add_argument("--adapter-lr", type=float, default=0.05)
    run.add_argument("--out", required=True, help="output directory for shards")
    run.add_argument("--jobs", type=int, default=1)

    report = sub.add_parser("report", help="aggregate result shards")
    report.add_argument("--shards", required=True, help="directory of shard CSVs")
    report.add_argument("--out", required=True, help="output directory for report files")

    synth = sub.add_parser("make-synthetic", help="emit a separable synthetic corpus")
    synth.add_argument("--per-class", type=int, default=1000)
    synth.add_argument("--classes", type=int, default=2)
    synth.add_argument("--dim", type=int, default=64)
    synth.add_argument("--margin", type=float, default=4.0)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--test-per-class", type=int, default=50)
    synth.add_argument("--out", required=True)
    return parser


def _write_pending_manifest(path: str, pending: dict[str, str]) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        for sha in sorted(pending):
            fh.write(json.dumps({"sha256": sha, "text": pending[sha]}) + "\n")
    os.replace(tmp, path)


def _prescan_store(encoder, datasets: list[LabeledDataset], separator: str) -> dict[str, str]:
    """Probe every raw rendered text against a store-backed encoder."""
    if not hasattr(encoder, "store"):
        return {}
    pending: dict[str, str] = {}
    for dataset in datasets:
        for ex in dataset:
            text = render_input(ex, separator)
            try:
                encoder.encode(text)
            except MissingEmbedding as miss:
                pending[miss.key_hex] = miss.text
    return pending


def _shard_name(variant: str, regime: str, seed: int) -> str:
    return f"{variant}_{regime}_{seed}.csv"


def _pipeline_config(cfg_fields: dict, seed: int) -> PipelineConfig:
    return PipelineConfig(
        decorator=DecoratorConfig(
            mode=cfg_fields["mode"],
            separator=cfg_fields["separator"],
            distance_decimals=cfg_fields["distance_decimals"],
        ),
        adapter=AdapterConfig(
            pairs_per_example=cfg_fields["adapter_pairs"],
            epochs=cfg_fields["adapter_epochs"],
            learning_rate=cfg_fields["adapter_lr"],
        ),
        l2_strength=cfg_fields["l2"],
        head=cfg_fields["head"],
        knn_k=cfg_fields["knn_k"],
        seed=seed,
    )


def _execute_run(variant, regime, seed, pool, test, encoder, cfg_fields, steps, out_dir):
    """One (variant, regime, seed) run: protocol + shard, or a pending miss."""
    config = _pipeline_config(cfg_fields, seed)
    try:
        results = run_protocol(
            VARIANTS[variant], REGIMES[regime], seed, pool, test, encoder, config,
            steps=steps,
        )
    except MissingEmbedding as miss:
        return "missing", {miss.key_hex: miss.text}
    except MissingEmbeddings as misses:
        return "missing", misses.pending
    write_shard(os.path.join(out_dir, _shard_name(variant, regime, seed)), results)
    return "ok", len(results)


def _run_one(task) -> tuple[str, object]:
    """Self-contained worker for --jobs > 1 (reloads data per process)."""
    (train_path, test_path, labels_path, encoder_spec,
     variant, regime, seed, cfg_fields, steps, out_dir) = task
    label_map = load_label_map(labels_path)
    pool = load_dataset(train_path, label_map)
    test = load_dataset(test_path, label_map)
    encoder = parse_encoder_spec(encoder_spec)
    return _execute_run(variant, regime, seed, pool, test, encoder, cfg_fields, steps, out_dir)


def cmd_run(args) -> int:
    unknown = [v for v in args.variants if v not in VARIANTS]
    if unknown:
        print(
            f"unknown variant(s) {', '.join(unknown)}; valid variants: {', '.join(VARIANTS)}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    unknown = [r for r in args.regimes if r not in REGIMES]
    if unknown:
        print(
            f"unknown regime(s) {', '.join(unknown)}; valid regimes: {', '.join(REGIMES)}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    seeds = args.seeds
    env_seeds = os.environ.get("LAGONN_SEED")
    if env_seeds:
        try:
            seeds = [int(tok) for tok in env_seeds.replace(",", " ").split()]
        except ValueError:
            print(f"LAGONN_SEED must be a list of integers, got {env_seeds!r}", file=sys.stderr)
            return EXIT_CONFIG
        if not seeds:
            print("LAGONN_SEED is set but empty", file=sys.stderr)
            return EXIT_CONFIG

    encoder = parse_encoder_spec(args.encoder)
    label_map = load_label_map(args.labels)
    pool = load_dataset(args.dataset[0], label_map)
    test = load_dataset(args.dataset[1], label_map)
    # fail early on regimes undefined for this label arity or needing more
    # data than the pool holds, so a bad grid writes no partial shards
    for regime in args.regimes:
        REGIMES[regime].counts(label_map.num_labels)
        sample_step(pool, REGIMES[regime], args.steps, seed=0)

    os.makedirs(args.out, exist_ok=True)
    pending = _prescan_store(encoder, [pool, test], args.separator)
    if pending:
        manifest = os.path.join(args.out, PENDING_MANIFEST)
        _write_pending_manifest(manifest, pending)
        print(f"{len(pending)} text(s) missing from store; manifest: {manifest}", file=sys.stderr)
        return EXIT_PENDING

    cfg_fields = {
        "mode": args.mode,
        "separator": args.separator,
        "distance_decimals": args.distance_decimals,
        "adapter_pairs": args.adapter_pairs,
        "adapter_epochs": args.adapter_epochs,
        "adapter_lr": args.adapter_lr,
        "l2": args.l2,
        "head": args.head,
        "knn_k": args.knn_k,
    }
    tasks = [
        (args.dataset[0], args.dataset[1], args.labels, args.encoder,
         variant, regime, seed, cfg_fields, args.steps, args.out)
        for variant in args.variants
        for regime in args.regimes
        for seed in seeds
    ]
    pending = {}
    completed = 0
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool_exec:
            outcomes = list(pool_exec.map(_run_one, tasks))
    else:
        # sequential path reuses the loaded data and the encoder's cache
        outcomes = [
            _execute_run(task[4], task[5], task[6], pool, test, encoder,
                         task[7], task[8], task[9])
            for task in tasks
        ]
    for status, payload in outcomes:
        if status == "missing":
            pending.update(payload)
        else:
            completed += 1
    if pending:
        manifest = os.path.join(args.out, PENDING_MANIFEST)
        _write_pending_manifest(manifest, pending)
        print(
            f"{completed}/{len(tasks)} runs completed; {len(pending)} text(s) missing "
            f"from store; manifest: {manifest}",
            file=sys.stderr,
        )
        return EXIT_PENDING
    print(f"{completed}/{len(tasks)} runs completed; shards in {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        names = sorted(n for n in os.listdir(args.shards) if n.endswith(".csv"))
    except FileNotFoundError:
        print(f"shard directory not found: {args.shards}", file=sys.stderr)
        return EXIT_CONFIG
    results: list[RunResult] = []
    for name in names:
        results.extend(read_shard(os.path.join(args.shards, name)))
    if not results:
        print(f"no result shards in {args.shards}", file=sys.stderr)
        return EXIT_CONFIG
    table = aggregate(results)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "report.csv")
    text_path = os.path.join(args.out, "report.txt")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(render_report_csv(table))
    rendered = render_report_text(table)
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write(rendered)
    print(rendered, end="")
    return EXIT_OK


def cmd_make_synthetic(args) -> int:
    paths = make_synthetic(
        per_class=args.per_class,
        classes=args.classes,
        dim=args.dim,
        margin=args.margin,
        seed=args.seed,
        out_dir=args.out,
        test_per_class=args.test_per_class,
    )
    for name in ("train", "test", "labels", "store"):
        print(f"{name}: {paths[name]}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "report":
            return cmd_report(args)
        return cmd_make_synthetic(args)
    except DivergenceError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (
        DatasetError,
        DecorationError,
        HarnessError,
        StoreFormatError,
        SyntheticConfigError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
