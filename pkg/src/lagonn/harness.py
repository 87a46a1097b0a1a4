"""Growing-data evaluation: imbalance regimes, metrics, aggregation.

The protocol adds 100 training examples per step for 10 steps, drawn from
a pool under one of four label-imbalance regimes (per-100 counts):

=============  ========  =========
regime         binary    ternary
=============  ========  =========
EXTREME        98 / 2    95 / 2 / 3
IMBALANCED     90 / 10   80 / 5 / 15
MODERATE       75 / 25   65 / 10 / 25
BALANCED       50 / 50   34 / 33 / 33
=============  ========  =========

(The ternary BALANCED split is pinned to 34/33/33, extra example to
label 0, so steps still sum to 100.) Sampling is without replacement and
cumulative: the step-t selection extends step t-1's. Binary datasets are
scored by average precision of label 1; three-label datasets by macro-F1;
reported values are scaled by 100 and aggregated across seeds as mean and
population standard deviation.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import LabeledDataset, subset_dataset
from .pipeline import PipelineConfig, VariantSpec, predict_step, run_step
from .rng import SplitMix64Stream, fnv1a64, mix64

EXAMPLES_PER_STEP = 100
PROTOCOL_STEPS = 10
DEFAULT_SEEDS = (0, 1, 2, 3, 4)

SHARD_HEADER = ("variant", "regime", "seed", "step", "metric", "value")


class HarnessError(ValueError):
    """Raised for sampling, metric, or aggregation contract violations."""


@dataclass(frozen=True)
class RegimeSpec:
    """A named imbalance regime with per-100 label counts by arity."""

    name: str
    per_100: dict[int, tuple[int, ...]]

    def counts(self, num_labels: int) -> tuple[int, ...]:
        if num_labels not in self.per_100:
            raise HarnessError(
                f"regime {self.name} not defined for {num_labels} labels"
            )
        return self.per_100[num_labels]


REGIMES: dict[str, RegimeSpec] = {
    spec.name: spec
    for spec in (
        RegimeSpec("EXTREME", {2: (98, 2), 3: (95, 2, 3)}),
        RegimeSpec("IMBALANCED", {2: (90, 10), 3: (80, 5, 15)}),
        RegimeSpec("MODERATE", {2: (75, 25), 3: (65, 10, 25)}),
        RegimeSpec("BALANCED", {2: (50, 50), 3: (34, 33, 33)}),
    )
}

REGIME_ORDER = ("EXTREME", "IMBALANCED", "MODERATE", "BALANCED")


@dataclass(frozen=True)
class StepPlan:
    """How many steps, how much data per step, which seeds."""

    steps: int = PROTOCOL_STEPS
    examples_per_step: int = EXAMPLES_PER_STEP
    seeds: tuple[int, ...] = DEFAULT_SEEDS

    def __post_init__(self) -> None:
        if self.steps < 1 or self.examples_per_step < 1 or not self.seeds:
            raise HarnessError("plan needs >=1 step, >=1 example per step, >=1 seed")


@dataclass(frozen=True)
class RunResult:
    """One (variant, regime, seed, step) measurement, scaled by 100."""

    variant: str
    regime: str
    seed: int
    step: int
    metric: str
    value: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 100.0:
            raise HarnessError(f"metric value {self.value} outside [0, 100]")


def sample_step(
    pool: LabeledDataset, regime: RegimeSpec, step: int, seed: int
) -> LabeledDataset:
    """Cumulative regime-controlled subset of the pool for one step.

    Per label (ascending id), a partial Fisher-Yates shuffle seeded by
    ``mix64(seed XOR fnv1a64(regime name))`` fixes a draw order over that
    label's pool; step t takes the first ``count * t`` entries. The shuffle
    length never depends on ``step``, so the stream a later label sees is
    step-invariant and the prefix property holds exactly.
    """
    if step < 1:
        raise HarnessError(f"step must be >= 1, got {step}")
    counts = regime.counts(pool.label_map.num_labels)
    stream = SplitMix64Stream(mix64(seed ^ fnv1a64(regime.name.encode("utf-8"))))
    draws: list[list[int]] = []
    for label, count in enumerate(counts):
        ids = [ex.id for ex in pool if ex.label == label]
        need = count * step
        if need > len(ids):
            raise HarnessError(
                f"insufficient pool for label {label} in regime {regime.name}: "
                f"need {need}, have {len(ids)}"
            )
        horizon = min(count * PROTOCOL_STEPS, len(ids))
        stream.shuffle_prefix(ids, horizon)
        draws.append(ids)
    chosen: list[int] = []
    for s in range(step):
        for label, count in enumerate(counts):
            chosen.extend(draws[label][s * count : (s + 1) * count])
    return subset_dataset(pool, chosen)


def average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    """AP of a binary ranking; ties keep their original order (stable sort)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise HarnessError("scores and labels must be equal-length 1-D")
    if not np.all((labels == 0) | (labels == 1)):
        raise HarnessError("labels must be binary 0/1")
    positives = int(labels.sum())
    if positives == 0:
        raise HarnessError("average precision undefined without positives")
    order = np.argsort(-scores, kind="stable")
    ranked = labels[order]
    cumulative = np.cumsum(ranked)
    precision_at = cumulative / np.arange(1, ranked.size + 1)
    return float(precision_at[ranked == 1].sum() / positives)


def macro_f1(predictions: Sequence[int], gold: Sequence[int], num_labels: int) -> float:
    """Unweighted mean of per-class F1; an absent class contributes 0."""
    predictions = np.asarray(predictions, dtype=np.int64)
    gold = np.asarray(gold, dtype=np.int64)
    if predictions.shape != gold.shape or predictions.ndim != 1:
        raise HarnessError("predictions and gold must be equal-length 1-D")
    for arr in (predictions, gold):
        if arr.size and (arr.min() < 0 or arr.max() >= num_labels):
            raise HarnessError(f"labels outside [0, {num_labels})")
    confusion = np.bincount(
        gold * num_labels + predictions, minlength=num_labels * num_labels
    ).reshape(num_labels, num_labels)
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(num_labels), where=denom > 0)
    return float(f1.mean())


def metric_name_for(num_labels: int) -> str:
    return "average_precision" if num_labels == 2 else "macro_f1"


def evaluate_predictions(
    scores: np.ndarray, predictions: np.ndarray, test: LabeledDataset
) -> tuple[str, float]:
    """Pick the dataset's metric and compute it, scaled by 100."""
    gold = np.asarray(test.labels(), dtype=np.int64)
    num_labels = test.label_map.num_labels
    if num_labels == 2:
        value = average_precision(scores[:, 1], gold)
        return "average_precision", 100.0 * value
    return "macro_f1", 100.0 * macro_f1(predictions, gold, num_labels)


def run_protocol(
    spec: VariantSpec,
    regime: RegimeSpec,
    seed: int,
    pool: LabeledDataset,
    test: LabeledDataset,
    base_encoder,
    config: PipelineConfig,
    steps: int = PROTOCOL_STEPS,
) -> list[RunResult]:
    """Drive one (variant, regime, seed) run across all steps."""
    if config.seed != seed:
        raise HarnessError("pipeline config seed must equal the run seed")
    results = []
    state = None
    for step in range(1, steps + 1):
        cumulative = sample_step(pool, regime, step, seed)
        state = run_step(spec, step, cumulative, base_encoder, config, state)
        scores, predictions = predict_step(state, spec, test)
        metric, value = evaluate_predictions(scores, predictions, test)
        results.append(RunResult(spec.name, regime.name, seed, step, metric, value))
    return results


# ---------------------------------------------------------------------------
# result shards
# ---------------------------------------------------------------------------

def write_shard(path: str, results: Sequence[RunResult]) -> None:
    """Write one run's results as CSV, atomically (temp file + rename)."""
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SHARD_HEADER)
        for r in results:
            writer.writerow([r.variant, r.regime, r.seed, r.step, r.metric, repr(r.value)])
    os.replace(tmp, path)


def read_shard(path: str) -> list[RunResult]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(SHARD_HEADER):
            raise HarnessError(f"{path}: unexpected shard header {header}")
        return [
            RunResult(row[0], row[1], int(row[2]), int(row[3]), row[4], float(row[5]))
            for row in reader
            if row
        ]


# ---------------------------------------------------------------------------
# aggregation and reports
# ---------------------------------------------------------------------------

REPORT_COLUMNS = ("step1", "step5", "step10", "average")


@dataclass(frozen=True)
class ReportRow:
    """Aggregated cells for one (variant, regime, metric) group."""

    variant: str
    regime: str
    metric: str
    cells: tuple[tuple[str, float, float], ...]  # (column, mean, population std)


@dataclass(frozen=True)
class ReportTable:
    rows: tuple[ReportRow, ...]
    seeds: tuple[int, ...]
    steps: tuple[int, ...]


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())  # population std (ddof=0)


def aggregate(results: Iterable[RunResult]) -> ReportTable:
    """Fold per-step results into mean +/- std cells across seeds.

    Columns: steps 1, 5, and 10 (those present), plus 'average' = the mean
    of each seed's own all-step average, with std across those per-seed
    averages. Every (variant, regime) group must cover the same complete
    (seed, step, metric) grid; ragged grids are an error.
    """
    groups: dict[tuple[str, str, str], dict[int, dict[int, float]]] = {}
    for r in results:
        per_seed = groups.setdefault((r.variant, r.regime, r.metric), {})
        per_step = per_seed.setdefault(r.seed, {})
        if r.step in per_step:
            raise HarnessError(
                f"duplicate result for {r.variant}/{r.regime}/seed {r.seed}/step {r.step}"
            )
        per_step[r.step] = r.value
    if not groups:
        raise HarnessError("no results to aggregate")

    reference = None
    for key, per_seed in groups.items():
        seeds = tuple(sorted(per_seed))
        step_sets = {tuple(sorted(steps)) for steps in per_seed.values()}
        if len(step_sets) != 1:
            raise HarnessError(f"ragged grid: group {key} has uneven steps across seeds")
        shape = (seeds, step_sets.pop())
        if reference is None:
            reference = shape
        elif shape != reference:
            raise HarnessError(f"ragged grid: group {key} does not match {reference}")
    seeds, steps = reference
    if steps != tuple(range(1, len(steps) + 1)):
        raise HarnessError(f"steps must be contiguous from 1, got {steps}")

    rows = []
    for (variant, regime, metric), per_seed in sorted(
        groups.items(), key=lambda kv: (_regime_rank(kv[0][1]), _variant_rank(kv[0][0]), kv[0][2])
    ):
        cells = []
        for column, step in (("step1", 1), ("step5", 5), ("step10", 10)):
            if step in steps:
                cells.append((column, *_mean_std([per_seed[s][step] for s in seeds])))
        per_seed_avg = [float(np.mean([per_seed[s][t] for t in steps])) for s in seeds]
        cells.append(("average", *_mean_std(per_seed_avg)))
        rows.append(ReportRow(variant, regime, metric, tuple(cells)))
    return ReportTable(tuple(rows), seeds, steps)


def _regime_rank(name: str) -> tuple:
    return (REGIME_ORDER.index(name), name) if name in REGIME_ORDER else (len(REGIME_ORDER), name)


def _variant_rank(name: str) -> tuple:
    from .pipeline import VARIANTS

    order = list(VARIANTS)
    return (order.index(name), name) if name in order else (len(order), name)


def render_report_csv(table: ReportTable) -> str:
    lines = ["variant,regime,metric,column,mean,std"]
    for row in table.rows:
        for column, mean, std in row.cells:
            lines.append(
                f"{row.variant},{row.regime},{row.metric},{column},{mean!r},{std!r}"
            )
    return "\n".join(lines) + "\n"


def render_report_text(table: ReportTable) -> str:
    """Plain-text table: one block per regime, one row per variant."""
    columns = [c for c, _, _ in table.rows[0].cells]
    width = max(len(r.variant) for r in table.rows)
    lines = [
        f"seeds: {', '.join(str(s) for s in table.seeds)}    "
        f"steps: 1..{len(table.steps)}    values: metric x 100, mean+-std"
    ]
    by_regime: dict[str, list[ReportRow]] = {}
    for row in table.rows:
        by_regime.setdefault(row.regime, []).append(row)
    for regime, rows in by_regime.items():
        lines.append("")
        lines.append(f"== {regime} ({rows[0].metric}) ==")
        header = " ".join(f"{c:>12}" for c in columns)
        lines.append(f"{'variant':<{width}} {header}")
        for row in rows:
            cells = {c: (m, s) for c, m, s in row.cells}
            rendered = " ".join(
                f"{cells[c][0]:6.1f}+-{cells[c][1]:4.1f}" if c in cells else " " * 12
                for c in columns
            )
            lines.append(f"{row.variant:<{width}} {rendered}")
    return "\n".join(lines) + "\n"
