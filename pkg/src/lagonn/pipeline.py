"""Orchestration of the eight system variants across growing-data steps.

A variant is a (decorates?, adapter schedule) pair:

====================  ==========  ================
name                  decorates   adapter schedule
====================  ==========  ================
PROBE                 no          NEVER
LAGONN_CHEAP          yes         NEVER
LOGREG                no          STEP1_ONLY
LAGONN                yes         STEP1_ONLY
SETFIT                no          EVERY_STEP
LAGONN_EXP            yes         EVERY_STEP
SETFIT_LITE           no          THROUGH_STEP4
LAGONN_LITE           yes         THROUGH_STEP4
====================  ==========  ================

At a step where the schedule fires, decorations and the retrieval index
are first computed with the pre-update encoder, the adapter is then
retrained fresh from identity on *base* embeddings of the step's training
inputs (decorated text for decorating variants, raw text otherwise), and
finally the index, decorations, and classification head are rebuilt under
the new encoder. At non-firing steps the last trained adapter is reused.
Heads are refit from scratch every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .adapter import AdapterConfig, DivergenceError, train_adapter
from .data import LabeledDataset, render_input
from .decoration import DecoratedExample, DecoratorConfig, decorate_train, decorate_test
from .encoders import MissingEmbedding, MissingEmbeddings, wrap_encoder
from .heads import KnnHeadModel, LogRegModel, fit_knn, fit_logreg, knn_predict_batch, predict_proba
from .neighbors import NeighborIndex, build_index
from .rng import fnv1a64, mix64

SCHEDULES = ("NEVER", "STEP1_ONLY", "EVERY_STEP", "THROUGH_STEP4")

# instrumentation: bumped once per training decoration whose hits were
# verified not to cite the decorated example itself
SELF_EXCLUSION_CHECKS = 0


class PipelineError(ValueError):
    """Raised for invalid variant or step configuration."""


@dataclass(frozen=True)
class VariantSpec:
    """Declarative description of one system variant."""

    name: str
    decorates: bool
    adapter_schedule: str

    def __post_init__(self) -> None:
        if self.adapter_schedule not in SCHEDULES:
            raise PipelineError(f"unknown schedule {self.adapter_schedule!r}")
        if self.decorates != self.name.startswith("LAGONN"):
            raise PipelineError(f"{self.name}: decorates flag contradicts naming rule")

    def trains_adapter_at(self, step: int) -> bool:
        if self.adapter_schedule == "NEVER":
            return False
        if self.adapter_schedule == "STEP1_ONLY":
            return step == 1
        if self.adapter_schedule == "EVERY_STEP":
            return True
        return step <= 4  # THROUGH_STEP4


VARIANTS: dict[str, VariantSpec] = {
    spec.name: spec
    for spec in (
        VariantSpec("PROBE", False, "NEVER"),
        VariantSpec("LAGONN_CHEAP", True, "NEVER"),
        VariantSpec("LOGREG", False, "STEP1_ONLY"),
        VariantSpec("LAGONN", True, "STEP1_ONLY"),
        VariantSpec("SETFIT", False, "EVERY_STEP"),
        VariantSpec("LAGONN_EXP", True, "EVERY_STEP"),
        VariantSpec("SETFIT_LITE", False, "THROUGH_STEP4"),
        VariantSpec("LAGONN_LITE", True, "THROUGH_STEP4"),
    )
}


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs besides the data and the base encoder."""

    decorator: DecoratorConfig = field(default_factory=DecoratorConfig)
    adapter: AdapterConfig = field(default_factory=AdapterConfig)
    l2_strength: float = 1.0
    head: str = "logreg"
    knn_k: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.head not in ("logreg", "knn"):
            raise PipelineError(f"head must be 'logreg' or 'knn', got {self.head!r}")


@dataclass(frozen=True)
class PipelineState:
    """Complete state after one step: everything inference needs."""

    step: int
    cumulative: LabeledDataset
    adapter: np.ndarray | None
    head: LogRegModel | KnnHeadModel
    index: NeighborIndex
    encoder: object
    decorated: tuple[DecoratedExample, ...] | None
    config: PipelineConfig


def _adapter_seed(run_seed: int, step: int) -> int:
    """Per-step adapter stream seed, identical across variants."""
    return mix64(run_seed ^ fnv1a64(b"adapter") ^ step)


def _check_self_exclusion(decorated: list[DecoratedExample]) -> None:
    global SELF_EXCLUSION_CHECKS
    for dec in decorated:
        for hit in dec.hits:
            if hit.id == dec.id:
                raise PipelineError(
                    f"training decoration for example {dec.id} cited itself"
                )
        SELF_EXCLUSION_CHECKS += 1


def _train_with_retry(X: np.ndarray, labels: list[int], cfg: AdapterConfig) -> np.ndarray:
    """Train the adapter, retrying twice at a tenth of the rate on divergence."""
    for attempt in range(3):
        try:
            return train_adapter(X, labels, cfg).W
        except DivergenceError:
            if attempt == 2:
                raise
            cfg = replace(cfg, learning_rate=cfg.learning_rate / 10.0)
    raise AssertionError("unreachable")


def _decorate_all(cumulative, index, encoder, config) -> list[DecoratedExample]:
    decorated = [
        decorate_train(ex, index, encoder, config.decorator, cumulative.label_map)
        for ex in cumulative
    ]
    _check_self_exclusion(decorated)
    return decorated


def _embed_all(encode, items) -> np.ndarray:
    """Stack one embedding per item, reporting every store miss at once."""
    rows = []
    pending: dict[str, str] = {}
    for item in items:
        try:
            rows.append(encode(item))
        except MissingEmbedding as miss:
            pending[miss.key_hex] = miss.text
    if pending:
        raise MissingEmbeddings(pending)
    return np.stack(rows)


def run_step(
    spec: VariantSpec,
    step: int,
    cumulative: LabeledDataset,
    base_encoder,
    config: PipelineConfig,
    prev_state: PipelineState | None = None,
) -> PipelineState:
    """Execute one growing-data step and return the fitted state."""
    if step < 1:
        raise PipelineError(f"step must be >= 1, got {step}")
    if prev_state is not None and prev_state.step != step - 1:
        raise PipelineError(
            f"previous state is for step {prev_state.step}, expected {step - 1}"
        )
    if step > 1 and prev_state is None:
        raise PipelineError(f"step {step} needs the step-{step - 1} state")
    label_map = cumulative.label_map
    texts = [render_input(ex, config.decorator.separator) for ex in cumulative]
    labels = cumulative.labels()
    last_adapter = prev_state.adapter if prev_state is not None else None

    if spec.trains_adapter_at(step):
        if spec.decorates:
            pre_encoder = wrap_encoder(base_encoder, last_adapter)
            pre_index = build_index(pre_encoder, texts, labels)
            pre_decorated = _decorate_all(cumulative, pre_index, pre_encoder, config)
            train_X = _embed_all(base_encoder.encode_decorated, pre_decorated)
        else:
            train_X = _embed_all(base_encoder.encode, texts)
        step_cfg = replace(config.adapter, seed=_adapter_seed(config.seed, step))
        adapter = _train_with_retry(train_X, labels, step_cfg)
    else:
        adapter = last_adapter

    encoder = wrap_encoder(base_encoder, adapter)
    index = build_index(encoder, texts, labels)
    if spec.decorates:
        decorated = _decorate_all(cumulative, index, encoder, config)
        head_X = _embed_all(encoder.encode_decorated, decorated)
    else:
        decorated = None
        head_X = index.vectors
    if config.head == "knn":
        head = fit_knn(head_X, labels, label_map.num_labels, k=config.knn_k)
    else:
        head = fit_logreg(
            head_X, labels, l2_strength=config.l2_strength, num_labels=label_map.num_labels
        )
    return PipelineState(
        step=step,
        cumulative=cumulative,
        adapter=adapter,
        head=head,
        index=index,
        encoder=encoder,
        decorated=tuple(decorated) if decorated is not None else None,
        config=config,
    )


def predict_step(
    state: PipelineState, spec: VariantSpec, test: LabeledDataset
) -> tuple[np.ndarray, np.ndarray]:
    """Score the test set under a fitted step state.

    Returns (scores, predictions): scores has one row per test example and
    one column per label; predictions are row argmaxes (ties to the
    smaller label id).
    """
    config = state.config
    texts = [render_input(ex, config.decorator.separator) for ex in test]
    if spec.decorates:
        decs = [
            decorate_test(
                text, state.index, state.encoder, config.decorator, test.label_map
            )
            for text in texts
        ]
        X = _embed_all(state.encoder.encode_decorated, decs)
    else:
        X = _embed_all(state.encoder.encode, texts)
    if config.head == "knn":
        scores, preds = knn_predict_batch(state.head, X)
    else:
        scores = predict_proba(state.head, X)
        preds = np.argmax(scores, axis=1)
    return scores, preds
