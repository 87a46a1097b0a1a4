"""Nearest-neighbor text decoration for embedding classifiers.

The core idea: before classifying a text, retrieve its nearest training
neighbor in embedding space and append the neighbor's gold label, the
distance, and optionally the neighbor text to the input, then re-embed and
classify the decorated string. The package implements that decorator, a
contrastive linear adapter standing in for encoder fine-tuning, exact NN
retrieval, logistic-regression / kNN heads, eight scheduling variants, and
a growing-data label-imbalance evaluation harness, all bit-reproducible.
"""

from .adapter import (
    AdapterConfig,
    AdapterState,
    ContrastiveError,
    DivergenceError,
    TrainingPair,
    generate_pairs,
    pair_loss,
    pair_loss_grad,
    train_adapter,
)
from .data import (
    DatasetError,
    LabeledDataset,
    LabeledExample,
    LabelMap,
    load_dataset,
    load_label_map,
    render_input,
    save_dataset,
    save_label_map,
)
from .decoration import (
    DecoratedExample,
    DecorationError,
    DecoratorConfig,
    assemble_decorated,
    decorate_test,
    decorate_train,
    format_segment,
)
from .encoders import (
    AdaptedEncoder,
    EmbeddingStore,
    HashEncoder,
    MissingEmbedding,
    MissingEmbeddings,
    StoreEncoder,
    StoreFormatError,
    SyntheticStoreEncoder,
    hash_encode,
    normalize,
    parse_encoder_spec,
    text_key,
)
from .harness import (
    HarnessError,
    REGIMES,
    RegimeSpec,
    RunResult,
    StepPlan,
    aggregate,
    average_precision,
    macro_f1,
    read_shard,
    run_protocol,
    sample_step,
    write_shard,
)
from .heads import (
    HeadFitError,
    KnnHeadModel,
    LogRegModel,
    fit_knn,
    fit_logreg,
    knn_predict,
    predict_proba,
)
from .neighbors import NeighborHit, NeighborIndex, build_index
from .pipeline import (
    PipelineConfig,
    PipelineState,
    VARIANTS,
    VariantSpec,
    predict_step,
    run_step,
)
from .synthetic import make_synthetic

__version__ = "0.1.0"
