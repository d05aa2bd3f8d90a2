from .batch import Batch, collate
from .checkpoint import load_checkpoint, save_checkpoint
from .metrics import Confusion, LabelMetrics, MetricsReport, auc_score
from .models import (
    ARCH_LAYERS,
    Attention,
    ModelConfig,
    build_model,
    forward,
    gat_forward,
    gtn_forward,
    hgnn_forward,
    segment_softmax,
)
from .training import (
    History,
    Splits,
    TrainConfig,
    evaluate,
    grid_search,
    kfold_indices,
    loss_and_gradients,
    predict_proba,
    ratio_counts,
    split_dataset,
    train,
)

__all__ = [
    "ARCH_LAYERS",
    "Attention",
    "Batch",
    "Confusion",
    "History",
    "LabelMetrics",
    "MetricsReport",
    "ModelConfig",
    "Splits",
    "TrainConfig",
    "auc_score",
    "build_model",
    "collate",
    "evaluate",
    "forward",
    "gat_forward",
    "grid_search",
    "gtn_forward",
    "hgnn_forward",
    "kfold_indices",
    "load_checkpoint",
    "loss_and_gradients",
    "predict_proba",
    "ratio_counts",
    "save_checkpoint",
    "segment_softmax",
    "split_dataset",
    "train",
]
