"""Loss, mini-batch training with early selection, dataset splits, grid search
and evaluation."""

from __future__ import annotations

import copy
import itertools
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import CountMismatch, DivergedLoss
from ..formula_graph import FormulaGraph
from .batch import collate, collate_parts, graph_parts
from .metrics import MetricsReport
from .models import ModelConfig, build_model, forward

log = logging.getLogger(__name__)

DTYPES = {"f32": torch.float32, "f64": torch.float64}


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 200
    seed: int = 0
    weight_decay: float = 0.0
    precision: str = "f32"

    def __post_init__(self):
        if self.learning_rate < 0 or self.weight_decay < 0 or self.epochs < 0:
            raise ValueError("learning_rate, weight_decay and epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.precision not in DTYPES:
            raise ValueError(f"precision must be one of {sorted(DTYPES)}")

    @property
    def dtype(self) -> torch.dtype:
        return DTYPES[self.precision]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class History:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_val_loss(self) -> float:
        if not self.records:
            return math.inf
        return min(r.val_loss for r in self.records)

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss"]
        lines += [f"{r.epoch},{r.train_loss!r},{r.val_loss!r}" for r in self.records]
        return "\n".join(lines) + "\n"


@dataclass
class Splits:
    train: list[FormulaGraph]
    val: list[FormulaGraph]
    test: list[FormulaGraph]

    def items(self):
        return (("train", self.train), ("val", self.val), ("test", self.test))

    def positive_rates(self) -> dict[str, list[float]]:
        """Fraction of positive samples per label, per split."""
        out = {}
        for name, graphs in self.items():
            labeled = [g.labels for g in graphs if g.labels is not None]
            if labeled:
                out[name] = np.mean(np.array(labeled, dtype=np.float64), axis=0).tolist()
            else:
                out[name] = []
        return out


def _loss(logits: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    return F.binary_cross_entropy_with_logits(logits, y, reduction="mean")


def loss_and_gradients(model, graphs: Sequence[FormulaGraph], mode: str = "eval"):
    """Mean BCE over graphs x labels and the gradient for every named parameter."""
    dtype = next(model.parameters()).dtype
    batch = collate(graphs, dtype)
    if batch.y is None:
        raise ValueError("every graph in the batch needs labels")
    model.zero_grad(set_to_none=True)
    logits, _ = forward(model, batch, mode)
    loss = _loss(logits, batch.y)
    loss.backward()
    grads = {n: p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
             for n, p in model.named_parameters()}
    return float(loss.detach()), grads


def _eval_loss(model, batch) -> float:
    with torch.no_grad():
        logits, _ = forward(model, batch, "eval")
        return float(_loss(logits, batch.y))


def train(dataset, mcfg: ModelConfig, tcfg: TrainConfig, val: Sequence[FormulaGraph] | None = None):
    """Fit a model; returns ``(model, history)``.

    ``dataset`` is either a :class:`Splits` (its train and val parts are used)
    or a list of training graphs, with ``val`` given separately. The returned
    parameters are those from the epoch with the lowest validation loss (the
    training loss when there is no validation set).
    """
    if isinstance(dataset, Splits):
        train_set, val = dataset.train, dataset.val
    else:
        train_set = list(dataset)
    if not train_set:
        raise ValueError("empty training set")
    val = list(val or [])
    model = build_model(mcfg, tcfg.seed, tcfg.dtype)
    hist = History()
    if tcfg.epochs == 0:
        return model, hist

    val_batch = collate(val, tcfg.dtype) if val else None
    opt = torch.optim.Adam(model.parameters(), lr=tcfg.learning_rate, betas=(0.9, 0.999), eps=1e-8,
                           weight_decay=tcfg.weight_decay)
    n = len(train_set)
    parts = [graph_parts(g) for g in train_set]
    best_loss, best_state = math.inf, copy.deepcopy(model.state_dict())
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(tcfg.seed)
        for epoch in range(1, tcfg.epochs + 1):
            order = np.random.default_rng([tcfg.seed, epoch]).permutation(n)
            total = 0.0
            for start in range(0, n, tcfg.batch_size):
                idx = order[start:start + tcfg.batch_size]
                batch = collate_parts([parts[i] for i in idx], tcfg.dtype)
                opt.zero_grad(set_to_none=True)
                logits, _ = forward(model, batch, "train")
                loss = _loss(logits, batch.y)
                if not torch.isfinite(loss):
                    raise DivergedLoss(epoch)
                loss.backward()
                opt.step()
                total += float(loss.detach()) * len(idx)
            train_loss = total / n
            val_loss = _eval_loss(model, val_batch) if val_batch is not None else train_loss
            if not math.isfinite(val_loss):
                raise DivergedLoss(epoch)
            hist.records.append(EpochRecord(epoch, train_loss, val_loss))
            if val_loss < best_loss:
                best_loss, hist.best_epoch = val_loss, epoch
                best_state = copy.deepcopy(model.state_dict())
    model.load_state_dict(best_state)
    model.eval()
    return model, hist


def split_dataset(dataset: Sequence[FormulaGraph], counts: tuple[int, int, int], seed: int) -> Splits:
    """Seeded shuffle, then consecutive slices of the requested sizes."""
    counts = tuple(int(c) for c in counts)
    if len(counts) != 3 or any(c < 0 for c in counts) or sum(counts) != len(dataset):
        raise CountMismatch(f"counts {counts} do not partition {len(dataset)} items")
    order = np.random.default_rng(seed).permutation(len(dataset))
    a, b, _ = counts
    pick = lambda ix: [dataset[i] for i in ix]  # noqa: E731
    return Splits(pick(order[:a]), pick(order[a:a + b]), pick(order[a + b:]))


def ratio_counts(n: int, ratio=(7, 2, 1)) -> tuple[int, int, int]:
    """Integer counts closest to ``ratio`` (largest remainder), summing to n."""
    total = sum(ratio)
    raw = [n * r / total for r in ratio]
    base = [math.floor(x) for x in raw]
    for i in sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))[: n - sum(base)]:
        base[i] += 1
    return tuple(base)


def kfold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Validation index sets of a seeded k-fold partition."""
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


@dataclass(frozen=True)
class GridRow:
    stage: int
    hidden_dim: int
    num_heads: int
    dropout_rate: float
    learning_rate: float
    batch_size: int
    fold_losses: tuple[float, ...]

    @property
    def mean_loss(self) -> float:
        return float(np.mean(self.fold_losses)) if self.fold_losses else math.inf


@dataclass
class GridResult:
    model: ModelConfig
    train: TrainConfig
    rows: list[GridRow]

    def to_csv(self) -> str:
        head = "stage,hidden_dim,num_heads,dropout_rate,learning_rate,batch_size,mean_val_loss,fold_losses"
        lines = [head]
        for r in self.rows:
            folds = ";".join(repr(x) for x in r.fold_losses)
            lines.append(f"{r.stage},{r.hidden_dim},{r.num_heads},{r.dropout_rate!r},{r.learning_rate!r},"
                         f"{r.batch_size},{r.mean_loss!r},{folds}")
        return "\n".join(lines) + "\n"


def _cv_losses(dataset, mcfg: ModelConfig, tcfg: TrainConfig, folds: int) -> tuple[float, ...]:
    out = []
    for vi in kfold_indices(len(dataset), folds, tcfg.seed):
        vset = set(vi.tolist())
        tr = [g for i, g in enumerate(dataset) if i not in vset]
        va = [dataset[i] for i in vi]
        try:
            _, hist = train(tr, mcfg, tcfg, val=va)
            out.append(hist.best_val_loss)
        except DivergedLoss as exc:
            log.warning("config %s diverged at epoch %s", mcfg, exc.epoch)
            out.append(math.inf)
    return tuple(out)


def grid_search(dataset: Sequence[FormulaGraph], stage1: Iterable, stage2: Iterable,
                arch: str = "GAT", base: TrainConfig = TrainConfig(), folds: int = 5) -> GridResult:
    """Two-stage search by mean k-fold validation loss.

    Stage 1 scans (hidden_dim, num_heads, dropout_rate) with ``base`` training
    settings; stage 2 scans (learning_rate, batch_size) for the stage-1 winner.
    Ties keep the earlier grid entry.
    """
    stage1, stage2 = list(stage1), list(stage2)
    if not stage1 or not stage2:
        raise ValueError("grids must be non-empty")
    dataset = list(dataset)
    rows: list[GridRow] = []
    best_m, best_loss = None, math.inf
    for hidden, heads, drop in stage1:
        mcfg = ModelConfig(arch=arch, hidden_dim=int(hidden), num_heads=int(heads), dropout_rate=float(drop))
        row = GridRow(1, mcfg.hidden_dim, mcfg.num_heads, mcfg.dropout_rate, base.learning_rate, base.batch_size,
                      _cv_losses(dataset, mcfg, base, folds))
        rows.append(row)
        if best_m is None or row.mean_loss < best_loss:
            best_m, best_loss = mcfg, row.mean_loss
    best_t, best_loss = None, math.inf
    for lr, bs in stage2:
        tcfg = replace(base, learning_rate=float(lr), batch_size=int(bs))
        row = GridRow(2, best_m.hidden_dim, best_m.num_heads, best_m.dropout_rate, tcfg.learning_rate,
                      tcfg.batch_size, _cv_losses(dataset, best_m, tcfg, folds))
        rows.append(row)
        if best_t is None or row.mean_loss < best_loss:
            best_t, best_loss = tcfg, row.mean_loss
    return GridResult(best_m, best_t, rows)


def default_grids():
    stage1 = list(itertools.product((32, 64, 96, 128), (2, 4, 8, 16), (0.1, 0.3, 0.4, 0.5)))
    stage2 = list(itertools.product((1e-4, 3e-4, 5e-4, 7e-4), (16, 32, 64, 128)))
    return stage1, stage2


def predict_proba(model, graphs: Sequence[FormulaGraph]) -> np.ndarray:
    dtype = next(model.parameters()).dtype
    batch = collate(graphs, dtype)
    with torch.no_grad():
        logits, _ = forward(model, batch, "eval")
    return torch.sigmoid(logits).double().numpy()


def evaluate(model, split: Sequence[FormulaGraph], decision_threshold: float = 0.5,
             name: str = "test", report: MetricsReport | None = None) -> MetricsReport:
    """Per-label metrics of sigmoid outputs thresholded at ``decision_threshold``."""
    split = list(split)
    if not split or any(g.labels is None for g in split):
        raise ValueError("evaluation needs a non-empty labeled split")
    report = report or MetricsReport(threshold=decision_threshold)
    y = np.array([g.labels for g in split], dtype=np.int64)
    report.add(name, predict_proba(model, split), y)
    return report
