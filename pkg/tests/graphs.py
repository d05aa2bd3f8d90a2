"""Hand-built formula graphs and a finite-difference gradient checker."""

from __future__ import annotations

import numpy as np
import torch

from herbgraph.formula_graph import FormulaGraph
from herbgraph.gnn.batch import collate
from herbgraph.gnn.models import forward
from herbgraph.gnn.training import _loss, loss_and_gradients


def six_node_graph(seed: int) -> FormulaGraph:
    """Two herbs and four property nodes with the usual herb-virtual / virtual-virtual edges."""
    r = np.random.default_rng(seed)
    kinds = ("CHP", "CHP", "TherapeuticNature", "MedicinalFlavor", "MeridianTropism", "MeridianTropism")
    x = r.normal(size=(6, 91))
    w = r.dirichlet([1.0, 1.0])
    x[:2, 90] = w
    x[2:, 90] = 0.0
    edges = [(0, 2), (1, 2), (0, 3), (1, 4), (0, 5), (2, 3), (2, 4), (2, 5), (3, 5)]
    attr = [(w[0], 1), (w[1], 1), (w[0], 1), (w[1], 1), (w[0], 1), (0.5, 0), (0.4, 0), (0.5, 0), (0.5, 0)]
    labels = tuple(int(v) for v in r.integers(0, 2, 5))
    return FormulaGraph("g6", kinds, tuple("abcdef"), x, np.array(edges), np.array(attr, dtype=float), labels)


def random_graph(rng: np.random.Generator, max_herbs: int = 5, max_virtual: int = 6) -> FormulaGraph:
    """Random herb/virtual graph obeying the encoding's structural rules."""
    n_c = int(rng.integers(1, max_herbs + 1))
    n_v = int(rng.integers(0, max_virtual + 1))
    kinds = ("CHP",) * n_c + tuple(rng.choice(["TherapeuticNature", "MedicinalFlavor", "MeridianTropism"], n_v))
    w = rng.dirichlet(np.ones(n_c)) if rng.random() < 0.8 else np.zeros(n_c)
    x = rng.normal(size=(n_c + n_v, 91))
    x[:n_c, 90] = w
    edges, attr, members = [], [], []
    for v in range(n_v):
        ms = [c for c in range(n_c) if rng.random() < 0.5] or [int(rng.integers(n_c))]
        members.append(set(ms))
        for c in ms:
            edges.append((c, n_c + v))
            attr.append((w[c], 1.0))
    for a in range(n_v):
        for b in range(a + 1, n_v):
            if members[a] & members[b]:
                edges.append((n_c + a, n_c + b))
                attr.append((float(rng.random()), 0.0))
    labels = tuple(int(v) for v in rng.integers(0, 2, 5))
    return FormulaGraph("r", kinds, tuple(f"n{i}" for i in range(n_c + n_v)), x,
                        np.array(edges, dtype=np.int64).reshape(-1, 2),
                        np.array(attr, dtype=np.float64).reshape(-1, 2), labels)


def max_relative_gradient_error(model, graphs, eps: float = 1e-5, floor: float = 1e-6) -> float:
    """Largest elementwise |analytic - central difference| / max(|analytic|, |numeric|, floor).

    The floor keeps exactly-zero gradients from dividing loss roundoff
    (about ulp(loss) / eps, ~1e-11 here) by a vanishing denominator.
    """
    _, grads = loss_and_gradients(model, graphs)
    batch = collate(graphs, torch.float64)

    def loss() -> float:
        with torch.no_grad():
            logits, _ = forward(model, batch, "eval")
            return float(_loss(logits, batch.y))

    worst = 0.0
    for name, p in model.named_parameters():
        flat = p.data.view(-1)
        num = torch.zeros_like(flat)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            lp = loss()
            flat[i] = orig - eps
            lm = loss()
            flat[i] = orig
            num[i] = (lp - lm) / (2 * eps)
        a = grads[name].view(-1)
        rel = (a - num).abs() / torch.clamp(torch.maximum(a.abs(), num.abs()), min=floor)
        worst = max(worst, float(rel.max()))
    return worst
