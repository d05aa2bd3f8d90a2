"""GAT, HGNN and GTN over batched formula graphs.

All three share the same readout: mean over herb (CHP) nodes of each graph,
then a linear head producing five logits. Each forward returns the logits and
the attention distributions it used, so interpretation code can read them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ShapeMismatch
from ..formula_graph import N_EDGE_FEATURES, N_NODE_FEATURES
from .batch import Batch

ARCH_LAYERS = {"GTN": 1, "HGNN": 2, "GAT": 3}
N_OUTPUTS = 5
NEG_SLOPE = 0.2


@dataclass(frozen=True)
class ModelConfig:
    arch: str = "GAT"
    hidden_dim: int = 64
    num_heads: int = 4
    dropout_rate: float = 0.5
    readout: str = "chp"
    in_dim: int = N_NODE_FEATURES
    edge_dim: int = N_EDGE_FEATURES
    n_outputs: int = N_OUTPUTS

    def __post_init__(self):
        if self.arch not in ARCH_LAYERS:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.hidden_dim % self.num_heads:
            raise ValueError("hidden_dim must be divisible by num_heads")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.readout not in ("chp", "all"):
            raise ValueError("readout must be 'chp' or 'all'")

    @property
    def layers(self) -> int:
        return ARCH_LAYERS[self.arch]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Attention:
    """One layer's attention: ``weights[e, h]`` is how much node ``dst[e]``
    takes from ``src[e]`` in head h. Weights sum to 1 over each ``dst``."""

    src: torch.Tensor
    dst: torch.Tensor
    weights: torch.Tensor


def segment_softmax(scores: torch.Tensor, index: torch.Tensor, n: int) -> torch.Tensor:
    """Softmax of ``scores`` (E x H) within groups sharing the same ``index``."""
    heads = scores.shape[1]
    mx = torch.full((n, heads), -math.inf, dtype=scores.dtype)
    mx = mx.scatter_reduce(0, index[:, None].expand(-1, heads), scores, reduce="amax", include_self=True)
    ex = torch.exp(scores - mx[index].detach())
    den = torch.zeros((n, heads), dtype=scores.dtype).index_add(0, index, ex)
    return ex / den[index]


def dropout(h: torch.Tensor, p: float, training: bool) -> torch.Tensor:
    """Inverted dropout; same contract as ``F.dropout`` but draws uniforms,
    which is markedly cheaper than Bernoulli sampling on CPU."""
    if not training or p == 0.0:
        return h
    keep = torch.rand(h.shape, dtype=h.dtype) >= p
    return h * keep / (1.0 - p)


def masked_softmax(scores: torch.Tensor, mask: torch.Tensor, dim: int = -1) -> torch.Tensor:
    """Softmax along ``dim`` over entries where ``mask`` is True; the rest get 0."""
    return torch.softmax(scores.masked_fill(~mask, -math.inf), dim=dim)


def _pad_diagonal(batch: Batch, mask: torch.Tensor) -> torch.Tensor:
    """Give padding slots a self pair so their softmax rows stay finite."""
    m = mask.shape[-1]
    eye = torch.eye(m, dtype=torch.bool)
    return mask | (eye & ~batch.node_mask[:, :, None])


class Readout(nn.Module):
    def __init__(self, hidden: int, n_out: int, mode: str):
        super().__init__()
        self.mode = mode
        self.head = nn.Linear(hidden, n_out)

    def forward(self, hd: torch.Tensor, batch: Batch) -> torch.Tensor:
        mask = (batch.chp_mask if self.mode == "chp" else batch.node_mask).to(hd.dtype)
        pooled = (hd * mask[:, :, None]).sum(1) / mask.sum(1).clamp(min=1.0)[:, None]
        return self.head(pooled)


class GATLayer(nn.Module):
    """Edge-aware attention: score(j -> i) = LeakyReLU(a . [W h_i || W h_j || W_e e_ij]),
    normalised over the in-neighbours of i (self-loop included)."""

    def __init__(self, in_dim: int, out_dim: int, heads: int, edge_dim: int, concat: bool):
        super().__init__()
        self.heads, self.out_dim, self.concat = heads, out_dim, concat
        self.lin = nn.Linear(in_dim, heads * out_dim, bias=False)
        self.lin_edge = nn.Linear(edge_dim, heads * out_dim, bias=False)
        self.att_dst = nn.Parameter(torch.empty(heads, out_dim))
        self.att_src = nn.Parameter(torch.empty(heads, out_dim))
        self.att_edge = nn.Parameter(torch.empty(heads, out_dim))
        self.bias = nn.Parameter(torch.zeros(heads * out_dim if concat else out_dim))

    def forward(self, hd: torch.Tensor, batch: Batch):
        g, m = hd.shape[:2]
        z = self.lin(hd).view(g, m, self.heads, self.out_dim)
        # a_edge . (W_e e) per head, contracted before touching the pairs
        w_e = self.lin_edge.weight.view(self.heads, self.out_dim, -1)
        edge_score = batch.dense_attr @ torch.einsum("hd,hdk->kh", self.att_edge, w_e)  # G x M x M x H
        s_dst = (z * self.att_dst).sum(-1)
        s_src = (z * self.att_src).sum(-1)
        score = s_dst[:, :, None, :] + s_src[:, None, :, :] + edge_score
        score = F.leaky_relu(score, NEG_SLOPE).permute(0, 3, 1, 2)  # G x H x M(dst) x M(src)
        alpha = masked_softmax(score, _pad_diagonal(batch, batch.adj)[:, None])
        out = (alpha @ z.transpose(1, 2)).transpose(1, 2)  # G x M x H x D
        out = out.reshape(g, m, -1) if self.concat else out.mean(dim=2)
        return out + self.bias, alpha


def _edge_weights(alpha: torch.Tensor, batch: Batch, src: torch.Tensor, dst: torch.Tensor) -> torch.Tensor:
    """Read dense G x H x M x M attention at the listed (dst, src) node pairs -> E x H."""
    gid = batch.node_graph[dst]
    return alpha[gid, :, batch.local[dst], batch.local[src]]


class GATModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        per_head = cfg.hidden_dim // cfg.num_heads
        dims_in = [cfg.in_dim] + [cfg.hidden_dim] * (cfg.layers - 1)
        self.convs = nn.ModuleList()
        for li, d_in in enumerate(dims_in):
            last = li == cfg.layers - 1
            self.convs.append(GATLayer(d_in, cfg.hidden_dim if last else per_head, cfg.num_heads,
                                       cfg.edge_dim, concat=not last))
        self.readout = Readout(cfg.hidden_dim, cfg.n_outputs, cfg.readout)

    def forward(self, batch: Batch):
        hd = batch.to_dense(batch.x)
        attn = []
        for conv in self.convs:
            hd = dropout(hd, self.cfg.dropout_rate, self.training)
            hd, alpha = conv(hd, batch)
            hd = F.elu(hd)
            attn.append(Attention(batch.src, batch.dst, _edge_weights(alpha, batch, batch.src, batch.dst)))
        return self.readout(hd, batch), attn


class HyperAttentionLayer(nn.Module):
    """Herbs -> hyperedges by dose-weighted mean, then each herb attends over
    itself and the hyperedges it belongs to. A virtual node's new state is its
    hyperedge state."""

    def __init__(self, in_dim: int, out_dim: int, heads: int, concat: bool):
        super().__init__()
        self.heads, self.out_dim, self.concat = heads, out_dim, concat
        self.lin = nn.Linear(in_dim, heads * out_dim, bias=False)
        self.att_node = nn.Parameter(torch.empty(heads, out_dim))
        self.att_edge = nn.Parameter(torch.empty(heads, out_dim))
        self.bias = nn.Parameter(torch.zeros(heads * out_dim if concat else out_dim))

    def forward(self, hd: torch.Tensor, batch: Batch):
        g, m = hd.shape[:2]
        z = self.lin(hd).view(g, m, self.heads, self.out_dim)
        w = batch.member_weight  # G x V x C
        wsum = w.sum(-1)
        wsum = torch.where(wsum > 0, wsum, torch.ones_like(wsum))
        edge_state = torch.einsum("gvc,gchd->gvhd", w, z) / wsum[:, :, None, None]

        s_node = (z * self.att_node).sum(-1)  # G x M x H
        s_self = s_node + (z * self.att_edge).sum(-1)
        s_edge = (edge_state * self.att_edge).sum(-1)
        s_hyper = s_node[:, :, None, :] + s_edge[:, None, :, :]  # G x C x V x H
        score = F.leaky_relu(torch.cat([s_self[:, :, None, :], s_hyper], dim=2), NEG_SLOPE)
        cand = torch.cat([torch.ones((g, m, 1), dtype=torch.bool), batch.member.transpose(1, 2)], dim=2)
        alpha = masked_softmax(score, cand[..., None], dim=2)  # G x C x (1 + V) x H
        out_chp = alpha[:, :, 0, :, None] * z + torch.einsum("gcvh,gvhd->gchd", alpha[:, :, 1:], edge_state)
        out = torch.where(batch.chp_mask[:, :, None, None], out_chp, edge_state)
        out = out.reshape(g, m, -1) if self.concat else out.mean(dim=2)
        return out + self.bias, alpha

    @staticmethod
    def records(alpha: torch.Tensor, batch: Batch) -> Attention:
        chp = torch.nonzero(batch.is_chp).flatten()
        g_c, l_c = batch.node_graph[chp], batch.local[chp]
        self_w = alpha[g_c, l_c, 0]
        g_i = batch.node_graph[batch.inc_node]
        hyper_w = alpha[g_i, batch.local[batch.inc_node], 1 + batch.local[batch.inc_edge]]
        return Attention(torch.cat([chp, batch.inc_edge]), torch.cat([chp, batch.inc_node]),
                         torch.cat([self_w, hyper_w]))


class HGNNModel(nn.Module):
    """Two hypergraph attention layers. Virtual-node input attributes are not
    read: a virtual node is represented by the state of its hyperedge."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        per_head = cfg.hidden_dim // cfg.num_heads
        self.convs = nn.ModuleList([
            HyperAttentionLayer(cfg.in_dim, per_head, cfg.num_heads, concat=True),
            HyperAttentionLayer(cfg.hidden_dim, cfg.hidden_dim, cfg.num_heads, concat=False),
        ])
        self.readout = Readout(cfg.hidden_dim, cfg.n_outputs, cfg.readout)

    def forward(self, batch: Batch):
        hd = batch.to_dense(batch.x)
        attn = []
        for conv in self.convs:
            hd = dropout(hd, self.cfg.dropout_rate, self.training)
            hd, alpha = conv(hd, batch)
            hd = F.elu(hd)
            attn.append(HyperAttentionLayer.records(alpha, batch))
        return self.readout(hd, batch), attn


class GTNModel(nn.Module):
    """One transformer block: full attention among all nodes of a graph, with a
    learned per-head bias added to the score of pairs joined by an edge."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.hidden_dim
        self.inp = nn.Linear(cfg.in_dim, d)
        self.q = nn.Linear(d, d)
        self.k = nn.Linear(d, d, bias=False)  # a key bias only shifts each row of scores
        self.v = nn.Linear(d, d)
        self.o = nn.Linear(d, d)
        self.edge_bias = nn.Linear(cfg.edge_dim, cfg.num_heads)
        self.ff1 = nn.Linear(d, 2 * d)
        self.ff2 = nn.Linear(2 * d, d)
        self.readout = Readout(d, cfg.n_outputs, cfg.readout)

    def forward(self, batch: Batch):
        cfg = self.cfg
        heads, dh = cfg.num_heads, cfg.hidden_dim // cfg.num_heads
        x = dropout(batch.to_dense(batch.x), cfg.dropout_rate, self.training)
        h0 = self.inp(x)
        g, m = h0.shape[:2]
        q = self.q(h0).view(g, m, heads, dh).transpose(1, 2)
        k = self.k(h0).view(g, m, heads, dh).transpose(1, 2)
        v = self.v(h0).view(g, m, heads, dh).transpose(1, 2)
        score = q @ k.transpose(-1, -2) / math.sqrt(dh)  # G x H x M x M
        bias = self.edge_bias(batch.dense_attr).permute(0, 3, 1, 2)
        score = score + torch.where(batch.connected[:, None], bias, torch.zeros_like(bias))
        pairs = batch.node_mask[:, :, None] & batch.node_mask[:, None, :]
        alpha = masked_softmax(score, _pad_diagonal(batch, pairs)[:, None])
        att = (alpha @ v).transpose(1, 2).reshape(g, m, -1)
        h1 = h0 + dropout(self.o(att), cfg.dropout_rate, self.training)
        h2 = h1 + dropout(self.ff2(F.relu(self.ff1(h1))), cfg.dropout_rate, self.training)
        rec = Attention(batch.pair_src, batch.pair_dst, _edge_weights(alpha, batch, batch.pair_src, batch.pair_dst))
        return self.readout(F.elu(h2), batch), [rec]


_MODELS = {"GAT": GATModel, "HGNN": HGNNModel, "GTN": GTNModel}


def init_parameters(model: nn.Module, seed: int) -> None:
    """Glorot-uniform weights, zero biases, drawn from a private generator."""
    gen = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for name, p in model.named_parameters():
            if name.endswith("bias"):
                p.zero_()
                continue
            fan_out, fan_in = (p.shape[0], p.shape[1]) if p.dim() == 2 else (1, p.numel())
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            p.copy_(torch.rand(p.shape, generator=gen, dtype=p.dtype) * 2 * bound - bound)


def build_model(cfg: ModelConfig, seed: int = 0, dtype=torch.float32) -> nn.Module:
    model = _MODELS[cfg.arch](cfg).to(dtype)
    init_parameters(model, seed)
    return model


def forward(model: nn.Module, batch: Batch, mode: str = "eval"):
    """Run ``model`` on ``batch`` in ``train`` (dropout on) or ``eval`` mode."""
    cfg = model.cfg
    if batch.x.shape[1] != cfg.in_dim or batch.edge_attr.shape[1] != cfg.edge_dim:
        raise ShapeMismatch(f"batch has {batch.x.shape[1]} node / {batch.edge_attr.shape[1]} edge features, "
                            f"model expects {cfg.in_dim} / {cfg.edge_dim}")
    model.train(mode == "train")
    param = next(model.parameters())
    if batch.x.dtype != param.dtype:
        raise ShapeMismatch(f"batch dtype {batch.x.dtype} != model dtype {param.dtype}")
    return model(batch)


def gat_forward(model, batch, mode="eval"):
    if model.cfg.arch != "GAT":
        raise ShapeMismatch("not a GAT model")
    return forward(model, batch, mode)


def hgnn_forward(model, batch, mode="eval"):
    if model.cfg.arch != "HGNN":
        raise ShapeMismatch("not an HGNN model")
    return forward(model, batch, mode)


def gtn_forward(model, batch, mode="eval"):
    if model.cfg.arch != "GTN":
        raise ShapeMismatch("not a GTN model")
    return forward(model, batch, mode)
