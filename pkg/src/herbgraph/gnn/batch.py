"""Disjoint-union batching of formula graphs into flat torch tensors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from ..formula_graph import DOSE_SLOT, N_EDGE_FEATURES, FormulaGraph


@dataclass
class Batch:
    x: torch.Tensor  # N x 91
    node_graph: torch.Tensor  # N, graph id of each node
    is_chp: torch.Tensor  # N, bool
    n_graphs: int
    node_offsets: np.ndarray  # G + 1
    # GAT: directed edges in both directions plus one self-loop per node
    src: torch.Tensor
    dst: torch.Tensor
    edge_attr: torch.Tensor
    # HGNN: herb -> hyperedge (virtual node) memberships
    inc_node: torch.Tensor
    inc_edge: torch.Tensor
    inc_weight: torch.Tensor
    # GTN: every ordered node pair within a graph
    pair_src: torch.Tensor
    pair_dst: torch.Tensor
    pair_edge: torch.Tensor  # index into ``edge_attr`` of the connecting edge, -1 when unconnected
    # padded per-graph views: G graphs x M slots (M = largest graph)
    local: torch.Tensor  # N, slot of each node inside its graph
    node_mask: torch.Tensor  # G x M, slot holds a real node
    chp_mask: torch.Tensor  # G x M
    adj: torch.Tensor  # G x M x M, [g, i, j]: i receives from j (edges, self-loops, padding diagonal)
    dense_attr: torch.Tensor  # G x M x M x 2, edge attribute of j -> i
    connected: torch.Tensor  # G x M x M, joined by an edge (no self pairs)
    member: torch.Tensor  # G x M x M, [g, v, c]: herb c belongs to hyperedge v
    member_weight: torch.Tensor  # G x M x M
    y: torch.Tensor | None = None

    @property
    def n_nodes(self) -> int:
        return self.x.shape[0]

    def to_dense(self, h: torch.Tensor) -> torch.Tensor:
        out = h.new_zeros((self.n_graphs, self.node_mask.shape[1]) + h.shape[1:])
        return out.index_put((self.node_graph, self.local), h)

    def from_dense(self, hd: torch.Tensor) -> torch.Tensor:
        return hd[self.node_graph, self.local]


@dataclass(frozen=True)
class GraphParts:
    """Index arrays of one graph, local to that graph; reused across batches."""

    x: np.ndarray
    is_chp: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    edge_attr: np.ndarray
    inc_node: np.ndarray
    inc_edge: np.ndarray
    inc_weight: np.ndarray
    pair_src: np.ndarray
    pair_dst: np.ndarray
    pair_edge: np.ndarray
    dense_attr: np.ndarray  # n x n x 2
    connected: np.ndarray  # n x n
    member_weight: np.ndarray  # n x n
    member: np.ndarray  # n x n
    labels: tuple[int, ...] | None


def graph_parts(g: FormulaGraph) -> GraphParts:
    n = g.n_nodes
    chp_mask = np.array([k == "CHP" for k in g.kinds], dtype=bool)
    e = g.edges.reshape(-1, 2)
    m = len(e)
    loops = np.arange(n)
    # directed copies: (a->b), (b->a), then self-loops with a zero attribute
    src = np.concatenate([e[:, 0], e[:, 1], loops])
    dst = np.concatenate([e[:, 1], e[:, 0], loops])
    attr = np.vstack([g.edge_attr.reshape(-1, N_EDGE_FEATURES), g.edge_attr.reshape(-1, N_EDGE_FEATURES),
                      np.zeros((n, N_EDGE_FEATURES))])

    members: dict[int, list[int]] = {}
    for (u, v), at in zip(e, g.edge_attr):
        if at[1] == 1.0:
            c, vv = (u, v) if chp_mask[u] else (v, u)
            members.setdefault(int(vv), []).append(int(c))
    inc_node, inc_edge, inc_w = [], [], []
    for vv in sorted(members):
        cs = np.array(sorted(members[vv]), dtype=np.int64)
        w = g.x[cs, DOSE_SLOT]
        inc_node.append(cs)
        inc_edge.append(np.full(len(cs), vv, dtype=np.int64))
        inc_w.append(w if w.sum() > 0 else np.ones(len(cs)))

    lookup = -np.ones((n, n), dtype=np.int64)
    if m:
        k = np.arange(m)
        lookup[e[:, 1], e[:, 0]] = k  # message u -> v travels on the forward copy
        lookup[e[:, 0], e[:, 1]] = m + k
    ii, jj = np.divmod(np.arange(n * n), n)
    dense_attr = np.zeros((n, n, N_EDGE_FEATURES))
    connected = np.zeros((n, n), dtype=bool)
    if m:
        dense_attr[e[:, 1], e[:, 0]] = g.edge_attr
        dense_attr[e[:, 0], e[:, 1]] = g.edge_attr
        connected[e[:, 1], e[:, 0]] = connected[e[:, 0], e[:, 1]] = True
    member_weight = np.zeros((n, n))
    member = np.zeros((n, n), dtype=bool)
    for cs, vs, w in zip(inc_node, inc_edge, inc_w):
        member_weight[vs, cs] = w
        member[vs, cs] = True
    cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)  # noqa: E731
    return GraphParts(
        x=np.asarray(g.x, dtype=np.float64), is_chp=chp_mask,
        src=src.astype(np.int64), dst=dst.astype(np.int64), edge_attr=attr,
        inc_node=cat(inc_node, np.int64), inc_edge=cat(inc_edge, np.int64), inc_weight=cat(inc_w, np.float64),
        pair_src=jj, pair_dst=ii, pair_edge=lookup[ii, jj], dense_attr=dense_attr, connected=connected,
        member_weight=member_weight, member=member, labels=g.labels,
    )


def collate_parts(parts: Sequence[GraphParts], dtype=torch.float64) -> Batch:
    sizes = np.array([len(p.is_chp) for p in parts], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n_edges = np.array([len(p.src) for p in parts], dtype=np.int64)
    edge_off = np.concatenate([[0], np.cumsum(n_edges)])

    def shifted(name, off):
        arrs = [getattr(p, name) + o for p, o in zip(parts, off)]
        return torch.from_numpy(np.concatenate(arrs)) if arrs else torch.zeros(0, dtype=torch.long)

    pair_edge = [np.where(p.pair_edge >= 0, p.pair_edge + o, -1) for p, o in zip(parts, edge_off)]
    ys = [p.labels for p in parts]
    y = None
    if parts and all(v is not None for v in ys):
        y = torch.tensor(np.array(ys, dtype=np.float64), dtype=dtype)
    node_graph = np.repeat(np.arange(len(parts)), sizes)
    G, M = len(parts), int(sizes.max()) if len(sizes) else 0
    node_mask = np.zeros((G, M), dtype=bool)
    chp_mask = np.zeros((G, M), dtype=bool)
    adj = np.zeros((G, M, M), dtype=bool)
    adj[:, np.arange(M), np.arange(M)] = True
    dense_attr = np.zeros((G, M, M, N_EDGE_FEATURES))
    connected = np.zeros((G, M, M), dtype=bool)
    member = np.zeros((G, M, M), dtype=bool)
    member_weight = np.zeros((G, M, M))
    for gi, (p, n) in enumerate(zip(parts, sizes)):
        node_mask[gi, :n] = True
        chp_mask[gi, :n] = p.is_chp
        adj[gi, :n, :n] |= p.connected
        dense_attr[gi, :n, :n] = p.dense_attr
        connected[gi, :n, :n] = p.connected
        member[gi, :n, :n] = p.member
        member_weight[gi, :n, :n] = p.member_weight
    local = np.arange(len(node_graph)) - np.repeat(offsets[:-1], sizes)
    return Batch(
        x=torch.from_numpy(np.vstack([p.x for p in parts])).to(dtype),
        node_graph=torch.from_numpy(node_graph),
        is_chp=torch.from_numpy(np.concatenate([p.is_chp for p in parts])),
        n_graphs=len(parts),
        node_offsets=offsets,
        src=shifted("src", offsets), dst=shifted("dst", offsets),
        edge_attr=torch.from_numpy(np.vstack([p.edge_attr for p in parts])).to(dtype),
        inc_node=shifted("inc_node", offsets), inc_edge=shifted("inc_edge", offsets),
        inc_weight=torch.from_numpy(np.concatenate([p.inc_weight for p in parts])).to(dtype),
        pair_src=shifted("pair_src", offsets), pair_dst=shifted("pair_dst", offsets),
        pair_edge=torch.from_numpy(np.concatenate(pair_edge)) if parts else torch.zeros(0, dtype=torch.long),
        local=torch.from_numpy(local), node_mask=torch.from_numpy(node_mask), chp_mask=torch.from_numpy(chp_mask),
        adj=torch.from_numpy(adj), dense_attr=torch.from_numpy(dense_attr).to(dtype),
        connected=torch.from_numpy(connected), member=torch.from_numpy(member),
        member_weight=torch.from_numpy(member_weight).to(dtype),
        y=y,
    )


def collate(graphs: Sequence[FormulaGraph], dtype=torch.float64) -> Batch:
    return collate_parts([graph_parts(g) for g in graphs], dtype)
