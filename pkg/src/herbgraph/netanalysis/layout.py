"""ForceAtlas2 force-directed layout with a Barnes-Hut quadtree for repulsion.

Forces follow the Gephi formulation: linear attraction along edges scaled by
weight^edge_weight_influence, degree-weighted repulsion k_r (d_i + 1)(d_j + 1) / dist,
and a gravity pull toward the origin (proportional to distance in strong
gravity mode). Step sizes adapt globally from swinging versus traction. Over
the last ``cooling_fraction`` of iterations each step is additionally damped so
its energy (sum of m_i |step_i|^2) is at most ``cooling_rate`` times the previous
one; without this the layout keeps jittering at a level set by the jitter
tolerance and the Barnes-Hut approximation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np


@dataclass(frozen=True)
class LayoutParams:
    edge_weight_influence: float = 1.0
    jitter_tolerance: float = 0.1
    barnes_hut_theta: float = 1.2
    strong_gravity: bool = True
    gravity: float = 5.0
    scaling_ratio: float = 2.0
    iterations: int = 500
    seed: int = 0
    barnes_hut: bool = True
    cooling_fraction: float = 0.2
    cooling_rate: float = 0.95

    def __post_init__(self):
        for name in ("jitter_tolerance", "barnes_hut_theta", "gravity", "scaling_ratio"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.cooling_fraction <= 1.0 or not 0.0 < self.cooling_rate <= 1.0:
            raise ValueError("cooling_fraction must lie in [0, 1] and cooling_rate in (0, 1]")
        if self.edge_weight_influence < 0 or self.iterations < 0:
            raise ValueError("edge_weight_influence and iterations must be non-negative")


@dataclass
class Layout:
    nodes: list
    positions: np.ndarray  # n x 2
    energy: list[float] = field(default_factory=list)  # sum of m_i |step_i|^2 per iteration

    def as_dict(self) -> dict:
        return {u: (float(x), float(y)) for u, (x, y) in zip(self.nodes, self.positions)}


class _QuadTree:
    """Region tree over points; each region stores total mass and mass centre."""

    __slots__ = ("mass", "center", "size", "children", "point")

    def __init__(self, pos: np.ndarray, mass: np.ndarray, idx: np.ndarray, lo: np.ndarray, size: float, depth=0):
        self.mass = float(mass[idx].sum())
        self.center = (pos[idx] * mass[idx, None]).sum(axis=0) / self.mass
        self.size = size
        self.children: list[_QuadTree] = []
        self.point = int(idx[0]) if len(idx) == 1 else -1
        if len(idx) > 1 and depth < 40:
            half = size / 2
            right = pos[idx, 0] >= lo[0] + half
            top = pos[idx, 1] >= lo[1] + half
            for qx in (False, True):
                for qy in (False, True):
                    sub = idx[(right == qx) & (top == qy)]
                    if len(sub):
                        corner = lo + half * np.array([qx, qy], dtype=np.float64)
                        self.children.append(_QuadTree(pos, mass, sub, corner, half, depth + 1))
        elif len(idx) > 1:
            self.point = -2  # coincident points: treated as one body

    def force_on(self, i: int, pos: np.ndarray, mass: np.ndarray, kr: float, theta: float) -> np.ndarray:
        d = pos[i] - self.center
        dist = float(np.hypot(d[0], d[1]))
        if self.point == i:
            return np.zeros(2)
        if self.children and (dist == 0 or self.size / dist >= theta):
            out = np.zeros(2)
            for c in self.children:
                out += c.force_on(i, pos, mass, kr, theta)
            return out
        if dist == 0:
            return np.zeros(2)
        return d * (kr * mass[i] * self.mass / dist ** 2)


def _repulsion_exact(pos, mass, kr):
    d = pos[:, None, :] - pos[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", d, d)
    np.fill_diagonal(dist2, np.inf)
    dist2[dist2 == 0] = np.inf
    f = kr * (mass[:, None] * mass[None, :]) / dist2
    return np.einsum("ij,ijk->ik", f, d)


def _repulsion_bh(pos, mass, kr, theta):
    lo = pos.min(axis=0)
    size = float(max(np.ptp(pos[:, 0]), np.ptp(pos[:, 1]), 1e-12)) * (1 + 1e-9)
    tree = _QuadTree(pos, mass, np.arange(len(pos)), lo, size)
    return np.array([tree.force_on(i, pos, mass, kr, theta) for i in range(len(pos))])


def forceatlas2(g: nx.Graph, params: LayoutParams = LayoutParams(), initial=None, weight: str = "weight") -> Layout:
    """Run ForceAtlas2; positions start seeded-uniform in the unit disk unless given."""
    nodes = sorted(g.nodes(), key=str)
    n = len(nodes)
    index = {u: i for i, u in enumerate(nodes)}
    if initial is not None:
        pos = np.array([initial[u] for u in nodes], dtype=np.float64).reshape(n, 2)
    else:
        rng = np.random.default_rng(params.seed)
        r = np.sqrt(rng.random(n))
        a = rng.random(n) * 2 * np.pi
        pos = np.column_stack([r * np.cos(a), r * np.sin(a)])
    if not np.all(np.isfinite(pos)):
        raise ValueError("initial positions must be finite")
    edges = [(index[u], index[v], float(d.get(weight, 1.0))) for u, v, d in g.edges(data=True) if u != v]
    src = np.array([e[0] for e in edges], dtype=np.int64)
    dst = np.array([e[1] for e in edges], dtype=np.int64)
    ew = np.array([e[2] for e in edges], dtype=np.float64) ** params.edge_weight_influence
    mass = np.array([g.degree(u) for u in nodes], dtype=np.float64) + 1.0

    speed, efficiency = 1.0, 1.0
    old_force = np.zeros_like(pos)
    energy: list[float] = []
    cool_from = params.iterations - int(round(params.cooling_fraction * params.iterations))
    for it in range(params.iterations):
        if params.barnes_hut and n > 1:
            force = _repulsion_bh(pos, mass, params.scaling_ratio, params.barnes_hut_theta)
        elif n > 1:
            force = _repulsion_exact(pos, mass, params.scaling_ratio)
        else:
            force = np.zeros_like(pos)
        if params.strong_gravity:
            force -= params.gravity * mass[:, None] * pos
        else:
            dist = np.hypot(pos[:, 0], pos[:, 1])
            safe = np.where(dist > 0, dist, 1.0)
            force -= np.where(dist[:, None] > 0, params.gravity * mass[:, None] * pos / safe[:, None], 0.0)
        if len(edges):
            delta = (pos[src] - pos[dst]) * ew[:, None]
            np.add.at(force, src, -delta)
            np.add.at(force, dst, delta)

        # global speed adaptation (Gephi)
        swinging = mass * np.hypot(*(force - old_force).T)
        traction = mass * np.hypot(*(force + old_force).T) / 2
        total_swing, total_traction = float(swinging.sum()), float(traction.sum())
        estimated_jitter = 0.05 * np.sqrt(n)
        min_jt, max_jt = np.sqrt(estimated_jitter), 10.0
        jt = params.jitter_tolerance * max(min_jt, min(max_jt, estimated_jitter * total_traction / n ** 2))
        if total_traction > 0 and total_swing / total_traction > 2.0:
            if efficiency > 0.05:
                efficiency *= 0.5
            jt = max(jt, params.jitter_tolerance)
        target = jt * efficiency * total_traction / total_swing if total_swing > 0 else speed * 2
        if total_swing > jt * total_traction:
            if efficiency > 0.05:
                efficiency *= 0.7
        elif speed < 1000:
            efficiency *= 1.3
        speed = speed + min(target - speed, 0.5 * speed)

        factor = speed / (1.0 + np.sqrt(speed * swinging))
        step = force * factor[:, None]
        e = float(np.sum(mass * np.einsum("ij,ij->i", step, step)))
        if it >= cool_from and energy and e > params.cooling_rate * energy[-1]:
            # final phase: damp the whole step so its energy shrinks geometrically
            scale = np.sqrt(params.cooling_rate * energy[-1] / e)
            step *= scale
            e = float(np.sum(mass * np.einsum("ij,ij->i", step, step)))
        pos = pos + step
        energy.append(e)
        old_force = force
    return Layout(nodes, pos, energy)


def smoothed(values, window: int = 10) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if len(v) < window:
        return v
    return np.convolve(v, np.ones(window) / window, mode="valid")
