"""Random-walk corpora over the co-occurrence graph.

Three strategies: uniform walks, second-order biased walks (return/in-out
parameters p and q), and dominating-guided walks that start at dominating
nodes and steer toward a second one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

STRATEGIES = ("deepwalk", "node2vec", "exem")


class WalkError(Exception):
    pass


@dataclass(frozen=True)
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 80
    p: float = 1.0
    q: float = 1.0
    exem_bias: float = 0.5
    seed: int = 1

    def __post_init__(self):
        if self.walk_length < 2:
            raise WalkError(f"walk_length must be >= 2, got {self.walk_length}")
        if self.p <= 0 or self.q <= 0:
            raise WalkError(f"p and q must be positive, got p={self.p} q={self.q}")
        if not 0.0 <= self.exem_bias <= 1.0:
            raise WalkError(f"exem_bias must be in [0,1], got {self.exem_bias}")
        if self.walks_per_node < 1:
            raise WalkError(f"walks_per_node must be >= 1, got {self.walks_per_node}")


@dataclass
class WalkCorpus:
    walks: list                 # list of node-id lists
    strategy: str
    config: WalkConfig
    # exem only: per-walk flag, True when a second dominating node was reached
    reached_second_dom: list | None = None


def _node_rng(seed: int, node: int) -> np.random.Generator:
    # independent stream per start node so parallel and serial runs agree
    return np.random.default_rng([seed, node])


def uniform_step_dist(g, cur) -> dict:
    """First-order transition law: uniform over neighbors."""
    nbrs = g.adjacency[cur]
    if not nbrs:
        return {}
    w = 1.0 / len(nbrs)
    return {v: w for v in nbrs}


def biased_step_dist(g, prev, cur, p, q) -> dict:
    """Second-order transition law with unnormalized weights 1/p (back to
    prev), 1 (neighbor of prev), 1/q (two hops from prev)."""
    nbrs = g.adjacency[cur]
    if not nbrs:
        return {}
    weights = []
    for x in nbrs:
        if x == prev:
            weights.append(1.0 / p)
        elif g.has_edge(x, prev):
            weights.append(1.0)
        else:
            weights.append(1.0 / q)
    total = sum(weights)
    return {x: w / total for x, w in zip(nbrs, weights)}


def dominating_step_dist(g, dom, cur, n_dom_seen, beta) -> dict:
    """Dominating-guided transition law: while fewer than two dominating
    nodes were visited, a dominating neighbor is taken with probability
    beta (uniform among them); otherwise uniform over all neighbors."""
    nbrs = g.adjacency[cur]
    if not nbrs:
        return {}
    if n_dom_seen >= 2:
        return uniform_step_dist(g, cur)
    dom_nbrs = [v for v in nbrs if v in dom]
    if not dom_nbrs:
        return uniform_step_dist(g, cur)
    dist = {v: (1.0 - beta) / len(nbrs) for v in nbrs}
    for v in dom_nbrs:
        dist[v] += beta / len(dom_nbrs)
    return dist


def _sample(rng, dist: dict):
    nodes = list(dist.keys())
    probs = np.array([dist[v] for v in nodes])
    return nodes[rng.choice(len(nodes), p=probs / probs.sum())]


def deepwalk_walks(g, cfg: WalkConfig) -> WalkCorpus:
    """walks_per_node uniform walks from every node; degree-0 nodes yield
    length-1 walks."""
    walks = []
    for start in range(len(g)):
        rng = _node_rng(cfg.seed, start)
        for _ in range(cfg.walks_per_node):
            walk = [start]
            while len(walk) < cfg.walk_length:
                nbrs = g.adjacency[walk[-1]]
                if not nbrs:
                    break
                walk.append(nbrs[rng.integers(len(nbrs))])
            walks.append(walk)
    return WalkCorpus(walks=walks, strategy="deepwalk", config=cfg)


def node2vec_walks(g, cfg: WalkConfig) -> WalkCorpus:
    """Second-order biased walks; the first step is uniform."""
    walks = []
    for start in range(len(g)):
        rng = _node_rng(cfg.seed, start)
        for _ in range(cfg.walks_per_node):
            walk = [start]
            while len(walk) < cfg.walk_length:
                cur = walk[-1]
                nbrs = g.adjacency[cur]
                if not nbrs:
                    break
                if len(walk) == 1:
                    walk.append(nbrs[rng.integers(len(nbrs))])
                else:
                    dist = biased_step_dist(g, walk[-2], cur, cfg.p, cfg.q)
                    walk.append(_sample(rng, dist))
            walks.append(walk)
    return WalkCorpus(walks=walks, strategy="node2vec", config=cfg)


def exem_walks(g, dom, cfg: WalkConfig) -> WalkCorpus:
    """walks_per_node walks from each dominating node, steering toward a
    second dominating node with probability exem_bias per step until one
    is reached."""
    if len(g) and not dom:
        raise WalkError("empty dominating set on a nonempty graph")
    walks = []
    flags = []
    dom = set(dom)
    for start in sorted(dom):
        rng = _node_rng(cfg.seed, start)
        for _ in range(cfg.walks_per_node):
            walk = [start]
            dom_seen = {start}
            while len(walk) < cfg.walk_length:
                cur = walk[-1]
                nbrs = g.adjacency[cur]
                if not nbrs:
                    break
                if len(dom_seen) < 2:
                    dom_nbrs = [v for v in nbrs if v in dom]
                    if dom_nbrs and rng.random() < cfg.exem_bias:
                        nxt = dom_nbrs[rng.integers(len(dom_nbrs))]
                    else:
                        nxt = nbrs[rng.integers(len(nbrs))]
                else:
                    nxt = nbrs[rng.integers(len(nbrs))]
                walk.append(nxt)
                if nxt in dom:
                    dom_seen.add(nxt)
            walks.append(walk)
            flags.append(len(dom_seen) >= 2)
    return WalkCorpus(walks=walks, strategy="exem", config=cfg, reached_second_dom=flags)


def generate_walks(g, strategy: str, cfg: WalkConfig, dom=None) -> WalkCorpus:
    if strategy == "deepwalk":
        return deepwalk_walks(g, cfg)
    if strategy == "node2vec":
        return node2vec_walks(g, cfg)
    if strategy == "exem":
        if dom is None:
            raise WalkError("exem walks need a dominating set")
        return exem_walks(g, dom, cfg)
    raise WalkError(f"unknown walk strategy: {strategy!r}")


def check_walks(g, corpus: WalkCorpus):
    """Every consecutive pair must be an edge; lengths within bounds."""
    for walk in corpus.walks:
        assert 1 <= len(walk) <= corpus.config.walk_length
        for a, b in zip(walk, walk[1:]):
            assert g.has_edge(a, b), f"walk step {a}->{b} is not an edge"


def save_walks(path, corpus: WalkCorpus):
    cfg = corpus.config
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# strategy={corpus.strategy} walks_per_node={cfg.walks_per_node} "
                 f"walk_length={cfg.walk_length} p={cfg.p} q={cfg.q} "
                 f"exem_bias={cfg.exem_bias} seed={cfg.seed}\n")
        for walk in corpus.walks:
            fh.write(" ".join(map(str, walk)) + "\n")


def load_walks(path) -> WalkCorpus:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise WalkError(f"{path}: missing header comment")
        fields = dict(part.split("=") for part in header[1:].split())
        cfg = WalkConfig(
            walks_per_node=int(fields["walks_per_node"]),
            walk_length=int(fields["walk_length"]),
            p=float(fields["p"]),
            q=float(fields["q"]),
            exem_bias=float(fields["exem_bias"]),
            seed=int(fields["seed"]),
        )
        walks = [list(map(int, line.split())) for line in fh if line.strip()]
    return WalkCorpus(walks=walks, strategy=fields["strategy"], config=cfg)
