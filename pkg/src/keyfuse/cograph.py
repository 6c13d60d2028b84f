"""Corpus-wide word co-occurrence graph, dominating sets, and PageRank."""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class GraphError(Exception):
    pass


class PageRankError(GraphError):
    """Power iteration failed to converge; carries the final residual."""

    def __init__(self, residual, iterations):
        super().__init__(f"pagerank did not converge after {iterations} iterations "
                         f"(L1 residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


@dataclass
class CooccurrenceGraph:
    vocab: dict            # word -> node id
    words: list            # node id -> word
    adjacency: list        # node id -> sorted list of neighbor ids
    window: int

    def __len__(self):
        return len(self.words)

    @property
    def n_edges(self):
        return sum(len(a) for a in self.adjacency) // 2

    def degree(self, node):
        return len(self.adjacency[node])

    def neighbors(self, node):
        return self.adjacency[node]

    def has_edge(self, u, v):
        adj = self.adjacency[u]
        i = bisect.bisect_left(adj, v)
        return i < len(adj) and adj[i] == v


def filtered_norms(doc) -> list:
    """Norms of non-stopword, non-punctuation tokens, in document order."""
    return [t.norm for t in doc.tokens if not t.is_stopword and not t.is_punct]


def build_graph(docs, window: int = 2) -> CooccurrenceGraph:
    """Undirected unweighted graph over filtered word norms of all documents.

    Token distance is measured on the filtered sequence; any unordered pair
    at distance <= window within a document is an edge. Node ids follow
    sorted vocabulary order, so the graph is invariant to document order.
    """
    if window < 1:
        raise GraphError(f"window must be >= 1, got {window}")
    vocab_words = set()
    edges = set()
    per_doc = [filtered_norms(d) for d in docs]
    for seq in per_doc:
        vocab_words.update(seq)
    words = sorted(vocab_words)
    vocab = {w: i for i, w in enumerate(words)}
    for seq in per_doc:
        ids = [vocab[w] for w in seq]
        n = len(ids)
        for i in range(n):
            for j in range(i + 1, min(i + window + 1, n)):
                if ids[i] != ids[j]:
                    edges.add((min(ids[i], ids[j]), max(ids[i], ids[j])))
    adjacency = [[] for _ in words]
    for u, v in edges:
        adjacency[u].append(v)
        adjacency[v].append(u)
    for a in adjacency:
        a.sort()
    g = CooccurrenceGraph(vocab=vocab, words=words, adjacency=adjacency, window=window)
    check_graph(g)
    return g


def check_graph(g: CooccurrenceGraph):
    """Structural invariants: symmetry, no self-loops, no duplicate edges."""
    for u, adj in enumerate(g.adjacency):
        assert adj == sorted(set(adj)), f"node {u}: unsorted or duplicated neighbors"
        assert u not in adj, f"node {u}: self-loop"
        for v in adj:
            assert u in g.adjacency[v], f"edge {u}-{v} not symmetric"


def greedy_dominating_set(g: CooccurrenceGraph) -> set:
    """Greedy dominating set: repeatedly take the node covering the most
    uncovered nodes (itself plus neighbors), lowest id on ties."""
    n = len(g)
    uncovered = set(range(n))
    members = set()
    while uncovered:
        best, best_gain = -1, 0
        for v in range(n):
            if v in members:
                continue
            gain = (v in uncovered) + sum(1 for u in g.adjacency[v] if u in uncovered)
            if gain > best_gain:
                best, best_gain = v, gain
        members.add(best)
        uncovered.discard(best)
        uncovered.difference_update(g.adjacency[best])
    return members


def is_dominating(g: CooccurrenceGraph, members) -> bool:
    for v in range(len(g)):
        if v not in members and not any(u in members for u in g.adjacency[v]):
            return False
    return True


def pagerank(g: CooccurrenceGraph, damping: float = 0.85, tol: float = 1e-10,
             max_iter: int = 100) -> dict:
    """PageRank scores (word -> score) by power iteration.

    Iterates until the L1 residual drops below tol; dangling nodes spread
    their mass uniformly. Raises PageRankError when max_iter is exhausted.
    """
    if not 0 < damping < 1:
        raise GraphError(f"damping must be in (0,1), got {damping}")
    n = len(g)
    if n == 0:
        return {}
    deg = np.array([len(a) for a in g.adjacency], dtype=np.float64)
    src = np.fromiter((u for u, adj in enumerate(g.adjacency) for _ in adj), dtype=np.int64,
                      count=int(deg.sum()))
    dst = np.fromiter((v for adj in g.adjacency for v in adj), dtype=np.int64,
                      count=int(deg.sum()))
    dangling = deg == 0
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        contrib = np.zeros(n)
        if len(src):
            np.add.at(contrib, dst, x[src] / deg[src])
        dangling_mass = x[dangling].sum()
        nxt = (1.0 - damping) / n + damping * (contrib + dangling_mass / n)
        residual = np.abs(nxt - x).sum()
        x = nxt
        if residual < tol:
            return {g.words[i]: float(x[i]) for i in range(n)}
    raise PageRankError(residual, max_iter)


def textrank_extract(doc, scores: dict, k: int) -> set:
    """Top-k scored unigrams present in the document, with adjacent selected
    words merged into multiword phrases."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k == 0:
        return set()
    cands = sorted(
        {t.norm for t in doc.tokens if not t.is_stopword and not t.is_punct and t.norm in scores},
        key=lambda w: (-scores[w], w),
    )
    selected = set(cands[:k])
    if not selected:
        return set()
    phrases = set()
    run = []
    prev_pos = None
    for t in doc.tokens:
        hit = (not t.is_stopword and not t.is_punct and t.norm in selected)
        if hit and prev_pos is not None and t.position == prev_pos + 1 and run:
            run.append(t.norm)
        elif hit:
            if run:
                phrases.add(" ".join(run))
            run = [t.norm]
        else:
            if run:
                phrases.add(" ".join(run))
            run = []
        prev_pos = t.position if hit else None
    if run:
        phrases.add(" ".join(run))
    return phrases


def save_graph(g: CooccurrenceGraph, graph_path, vocab_path):
    """Write `v=<n> e=<m> window=<w>` plus one `u v` edge per line, and a
    sibling `id<TAB>word` vocab map."""
    graph_path, vocab_path = Path(graph_path), Path(vocab_path)
    edges = sorted((u, v) for u, adj in enumerate(g.adjacency) for v in adj if u < v)
    with open(graph_path, "w", encoding="utf-8") as fh:
        fh.write(f"v={len(g)} e={len(edges)} window={g.window}\n")
        for u, v in edges:
            fh.write(f"{u} {v}\n")
    with open(vocab_path, "w", encoding="utf-8") as fh:
        for i, w in enumerate(g.words):
            fh.write(f"{i}\t{w}\n")


def load_graph(graph_path, vocab_path) -> CooccurrenceGraph:
    graph_path, vocab_path = Path(graph_path), Path(vocab_path)
    with open(graph_path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        fields = dict(part.split("=") for part in header.split())
        n, m, window = int(fields["v"]), int(fields["e"]), int(fields["window"])
        adjacency = [[] for _ in range(n)]
        count = 0
        for line in fh:
            if not line.strip():
                continue
            u, v = map(int, line.split())
            adjacency[u].append(v)
            adjacency[v].append(u)
            count += 1
    if count != m:
        raise GraphError(f"{graph_path}: header says {m} edges, found {count}")
    words = [""] * n
    with open(vocab_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            idx, word = line.rstrip("\n").split("\t")
            words[int(idx)] = word
    for a in adjacency:
        a.sort()
    return CooccurrenceGraph(vocab={w: i for i, w in enumerate(words)}, words=words,
                             adjacency=adjacency, window=window)
