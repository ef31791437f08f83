"""Turn scores into structures.

Trees: Chu-Liu-Edmonds maximum spanning arborescence over an (n+1)x(n+1)
score matrix whose entry (h, d) scores the arc h -> d, with the virtual root
at index 0.  Greedy selection per dependent, cycle contraction, recursion,
then expansion.  Ties always keep the lower source index.

Graphs: each ordered pair (i, j) is an independent decision; an edge is
included iff its raw score exceeds the threshold (0 by default, i.e. sigmoid
0.5 for scores trained as binary cross entropy), labeled by argmax with ties
broken toward the lowest label index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import SemanticGraph


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class DecodedTree:
    """Heads (0 = virtual root) and label indices, one per token."""

    heads: tuple[int, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        n = len(self.heads)
        if len(self.labels) != n:
            raise DecodeError("heads/labels length mismatch")
        for d, h in enumerate(self.heads, start=1):
            if not 0 <= h <= n or h == d:
                raise DecodeError(f"token {d} has invalid head {h}")
        for start in range(1, n + 1):
            node, chain = start, set()
            while node != 0:
                if node in chain:
                    raise DecodeError(f"cycle through token {node}")
                chain.add(node)
                node = self.heads[node - 1]

    @property
    def num_tokens(self) -> int:
        return len(self.heads)


def _argmax_head(candidates, column_scores) -> int:
    """Highest-scoring candidate; equal scores keep the lowest index."""
    best, best_score = None, None
    for h in candidates:
        s = column_scores[h]
        if best_score is None or s > best_score:
            best, best_score = h, s
    return best


def _find_cycle(heads: dict[int, int]) -> list[int] | None:
    color = {}
    for start in heads:
        if color.get(start):
            continue
        path, node = [], start
        while node in heads and color.get(node) is None:
            color[node] = "active"
            path.append(node)
            node = heads[node]
        if node in heads and color.get(node) == "active":
            return path[path.index(node):]
        for v in path:
            color[v] = "done"
    return None


def _cle(nodes: list[int], scores: dict, root: int, fresh: list[int]) -> dict[int, int]:
    best = {}
    for d in nodes:
        if d == root:
            continue
        candidates = [h for h in nodes if h != d]
        best[d] = _argmax_head(candidates, {h: scores[(h, d)] for h in candidates})
    cycle = _find_cycle(best)
    if cycle is None:
        return best
    cycle_set = set(cycle)
    merged = fresh[0]
    fresh[0] += 1
    outside = [n for n in nodes if n not in cycle_set]
    new_scores = {}
    enter_via, leave_via = {}, {}
    for x in outside:
        for y in outside:
            if x != y and y != root:
                new_scores[(x, y)] = scores[(x, y)]
    for x in outside:
        best_gain, best_v = None, None
        for v in sorted(cycle_set):
            gain = scores[(x, v)] - scores[(best[v], v)]
            if best_gain is None or gain > best_gain:
                best_gain, best_v = gain, v
        new_scores[(x, merged)] = best_gain
        enter_via[x] = best_v
    for y in outside:
        if y == root:
            continue
        best_score, best_v = None, None
        for v in sorted(cycle_set):
            s = scores[(v, y)]
            if best_score is None or s > best_score:
                best_score, best_v = s, v
        new_scores[(merged, y)] = best_score
        leave_via[y] = best_v
    sub = _cle(outside + [merged], new_scores, root, fresh)
    heads = {}
    entry_x = sub[merged]
    entry_v = enter_via[entry_x]
    for v in cycle_set:
        heads[v] = entry_x if v == entry_v else best[v]
    for d, h in sub.items():
        if d == merged:
            continue
        heads[d] = leave_via[d] if h == merged else h
    return heads


def chu_liu_edmonds(arc_scores: np.ndarray, root: int = 0) -> DecodedTree:
    """Maximum spanning arborescence; labels are left at index 0."""
    arc_scores = np.asarray(arc_scores, dtype=float)
    if arc_scores.ndim != 2 or arc_scores.shape[0] != arc_scores.shape[1]:
        raise DecodeError(f"score matrix must be square, got {arc_scores.shape}")
    if not np.all(np.isfinite(arc_scores)):
        raise DecodeError("scores must be finite")
    if root != 0:
        raise DecodeError("root must be index 0")
    size = arc_scores.shape[0]
    if size < 2:
        raise DecodeError("need at least one token besides the root")
    nodes = list(range(size))
    # arcs into the root are never candidates, so the score maps omit them
    scores = {
        (h, d): float(arc_scores[h, d])
        for h in nodes
        for d in nodes
        if h != d and d != root
    }
    heads = _cle(nodes, scores, root, fresh=[size])
    return DecodedTree(
        heads=tuple(heads[d] for d in range(1, size)), labels=(0,) * (size - 1)
    )


def tree_score(arc_scores: np.ndarray, tree: DecodedTree) -> float:
    return float(sum(arc_scores[h, d] for d, h in enumerate(tree.heads, start=1)))


def assign_labels(tree: DecodedTree, label_scores: np.ndarray) -> DecodedTree:
    """Label each decoded arc by argmax; ties keep the lowest label index."""
    labels = []
    for d, h in enumerate(tree.heads, start=1):
        labels.append(int(np.argmax(label_scores[h, d])))
    return DecodedTree(heads=tree.heads, labels=tuple(labels))


def greedy_graph_decode(
    arc_scores: np.ndarray, label_scores: np.ndarray, threshold: float = 0.0
) -> SemanticGraph:
    """Thresholded independent edge decisions with argmax labels."""
    arc_scores = np.asarray(arc_scores, dtype=float)
    if not np.all(np.isfinite(arc_scores)):
        raise DecodeError("scores must be finite")
    n = arc_scores.shape[0]
    edges = []
    for i in range(n):
        for j in range(n):
            if arc_scores[i, j] > threshold:
                edges.append((i, j, int(np.argmax(label_scores[i, j]))))
    return SemanticGraph.build(n, edges)
