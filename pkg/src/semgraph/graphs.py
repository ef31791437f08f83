"""Labeled directed graphs over sentence tokens, and their inverse-augmented form.

A :class:`SemanticGraph` stores edges as ``(source, target, relation)`` triples
over token indices.  Graphs need not be trees or connected, and nodes may be
isolated.  Before message passing, a graph is augmented: every relation gets an
inverse twin, doubling the relation index space, so information can flow against
edge direction.  Self-loops are never stored in the augmented adjacency; the
encoder applies a dedicated self transformation instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class GraphError(ValueError):
    """A graph violates a structural invariant."""


@dataclass(frozen=True)
class RelationVocab:
    """Ordered set of relation labels plus the inverse-indexing scheme.

    Original labels occupy indices ``[0, size)``; the inverse of relation ``r``
    lives at ``r + size``.  Inversion is an involution on ``[0, 2*size)``.
    """

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.labels)) != len(self.labels):
            raise GraphError(f"duplicate relation labels: {self.labels}")

    @classmethod
    def from_labels(cls, labels) -> "RelationVocab":
        return cls(labels=tuple(labels))

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def augmented_size(self) -> int:
        return 2 * len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise GraphError(f"unknown relation label: {label!r}") from None

    def label(self, index: int) -> str:
        if not 0 <= index < self.size:
            raise GraphError(f"relation index {index} out of range [0, {self.size})")
        return self.labels[index]

    def inverse(self, index: int) -> int:
        """Map a relation index (original or inverse) to its counterpart."""
        if not 0 <= index < self.augmented_size:
            raise GraphError(
                f"relation index {index} out of range [0, {self.augmented_size})"
            )
        return (index + self.size) % self.augmented_size

    def is_inverse(self, index: int) -> bool:
        return index >= self.size


@dataclass(frozen=True)
class SemanticGraph:
    """Labeled directed graph over ``num_nodes`` sentence tokens.

    ``edges`` holds ``(source, target, relation-index)`` triples; ``top_nodes``
    flags nodes marked as graph tops.  Tops are carried through serialization
    and evaluation but ignored by the encoder.
    """

    num_nodes: int
    edges: tuple[tuple[int, int, int], ...] = ()
    top_nodes: frozenset[int] = frozenset()

    @classmethod
    def build(cls, num_nodes, edges=(), top_nodes=()) -> "SemanticGraph":
        return cls(
            num_nodes=num_nodes,
            edges=tuple((int(s), int(t), int(r)) for s, t, r in edges),
            top_nodes=frozenset(int(n) for n in top_nodes),
        )

    def relabel(self, perm) -> "SemanticGraph":
        """Apply a node permutation: new index of node ``i`` is ``perm[i]``."""
        if sorted(perm) != list(range(self.num_nodes)):
            raise GraphError("perm must be a permutation of node indices")
        return SemanticGraph.build(
            self.num_nodes,
            [(perm[s], perm[t], r) for s, t, r in self.edges],
            [perm[n] for n in self.top_nodes],
        )


def validate_graph(g: SemanticGraph, vocab: RelationVocab) -> SemanticGraph:
    """Check all SemanticGraph invariants; return ``g`` unchanged if they hold."""
    if g.num_nodes < 0:
        raise GraphError("num_nodes must be non-negative")
    seen = set()
    for s, t, r in g.edges:
        if not (0 <= s < g.num_nodes and 0 <= t < g.num_nodes):
            raise GraphError(
                f"edge ({s},{t}) out of range for {g.num_nodes} nodes"
            )
        if not 0 <= r < vocab.size:
            raise GraphError(f"unknown relation index {r} (vocab size {vocab.size})")
        if (s, t, r) in seen:
            raise GraphError(f"duplicate edge ({s},{t},{vocab.label(r)})")
        seen.add((s, t, r))
    for n in g.top_nodes:
        if not 0 <= n < g.num_nodes:
            raise GraphError(f"top node {n} out of range")
    return g


@dataclass(frozen=True)
class AugmentedGraph:
    """A validated graph plus per-(node, relation-or-inverse) in-neighbor lists.

    ``adjacency[node][rel]`` lists, in ascending order, the sources of edges
    arriving at ``node`` under ``rel``, where ``rel`` ranges over the doubled
    relation space.  For every base edge ``(u, v, r)``, ``v`` sees ``u`` under
    ``r`` and ``u`` sees ``v`` under ``inverse(r)``.  Self-loops are skipped.
    """

    base: SemanticGraph
    vocab: RelationVocab
    adjacency: tuple[tuple[tuple[int, ...], ...], ...] = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return self.base.num_nodes

    @property
    def num_relations(self) -> int:
        """Size of the augmented relation space (originals plus inverses)."""
        return self.vocab.augmented_size


def augment_with_inverse_relations(
    g: SemanticGraph, vocab: RelationVocab
) -> AugmentedGraph:
    """Build the inverse-augmented adjacency used by the graph encoders."""
    validate_graph(g, vocab)
    nbrs: list[list[set[int]]] = [
        [set() for _ in range(vocab.augmented_size)] for _ in range(g.num_nodes)
    ]
    for s, t, r in g.edges:
        if s == t:
            continue  # handled by the encoder's dedicated self transformation
        nbrs[t][r].add(s)
        nbrs[s][vocab.inverse(r)].add(t)
    adjacency = tuple(
        tuple(tuple(sorted(per_rel)) for per_rel in per_node) for per_node in nbrs
    )
    return AugmentedGraph(base=g, vocab=vocab, adjacency=adjacency)


def neighborhood(ag: AugmentedGraph, node: int, relation: int) -> list[int]:
    """In-neighbors of ``node`` under ``relation``, ascending."""
    if not 0 <= node < ag.num_nodes:
        raise GraphError(f"node {node} out of range [0, {ag.num_nodes})")
    if not 0 <= relation < ag.num_relations:
        raise GraphError(
            f"relation {relation} out of range [0, {ag.num_relations})"
        )
    return list(ag.adjacency[node][relation])
