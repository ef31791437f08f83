"""Evaluation quantities: attachment scores, labeled F1, exact match,
multiclass correlation, Pearson, category breakdowns, and probe-vs-ceiling
deltas.

All rates are computed in exact integer counts and divided once.  Labeled F1
is micro-averaged over labeled directed edges across the corpus; top nodes
are excluded unless explicitly included as virtual-root edges.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .decode import DecodedTree
from .graphs import SemanticGraph

OVERALL_TAG = "overall"
DEFAULT_TAG = "uncategorized"
TOP_MARKER = -1  # virtual source index for included top nodes


class MetricError(ValueError):
    pass


def _check_matched(pred, gold):
    if len(pred) != len(gold):
        raise MetricError(f"matched lists required, got {len(pred)} vs {len(gold)}")


def tree_from_rooted_graph(g: SemanticGraph) -> DecodedTree:
    """Convert a graph with virtual root node 0 into head/label arrays."""
    n = g.num_nodes - 1
    heads = [-1] * n
    labels = [0] * n
    for h, d, r in g.edges:
        if not 1 <= d <= n:
            raise MetricError(f"dependent {d} out of token range")
        if heads[d - 1] != -1:
            raise MetricError(f"token {d} has two heads")
        heads[d - 1] = h
        labels[d - 1] = r
    if any(h == -1 for h in heads):
        raise MetricError("rooted graph leaves a token unattached")
    return DecodedTree(heads=tuple(heads), labels=tuple(labels))


def las(pred_trees, gold_trees) -> float:
    """Fraction of tokens with both head and label correct."""
    _check_matched(pred_trees, gold_trees)
    correct = total = 0
    for pred, gold in zip(pred_trees, gold_trees):
        if pred.num_tokens != gold.num_tokens:
            raise MetricError("tree length mismatch within a sentence")
        total += pred.num_tokens
        correct += sum(
            ph == gh and pl == gl
            for ph, gh, pl, gl in zip(pred.heads, gold.heads, pred.labels, gold.labels)
        )
    return correct / total if total else 1.0


def uas(pred_trees, gold_trees) -> float:
    _check_matched(pred_trees, gold_trees)
    correct = total = 0
    for pred, gold in zip(pred_trees, gold_trees):
        total += pred.num_tokens
        correct += sum(ph == gh for ph, gh in zip(pred.heads, gold.heads))
    return correct / total if total else 1.0


def _edge_set(g: SemanticGraph, include_tops: bool) -> set:
    edges = set(g.edges)
    if include_tops:
        edges |= {(TOP_MARKER, t, TOP_MARKER) for t in g.top_nodes}
    return edges


def labeled_f1(pred_graphs, gold_graphs, include_tops: bool = False):
    """Micro-averaged precision, recall, and F1 over labeled directed edges.

    With nothing predicted, precision is 0 when gold has edges and 1 when
    both sides are empty; symmetrically for recall.
    """
    _check_matched(pred_graphs, gold_graphs)
    correct = n_pred = n_gold = 0
    for pred, gold in zip(pred_graphs, gold_graphs):
        p, g = _edge_set(pred, include_tops), _edge_set(gold, include_tops)
        correct += len(p & g)
        n_pred += len(p)
        n_gold += len(g)
    precision = correct / n_pred if n_pred else (1.0 if n_gold == 0 else 0.0)
    recall = correct / n_gold if n_gold else (1.0 if n_pred == 0 else 0.0)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def _structure_key(struct, labeled: bool):
    if isinstance(struct, DecodedTree):
        return (struct.heads, struct.labels) if labeled else struct.heads
    if isinstance(struct, SemanticGraph):
        edges = frozenset(struct.edges if labeled else {(s, t) for s, t, _ in struct.edges})
        return edges
    raise MetricError(f"cannot exact-match {type(struct)!r}")


def exact_match(pred, gold, labeled: bool) -> float:
    """Fraction of sentences whose full structure matches exactly."""
    _check_matched(pred, gold)
    if not pred:
        return 1.0
    hits = sum(
        _structure_key(p, labeled) == _structure_key(g, labeled)
        for p, g in zip(pred, gold)
    )
    return hits / len(pred)


def r_k_correlation(pred_labels, gold_labels, num_classes: int) -> float:
    """Multiclass correlation from the K x K confusion matrix; degenerate -> 0."""
    if num_classes < 2:
        raise MetricError("r_k needs at least 2 classes")
    _check_matched(pred_labels, gold_labels)
    confusion = [[0] * num_classes for _ in range(num_classes)]
    for p, g in zip(pred_labels, gold_labels):
        if not (0 <= p < num_classes and 0 <= g < num_classes):
            raise MetricError("label outside [0, K)")
        confusion[g][p] += 1
    s = len(pred_labels)
    trace = sum(confusion[k][k] for k in range(num_classes))
    pred_marginals = [sum(confusion[g][k] for g in range(num_classes)) for k in range(num_classes)]
    true_marginals = [sum(confusion[k][p] for p in range(num_classes)) for k in range(num_classes)]
    cov = trace * s - sum(p * t for p, t in zip(pred_marginals, true_marginals))
    denom_p = s * s - sum(p * p for p in pred_marginals)
    denom_t = s * s - sum(t * t for t in true_marginals)
    if denom_p <= 0 or denom_t <= 0:
        return 0.0
    return cov / math.sqrt(denom_p * denom_t)


def pearson(preds, golds) -> float:
    """Sample correlation; zero-variance input gives 0 by convention."""
    _check_matched(preds, golds)
    n = len(preds)
    if n < 2:
        raise MetricError("pearson needs at least 2 points")
    mean_p = sum(preds) / n
    mean_g = sum(golds) / n
    cov = sum((p - mean_p) * (g - mean_g) for p, g in zip(preds, golds))
    var_p = sum((p - mean_p) ** 2 for p in preds)
    var_g = sum((g - mean_g) ** 2 for g in golds)
    if var_p == 0 or var_g == 0:
        return 0.0
    return cov / math.sqrt(var_p * var_g)


def category_counts(categories) -> dict[str, int]:
    counts: dict[str, int] = {}
    for tag in categories:
        counts[tag or DEFAULT_TAG] = counts.get(tag or DEFAULT_TAG, 0) + 1
    return counts


def accuracy_by_category(examples, predictions) -> dict[str, float]:
    """Per-tag accuracy plus the overall rate under the reserved key.

    ``examples`` need ``label`` and ``category`` attributes; examples without
    a category aggregate under the default tag.
    """
    _check_matched(examples, predictions)
    hits: dict[str, int] = {}
    totals: dict[str, int] = {}
    all_hits = 0
    for ex, pred in zip(examples, predictions):
        tag = getattr(ex, "category", None) or DEFAULT_TAG
        totals[tag] = totals.get(tag, 0) + 1
        correct = int(pred == ex.label)
        hits[tag] = hits.get(tag, 0) + correct
        all_hits += correct
    out = {tag: hits[tag] / totals[tag] for tag in sorted(totals)}
    out[OVERALL_TAG] = all_hits / len(examples) if examples else 1.0
    return out


def probe_delta(probe_score: float, ceiling_score: float) -> tuple[float, float]:
    """Absolute and relative probe-minus-ceiling differences."""
    if ceiling_score == 0:
        raise MetricError("ceiling score of 0 leaves the relative delta undefined")
    absolute = probe_score - ceiling_score
    return absolute, absolute / ceiling_score


@dataclass
class EvalReport:
    """Bundle of whichever metrics a run produces; None fields are omitted."""

    las: float | None = None
    uas: float | None = None
    labeled_precision: float | None = None
    labeled_recall: float | None = None
    labeled_f1: float | None = None
    lem: float | None = None
    uem: float | None = None
    accuracy: float | None = None
    r_k: float | None = None
    pearson: float | None = None
    per_category: dict = field(default_factory=dict)
    deltas: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {}
        for name in (
            "las",
            "uas",
            "labeled_precision",
            "labeled_recall",
            "labeled_f1",
            "lem",
            "uem",
            "accuracy",
            "r_k",
            "pearson",
        ):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.per_category:
            out["per_category"] = dict(sorted(self.per_category.items()))
        if self.deltas:
            out["deltas"] = self.deltas
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def render_table(self) -> str:
        """Aligned text table over the populated fields."""
        rows = []
        for key, value in self.to_json().items():
            if isinstance(value, dict):
                for sub, v in value.items():
                    rows.append((f"{key}/{sub}", v))
            else:
                rows.append((key, value))
        width = max((len(k) for k, _ in rows), default=0)
        lines = []
        for key, value in rows:
            if isinstance(value, (int, float)):
                lines.append(f"{key:<{width}}  {value:.4f}")
            else:
                lines.append(f"{key:<{width}}  {value}")
        return "\n".join(lines)


def delta_report(probe: EvalReport, ceiling: EvalReport, fields) -> dict:
    """Per-metric absolute/relative probe-ceiling deltas for the named fields."""
    out = {}
    for name in fields:
        p, c = getattr(probe, name), getattr(ceiling, name)
        if p is None or c is None or c == 0:
            continue
        absolute, relative = probe_delta(p, c)
        out[name] = {"absolute": absolute, "relative": relative}
    return out
