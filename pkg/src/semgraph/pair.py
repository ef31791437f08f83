"""Cross-graph attention for sentence pairs, composition layers, and pooling.

Every node of one graph attends over the other graph's nodes with biaffine
scores; the attended summary is compared against the node's own state through
the 4-way concatenation ``[h; h~; h - h~; h * h~]`` and projected back to the
hidden size.  Extra relational composition layers (separate parameters, shared
between the two sentences) then propagate the attended information.  Pooling
max-pools each graph columnwise, concatenates the sequence-level summary
vector, and layer-normalizes.

One biaffine definition is used everywhere in this package:
``score(x, y) = x^T U y + u . [x; y] + bias``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .encoder import continue_layers, glorot
from .graphs import AugmentedGraph


@dataclass
class PairAttentionParams:
    """Biaffine score parameters plus the post-comparison projection."""

    u_bilinear: ad.Value  # (hidden, hidden)
    u_linear: ad.Value  # (2*hidden,)
    bias: ad.Value  # scalar
    w_compare: ad.Value  # (hidden, 4*hidden)

    def named_values(self, prefix: str):
        yield f"{prefix}.bilinear", self.u_bilinear
        yield f"{prefix}.linear", self.u_linear
        yield f"{prefix}.bias", self.bias
        yield f"{prefix}.compare", self.w_compare


@dataclass
class PoolingParams:
    """Layer-norm affine over the pooled output vector."""

    gain: ad.Value
    offset: ad.Value

    def named_values(self, prefix: str):
        yield f"{prefix}.gain", self.gain
        yield f"{prefix}.offset", self.offset


def init_pair_attention_params(hidden: int, rng) -> PairAttentionParams:
    return PairAttentionParams(
        u_bilinear=ad.param(glorot(rng, hidden, hidden)),
        u_linear=ad.param(glorot(rng, 2 * hidden, 0)),
        bias=ad.param(0.0),
        w_compare=ad.param(glorot(rng, hidden, 4 * hidden)),
    )


def init_pooling_params(output_dim: int) -> PoolingParams:
    return PoolingParams(
        gain=ad.param(np.ones(output_dim)), offset=ad.param(np.zeros(output_dim))
    )


def _split_linear_term(p: PairAttentionParams, hidden: int):
    parts = ad.reshape(p.u_linear, (2, hidden))
    return ad.embedding_lookup(parts, [0]), ad.embedding_lookup(parts, [1])


def biaffine_attention(h_a: ad.Value, h_b: ad.Value, p: PairAttentionParams) -> ad.Value:
    """Score matrix with entry (i, j) = biaffine(a_i, b_j)."""
    if h_a.shape[1] != h_b.shape[1]:
        raise ad.ShapeError(f"hidden dims differ: {h_a.shape} vs {h_b.shape}")
    hidden = h_a.shape[1]
    u_a, u_b = _split_linear_term(p, hidden)
    bilinear = ad.matmul(ad.matmul(h_a, p.u_bilinear), ad.transpose(h_b))
    lin_a = ad.matmul(h_a, ad.transpose(u_a))  # (|a|, 1)
    lin_b = ad.transpose(ad.matmul(h_b, ad.transpose(u_b)))  # (1, |b|)
    return ad.add(ad.add(bilinear, ad.add(lin_a, lin_b)), p.bias)


def _attend_compare(h_own: ad.Value, h_other: ad.Value, scores: ad.Value, p) -> ad.Value:
    attended = ad.matmul(ad.softmax_rows(scores), h_other)
    diff = ad.add(h_own, ad.scalar_mul(attended, -1.0))
    prod = ad.mul(h_own, attended)
    stacked = ad.concat([h_own, attended, diff, prod], axis=1)
    return ad.relu(ad.matmul(stacked, ad.transpose(p.w_compare)))


def cross_graph_update(
    h_a: ad.Value, h_b: ad.Value, p: PairAttentionParams
) -> tuple[ad.Value, ad.Value]:
    """Attend each graph over the other; both directions share one score matrix."""
    if h_a.shape[0] == 0 or h_b.shape[0] == 0:
        raise ad.ShapeError("cross_graph_update needs non-empty graphs on both sides")
    alpha = biaffine_attention(h_a, h_b, p)
    out_a = _attend_compare(h_a, h_b, alpha, p)
    out_b = _attend_compare(h_b, h_a, ad.transpose(alpha), p)
    return out_a, out_b


def compose_after_attention(
    ag_a: AugmentedGraph,
    h_a: ad.Value,
    ag_b: AugmentedGraph,
    h_b: ad.Value,
    composition_layers,
    train: bool = False,
    seed: int = 0,
    dropout_p: float = 0.0,
) -> tuple[ad.Value, ad.Value]:
    """Run the extra relational layers over both updated graphs."""
    out_a = continue_layers(ag_a, h_a, composition_layers, train, seed, dropout_p)
    out_b = continue_layers(ag_b, h_b, composition_layers, train, seed, dropout_p)
    return out_a, out_b


def pool_single(h: ad.Value, seq_summary, p: PoolingParams) -> ad.Value:
    """Columnwise max over nodes, concat the sequence summary, layer-norm.

    Pass ``seq_summary=None`` to drop the concatenation (the ablation switch);
    the pooling params must then be sized to the bare pooled width.
    """
    if h.shape[0] == 0:
        raise ad.ShapeError("cannot pool a zero-node graph")
    pooled = ad.row_max_pool(h)
    if seq_summary is not None:
        pooled = ad.concat([pooled, ad.as_value(seq_summary)], axis=0)
    return ad.layer_norm(pooled, p.gain, p.offset)


def pool_pair(h_a: ad.Value, h_b: ad.Value, seq_summary, p: PoolingParams) -> ad.Value:
    """Per-graph max pools concatenated (a then b), then summary, then norm."""
    if h_a.shape[0] == 0 or h_b.shape[0] == 0:
        raise ad.ShapeError("cannot pool a zero-node graph")
    parts = [ad.row_max_pool(h_a), ad.row_max_pool(h_b)]
    if seq_summary is not None:
        parts.append(ad.as_value(seq_summary))
    return ad.layer_norm(ad.concat(parts, axis=0), p.gain, p.offset)
