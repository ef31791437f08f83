"""Graph initialization and relational graph convolution layers.

Node states start as the ReLU of a learned projection of each token's mean
wordpiece vector.  Each relational layer then updates node ``i`` as

    h'_i = ReLU( sum_r sum_{j in N_i^r} (1/|N_i^r|) W_r h_j  +  W_0 h_i )

where ``r`` ranges over the doubled relation space (originals plus inverses)
and every ``W_r`` is composed from ``B`` shared basis matrices through a
learned coefficient table.  The GCN variant shares one ``W`` across all
relations but is otherwise identical; the GAT variant replaces the count
normalization with softmax attention over the label-blind neighbor set.
Dropout is applied between layers and once after the stack, never inside a
layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .corpus import EmbeddingSequence, TokenAlignment
from .graphs import AugmentedGraph
from .seeding import derive_seed

VARIANTS = ("rgcn", "gcn", "gat")


@dataclass(frozen=True)
class EncoderConfig:
    """Structural hyperparameters of the graph encoder stack."""

    num_layers: int = 2
    hidden_dim: int = 256
    num_bases: int = 20
    inter_layer_dropout: float = 0.0
    final_dropout: float = 0.0
    variant: str = "rgcn"

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.num_bases < 1:
            raise ValueError("num_bases must be >= 1")

    def validate_for(self, num_relations_augmented: int) -> None:
        if self.variant == "rgcn" and self.num_bases > num_relations_augmented:
            raise ValueError(
                f"num_bases {self.num_bases} exceeds augmented relation count "
                f"{num_relations_augmented}"
            )


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    """Uniform init in +-sqrt(6/(fan_in+fan_out)); keeps grad-check magnitudes stable."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    shape = (fan_out, fan_in) if fan_in > 0 else (fan_out,)
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class GraphInitParams:
    """Projection from embedding space into the encoder's hidden space."""

    w_e: ad.Value  # (hidden, embedding dim)

    def named_values(self, prefix: str):
        yield f"{prefix}.w_e", self.w_e


@dataclass
class RgcnLayerParams:
    """Basis matrices, per-relation coefficients, and the self transformation."""

    bases: list  # B Values, each (hidden, hidden)
    coefficients: ad.Value  # (num relations incl. inverses, B)
    w_self: ad.Value  # (hidden, hidden)

    @property
    def num_bases(self) -> int:
        return len(self.bases)

    @property
    def num_relations(self) -> int:
        return self.coefficients.shape[0]

    def named_values(self, prefix: str):
        for b, basis in enumerate(self.bases):
            yield f"{prefix}.basis.{b}", basis
        yield f"{prefix}.coefficients", self.coefficients
        yield f"{prefix}.self", self.w_self


@dataclass
class GcnLayerParams:
    w_shared: ad.Value
    w_self: ad.Value

    def named_values(self, prefix: str):
        yield f"{prefix}.shared", self.w_shared
        yield f"{prefix}.self", self.w_self


@dataclass
class GatLayerParams:
    w_proj: ad.Value
    attn_self: ad.Value  # score term for the aggregating node
    attn_neighbor: ad.Value  # score term for the neighbor
    w_self: ad.Value

    def named_values(self, prefix: str):
        yield f"{prefix}.proj", self.w_proj
        yield f"{prefix}.attn_self", self.attn_self
        yield f"{prefix}.attn_neighbor", self.attn_neighbor
        yield f"{prefix}.self", self.w_self


@dataclass
class EncoderParams:
    """Init projection plus one parameter bundle per layer."""

    config: EncoderConfig = field(repr=False)
    init: GraphInitParams
    layers: list

    def named_values(self, prefix: str = "encoder"):
        yield from self.init.named_values(f"{prefix}.init")
        for i, layer in enumerate(self.layers):
            yield from layer.named_values(f"{prefix}.layer{i}")


def init_layer_params(config: EncoderConfig, num_relations: int, rng) -> object:
    h = config.hidden_dim
    if config.variant == "rgcn":
        return RgcnLayerParams(
            bases=[ad.param(glorot(rng, h, h)) for _ in range(config.num_bases)],
            coefficients=ad.param(glorot(rng, num_relations, config.num_bases)),
            w_self=ad.param(glorot(rng, h, h)),
        )
    if config.variant == "gcn":
        return GcnLayerParams(
            w_shared=ad.param(glorot(rng, h, h)), w_self=ad.param(glorot(rng, h, h))
        )
    return GatLayerParams(
        w_proj=ad.param(glorot(rng, h, h)),
        attn_self=ad.param(glorot(rng, h, 0)),
        attn_neighbor=ad.param(glorot(rng, h, 0)),
        w_self=ad.param(glorot(rng, h, h)),
    )


def init_encoder_params(
    config: EncoderConfig, embedding_dim: int, num_relations: int, rng
) -> EncoderParams:
    config.validate_for(num_relations)
    return EncoderParams(
        config=config,
        init=GraphInitParams(w_e=ad.param(glorot(rng, config.hidden_dim, embedding_dim))),
        layers=[
            init_layer_params(config, num_relations, rng)
            for _ in range(config.num_layers)
        ],
    )


# ---------------------------------------------------------------------------
# operations


def token_mean_matrix(align: TokenAlignment, num_pieces: int) -> np.ndarray:
    """Constant (tokens, pieces) matrix averaging each token's aligned span."""
    mat = np.zeros((len(align.spans), num_pieces))
    for i, (start, stop) in enumerate(align.spans):
        if stop > num_pieces:
            raise ValueError(f"alignment range [{start},{stop}) exceeds {num_pieces} pieces")
        mat[i, start:stop] = 1.0 / (stop - start)
    return mat


def init_node_embeddings(emb, align, params: GraphInitParams) -> ad.Value:
    """Layer-0 node states: ReLU of the projected mean of aligned wordpieces.

    ``emb`` is an EmbeddingSequence or any Value matrix of per-piece rows
    (e.g. the output of a trainable backbone); ``align`` is a TokenAlignment
    or an already-built (tokens, pieces) averaging matrix.
    """
    pieces = (
        ad.constant(emb.vectors) if isinstance(emb, EmbeddingSequence) else ad.as_value(emb)
    )
    if isinstance(align, TokenAlignment):
        align = token_mean_matrix(align, pieces.shape[0])
    elif align.shape[1] != pieces.shape[0]:
        raise ValueError(f"averaging matrix covers {align.shape[1]} pieces, got {pieces.shape[0]}")
    means = ad.matmul(ad.constant(align), pieces)
    return ad.relu(ad.matmul(means, ad.transpose(params.w_e)))


def compose_relation_weight(params: RgcnLayerParams, relation: int) -> ad.Value:
    """W_r as the coefficient-weighted sum of the basis matrices."""
    if not 0 <= relation < params.num_relations:
        raise ValueError(f"relation {relation} out of range")
    h = params.bases[0].shape[0]
    flat = ad.concat([ad.reshape(b, (1, h * h)) for b in params.bases], axis=0)
    row = ad.embedding_lookup(params.coefficients, [relation])
    return ad.reshape(ad.matmul(row, flat), (h, h))


def _relation_mean_matrices(ag: AugmentedGraph) -> dict[int, np.ndarray]:
    """Per-relation constant matrices M with M[i,j] = 1/|N_i^r| for j in N_i^r."""
    out = {}
    n = ag.num_nodes
    for r in range(ag.num_relations):
        mat = None
        for i in range(n):
            nbrs = ag.adjacency[i][r]
            if not nbrs:
                continue
            if mat is None:
                mat = np.zeros((n, n))
            mat[i, list(nbrs)] = 1.0 / len(nbrs)
        if mat is not None:
            out[r] = mat
    return out


def rgcn_layer(ag: AugmentedGraph, h: ad.Value, params: RgcnLayerParams) -> ad.Value:
    if h.shape[0] != ag.num_nodes:
        raise ValueError(f"{h.shape[0]} state rows for {ag.num_nodes} nodes")
    if params.num_relations != ag.num_relations:
        raise ValueError(
            f"params cover {params.num_relations} relations, graph has {ag.num_relations}"
        )
    total = ad.matmul(h, ad.transpose(params.w_self))
    for r, averaging in _relation_mean_matrices(ag).items():
        w_r = compose_relation_weight(params, r)
        messages = ad.matmul(ad.constant(averaging), h)
        total = ad.add(total, ad.matmul(messages, ad.transpose(w_r)))
    return ad.relu(total)


def gcn_layer(ag: AugmentedGraph, h: ad.Value, params: GcnLayerParams) -> ad.Value:
    """Same update as rgcn_layer with one shared transformation for all relations."""
    if h.shape[0] != ag.num_nodes:
        raise ValueError(f"{h.shape[0]} state rows for {ag.num_nodes} nodes")
    total = ad.matmul(h, ad.transpose(params.w_self))
    mats = _relation_mean_matrices(ag)
    if mats:
        combined = ad.constant(sum(mats.values()))
        total = ad.add(total, ad.matmul(ad.matmul(combined, h), ad.transpose(params.w_shared)))
    return ad.relu(total)


def _unlabeled_neighbors(ag: AugmentedGraph) -> list[list[int]]:
    out = []
    for i in range(ag.num_nodes):
        merged = set()
        for r in range(ag.num_relations):
            merged.update(ag.adjacency[i][r])
        out.append(sorted(merged))
    return out


def gat_layer(ag: AugmentedGraph, h: ad.Value, params: GatLayerParams) -> ad.Value:
    """Label-blind aggregation with single-head additive attention scores."""
    if h.shape[0] != ag.num_nodes:
        raise ValueError(f"{h.shape[0]} state rows for {ag.num_nodes} nodes")
    projected = ad.matmul(h, ad.transpose(params.w_proj))
    self_scores = ad.reshape(ad.matmul(projected, params.attn_self), (ag.num_nodes, 1))
    nbr_scores = ad.reshape(ad.matmul(projected, params.attn_neighbor), (ag.num_nodes, 1))
    rows = []
    zero = ad.constant(np.zeros((1, h.shape[1])))
    for i, nbrs in enumerate(_unlabeled_neighbors(ag)):
        if not nbrs:
            rows.append(zero)
            continue
        logits = ad.add(
            ad.transpose(ad.embedding_lookup(nbr_scores, nbrs)),
            ad.embedding_lookup(self_scores, [i]),
        )
        weights = ad.softmax_rows(logits)
        rows.append(ad.matmul(weights, ad.embedding_lookup(projected, nbrs)))
    total = ad.add(ad.concat(rows, axis=0), ad.matmul(h, ad.transpose(params.w_self)))
    return ad.relu(total)


def apply_layer(ag: AugmentedGraph, h: ad.Value, layer_params) -> ad.Value:
    if isinstance(layer_params, RgcnLayerParams):
        return rgcn_layer(ag, h, layer_params)
    if isinstance(layer_params, GcnLayerParams):
        return gcn_layer(ag, h, layer_params)
    if isinstance(layer_params, GatLayerParams):
        return gat_layer(ag, h, layer_params)
    raise TypeError(f"unknown layer params {type(layer_params)!r}")


def encode(
    ag: AugmentedGraph,
    emb,
    align: TokenAlignment,
    config: EncoderConfig,
    params: EncoderParams,
    train: bool = False,
    seed: int = 0,
) -> ad.Value:
    """Init then the layer stack, with dropout between layers and at the end."""
    if len(params.layers) != config.num_layers:
        raise ValueError("params do not match config layer count")
    h = init_node_embeddings(emb, align, params.init)
    for i, layer_params in enumerate(params.layers):
        h = apply_layer(ag, h, layer_params)
        if i + 1 < config.num_layers and config.inter_layer_dropout > 0:
            h = ad.dropout(
                h, config.inter_layer_dropout, train, derive_seed(seed, "inter", i)
            )
    if config.final_dropout > 0:
        h = ad.dropout(h, config.final_dropout, train, derive_seed(seed, "final"))
    return h


def continue_layers(
    ag: AugmentedGraph, h: ad.Value, layers, train=False, seed=0, dropout_p=0.0
) -> ad.Value:
    """Apply extra composition layers to already-encoded states."""
    for i, layer_params in enumerate(layers):
        h = apply_layer(ag, h, layer_params)
        if i + 1 < len(layers) and dropout_p > 0:
            h = ad.dropout(h, dropout_p, train, derive_seed(seed, "compose", i))
    return h
