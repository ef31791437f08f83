"""Biaffine arc and label scorers over token representations.

Two configurations share one scoring core.  The ceiling head inserts ReLU MLP
projections (separate head/dependent roles, separate arc/label widths) between
the backbone and the biaffine scorers and is meant to ride on a trainable
backbone.  The probe head removes the MLPs entirely, scoring frozen states
directly, which makes it a linear model of limited capacity.

Score matrices are oriented source-to-target: entry (i, j) scores the arc
from i to j.  For trees, node 0 is a virtual root whose learned state is
prepended to the token states; for graphs every ordered token pair is an
independent binary decision.  The training loss is the sum of the arc and
label cross entropies, with label scores computed on gold arcs (teacher
forcing).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .encoder import glorot
from .graphs import SemanticGraph

ARC_MASK = -1e9  # additive mask that removes self-arcs from head softmaxes


@dataclass(frozen=True)
class ParserConfig:
    """Head configuration; probe mode forces a frozen backbone and no MLPs."""

    mode: str = "ceiling"  # "ceiling" | "probe"
    target: str = "tree"  # "tree" | "graph"
    arc_mlp_dim: int = 512
    label_mlp_dim: int = 128
    freeze_backbone: bool | None = None

    def __post_init__(self):
        if self.mode not in ("ceiling", "probe"):
            raise ValueError(f"unknown parser mode {self.mode!r}")
        if self.target not in ("tree", "graph"):
            raise ValueError(f"unknown parse target {self.target!r}")
        if self.freeze_backbone is None:
            object.__setattr__(self, "freeze_backbone", self.mode == "probe")
        if self.mode == "probe" and not self.freeze_backbone:
            raise ValueError("probe mode requires a frozen backbone")

    @property
    def uses_mlp(self) -> bool:
        return self.mode == "ceiling"


@dataclass
class MlpParams:
    weight: ad.Value
    bias: ad.Value

    def named_values(self, prefix):
        yield f"{prefix}.weight", self.weight
        yield f"{prefix}.bias", self.bias

    def apply(self, states: ad.Value) -> ad.Value:
        return ad.relu(ad.add(ad.matmul(states, ad.transpose(self.weight)), self.bias))


@dataclass
class BiaffineParams:
    """score(x, y) = x^T U y + u . [x; y] + bias — the package-wide form."""

    u_bilinear: ad.Value
    u_linear: ad.Value
    bias: ad.Value

    def named_values(self, prefix):
        yield f"{prefix}.bilinear", self.u_bilinear
        yield f"{prefix}.linear", self.u_linear
        yield f"{prefix}.bias", self.bias


@dataclass
class LabelBiaffineParams:
    """One biaffine per relation label, sharing input roles."""

    u_bilinear: list  # L Values (d, d)
    u_linear: ad.Value  # (L, 2d)
    bias: ad.Value  # (L,)

    @property
    def num_labels(self) -> int:
        return len(self.u_bilinear)

    def named_values(self, prefix):
        for l, u in enumerate(self.u_bilinear):
            yield f"{prefix}.bilinear.{l}", u
        yield f"{prefix}.linear", self.u_linear
        yield f"{prefix}.bias", self.bias


@dataclass
class ParserHeadParams:
    config: ParserConfig = field(repr=False)
    arc: BiaffineParams
    labels: LabelBiaffineParams
    root_state: ad.Value | None = None  # tree target only
    arc_source_mlp: MlpParams | None = None
    arc_target_mlp: MlpParams | None = None
    label_source_mlp: MlpParams | None = None
    label_target_mlp: MlpParams | None = None

    def named_values(self, prefix: str = "parser"):
        yield from self.arc.named_values(f"{prefix}.arc")
        yield from self.labels.named_values(f"{prefix}.label")
        if self.root_state is not None:
            yield f"{prefix}.root", self.root_state
        for name in ("arc_source_mlp", "arc_target_mlp", "label_source_mlp", "label_target_mlp"):
            mlp = getattr(self, name)
            if mlp is not None:
                yield from mlp.named_values(f"{prefix}.{name}")


def init_parser_params(
    cfg: ParserConfig, input_dim: int, num_labels: int, rng
) -> ParserHeadParams:
    def mlp(width):
        return MlpParams(
            weight=ad.param(glorot(rng, width, input_dim)),
            bias=ad.param(np.zeros(width)),
        )

    arc_dim = cfg.arc_mlp_dim if cfg.uses_mlp else input_dim
    label_dim = cfg.label_mlp_dim if cfg.uses_mlp else input_dim
    return ParserHeadParams(
        config=cfg,
        arc=BiaffineParams(
            u_bilinear=ad.param(glorot(rng, arc_dim, arc_dim)),
            u_linear=ad.param(glorot(rng, 2 * arc_dim, 0)),
            bias=ad.param(0.0),
        ),
        labels=LabelBiaffineParams(
            u_bilinear=[ad.param(glorot(rng, label_dim, label_dim)) for _ in range(num_labels)],
            u_linear=ad.param(glorot(rng, num_labels, 2 * label_dim)),
            bias=ad.param(np.zeros(num_labels)),
        ),
        root_state=ad.param(glorot(rng, input_dim, 0)) if cfg.target == "tree" else None,
        arc_source_mlp=mlp(cfg.arc_mlp_dim) if cfg.uses_mlp else None,
        arc_target_mlp=mlp(cfg.arc_mlp_dim) if cfg.uses_mlp else None,
        label_source_mlp=mlp(cfg.label_mlp_dim) if cfg.uses_mlp else None,
        label_target_mlp=mlp(cfg.label_mlp_dim) if cfg.uses_mlp else None,
    )


@dataclass
class ParseScores:
    """Arc score matrix plus label scorers over the same representations."""

    arc_scores: ad.Value  # (n+1, n+1) for trees, (n, n) for graphs
    num_tokens: int
    target: str
    _label_source: ad.Value = field(repr=False)
    _label_target: ad.Value = field(repr=False)
    _labels: LabelBiaffineParams = field(repr=False)

    def label_logits(self, pairs) -> ad.Value:
        """(len(pairs), L) logits for the given (source, target) node pairs."""
        srcs = [s for s, _ in pairs]
        tgts = [t for _, t in pairs]
        hs = ad.embedding_lookup(self._label_source, srcs)
        ht = ad.embedding_lookup(self._label_target, tgts)
        d = hs.shape[1]
        ones = ad.constant(np.ones(d))
        columns = []
        lin = ad.matmul(ad.concat([hs, ht], axis=1), ad.transpose(self._labels.u_linear))
        for l, u in enumerate(self._labels.u_bilinear):
            bil = ad.matmul(ad.mul(ad.matmul(hs, u), ht), ones)
            columns.append(ad.reshape(bil, (len(pairs), 1)))
        stacked = ad.concat(columns, axis=1)
        return ad.add(ad.add(stacked, lin), self._labels.bias)

    def label_scores(self) -> np.ndarray:
        """Full (n_src, n_tgt, L) label score tensor, detached for decoding."""
        hs, ht = self._label_source.data, self._label_target.data
        u_stack = np.stack([u.data for u in self._labels.u_bilinear])
        bil = np.einsum("ih,lhk,jk->ijl", hs, u_stack, ht)
        d = hs.shape[1]
        lin_s = hs @ self._labels.u_linear.data[:, :d].T
        lin_t = ht @ self._labels.u_linear.data[:, d:].T
        return bil + lin_s[:, None, :] + lin_t[None, :, :] + self._labels.bias.data


def _biaffine_matrix(xs: ad.Value, ys: ad.Value, p: BiaffineParams) -> ad.Value:
    d = xs.shape[1]
    parts = ad.reshape(p.u_linear, (2, d))
    u_x = ad.embedding_lookup(parts, [0])
    u_y = ad.embedding_lookup(parts, [1])
    bilinear = ad.matmul(ad.matmul(xs, p.u_bilinear), ad.transpose(ys))
    lin_x = ad.matmul(xs, ad.transpose(u_x))
    lin_y = ad.transpose(ad.matmul(ys, ad.transpose(u_y)))
    return ad.add(ad.add(bilinear, ad.add(lin_x, lin_y)), p.bias)


def score(states: ad.Value, cfg: ParserConfig, params: ParserHeadParams) -> ParseScores:
    """Score all arcs: MLP projections then biaffine (ceiling), or direct (probe)."""
    n = states.shape[0]
    if cfg.target == "tree":
        root = ad.reshape(params.root_state, (1, states.shape[1]))
        states = ad.concat([root, states], axis=0)
    if cfg.uses_mlp:
        arc_src = params.arc_source_mlp.apply(states)
        arc_tgt = params.arc_target_mlp.apply(states)
        lbl_src = params.label_source_mlp.apply(states)
        lbl_tgt = params.label_target_mlp.apply(states)
    else:
        arc_src = arc_tgt = lbl_src = lbl_tgt = states
    arc = _biaffine_matrix(arc_src, arc_tgt, params.arc)
    return ParseScores(
        arc_scores=arc,
        num_tokens=n,
        target=cfg.target,
        _label_source=lbl_src,
        _label_target=lbl_tgt,
        _labels=params.labels,
    )


def _tree_gold(gold: SemanticGraph, n: int):
    heads = np.full(n + 1, -1, dtype=int)
    labels = {}
    for h, d, r in gold.edges:
        if not 1 <= d <= n or not 0 <= h <= n:
            raise ValueError(f"gold arc ({h},{d}) out of range")
        if heads[d] != -1:
            raise ValueError(f"gold tree gives token {d} two heads")
        heads[d] = h
        labels[(h, d)] = r
    if np.any(heads[1:] == -1):
        raise ValueError("gold tree leaves a token without a head")
    return heads, labels


def parsing_loss(scores: ParseScores, gold: SemanticGraph, cfg: ParserConfig) -> ad.Value:
    """Arc cross entropy plus label cross entropy on gold arcs."""
    n = scores.num_tokens
    if cfg.target == "tree":
        if gold.num_nodes != n + 1:
            raise ValueError(f"gold has {gold.num_nodes} nodes, scores cover {n + 1}")
        heads, labels = _tree_gold(gold, n)
        # rows become dependents over head candidates; self-arcs masked out
        per_dep = ad.embedding_lookup(ad.transpose(scores.arc_scores), list(range(1, n + 1)))
        mask = np.zeros((n, n + 1))
        mask[np.arange(n), np.arange(1, n + 1)] = ARC_MASK
        arc_loss = ad.cross_entropy(ad.add(per_dep, ad.constant(mask)), heads[1:])
        pairs = [(h, d) for (h, d) in sorted(labels)]
        gold_labels = [labels[p] for p in pairs]
    else:
        if gold.num_nodes != n:
            raise ValueError(f"gold has {gold.num_nodes} nodes, scores cover {n}")
        flat = ad.reshape(scores.arc_scores, (n * n, 1))
        two_class = ad.concat([ad.scalar_mul(flat, 0.0), flat], axis=1)
        targets = np.zeros(n * n, dtype=int)
        for s, t, _ in gold.edges:
            targets[s * n + t] = 1
        arc_loss = ad.cross_entropy(two_class, targets)
        ordered = sorted(gold.edges)
        pairs = [(s, t) for s, t, _ in ordered]
        gold_labels = [r for _, _, r in ordered]
    if not pairs:
        return arc_loss
    label_loss = ad.cross_entropy(scores.label_logits(pairs), gold_labels)
    return ad.add(arc_loss, label_loss)
