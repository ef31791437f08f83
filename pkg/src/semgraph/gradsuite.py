"""Gradient verification suites: every kernel primitive, then the full
pair-task model (encoders, cross-graph attention, composition, pooling,
classifier) checked end to end against central differences."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .encoder import EncoderConfig, encode, init_encoder_params, init_layer_params
from .graphs import RelationVocab, SemanticGraph, augment_with_inverse_relations
from .pair import (
    compose_after_attention,
    cross_graph_update,
    init_pair_attention_params,
    init_pooling_params,
    pool_pair,
)
from .seeding import derive_rng


def _weigh(v: ad.Value) -> ad.Value:
    flat = ad.reshape(v, (-1,) if v.data.ndim else (1,))
    coeffs = ad.constant(np.linspace(0.4, 1.6, flat.shape[0]))
    return ad.matmul(flat, coeffs)


def primitive_cases(seed: int = 0):
    """(name, builder, inputs) triples covering the whole primitive set."""
    rng = derive_rng(seed, "gradsuite")

    def mat(*shape):
        return ad.param(rng.uniform(-2, 2, size=shape))

    a34, b34, b41, vec4 = mat(3, 4), mat(3, 4), mat(4, 1), mat(4)
    gain, offset = mat(6), mat(6)
    ln_in = mat(5, 6)
    logits = mat(4, 3)
    targets = [0, 2, 1, 1]
    mse_a, mse_b = mat(2, 3), mat(2, 3)
    # keep relu/max inputs off their kinks
    relu_in = ad.param(rng.uniform(0.2, 2.0, size=(3, 3)) * rng.choice([-1, 1], size=(3, 3)))
    pool_in = ad.param(np.array([[1.0, -2.0], [3.1, 0.5], [-1.2, 4.0]]))
    cases = [
        ("matmul", lambda x, y: _weigh(ad.matmul(x, y)), [a34, b41]),
        ("add", lambda x, y: _weigh(ad.add(x, y)), [a34, b34]),
        ("scalar_mul", lambda x: _weigh(ad.scalar_mul(x, -1.3)), [a34]),
        ("mul", lambda x, y: _weigh(ad.mul(x, y)), [a34, b34]),
        ("relu", lambda x: _weigh(ad.relu(x)), [relu_in]),
        ("sigmoid", lambda x: _weigh(ad.sigmoid(x)), [a34]),
        ("softmax_rows", lambda x: _weigh(ad.softmax_rows(x)), [a34]),
        ("log_softmax", lambda x: _weigh(ad.log_softmax_rows(x)), [a34]),
        ("layer_norm", lambda x, g, o: _weigh(ad.layer_norm(x, g, o)), [ln_in, gain, offset]),
        (
            "dropout",
            lambda x: _weigh(ad.dropout(x, 0.35, train=True, seed=1234)),
            [a34],
        ),
        ("concat", lambda x, y: _weigh(ad.concat([x, y], axis=1)), [a34, b34]),
        ("row_mean", lambda x: _weigh(ad.row_mean(x)), [a34]),
        ("row_max_pool", lambda x: _weigh(ad.row_max_pool(x)), [pool_in]),
        (
            "embedding_lookup",
            lambda t: _weigh(ad.embedding_lookup(t, [0, 2, 2, 1])), [a34],
        ),
        ("cross_entropy", lambda lg: ad.cross_entropy(lg, targets), [logits]),
        ("mse", lambda p, t: ad.mean_squared_error(p, t), [mse_a, mse_b]),
        ("transpose", lambda x: _weigh(ad.transpose(x)), [a34]),
        ("reshape", lambda x: _weigh(ad.reshape(x, (4, 3))), [a34]),
        ("vector_matmul", lambda v, m: _weigh(ad.matmul(v, m)), [vec4, mat(4, 2)]),
    ]
    return cases


def run_primitive_checks(eps: float = 1e-5, seed: int = 0):
    results = []
    for name, builder, inputs in primitive_cases(seed):
        results.append((name, ad.grad_check(builder, inputs, eps=eps)))
    return results


def build_sift_pair_check(seed: int = 0, hidden: int = 8, emb_dim: int = 5):
    """The full sentence-pair forward graph as one grad-checkable expression."""
    rng = derive_rng(seed, "sift-pair")
    vocab = RelationVocab.from_labels(["ARG1", "ARG2"])
    g_a = SemanticGraph.build(4, [(0, 1, 0), (2, 1, 1), (3, 0, 0)])
    g_b = SemanticGraph.build(3, [(1, 0, 1), (2, 1, 0)])
    ag_a = augment_with_inverse_relations(g_a, vocab)
    ag_b = augment_with_inverse_relations(g_b, vocab)
    config = EncoderConfig(num_layers=2, hidden_dim=hidden, num_bases=2)
    enc_params = init_encoder_params(config, emb_dim, vocab.augmented_size, rng)
    att = init_pair_attention_params(hidden, rng)
    composition = [init_layer_params(config, vocab.augmented_size, rng)]
    summary_dim = 2 * emb_dim
    pooling = init_pooling_params(2 * hidden + summary_dim)
    classifier_w = ad.param(rng.uniform(-0.5, 0.5, size=(2, 2 * hidden + summary_dim)))
    classifier_b = ad.param(np.zeros(2))
    vec_a = ad.constant(rng.normal(size=(4, emb_dim)))
    vec_b = ad.constant(rng.normal(size=(3, emb_dim)))
    summary = ad.constant(rng.normal(size=summary_dim))
    align_a = np.eye(4)
    align_b = np.eye(3)

    leaves = [v for _, v in enc_params.named_values()]
    leaves += [v for _, v in att.named_values("att")]
    leaves += [v for _, v in composition[0].named_values("comp")]
    leaves += [v for _, v in pooling.named_values("pool")]
    leaves += [classifier_w, classifier_b]

    def forward(*_):
        h_a = encode(ag_a, vec_a, align_a, config, enc_params)
        h_b = encode(ag_b, vec_b, align_b, config, enc_params)
        h_a, h_b = cross_graph_update(h_a, h_b, att)
        h_a, h_b = compose_after_attention(ag_a, h_a, ag_b, h_b, composition)
        pooled = pool_pair(h_a, h_b, summary, pooling)
        row = ad.reshape(pooled, (1, pooled.shape[0]))
        logits = ad.add(ad.matmul(row, ad.transpose(classifier_w)), classifier_b)
        return ad.cross_entropy(logits, [1])

    return forward, leaves


def run_sift_pair_check(eps: float = 1e-5, seed: int = 0):
    forward, leaves = build_sift_pair_check(seed)
    return ad.grad_check(forward, leaves, eps=eps)


def run_full_suite(tol: float = 1e-5, eps: float = 1e-5, seed: int = 0):
    """(name, max_rel_error, n_checked, n_excluded, passed) rows for everything."""
    rows = []
    for name, result in run_primitive_checks(eps, seed):
        rows.append((name, result.max_rel_error, result.checked, len(result.excluded), result.passed(tol)))
    sift = run_sift_pair_check(eps, seed)
    rows.append(("sift_pair_full", sift.max_rel_error, sift.checked, len(sift.excluded), sift.passed(tol)))
    return rows
