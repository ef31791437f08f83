import numpy as np
import pytest

from semgraph import autodiff as ad
from semgraph import encoder as enc
from semgraph import pair
from semgraph.graphs import RelationVocab, SemanticGraph, augment_with_inverse_relations


def make_params(hidden, seed=0, zero=False):
    rng = np.random.default_rng(seed)
    if zero:
        return pair.PairAttentionParams(
            u_bilinear=ad.constant(np.zeros((hidden, hidden))),
            u_linear=ad.constant(np.zeros(2 * hidden)),
            bias=ad.constant(3.0),
            w_compare=ad.constant(np.zeros((hidden, 4 * hidden))),
        )
    return pair.PairAttentionParams(
        u_bilinear=ad.constant(rng.normal(size=(hidden, hidden))),
        u_linear=ad.constant(rng.normal(size=2 * hidden)),
        bias=ad.constant(rng.normal()),
        w_compare=ad.constant(rng.normal(size=(hidden, 4 * hidden))),
    )


def biaffine_oracle(ha, hb, U, u, bias):
    out = np.zeros((ha.shape[0], hb.shape[0]))
    for i in range(ha.shape[0]):
        for j in range(hb.shape[0]):
            out[i, j] = ha[i] @ U @ hb[j] + u @ np.concatenate([ha[i], hb[j]]) + bias
    return out


def test_biaffine_constant_bias():
    p = make_params(4, zero=True)
    out = pair.biaffine_attention(
        ad.constant(np.ones((2, 4))), ad.constant(np.ones((3, 4))), p
    )
    assert np.array_equal(out.data, np.full((2, 3), 3.0))


def test_biaffine_identity_dot_product():
    hidden = 3
    p = pair.PairAttentionParams(
        u_bilinear=ad.constant(np.eye(hidden)),
        u_linear=ad.constant(np.zeros(2 * hidden)),
        bias=ad.constant(0.0),
        w_compare=ad.constant(np.zeros((hidden, 4 * hidden))),
    )
    basis = np.eye(hidden)
    out = pair.biaffine_attention(ad.constant(basis), ad.constant(basis), p)
    assert np.array_equal(out.data, np.eye(hidden))


def test_biaffine_matches_double_loop_oracle():
    rng = np.random.default_rng(1)
    ha, hb = rng.normal(size=(2, 5)), rng.normal(size=(3, 5))
    p = make_params(5, seed=2)
    out = pair.biaffine_attention(ad.constant(ha), ad.constant(hb), p)
    expect = biaffine_oracle(ha, hb, p.u_bilinear.data, p.u_linear.data, p.bias.data)
    assert np.max(np.abs(out.data - expect)) < 1e-12


def test_biaffine_dim_mismatch():
    p = make_params(4)
    with pytest.raises(ad.ShapeError):
        pair.biaffine_attention(ad.constant(np.ones((2, 4))), ad.constant(np.ones((2, 3))), p)


def test_cross_update_singleton_other_graph():
    rng = np.random.default_rng(3)
    ha, hb = rng.normal(size=(3, 4)), rng.normal(size=(1, 4))
    p = make_params(4, seed=4)
    out_a, _ = pair.cross_graph_update(ad.constant(ha), ad.constant(hb), p)
    # with |b| = 1 the attended vector is b's single node regardless of scores
    for i in range(3):
        stacked = np.concatenate([ha[i], hb[0], ha[i] - hb[0], ha[i] * hb[0]])
        expect = np.maximum(p.w_compare.data @ stacked, 0)
        assert np.max(np.abs(out_a.data[i] - expect)) < 1e-12


def test_cross_update_self_comparison_blocks():
    # identical single-node graphs: h~ = h, so the diff block is exactly zero
    h = np.array([[0.7, -0.3]])
    p = make_params(2, seed=5)
    out_a, out_b = pair.cross_graph_update(ad.constant(h), ad.constant(h), p)
    stacked = np.concatenate([h[0], h[0], np.zeros(2), h[0] * h[0]])
    expect = np.maximum(p.w_compare.data @ stacked, 0)
    assert np.max(np.abs(out_a.data[0] - expect)) < 1e-12
    assert np.array_equal(out_a.data, out_b.data)


def test_cross_update_matches_staged_oracle():
    rng = np.random.default_rng(6)
    ha, hb = rng.normal(size=(3, 4)), rng.normal(size=(2, 4))
    p = make_params(4, seed=7)
    out_a, out_b = pair.cross_graph_update(ad.constant(ha), ad.constant(hb), p)
    alpha = biaffine_oracle(ha, hb, p.u_bilinear.data, p.u_linear.data, p.bias.data)

    def staged(h_own, h_other, scores):
        e = np.exp(scores - scores.max(axis=1, keepdims=True))
        att = (e / e.sum(axis=1, keepdims=True)) @ h_other
        rows = []
        for i in range(h_own.shape[0]):
            stacked = np.concatenate(
                [h_own[i], att[i], h_own[i] - att[i], h_own[i] * att[i]]
            )
            rows.append(np.maximum(p.w_compare.data @ stacked, 0))
        return np.stack(rows)

    assert np.max(np.abs(out_a.data - staged(ha, hb, alpha))) < 1e-12
    assert np.max(np.abs(out_b.data - staged(hb, ha, alpha.T))) < 1e-12


def test_cross_update_empty_graph_errors():
    p = make_params(3)
    with pytest.raises(ad.ShapeError):
        pair.cross_graph_update(ad.constant(np.zeros((0, 3))), ad.constant(np.ones((2, 3))), p)


def test_alpha_softmax_rows_sum_to_one():
    rng = np.random.default_rng(8)
    p = make_params(4, seed=9)
    alpha = pair.biaffine_attention(
        ad.constant(rng.normal(size=(5, 4))), ad.constant(rng.normal(size=(6, 4))), p
    )
    soft = ad.softmax_rows(alpha)
    assert np.all(np.abs(soft.data.sum(axis=1) - 1.0) < 1e-12)


# -- composition layers -------------------------------------------------------


def augmented(n, edges, n_rel=2):
    g = SemanticGraph.build(n, edges)
    return augment_with_inverse_relations(
        g, RelationVocab.from_labels([f"r{i}" for i in range(n_rel)])
    )


def test_compose_zero_layers_is_identity():
    rng = np.random.default_rng(10)
    ha, hb = rng.normal(size=(2, 3)), rng.normal(size=(3, 3))
    ag_a, ag_b = augmented(2, [(0, 1, 0)]), augmented(3, [(1, 2, 1)])
    out_a, out_b = pair.compose_after_attention(ag_a, ad.constant(ha), ag_b, ad.constant(hb), [])
    assert np.array_equal(out_a.data, ha) and np.array_equal(out_b.data, hb)


def test_compose_matches_sequential_layer_oracle():
    rng = np.random.default_rng(11)
    config = enc.EncoderConfig(num_layers=2, hidden_dim=4, num_bases=2)
    ag_a, ag_b = augmented(3, [(0, 1, 0), (2, 1, 1)]), augmented(2, [(1, 0, 0)])
    layers = [enc.init_layer_params(config, ag_a.num_relations, rng) for _ in range(2)]
    ha, hb = ad.constant(rng.normal(size=(3, 4))), ad.constant(rng.normal(size=(2, 4)))
    out_a, out_b = pair.compose_after_attention(ag_a, ha, ag_b, hb, layers)
    ma, mb = ha, hb
    for layer in layers:
        ma = enc.rgcn_layer(ag_a, ma, layer)
        mb = enc.rgcn_layer(ag_b, mb, layer)
    assert np.array_equal(out_a.data, ma.data)
    assert np.array_equal(out_b.data, mb.data)


# -- pooling -------------------------------------------------------------------


def pooling_params(dim):
    rng = np.random.default_rng(12)
    return pair.PoolingParams(
        gain=ad.constant(rng.normal(size=dim)), offset=ad.constant(rng.normal(size=dim))
    )


def layer_norm_oracle(x, gain, offset, eps=1e-5):
    mu, var = x.mean(), x.var()
    return gain * (x - mu) / np.sqrt(var + eps) + offset


def test_pool_single_one_node():
    h = np.array([[1.0, -2.0, 3.0]])
    summary = np.array([0.5, 0.5])
    p = pooling_params(5)
    out = pair.pool_single(ad.constant(h), summary, p)
    expect = layer_norm_oracle(np.concatenate([h[0], summary]), p.gain.data, p.offset.data)
    assert np.max(np.abs(out.data - expect)) < 1e-12


def test_pool_single_node_order_invariant():
    rng = np.random.default_rng(13)
    h = rng.normal(size=(5, 3))
    summary = rng.normal(size=2)
    p = pooling_params(5)
    a = pair.pool_single(ad.constant(h), summary, p)
    b = pair.pool_single(ad.constant(h[::-1].copy()), summary, p)
    assert np.max(np.abs(a.data - b.data)) < 1e-12


def test_pool_single_staged_oracle_and_no_summary():
    rng = np.random.default_rng(14)
    h = rng.normal(size=(4, 3))
    summary = rng.normal(size=3)
    p6 = pooling_params(6)
    out = pair.pool_single(ad.constant(h), summary, p6)
    expect = layer_norm_oracle(
        np.concatenate([h.max(axis=0), summary]), p6.gain.data, p6.offset.data
    )
    assert np.max(np.abs(out.data - expect)) < 1e-12
    p3 = pooling_params(3)
    bare = pair.pool_single(ad.constant(h), None, p3)
    assert np.max(
        np.abs(bare.data - layer_norm_oracle(h.max(axis=0), p3.gain.data, p3.offset.data))
    ) < 1e-12


def test_pool_zero_node_graph_errors():
    p = pooling_params(3)
    with pytest.raises(ad.ShapeError):
        pair.pool_single(ad.constant(np.zeros((0, 3))), None, p)
    with pytest.raises(ad.ShapeError):
        pair.pool_pair(ad.constant(np.zeros((0, 3))), ad.constant(np.ones((1, 3))), None, p)


def test_pool_pair_identical_graphs_and_swap():
    rng = np.random.default_rng(15)
    h = rng.normal(size=(3, 2))
    other = rng.normal(size=(2, 2))
    summary = rng.normal(size=2)
    p = pooling_params(6)
    same = pair.pool_pair(ad.constant(h), ad.constant(h), summary, p)
    pooled = h.max(axis=0)
    stacked = np.concatenate([pooled, pooled, summary])
    assert np.max(np.abs(same.data - layer_norm_oracle(stacked, p.gain.data, p.offset.data))) < 1e-12
    ab = pair.pool_pair(ad.constant(h), ad.constant(other), summary, p)
    ba = pair.pool_pair(ad.constant(other), ad.constant(h), summary, p)
    raw_ab = np.concatenate([h.max(axis=0), other.max(axis=0), summary])
    raw_ba = np.concatenate([other.max(axis=0), h.max(axis=0), summary])
    assert np.max(np.abs(ab.data - layer_norm_oracle(raw_ab, p.gain.data, p.offset.data))) < 1e-12
    assert np.max(np.abs(ba.data - layer_norm_oracle(raw_ba, p.gain.data, p.offset.data))) < 1e-12


def test_cross_update_permutation_equivariance():
    rng = np.random.default_rng(16)
    ha, hb = rng.normal(size=(4, 3)), rng.normal(size=(3, 3))
    p = make_params(3, seed=17)
    out_a, out_b = pair.cross_graph_update(ad.constant(ha), ad.constant(hb), p)
    perm = rng.permutation(4)
    out_a_p, out_b_p = pair.cross_graph_update(ad.constant(ha[perm]), ad.constant(hb), p)
    assert np.max(np.abs(out_a_p.data - out_a.data[perm])) < 1e-12
    assert np.max(np.abs(out_b_p.data - out_b.data)) < 1e-12


def test_full_pair_pipeline_grad_check():
    rng = np.random.default_rng(18)
    hidden = 4
    ag_a, ag_b = augmented(3, [(0, 1, 0), (2, 0, 1)]), augmented(2, [(0, 1, 1)])
    att = pair.init_pair_attention_params(hidden, rng)
    config = enc.EncoderConfig(num_layers=1, hidden_dim=hidden, num_bases=2)
    comp = [enc.init_layer_params(config, ag_a.num_relations, rng)]
    pool = pair.init_pooling_params(2 * hidden + 3)
    ha = ad.param(rng.normal(size=(3, hidden)))
    hb = ad.param(rng.normal(size=(2, hidden)))
    summary = ad.constant(rng.normal(size=3))
    leaves = [ha, hb]
    leaves += [v for _, v in att.named_values("att")]
    leaves += [v for _, v in comp[0].named_values("comp")]
    leaves += [v for _, v in pool.named_values("pool")]
    probe = ad.constant(np.linspace(-1, 1, 2 * hidden + 3))

    def f(*_):
        ua, ub = pair.cross_graph_update(ha, hb, att)
        ca, cb = pair.compose_after_attention(ag_a, ua, ag_b, ub, comp)
        pooled = pair.pool_pair(ca, cb, summary, pool)
        return ad.matmul(pooled, probe)

    res = ad.grad_check(f, leaves)
    assert res.passed(1e-5), res.max_rel_error
