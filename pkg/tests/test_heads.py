import numpy as np
import pytest

from semgraph import autodiff as ad
from semgraph import heads
from semgraph.graphs import SemanticGraph
from semgraph.seeding import derive_rng


def probe_cfg(target="tree"):
    return heads.ParserConfig(mode="probe", target=target)


def ceiling_cfg(target="tree", arc=8, label=6):
    return heads.ParserConfig(mode="ceiling", target=target, arc_mlp_dim=arc, label_mlp_dim=label)


def test_probe_config_forces_frozen_backbone():
    assert probe_cfg().freeze_backbone is True
    assert ceiling_cfg().freeze_backbone is False
    with pytest.raises(ValueError):
        heads.ParserConfig(mode="probe", freeze_backbone=False)


def test_probe_zero_weights_scores_equal_bias():
    cfg = probe_cfg(target="graph")
    rng = derive_rng(0, "t")
    params = heads.init_parser_params(cfg, 4, 3, rng)
    params.arc.u_bilinear = ad.constant(np.zeros((4, 4)))
    params.arc.u_linear = ad.constant(np.zeros(8))
    params.arc.bias = ad.constant(1.25)
    states = ad.constant(rng.normal(size=(3, 4)))
    sc = heads.score(states, cfg, params)
    assert np.allclose(sc.arc_scores.data, 1.25)


def test_ceiling_tree_score_shape_includes_root():
    cfg = ceiling_cfg()
    params = heads.init_parser_params(cfg, 5, 2, derive_rng(1, "t"))
    sc = heads.score(ad.constant(np.random.default_rng(2).normal(size=(2, 5))), cfg, params)
    assert sc.arc_scores.shape == (3, 3)
    assert sc.label_scores().shape == (3, 3, 2)


def test_ceiling_score_matches_staged_mlp_biaffine_oracle():
    rng = derive_rng(3, "t")
    cfg = ceiling_cfg(target="graph", arc=6, label=4)
    params = heads.init_parser_params(cfg, 5, 3, rng)
    states = np.random.default_rng(4).normal(size=(4, 5))
    sc = heads.score(ad.constant(states), cfg, params)

    def mlp(p, x):
        return np.maximum(x @ p.weight.data.T + p.bias.data, 0.0)

    src = mlp(params.arc_source_mlp, states)
    tgt = mlp(params.arc_target_mlp, states)
    U, u, b = params.arc.u_bilinear.data, params.arc.u_linear.data, params.arc.bias.data
    d = src.shape[1]
    for i in range(4):
        for j in range(4):
            expect = src[i] @ U @ tgt[j] + u[:d] @ src[i] + u[d:] @ tgt[j] + b
            assert abs(sc.arc_scores.data[i, j] - expect) < 1e-10


def test_label_logits_match_full_tensor():
    rng = derive_rng(5, "t")
    cfg = probe_cfg(target="graph")
    params = heads.init_parser_params(cfg, 4, 3, rng)
    states = ad.constant(np.random.default_rng(6).normal(size=(3, 4)))
    sc = heads.score(states, cfg, params)
    full = sc.label_scores()
    pairs = [(0, 1), (2, 0), (1, 1)]
    logits = sc.label_logits(pairs)
    for row, (s, t) in enumerate(pairs):
        assert np.max(np.abs(logits.data[row] - full[s, t])) < 1e-12


def test_tree_loss_uniform_scores_is_log_k():
    # all-equal arc scores: per-dependent softmax over n valid heads -> ln n
    cfg = probe_cfg()
    n, d = 3, 4
    rng = derive_rng(7, "t")
    params = heads.init_parser_params(cfg, d, 1, rng)
    params.arc.u_bilinear = ad.constant(np.zeros((d, d)))
    params.arc.u_linear = ad.constant(np.zeros(2 * d))
    params.arc.bias = ad.constant(0.0)
    params.labels.u_bilinear = [ad.constant(np.zeros((d, d)))]
    params.labels.u_linear = ad.constant(np.zeros((1, 2 * d)))
    params.labels.bias = ad.constant(np.zeros(1))
    states = ad.constant(np.random.default_rng(8).normal(size=(n, d)))
    sc = heads.score(states, cfg, params)
    gold = SemanticGraph.build(n + 1, [(0, 1, 0), (1, 2, 0), (2, 3, 0)])
    loss = heads.parsing_loss(sc, gold, cfg)
    # n candidates per dependent (root + n tokens minus self); labels: 1 class -> 0
    assert abs(loss.item() - np.log(n)) < 1e-9


def test_loss_decreases_to_zero_with_perfect_margin():
    cfg = probe_cfg(target="graph")
    n = 3
    gold = SemanticGraph.build(n, [(0, 1, 0), (2, 1, 1)])
    gold_set = {(s, t) for s, t, _ in gold.edges}
    losses = []
    for margin in (1.0, 5.0, 25.0):
        arc = np.full((n, n), -margin)
        for s, t in gold_set:
            arc[s, t] = margin
        labels = np.zeros((n, n, 2))
        for s, t, r in gold.edges:
            labels[s, t, r] = margin
        sc = _manual_scores(arc, labels)
        losses.append(heads.parsing_loss(sc, gold, cfg).item())
    assert losses[0] > losses[1] > losses[2]
    assert losses[2] < 1e-8


def _manual_scores(arc: np.ndarray, label_tensor: np.ndarray) -> heads.ParseScores:
    """Build ParseScores whose label logits reproduce a given tensor exactly."""
    n, _, L = label_tensor.shape
    src = ad.constant(np.eye(n))
    tgt = ad.constant(np.eye(n))
    u_bilinear = [ad.constant(label_tensor[:, :, l]) for l in range(L)]
    labels = heads.LabelBiaffineParams(
        u_bilinear=u_bilinear,
        u_linear=ad.constant(np.zeros((L, 2 * n))),
        bias=ad.constant(np.zeros(L)),
    )
    return heads.ParseScores(
        arc_scores=ad.constant(arc),
        num_tokens=n,
        target="graph",
        _label_source=src,
        _label_target=tgt,
        _labels=labels,
    )


def test_graph_loss_matches_hand_summed_cross_entropies():
    rng = np.random.default_rng(9)
    n, L = 3, 2
    arc = rng.normal(size=(n, n))
    label_tensor = rng.normal(size=(n, n, L))
    gold = SemanticGraph.build(n, [(0, 2, 1), (1, 0, 0)])
    sc = _manual_scores(arc, label_tensor)
    loss = heads.parsing_loss(sc, gold, probe_cfg(target="graph"))

    def bce(s, y):
        # binary CE with logit s against label y, via the 2-class softmax
        return -np.log(np.exp(s * y) / (1.0 + np.exp(s)))

    gold_set = {(s, t) for s, t, _ in gold.edges}
    arc_terms = [
        bce(arc[i, j], 1.0 if (i, j) in gold_set else 0.0)
        for i in range(n)
        for j in range(n)
    ]
    label_terms = []
    for s, t, r in sorted(gold.edges):
        logits = label_tensor[s, t]
        label_terms.append(-(logits[r] - np.log(np.exp(logits).sum())))
    expect = np.mean(arc_terms) + np.mean(label_terms)
    assert abs(loss.item() - expect) < 1e-10


def test_gold_arc_out_of_range_errors():
    cfg = probe_cfg()
    params = heads.init_parser_params(cfg, 3, 1, derive_rng(10, "t"))
    sc = heads.score(ad.constant(np.zeros((2, 3))), cfg, params)
    bad = SemanticGraph.build(5, [(0, 4, 0)])
    with pytest.raises(ValueError):
        heads.parsing_loss(sc, bad, cfg)


def test_probe_gradients_never_reach_frozen_states():
    cfg = probe_cfg(target="graph")
    rng = derive_rng(11, "t")
    params = heads.init_parser_params(cfg, 4, 2, rng)
    frozen = ad.constant(np.random.default_rng(12).normal(size=(3, 4)))
    sc = heads.score(frozen, cfg, params)
    gold = SemanticGraph.build(3, [(0, 1, 0)])
    loss = heads.parsing_loss(sc, gold, cfg)
    ad.backward(loss)
    assert frozen.grad is None
    assert params.arc.u_bilinear.grad is not None


def test_loss_nonnegative_random():
    rng = np.random.default_rng(13)
    cfg = probe_cfg(target="graph")
    params = heads.init_parser_params(cfg, 4, 2, derive_rng(14, "t"))
    for _ in range(20):
        n = int(rng.integers(1, 5))
        states = ad.constant(rng.normal(size=(n, 4)))
        sc = heads.score(states, cfg, params)
        edges = []
        if n > 1:
            edges = [(0, 1, int(rng.integers(0, 2)))]
        loss = heads.parsing_loss(sc, SemanticGraph.build(n, edges), cfg)
        assert loss.item() >= 0


def test_head_gradients_pass_grad_check():
    cfg = ceiling_cfg(target="tree", arc=5, label=4)
    rng = derive_rng(15, "t")
    params = heads.init_parser_params(cfg, 3, 2, rng)
    states = ad.param(np.random.default_rng(16).normal(size=(2, 3)))
    gold = SemanticGraph.build(3, [(0, 1, 0), (1, 2, 1)])
    leaves = [states] + [v for _, v in params.named_values()]

    def f(*_):
        sc = heads.score(states, cfg, params)
        return heads.parsing_loss(sc, gold, cfg)

    res = ad.grad_check(f, leaves)
    assert res.passed(1e-5), res.max_rel_error
