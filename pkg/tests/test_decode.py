import itertools

import numpy as np
import pytest

from semgraph import decode
from semgraph.graphs import SemanticGraph


# -- brute-force arborescence oracle ------------------------------------------


def all_arborescences(n_tokens):
    """Every valid head assignment over tokens 1..n with root 0."""
    choices = [[h for h in range(n_tokens + 1) if h != d] for d in range(1, n_tokens + 1)]
    for combo in itertools.product(*choices):
        heads = dict(enumerate(combo, start=1))
        ok = True
        for start in heads:
            node, chain = start, set()
            while node != 0:
                if node in chain:
                    ok = False
                    break
                chain.add(node)
                node = heads[node]
            if not ok:
                break
        if ok:
            yield combo


def brute_force_best(scores):
    n = scores.shape[0] - 1
    best, best_total = None, -np.inf
    for combo in all_arborescences(n):
        total = sum(scores[h, d] for d, h in enumerate(combo, start=1))
        if total > best_total:
            best, best_total = combo, total
    return best, best_total


def test_single_token_heads_root():
    tree = decode.chu_liu_edmonds(np.zeros((2, 2)))
    assert tree.heads == (0,)


def test_dominant_root_star():
    n = 4
    scores = np.full((n + 1, n + 1), -5.0)
    scores[0, 1:] = 10.0
    tree = decode.chu_liu_edmonds(scores)
    assert tree.heads == (0, 0, 0, 0)


def test_simple_cycle_broken_correctly():
    # tokens 1 and 2 prefer each other; the best arborescence must enter the pair
    scores = np.array(
        [
            [0.0, 1.0, 2.0],
            [0.0, 0.0, 9.0],
            [0.0, 9.0, 0.0],
        ]
    )
    tree = decode.chu_liu_edmonds(scores)
    _, best_total = brute_force_best(scores)
    assert decode.tree_score(scores, tree) == pytest.approx(best_total)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_cle_matches_brute_force_real_scores(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(40):
        scores = rng.normal(size=(n + 1, n + 1))
        tree = decode.chu_liu_edmonds(scores)
        _, best_total = brute_force_best(scores)
        assert abs(decode.tree_score(scores, tree) - best_total) < 1e-9


@pytest.mark.parametrize("n", [2, 3, 4])
def test_cle_matches_brute_force_integer_scores(n):
    rng = np.random.default_rng(200 + n)
    for _ in range(40):
        scores = rng.integers(-10, 10, size=(n + 1, n + 1)).astype(float)
        tree = decode.chu_liu_edmonds(scores)
        _, best_total = brute_force_best(scores)
        assert decode.tree_score(scores, tree) == best_total


def test_cle_output_always_valid_tree():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 7))
        scores = rng.normal(size=(n + 1, n + 1)) * 10
        tree = decode.chu_liu_edmonds(scores)  # DecodedTree validates itself
        assert tree.num_tokens == n


def test_cle_score_shift_invariance():
    rng = np.random.default_rng(8)
    scores = rng.normal(size=(5, 5))
    base = decode.chu_liu_edmonds(scores)
    shifted = decode.chu_liu_edmonds(scores + 17.5)
    assert base.heads == shifted.heads


def test_cle_tie_break_lower_source():
    # two equal-score head candidates for token 2: source 0 must win
    scores = np.zeros((3, 3))
    scores[0, 1] = 5.0
    scores[0, 2] = 3.0
    scores[1, 2] = 3.0
    tree = decode.chu_liu_edmonds(scores)
    assert tree.heads == (0, 0)


def test_cle_rejects_degenerate_inputs():
    with pytest.raises(decode.DecodeError):
        decode.chu_liu_edmonds(np.zeros((1, 1)))
    with pytest.raises(decode.DecodeError):
        decode.chu_liu_edmonds(np.full((3, 3), np.inf))
    with pytest.raises(decode.DecodeError):
        decode.chu_liu_edmonds(np.zeros((2, 3)))


def test_decoded_tree_validates_invariants():
    with pytest.raises(decode.DecodeError):
        decode.DecodedTree(heads=(2, 1), labels=(0, 0))  # 1->2->1 cycle
    with pytest.raises(decode.DecodeError):
        decode.DecodedTree(heads=(1,), labels=(0,))  # self-head
    with pytest.raises(decode.DecodeError):
        decode.DecodedTree(heads=(5,), labels=(0,))  # out of range


# -- label assignment -----------------------------------------------------------


def test_assign_labels_single_label_everywhere():
    tree = decode.DecodedTree(heads=(0, 1), labels=(0, 0))
    label_scores = np.zeros((3, 3, 1))
    labeled = decode.assign_labels(tree, label_scores)
    assert labeled.labels == (0, 0)


def test_assign_labels_tie_break_lowest_index():
    tree = decode.DecodedTree(heads=(0,), labels=(0,))
    label_scores = np.zeros((2, 2, 4))
    label_scores[0, 1] = [1.0, 1.0, 1.0, 1.0]
    assert decode.assign_labels(tree, label_scores).labels == (0,)


def test_assign_labels_matches_argmax_oracle():
    rng = np.random.default_rng(9)
    tree = decode.DecodedTree(heads=(0, 1, 1), labels=(0, 0, 0))
    label_scores = rng.normal(size=(4, 4, 5))
    labeled = decode.assign_labels(tree, label_scores)
    for d, h in enumerate(tree.heads, start=1):
        assert labeled.labels[d - 1] == int(np.argmax(label_scores[h, d]))


# -- greedy graph decoding -------------------------------------------------------


def test_greedy_all_negative_is_edgeless():
    g = decode.greedy_graph_decode(-np.ones((4, 4)), np.zeros((4, 4, 2)))
    assert g.edges == ()


def test_greedy_single_positive_cell():
    arc = -np.ones((3, 3))
    arc[1, 2] = 0.5
    labels = np.zeros((3, 3, 3))
    labels[1, 2] = [0.1, 0.9, 0.2]
    g = decode.greedy_graph_decode(arc, labels)
    assert g.edges == ((1, 2, 1),)


def test_greedy_matches_per_cell_oracle():
    rng = np.random.default_rng(10)
    arc = rng.normal(size=(5, 5))
    labels = rng.normal(size=(5, 5, 3))
    g = decode.greedy_graph_decode(arc, labels)
    expect = {
        (i, j, int(np.argmax(labels[i, j])))
        for i in range(5)
        for j in range(5)
        if arc[i, j] > 0
    }
    assert set(g.edges) == expect
    assert isinstance(g, SemanticGraph)


def test_greedy_monotone_in_single_cell():
    rng = np.random.default_rng(11)
    arc = rng.normal(size=(4, 4))
    labels = rng.normal(size=(4, 4, 2))
    base = set((s, t) for s, t, _ in decode.greedy_graph_decode(arc, labels).edges)
    arc2 = arc.copy()
    arc2[0, 3] = 100.0
    bigger = set((s, t) for s, t, _ in decode.greedy_graph_decode(arc2, labels).edges)
    assert base - {(0, 3)} <= bigger and (0, 3) in bigger


def test_greedy_threshold_parameter():
    arc = np.array([[0.2]])
    labels = np.zeros((1, 1, 1))
    assert decode.greedy_graph_decode(arc, labels, threshold=0.5).edges == ()
    assert decode.greedy_graph_decode(arc, labels, threshold=0.1).edges == ((0, 0, 0),)
