import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcfgcm import parser
from pcfgcm.contacts import ContactMap, predict_contacts
from pcfgcm.dataio import Dataset, cut_negative_records
from pcfgcm.evaluation import (
    EvaluationError, FoldPlan, NullModel, ScoredItem, average_precision, cross_validate,
    default_null, descriptive_metrics, evaluate_grammar, format_rpc_csv, rpc_points, score,
    score_many,
)
from pcfgcm.grammar import Alphabet
from pcfgcm.learner import LearnerConfig
from pcfgcm.synthetic import sample_background, sample_constrained
from pcfgcm.trees import parse_bracket

M = ContactMap(4, {(1, 4)})
AB = Alphabet(("a", "b"))


def test_score_example(g1):
    null = NullModel.uniform(AB)
    assert score("ab", None, g1, null) == pytest.approx(math.log(0.672), abs=1e-12)


def test_score_grammar_without_contacts(g2_bar):
    assert score("abba", M, g2_bar, NullModel.uniform(AB)) == -math.inf


def test_score_against_marginal_is_finite(g2):
    null = NullModel.from_sequences(AB, ["abba", "aab"])
    assert math.isfinite(score("abba", None, g2, null))


def test_score_many_matches_score(g2):
    null = NullModel.from_weights(AB, [3, 1])
    seqs = ["abba", "abab", "aaaa"]
    assert score_many(seqs, g2, null, M) == pytest.approx([score(x, M, g2, null) for x in seqs], rel=1e-12)
    mixed = ["ab", "abba", "bab"]
    assert score_many(mixed, g2, null) == pytest.approx([score(x, None, g2, null) for x in mixed], rel=1e-12)


def test_null_model_validation(tmp_path):
    with pytest.raises(ValueError):
        NullModel.from_weights(AB, [1, 0])
    null = NullModel.from_weights(AB, [1, 3])
    assert sum(null.freqs) == pytest.approx(1.0, abs=1e-12)
    path = tmp_path / "null.txt"
    path.write_text(null.dumps())
    assert NullModel.load(path, AB).freqs == pytest.approx(null.freqs)


def test_default_null():
    assert default_null(AB, environ={}) == NullModel.uniform(AB)
    protein = default_null(Alphabet.protein(), environ={})
    assert sum(protein.freqs) == pytest.approx(1.0, abs=1e-9)
    assert min(protein.freqs) > 0


def test_default_null_from_env(tmp_path):
    path = tmp_path / "null.txt"
    path.write_text(NullModel.from_weights(AB, [1, 3]).dumps())
    assert default_null(AB, environ={"PCFGCM_NULL": str(path)}).freqs == pytest.approx([0.25, 0.75])


# -- average precision -------------------------------------------------------

def test_ap_hand_fixture():
    assert average_precision([(True, 0.9), (False, 0.8), (True, 0.7)]) == pytest.approx(0.8333333333, abs=1e-9)


def test_ap_perfect_and_interleaved():
    assert average_precision([(True, 3), (True, 2), (False, 1), (False, 0)]) == 1.0
    # one negative above each positive: precisions 1/2 and 2/4
    assert average_precision([(False, 0.9), (True, 0.8), (False, 0.7), (True, 0.6)]) == pytest.approx(0.5)


def test_ap_pessimistic_ties():
    assert average_precision([(True, 1.0), (False, 1.0)]) == pytest.approx(0.5)
    assert average_precision([(True, 1.0), (False, 1.0), (True, 2.0)]) == pytest.approx((1 + 2 / 3) / 2)


def test_ap_minus_infinity_ranks_last():
    items = [ScoredItem("p", True, -math.inf), ScoredItem("n", False, -3.0)]
    assert average_precision(items) == pytest.approx(0.5)


def test_ap_degenerate():
    with pytest.raises(EvaluationError):
        average_precision([(True, 1.0)])
    with pytest.raises(EvaluationError):
        average_precision([(False, 1.0), (False, 0.0)])


labelled = st.lists(st.tuples(st.booleans(), st.integers(-50, 50).map(float)), min_size=2, max_size=30).filter(
    lambda xs: 0 < sum(l for l, _ in xs) < len(xs))


@settings(max_examples=100, deadline=None)
@given(labelled, st.integers(-100, 100).map(float))
def test_ap_invariances(items, shift):
    ap = average_precision(items)
    assert 0.0 <= ap <= 1.0
    assert average_precision([(l, math.exp(s / 10.0) * 3 + 1) for l, s in items]) == pytest.approx(ap, abs=1e-12)
    assert average_precision([(l, s + shift) for l, s in items]) == pytest.approx(ap, abs=1e-12)
    perfect = [(l, 1.0 if l else 0.0) for l, _ in items]
    assert average_precision(perfect) == 1.0
    assert average_precision([(l, -s) for l, s in perfect]) <= 1.0


def test_rpc_points():
    points = rpc_points([(True, 0.9), (False, 0.8), (True, 0.7)])
    assert points == [(0.5, 1.0), (0.5, 0.5), (1.0, 2 / 3)]
    assert format_rpc_csv(points).splitlines()[0] == "recall,precision"


# -- contact prediction ------------------------------------------------------

CONTACT_TREE = "(S (T a) (S (T b) (T b)) (T a))"
BRANCH_TREE = "(S (S (S (T a) (T b)) (T b)) (T a))"


def test_predict_contacts_examples():
    assert predict_contacts(parse_bracket(CONTACT_TREE)) == {(1, 4)}
    assert predict_contacts(parse_bracket(BRANCH_TREE)) == set()
    assert predict_contacts(parse_bracket(BRANCH_TREE), math.inf) == {(1, 4)}
    tree6 = parse_bracket("(S (T a) (S (S (S (T b) (T a)) (T b)) (T a)) (T b))")
    assert predict_contacts(tree6, math.inf) == {(i, j) for i in range(1, 7) for j in range(i + 3, 7)}


def test_predict_contacts_monotone_in_delta(g2):
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = "".join(rng.choice(list("ab"), size=9))
        tree, _ = parser.viterbi(x, g2)
        prev = set()
        for delta in range(2, 14):
            cur = predict_contacts(tree, delta)
            assert prev <= cur
            prev = cur


# -- descriptive metrics -----------------------------------------------------

TREE6 = "(S (T a) (S (S (S (T b) (T a)) (T b)) (T a)) (T b))"


def _distance_oracle(tree):
    graph = nx.Graph()
    leaves = []

    def add(node):
        for child in node.children:
            graph.add_edge(id(node), id(child))
            add(child)
        if node.is_leaf:
            leaves.append(id(node))

    add(tree)
    return lambda i, j: nx.shortest_path_length(graph, leaves[i - 1], leaves[j - 1])


def test_descriptive_hand_fixture():
    tree = parse_bracket(TREE6)
    dist = _distance_oracle(tree)
    full = ContactMap(6, {(1, 6), (1, 4), (2, 5)})
    assert [dist(*p) for p in [(1, 6), (1, 4), (2, 5)]] == [4, 6, 6]
    assert [dist(*p) for p in [(1, 5), (2, 6), (3, 6)]] == [5, 7, 7]
    report = descriptive_metrics([tree], ContactMap(6, {(1, 6)}), full)
    assert report["recall_at_4"] == 1.0
    assert report["precision_at_4"] == 1.0
    # ranking by -distance: + (4), - (5), + + (6), - - (7)
    assert report["ap_over_delta"] == pytest.approx((1 + 2 / 3 + 3 / 4) / 3, abs=1e-12)


def test_descriptive_empty_predictions():
    trees = [parse_bracket(BRANCH_TREE), parse_bracket(CONTACT_TREE), None]
    report = descriptive_metrics(trees, M, M)
    assert report["recall_at_4"] == pytest.approx(1 / 3)
    assert report["precision_at_4"] == 1.0
    assert report["empty_predictions"] == 2


def test_descriptive_needs_maps():
    with pytest.raises(EvaluationError):
        descriptive_metrics([parse_bracket(CONTACT_TREE)], ContactMap.empty(4), M)
    with pytest.raises(EvaluationError):
        descriptive_metrics([parse_bracket(CONTACT_TREE)], M, None)


def test_evaluate_grammar(g2):
    null = NullModel.uniform(AB)
    pos = [("p1", "abba"), ("p2", "baab")]
    neg = [("n1", "aaaa"), ("n2", "bbbb")]
    report, items = evaluate_grammar(g2, pos, neg, null, M, training_map=M, full_map=M)
    assert report["ap"] == average_precision(items)
    assert report["positives"] == 2 and report["negatives"] == 2
    assert report["recall_at_4"] == 1.0


# -- cross-validation ---------------------------------------------------------

def test_fold_plan_arithmetic():
    plan = FoldPlan.make(9, 6, 3, seed=1)
    tests = []
    for r in range(3):
        train, val, test = plan.round(r)
        assert len(train) == 1 and len({*train, val, test}) == 3
        for f in (*train, val, test):
            assert len(plan.members(f)) == 3
        assert not set(plan.members(test)) & set(plan.members(train))
        tests.extend(plan.members(test))
    assert sorted(tests) == list(range(9))
    assert FoldPlan.make(9, 6, 3, seed=1) == plan
    assert FoldPlan.make(9, 6, 3, seed=2) != plan


def test_fold_plan_errors():
    with pytest.raises(EvaluationError):
        FoldPlan.make(9, 3, 2, seed=0)
    with pytest.raises(EvaluationError):
        FoldPlan.make(2, 3, 3, seed=0)


def test_cross_validate_smoke(g2):
    rng = np.random.default_rng(5)
    pos = [(f"p{k}", x) for k, (x, _) in enumerate(sample_constrained(g2, M, 9, rng))]
    long = [(f"bg{k}", s) for k, s in enumerate(sample_background(12, NullModel.uniform(AB), 3, rng))]
    data = Dataset(AB, pos, cut_negative_records(long, 4), shared_map=M)
    config = LearnerConfig(population_size=6, generations=6, checkpoint_every=3, seed=9)
    report = cross_validate(data, g2, config, 3, NullModel.uniform(AB), use_map_scoring=True)
    assert len(report["rounds"]) == 3
    aps = [r["ap"] for r in report["rounds"]]
    assert report["aggregate"]["ap"] == pytest.approx(np.mean(aps))
    assert report["aggregate"]["ap_per_round"] == aps
    assert all(r["selected_generation"] in (0, 3, 6) for r in report["rounds"])
    again = cross_validate(data, g2, config, 3, NullModel.uniform(AB), use_map_scoring=True)
    assert again == report
