import pytest

from pcfgcm.trees import Tree, TreeFormatError, parse_bracket, ust_of

TEXT = "(S (T a) (S (T b) (T b)) (T a))"


def test_bracket_round_trip():
    tree = parse_bracket(TEXT)
    assert tree.to_bracket() == TEXT
    assert tree.yield_() == "abba"
    assert (tree.start, tree.end) == (0, 4)
    inner = tree.children[1]
    assert (inner.start, inner.end) == (1, 3)


def test_ust_preserves_yield_and_shape():
    tree = parse_bracket(TEXT)
    skel = ust_of(tree)
    assert skel.yield_() == "abba"
    assert len(skel.children) == 3
    assert all(n.label is None for n in skel.nodes() if not n.is_leaf)
    assert parse_bracket(skel.to_bracket()) == skel


def test_ust_ignores_internal_labels():
    a = parse_bracket("(S (T a) (T b))")
    b = parse_bracket("(X (U a) (V b))")
    assert a != b
    assert ust_of(a) == ust_of(b)


@pytest.mark.parametrize("bad", ["", "(S (T a)", "(S)", "S a)", "(S (T a)) b", "((T a))"])
def test_malformed(bad):
    with pytest.raises(TreeFormatError):
        parse_bracket(bad)


def test_leaf_only():
    assert parse_bracket("a") == Tree("a", (), 0, 1)
