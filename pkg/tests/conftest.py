import numpy as np
import pytest

from pcfgcm import grammar as g

G1_TEXT = """\
alphabet: a b
vt: T
vn: S
start: S
lexical T -> a : 0.6
lexical T -> b : 0.4
branching S -> T T : 0.7
branching S -> S T : 0.3
"""

G2_TEXT = """\
alphabet: a b
vt: T
vn: S
start: S
lexical T -> a : 0.6
lexical T -> b : 0.4
branching S -> T T : 0.5
branching S -> S T : 0.2
contact S -> T S T : 0.3
"""


@pytest.fixture
def g1():
    return g.loads(G1_TEXT)


@pytest.fixture
def g2():
    return g.loads(G2_TEXT)


@pytest.fixture
def g2_bar(g2):
    return g2.without_contact_rules()


def random_grammar(rng, n_terms=2, max_vt=2, max_vn=2, with_contact=True, sparsity=0.3):
    """Full rule set over a small alphabet with random probabilities; some rules zeroed."""
    alphabet = g.Alphabet(tuple("abcd"[:n_terms]))
    base = g.build_full_grammar(alphabet, int(rng.integers(1, max_vt + 1)),
                                int(rng.integers(1, max_vn + 1)), with_contact)
    raw = rng.random(len(base.rules))
    raw[rng.random(len(raw)) < sparsity] = 0.0
    lhs = base.lhs_array
    for v in np.unique(lhs):
        idx = np.flatnonzero(lhs == v)
        if raw[idx].sum() == 0:
            raw[rng.choice(idx)] = 1.0
    return g.normalize(raw, base)


def random_valid_map(rng, n, max_pairs=2):
    """A random non-crossing map with separation >= 3 (possibly empty)."""
    from pcfgcm.contacts import ContactMap, validate

    candidates = [(i, j) for i in range(1, n + 1) for j in range(i + 3, n + 1)]
    pairs = set()
    for _ in range(int(rng.integers(0, max_pairs + 1))):
        if not candidates:
            break
        trial = pairs | {candidates[int(rng.integers(len(candidates)))]}
        if not validate(ContactMap(n, frozenset(trial))):
            pairs = trial
    return ContactMap(n, frozenset(pairs))
