"""PCFG with lexical, branching and contact rules.

Symbol indexing is positional: lexical non-terminals (``vt``) take ids
``0 .. len(vt)-1`` and structural non-terminals (``vn``) follow them.
Terminals are indexed by their position in the alphabet.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

PROTEIN_SYMBOLS = "ACDEFGHIKLMNQPRSTVWY"

LEXICAL = "lexical"
BRANCHING = "branching"
CONTACT = "contact"
KINDS = (LEXICAL, BRANCHING, CONTACT)

PROPER_TOL = 1e-9


class GrammarError(ValueError):
    """Invalid grammar or malformed grammar document."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple

    def __post_init__(self):
        symbols = tuple(self.symbols)
        object.__setattr__(self, "symbols", symbols)
        if not symbols:
            raise GrammarError("alphabet is empty")
        if len(set(symbols)) != len(symbols):
            raise GrammarError("alphabet has duplicate symbols")
        for s in symbols:
            if len(s) != 1 or s.isspace() or s in "()#:":
                raise GrammarError(f"invalid terminal symbol {s!r}")

    @classmethod
    def protein(cls):
        return cls(tuple(PROTEIN_SYMBOLS))

    @classmethod
    def from_string(cls, text):
        """``"protein"`` or a string of single-character symbols."""
        if text.strip().lower() == "protein":
            return cls.protein()
        return cls(tuple("".join(text.split())))

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __contains__(self, symbol):
        return symbol in self.index

    @cached_property
    def index(self):
        return {s: i for i, s in enumerate(self.symbols)}

    def encode(self, sequence):
        """Map a sequence to an int array; raises on foreign symbols."""
        try:
            return np.array([self.index[c] for c in sequence], dtype=np.int64)
        except KeyError:
            for pos, c in enumerate(sequence, start=1):
                if c not in self.index:
                    raise ValueError(
                        f"symbol {c!r} at position {pos} not in alphabet"
                    ) from None
            raise


@dataclass(frozen=True)
class Rule:
    """A production. ``rhs`` holds symbol ids, or a terminal id for lexical rules."""

    kind: str
    lhs: int
    rhs: tuple
    prob: float


@dataclass(frozen=True)
class Grammar:
    alphabet: Alphabet
    vt: tuple
    vn: tuple
    start: int
    rules: tuple

    def __post_init__(self):
        object.__setattr__(self, "vt", tuple(self.vt))
        object.__setattr__(self, "vn", tuple(self.vn))
        object.__setattr__(self, "rules", tuple(self.rules))
        self._check_shapes()
        self.check_proper()

    # -- structure -------------------------------------------------------
    @property
    def n_vt(self):
        return len(self.vt)

    @property
    def n_vn(self):
        return len(self.vn)

    @property
    def n_symbols(self):
        return len(self.vt) + len(self.vn)

    @property
    def names(self):
        return self.vt + self.vn

    def is_lexical_nt(self, sym):
        return 0 <= sym < self.n_vt

    def is_structural_nt(self, sym):
        return self.n_vt <= sym < self.n_symbols

    def symbol_id(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise GrammarError(f"undeclared non-terminal {name!r}") from None

    def rules_of(self, kind):
        return [r for r in self.rules if r.kind == kind]

    @property
    def has_contact_rules(self):
        return any(r.kind == CONTACT for r in self.rules)

    def _check_shapes(self):
        names = self.vt + self.vn
        if not self.vt or not self.vn:
            raise GrammarError("need at least one lexical and one structural non-terminal")
        if len(set(names)) != len(names):
            raise GrammarError("non-terminal names must be distinct and vt/vn disjoint")
        for name in names:
            if name in self.alphabet:
                raise GrammarError(f"non-terminal {name!r} clashes with a terminal")
        if not self.is_structural_nt(self.start):
            raise GrammarError("start symbol must be a structural non-terminal")
        seen = set()
        for r in self.rules:
            key = (r.kind, r.lhs, r.rhs)
            if key in seen:
                raise GrammarError(f"duplicate rule {self.format_rule(r)}")
            seen.add(key)
            if not 0.0 <= r.prob <= 1.0 or math.isnan(r.prob):
                raise GrammarError(f"probability out of [0,1] in {self.format_rule(r)}")
            if r.kind == LEXICAL:
                ok = (self.is_lexical_nt(r.lhs) and len(r.rhs) == 1
                      and 0 <= r.rhs[0] < len(self.alphabet))
            elif r.kind == BRANCHING:
                ok = (self.is_structural_nt(r.lhs) and len(r.rhs) == 2
                      and all(0 <= s < self.n_symbols for s in r.rhs))
            elif r.kind == CONTACT:
                ok = (self.is_structural_nt(r.lhs) and len(r.rhs) == 3
                      and self.is_lexical_nt(r.rhs[0])
                      and self.is_structural_nt(r.rhs[1])
                      and self.is_lexical_nt(r.rhs[2]))
            else:
                raise GrammarError(f"unknown rule kind {r.kind!r}")
            if not ok:
                raise GrammarError(f"malformed {r.kind} rule {r!r}")

    def lhs_sums(self):
        sums = np.zeros(self.n_symbols)
        for r in self.rules:
            sums[r.lhs] += r.prob
        return sums

    def check_proper(self, tol=PROPER_TOL):
        sums = self.lhs_sums()
        bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
        if bad.size:
            detail = ", ".join(f"{self.names[i]}={sums[i]!r}" for i in bad)
            raise GrammarError(f"improper grammar, rule probabilities sum to {detail}")

    # -- probabilities ---------------------------------------------------
    @cached_property
    def probs(self):
        return np.array([r.prob for r in self.rules], dtype=float)

    @cached_property
    def lhs_array(self):
        return np.array([r.lhs for r in self.rules], dtype=np.int64)

    def with_probs(self, probs):
        """New grammar over the same rule set with the given probabilities."""
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (len(self.rules),):
            raise GrammarError("probability vector does not match rule count")
        rules = tuple(Rule(r.kind, r.lhs, r.rhs, float(p)) for r, p in zip(self.rules, probs))
        return Grammar(self.alphabet, self.vt, self.vn, self.start, rules)

    def without_contact_rules(self):
        """Same grammar minus contact rules, renormalised per lhs."""
        keep = [r for r in self.rules if r.kind != CONTACT]
        sums = {}
        for r in keep:
            sums[r.lhs] = sums.get(r.lhs, 0.0) + r.prob
        rules = []
        for r in keep:
            if sums[r.lhs] <= 0:
                raise GrammarError(f"{self.names[r.lhs]} has no branching mass left")
            rules.append(Rule(r.kind, r.lhs, r.rhs, r.prob / sums[r.lhs]))
        return Grammar(self.alphabet, self.vt, self.vn, self.start, rules)

    # -- text ------------------------------------------------------------
    def format_rule(self, r):
        names = self.names
        if r.kind == LEXICAL:
            rhs = self.alphabet.symbols[r.rhs[0]]
        else:
            rhs = " ".join(names[s] for s in r.rhs)
        return f"{r.kind} {names[r.lhs]} -> {rhs} : {r.prob!r}"

    def __str__(self):
        return dumps(self)


def build_full_grammar(alphabet, n_vt, n_vn, with_contact_rules=True, vt_names=None, vn_names=None):
    """Every rule allowed by the three rule shapes, uniform per lhs.

    Structural non-terminals are named ``v0, v1, ...`` (``v0`` is the start
    symbol) and lexical ones ``l1, l2, ...`` unless names are given.
    """
    if n_vt < 1 or n_vn < 1:
        raise GrammarError("n_vt and n_vn must be at least 1")
    vt = tuple(vt_names) if vt_names else tuple(f"l{i + 1}" for i in range(n_vt))
    vn = tuple(vn_names) if vn_names else tuple(f"v{i}" for i in range(n_vn))
    if len(vt) != n_vt or len(vn) != n_vn:
        raise GrammarError("name lists do not match counts")
    lexical_ids = range(n_vt)
    structural_ids = range(n_vt, n_vt + n_vn)
    all_ids = range(n_vt + n_vn)

    rules = []
    for t in lexical_ids:
        for a in range(len(alphabet)):
            rules.append((LEXICAL, t, (a,)))
    for v in structural_ids:
        for pair in itertools.product(all_ids, repeat=2):
            rules.append((BRANCHING, v, pair))
        if with_contact_rules:
            for t1, mid, t2 in itertools.product(lexical_ids, structural_ids, lexical_ids):
                rules.append((CONTACT, v, (t1, mid, t2)))
    counts = {}
    for _, lhs, _ in rules:
        counts[lhs] = counts.get(lhs, 0) + 1
    return Grammar(
        alphabet, vt, vn, n_vt,
        tuple(Rule(k, lhs, rhs, 1.0 / counts[lhs]) for k, lhs, rhs in rules),
    )


def group_normalize(raw_weights, lhs):
    """Divide each weight by the total of its lhs group.

    Raises ``GrammarError`` if any group present in ``lhs`` sums to zero.
    """
    raw_weights = np.asarray(raw_weights, dtype=float)
    if np.any(raw_weights < 0) or not np.all(np.isfinite(raw_weights)):
        raise GrammarError("raw weights must be finite and non-negative")
    sums = np.bincount(lhs, weights=raw_weights)
    present = np.bincount(lhs) > 0
    if np.any(sums[present] <= 0):
        raise GrammarError("all-zero weight group")
    return raw_weights / sums[lhs]


def normalize(raw_weights, grammar):
    """Grammar with probabilities proportional to ``raw_weights`` within each lhs."""
    return grammar.with_probs(group_normalize(raw_weights, grammar.lhs_array))


# -- serialization ---------------------------------------------------------

def dumps(grammar):
    lines = [
        "alphabet: " + " ".join(grammar.alphabet.symbols),
        "vt: " + " ".join(grammar.vt),
        "vn: " + " ".join(grammar.vn),
        "start: " + grammar.names[grammar.start],
    ]
    lines.extend(grammar.format_rule(r) for r in grammar.rules)
    return "\n".join(lines) + "\n"


def loads(text):
    header = {}
    pending = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        if sep and head.strip() in ("alphabet", "vt", "vn", "start"):
            key = head.strip()
            if key in header:
                raise GrammarError(f"duplicate header {key!r}", lineno)
            header[key] = rest.split()
            continue
        pending.append((lineno, line))

    for key in ("alphabet", "vt", "vn", "start"):
        if key not in header:
            raise GrammarError(f"missing header {key!r}")
    if len(header["start"]) != 1:
        raise GrammarError("start header takes exactly one name")
    try:
        if [t.lower() for t in header["alphabet"]] == ["protein"]:
            alphabet = Alphabet.protein()
        else:
            alphabet = Alphabet(tuple(header["alphabet"]))
    except GrammarError as exc:
        raise GrammarError(f"bad alphabet: {exc}") from None
    vt, vn = tuple(header["vt"]), tuple(header["vn"])
    names = vt + vn
    ids = {name: i for i, name in enumerate(names)}
    if header["start"][0] not in ids:
        raise GrammarError(f"undeclared start symbol {header['start'][0]!r}")

    rules = []
    for lineno, line in pending:
        body, sep, prob_text = line.rpartition(":")
        if not sep:
            raise GrammarError("expected 'kind lhs -> rhs : prob'", lineno)
        try:
            prob = float(prob_text)
        except ValueError:
            raise GrammarError(f"bad probability {prob_text.strip()!r}", lineno) from None
        tokens = body.split()
        if len(tokens) < 4 or tokens[2] != "->":
            raise GrammarError("expected 'kind lhs -> rhs : prob'", lineno)
        kind, lhs_name, rhs_names = tokens[0], tokens[1], tokens[3:]
        if kind not in KINDS:
            raise GrammarError(f"unknown rule kind {kind!r}", lineno)
        if lhs_name not in ids:
            raise GrammarError(f"undeclared non-terminal {lhs_name!r}", lineno)
        if kind == LEXICAL:
            if len(rhs_names) != 1 or rhs_names[0] not in alphabet:
                raise GrammarError(f"lexical rhs must be one terminal, got {rhs_names}", lineno)
            rhs = (alphabet.index[rhs_names[0]],)
        else:
            for name in rhs_names:
                if name not in ids:
                    raise GrammarError(f"undeclared non-terminal {name!r}", lineno)
            rhs = tuple(ids[name] for name in rhs_names)
        rules.append(Rule(kind, ids[lhs_name], rhs, prob))
    return Grammar(alphabet, vt, vn, ids[header["start"][0]], tuple(rules))


def save(grammar, path):
    Path(path).write_text(dumps(grammar))


def load(path):
    return loads(Path(path).read_text())
