"""Probabilistic context-free grammars for sequence motifs under contact-map constraints."""
from .contacts import ContactMap, is_consistent, predict_contacts
from .grammar import Alphabet, Grammar, Rule, build_full_grammar, normalize
from .parser import inside, inside_constrained, neighborhood_mass, viterbi, viterbi_constrained

__version__ = "0.1.0"

__all__ = [
    "Alphabet", "ContactMap", "Grammar", "Rule", "build_full_grammar", "inside",
    "inside_constrained", "is_consistent", "neighborhood_mass", "normalize",
    "predict_contacts", "viterbi", "viterbi_constrained",
]
