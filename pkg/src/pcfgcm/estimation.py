"""Maximum-likelihood and contrastive training objectives (log domain)."""
from __future__ import annotations

import enum
import math

import numpy as np

from . import parser


class EstimatorKind(str, enum.Enum):
    ML = "ml"
    CE_M = "ce-m"
    CE_X = "ce-x"


class ObjectiveError(ValueError):
    pass


def _log(values):
    with np.errstate(divide="ignore"):
        return np.log(values)


def _groups(sample, grammar):
    """Bucket ``(x, map)`` items by (length, map) into encoded matrices."""
    buckets = {}
    for x, cmap in sample:
        codes = parser.encode(x, grammar)
        n = len(codes)
        if cmap is not None and not cmap.pairs:
            cmap = None
        parser.check_map(cmap, n)
        key = (n, cmap)
        buckets.setdefault(key, []).append(codes)
    return [(n, cmap, np.vstack(rows)) for (n, cmap), rows in buckets.items()]


class Objective:
    """An objective over a fixed sample, evaluated on probability vectors.

    The sample is encoded and grouped once; ``__call__`` takes a vector of
    rule probabilities aligned with ``grammar.rules`` and returns the log
    value, or ``-inf`` for infeasible parameters.
    """

    def __init__(self, kind, sample, grammar, shared_map=None):
        self.kind = EstimatorKind(kind)
        self.grammar = grammar
        sample = [(x, m) for x, m in sample]
        if not sample:
            raise ObjectiveError("empty sample")
        if self.kind is EstimatorKind.CE_M:
            if shared_map is None:
                raise ObjectiveError("CE(m) needs a shared contact map")
            lengths = {len(x) for x, _ in sample}
            if lengths != {shared_map.length}:
                raise ObjectiveError("CE(m) needs every sequence to match the shared map length")
            sample = [(x, shared_map) for x, _ in sample]
        self.shared_map = shared_map
        self.size = len(sample)
        self.groups = _groups(sample, grammar)

    def terms(self, probs):
        """Per-group log terms (constrained, unconstrained or None) in group order."""
        out = []
        for _, cmap, X in self.groups:
            constrained = parser.inside_many(X, self.grammar, cmap, probs)
            free = None
            if self.kind is EstimatorKind.CE_X:
                free = constrained if cmap is None else parser.inside_many(X, self.grammar, None, probs)
            out.append((constrained, free))
        return out

    def __call__(self, probs):
        probs = np.asarray(probs, dtype=float)
        total = 0.0
        for constrained, free in self.terms(probs):
            if self.kind is EstimatorKind.CE_X:
                if np.any(free <= 0):
                    return -math.inf
                total += float(np.sum(_log(constrained) - _log(free)))
            else:
                total += float(np.sum(_log(constrained)))
            if total == -math.inf:
                return -math.inf
        if self.kind is EstimatorKind.CE_M:
            mass = parser.neighborhood_mass(self.shared_map, self.shared_map.length,
                                            self.grammar, probs)
            if mass <= 0:
                return -math.inf
            total -= self.size * math.log(mass)
        return total


def objective_ml(sample, grammar):
    """Sum of log constrained inside probabilities; ``None``/empty maps mean no constraint."""
    return Objective(EstimatorKind.ML, sample, grammar)(grammar.probs)


def objective_ce_m(sequences, shared_map, grammar):
    """Contrastive objective against all map-consistent skeletons of the map's length."""
    obj = Objective(EstimatorKind.CE_M, [(x, shared_map) for x in sequences], grammar, shared_map)
    mass = parser.neighborhood_mass(shared_map, shared_map.length, grammar)
    if mass <= 0:
        raise ObjectiveError("grammar cannot realise the contact map (neighbourhood mass 0)")
    return obj(grammar.probs)


def objective_ce_x(sample, grammar):
    """Contrastive objective against each sequence's unconstrained parses."""
    obj = Objective(EstimatorKind.CE_X, sample, grammar)
    for _, free in obj.terms(grammar.probs):
        if np.any(free <= 0):
            raise ObjectiveError("sequence has zero probability under the grammar")
    return obj(grammar.probs)


def make_objective(kind, dataset, grammar, use_maps=True, positives=None):
    """Objective for ``dataset`` positives (optionally a subset of ids)."""
    kind = EstimatorKind(kind)
    items = dataset.positives if positives is None else positives
    sample = []
    for ident, seq in items:
        cmap = dataset.map_for(ident) if use_maps else None
        sample.append((seq, cmap))
    shared = dataset.shared_map if kind is EstimatorKind.CE_M else None
    if kind is EstimatorKind.CE_M and shared is None:
        raise ObjectiveError("CE(m) requires a dataset with a shared contact map")
    return Objective(kind, sample, grammar, shared_map=shared)
