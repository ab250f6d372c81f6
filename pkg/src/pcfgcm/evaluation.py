"""Null-model scoring, recall-precision metrics and cross-validation."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import parser
from .contacts import DEFAULT_DELTA, MIN_SEPARATION, predict_contacts
from .grammar import Alphabet
from .trees import all_leaf_distances

NULL_ENV_VAR = "PCFGCM_NULL"


class EvaluationError(ValueError):
    pass


# -- null model --------------------------------------------------------------

@dataclass(frozen=True)
class NullModel:
    """Unigram background frequencies aligned with ``alphabet``."""

    alphabet: Alphabet
    freqs: tuple

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        if f.shape != (len(self.alphabet),):
            raise EvaluationError("null model needs one frequency per alphabet symbol")
        if np.any(f <= 0):
            raise EvaluationError("null model frequencies must be positive")
        if abs(f.sum() - 1.0) > 1e-9:
            raise EvaluationError(f"null model frequencies sum to {f.sum()!r}, not 1")
        object.__setattr__(self, "freqs", tuple(float(v) for v in f))

    @classmethod
    def from_weights(cls, alphabet, weights):
        """Normalise positive weights (mapping or sequence) into a null model."""
        if isinstance(weights, dict):
            missing = [s for s in alphabet if s not in weights]
            if missing:
                raise EvaluationError(f"no background frequency for {missing}")
            weights = [weights[s] for s in alphabet]
        w = np.asarray(weights, dtype=float)
        return cls(alphabet, tuple(w / w.sum()))

    @classmethod
    def uniform(cls, alphabet):
        return cls.from_weights(alphabet, np.ones(len(alphabet)))

    @classmethod
    def from_sequences(cls, alphabet, sequences, pseudocount=1.0):
        counts = np.full(len(alphabet), pseudocount)
        for seq in sequences:
            for c in seq:
                counts[alphabet.index[c]] += 1
        return cls.from_weights(alphabet, counts)

    @classmethod
    def loads(cls, text, alphabet=None):
        weights = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise EvaluationError(f"null model line {lineno}: expected 'symbol frequency'")
            try:
                weights[parts[0]] = float(parts[1])
            except ValueError:
                raise EvaluationError(f"null model line {lineno}: bad frequency") from None
        if alphabet is None:
            alphabet = Alphabet(tuple(weights))
        extra = set(weights) - set(alphabet)
        if extra:
            raise EvaluationError(f"null model has symbols outside the alphabet: {sorted(extra)}")
        return cls.from_weights(alphabet, weights)

    @classmethod
    def load(cls, path, alphabet=None):
        return cls.loads(Path(path).read_text(), alphabet)

    @classmethod
    def swissprot(cls):
        """Bundled amino-acid background (editable file ``data/swissprot_aa.txt``)."""
        text = resources.files("pcfgcm").joinpath("data/swissprot_aa.txt").read_text()
        return cls.loads(text, Alphabet.protein())

    def dumps(self):
        return "".join(f"{s} {f!r}\n" for s, f in zip(self.alphabet, self.freqs))

    def log_prob(self, x):
        logf = np.log(np.asarray(self.freqs))
        return float(sum(logf[self.alphabet.index[c]] for c in x))


def default_null(alphabet, environ=None):
    """Null model from ``$PCFGCM_NULL``, else Swiss-Prot for proteins, else uniform."""
    import os

    environ = os.environ if environ is None else environ
    path = environ.get(NULL_ENV_VAR)
    if path:
        return NullModel.load(path, alphabet)
    if alphabet == Alphabet.protein():
        return NullModel.swissprot()
    return NullModel.uniform(alphabet)


# -- scoring -----------------------------------------------------------------

@dataclass(frozen=True)
class ScoredItem:
    id: str
    label: bool  # True for positives
    score: float


def _safe_log(p):
    return math.log(p) if p > 0 else -math.inf


def score(x, cmap, grammar, null):
    """Log-odds of ``x`` under the grammar (map-constrained if given) vs the null model."""
    if cmap is None or not cmap.pairs:
        p = parser.inside(x, grammar)
    else:
        p = parser.inside_constrained(x, cmap, grammar)
    return _safe_log(p) - null.log_prob(x)


def score_many(sequences, grammar, null, cmap=None):
    """Vectorised :func:`score` for many sequences; ``cmap`` applies to all of them."""
    out = np.empty(len(sequences))
    by_len = {}
    for k, seq in enumerate(sequences):
        by_len.setdefault(len(seq), []).append(k)
    for n, idx in by_len.items():
        use = cmap if cmap is not None and cmap.pairs else None
        if use is not None:
            parser.check_map(use, n)
        X = np.vstack([parser.encode(sequences[k], grammar) for k in idx])
        probs = parser.inside_many(X, grammar, use)
        with np.errstate(divide="ignore"):
            logs = np.log(probs)
        for k, lp in zip(idx, logs):
            out[k] = lp - null.log_prob(sequences[k])
    return out


# -- recall-precision --------------------------------------------------------

def _ranked(items):
    # negatives before positives on tied scores
    return sorted(items, key=lambda it: (-it.score, bool(it.label)))


def _as_items(items):
    out = []
    for k, it in enumerate(items):
        if isinstance(it, ScoredItem):
            out.append(it)
        else:
            label, value = it
            out.append(ScoredItem(str(k), bool(label), float(value)))
    return out


def average_precision(items):
    """Step-wise AP: mean precision at the rank of each positive."""
    items = _as_items(items)
    n_pos = sum(it.label for it in items)
    if n_pos == 0 or n_pos == len(items):
        raise EvaluationError("average precision needs at least one positive and one negative")
    hits = 0
    total = 0.0
    for rank, it in enumerate(_ranked(items), start=1):
        if it.label:
            hits += 1
            total += hits / rank
    return total / n_pos


def rpc_points(items):
    """(recall, precision) after each rank of the pessimistic ordering."""
    items = _as_items(items)
    n_pos = sum(it.label for it in items)
    if n_pos == 0:
        raise EvaluationError("recall-precision curve needs at least one positive")
    points = []
    hits = 0
    for rank, it in enumerate(_ranked(items), start=1):
        hits += it.label
        points.append((hits / n_pos, hits / rank))
    return points


def format_rpc_csv(points):
    return "recall,precision\n" + "".join(f"{r!r},{p!r}\n" for r, p in points)


# -- descriptive measures ----------------------------------------------------

def descriptive_metrics(trees, training_map, full_map, delta=DEFAULT_DELTA):
    """Contact recovery of Viterbi trees.

    ``trees`` may contain ``None`` for sequences without a parse; they
    predict nothing. ``training_map`` is one map or one per tree.
    """
    maps = training_map if isinstance(training_map, (list, tuple)) else [training_map] * len(trees)
    if not trees:
        raise EvaluationError("no trees to evaluate")
    if any(m is None or not m.pairs for m in maps):
        raise EvaluationError("recall needs a non-empty training contact map")
    if full_map is None or not full_map.pairs:
        raise EvaluationError("precision needs a non-empty reference contact map")
    recalls, precisions = [], []
    empty = 0
    ranked = []
    for k, (tree, tmap) in enumerate(zip(trees, maps)):
        if tree is None:
            predicted = set()
            distances = {}
        else:
            predicted = predict_contacts(tree, delta)
            distances = all_leaf_distances(tree)
        recalls.append(len(predicted & tmap.pairs) / len(tmap.pairs))
        if predicted:
            precisions.append(len(predicted & full_map.pairs) / len(predicted))
        else:
            empty += 1
        for pair, d in distances.items():
            if pair[1] - pair[0] >= MIN_SEPARATION:
                ranked.append(ScoredItem(f"{k}:{pair}", pair in full_map.pairs, -float(d)))
    try:
        ap = average_precision(ranked)
    except EvaluationError:
        ap = None
    return {
        "recall_at_4": float(np.mean(recalls)),
        "precision_at_4": float(np.mean(precisions)) if precisions else None,
        "ap_over_delta": ap,
        "empty_predictions": empty,
        "sequences": len(trees),
    }


def viterbi_trees(sequences, grammar, cmap=None):
    out = []
    for x in sequences:
        try:
            if cmap is not None and cmap.pairs:
                tree, _ = parser.viterbi_constrained(x, cmap, grammar)
            else:
                tree, _ = parser.viterbi(x, grammar)
        except parser.NoParse:
            tree = None
        out.append(tree)
    return out


# -- evaluation harness ------------------------------------------------------

def evaluate_grammar(grammar, positives, negatives, null, scoring_map=None,
                     training_map=None, full_map=None):
    """Discriminative and (when maps are given) descriptive metrics for one grammar."""
    pos_seqs = [s for _, s in positives]
    neg_seqs = [s for _, s in negatives]
    items = [ScoredItem(i, True, float(v))
             for (i, _), v in zip(positives, score_many(pos_seqs, grammar, null, scoring_map))]
    items += [ScoredItem(i, False, float(v))
              for (i, _), v in zip(negatives, score_many(neg_seqs, grammar, null, scoring_map))]
    report = {"ap": average_precision(items), "positives": len(positives),
              "negatives": len(negatives)}
    if training_map is not None and training_map.pairs:
        trees = viterbi_trees(pos_seqs, grammar)
        report.update(descriptive_metrics(trees, training_map, full_map or training_map))
    return report, items


@dataclass(frozen=True)
class FoldPlan:
    k: int
    positive_folds: tuple
    negative_folds: tuple

    @classmethod
    def make(cls, n_positives, n_negatives, k, seed):
        if k < 3:
            raise EvaluationError("cross-validation needs k >= 3")
        if n_positives < k:
            raise EvaluationError(f"{n_positives} positives cannot fill {k} folds")
        rng = np.random.default_rng(seed)

        def assign(n):
            folds = np.empty(n, dtype=int)
            folds[rng.permutation(n)] = np.arange(n) % k
            return tuple(int(f) for f in folds)

        return cls(k, assign(n_positives), assign(n_negatives))

    def round(self, r):
        """(train folds, validation fold, test fold) of round ``r``."""
        test = r
        validation = (r + 1) % self.k
        train = tuple(f for f in range(self.k) if f not in (test, validation))
        return train, validation, test

    def members(self, folds, which="positive"):
        assignment = self.positive_folds if which == "positive" else self.negative_folds
        folds = {folds} if isinstance(folds, int) else set(folds)
        return [k for k, f in enumerate(assignment) if f in folds]


def cross_validate(dataset, base, config, k, null, use_map_training=True,
                   use_map_scoring=False, threads=1, progress=None):
    """k-fold CV: train on k-2 folds, select a checkpoint on 1, test on 1."""
    from .learner import train

    plan = FoldPlan.make(len(dataset.positives), len(dataset.negatives), k, config.seed)
    scoring_map = dataset.shared_map if use_map_scoring else None
    reference = dataset.full_map or dataset.shared_map
    rounds = []
    for r in range(k):
        train_folds, val_fold, test_fold = plan.round(r)
        pick = lambda idx, recs: [recs[i] for i in idx]  # noqa: E731
        train_pos = pick(plan.members(train_folds), dataset.positives)
        val_pos = pick(plan.members(val_fold), dataset.positives)
        test_pos = pick(plan.members(test_fold), dataset.positives)
        val_neg = pick(plan.members(val_fold, "negative"), dataset.negatives)
        test_neg = pick(plan.members(test_fold, "negative"), dataset.negatives)
        if not val_neg or not test_neg:
            raise EvaluationError("every fold needs at least one negative")
        seed = int(np.random.SeedSequence([config.seed, r]).generate_state(1)[0])
        result = train(dataset, base, dataclasses.replace(config, seed=seed),
                       use_maps=use_map_training, positives=train_pos, threads=threads)
        candidates = result.checkpoints or [(result.trace[-1][0], result.grammar)]
        best = None
        for generation, grammar in candidates:
            val_report, _ = evaluate_grammar(grammar, val_pos, val_neg, null, scoring_map)
            if best is None or val_report["ap"] >= best[0]:
                best = (val_report["ap"], generation, grammar)
        val_ap, generation, grammar = best
        report, _ = evaluate_grammar(
            grammar, test_pos, test_neg, null, scoring_map,
            training_map=dataset.shared_map, full_map=reference,
        )
        report.update({
            "round": r,
            "train_folds": list(train_folds),
            "validation_fold": val_fold,
            "test_fold": test_fold,
            "selected_generation": generation,
            "validation_ap": val_ap,
            "seed": seed,
        })
        rounds.append(report)
        if progress:
            progress(report)
    aggregate = {"ap": float(np.mean([r["ap"] for r in rounds])),
                 "ap_per_round": [r["ap"] for r in rounds]}
    for key in ("recall_at_4", "precision_at_4", "ap_over_delta"):
        values = [r[key] for r in rounds if r.get(key) is not None]
        aggregate[key] = float(np.mean(values)) if values else None
    return {"k": k, "rounds": rounds, "aggregate": aggregate, "plan": dataclasses.asdict(plan)}
