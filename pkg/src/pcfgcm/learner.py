"""Pittsburgh-style genetic algorithm over rule probabilities.

Each individual is a vector of non-negative raw weights, one per rule,
decoded into a proper grammar by normalising within each left-hand side.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .estimation import EstimatorKind, make_objective
from .grammar import group_normalize

log = logging.getLogger(__name__)

MAX_REMUTATIONS = 1000


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class LearnerConfig:
    population_size: int = 100
    generations: int = 500
    crossover_rate: float = 0.8
    mutation_rate: float = 0.05
    mutation_sigma: float = 0.1
    elitism: int = 2
    seed: int = 0
    estimator: EstimatorKind = EstimatorKind.ML
    early_stop_patience: int = 100
    checkpoint_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, "estimator", EstimatorKind(self.estimator))
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        for name in ("crossover_rate", "mutation_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.mutation_sigma < 0:
            raise ValueError("mutation_sigma must be non-negative")
        # elitism == population_size freezes the population; allowed for identity steps
        if not 0 <= self.elitism <= self.population_size:
            raise ValueError("elitism must lie in [0, population_size]")
        if self.early_stop_patience < 0 or self.checkpoint_every < 0:
            raise ValueError("patience and checkpoint interval must be non-negative")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown learner config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_dict(self):
        d = asdict(self)
        d["estimator"] = self.estimator.value
        return d


@dataclass
class Individual:
    raw_weights: np.ndarray
    fitness: float = -math.inf


@dataclass
class TrainResult:
    grammar: object
    fitness: float
    trace: list
    checkpoints: list = field(default_factory=list)

    def trace_csv(self):
        return format_trace(self.trace)


def format_trace(trace):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["generation", "best", "mean", "median"])
    for row in trace:
        writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    return buf.getvalue()


def _evaluate(raws, lhs, fitness_fn, executor=None):
    def one(raw):
        try:
            probs = group_normalize(raw, lhs)
        except ValueError:
            return -math.inf
        value = fitness_fn(probs)
        return -math.inf if math.isnan(value) else value

    if executor is None:
        return [one(r) for r in raws]
    return list(executor.map(one, raws))


def _mutate(child, config, groups, rng):
    mask = rng.random(child.shape[0]) < config.mutation_rate
    if mask.any():
        child[mask] += rng.normal(0.0, config.mutation_sigma, int(mask.sum()))
    np.clip(child, 0.0, None, out=child)
    for idx in groups:
        tries = 0
        before = child[idx].copy()
        while child[idx].sum() <= 0.0:
            tries += 1
            if tries > MAX_REMUTATIONS or config.mutation_sigma == 0:
                child[idx] = rng.random(idx.shape[0])
                break
            child[idx] = np.clip(before + rng.normal(0.0, config.mutation_sigma, idx.shape[0]), 0.0, None)
    return child


def _tournament(fitness, rng):
    a, b = rng.integers(fitness.shape[0], size=2)
    return a if fitness[a] >= fitness[b] else b


def evolve_step(population, config, fitness_fn, rng, lhs, executor=None):
    """One generation: elitism, tournament-2 selection, uniform crossover, Gaussian mutation."""
    size = len(population)
    fitness = np.array([ind.fitness for ind in population])
    order = np.argsort(-fitness, kind="stable")
    nxt = [Individual(population[k].raw_weights.copy(), population[k].fitness)
           for k in order[:config.elitism]]
    groups = [np.flatnonzero(lhs == g) for g in np.unique(lhs)]
    children = []
    while len(nxt) + len(children) < size:
        first = population[_tournament(fitness, rng)].raw_weights
        second = population[_tournament(fitness, rng)].raw_weights
        if rng.random() < config.crossover_rate:
            mask = rng.random(first.shape[0]) < 0.5
            child = np.where(mask, first, second)
        else:
            child = first.copy()
        children.append(_mutate(child, config, groups, rng))
    scores = _evaluate(children, lhs, fitness_fn, executor)
    nxt.extend(Individual(raw, fit) for raw, fit in zip(children, scores))
    return nxt


def _stats(generation, population):
    fit = np.array([ind.fitness for ind in population])
    return (generation, float(fit.max()), float(fit.mean()), float(np.median(fit)))


def train_objective(objective, base, config, threads=1):
    """Maximise ``objective`` (a callable on probability vectors) over ``base``'s rules."""
    rng = np.random.default_rng(config.seed)
    lhs = base.lhs_array
    n_rules = len(base.rules)
    executor = ThreadPoolExecutor(threads) if threads and threads > 1 else None
    try:
        raws = [rng.random(n_rules) for _ in range(config.population_size)]
        scores = _evaluate(raws, lhs, objective, executor)
        population = [Individual(r, s) for r, s in zip(raws, scores)]
        if all(s == -math.inf for s in scores):
            raise TrainingError(
                f"every individual of the initial population ({config.population_size}) "
                f"has zero {config.estimator.value} likelihood; the grammar probably cannot "
                "realise the contact constraints (missing contact rules?)"
            )
        trace = [_stats(0, population)]
        best = max(population, key=lambda ind: ind.fitness)
        best = Individual(best.raw_weights.copy(), best.fitness)
        checkpoints = []
        if config.checkpoint_every:
            checkpoints.append((0, base.with_probs(group_normalize(best.raw_weights, lhs))))
        stale = 0
        for generation in range(1, config.generations + 1):
            population = evolve_step(population, config, objective, rng, lhs, executor)
            trace.append(_stats(generation, population))
            top = max(population, key=lambda ind: ind.fitness)
            if top.fitness > best.fitness:
                best = Individual(top.raw_weights.copy(), top.fitness)
                stale = 0
            else:
                stale += 1
            if config.checkpoint_every and generation % config.checkpoint_every == 0:
                checkpoints.append((generation, base.with_probs(group_normalize(best.raw_weights, lhs))))
            if config.early_stop_patience and stale >= config.early_stop_patience:
                log.info("early stop at generation %d", generation)
                break
            if generation % 50 == 0:
                log.debug("generation %d best %.6g", generation, best.fitness)
    finally:
        if executor is not None:
            executor.shutdown()
    grammar = base.with_probs(group_normalize(best.raw_weights, lhs))
    if config.checkpoint_every and (not checkpoints or checkpoints[-1][0] != trace[-1][0]):
        checkpoints.append((trace[-1][0], grammar))
    return TrainResult(grammar, best.fitness, trace, checkpoints)


def train(dataset, base, config, use_maps=True, positives=None, threads=1):
    """Fit ``base``'s rule probabilities to ``dataset`` positives with the configured estimator."""
    objective = make_objective(config.estimator, dataset, base, use_maps=use_maps, positives=positives)
    return train_objective(objective, base, config, threads=threads)
