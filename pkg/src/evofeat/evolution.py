"""Generational evolution of feature programs with proxy-model fitness.

Individuals are structured genotypes mapped through a grammar to feature
programs. Fitness is 1 - balanced accuracy of a proxy classifier trained on
the transformed training subset and scored on the transformed validation
subset. Selection is tournament, with elites carried over unchanged.
"""

from __future__ import annotations

import hashlib
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .datasets import Dataset, SplitDataset, split as split_dataset
from .exceptions import ConfigInvalidError, SingleClassTruthError
from .expressions import FeatureProgram, evaluate, render_program
from .grammar import (
    Grammar,
    Genotype,
    crossover,
    default_grammar,
    map_genotype,
    mutate,
    random_genotype,
)
from .models import PROXY_KINDS, TESTER_KINDS, balanced_accuracy, make_model
from .validation import ensure_rng


@dataclass
class EvolutionConfig:
    """Knobs of one evolutionary run."""

    population_size: int = 200
    generations: int = 100
    elitism_fraction: float = 0.10
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    tournament_size: int = 3
    depth_min: int = 3
    depth_max: int = 10
    proxy: str = "decision_tree"
    proxy_params: dict = field(default_factory=dict)
    max_features: int | None = None  # None trusts the grammar's own bound
    seed: int = 0

    def validate(self):
        if self.population_size < 2:
            raise ConfigInvalidError("population_size must be >= 2")
        if self.generations < 1:
            raise ConfigInvalidError("generations must be >= 1")
        if not 0.0 < self.elitism_fraction < 1.0:
            raise ConfigInvalidError("elitism_fraction must lie in (0, 1)")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ConfigInvalidError(f"{name} must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ConfigInvalidError("tournament_size must be >= 1")
        if not 1 <= self.depth_min <= self.depth_max:
            raise ConfigInvalidError("need 1 <= depth_min <= depth_max")
        if self.proxy not in PROXY_KINDS:
            raise ConfigInvalidError(
                f"proxy must be one of {PROXY_KINDS}, got {self.proxy!r}")


@dataclass
class Individual:
    genotype: Genotype
    program: FeatureProgram
    fitness: float | None = None
    created: int = 0

    @property
    def n_features(self) -> int:
        return len(self.program)

    def sort_key(self):
        return (self.fitness, self.n_features, self.created)


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    mean_feature_count: float
    best_feature_count: int
    min_feature_count: int
    max_feature_count: int


@dataclass
class RunResult:
    best: Individual
    history: list[GenerationRecord]
    config: EvolutionConfig
    wall_time: float


def _evaluation_seed(run_seed: int, generation: int, index: int) -> int:
    """Stable per-individual seed so evaluation order cannot matter."""
    digest = hashlib.blake2b(
        f"{run_seed}:{generation}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") % (2 ** 63)


def evaluate_individual(program: FeatureProgram, split: SplitDataset,
                        proxy: str = "decision_tree", seed: int = 0,
                        proxy_params: dict | None = None) -> float:
    """1 - balanced accuracy of the proxy on the transformed validation set."""
    X_train = evaluate(program, split.train.features)
    X_val = evaluate(program, split.validation.features)
    model = make_model(proxy, random_state=seed, params=proxy_params)
    model.fit(X_train, split.train.labels)
    predictions = model.predict(X_val)
    try:
        score = balanced_accuracy(split.validation.labels, predictions)
    except SingleClassTruthError:
        warnings.warn("validation subset holds a single class; "
                      "assigning worst fitness", stacklevel=2)
        return 1.0
    return 1.0 - score


def _tournament(population, rng, size):
    picks = rng.integers(0, len(population), size=size)
    return min((population[i] for i in picks), key=Individual.sort_key)


def run_evolution(config: EvolutionConfig, grammar: Grammar,
                  split: SplitDataset) -> RunResult:
    """Evolve feature programs against a fixed split.

    History row g describes the population at generation g, row 0 being the
    initial population; with elitism the best fitness never increases.
    """
    config.validate()
    started = time.perf_counter()
    rng = ensure_rng(config.seed)
    counter = 0

    def make_individual(genotype) -> Individual:
        nonlocal counter
        program = map_genotype(grammar, genotype,
                               max_features=config.max_features)
        ind = Individual(genotype=genotype, program=program, created=counter)
        counter += 1
        return ind

    population = []
    for _ in range(config.population_size):
        genotype = random_genotype(grammar, config.depth_min, config.depth_max, rng)
        population.append(make_individual(genotype))
    for idx, ind in enumerate(population):
        ind.fitness = evaluate_individual(
            ind.program, split, config.proxy,
            seed=_evaluation_seed(config.seed, 0, idx),
            proxy_params=config.proxy_params)

    history = [_record(population, 0)]
    n_elites = math.ceil(config.elitism_fraction * config.population_size)

    for generation in range(1, config.generations):
        ranked = sorted(population, key=Individual.sort_key)
        elites = ranked[:n_elites]
        offspring = []
        while len(offspring) < config.population_size - n_elites:
            parent_a = _tournament(population, rng, config.tournament_size)
            parent_b = _tournament(population, rng, config.tournament_size)
            if rng.random() < config.crossover_rate:
                child_a, child_b = crossover(parent_a.genotype, parent_b.genotype, rng)
            else:
                child_a, child_b = parent_a.genotype.copy(), parent_b.genotype.copy()
            for child in (child_a, child_b):
                if len(offspring) >= config.population_size - n_elites:
                    break
                mutated = mutate(child, config.mutation_rate, rng)
                offspring.append(make_individual(mutated))
        population = elites + offspring
        for idx, ind in enumerate(population):
            if ind.fitness is None:
                ind.fitness = evaluate_individual(
                    ind.program, split, config.proxy,
                    seed=_evaluation_seed(config.seed, generation, idx),
                    proxy_params=config.proxy_params)
        history.append(_record(population, generation))

    best = min(population, key=Individual.sort_key)
    return RunResult(best=best, history=history, config=config,
                     wall_time=time.perf_counter() - started)


def _record(population, generation) -> GenerationRecord:
    fitnesses = [ind.fitness for ind in population]
    counts = [ind.n_features for ind in population]
    best = min(population, key=Individual.sort_key)
    return GenerationRecord(
        generation=generation,
        best_fitness=best.fitness,
        mean_fitness=float(np.mean(fitnesses)),
        mean_feature_count=float(np.mean(counts)),
        best_feature_count=best.n_features,
        min_feature_count=min(counts),
        max_feature_count=max(counts),
    )


def test_best(best: Individual, split: SplitDataset,
              testing_models=TESTER_KINDS, seed: int = 0,
              model_params: dict | None = None) -> dict[str, float]:
    """Balanced accuracy of each testing model on the transformed test set.

    Models are trained on the transformed train+validation rows, mirroring
    how the final transformation would be deployed.
    """
    return score_transformed(
        evaluate(best.program, split.train.features),
        evaluate(best.program, split.validation.features),
        evaluate(best.program, split.test.features),
        split, testing_models, seed, model_params)


def score_transformed(X_train, X_val, X_test, split: SplitDataset,
                      testing_models=TESTER_KINDS, seed: int = 0,
                      model_params: dict | None = None) -> dict[str, float]:
    """Train each named model on train+validation features, score on test."""
    X_fit = np.vstack([X_train, X_val])
    y_fit = np.concatenate([split.train.labels, split.validation.labels])
    scores = {}
    for offset, name in enumerate(testing_models):
        if name not in TESTER_KINDS:
            raise ConfigInvalidError(
                f"unknown testing model {name!r}; choose from {TESTER_KINDS}")
        params = (model_params or {}).get(name)
        model = make_model(name, random_state=seed + offset, params=params)
        model.fit(X_fit, y_fit)
        scores[name] = balanced_accuracy(split.test.labels,
                                         model.predict(X_test))
    return scores


class FeatureEvolver(BaseEstimator, TransformerMixin):
    """Estimator wrapper: fit evolves a feature program, transform applies it.

    fit() carves a stratified train/validation split out of the supplied data
    (the proxy's fitness needs held-out rows) and keeps the best program.
    """

    def __init__(self, grammar=None, max_features=10, population_size=50,
                 generations=20, proxy="decision_tree", random_state=0):
        self.grammar = grammar
        self.max_features = max_features
        self.population_size = population_size
        self.generations = generations
        self.proxy = proxy
        self.random_state = random_state

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        grammar = self.grammar
        if grammar is None:
            grammar = default_grammar(X.shape[1], max_features=self.max_features)
        ds = Dataset(X.copy(), y.copy(),
                     tuple(f"x{i}" for i in range(X.shape[1])))
        inner = split_dataset(ds, seed=self.random_state)
        config = EvolutionConfig(
            population_size=self.population_size,
            generations=self.generations,
            proxy=self.proxy,
            seed=self.random_state,
        )
        result = run_evolution(config, grammar, inner)
        self.program_ = result.best.program
        self.result_ = result
        return self

    def transform(self, X):
        return evaluate(self.program_, X)

    def phenotype(self) -> str:
        return render_program(self.program_)
