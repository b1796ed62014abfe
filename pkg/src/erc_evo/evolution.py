"""Genetic algorithm over portfolio weight vectors.

Each generation is assembled from four sources, in this order:

1. elites       - the ``n_elite`` fittest members, copied unchanged
2. random       - ``n_random`` fresh chromosomes, genes uniform in bounds
3. mutants      - ``n_mutants`` parents (uniform, with replacement), each with
                  ``ceil(u * len)`` genes redrawn in bounds, ``u ~ U(0, cap]``
4. crossover    - ``n_crossover`` children ``a*p1 + (1-a)*p2`` of uniformly
                  drawn parent pairs, ``a ~ U[0, 1)``

Everything new is repaired (normalized, clipped into bounds) before it is
scored. Chromosomes that cannot be repaired stay in the population with
fitness ``inf``.

One ``numpy.random.Generator`` per run feeds the operators, always in the
order above; fitness evaluation draws no random numbers, so it can be spread
over threads without changing results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from erc_evo.risk import SUM_EPS, Bounds, FITNESS_KINDS, fitness_batch, repair_batch, validate_covariance


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 200
    max_iterations: int = 300
    n_elite: int = 10
    n_mutants: int = 100
    n_random: int = 50
    n_crossover: int = 100
    mutation_fraction_cap: float = 0.15
    bounds: Bounds | None = None
    fitness_kind: str = "marginal"
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 1 or self.n_elite < 1 or self.population_size < self.n_elite:
            raise ValueError("need population_size >= n_elite >= 1")
        if min(self.n_mutants, self.n_random, self.n_crossover, self.max_iterations) < 0:
            raise ValueError("operator counts and max_iterations must be non-negative")
        if not 0 < self.mutation_fraction_cap <= 1:
            raise ValueError("mutation_fraction_cap must lie in (0, 1]")
        if self.fitness_kind not in FITNESS_KINDS:
            raise ValueError(f"fitness_kind must be one of {FITNESS_KINDS}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def offspring_size(self) -> int:
        return self.n_elite + self.n_random + self.n_mutants + self.n_crossover

    def resolve_bounds(self, n: int) -> Bounds:
        b = self.bounds if self.bounds is not None else Bounds.uniform(n, 0.0, 1.0)
        if b.n != n:
            raise ValueError(f"bounds cover {b.n} assets, covariance has {n}")
        return b

    def to_dict(self) -> dict:
        return {
            "population_size": self.population_size,
            "max_iterations": self.max_iterations,
            "n_elite": self.n_elite,
            "n_mutants": self.n_mutants,
            "n_random": self.n_random,
            "n_crossover": self.n_crossover,
            "mutation_fraction_cap": self.mutation_fraction_cap,
            "bounds": None if self.bounds is None else self.bounds.to_dict(),
            "fitness_kind": self.fitness_kind,
            "seed": self.seed,
        }


@dataclass
class Population:
    members: np.ndarray  # (m, n) weight rows
    fitness: np.ndarray  # (m,), inf marks an unrepairable chromosome
    generation: int = 0

    def __len__(self) -> int:
        return self.members.shape[0]

    def best_index(self) -> int:
        return int(np.argmin(self.fitness))


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float


@dataclass
class GaResult:
    best: np.ndarray
    best_fitness: float
    history: list[GenerationStats] = field(default_factory=list)
    population: Population | None = None

    def __iter__(self):
        # Allows ``best, history = run_ga(...)``.
        return iter((self.best, self.history))


def _stats(pop: Population) -> GenerationStats:
    finite = pop.fitness[np.isfinite(pop.fitness)]
    if finite.size == 0:
        return GenerationStats(pop.generation, math.inf, math.inf)
    return GenerationStats(pop.generation, float(finite.min()), float(finite.mean()))


def random_chromosomes(count: int, bounds: Bounds, rng: np.random.Generator) -> np.ndarray:
    """Raw (unrepaired) chromosomes with genes uniform in ``[lower, upper]``."""
    return rng.uniform(bounds.lower, bounds.upper, size=(count, bounds.n))


def _score(raw: np.ndarray, C, bounds: Bounds, kind: str, workers: int) -> tuple[np.ndarray, np.ndarray]:
    X, valid = repair_batch(raw, bounds)
    f = np.full(X.shape[0], np.inf)
    if valid.any():
        f[valid] = fitness_batch(X[valid], C, kind, workers=workers)
    return X, f


def init_population(cfg: GaConfig, C, rng: np.random.Generator, workers: int = 1) -> Population:
    """Generation 0: ``population_size`` uniform chromosomes, repaired and scored."""
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    if n < 2:
        raise ValueError("need at least two assets")
    bounds = cfg.resolve_bounds(n)
    X, f = _score(random_chromosomes(cfg.population_size, bounds, rng), C, bounds, cfg.fitness_kind, workers)
    return Population(X, f, 0)


def mutation_gene_count(u: float, length: int) -> int:
    """Number of genes a mutation touches: ``ceil(u * length)``, at least one."""
    return int(min(length, max(1, math.ceil(u * length))))


def mutate_batch(parents: np.ndarray, bounds: Bounds, cap: float, rng: np.random.Generator) -> np.ndarray:
    """Redraw a random subset of genes of every parent row. Output is unrepaired.

    Draw order: ``u`` per row, a key matrix choosing positions, a value matrix.
    """
    m, n = parents.shape
    u = cap * (1.0 - rng.random(m))  # (0, cap]
    k = np.minimum(n, np.maximum(1, np.ceil(u * n))).astype(int)
    # Ranks of iid keys give a uniform permutation per row; the k smallest
    # ranks are a uniform k-subset without replacement.
    ranks = np.argsort(np.argsort(rng.random((m, n)), axis=1), axis=1)
    fresh = rng.uniform(bounds.lower, bounds.upper, size=(m, n))
    hit = ranks < k[:, None]
    return np.where(hit, fresh, parents)


def mutate(parent, cfg: GaConfig, rng: np.random.Generator) -> np.ndarray | None:
    """Mutate a single chromosome and repair it; ``None`` if repair fails."""
    parent = np.asarray(parent, dtype=float)
    bounds = cfg.resolve_bounds(parent.shape[0])
    X, valid = repair_batch(mutate_batch(parent[None, :], bounds, cfg.mutation_fraction_cap, rng), bounds)
    return X[0] if valid[0] else None


def crossover_batch(p1: np.ndarray, p2: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    alpha = rng.random(p1.shape[0])[:, None]
    return alpha * p1 + (1 - alpha) * p2


def intermediate_crossover(
    p1, p2, rng: np.random.Generator | None, bounds: Bounds | None = None, alpha: float | None = None
) -> np.ndarray | None:
    """Child ``a*p1 + (1-a)*p2`` with ``a ~ U[0, 1)``, repaired.

    Without ``bounds`` the repair is only the sum-to-one normalization.
    Passing ``alpha`` fixes the mixing parameter and skips the draw.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ValueError("parents must have equal length")
    if alpha is None:
        child = crossover_batch(p1[None, :], p2[None, :], rng)[0]
    else:
        child = alpha * p1 + (1 - alpha) * p2
    if bounds is not None:
        X, valid = repair_batch(child[None, :], bounds)
        return X[0] if valid[0] else None
    s = child.sum()
    return child / s if abs(s) > SUM_EPS else None


def elitist_select(pop: Population, n_elite: int) -> np.ndarray:
    """Indices of the ``n_elite`` lowest-fitness members, ties to the lower index."""
    if n_elite > len(pop):
        raise ValueError("n_elite exceeds population size")
    return np.argsort(pop.fitness, kind="stable")[:n_elite]


def evolve_generation(pop: Population, cfg: GaConfig, C, rng: np.random.Generator, workers: int = 1) -> Population:
    C = np.asarray(C, dtype=float)
    bounds = cfg.resolve_bounds(C.shape[0])
    m = len(pop)
    elite = elitist_select(pop, cfg.n_elite)

    fresh = random_chromosomes(cfg.n_random, bounds, rng)
    mut_parents = pop.members[rng.integers(0, m, size=cfg.n_mutants)]
    mutants = mutate_batch(mut_parents, bounds, cfg.mutation_fraction_cap, rng)
    pairs = rng.integers(0, m, size=(cfg.n_crossover, 2))
    children = crossover_batch(pop.members[pairs[:, 0]], pop.members[pairs[:, 1]], rng)

    X, f = _score(np.vstack([fresh, mutants, children]), C, bounds, cfg.fitness_kind, workers)
    return Population(
        members=np.vstack([pop.members[elite], X]),
        fitness=np.concatenate([pop.fitness[elite], f]),
        generation=pop.generation + 1,
    )


def run_ga(C, cfg: GaConfig, workers: int = 1, callback=None) -> GaResult:
    """Run ``cfg.max_iterations`` generations and return the best chromosome ever seen.

    ``history[i]`` holds the best and mean (finite) fitness of generation
    ``i + 1``; generation 0 is the initial population and is not recorded.
    """
    C = validate_covariance(C)
    bounds = cfg.resolve_bounds(C.shape[0])
    cfg = replace(cfg, bounds=bounds)
    rng = np.random.default_rng(cfg.seed)

    pop = init_population(cfg, C, rng, workers)
    i = pop.best_index()
    best, best_f = pop.members[i].copy(), float(pop.fitness[i])
    history: list[GenerationStats] = []
    for _ in range(cfg.max_iterations):
        pop = evolve_generation(pop, cfg, C, rng, workers)
        i = pop.best_index()
        if pop.fitness[i] < best_f:
            best, best_f = pop.members[i].copy(), float(pop.fitness[i])
        history.append(_stats(pop))
        if callback is not None:
            callback(pop)
    return GaResult(best=best, best_fitness=best_f, history=history, population=pop)
