"""Repeated-run experiments: convergence bands and GA-vs-random seeding.

Per-run seeds come from ``derive_seed(base_seed, run_index, stream)``, which
hashes the triple through ``numpy.random.SeedSequence`` into one 64-bit
integer. Stream 0 seeds the GA of a run, stream 1 the random start of the
same run. Runs may execute on several threads; results are always collected
in run-index order.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from erc_evo.evolution import GaConfig, random_chromosomes, run_ga
from erc_evo.local_search import LsConfig, LsResult, run_local_search
from erc_evo.risk import Bounds, repair_normalize, validate_covariance
from erc_evo.stats import WelchResult, quantile, welch_t_test

BAND_COLUMNS = ("generation", "q05_best", "mean_best", "q95_best", "q05_mean", "mean_mean", "q95_mean")


def derive_seed(base_seed: int, run_index: int, stream: int = 0) -> int:
    state = np.random.SeedSequence([int(base_seed), int(run_index), int(stream)]).generate_state(1, np.uint64)
    return int(state[0])


def _map_ordered(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


@dataclass
class StudyResult:
    runs: int
    generations: int
    best_trajectories: np.ndarray  # (runs, generations)
    mean_trajectories: np.ndarray
    q05_best: np.ndarray
    mean_best: np.ndarray
    q95_best: np.ndarray
    q05_mean: np.ndarray
    mean_mean: np.ndarray
    q95_mean: np.ndarray
    seeds: list[int]
    final_fitness: np.ndarray  # after local search, one per run

    def band_rows(self):
        for g in range(self.generations):
            yield (
                g + 1,
                self.q05_best[g], self.mean_best[g], self.q95_best[g],
                self.q05_mean[g], self.mean_mean[g], self.q95_mean[g],
            )

    def to_csv(self, path, comment: str | None = None) -> None:
        with Path(path).open("w", newline="") as fh:
            if comment:
                for line in comment.splitlines():
                    fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BAND_COLUMNS)
            for row in self.band_rows():
                w.writerow([row[0], *(format(float(v), ".17g") for v in row[1:])])


def _bands(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    q05 = np.array([quantile(col, 0.05) for col in M.T])
    q95 = np.array([quantile(col, 0.95) for col in M.T])
    return q05, M.mean(axis=0), q95


def run_study(C, ga_cfg: GaConfig, ls_cfg: LsConfig | None, runs: int, base_seed: int = 0,
              workers: int = 1) -> StudyResult:
    """``runs`` independent GA (+ optional local search) runs with 5/95 % bands per generation."""
    if runs < 2:
        raise ValueError("a study needs at least two runs")
    C = validate_covariance(C)
    seeds = [derive_seed(base_seed, i) for i in range(runs)]

    def one(i):
        try:
            res = run_ga(C, replace(ga_cfg, seed=seeds[i]))
            final = res.best_fitness
            if ls_cfg is not None:
                final = run_local_search(res.best, C, ls_cfg).fitness
        except Exception as exc:
            raise RuntimeError(f"study run {i} (seed {seeds[i]}) failed: {exc}") from exc
        return res, final

    out = _map_ordered(one, range(runs), workers)
    best = np.array([[s.best_fitness for s in r.history] for r, _ in out])
    mean = np.array([[s.mean_fitness for s in r.history] for r, _ in out])
    q05b, mb, q95b = _bands(best)
    q05m, mm, q95m = _bands(mean)
    return StudyResult(
        runs=runs, generations=best.shape[1],
        best_trajectories=best, mean_trajectories=mean,
        q05_best=q05b, mean_best=mb, q95_best=q95b,
        q05_mean=q05m, mean_mean=mm, q95_mean=q95m,
        seeds=seeds, final_fitness=np.array([f for _, f in out]),
    )


def random_start(bounds: Bounds, rng: np.random.Generator) -> np.ndarray:
    """Feasible start drawn like a GA chromosome: uniform genes, then repair."""
    while True:
        x = repair_normalize(random_chromosomes(1, bounds, rng)[0], bounds)
        if x is not None:
            return x


def random_multistart(C, ls_cfg: LsConfig, runs: int, base_seed: int = 0, workers: int = 1) -> list[LsResult]:
    """Local search from ``runs`` independent random starts."""
    C = np.asarray(C, dtype=float)
    bounds = ls_cfg.resolve_bounds(C.shape[0])

    def one(i):
        rng = np.random.default_rng(derive_seed(base_seed, i, stream=1))
        return run_local_search(random_start(bounds, rng), C, ls_cfg)

    return _map_ordered(one, range(runs), workers)


@dataclass
class CompareResult:
    welch: WelchResult
    ga_steps: list[int]
    random_steps: list[int]
    ga_fitness: list[float]
    random_fitness: list[float]
    max_weight_gap: float
    agree: bool

    def to_dict(self) -> dict:
        return {
            "welch": self.welch.to_dict(),
            "ga_steps": self.ga_steps,
            "random_steps": self.random_steps,
            "ga_fitness": self.ga_fitness,
            "random_fitness": self.random_fitness,
            "max_weight_gap": self.max_weight_gap,
            "agree": self.agree,
        }


def compare_methods(C, ga_cfg: GaConfig, ls_cfg: LsConfig, runs: int, base_seed: int = 0,
                    workers: int = 1, allow_short: bool = False, agree_tol: float = 1e-3) -> CompareResult:
    """GA-seeded vs random-start local search; Welch test on local-search step counts.

    Run ``i`` seeds its GA with ``derive_seed(base_seed, i, 0)`` and its random
    start with ``derive_seed(base_seed, i, 1)``.
    """
    C = validate_covariance(C)
    n = C.shape[0]
    bounds = ga_cfg.resolve_bounds(n)
    if not allow_short and np.any(bounds.lower < 0):
        raise ValueError("compare_methods is defined for long-only bounds; pass allow_short=True to override")
    ga_cfg = replace(ga_cfg, bounds=bounds)
    ls_cfg = replace(ls_cfg, bounds=bounds, fitness_kind=ga_cfg.fitness_kind)

    def one(i):
        ga = run_ga(C, replace(ga_cfg, seed=derive_seed(base_seed, i, 0)))
        seeded = run_local_search(ga.best, C, ls_cfg)
        rng = np.random.default_rng(derive_seed(base_seed, i, 1))
        rand = run_local_search(random_start(bounds, rng), C, ls_cfg)
        return seeded, rand

    out = _map_ordered(one, range(runs), workers)
    finals = np.array([r.portfolio for pair in out for r in pair])
    gap = float(np.max(np.abs(finals - finals[0])))
    ga_steps = [s.total_steps for s, _ in out]
    rnd_steps = [r.total_steps for _, r in out]
    return CompareResult(
        welch=welch_t_test(ga_steps, rnd_steps),
        ga_steps=ga_steps,
        random_steps=rnd_steps,
        ga_fitness=[s.fitness for s, _ in out],
        random_fitness=[r.fitness for _, r in out],
        max_weight_gap=gap,
        agree=gap <= agree_tol,
    )
