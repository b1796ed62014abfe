"""Coordinate-wise +/- epsilon descent on the risk-parity fitness.

From the incumbent ``x`` every asset is nudged up and down by ``eps``
(additively by default, by the factor ``1 +/- eps`` with
``step_mode="multiplicative"``) and clipped to its bounds. Each candidate is
repaired, and the best one replaces ``x`` if it lowers the fitness by more
than ``improvement_tolerance``. Several phases with shrinking ``eps`` run back to
back, each capped at ``max_steps`` accepted moves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from erc_evo.risk import FITNESS_KINDS, Bounds, fitness_batch, repair_batch

STEP_MODES = ("additive", "multiplicative")


@dataclass(frozen=True)
class LsConfig:
    epsilons: tuple[float, ...] = (0.01, 0.001)
    max_steps: int = 500
    improvement_tolerance: float = 1e-12
    bounds: Bounds | None = None
    fitness_kind: str = "marginal"
    step_mode: str = "additive"

    def __post_init__(self):
        if self.step_mode not in STEP_MODES:
            raise ValueError(f"step_mode must be one of {STEP_MODES}")
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or any(e <= 0 for e in eps):
            raise ValueError("epsilons must be non-empty and strictly positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.improvement_tolerance < 0:
            raise ValueError("improvement_tolerance must be non-negative")
        if self.fitness_kind not in FITNESS_KINDS:
            raise ValueError(f"fitness_kind must be one of {FITNESS_KINDS}")
        object.__setattr__(self, "epsilons", eps)

    def resolve_bounds(self, n: int) -> Bounds:
        b = self.bounds if self.bounds is not None else Bounds.uniform(n, 0.0, 1.0)
        if b.n != n:
            raise ValueError(f"bounds cover {b.n} assets, portfolio has {n}")
        return b

    def to_dict(self) -> dict:
        return {
            "epsilons": list(self.epsilons),
            "max_steps": self.max_steps,
            "improvement_tolerance": self.improvement_tolerance,
            "bounds": None if self.bounds is None else self.bounds.to_dict(),
            "fitness_kind": self.fitness_kind,
            "step_mode": self.step_mode,
        }


@dataclass
class LsResult:
    portfolio: np.ndarray
    fitness: float
    steps: list[int] = field(default_factory=list)
    trace: list[float] = field(default_factory=list)

    @property
    def total_steps(self) -> int:
        return sum(self.steps)

    def __iter__(self):
        return iter((self.portfolio, self.steps))


def neighborhood(x, eps: float, bounds: Bounds, step_mode: str = "additive") -> np.ndarray:
    """Repaired +/- eps neighbours of ``x``, scanned as (asset 0 up, asset 0 down, asset 1 up, ...).

    Candidates whose repair fails are dropped, so at most ``2n`` rows come back.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    raw = np.repeat(x[None, :], 2 * n, axis=0)
    idx = np.arange(n)
    if step_mode == "additive":
        up, down = x + eps, x - eps
    elif step_mode == "multiplicative":
        # Cannot move a zero weight or flip a sign.
        up, down = x * (1 + eps), x * (1 - eps)
    else:
        raise ValueError(f"step_mode must be one of {STEP_MODES}")
    raw[2 * idx, idx] = np.clip(up, bounds.lower, bounds.upper)
    raw[2 * idx + 1, idx] = np.clip(down, bounds.lower, bounds.upper)
    X, valid = repair_batch(raw, bounds)
    return X[valid]


def local_search_step(
    x, C, eps: float, bounds: Bounds, fitness_kind: str = "marginal",
    tol: float = 1e-12, current: float | None = None, step_mode: str = "additive",
) -> tuple[np.ndarray, float] | None:
    """Best-improvement move from ``x``; ``None`` when no neighbour is better by more than ``tol``."""
    x = np.asarray(x, dtype=float)
    if current is None:
        current = float(fitness_batch(x[None, :], C, fitness_kind)[0])
    cand = neighborhood(x, eps, bounds, step_mode)
    if cand.shape[0] == 0:
        return None
    f = fitness_batch(cand, C, fitness_kind)
    j = int(np.argmin(f))  # first index wins ties
    if f[j] < current - tol:
        return cand[j], float(f[j])
    return None


def run_local_search(x0, C, cfg: LsConfig) -> LsResult:
    """Run every epsilon phase in order, each starting from the previous incumbent."""
    C = np.asarray(C, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    bounds = cfg.resolve_bounds(x.shape[0])
    fx = float(fitness_batch(x[None, :], C, cfg.fitness_kind)[0])
    steps: list[int] = []
    trace = [fx]
    for eps in cfg.epsilons:
        used = 0
        while used < cfg.max_steps:
            move = local_search_step(x, C, eps, bounds, cfg.fitness_kind, cfg.improvement_tolerance, fx, cfg.step_mode)
            if move is None:
                break
            x, fx = move
            trace.append(fx)
            used += 1
        steps.append(used)
    return LsResult(portfolio=x, fitness=fx, steps=steps, trace=trace)
