"""Portfolio risk calculus: volatility, risk contributions, fitness, repair.

Conventions
-----------
``x`` is a weight vector of length n, ``C`` the n x n covariance matrix.

* risk            sigma(x) = sqrt(x' C x)
* marginal        d_i = (C x)_i / sigma(x)           (sum_i x_i d_i = sigma)
* total           t_i = x_i (C x)_i                  (sum_i t_i = x' C x)
* normalized      d_i / sum_j d_j
* fitness         sum_i (d_i - mean(d))^2            ("marginal", the default)
                  sum_ij (t_i - t_j)^2               ("total")
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from erc_evo.errors import DegenerateRiskError, InfeasibleBoundsError

FitnessKind = Literal["marginal", "total"]
FITNESS_KINDS: tuple[str, ...] = ("marginal", "total")

SUM_EPS = 1e-8
FEAS_TOL = 1e-9
REPAIR_ROUNDS = 100
# Rows per evaluation block. Fixed so that results never depend on how many
# worker threads share the blocks.
EVAL_CHUNK = 64


def validate_covariance(C, *, require_pd: bool = False) -> np.ndarray:
    """Check covariance invariants and return ``C`` as a float array.

    Symmetry is required to 1e-12 relative to the largest entry, every
    variance must be positive and the smallest eigenvalue must be at least
    ``-1e-10`` times the largest. With ``require_pd`` the smallest eigenvalue
    has to be strictly positive instead.
    """
    C = np.array(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"covariance must be square, got shape {C.shape}")
    if C.shape[0] < 1:
        raise ValueError("covariance matrix is empty")
    if not np.all(np.isfinite(C)):
        raise ValueError("covariance contains non-finite entries")
    scale = np.max(np.abs(C))
    if np.max(np.abs(C - C.T)) > 1e-12 * scale:
        raise ValueError("covariance matrix is not symmetric")
    if np.any(np.diag(C) <= 0):
        bad = np.flatnonzero(np.diag(C) <= 0).tolist()
        raise ValueError(f"non-positive variance on diagonal at index {bad}")
    C = 0.5 * (C + C.T)
    eig = np.linalg.eigvalsh(C)
    if eig[0] < -1e-10 * eig[-1]:
        raise ValueError(f"covariance is not positive semidefinite (min eigenvalue {eig[0]:.3e})")
    if require_pd and eig[0] <= 0:
        raise ValueError(f"covariance is not positive definite (min eigenvalue {eig[0]:.3e})")
    return C


@dataclass(frozen=True)
class Bounds:
    """Per-asset box constraints ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper bounds must be vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite")
        if np.any(lo >= hi):
            raise InfeasibleBoundsError("every lower bound must be strictly below its upper bound")
        if lo.sum() > 1 + FEAS_TOL or hi.sum() < 1 - FEAS_TOL:
            raise InfeasibleBoundsError(
                f"no fully invested portfolio fits: sum(lower)={lo.sum():.6g}, sum(upper)={hi.sum():.6g}"
            )
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, n: int, lower: float = 0.0, upper: float = 1.0) -> "Bounds":
        return cls(np.full(n, float(lower)), np.full(n, float(upper)))

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def _check_dims(x, C) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    C = np.asarray(C, dtype=float)
    if x.ndim != 1 or C.shape != (x.shape[0], x.shape[0]):
        raise ValueError(f"dimension mismatch: weights {x.shape} vs covariance {C.shape}")
    return x, C


def _variance(x: np.ndarray, Cx: np.ndarray) -> float:
    var = float(x @ Cx)
    if var < -1e-12:
        raise ValueError(f"negative portfolio variance {var:.3e}; covariance is not PSD")
    return max(var, 0.0)


def portfolio_risk(x, C) -> float:
    """Portfolio standard deviation ``sqrt(x' C x)``."""
    x, C = _check_dims(x, C)
    return float(np.sqrt(_variance(x, C @ x)))


def marginal_contributions(x, C) -> np.ndarray:
    """Gradient of the portfolio volatility, ``C x / sigma(x)``."""
    x, C = _check_dims(x, C)
    Cx = C @ x
    sigma = np.sqrt(_variance(x, Cx))
    if sigma <= 0:
        raise DegenerateRiskError("portfolio has zero risk; marginal contributions undefined")
    return Cx / sigma


def total_contributions(x, C) -> np.ndarray:
    """Per-asset variance contributions ``x_i (C x)_i``."""
    x, C = _check_dims(x, C)
    return x * (C @ x)


def normalized_contributions(x, C) -> np.ndarray:
    """Marginal contributions scaled to sum to one."""
    d = marginal_contributions(x, C)
    s = d.sum()
    if abs(s) <= 1e-12:
        raise DegenerateRiskError("marginal contributions sum to zero; cannot normalize")
    return d / s


def fitness_marginal(x, C) -> float:
    """Squared spread of the marginal contributions around their mean."""
    d = marginal_contributions(x, C)
    return float(np.sum((d - d.mean()) ** 2))


def fitness_total(x, C) -> float:
    """Sum over all ordered pairs of squared differences of total contributions.

    Evaluated through the identity ``sum_ij (t_i - t_j)^2 = 2n sum_i (t_i - mean t)^2``.
    """
    t = total_contributions(x, C)
    return float(2 * t.size * np.sum((t - t.mean()) ** 2))


def fitness(x, C, kind: FitnessKind = "marginal") -> float:
    if kind == "marginal":
        return fitness_marginal(x, C)
    if kind == "total":
        return fitness_total(x, C)
    raise ValueError(f"unknown fitness kind {kind!r}; expected one of {FITNESS_KINDS}")


def _fitness_block(X: np.ndarray, C: np.ndarray, kind: str) -> np.ndarray:
    CX = X @ C
    var = np.einsum("ij,ij->i", X, CX)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "marginal":
            D = CX / np.sqrt(var)[:, None]
            f = np.sum((D - D.mean(axis=1, keepdims=True)) ** 2, axis=1)
        else:
            T = X * CX
            f = 2 * X.shape[1] * np.sum((T - T.mean(axis=1, keepdims=True)) ** 2, axis=1)
    bad = ~np.isfinite(f) | (var <= 0) | ~np.all(np.isfinite(X), axis=1)
    f[bad] = np.inf
    return f


def fitness_batch(X, C, kind: FitnessKind = "marginal", workers: int = 1) -> np.ndarray:
    """Fitness of every row of ``X``; degenerate rows get ``inf``.

    Rows are evaluated in fixed blocks of ``EVAL_CHUNK`` so the output is
    bit-identical for any ``workers`` count.
    """
    if kind not in FITNESS_KINDS:
        raise ValueError(f"unknown fitness kind {kind!r}; expected one of {FITNESS_KINDS}")
    X = np.asarray(X, dtype=float)
    C = np.asarray(C, dtype=float)
    starts = range(0, X.shape[0], EVAL_CHUNK)
    if workers > 1 and X.shape[0] > EVAL_CHUNK:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: _fitness_block(X[s : s + EVAL_CHUNK], C, kind), starts))
    else:
        parts = [_fitness_block(X[s : s + EVAL_CHUNK], C, kind) for s in starts]
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)


def repair_batch(W, bounds: Bounds) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise repair: normalize to sum one, then clip/renormalize into bounds.

    Returns the repaired rows and a boolean validity mask. Invalid rows
    (sum too close to zero, or bounds not reached within ``REPAIR_ROUNDS``)
    are returned unchanged.
    """
    W = np.array(W, dtype=float, ndmin=2)
    lo, hi = bounds.lower, bounds.upper
    if W.shape[1] != lo.shape[0]:
        raise ValueError(f"weights have {W.shape[1]} assets, bounds have {lo.shape[0]}")
    out = W.copy()
    s = W.sum(axis=1)
    ok = np.isfinite(s) & (np.abs(s) > SUM_EPS)
    X = W[ok] / s[ok, None]

    def feasible(X):
        return (
            (np.abs(X.sum(axis=1) - 1) <= FEAS_TOL)
            & np.all(X >= lo - FEAS_TOL, axis=1)
            & np.all(X <= hi + FEAS_TOL, axis=1)
        )

    done = feasible(X)
    alive = np.ones(X.shape[0], dtype=bool)
    for _ in range(REPAIR_ROUNDS):
        todo = alive & ~done
        if not todo.any():
            break
        Y = np.clip(X[todo], lo, hi)
        ys = Y.sum(axis=1)
        good = np.abs(ys) > SUM_EPS
        Y[good] /= ys[good, None]
        idx = np.flatnonzero(todo)
        alive[idx[~good]] = False
        X[idx[good]] = Y[good]
        done[idx[good]] = feasible(Y[good])

    valid_sub = done & alive
    rows = np.flatnonzero(ok)
    out[rows[valid_sub]] = X[valid_sub]
    valid = np.zeros(W.shape[0], dtype=bool)
    valid[rows[valid_sub]] = True
    return out, valid


def repair_normalize(w, bounds: Bounds) -> np.ndarray | None:
    """Repair one raw weight vector; ``None`` when it cannot be made feasible."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ValueError("repair_normalize expects a single weight vector")
    X, valid = repair_batch(w[None, :], bounds)
    return X[0] if valid[0] else None


@dataclass
class RiskReport:
    weights: np.ndarray
    sigma: float
    marginal: np.ndarray
    total: np.ndarray
    normalized: np.ndarray
    fitness_marginal: float
    fitness_total: float
    tickers: list[str] | None = field(default=None)

    def to_dict(self) -> dict:
        return {
            "tickers": list(self.tickers) if self.tickers is not None else None,
            "weights": self.weights.tolist(),
            "sigma": self.sigma,
            "rc_marginal": self.marginal.tolist(),
            "rc_total": self.total.tolist(),
            "rc_normalized": self.normalized.tolist(),
            "fitness_marginal": self.fitness_marginal,
            "fitness_total": self.fitness_total,
        }


def risk_report(x, C, tickers=None) -> RiskReport:
    x, C = _check_dims(x, C)
    d = marginal_contributions(x, C)
    t = total_contributions(x, C)
    return RiskReport(
        weights=x.copy(),
        sigma=portfolio_risk(x, C),
        marginal=d,
        total=t,
        normalized=normalized_contributions(x, C),
        fitness_marginal=float(np.sum((d - d.mean()) ** 2)),
        fitness_total=float(2 * t.size * np.sum((t - t.mean()) ** 2)),
        tickers=list(tickers) if tickers is not None else None,
    )
