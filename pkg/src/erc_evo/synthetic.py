"""Seeded synthetic covariance matrices with a daily-equity flavour.

Returns follow a factor model: one market factor, a handful of sector
factors and idiosyncratic noise, at daily volatility levels of roughly
1-3 %. The matrix is built analytically (no sampling), so it is exactly
positive definite.
"""

from __future__ import annotations

import numpy as np


def synthetic_covariance(n: int, seed: int = 0, n_sectors: int = 4) -> np.ndarray:
    if n < 2:
        raise ValueError("need at least two assets")
    rng = np.random.default_rng(seed)
    market_vol = 0.010
    sector_vol = 0.006
    beta = rng.uniform(0.6, 1.4, n)
    sector = rng.integers(0, n_sectors, n)
    loading = rng.uniform(0.5, 1.2, n)
    idio = rng.uniform(0.008, 0.020, n)

    B = np.zeros((n, 1 + n_sectors))
    B[:, 0] = beta * market_vol
    B[np.arange(n), 1 + sector] = loading * sector_vol
    C = B @ B.T + np.diag(idio**2)
    return 0.5 * (C + C.T)


def synthetic_tickers(n: int) -> list[str]:
    width = max(2, len(str(n)))
    return [f"A{i + 1:0{width}d}" for i in range(n)]


def random_spd(n: int, rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
    """Random well-conditioned SPD matrix: ``A A' / n + diag`` scaled by ``scale``."""
    A = rng.standard_normal((n, n))
    C = A @ A.T / n + np.diag(rng.uniform(0.2, 1.0, n))
    return scale * 0.5 * (C + C.T)


FIXTURE_SEED = 2024


def fixture_path(n: int = 30):
    """Path of the shipped synthetic covariance fixture (``data/synthetic_cov_<n>.csv``)."""
    from importlib.resources import files

    return files("erc_evo") / "data" / f"synthetic_cov_{n}.csv"
