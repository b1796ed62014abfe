"""Reference solvers used as baselines and as ground truth for the heuristics.

* ``solve_longonly_barrier``  min x'Cx - c sum ln x_i, x > 0, by cyclical
  coordinate descent. Stationarity gives x_i (Cx)_i = c/2 for every i, i.e.
  equal total risk contributions.
* ``solve_orthant``           same problem inside the orthant beta_i x_i > 0,
  reduced to the long-only case through C -> D C D with D = diag(beta).
* ``enumerate_orthants``      all 2^n orthant solutions.
* ``mvp_solve``               long-only minimum-variance portfolio by
  projected gradient descent on the simplex.
* ``equal_weight``            the 1/N portfolio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from erc_evo.errors import ConvergenceError, GuardError
from erc_evo.risk import SUM_EPS, validate_covariance


def _coordinate_root(b: float, cii: float, c: float) -> float:
    # Positive root of 2*cii*x^2 + 2*b*x - c = 0. The two algebraically equal
    # forms avoid cancellation for either sign of b.
    disc = np.sqrt(b * b + 2.0 * cii * c)
    if b <= 0:
        return (disc - b) / (2.0 * cii)
    return c / (b + disc)


def solve_longonly_barrier(C, c: float = 1.0, tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """Minimize ``x'Cx - c * sum(log x)`` over ``x > 0``.

    Each sweep sets, for i = 0..n-1,
    ``x_i <- (-b_i + sqrt(b_i^2 + 2 C_ii c)) / (2 C_ii)`` with
    ``b_i = sum_{j != i} C_ij x_j``, which zeroes the i-th partial derivative
    ``2 (C x)_i - c / x_i``. Stops when a full sweep moves no coordinate by
    ``tol`` or more.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` sweeps are not enough.
    """
    if c <= 0:
        raise ValueError("barrier constant c must be positive")
    C = validate_covariance(C, require_pd=True)
    n = C.shape[0]
    diag = np.diag(C).copy()
    x = np.sqrt(c / (2.0 * diag))
    Cx = C @ x
    for _ in range(max_iter):
        delta = 0.0
        for i in range(n):
            b = Cx[i] - diag[i] * x[i]
            xi = _coordinate_root(b, diag[i], c)
            step = xi - x[i]
            if step != 0.0:
                Cx += C[:, i] * step
                x[i] = xi
                delta = max(delta, abs(step))
        if delta < tol:
            return x
    raise ConvergenceError(f"barrier coordinate descent did not converge in {max_iter} sweeps")


@dataclass
class OrthantSolution:
    beta: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray | None
    barrier_constant: float

    @property
    def normalizable(self) -> bool:
        return self.normalized is not None

    @property
    def signature(self) -> str:
        return signature_to_str(self.beta)

    def to_dict(self) -> dict:
        return {
            "signature": self.signature,
            "beta": self.beta.astype(int).tolist(),
            "raw": self.raw.tolist(),
            "normalizable": self.normalizable,
            "normalized": None if self.normalized is None else self.normalized.tolist(),
            "barrier_constant": self.barrier_constant,
        }


def parse_signature(text: str) -> np.ndarray:
    """``"++-"`` -> ``[1, 1, -1]``."""
    if not text or any(ch not in "+-" for ch in text):
        raise ValueError(f"orthant signature must be a non-empty string of '+'/'-', got {text!r}")
    return np.array([1.0 if ch == "+" else -1.0 for ch in text])


def signature_to_str(beta) -> str:
    return "".join("+" if b > 0 else "-" for b in np.asarray(beta))


def solve_orthant(C, beta, c: float = 1.0, tol: float = 1e-12, max_iter: int = 10_000) -> OrthantSolution:
    """Barrier solution restricted to the orthant ``beta_i x_i > 0``.

    The raw vector is normalized only when its sum exceeds ``1e-8``;
    otherwise ``normalized`` is ``None``.
    """
    beta = np.asarray(beta, dtype=float)
    C = np.asarray(C, dtype=float)
    if beta.ndim != 1 or beta.shape[0] != C.shape[0]:
        raise ValueError(f"orthant signature has length {beta.shape[0]}, covariance has {C.shape[0]}")
    if not np.all(np.abs(beta) == 1):
        raise ValueError("orthant signature entries must be -1 or +1")
    xh = solve_longonly_barrier(beta[:, None] * C * beta[None, :], c, tol, max_iter)
    raw = beta * xh
    s = raw.sum()
    normalized = raw / s if s > SUM_EPS else None
    return OrthantSolution(beta=beta, raw=raw, normalized=normalized, barrier_constant=float(c))


def orthant_signatures(n: int):
    """Signatures in binary counting order; asset 0 is the most significant bit, 0 -> '+'."""
    for k in range(2**n):
        yield np.array([-1.0 if (k >> (n - 1 - i)) & 1 else 1.0 for i in range(n)])


def enumerate_orthants(C, c: float = 1.0, n_limit: int = 20) -> list[OrthantSolution]:
    C = validate_covariance(C, require_pd=True)
    n = C.shape[0]
    if n > n_limit:
        raise GuardError(f"refusing to enumerate 2^{n} orthants (limit n <= {n_limit})")
    return [solve_orthant(C, beta, c) for beta in orthant_signatures(n)]


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum x = 1}`` (sort-based threshold)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def largest_eigenvalue(C, iters: int = 1000, tol: float = 1e-12) -> float:
    """Power-iteration estimate of the largest eigenvalue of a PSD matrix."""
    C = np.asarray(C, dtype=float)
    v = np.ones(C.shape[0]) / np.sqrt(C.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = C @ v
        lam_new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam


def mvp_solve(C, tol: float = 1e-10, max_iter: int = 50_000) -> np.ndarray:
    """Long-only minimum-variance portfolio.

    Projected gradient on the simplex with step ``1 / (2 lambda_max)``,
    ``lambda_max`` from power iteration. Converged once no weight moves by
    ``tol`` or more in one step.
    """
    C = validate_covariance(C, require_pd=True)
    n = C.shape[0]
    # Power iteration approaches lambda_max from below; the 1.01 margin keeps
    # the step under 1/L.
    step = 1.0 / (2.0 * 1.01 * largest_eigenvalue(C))
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        x_new = project_simplex(x - step * 2.0 * (C @ x))
        if np.max(np.abs(x_new - x)) < tol:
            return x_new
        x = x_new
    raise ConvergenceError(f"projected gradient did not converge in {max_iter} iterations")


def equal_weight(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one asset")
    return np.full(n, 1.0 / n)
