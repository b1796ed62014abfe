"""Price ingestion, returns, sample covariance, and file formats.

Formats
-------
prices CSV       ``date,TICK1,TICK2,...``; ISO dates, one row per day
covariance CSV   header ``asset,TICK1,...``; each row starts with its ticker.
                 Lines starting with ``#`` are comments (run manifests).
report JSON      tickers, weights, sigma, rc_marginal, rc_total,
                 rc_normalized, fitness_marginal, fitness_total, config
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from erc_evo.errors import DataError
from erc_evo.risk import RiskReport, validate_covariance

MISSING = {"", "na", "nan", "null", "none", "#n/a"}
SYMMETRY_TOL = 1e-9


def validate_tickers(tickers) -> list[str]:
    tickers = [str(t).strip() for t in tickers]
    if len(tickers) < 2:
        raise DataError("need at least two assets")
    if any(not t for t in tickers):
        raise DataError("empty ticker symbol")
    seen = set()
    for t in tickers:
        if t in seen:
            raise DataError(f"duplicate ticker {t!r}")
        seen.add(t)
    return tickers


@dataclass
class PriceTable:
    dates: list[dt.date]
    tickers: list[str]
    prices: np.ndarray  # (T, n)
    dropped_rows: int = 0

    @property
    def n(self) -> int:
        return len(self.tickers)


def load_prices_csv(path) -> PriceTable:
    """Read a price table, dropping every date with a missing or non-positive price."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[0].lower() != "date":
        raise DataError(f"{path}: first column must be 'date', got {header[0]!r}")
    tickers = validate_tickers(header[1:])

    all_dates, dates, prices, dropped = [], [], [], 0
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            day = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad date {row[0]!r}") from None
        values = []
        usable = True
        for cell in row[1:]:
            cell = cell.strip()
            if cell.lower() in MISSING:
                usable = False
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric price {cell!r}") from None
            if not math.isfinite(v) or v <= 0:
                usable = False
            values.append(v)
        all_dates.append(day)
        if usable:
            dates.append(day)
            prices.append(values)
        else:
            dropped += 1
    if len(set(all_dates)) != len(all_dates):
        raise DataError(f"{path}: duplicate dates")
    if any(b <= a for a, b in zip(all_dates, all_dates[1:])):
        raise DataError(f"{path}: dates must be strictly increasing")
    if len(dates) < 3:
        raise DataError(f"{path}: only {len(dates)} usable rows, need at least 3")
    return PriceTable(dates, tickers, np.array(prices, dtype=float), dropped)


def compute_returns(prices, kind: str = "simple") -> np.ndarray:
    """Per-period returns of a (T, n) price matrix or a ``PriceTable``."""
    P = prices.prices if isinstance(prices, PriceTable) else np.asarray(prices, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[0] < 2:
        raise DataError("need at least two price rows to form a return")
    if kind == "simple":
        return P[1:] / P[:-1] - 1.0
    if kind == "log":
        return np.log(P[1:] / P[:-1])
    raise ValueError(f"unknown return kind {kind!r}")


def sample_covariance(returns, tickers=None) -> np.ndarray:
    """Unbiased (divisor rows - 1) sample covariance of a (rows, n) return matrix.

    Raises ``DataError`` when a column has zero variance, since downstream
    solvers need strictly positive variances.
    """
    R = np.asarray(returns, dtype=float)
    if R.ndim != 2 or R.shape[0] < 2:
        raise DataError("need at least two return rows")
    C = np.cov(R, rowvar=False, ddof=1)
    C = np.atleast_2d(C)
    C = 0.5 * (C + C.T)
    flat = np.flatnonzero(np.diag(C) <= 0)
    if flat.size:
        names = [tickers[i] for i in flat] if tickers is not None else flat.tolist()
        raise DataError(f"zero-variance assets rejected: {names}")
    try:
        return validate_covariance(C)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_covariance(C, tickers, path, comment: str | None = None) -> None:
    C = np.asarray(C, dtype=float)
    tickers = validate_tickers(tickers)
    if C.shape != (len(tickers), len(tickers)):
        raise DataError("covariance shape does not match tickers")
    with Path(path).open("w", newline="") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["asset", *tickers])
        for t, row in zip(tickers, C):
            w.writerow([t, *(_fmt(v) for v in row)])


def load_covariance(path) -> tuple[np.ndarray, list[str]]:
    """Read a covariance CSV; returns ``(C, tickers)``.

    Rejects non-square bodies, row/column label mismatches and asymmetry
    above ``1e-9`` relative to the largest entry.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if len(rows) < 2:
        raise DataError(f"{path}: no covariance data")
    cols = validate_tickers(rows[0][1:])
    body = rows[1:]
    if len(body) != len(cols) or any(len(r) != len(cols) + 1 for r in body):
        raise DataError(f"{path}: covariance matrix is not square")
    labels = [r[0].strip() for r in body]
    if labels != cols:
        raise DataError(f"{path}: row labels {labels} do not match column labels {cols}")
    try:
        C = np.array([[float(v) for v in r[1:]] for r in body])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if not np.all(np.isfinite(C)):
        raise DataError(f"{path}: non-finite covariance entry")
    scale = np.max(np.abs(C))
    if np.max(np.abs(C - C.T)) > SYMMETRY_TOL * scale:
        raise DataError(f"{path}: covariance matrix is not symmetric")
    C = 0.5 * (C + C.T)
    try:
        C = validate_covariance(C)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    return C, cols


def report_to_dict(report: RiskReport, config: dict | None = None) -> dict:
    out = report.to_dict()
    out["config"] = config if config is not None else {}
    return out


def save_report(report: RiskReport, path, config: dict | None = None) -> str:
    """Write a report as JSON and return the text written."""
    text = json.dumps(report_to_dict(report, config), indent=2, sort_keys=False) + "\n"
    Path(path).write_text(text)
    return text


def load_report(path) -> tuple[RiskReport, dict]:
    data = json.loads(Path(path).read_text())
    missing = {"weights", "sigma", "rc_marginal", "rc_total", "rc_normalized",
               "fitness_marginal", "fitness_total", "config"} - data.keys()
    if missing:
        raise DataError(f"{path}: report lacks fields {sorted(missing)}")
    report = RiskReport(
        weights=np.array(data["weights"], dtype=float),
        sigma=float(data["sigma"]),
        marginal=np.array(data["rc_marginal"], dtype=float),
        total=np.array(data["rc_total"], dtype=float),
        normalized=np.array(data["rc_normalized"], dtype=float),
        fitness_marginal=float(data["fitness_marginal"]),
        fitness_total=float(data["fitness_total"]),
        tickers=data.get("tickers"),
    )
    return report, data["config"]
