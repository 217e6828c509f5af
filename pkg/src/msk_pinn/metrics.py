"""Data-fit losses, total-loss assembly, and evaluation metrics."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class MetricError(Exception):
    pass


class UndefinedCorrelationError(MetricError):
    """Pearson correlation is undefined for a constant sequence."""


@dataclass(frozen=True)
class LossWeights:
    force: float = 1.0
    angle: float = 1.0
    physics: float = 1.0

    def __post_init__(self):
        for name, w in (("force", self.force), ("angle", self.angle),
                        ("physics", self.physics)):
            if w < 0:
                raise ValueError(f"loss weight '{name}' must be >= 0, got {w}")


@dataclass(frozen=True)
class LossBreakdown:
    force: float
    angle: float
    physics: float
    weights: LossWeights
    total: float

    @classmethod
    def combine(cls, force: float, angle: float, physics: float,
                weights: LossWeights = LossWeights()) -> "LossBreakdown":
        for name, v in (("force", force), ("angle", angle), ("physics", physics)):
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"loss component '{name}' must be finite and >= 0, got {v}")
        total = (weights.force * force + weights.angle * angle
                 + weights.physics * physics)
        return cls(force, angle, physics, weights, total)


def total_loss(force: float, angle: float, physics: float,
               weights: LossWeights = LossWeights()) -> LossBreakdown:
    """Weighted sum of the three loss terms; unit weights give the plain sum."""
    return LossBreakdown.combine(force, angle, physics, weights)


def mse_force(actual, predicted) -> float:
    """(1/T) * sum_t sum_n (F_t^n - Fhat_t^n)^2 — muscles are summed, not averaged."""
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape or a.ndim != 2:
        raise MetricError(f"mse_force: shapes {a.shape} and {p.shape} must match as [T, N]")
    return float(np.sum((a - p) ** 2) / a.shape[0])


def mse_angle(actual, predicted) -> float:
    """(1/T) * sum_t (theta_t - thetahat_t)^2."""
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape or a.ndim != 1:
        raise MetricError(f"mse_angle: shapes {a.shape} and {p.shape} must match as [T]")
    return float(np.mean((a - p) ** 2))


def rmse(actual, predicted) -> float:
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape or a.size == 0:
        raise MetricError(f"rmse: need equal non-empty sequences, got {a.shape}/{p.shape}")
    return float(np.sqrt(np.mean((a - p) ** 2)))


def pearson_cc(actual, predicted) -> float:
    """Pearson's correlation coefficient between two sequences."""
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape or a.ndim != 1 or a.size < 2:
        raise MetricError(f"pearson_cc: need equal 1-D sequences of length >= 2")
    da = a - a.mean()
    dp = p - p.mean()
    denom = np.sqrt(np.sum(da**2)) * np.sqrt(np.sum(dp**2))
    if denom == 0.0:
        raise UndefinedCorrelationError(
            "correlation is undefined for a constant sequence"
        )
    return float(np.sum(da * dp) / denom)


@dataclass(frozen=True)
class EvalReport:
    """Per-output evaluation over a test split.

    `cc` entries are NaN where the correlation was undefined (constant
    sequence); RMSE is in physical units, nrmse is RMSE divided by the
    ground-truth range on the split.
    """

    variables: tuple[str, ...]
    rmse: tuple[float, ...]
    cc: tuple[float, ...]
    nrmse: tuple[float, ...]
    seed: int
    split: str

    def __post_init__(self):
        n = len(self.variables)
        if not (len(self.rmse) == len(self.cc) == len(self.nrmse) == n):
            raise ValueError("EvalReport columns must have equal length")
        for r, c, nr in zip(self.rmse, self.cc, self.nrmse):
            if r < 0 or nr < 0:
                raise ValueError("RMSE and normalized RMSE must be >= 0")
            if not np.isnan(c) and not -1.0 <= c <= 1.0 + 1e-12:
                raise ValueError(f"correlation {c} outside [-1, 1]")

    @property
    def mean_rmse(self) -> float:
        return float(np.mean(self.rmse))

    @property
    def mean_nrmse(self) -> float:
        return float(np.mean(self.nrmse))


def evaluate_outputs(actual, predicted, variables, seed: int, split: str) -> EvalReport:
    """Pooled per-output metrics: actual/predicted are [S, V] arrays with one
    column per output variable."""
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape or a.ndim != 2 or a.shape[1] != len(variables):
        raise MetricError(
            f"evaluate_outputs: shapes {a.shape}/{p.shape} with {len(variables)} variables"
        )
    rmses, ccs, nrmses = [], [], []
    for j in range(a.shape[1]):
        r = rmse(a[:, j], p[:, j])
        try:
            c = pearson_cc(a[:, j], p[:, j])
        except UndefinedCorrelationError:
            c = float("nan")
        spread = float(a[:, j].max() - a[:, j].min())
        rmses.append(r)
        ccs.append(c)
        nrmses.append(r / spread if spread > 0 else float("inf"))
    return EvalReport(tuple(variables), tuple(rmses), tuple(ccs), tuple(nrmses),
                      seed=seed, split=split)


def write_report_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variable", "rmse", "cc", "nrmse"])
        for var, r, c, nr in zip(report.variables, report.rmse, report.cc, report.nrmse):
            writer.writerow([var, repr(r), "nan" if np.isnan(c) else repr(c), repr(nr)])


def format_report_table(report: EvalReport) -> str:
    """Aligned console table for an EvalReport."""
    rows = [("variable", "rmse", "cc", "nrmse")]
    for var, r, c, nr in zip(report.variables, report.rmse, report.cc, report.nrmse):
        rows.append((var, f"{r:.4f}", "nan" if np.isnan(c) else f"{c:.4f}", f"{nr:.4f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in rows]
    return "\n".join(lines)
