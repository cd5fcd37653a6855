"""Accuracy statistics: RMSE, the failure rule, per-method summaries and run aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySeries

FAILURE_THRESHOLD = 0.3  # rad


def compute_rmse(errors) -> float:
    e = np.asarray(errors, dtype=float).ravel()
    if e.size == 0:
        raise EmptySeries("RMSE of an empty series")
    return float(np.sqrt(np.mean(e * e)))


def detect_failure(per_frame_errors, threshold: float = FAILURE_THRESHOLD) -> bool:
    """True when |error| exceeds ``threshold`` on strictly more than half the frames."""
    e = np.abs(np.asarray(per_frame_errors, dtype=float).ravel())
    if e.size == 0:
        raise EmptySeries("failure rule needs at least one frame")
    return bool(2 * int(np.count_nonzero(e > threshold)) > e.size)


@dataclass(frozen=True)
class MethodSummary:
    method: str
    rmse_roll: float
    rmse_pitch: float
    mean_roll: float
    median_roll: float
    min_roll: float
    max_roll: float
    mean_pitch: float
    median_pitch: float
    min_pitch: float
    max_pitch: float
    failure: bool

    FIELDS = (
        "method", "rmse_roll", "rmse_pitch",
        "mean_roll", "median_roll", "min_roll", "max_roll",
        "mean_pitch", "median_pitch", "min_pitch", "max_pitch",
        "failure",
    )

    def row(self) -> list:
        return [getattr(self, f) if f != "failure" else int(self.failure) for f in self.FIELDS]


def summarize(method: str, err_roll, err_pitch, threshold: float = FAILURE_THRESHOLD) -> MethodSummary:
    """Statistics of |error| per axis; a frame counts as failed if either axis exceeds the threshold."""
    ar = np.abs(np.asarray(err_roll, dtype=float))
    ap = np.abs(np.asarray(err_pitch, dtype=float))
    if ar.size == 0:
        raise EmptySeries(f"no frames to summarize for {method}")
    return MethodSummary(
        method=method,
        rmse_roll=compute_rmse(ar),
        rmse_pitch=compute_rmse(ap),
        mean_roll=float(ar.mean()), median_roll=float(np.median(ar)),
        min_roll=float(ar.min()), max_roll=float(ar.max()),
        mean_pitch=float(ap.mean()), median_pitch=float(np.median(ap)),
        min_pitch=float(ap.min()), max_pitch=float(ap.max()),
        failure=detect_failure(np.maximum(ar, ap), threshold),
    )


@dataclass
class RunReport:
    """Per-frame truth and estimates for each method, plus per-method summaries."""

    t: np.ndarray
    truth_roll: np.ndarray
    truth_pitch: np.ndarray
    estimates: dict = field(default_factory=dict)
    summaries: dict = field(default_factory=dict)

    def add(self, method: str, track) -> MethodSummary:
        est = np.asarray(track, dtype=float).reshape(-1, 2)
        self.estimates[method] = est
        summary = summarize(method, est[:, 0] - self.truth_roll, est[:, 1] - self.truth_pitch)
        self.summaries[method] = summary
        return summary

    def frame_header(self) -> list[str]:
        cols = ["t", "truth_roll", "truth_pitch"]
        for m in self.estimates:
            cols += [f"{m}_roll", f"{m}_pitch", f"{m}_err_roll", f"{m}_err_pitch"]
        return cols

    def frame_rows(self):
        for k in range(len(self.t)):
            row = [self.t[k], self.truth_roll[k], self.truth_pitch[k]]
            for est in self.estimates.values():
                r, p = est[k]
                row += [r, p, r - self.truth_roll[k], p - self.truth_pitch[k]]
            yield row


def _mean(v: np.ndarray) -> float:
    # offsets from the smallest value keep identical runs exact
    return float(v[0] + math.fsum(v - v[0]) / len(v))


AGGREGATE_METRICS = ("rmse_roll", "rmse_pitch", "mean_roll", "mean_pitch")
AGGREGATE_FIELDS = ("method", "metric", "n_runs", "mean", "median", "min", "max", "q1", "q3", "failures")


def aggregate(summaries: list[list[dict]]) -> list[list]:
    """Per method and metric: mean/median/min/max and quartiles across runs.

    ``summaries`` holds one list of summary rows (dicts keyed by
    MethodSummary.FIELDS) per run. Output is sorted, so run order is irrelevant.
    """
    by_method: dict[str, list[dict]] = {}
    for run in summaries:
        for row in run:
            by_method.setdefault(row["method"], []).append(row)
    out = []
    for method in sorted(by_method):
        rows = by_method[method]
        failures = sum(int(float(r["failure"])) for r in rows)
        for metric in AGGREGATE_METRICS:
            v = np.sort(np.array([float(r[metric]) for r in rows]))
            out.append([
                method, metric, len(v), _mean(v), float(np.median(v)),
                float(v[0]), float(v[-1]),
                float(np.percentile(v, 25)), float(np.percentile(v, 75)), failures,
            ])
    return out
