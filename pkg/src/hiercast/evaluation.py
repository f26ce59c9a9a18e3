"""Probabilistic forecast evaluation: calibration, coverage, confusion,
group summaries, and the serializable report container."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

REPORT_SCHEMA_VERSION = 1


@dataclass
class CalibrationBin:
    lo: float
    hi: float
    mean_predicted: float  # nan when empty
    frequency: float       # nan when empty
    count: int


def calibration_bins(forecast_probs, outcomes, n_bins: int = 10):
    """Bin the probability scale; per bin report mean forecast, empirical
    event frequency and count.  Empty bins carry nan frequencies."""
    probs = np.asarray(forecast_probs, dtype=float)
    outs = np.asarray(outcomes, dtype=float)
    if probs.shape != outs.shape:
        raise ValueError("forecasts and outcomes must align")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.clip(np.digitize(probs, edges[1:-1]), 0, n_bins - 1)
    bins = []
    for b in range(n_bins):
        mask = idx == b
        count = int(mask.sum())
        if count:
            bins.append(CalibrationBin(edges[b], edges[b + 1],
                                       float(probs[mask].mean()),
                                       float(outs[mask].mean()), count))
        else:
            bins.append(CalibrationBin(edges[b], edges[b + 1],
                                       float("nan"), float("nan"), 0))
    return bins


def coverage_curve(dists, outcomes, levels):
    """Empirical coverage of central predictive intervals at each level."""
    levels = np.asarray(levels, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    hits = np.zeros(levels.shape, dtype=float)
    for dist, y in zip(dists, outcomes):
        for j, level in enumerate(levels):
            half = 0.5 * (1.0 - level)
            lo = dist.quantile(half)
            hi = dist.quantile(1.0 - half)
            hits[j] += float(lo <= y <= hi)
    return hits / len(outcomes)


def coverage_from_quantiles(lo, hi, outcomes):
    """Coverage when interval endpoints are precomputed arrays."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    y = np.asarray(outcomes, float)
    return float(np.mean((y >= lo) & (y <= hi)))


def confusion_matrix(point_forecasts, outcomes):
    """2x2 proportions over (forecast nonzero) x (outcome nonzero).

    Layout: rows are outcomes (y > 0, y == 0), columns are forecasts
    (f > 0, f == 0).  Entries sum to 1.
    """
    f = np.asarray(point_forecasts, dtype=float) > 0
    y = np.asarray(outcomes, dtype=float) > 0
    n = f.size
    if n == 0:
        raise ValueError("empty inputs")
    return np.array([
        [np.sum(y & f), np.sum(y & ~f)],
        [np.sum(~y & f), np.sum(~y & ~f)],
    ], dtype=float) / n


def summarize_group(values):
    """(median, 25th, 75th percentile) with linear interpolation; nan-safe."""
    arr = np.asarray(values, dtype=float)
    arr = arr[~np.isnan(arr)]
    if arr.size == 0:
        return (float("nan"),) * 3
    med, p25, p75 = np.percentile(arr, [50, 25, 75])
    return float(med), float(p25), float(p75)


def auc_score(probs, outcomes) -> float:
    """Rank-based AUC (Mann-Whitney), ties shared."""
    probs = np.asarray(probs, dtype=float)
    outs = np.asarray(outcomes, dtype=float) > 0
    n_pos = int(outs.sum())
    n_neg = outs.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    order = np.argsort(probs, kind="mergesort")
    ranks = np.empty(probs.size, dtype=float)
    sorted_probs = probs[order]
    i = 0
    r = 1
    while i < probs.size:
        j = i
        while j + 1 < probs.size and sorted_probs[j + 1] == sorted_probs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (r + r + (j - i))
        r += j - i + 1
        i = j + 1
    return float((ranks[outs].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def f1_score(probs, outcomes, threshold: float = 0.5) -> float:
    pred = np.asarray(probs, dtype=float) >= threshold
    outs = np.asarray(outcomes, dtype=float) > 0
    tp = float(np.sum(pred & outs))
    fp = float(np.sum(pred & ~outs))
    fn = float(np.sum(~pred & outs))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def mse_score(probs, outcomes) -> float:
    probs = np.asarray(probs, dtype=float)
    outs = np.asarray(outcomes, dtype=float)
    return float(np.mean((probs - outs) ** 2))


@dataclass
class EvaluationReport:
    """Collected run evaluation; serializes to text and versioned JSON."""

    title: str
    # {variant: {level: {metric: (median, p25, p75)}}}
    group_summaries: dict = field(default_factory=dict)
    # {name: [CalibrationBin...]}
    calibration: dict = field(default_factory=dict)
    # {name: {"levels": [...], "coverage": [...]}}
    coverage: dict = field(default_factory=dict)
    # {name: 2x2 nested list}
    confusion: dict = field(default_factory=dict)
    # {name: scalar}
    scalars: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add_summary(self, variant, level, metric, values):
        med, p25, p75 = summarize_group(values)
        self.group_summaries.setdefault(variant, {}).setdefault(level, {})[
            metric] = (med, p25, p75)

    def to_json(self) -> str:
        def _cal(bins):
            return [
                {"lo": b.lo, "hi": b.hi, "mean_predicted": b.mean_predicted,
                 "frequency": b.frequency, "count": b.count}
                for b in bins
            ]

        payload = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "title": self.title,
            "group_summaries": self.group_summaries,
            "calibration": {k: _cal(v) for k, v in self.calibration.items()},
            "coverage": self.coverage,
            "confusion": {k: np.asarray(v).tolist()
                          for k, v in self.confusion.items()},
            "scalars": self.scalars,
            "meta": self.meta,
        }
        return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True)

    def to_text(self) -> str:
        lines = [self.title, "=" * len(self.title), ""]
        for variant in sorted(self.group_summaries):
            lines.append(f"[{variant}]")
            for level in sorted(self.group_summaries[variant]):
                metrics = self.group_summaries[variant][level]
                cells = "  ".join(
                    f"{m}={v[0]:.4f} ({v[1]:.4f}, {v[2]:.4f})"
                    for m, v in sorted(metrics.items())
                )
                lines.append(f"  {level:<12} {cells}")
            lines.append("")
        for name, bins in sorted(self.calibration.items()):
            lines.append(f"calibration: {name}")
            lines.append("  bin_lo  bin_hi  mean_pred  frequency  count")
            for b in bins:
                lines.append(
                    f"  {b.lo:6.2f}  {b.hi:6.2f}  {b.mean_predicted:9.4f}"
                    f"  {b.frequency:9.4f}  {b.count:5d}"
                )
            lines.append("")
        for name, cov in sorted(self.coverage.items()):
            lines.append(f"coverage: {name}")
            for lvl, c in zip(cov["levels"], cov["coverage"]):
                lines.append(f"  level {lvl:.2f}: observed {c:.4f}")
            lines.append("")
        for name, mat in sorted(self.confusion.items()):
            m = np.asarray(mat)
            lines.append(f"confusion: {name} (rows y>0,y=0; cols f>0,f=0)")
            lines.append(f"  {m[0, 0]:.4f}  {m[0, 1]:.4f}")
            lines.append(f"  {m[1, 0]:.4f}  {m[1, 1]:.4f}")
            lines.append("")
        for name, val in sorted(self.scalars.items()):
            lines.append(f"{name}: {val:.6g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        payload = json.loads(text)
        if payload.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(
                f"unsupported report schema {payload.get('schema_version')}"
            )
        report = cls(payload["title"])
        report.group_summaries = payload["group_summaries"]
        report.calibration = {
            k: [CalibrationBin(b["lo"], b["hi"], b["mean_predicted"],
                               b["frequency"], b["count"]) for b in v]
            for k, v in payload["calibration"].items()
        }
        report.coverage = payload["coverage"]
        report.confusion = payload["confusion"]
        report.scalars = payload["scalars"]
        report.meta = payload["meta"]
        return report
