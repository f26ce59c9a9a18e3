"""Experiment orchestration: corpus scanning, per-household filtering runs,
batched point-forecast evaluation, and report assembly.

A run processes households independently (they share only precomputed
group-level aggregates), so the household loop parallelizes; aggregation is
keyed by household index and is deterministic for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp

from .cascade import (
    CascadeConfig,
    CascadeInstance,
    CovariateSpec,
    DiscountPanel,
    Level,
    Source,
)
from .data import HierarchySpec, assign_groups, ingest_csv
from .evaluation import (
    EvaluationReport,
    auc_score,
    calibration_bins,
    confusion_matrix,
    f1_score,
    mse_score,
)
from .generator import GeneratorConfig, iter_households
from .pointforecast import count_points_batch, spend_points_batch

LEVELS = ("category", "subcat", "item")
METRICS = ("MAD", "MAPE", "ZAPE")


@dataclass
class RunConfig:
    """One experiment: a corpus source plus modeling and evaluation settings."""

    generator: GeneratorConfig | None = None
    csv_path: str | None = None
    hierarchy: HierarchySpec | None = None
    items: tuple = ()
    variants: tuple = ("M1", "M2", "M3")
    mode: str = "known"  # known | mean | median | ensemble
    ensemble_size: int = 500
    eval_start_week: int = 14
    delta: float = 0.98
    vol_discount: float = 0.99
    discount_source: str = "aggregate"  # aggregate | household | none
    trunc_lo: float = 0.01
    trunc_hi: float = 1e4
    coverage_levels: tuple = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95)
    calibration_bins: int = 10
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if (self.generator is None) == (self.csv_path is None):
            raise ValueError("exactly one data source (generator or csv) required")
        if self.csv_path is not None and self.hierarchy is None:
            raise ValueError("csv source requires a hierarchy")
        if self.generator is not None:
            self.hierarchy = self.generator.hierarchy
            if not self.items:
                self.items = (self.generator.focus_item,)
        self.items = tuple(self.items)
        if not self.items:
            raise ValueError("at least one modeled item required")
        for item in self.items:
            if item not in self.hierarchy.items:
                raise ValueError(f"item {item} not in hierarchy")
        if self.mode not in ("known", "mean", "median", "ensemble"):
            raise ValueError(f"unknown projection mode {self.mode}")

    def discount_covariate(self):
        return {
            "aggregate": Source.AGGREGATE_DISCOUNT,
            "household": Source.HOUSEHOLD_DISCOUNT,
            "none": None,
        }[self.discount_source]


# ---------------------------------------------------------------------------
# corpus access


class CorpusSource:
    """Uniform household-stream access over generator or CSV sources.

    Generator corpora are re-simulated on each pass (bit-identical from the
    seed) so arbitrarily large corpora never sit in memory; CSV corpora are
    loaded once in ``prepare`` because group assignment needs a full scan.
    """

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.hierarchy = cfg.hierarchy
        self._csv_households = None
        if cfg.generator is not None:
            self.n_weeks = cfg.generator.n_weeks
            self.first_week = 1
        else:
            self.n_weeks = 0  # set by prepare
            self.first_week = 1

    def household_list(self):
        """[(household_id, group)] in iteration order; cheap for generators."""
        if self.cfg.generator is not None:
            from .generator import household_ids

            return list(household_ids(self.cfg.generator))
        if self._csv_households is None:
            raise RuntimeError("call prepare() before household_list() on CSV")
        return [(hh, group) for hh, group, _ in self._csv_households]

    def iter_households(self, lo=None, hi=None):
        """Yields (household_id, group, [records]); optional index slice."""
        if self.cfg.generator is not None:
            for idx, (hh, group, _, recs) in enumerate(
                    iter_households(self.cfg.generator)):
                if lo is not None and idx < lo:
                    continue
                if hi is not None and idx >= hi:
                    break
                yield hh, group, recs
        else:
            if self._csv_households is None:
                self._load_csv()
            for idx, (hh, group, recs) in enumerate(self._csv_households):
                if _in_range(idx, lo, hi):
                    yield hh, group, recs

    def _load_csv(self):
        buckets = []
        current = None
        records = []
        for rec in ingest_csv(self.cfg.csv_path, self.hierarchy):
            if rec.household_id != current:
                if current is not None:
                    buckets.append((current, records))
                current = rec.household_id
                records = []
            records.append(rec)
        if current is not None:
            buckets.append((current, records))
        groups = assign_groups(r for _, recs in buckets for r in recs)
        all_weeks = [r.week for _, recs in buckets for r in recs]
        self.first_week = min(all_weeks)
        self.n_weeks = max(all_weeks) - self.first_week + 1
        self._csv_households = [(hh, groups[hh], recs) for hh, recs in buckets]

    def prepare(self):
        """Pass A: group assignment (CSV), discount panels, cold-start centers."""
        if self.cfg.generator is None and self._csv_households is None:
            self._load_csv()
        return _scan(self)


def _in_range(idx, lo, hi):
    return (lo is None or idx >= lo) and (hi is None or idx < hi)


@dataclass
class GroupAggregates:
    panel: DiscountPanel
    cold_start: dict   # node -> mean observed log spend
    obs_scale: dict    # node -> pooled within-household log-spend variance
    n_households: int


def _scan(source: CorpusSource) -> dict:
    """One streaming pass: per-group discount panels and mean observed log
    spends per node (the cold-start centers)."""
    from .cascade import DiscountAccumulator

    hier = source.hierarchy
    items_sorted = sorted(hier.items)
    per_group = {}
    for hh, group, records in source.iter_households():
        agg = per_group.get(group)
        if agg is None:
            agg = {
                "acc": DiscountAccumulator(items_sorted, source.n_weeks,
                                           source.first_week),
                "sums": {}, "counts": {}, "n": 0,
            }
            per_group[group] = agg
        agg["n"] += 1
        sums, counts = agg["sums"], agg["counts"]

        def observe(key, value):
            sums[key] = sums.get(key, 0.0) + value
            counts[key] = counts.get(key, 0) + 1

        for rec in records:
            agg["acc"].observe(rec)
            if rec.returned and rec.total_spend > 0:
                observe("global", math.log(rec.total_spend))
            for cat, spend in rec.category_spend.items():
                if spend > 0:
                    observe(cat, math.log(spend))
            for sub, spend in rec.subcategory_spend.items():
                if spend > 0:
                    observe(sub, math.log(spend))
            for item, obs in rec.items.items():
                spend = obs.quantity * obs.unit_price * (1 - obs.discount_pct)
                if spend > 0:
                    observe(item, math.log(spend))
    out = {}
    for group, agg in per_group.items():
        cold = {k: agg["sums"][k] / agg["counts"][k] for k in agg["sums"]}
        out[group] = GroupAggregates(agg["acc"].finish(), cold, agg["n"])
    return out


# ---------------------------------------------------------------------------
# per-household processing


@dataclass
class _Rows:
    """Flat per-week accumulators for one variant run."""

    ret: list = field(default_factory=list)      # (hh, group, week, p, z)
    glob: list = field(default_factory=list)     # (hh, group, week, dof, loc, scale, ylog)
    spend: dict = field(default_factory=lambda: {"category": [], "subcat": []})
    item: list = field(default_factory=list)     # (hh, group, week, ga, gb, sa, sb, qty)
    sensitivity: dict = field(default_factory=dict)  # hh -> (means, lo, hi)

    def extend(self, other: "_Rows"):
        self.ret.extend(other.ret)
        self.glob.extend(other.glob)
        for key in self.spend:
            self.spend[key].extend(other.spend[key])
        self.item.extend(other.item)
        self.sensitivity.update(other.sensitivity)


def _cascade_config(run_cfg: RunConfig, variant: str, cold_start: dict
                    ) -> CascadeConfig:
    cov = CovariateSpec.variant(variant, run_cfg.discount_covariate())
    return CascadeConfig(
        run_cfg.hierarchy, run_cfg.items, cov,
        delta=run_cfg.delta, vol_discount=run_cfg.vol_discount,
        cold_start=cold_start,
    )


def _process_households(source: CorpusSource, variant: str, aggregates: dict,
                        hh_index: dict, lo=None, hi=None,
                        track_sensitivity: bool = False) -> _Rows:
    run_cfg = source.cfg
    rows = _Rows()
    for hh, group, records in source.iter_households(lo, hi):
        agg = aggregates[group]
        ccfg = _cascade_config(run_cfg, variant, agg.cold_start)
        inst = CascadeInstance(hh, ccfg)
        h = hh_index[hh]
        for rec in records:
            discounts = {i: agg.panel.for_record(rec, i) for i in ccfg.items}
            out = inst.update_week(rec, discounts)
            w = rec.week
            rows.ret.append((h, group, w, out.return_prob, out.returned))
            if out.global_forecast is not None:
                dof, loc, scale = out.global_forecast
                rows.glob.append((h, group, w, dof, loc, scale,
                                  out.global_log_spend))
            for key, bucket in (("category", out.categories),
                                ("subcat", out.subcats)):
                for node, o in bucket.items():
                    rows.spend[key].append((h, group, w, o.nonzero_prob, o.dof,
                                            o.loc, o.scale, o.spend))
            for item, o in out.items.items():
                rows.item.append((h, group, w, o.gate_alpha, o.gate_beta,
                                  o.size_alpha, o.size_beta, o.quantity))
        if track_sensitivity and inst._discount_index() is not None:
            rows.sensitivity[hh] = {
                item: inst.price_sensitivity(item) for item in ccfg.items
            }
    return rows


def _worker_entry(args):
    run_cfg, variant, aggregates, hh_index, lo, hi = args
    source = CorpusSource(run_cfg)
    if run_cfg.csv_path is not None:
        raise ValueError("parallel workers require a generator source")
    return _process_households(source, variant, aggregates, hh_index, lo, hi)


# ---------------------------------------------------------------------------
# metric assembly


def _per_household_mean(hh_codes, values, n_households):
    """Mean of `values` per household code, nan where a household has none."""
    mask = ~np.isnan(values)
    sums = np.bincount(hh_codes[mask], weights=values[mask],
                       minlength=n_households)
    counts = np.bincount(hh_codes[mask], minlength=n_households)
    with np.errstate(invalid="ignore"):
        out = sums / counts
    out[counts == 0] = np.nan
    return out


def _spend_level_metrics(rows, eval_start, n_households, trunc):
    """Per-household MAD/MAPE/ZAPE means at one spend level (dollar scale)."""
    if not rows:
        return {m: np.full(n_households, np.nan) for m in METRICS}, None
    arr = np.asarray(rows, dtype=float)
    hh = arr[:, 0].astype(int)
    week = arr[:, 2]
    p1, dof, loc, scale, y = arr[:, 3], arr[:, 4], arr[:, 5], arr[:, 6], arr[:, 7]
    keep = week >= eval_start
    hh, p1, dof, loc, scale, y = (a[keep] for a in (hh, p1, dof, loc, scale, y))
    lo, hi = trunc
    f_mad, f_mape, f_zape = spend_points_batch(p1, dof, loc, scale, lo, hi)
    mad_loss = np.abs(y - f_mad)
    with np.errstate(divide="ignore", invalid="ignore"):
        mape_loss = np.where(y > 0, np.abs(y - f_mape) / np.where(y > 0, y, 1.0),
                             np.nan)
        zape_loss = np.where(y > 0, np.abs(y - f_zape) / np.where(y > 0, y, 1.0),
                             f_zape / (1.0 + f_zape))
    per_hh = {
        "MAD": _per_household_mean(hh, mad_loss, n_households),
        "MAPE": _per_household_mean(hh, mape_loss, n_households),
        "ZAPE": _per_household_mean(hh, zape_loss, n_households),
    }
    extras = {"nonzero_prob": p1, "outcome_pos": y > 0,
              "median_pos": f_mad > 0}
    return per_hh, extras


def _item_level_metrics(rows, eval_start, n_households, chunk=20000):
    if not rows:
        return {m: np.full(n_households, np.nan) for m in METRICS}, None
    arr = np.asarray(rows, dtype=float)
    keep = arr[:, 2] >= eval_start
    arr = arr[keep]
    hh = arr[:, 0].astype(int)
    ga, gb, sa, sb, y = arr[:, 3], arr[:, 4], arr[:, 5], arr[:, 6], arr[:, 7]
    f_mad = np.empty(len(arr))
    f_mape = np.empty(len(arr))
    f_zape = np.empty(len(arr))
    for s in range(0, len(arr), chunk):
        e = min(s + chunk, len(arr))
        f_mad[s:e], f_mape[s:e], f_zape[s:e] = count_points_batch(
            ga[s:e], gb[s:e], sa[s:e], sb[s:e])
    mad_loss = np.abs(y - f_mad)
    with np.errstate(divide="ignore", invalid="ignore"):
        mape_loss = np.where(y > 0, np.abs(y - f_mape) / np.where(y > 0, y, 1.0),
                             np.nan)
        zape_loss = np.where(y > 0, np.abs(y - f_zape) / np.where(y > 0, y, 1.0),
                             f_zape / (1.0 + f_zape))
    per_hh = {
        "MAD": _per_household_mean(hh, mad_loss, n_households),
        "MAPE": _per_household_mean(hh, mape_loss, n_households),
        "ZAPE": _per_household_mean(hh, zape_loss, n_households),
    }
    p1 = ga / (ga + gb)
    extras = {"nonzero_prob": p1, "outcome_pos": y > 0, "median_pos": f_mad > 0}
    return per_hh, extras


@dataclass
class RunResult:
    report: EvaluationReport
    per_household: dict      # variant -> level -> metric -> array
    household_groups: np.ndarray
    sensitivity: dict        # variant -> hh -> (means, lo, hi)
    tables: dict             # name -> (header, rows) for CSV export


def run_experiment(run_cfg: RunConfig) -> RunResult:
    if run_cfg.mode != "known":
        raise NotImplementedError(
            "run_experiment drives the known-covariate evaluation; use"
            " run_projected for projected simultaneous predictors")
    source = CorpusSource(run_cfg)
    aggregates = source.prepare()
    hh_list = source.household_list()
    hh_order = [hh for hh, _ in hh_list]
    hh_index = {hh: i for i, hh in enumerate(hh_order)}
    hh_groups = np.array([group for _, group in hh_list], dtype=int)

    report = EvaluationReport(
        title=f"hiercast run: mode={run_cfg.mode}, items={','.join(run_cfg.items)}")
    report.meta = {
        "seed": run_cfg.seed,
        "variants": list(run_cfg.variants),
        "eval_start_week": run_cfg.eval_start_week,
        "n_households": len(hh_order),
        "mode": run_cfg.mode,
    }
    per_household = {}
    sens_out = {}
    tables = {}
    n_hh = len(hh_order)
    trunc = (run_cfg.trunc_lo, run_cfg.trunc_hi)

    for variant in run_cfg.variants:
        if run_cfg.workers > 1 and run_cfg.generator is not None:
            bounds = np.linspace(0, n_hh, run_cfg.workers + 1).astype(int)
            jobs = [(run_cfg, variant, aggregates, hh_index, int(lo), int(hi))
                    for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
            rows = _Rows()
            with ProcessPoolExecutor(max_workers=run_cfg.workers) as pool:
                for part in pool.map(_worker_entry, jobs):
                    rows.extend(part)
        else:
            rows = _process_households(source, variant, aggregates, hh_index,
                                       track_sensitivity=True)
        per_household[variant] = {}
        sens_out[variant] = rows.sensitivity

        # return level: calibration + binary scores + confusion
        ret = np.asarray(rows.ret, dtype=float)
        keep = ret[:, 2] >= run_cfg.eval_start_week
        probs, outs = ret[keep, 3], ret[keep, 4]
        report.calibration[f"{variant}/return"] = calibration_bins(
            probs, outs, run_cfg.calibration_bins)
        report.scalars[f"{variant}/return/auc"] = auc_score(probs, outs)
        report.scalars[f"{variant}/return/f1"] = f1_score(probs, outs)
        report.scalars[f"{variant}/return/mse"] = mse_score(probs, outs)
        report.confusion[f"{variant}/return"] = confusion_matrix(
            (probs >= 0.5).astype(float), outs).tolist()

        # global spend: central-interval coverage on the log scale
        glob = np.asarray(rows.glob, dtype=float)
        gkeep = glob[:, 2] >= run_cfg.eval_start_week
        dof, loc, scale, ylog = (glob[gkeep, 3], glob[gkeep, 4],
                                 glob[gkeep, 5], glob[gkeep, 6])
        cov = []
        sd = np.sqrt(scale)
        for level in run_cfg.coverage_levels:
            half = 0.5 * (1 - level)
            zlo = sp.stdtrit(dof, half)
            zhi = sp.stdtrit(dof, 1 - half)
            cov.append(float(np.mean((ylog >= loc + sd * zlo)
                                     & (ylog <= loc + sd * zhi))))
        report.coverage[f"{variant}/global_log_spend"] = {
            "levels": list(run_cfg.coverage_levels), "coverage": cov}

        for level_name in ("category", "subcat"):
            per, extras = _spend_level_metrics(
                rows.spend[level_name], run_cfg.eval_start_week, n_hh, trunc)
            per_household[variant][level_name] = per
            for metric in METRICS:
                report.add_summary(variant, level_name, metric,
                                   per[metric])
            if extras is not None:
                report.calibration[f"{variant}/{level_name}_occurrence"] = (
                    calibration_bins(extras["nonzero_prob"],
                                     extras["outcome_pos"],
                                     run_cfg.calibration_bins))

        per, extras = _item_level_metrics(rows.item, run_cfg.eval_start_week,
                                          n_hh)
        per_household[variant]["item"] = per
        for metric in METRICS:
            report.add_summary(variant, "item", metric, per[metric])
        if extras is not None:
            report.calibration[f"{variant}/item_occurrence"] = calibration_bins(
                extras["nonzero_prob"], extras["outcome_pos"],
                run_cfg.calibration_bins)
            report.confusion[f"{variant}/item_median"] = confusion_matrix(
                extras["median_pos"].astype(float),
                extras["outcome_pos"].astype(float)).tolist()

    for variant in run_cfg.variants:
        rows_out = []
        for level in LEVELS:
            for metric in METRICS:
                vals = per_household[variant][level][metric]
                for h, v in enumerate(vals):
                    if not np.isnan(v):
                        rows_out.append((hh_order[h], level, metric, v))
        tables[f"household_metrics_{variant}"] = (
            ("household_id", "level", "metric", "mean_loss"), rows_out)

    return RunResult(report, per_household, hh_groups, sens_out, tables)


# ---------------------------------------------------------------------------
# projected-mode runs (forecast-then-update with simultaneous projections)


def run_projected(run_cfg: RunConfig) -> EvaluationReport:
    """Forecast each week with projected simultaneous predictors (point or
    ensemble cascades), then update on realized data.  Emits occurrence
    confusion matrices for mean- and median-style projections plus
    per-level occurrence calibration."""
    source = CorpusSource(run_cfg)
    aggregates = source.prepare()
    variant = run_cfg.variants[0]
    rng = np.random.default_rng(run_cfg.seed)
    levels = {"return": [], "global": [], "category": [], "subcat": [],
              "item": []}
    for hh, group, records in source.iter_households():
        agg = aggregates[group]
        ccfg = _cascade_config(run_cfg, variant, agg.cold_start)
        inst = CascadeInstance(hh, ccfg)
        for rec in records:
            discounts = {i: agg.panel.for_record(rec, i) for i in ccfg.items}
            mode = "mean" if run_cfg.mode in ("known", "mean") else run_cfg.mode
            fc = inst.forecast_week(
                discounts, mode=mode,
                ensemble_size=run_cfg.ensemble_size, rng=rng)
            if rec.week >= run_cfg.eval_start_week:
                _collect_projection(levels, fc, rec, ccfg)
            inst.update_week(rec, discounts)
    report = EvaluationReport(
        title=f"hiercast projected run: mode={run_cfg.mode}")
    report.meta = {"mode": run_cfg.mode, "variant": variant,
                   "seed": run_cfg.seed}
    for name, rows in levels.items():
        if not rows:
            continue
        arr = np.asarray(rows, dtype=float)
        p_nonzero, mean_pos, med_pos, y_pos = (arr[:, 0], arr[:, 1], arr[:, 2],
                                               arr[:, 3])
        report.calibration[f"{name}_occurrence"] = calibration_bins(
            p_nonzero, y_pos, run_cfg.calibration_bins)
        report.confusion[f"{name}_mean"] = confusion_matrix(
            mean_pos, y_pos).tolist()
        report.confusion[f"{name}_median"] = confusion_matrix(
            med_pos, y_pos).tolist()
    return report


def _collect_projection(levels, fc, rec, ccfg):
    gate = fc.gate
    z_struct = 1.0 if gate > 0 else 0.0
    levels["return"].append((fc.return_dist.p_one, z_struct,
                             float(fc.return_dist.p_one >= 0.5),
                             float(rec.returned)))
    p_nz = gate
    levels["global"].append((p_nz, z_struct, float(p_nz >= 0.5),
                             float(rec.returned and rec.total_spend > 0)))
    for cat, dist in fc.categories.items():
        p = gate * (1.0 - dist.zero_atom())
        levels["category"].append((p, z_struct, float(p >= 0.5),
                                   float(rec.category_spend.get(cat, 0) > 0)))
    for sub, dist in fc.subcats.items():
        p = gate * (1.0 - dist.zero_atom())
        levels["subcat"].append((p, z_struct, float(p >= 0.5),
                                 float(rec.subcategory_spend.get(sub, 0) > 0)))
    for item, dist in fc.items.items():
        p = gate * (1.0 - dist.zero_atom())
        obs = rec.items.get(item)
        levels["item"].append((p, z_struct, float(p >= 0.5),
                               float(obs is not None and obs.quantity > 0)))


# ---------------------------------------------------------------------------
# multi-step return forecasting


def run_return_multistep(run_cfg: RunConfig, horizons=(1, 4, 8)):
    """Pooled AUC/F1/MSE of the return model at several forecast horizons.

    Lagged covariates beyond one step are carried forward from the forecast
    origin.  All horizons are scored on the same target weeks.
    """
    source = CorpusSource(run_cfg)
    aggregates = source.prepare()
    kmax = max(horizons)
    probs = {k: [] for k in horizons}
    outs = []
    for hh, group, records in source.iter_households():
        agg = aggregates[group]
        ccfg = _cascade_config(run_cfg, run_cfg.variants[0], agg.cold_start)
        inst = CascadeInstance(hh, ccfg)
        n = len(records)
        # fmat[k][j] = horizon-k forecast targeting records[j], i.e. issued
        # with the posterior after records[0..j-k]
        fmat = {k: np.full(n + kmax, np.nan) for k in horizons}
        zvec = np.full(n, np.nan)
        for t, rec in enumerate(records):
            F = inst._covariates(Level.RETURN, None, None)
            for k in horizons:
                fmat[k][t + k - 1] = inst.return_model.forecast(F, k).p_one
            zvec[t] = 1.0 if rec.returned else 0.0
            discounts = {i: agg.panel.for_record(rec, i) for i in ccfg.items}
            inst.update_week(rec, discounts)
        valid = np.arange(n) >= max(kmax - 1, run_cfg.eval_start_week - 1)
        outs.append(zvec[valid])
        for k in horizons:
            probs[k].append(fmat[k][:n][valid])
    outs = np.concatenate(outs)
    result = {}
    for k in horizons:
        p = np.concatenate(probs[k])
        result[k] = {
            "auc": auc_score(p, outs),
            "f1": f1_score(p, outs),
            "mse": mse_score(p, outs),
        }
    return result


# ---------------------------------------------------------------------------
# price-sensitivity recovery study


def sensitivity_replications(n_reps: int, sensitive: bool, seed0: int = 0,
                             n_weeks: int = 112, sensitivity_value: float = 0.8):
    """Independent single-household replications; returns the per-rep
    (truth, mean, lo, hi) of the filtered discount coefficient at the final
    week under the item model with a household-discount predictor."""
    from .generator import GroupConfig

    out = []
    for rep in range(n_reps):
        gen = GeneratorConfig(
            groups={1: GroupConfig(1, 0.96, 29.48)},
            n_weeks=n_weeks,
            seed=seed0 + rep,
            sensitive_fraction=1.0 if sensitive else 0.0,
            sensitivity_value=sensitivity_value,
        )
        run_cfg = RunConfig(generator=gen, variants=("M3",),
                            discount_source="household",
                            eval_start_week=1, seed=rep)
        source = CorpusSource(run_cfg)
        aggregates = source.prepare()
        hh, group, records = next(source.iter_households())
        agg = aggregates[group]
        ccfg = _cascade_config(run_cfg, "M3", agg.cold_start)
        inst = CascadeInstance(hh, ccfg)
        truth_value = sensitivity_value if sensitive else 0.0
        for rec in records:
            discounts = {i: agg.panel.for_record(rec, i) for i in ccfg.items}
            inst.update_week(rec, discounts)
        means, lo, hi = inst.price_sensitivity(gen.focus_item)
        out.append((truth_value, float(means[-1]), float(lo[-1]),
                    float(hi[-1])))
    return out
