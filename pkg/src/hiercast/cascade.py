"""Per-household model stacks and the weekly forecast/update cycle.

Each household carries a tied stack: a return Bernoulli, a global log-spend
normal model (conditional on returning), spend mixtures for the modeled
category and sub-category nodes, and count mixtures for the focus items.
Updates run strictly top-down under the conditioning ladder:

    return model        every week
    global spend        iff returned
    category mixture    iff returned (its own gate holds the category zeros)
    sub-category        iff the parent category spend was positive
    item counts         iff the parent sub-category spend was positive

Models conditioned out of a week only evolve.  Forecasting cascades the
other way: higher-level forecasts are projected into lower-level covariates
as points (mean/median path) or as sampled ensembles.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .data import HierarchySpec, WeeklyRecord
from .dglm import Family, StateModel
from .distributions import (
    BetaBernoulliForecast,
    EnsembleForecast,
    PointMass,
)
from .mixtures import Dcmm, Dlmm

Z90 = 1.6448536269514722


class Level(enum.Enum):
    RETURN = "return"
    GLOBAL = "global"
    CATEGORY = "category"
    SUBCAT = "subcat"
    ITEM = "item"


class Source(enum.Enum):
    INTERCEPT = "intercept"
    LAGGED_SELF = "lagged_self"
    LAGGED_PARENT = "lagged_parent"
    LAGGED_GLOBAL = "lagged_global"
    SIMULTANEOUS_PARENT = "simultaneous_parent"
    HOUSEHOLD_DISCOUNT = "household_discount"
    AGGREGATE_DISCOUNT = "aggregate_discount"


_SPEND_SOURCES = {
    Source.LAGGED_SELF,
    Source.LAGGED_PARENT,
    Source.LAGGED_GLOBAL,
    Source.SIMULTANEOUS_PARENT,
}


@dataclass(frozen=True)
class CovariateSpec:
    """Predictor sources per level; spend sources are centered log spends,
    discounts enter raw."""

    sources: dict

    def __post_init__(self):
        for level in Level:
            if level not in self.sources:
                raise ValueError(f"missing covariate sources for {level}")

    def dim(self, level: Level) -> int:
        return len(self.sources[level])

    @classmethod
    def variant(cls, name: str, discount: Source | None = Source.AGGREGATE_DISCOUNT):
        """Benchmark configurations: lagged-local (M1), lagged-parent (M2),
        simultaneous-parent (M3) regression terms below the global level."""
        base = {
            Level.RETURN: (Source.INTERCEPT, Source.LAGGED_GLOBAL),
            Level.GLOBAL: (Source.INTERCEPT, Source.LAGGED_SELF),
        }
        spend = {
            "M1": Source.LAGGED_SELF,
            "M2": Source.LAGGED_PARENT,
            "M3": Source.SIMULTANEOUS_PARENT,
        }
        if name not in spend:
            raise ValueError(f"unknown variant {name!r}")
        item_sources = (Source.INTERCEPT, spend[name])
        if discount is not None:
            item_sources = item_sources + (discount,)
        base[Level.CATEGORY] = (Source.INTERCEPT,
                                Source.LAGGED_GLOBAL if name == "M2" else spend[name])
        base[Level.SUBCAT] = (Source.INTERCEPT, spend[name])
        base[Level.ITEM] = item_sources
        return cls(base)


@dataclass
class CascadeConfig:
    hierarchy: HierarchySpec
    items: tuple
    covariates: CovariateSpec
    delta: float = 0.98
    vol_discount: float = 0.99
    prior_scale: float = 1.0
    return_projection: str = "probability"  # or "indicator"
    cold_start: dict = field(default_factory=dict)  # node key -> log-spend center
    obs_scale: dict = field(default_factory=dict)   # node key -> volatility prior s0

    def __post_init__(self):
        self.items = tuple(self.items)
        for item in self.items:
            if item not in self.hierarchy.items:
                raise ValueError(f"unknown item {item}")
        if self.return_projection not in ("probability", "indicator"):
            raise ValueError("return_projection must be probability or indicator")

    @property
    def categories(self):
        return sorted({self.hierarchy.category_of(i) for i in self.items})

    @property
    def subcategories(self):
        return sorted({self.hierarchy.subcategory_of(i) for i in self.items})


class _Register:
    """Carry-forward last observed log spend with a running centering mean."""

    __slots__ = ("value", "mean", "count")

    def __init__(self, cold_start: float):
        self.value = cold_start
        self.mean = cold_start
        self.count = 0

    def centered(self) -> float:
        return self.value - self.mean

    def center(self, raw: float) -> float:
        return raw - self.mean

    def observe(self, raw: float) -> None:
        self.value = raw
        self.count += 1
        self.mean += (raw - self.mean) / (self.count + 1)


@dataclass
class _SpendNodeOutcome:
    nonzero_prob: float
    dof: float
    loc: float
    scale: float
    spend: float


@dataclass
class _ItemOutcome:
    gate_alpha: float
    gate_beta: float
    size_alpha: float
    size_beta: float
    quantity: int


@dataclass
class WeekOutcome:
    """One-step-ahead forecast parameters captured during an update, for the
    nodes whose conditioning event occurred, plus the observations."""

    week: int
    return_prob: float = 0.0
    returned: int = 0
    global_forecast: tuple | None = None  # (dof, loc, scale)
    global_log_spend: float = math.nan
    categories: dict = field(default_factory=dict)  # node -> _SpendNodeOutcome
    subcats: dict = field(default_factory=dict)
    items: dict = field(default_factory=dict)       # item -> _ItemOutcome


@dataclass
class WeekForecasts:
    """Projected one-step forecasts: the return law plus per-node laws
    conditional on the projected return path (point modes threshold the
    return probability at 0.5; a zero indicator zeroes everything below)."""

    mode: str
    return_dist: BetaBernoulliForecast
    gate: float                      # return probability (0 if thresholded out)
    global_dist: object
    categories: dict
    subcats: dict
    items: dict


def default_cold_start(hierarchy: HierarchySpec) -> dict:
    cold = {"global": 3.0}
    for cat in hierarchy.categories:
        cold[cat] = 2.0
    for sub in hierarchy.sub_categories:
        cold[sub] = 1.5
    for item in hierarchy.items:
        cold[item] = 1.0
    return cold


class CascadeInstance:
    """One household's model stack plus its lagged-covariate registers."""

    def __init__(self, household_id: str, config: CascadeConfig):
        self.household_id = household_id
        self.config = config
        cov = config.covariates
        self.return_model = StateModel.random_walk(
            Family.BERNOULLI, cov.dim(Level.RETURN), config.delta,
            prior_scale=config.prior_scale)
        self.global_model = StateModel.random_walk(
            Family.NORMAL, cov.dim(Level.GLOBAL), config.delta,
            vol_discount=config.vol_discount, prior_scale=config.prior_scale,
            obs_scale=config.obs_scale.get("global", 1.0))
        self.category_models = {
            c: Dlmm.random_walk(cov.dim(Level.CATEGORY), cov.dim(Level.CATEGORY),
                                config.delta, config.vol_discount,
                                config.prior_scale,
                                obs_scale=config.obs_scale.get(c, 1.0))
            for c in config.categories
        }
        self.subcat_models = {
            s: Dlmm.random_walk(cov.dim(Level.SUBCAT), cov.dim(Level.SUBCAT),
                                config.delta, config.vol_discount,
                                config.prior_scale,
                                obs_scale=config.obs_scale.get(s, 1.0))
            for s in config.subcategories
        }
        self.item_models = {
            i: Dcmm.random_walk(cov.dim(Level.ITEM), cov.dim(Level.ITEM),
                                config.delta, config.prior_scale)
            for i in config.items
        }
        cold = dict(default_cold_start(config.hierarchy))
        cold.update(config.cold_start)
        self.registers = {
            key: _Register(cold[key])
            for key in (["global"] + config.categories + config.subcategories
                        + list(config.items))
        }
        self.update_counts = {key: 0 for key in (
            ["return", "global"] + config.categories + config.subcategories
            + list(config.items))}
        self.sensitivity_history = {i: [] for i in config.items}
        self.week = 0

    # -- covariate assembly -------------------------------------------------

    def _parent_key(self, level: Level, node: str):
        h = self.config.hierarchy
        if level is Level.CATEGORY:
            return "global"
        if level is Level.SUBCAT:
            return h.sub_categories[node]
        if level is Level.ITEM:
            return h.items[node]
        return None

    def _covariates(self, level: Level, node, simultaneous: float | None,
                    discounts: tuple = (0.0, 0.0)) -> np.ndarray:
        """simultaneous: centered parent value for SIMULTANEOUS_PARENT (or the
        return projection at the global level); discounts: (household, aggregate)."""
        sources = self.config.covariates.sources[level]
        out = np.empty(len(sources))
        for j, src in enumerate(sources):
            if src is Source.INTERCEPT:
                out[j] = 1.0
            elif src is Source.LAGGED_GLOBAL:
                out[j] = self.registers["global"].centered()
            elif src is Source.LAGGED_SELF:
                key = "global" if level in (Level.RETURN, Level.GLOBAL) else node
                out[j] = self.registers[key].centered()
            elif src is Source.LAGGED_PARENT:
                parent = self._parent_key(level, node)
                out[j] = self.registers[parent or "global"].centered()
            elif src is Source.SIMULTANEOUS_PARENT:
                if simultaneous is None:
                    raise ValueError(
                        f"simultaneous covariate missing for {level} {node}")
                out[j] = simultaneous
            elif src is Source.HOUSEHOLD_DISCOUNT:
                out[j] = discounts[0]
            else:  # AGGREGATE_DISCOUNT
                out[j] = discounts[1]
        return out

    def _center_parent(self, level: Level, node: str, raw_log: float) -> float:
        parent = self._parent_key(level, node)
        return self.registers[parent].center(raw_log)

    def _discount_index(self):
        sources = self.config.covariates.sources[Level.ITEM]
        for j, src in enumerate(sources):
            if src in (Source.HOUSEHOLD_DISCOUNT, Source.AGGREGATE_DISCOUNT):
                return j
        return None

    # -- weekly cycle --------------------------------------------------------

    def update_week(self, record: WeeklyRecord, discounts: dict | None = None
                    ) -> WeekOutcome:
        """Filter one week of data through the ladder.

        ``discounts`` maps item -> (household_potential, group_aggregate).
        Updates condition on realized values top-down; the one-step forecasts
        implied just before each update are captured in the WeekOutcome.
        """
        cfg = self.config
        discounts = discounts or {}
        out = WeekOutcome(week=record.week)
        z_ret = 1 if record.returned else 0

        ret_fc = self.return_model.update(
            self._covariates(Level.RETURN, None, None), z_ret)
        self.update_counts["return"] += 1
        out.return_prob = ret_fc.p_one
        out.returned = z_ret

        global_log = math.log(record.total_spend) if z_ret else 0.0
        if z_ret:
            F = self._covariates(Level.GLOBAL, None, float(z_ret))
            t_fc = self.global_model.update(F, global_log)
            self.update_counts["global"] += 1
            out.global_forecast = (t_fc.dof, t_fc.loc, t_fc.scale)
            out.global_log_spend = global_log
        else:
            self.global_model.evolve_step()

        for cat, model in self.category_models.items():
            spend = record.category_spend.get(cat, 0.0)
            if z_ret:
                simul = self._center_parent(Level.CATEGORY, cat, global_log)
                F = self._covariates(Level.CATEGORY, cat, simul)
                x = math.log(spend) if spend > 0 else 0.0
                fc = model.update(F, F, x)
                self.update_counts[cat] += 1
                out.categories[cat] = _SpendNodeOutcome(
                    fc.nonzero_prob, fc.t.dof, fc.t.loc, fc.t.scale, spend)
            else:
                model.evolve_step()

        for sub, model in self.subcat_models.items():
            parent_spend = record.category_spend.get(
                cfg.hierarchy.sub_categories[sub], 0.0)
            spend = record.subcategory_spend.get(sub, 0.0)
            if parent_spend > 0:
                parent_log = math.log(parent_spend)
                simul = self._center_parent(Level.SUBCAT, sub, parent_log)
                F = self._covariates(Level.SUBCAT, sub, simul)
                x = math.log(spend) if spend > 0 else 0.0
                fc = model.update(F, F, x)
                self.update_counts[sub] += 1
                out.subcats[sub] = _SpendNodeOutcome(
                    fc.nonzero_prob, fc.t.dof, fc.t.loc, fc.t.scale, spend)
            else:
                model.evolve_step()

        for item, model in self.item_models.items():
            sub = cfg.hierarchy.items[item]
            parent_spend = record.subcategory_spend.get(sub, 0.0)
            obs = record.items.get(item)
            qty = obs.quantity if obs is not None else 0
            if parent_spend > 0:
                simul = self._center_parent(Level.ITEM, item,
                                            math.log(parent_spend))
                F = self._covariates(Level.ITEM, item, simul,
                                     discounts.get(item, (0.0, 0.0)))
                fc = model.update(F, F, qty)
                self.update_counts[item] += 1
                out.items[item] = _ItemOutcome(
                    fc.gate_alpha, fc.gate_beta,
                    fc.positive.alpha, fc.positive.beta, qty)
            else:
                model.evolve_step()

        self._advance_registers(record, global_log)
        self._record_sensitivity()
        self.week += 1
        return out

    def _advance_registers(self, record: WeeklyRecord, global_log: float):
        if record.returned and record.total_spend > 0:
            self.registers["global"].observe(global_log)
        for cat in self.config.categories:
            spend = record.category_spend.get(cat, 0.0)
            if spend > 0:
                self.registers[cat].observe(math.log(spend))
        for sub in self.config.subcategories:
            spend = record.subcategory_spend.get(sub, 0.0)
            if spend > 0:
                self.registers[sub].observe(math.log(spend))
        for item in self.config.items:
            obs = record.items.get(item)
            if obs is not None and obs.quantity > 0:
                spend = obs.quantity * obs.unit_price * (1.0 - obs.discount_pct)
                if spend > 0:
                    self.registers[item].observe(math.log(spend))

    def _record_sensitivity(self):
        idx = self._discount_index()
        if idx is None:
            return
        for item, model in self.item_models.items():
            mean, var = model.poisson.coordinate_posterior(idx)
            self.sensitivity_history[item].append((mean, var))

    # -- cascading forecasts --------------------------------------------------

    def forecast_week(self, discounts: dict | None = None, mode: str = "mean",
                      ensemble_size: int = 0, rng=None,
                      known: dict | None = None,
                      mean_path: bool = False) -> WeekForecasts:
        """Project one week ahead, cascading simultaneous predictors downward.

        mode: "mean" | "median" | "ensemble" | "known".  In point modes the
        return probability is thresholded at 0.5 where a binary is
        structurally required; below a projected no-return, lower levels are
        point masses at zero.  "known" plugs realized values from ``known``
        = {"global": log_spend, "category": {...}, "subcat": {...}} (the
        gold standard).  Ensembles sample member paths; members that draw
        no-return contribute zeros.
        """
        discounts = discounts or {}
        if mode == "ensemble":
            if ensemble_size < 1:
                raise ValueError("ensemble mode needs ensemble_size >= 1")
            if rng is None and not mean_path:
                raise ValueError("ensemble mode needs an rng")
            return self._forecast_ensemble(discounts, ensemble_size, rng,
                                           mean_path)

        ret = self.return_model.forecast(
            self._covariates(Level.RETURN, None, None))
        p_ret = ret.p_one
        if mode == "known":
            z_star = 1
            gate = 1.0
        else:
            z_star = 1 if p_ret >= 0.5 else 0
            gate = p_ret if z_star else 0.0
        if not z_star:
            zero = PointMass(0.0)
            return WeekForecasts(mode, ret, 0.0, zero,
                                 {c: zero for c in self.category_models},
                                 {s: zero for s in self.subcat_models},
                                 {i: zero for i in self.item_models})

        ret_cov = (p_ret if self.config.return_projection == "probability"
                   else float(z_star))
        if mode == "known":
            ret_cov = 1.0
        g_dist = self.global_model.forecast(
            self._covariates(Level.GLOBAL, None, ret_cov))
        if mode == "known":
            if known is None or "global" not in known:
                raise ValueError("known mode requires realized values")
            global_proj = known["global"]
        else:
            global_proj = g_dist.loc  # t location: mean and median coincide

        cats = {}
        cat_proj = {}
        for cat, model in self.category_models.items():
            simul = self._center_parent(Level.CATEGORY, cat, global_proj)
            F = self._covariates(Level.CATEGORY, cat, simul)
            fc = model.forecast(F, F)
            cats[cat] = fc
            if mode == "known":
                cat_proj[cat] = known["category"][cat]
            else:
                cat_proj[cat] = fc.t.loc

        subs = {}
        sub_proj = {}
        for sub, model in self.subcat_models.items():
            parent = self.config.hierarchy.sub_categories[sub]
            simul = self._center_parent(Level.SUBCAT, sub, cat_proj[parent])
            F = self._covariates(Level.SUBCAT, sub, simul)
            fc = model.forecast(F, F)
            subs[sub] = fc
            if mode == "known":
                sub_proj[sub] = known["subcat"][sub]
            else:
                sub_proj[sub] = fc.t.loc

        items = {}
        for item, model in self.item_models.items():
            sub = self.config.hierarchy.items[item]
            simul = self._center_parent(Level.ITEM, item, sub_proj[sub])
            F = self._covariates(Level.ITEM, item, simul,
                                 discounts.get(item, (0.0, 0.0)))
            items[item] = model.forecast(F, F)
        return WeekForecasts(mode, ret, gate, g_dist, cats, subs, items)

    def _forecast_ensemble(self, discounts, size, rng,
                           mean_path: bool = False) -> WeekForecasts:
        """mean_path replaces every member draw with the conditional location
        (degenerate ensemble; matches the mean point mode member-for-member)."""
        ret = self.return_model.forecast(
            self._covariates(Level.RETURN, None, None))
        members = {"global": [], "cats": {c: [] for c in self.category_models},
                   "subs": {s: [] for s in self.subcat_models},
                   "items": {i: [] for i in self.item_models}}
        zero = PointMass(0.0)
        for _ in range(size):
            if mean_path:
                z = 1 if ret.p_one >= 0.5 else 0
            else:
                z = int(rng.random() < rng.beta(ret.alpha, ret.beta))
            if not z:
                members["global"].append(zero)
                for coll in ("cats", "subs", "items"):
                    for node in members[coll]:
                        members[coll][node].append(zero)
                continue
            ret_cov = (ret.p_one if self.config.return_projection == "probability"
                       else 1.0)
            g_dist = self.global_model.forecast(
                self._covariates(Level.GLOBAL, None, ret_cov))
            g_draw = g_dist.loc if mean_path else float(g_dist.sample(rng))
            members["global"].append(g_dist)
            cat_draw = {}
            for cat, model in self.category_models.items():
                simul = self._center_parent(Level.CATEGORY, cat, g_draw)
                F = self._covariates(Level.CATEGORY, cat, simul)
                fc = model.forecast(F, F)
                members["cats"][cat].append(fc)
                draw = fc.t.loc if mean_path else float(fc.sample(rng))
                cat_draw[cat] = draw if draw != 0.0 else None
            sub_draw = {}
            for sub, model in self.subcat_models.items():
                parent = self.config.hierarchy.sub_categories[sub]
                if cat_draw[parent] is None:
                    members["subs"][sub].append(zero)
                    sub_draw[sub] = None
                    continue
                simul = self._center_parent(Level.SUBCAT, sub, cat_draw[parent])
                F = self._covariates(Level.SUBCAT, sub, simul)
                fc = model.forecast(F, F)
                members["subs"][sub].append(fc)
                draw = fc.t.loc if mean_path else float(fc.sample(rng))
                sub_draw[sub] = draw if draw != 0.0 else None
            for item, model in self.item_models.items():
                sub = self.config.hierarchy.items[item]
                if sub_draw[sub] is None:
                    members["items"][item].append(zero)
                    continue
                simul = self._center_parent(Level.ITEM, item, sub_draw[sub])
                F = self._covariates(Level.ITEM, item, simul,
                                     discounts.get(item, (0.0, 0.0)))
                members["items"][item].append(model.forecast(F, F))
        return WeekForecasts(
            "ensemble", ret, 1.0,
            EnsembleForecast(members["global"]),
            {c: EnsembleForecast(v) for c, v in members["cats"].items()},
            {s: EnsembleForecast(v) for s, v in members["subs"].items()},
            {i: EnsembleForecast(v) for i, v in members["items"].items()},
        )

    def price_sensitivity(self, item: str):
        """Weekly filtered (mean, 90% interval) trajectory of the discount
        coefficient in the item's count-intensity state."""
        if self._discount_index() is None:
            raise ValueError("item covariates carry no discount predictor")
        history = self.sensitivity_history[item]
        means = np.array([h[0] for h in history])
        sds = np.sqrt([h[1] for h in history])
        return means, means - Z90 * sds, means + Z90 * sds


# ---------------------------------------------------------------------------
# group-level potential-discount aggregation


class DiscountPanel:
    """Per (item, week) potential-discount values for one household group.

    A household's potential discount is its recorded discount when the item
    was purchased or an offer was logged; otherwise it is imputed as the
    modal offered discount for that item-week, falling back to the item's
    last observed offer.  The aggregate is the cross-household average of
    potential discounts.
    """

    def __init__(self, items, n_weeks: int, first_week: int = 1):
        self.items = list(items)
        self.n_weeks = n_weeks
        self.first_week = first_week
        self._index = {item: j for j, item in enumerate(self.items)}
        self.imputed = np.zeros((len(self.items), n_weeks))
        self.aggregate = np.zeros((len(self.items), n_weeks))

    @classmethod
    def from_records(cls, records, items, n_weeks: int, first_week: int = 1):
        acc = DiscountAccumulator(items, n_weeks, first_week)
        for rec in records:
            acc.observe(rec)
        return acc.finish()

    def for_record(self, record: WeeklyRecord, item: str):
        """(household_potential, aggregate) pair for one household-week."""
        j = self._index[item]
        w = record.week - self.first_week
        obs = record.items.get(item)
        if obs is not None and (obs.offered or obs.quantity > 0):
            hh = obs.discount_pct
        else:
            hh = float(self.imputed[j, w])
        return hh, float(self.aggregate[j, w])


class DiscountAccumulator:
    """Streaming builder for DiscountPanel (single pass over records)."""

    def __init__(self, items, n_weeks: int, first_week: int = 1):
        self.panel = DiscountPanel(items, n_weeks, first_week)
        n_items = len(self.panel.items)
        self.offer_counts = [[dict() for _ in range(n_weeks)]
                             for _ in range(n_items)]
        self.observed_sum = np.zeros((n_items, n_weeks))
        self.observed_n = np.zeros((n_items, n_weeks))
        self.total_n = np.zeros((n_items, n_weeks))

    def observe(self, rec: WeeklyRecord):
        panel = self.panel
        w = rec.week - panel.first_week
        if not 0 <= w < panel.n_weeks:
            raise ValueError(f"week {rec.week} outside the panel range")
        for item, j in panel._index.items():
            obs = rec.items.get(item)
            self.total_n[j, w] += 1
            if obs is None:
                continue
            if obs.offered and obs.discount_pct > 0:
                counts = self.offer_counts[j][w]
                counts[obs.discount_pct] = counts.get(obs.discount_pct, 0) + 1
            if obs.offered or obs.quantity > 0:
                self.observed_sum[j, w] += obs.discount_pct
                self.observed_n[j, w] += 1

    def finish(self) -> "DiscountPanel":
        panel = self.panel
        for j in range(len(panel.items)):
            last_offer = 0.0
            for w in range(panel.n_weeks):
                counts = self.offer_counts[j][w]
                if counts:
                    # modal offered discount; deterministic tie-break on value
                    modal = max(sorted(counts), key=lambda v: counts[v])
                    last_offer = modal
                    panel.imputed[j, w] = modal
                else:
                    panel.imputed[j, w] = last_offer
                n_missing = self.total_n[j, w] - self.observed_n[j, w]
                denom = max(self.total_n[j, w], 1.0)
                panel.aggregate[j, w] = (
                    self.observed_sum[j, w] + n_missing * panel.imputed[j, w]
                ) / denom
        return panel


def aggregate_discount(records, item: str, week: int, last_offer: float = 0.0):
    """Average potential discount for one item-week across households.

    ``records`` are the group's records for that week; missing offers are
    imputed with the modal offered discount (fallback: ``last_offer``).
    """
    values = []
    offers = {}
    missing = 0
    for rec in records:
        if rec.week != week:
            raise ValueError("records must all belong to the requested week")
        obs = rec.items.get(item)
        if obs is not None and (obs.offered or obs.quantity > 0):
            values.append(obs.discount_pct)
            if obs.offered and obs.discount_pct > 0:
                offers[obs.discount_pct] = offers.get(obs.discount_pct, 0) + 1
        else:
            missing += 1
    if not values and missing == 0:
        raise ValueError("no households supplied")
    imputed = (max(sorted(offers), key=lambda v: offers[v]) if offers
               else last_offer)
    total = sum(values) + missing * imputed
    return total / (len(values) + missing)
