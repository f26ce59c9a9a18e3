"""Synthetic weekly purchasing corpus with emitted latent truth.

Households belong to spending groups with calibrated return rates and mean
spends.  Conditional on a return, log total spend is normal around a
household effect; category spends couple to the current log total spend
(that coupling is what simultaneous predictors can exploit); sub-category
spends split their category by Dirichlet shares; item quantities are
1-shifted Poisson with a log-rate carrying each household's latent price
sensitivity times the offered discount.  The same structure generates the
occurrence gates, so fitted mixtures are well specified (a config switch
produces a deliberately misspecified variant).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import HierarchySpec, ItemObservation, WeeklyRecord, rollup


@dataclass
class GroupConfig:
    n_households: int
    return_prob: float
    mean_spend: float
    return_concentration: float = 150.0
    spend_sigma: float = 0.45      # weekly log-spend noise
    spend_tau: float = 0.30       # household effect on log spend
    spend_drift_sd: float = 0.18   # stationary sd of the slow AR(1) drift
    spend_drift_phi: float = 0.97  # drift persistence (near random walk)


def table_groups(n_per_group: int = 2000) -> dict:
    """The calibration targets: return 0.96/0.94/0.84, spends ~$29/$19/$12."""
    return {
        1: GroupConfig(n_per_group, 0.96, 29.48),
        2: GroupConfig(n_per_group, 0.94, 19.23),
        3: GroupConfig(n_per_group, 0.84, 12.16),
    }


@dataclass
class GeneratorConfig:
    groups: dict = field(default_factory=table_groups)
    n_weeks: int = 112
    hierarchy: HierarchySpec = field(
        default_factory=lambda: HierarchySpec.grid(3, 2, 2))
    focus_item: str = "c1s1i1"
    seed: int = 0
    # cross-level coupling (the signal simultaneous predictors exploit)
    category_activity: float = 0.85
    activity_concentration: float = 30.0
    category_share: float = 0.35
    category_coupling: float = 0.9
    category_noise: float = 0.22
    subcat_activity: float = 0.8
    subcat_dirichlet: float = 4.0
    # item occurrence / quantity
    item_z_intercept: float = 0.2
    item_z_spend_coef: float = 1.2
    item_z_sensitivity_scale: float = 3.0
    item_base_rate: float = -0.4
    item_spend_coef: float = 0.9
    sensitive_fraction: float = 0.5
    sensitivity_value: float = 0.8
    # promotions
    promo_prob: float = 0.5
    discount_levels: tuple = (0.1, 0.2, 0.3, 0.4)
    offer_prob: float = 0.85
    misspecified: bool = False

    def __post_init__(self):
        if self.focus_item not in self.hierarchy.items:
            raise ValueError(f"focus item {self.focus_item} not in hierarchy")
        self.groups = {
            int(g): (cfg if isinstance(cfg, GroupConfig) else GroupConfig(**cfg))
            for g, cfg in self.groups.items()
        }

    def config_hash(self) -> str:
        payload = asdict(self)
        payload["hierarchy"] = {
            "categories": list(self.hierarchy.categories),
            "sub_categories": dict(sorted(self.hierarchy.sub_categories.items())),
            "items": dict(sorted(self.hierarchy.items.items())),
        }
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def group_log_spend_center(self, group: int) -> float:
        # lognormal mean correction over weekly noise, household effect and
        # the stationary drift, so E[spend | return] hits the group target
        g = self.groups[group]
        return (math.log(g.mean_spend) - 0.5 * g.spend_sigma**2
                - 0.5 * g.spend_tau**2 - 0.5 * g.spend_drift_sd**2)

    def category_center(self, group: int) -> float:
        return self.group_log_spend_center(group) + math.log(self.category_share)


@dataclass
class HouseholdTruth:
    group: int
    return_prob: float
    log_spend_mu: float
    category_activity: dict
    sensitivity: dict  # item -> latent price-sensitivity coefficient


@dataclass
class CorpusTruth:
    seed: int
    config_hash: str
    households: dict = field(default_factory=dict)
    promo_depth: dict = field(default_factory=dict)  # (item, week) -> depth


def household_ids(config: GeneratorConfig):
    for group in sorted(config.groups):
        for i in range(config.groups[group].n_households):
            yield f"g{group}h{i:05d}", group


def _promo_calendar(config: GeneratorConfig) -> dict:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    depth = {}
    levels = np.asarray(config.discount_levels)
    for item in sorted(config.hierarchy.items):
        promo = rng.random(config.n_weeks) < config.promo_prob
        picks = rng.integers(0, len(levels), size=config.n_weeks)
        for w in range(config.n_weeks):
            depth[(item, w + 1)] = float(levels[picks[w]]) if promo[w] else 0.0
    return depth


def _household_latents(config: GeneratorConfig, group: int, rng) -> HouseholdTruth:
    g = config.groups[group]
    c = g.return_concentration
    p = rng.beta(c * g.return_prob, c * (1.0 - g.return_prob))
    mu = config.group_log_spend_center(group) + g.spend_tau * rng.standard_normal()
    conc = config.activity_concentration
    activity = {
        cat: rng.beta(conc * config.category_activity,
                      conc * (1.0 - config.category_activity))
        for cat in config.hierarchy.categories
    }
    sensitivity = {}
    for item in sorted(config.hierarchy.items):
        if item == config.focus_item:
            sensitive = rng.random() < config.sensitive_fraction
            sensitivity[item] = config.sensitivity_value if sensitive else 0.0
        else:
            sensitivity[item] = 0.0
    return HouseholdTruth(group, float(p), float(mu), activity, sensitivity)


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def _simulate_household(config: GeneratorConfig, hh_id: str, group: int,
                        rng, calendar: dict, offers: np.ndarray):
    """One household's truth and 112-week record list.

    ``offers`` is the pre-drawn (item x week) offered-indicator matrix for
    this household (offers exist regardless of purchases or returns).
    """
    truth = _household_latents(config, group, rng)
    g = config.groups[group]
    hier = config.hierarchy
    items_sorted = sorted(hier.items)
    g_center = config.group_log_spend_center(group)
    cat_center = config.category_center(group)
    records = []
    drift = g.spend_drift_sd * rng.standard_normal()
    drift_innov = g.spend_drift_sd * math.sqrt(1.0 - g.spend_drift_phi**2)
    for week in range(1, config.n_weeks + 1):
        drift = g.spend_drift_phi * drift + drift_innov * rng.standard_normal()
        returned = rng.random() < truth.return_prob
        rec = WeeklyRecord(hh_id, week, bool(returned), 0.0)
        sub_spend = {s: 0.0 for s in hier.sub_categories}
        if returned:
            x = truth.log_spend_mu + drift + g.spend_sigma * rng.standard_normal()
            rec.total_spend = float(math.exp(x))
            for cat in hier.categories:
                if rng.random() >= truth.category_activity[cat]:
                    continue
                log_cat = (cat_center
                           + config.category_coupling * (x - g_center)
                           + config.category_noise * rng.standard_normal())
                spend_c = math.exp(log_cat)
                subs = hier.children_of_category(cat)
                active = [s for s in subs
                          if rng.random() < config.subcat_activity]
                if not active:
                    active = [subs[int(rng.integers(0, len(subs)))]]
                weights = rng.dirichlet([config.subcat_dirichlet] * len(active))
                for s, w in zip(active, weights):
                    sub_spend[s] = float(w * spend_c)
        rec.subcategory_spend = sub_spend
        rec.category_spend = {
            cat: rollup({s: sub_spend[s] for s in hier.children_of_category(cat)})
            for cat in hier.categories
        }
        for j, item in enumerate(items_sorted):
            depth = calendar[(item, week)]
            offered = bool(offers[j, week - 1]) and depth > 0.0
            d = depth if offered else 0.0
            price = 2.0 + (j % 7)
            obs = ItemObservation(0, price, d, offered)
            s_spend = sub_spend[hier.items[item]]
            if s_spend > 0.0:
                lsp = math.log(s_spend) - cat_center
                sens = truth.sensitivity[item]
                z_logit = (config.item_z_intercept
                           + config.item_z_spend_coef * lsp
                           + config.item_z_sensitivity_scale * sens * d)
                if rng.random() < _sigmoid(z_logit):
                    log_rate = (config.item_base_rate
                                + config.item_spend_coef * lsp
                                + sens * d)
                    if config.misspecified:
                        log_rate += 0.5 * rng.standard_normal()
                    obs.quantity = 1 + int(rng.poisson(math.exp(log_rate)))
            rec.items[item] = obs
        records.append(rec)
    return truth, records


def iter_households(config: GeneratorConfig):
    """Yields (household_id, group, truth, [WeeklyRecord]) in sorted order.

    Per-household RNG streams are spawned from the corpus seed, so any
    household can be regenerated independently and the corpus is
    reproducible bit-for-bit from (config, seed).
    """
    calendar = _promo_calendar(config)
    n_items = len(config.hierarchy.items)
    for idx, (hh_id, group) in enumerate(household_ids(config)):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1, idx]))
        offers = rng.random((n_items, config.n_weeks)) < config.offer_prob
        truth, records = _simulate_household(config, hh_id, group, rng,
                                             calendar, offers)
        yield hh_id, group, truth, records


def generate_synthetic(config: GeneratorConfig):
    """Materialized corpus: (records sorted by household/week, CorpusTruth).

    Prefer iter_households for large corpora; this keeps everything in
    memory.
    """
    truth = CorpusTruth(config.seed, config.config_hash(),
                        promo_depth=_promo_calendar(config))
    records = []
    for hh_id, _, hh_truth, recs in iter_households(config):
        truth.households[hh_id] = hh_truth
        records.extend(recs)
    return records, truth


def corpus_truth(config: GeneratorConfig) -> CorpusTruth:
    """Latent truth only (cheap: no weekly simulation is materialized)."""
    truth = CorpusTruth(config.seed, config.config_hash(),
                        promo_depth=_promo_calendar(config))
    for idx, (hh_id, group) in enumerate(household_ids(config)):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1, idx]))
        rng.random((len(config.hierarchy.items), config.n_weeks))
        truth.households[hh_id] = _household_latents(config, group, rng)
    return truth
