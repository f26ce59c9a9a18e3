"""Weekly purchase records: schema, validation, CSV round trip, and the
promotion-behaviour categorization used to pick focus items.

CSV schema (version 1) is one row per (household, week, item), with the
week-level fields repeated on every row of the block and every item of the
hierarchy present exactly once per block:

    household_id,week,returned,total_spend,category,category_spend,
    sub_category,sub_category_spend,item,quantity,unit_price,discount_pct,
    offered

Files must be sorted by (household, week).  Hard validation rules, checked
with row numbers on failure: a non-returning week carries zero spends and
quantities everywhere; a returning week has positive total spend; every
category spend equals the key-sorted sum of its sub-category spends; a
positive quantity requires positive spend in the item's sub-category;
duplicate (household, week) blocks are rejected.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

CSV_COLUMNS = (
    "household_id", "week", "returned", "total_spend",
    "category", "category_spend", "sub_category", "sub_category_spend",
    "item", "quantity", "unit_price", "discount_pct", "offered",
)


class DataValidationError(ValueError):
    """Schema or invariant violation in a corpus."""


@dataclass(frozen=True)
class HierarchySpec:
    """Category > sub-category > item tree."""

    categories: tuple
    sub_categories: dict  # sub_category -> category
    items: dict           # item -> sub_category

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        for sub, cat in self.sub_categories.items():
            if cat not in self.categories:
                raise ValueError(f"sub-category {sub} maps to unknown category {cat}")
        for item, sub in self.items.items():
            if sub not in self.sub_categories:
                raise ValueError(f"item {item} maps to unknown sub-category {sub}")

    def category_of(self, item: str) -> str:
        return self.sub_categories[self.items[item]]

    def subcategory_of(self, item: str) -> str:
        return self.items[item]

    def children_of_category(self, category: str):
        return sorted(s for s, c in self.sub_categories.items() if c == category)

    def items_in_subcategory(self, sub: str):
        return sorted(i for i, s in self.items.items() if s == sub)

    @classmethod
    def grid(cls, n_categories: int, subs_per_category: int, items_per_sub: int):
        """Regular labelled tree: c1, c1s1, c1s1i1, ..."""
        cats, subs, items = [], {}, {}
        for c in range(1, n_categories + 1):
            cat = f"c{c}"
            cats.append(cat)
            for s in range(1, subs_per_category + 1):
                sub = f"{cat}s{s}"
                subs[sub] = cat
                for i in range(1, items_per_sub + 1):
                    items[f"{sub}i{i}"] = sub
        return cls(tuple(cats), subs, items)


@dataclass
class ItemObservation:
    quantity: int = 0
    unit_price: float = 0.0
    discount_pct: float = 0.0
    offered: bool = False


@dataclass
class WeeklyRecord:
    household_id: str
    week: int
    returned: bool
    total_spend: float
    category_spend: dict = field(default_factory=dict)
    subcategory_spend: dict = field(default_factory=dict)
    items: dict = field(default_factory=dict)  # item -> ItemObservation


def rollup(values: dict) -> float:
    """Key-sorted sum; the one true way parents are computed from children."""
    return float(sum(values[k] for k in sorted(values)))


def validate_record(record: WeeklyRecord, hierarchy: HierarchySpec, row_hint=""):
    where = f"{row_hint}household {record.household_id} week {record.week}"
    if not record.returned:
        if record.total_spend != 0.0:
            raise DataValidationError(f"{where}: no return but positive total spend")
        if any(v != 0.0 for v in record.category_spend.values()) or any(
                v != 0.0 for v in record.subcategory_spend.values()):
            raise DataValidationError(f"{where}: no return but positive spends")
        if any(obs.quantity != 0 for obs in record.items.values()):
            raise DataValidationError(f"{where}: no return but positive quantity")
    elif record.total_spend <= 0.0:
        raise DataValidationError(f"{where}: returned with non-positive total spend")
    for cat in hierarchy.categories:
        child_sum = rollup({
            s: record.subcategory_spend.get(s, 0.0)
            for s in hierarchy.children_of_category(cat)
        })
        if record.category_spend.get(cat, 0.0) != child_sum:
            raise DataValidationError(
                f"{where}: category {cat} spend does not equal its"
                f" sub-category sum"
            )
    for item, obs in record.items.items():
        if obs.quantity < 0:
            raise DataValidationError(f"{where}: negative quantity for {item}")
        if not 0.0 <= obs.discount_pct <= 1.0:
            raise DataValidationError(f"{where}: discount out of [0,1] for {item}")
        sub = hierarchy.subcategory_of(item)
        if obs.quantity > 0 and record.subcategory_spend.get(sub, 0.0) <= 0.0:
            raise DataValidationError(
                f"{where}: item {item} purchased with zero {sub} spend"
            )


def write_csv(path, records, hierarchy: HierarchySpec):
    """Serialize sorted records; float fields use repr (exact round trip)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            for item in sorted(hierarchy.items):
                sub = hierarchy.subcategory_of(item)
                cat = hierarchy.sub_categories[sub]
                obs = rec.items.get(item, ItemObservation())
                writer.writerow([
                    rec.household_id, rec.week, int(rec.returned),
                    repr(rec.total_spend),
                    cat, repr(rec.category_spend.get(cat, 0.0)),
                    sub, repr(rec.subcategory_spend.get(sub, 0.0)),
                    item, obs.quantity, repr(obs.unit_price),
                    repr(obs.discount_pct), int(obs.offered),
                ])


def ingest_csv(path, hierarchy: HierarchySpec):
    """Stream validated WeeklyRecords from a version-1 CSV file.

    Yields records in file order; raises DataValidationError with the
    offending row number on schema or invariant violations.
    """
    expected_items = set(hierarchy.items)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise DataValidationError(
                f"unrecognized CSV header {header!r}; expected version-1 schema"
            )
        seen_blocks = set()
        closed_households = set()
        last_key = None
        current = None
        current_rows = None
        row_no = 1

        def finish(rec, first_row):
            missing = expected_items - set(rec.items)
            if missing:
                raise DataValidationError(
                    f"rows near {first_row}: block for household"
                    f" {rec.household_id} week {rec.week} missing items"
                    f" {sorted(missing)[:3]}..."
                )
            validate_record(rec, hierarchy, row_hint=f"rows near {first_row}: ")
            return rec

        for row in reader:
            row_no += 1
            if len(row) != len(CSV_COLUMNS):
                raise DataValidationError(f"row {row_no}: wrong column count")
            try:
                hh, week = row[0], int(row[1])
                returned = bool(int(row[2]))
                total = float(row[3])
                cat, cat_spend = row[4], float(row[5])
                sub, sub_spend = row[6], float(row[7])
                item = row[8]
                qty = int(row[9])
                price = float(row[10])
                disc = float(row[11])
                offered = bool(int(row[12]))
            except ValueError as exc:
                raise DataValidationError(f"row {row_no}: {exc}") from exc
            if item not in hierarchy.items:
                raise DataValidationError(f"row {row_no}: unknown item {item}")
            if hierarchy.subcategory_of(item) != sub or hierarchy.sub_categories.get(
                    sub) != cat:
                raise DataValidationError(
                    f"row {row_no}: item {item} filed under wrong hierarchy nodes"
                )
            key = (hh, week)
            if key != last_key:
                if current is not None:
                    yield finish(current, current_rows)
                if key in seen_blocks:
                    raise DataValidationError(
                        f"row {row_no}: duplicate block for household {hh}"
                        f" week {week}"
                    )
                if last_key is not None and last_key[0] != hh:
                    closed_households.add(last_key[0])
                    if hh in closed_households:
                        raise DataValidationError(
                            f"row {row_no}: household {hh} blocks are not"
                            f" contiguous; input must be sorted"
                        )
                if last_key is not None and last_key[0] == hh and week <= last_key[1]:
                    raise DataValidationError(
                        f"row {row_no}: weeks out of order for household {hh}"
                    )
                seen_blocks.add(key)
                current = WeeklyRecord(hh, week, returned, total)
                current_rows = row_no
                last_key = key
            else:
                if (bool(current.returned), current.total_spend) != (returned, total):
                    raise DataValidationError(
                        f"row {row_no}: inconsistent week-level fields in block"
                    )
            if item in current.items:
                raise DataValidationError(
                    f"row {row_no}: duplicate item {item} in block"
                )
            prev_cat = current.category_spend.setdefault(cat, cat_spend)
            prev_sub = current.subcategory_spend.setdefault(sub, sub_spend)
            if prev_cat != cat_spend or prev_sub != sub_spend:
                raise DataValidationError(
                    f"row {row_no}: inconsistent spend for {cat}/{sub}"
                )
            current.items[item] = ItemObservation(qty, price, disc, offered)
        if current is not None:
            yield finish(current, current_rows)


# ---------------------------------------------------------------------------
# promotion-behaviour categorization


@dataclass(frozen=True)
class CategorizeThresholds:
    dop_min: float = 0.1          # below: promotions effectively unavailable
    sensitivity_gap: float = 0.15  # DPP - RPP needed to call a household sensitive
    loyal_rate: float = 0.5        # overall purchase rate for the loyal class


@dataclass
class HouseholdItemProfile:
    dop: float
    dpp: float
    rpp: float
    category: int


def categorize_household(records, item: str,
                         thresholds: CategorizeThresholds = CategorizeThresholds()):
    """Promotion-offer exposure (DOP), purchase rates under promo (DPP) and
    regular price (RPP), and the 1-4 behaviour class for one household-item
    pair.  ``records`` is one household's full weekly history."""
    n_weeks = 0
    promo_weeks = 0
    promo_buys = 0
    regular_buys = 0
    for rec in records:
        n_weeks += 1
        obs = rec.items.get(item, ItemObservation())
        promo = obs.offered and obs.discount_pct > 0.0
        bought = obs.quantity > 0
        if promo:
            promo_weeks += 1
            promo_buys += bought
        else:
            regular_buys += bought
    if n_weeks == 0:
        raise ValueError("no records supplied")
    dop = promo_weeks / n_weeks
    dpp = promo_buys / promo_weeks if promo_weeks else 0.0
    regular_weeks = n_weeks - promo_weeks
    rpp = regular_buys / regular_weeks if regular_weeks else 0.0
    buy_rate = (promo_buys + regular_buys) / n_weeks

    if dop < thresholds.dop_min:
        category = 3
    elif dpp - rpp >= thresholds.sensitivity_gap:
        category = 2
    elif buy_rate >= thresholds.loyal_rate:
        category = 1
    else:
        category = 4
    return HouseholdItemProfile(dop, dpp, rpp, category)


def select_items(records, hierarchy: HierarchySpec,
                 thresholds: CategorizeThresholds = CategorizeThresholds()):
    """Rank items by the share of households in behaviour class 2
    (promotion-sensitive); ties break on item id."""
    by_household = {}
    for rec in records:
        by_household.setdefault(rec.household_id, []).append(rec)
    ranking = []
    for item in sorted(hierarchy.items):
        if not by_household:
            continue
        sensitive = sum(
            categorize_household(recs, item, thresholds).category == 2
            for recs in by_household.values()
        )
        ranking.append((item, sensitive / len(by_household)))
    ranking.sort(key=lambda pair: (-pair[1], pair[0]))
    return ranking


def assign_groups(records) -> dict:
    """Household groups 1..3 from tertiles of total items purchased
    (group 1 = heaviest purchasers)."""
    import numpy as np

    totals = {}
    for rec in records:
        totals[rec.household_id] = totals.get(rec.household_id, 0) + sum(
            obs.quantity for obs in rec.items.values()
        )
    if not totals:
        return {}
    counts = np.array(list(totals.values()), dtype=float)
    hi, lo = np.percentile(counts, [200 / 3, 100 / 3])
    groups = {}
    for hh, total in totals.items():
        if total >= hi:
            groups[hh] = 1
        elif total >= lo:
            groups[hh] = 2
        else:
            groups[hh] = 3
    return groups
