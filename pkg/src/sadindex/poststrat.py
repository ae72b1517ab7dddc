"""Post-stratification estimator: cell counts, group weights, adjusted distributions.

For a cell j (scope x period) with N[l][i] users of group i at sentiment level l,
the weight of group i is its population share over its sample share,
``w_i = p_i / (T_i / sum(T))``, and the adjusted share of level l is
``sum_i N[l][i] * w_i / sum_i T_i * w_i``. The SAD index is the adjusted
negative share. Groups with no sampled users are dropped from both sums.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .csvio import fmt, parse_float, read_csv, write_csv
from .demographics import GROUPS, PopulationTable, SocialGroup, parse_group
from .ingest import PeriodKey, period_range
from .sentiment import DEFAULT_THRESHOLDS, LEVELS, Level, Thresholds, UserPeriodSummary

log = logging.getLogger(__name__)

NATIONAL = "US"
SCOPE_LEVELS = ("national", "state")

COUNTS_HEADER = ("scope", "period", "gender", "age_bin", "negative", "neutral", "positive")
SAD_HEADER = ("scope", "period", "adj_negative", "adj_neutral", "adj_positive",
              "raw_negative", "raw_neutral", "raw_positive", "total_users",
              "excluded_groups", "insufficient_groups")

CellKey = tuple[str, PeriodKey]


class TabulationError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    granularity: str = "month"
    scope_level: str = "national"
    min_group_users: int = 50
    min_cell_users: int = 1
    thresholds: Thresholds = DEFAULT_THRESHOLDS
    max_weight: float | None = None

    def __post_init__(self):
        if self.min_group_users < 0 or self.min_cell_users < 0:
            raise ValueError("minimum user counts must be >= 0")
        if self.max_weight is not None and not self.max_weight > 0:
            raise ValueError("max_weight must be positive")


# --- counts ------------------------------------------------------------------

@dataclass
class GroupCellCounts:
    scope: str
    period: PeriodKey
    counts: Counter = field(default_factory=Counter)  # (SocialGroup, Level) -> users
    unknown_users: int = 0

    def n(self, group: SocialGroup, level: Level) -> int:
        return self.counts.get((group, level), 0)

    def group_total(self, group: SocialGroup) -> int:
        return sum(self.counts.get((group, l), 0) for l in LEVELS)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def merge(self, other: GroupCellCounts) -> GroupCellCounts:
        if (self.scope, self.period) != (other.scope, other.period):
            raise ValueError("cannot merge counts of different cells")
        return GroupCellCounts(self.scope, self.period, self.counts + other.counts,
                               self.unknown_users + other.unknown_users)

    def scaled(self, k: int) -> GroupCellCounts:
        return GroupCellCounts(self.scope, self.period,
                               Counter({key: v * k for key, v in self.counts.items()}),
                               self.unknown_users * k)


def scope_of(summary: UserPeriodSummary, level: str) -> str:
    if level == "national":
        return NATIONAL
    if level == "state":
        return summary.state
    raise ValueError(f"unknown scope level {level!r}")


class Tabulation:
    """Mergeable tally of users per (scope, period, group, level).

    Each user may appear once per cell. A repeat raises in strict mode; otherwise
    the later entry replaces the earlier one with a warning.
    """

    def __init__(self, strict: bool = False):
        self.strict = strict
        self._users: dict[CellKey, dict[str, tuple[SocialGroup | None, Level]]] = {}

    def add(self, scope: str, summary: UserPeriodSummary, group: SocialGroup | None) -> None:
        cell = self._users.setdefault((scope, summary.period), {})
        if summary.user_id in cell:
            msg = f"user {summary.user_id} appears twice in cell ({scope}, {summary.period})"
            if self.strict:
                raise TabulationError(msg)
            log.warning("%s; keeping the later entry", msg)
        cell[summary.user_id] = (group, summary.level)

    def merge(self, other: Tabulation) -> Tabulation:
        out = Tabulation(self.strict)
        for src in (self, other):
            for key, users in src._users.items():
                for uid, val in users.items():
                    dest = out._users.setdefault(key, {})
                    if uid in dest:
                        if out.strict:
                            raise TabulationError(f"user {uid} appears twice in cell {key}")
                        log.warning("user %s appears twice in cell %s", uid, key)
                    dest[uid] = val
        return out

    def cells(self) -> dict[CellKey, GroupCellCounts]:
        out = {}
        for key in sorted(self._users):
            c = GroupCellCounts(*key)
            for group, level in self._users[key].values():
                if group is None:
                    c.unknown_users += 1
                else:
                    c.counts[(group, level)] += 1
            out[key] = c
        return out


def tabulate(items: Iterable[tuple[UserPeriodSummary, SocialGroup | None]],
             scope_levels: str | Sequence[str] = "national",
             strict: bool = False) -> dict[CellKey, GroupCellCounts]:
    if isinstance(scope_levels, str):
        scope_levels = (scope_levels,)
    tab = Tabulation(strict)
    for summary, group in items:
        for level in scope_levels:
            tab.add(scope_of(summary, level), summary, group)
    return tab.cells()


# --- weights -----------------------------------------------------------------

@dataclass(frozen=True)
class WeightTable:
    scope: str
    period: PeriodKey
    weights: dict[SocialGroup, float | None]  # None marks an excluded group
    empty: bool = False
    warnings: tuple[str, ...] = ()

    @property
    def excluded(self) -> list[SocialGroup]:
        return [g for g in GROUPS if self.weights.get(g) is None]


def compute_weights(pop: PopulationTable, counts: GroupCellCounts, max_weight: float | None = None,
                    check_scope: bool = True) -> WeightTable:
    if check_scope and pop.scope != counts.scope:
        raise ValueError(f"population scope {pop.scope} does not match cell scope {counts.scope}")
    totals = [counts.group_total(g) for g in GROUPS]
    n = sum(totals)
    if n == 0:
        return WeightTable(counts.scope, counts.period, dict.fromkeys(GROUPS), empty=True)
    shares = pop.shares
    weights: dict[SocialGroup, float | None] = {}
    warnings = []
    for g, t in zip(GROUPS, totals):
        if t == 0:
            weights[g] = None
            continue
        w = shares[g] / (t / n)
        if shares[g] == 0:
            warnings.append(f"group {g.label} sampled in ({counts.scope}, {counts.period}) "
                            "but absent from the population table; weight 0")
        if max_weight is not None:
            w = min(w, max_weight)
        weights[g] = w
    for msg in warnings:
        log.warning(msg)
    return WeightTable(counts.scope, counts.period, weights, warnings=tuple(warnings))


# --- adjustment --------------------------------------------------------------

@dataclass(frozen=True)
class AdjustedDistribution:
    scope: str
    period: PeriodKey
    adjusted: dict[Level, float]  # empty when the cell has no usable users
    raw: dict[Level, float]
    total_users: int
    insufficient_groups: tuple[SocialGroup, ...] = ()
    excluded_groups: tuple[SocialGroup, ...] = ()
    unknown_users: int = 0
    flags: frozenset[str] = frozenset()

    @property
    def sad_index(self) -> float | None:
        return self.adjusted.get(Level.Negative)

    @property
    def raw_negative(self) -> float | None:
        return self.raw.get(Level.Negative)

    @property
    def is_empty(self) -> bool:
        return not self.adjusted

    @property
    def coverage(self) -> float:
        seen = self.total_users + self.unknown_users
        return self.total_users / seen if seen else 0.0


def adjust(counts: GroupCellCounts, weights: WeightTable,
           cfg: PipelineConfig = PipelineConfig()) -> AdjustedDistribution:
    if (weights.scope, weights.period) != (counts.scope, counts.period):
        raise ValueError("weights were computed for a different cell")
    totals = [counts.group_total(g) for g in GROUPS]
    n = sum(totals)
    excluded = tuple(g for g, t in zip(GROUPS, totals) if t == 0)
    insufficient = tuple(g for g, t in zip(GROUPS, totals) if 0 < t < cfg.min_group_users)
    base = dict(scope=counts.scope, period=counts.period, total_users=n,
                insufficient_groups=insufficient, excluded_groups=excluded,
                unknown_users=counts.unknown_users)
    if n == 0 or weights.empty:
        return AdjustedDistribution(adjusted={}, raw={}, flags=frozenset({"EmptyCell"}), **base)
    if n < cfg.min_cell_users:
        return AdjustedDistribution(adjusted={}, raw={}, flags=frozenset({"BelowMinimum"}), **base)

    raw = {l: sum(counts.n(g, l) for g in GROUPS) / n for l in LEVELS}

    # canonical group order keeps the floating-point sums reproducible
    included = [(g, weights.weights[g]) for g in GROUPS if weights.weights.get(g) is not None]
    denom = math.fsum(counts.group_total(g) * w for g, w in included)
    if denom <= 0:
        return AdjustedDistribution(adjusted={}, raw=raw, flags=frozenset({"ZeroWeight"}), **base)
    adjusted = {l: math.fsum(counts.n(g, l) * w for g, w in included) / denom for l in LEVELS}
    return AdjustedDistribution(adjusted=adjusted, raw=raw, **base)


def estimate_cell(pop: PopulationTable, counts: GroupCellCounts,
                  cfg: PipelineConfig = PipelineConfig(), check_scope: bool = True) -> AdjustedDistribution:
    weights = compute_weights(pop, counts, cfg.max_weight, check_scope=check_scope)
    return adjust(counts, weights, cfg)


# --- per-group views and series ---------------------------------------------

@dataclass(frozen=True)
class GroupPercentages:
    group: SocialGroup
    users: int
    shares: dict[Level, float]
    insufficient: bool


def per_group_percentages(counts: GroupCellCounts,
                          min_group_users: int = 50) -> dict[SocialGroup, GroupPercentages]:
    out = {}
    for g in GROUPS:
        t = counts.group_total(g)
        if t == 0:
            continue
        out[g] = GroupPercentages(g, t, {l: counts.n(g, l) / t for l in LEVELS}, t < min_group_users)
    return out


def sad_series(cells: Iterable[AdjustedDistribution],
               fill_gaps: bool = True) -> list[tuple[PeriodKey, float | None]]:
    """(period, SAD) points of one scope in period order; gaps and empty cells give None."""
    by_period: dict[PeriodKey, float | None] = {}
    scope = None
    for c in cells:
        if scope is None:
            scope = c.scope
        elif c.scope != scope:
            raise ValueError(f"sad_series mixes scopes {scope} and {c.scope}")
        by_period[c.period] = c.sad_index
    if not by_period:
        return []
    periods = sorted(by_period)
    if fill_gaps:
        periods = period_range(periods[0], periods[-1])
    return [(p, by_period.get(p)) for p in periods]


# --- CSV interfaces ----------------------------------------------------------

def counts_rows(cells: Iterable[GroupCellCounts]) -> list[list[str]]:
    rows = []
    for c in cells:
        for g in GROUPS:
            if c.group_total(g) == 0:
                continue
            rows.append([c.scope, c.period.label, g.gender.value, g.age_bin.value,
                         *(str(c.n(g, l)) for l in LEVELS)])
    return rows


def write_counts_csv(path, cells: Iterable[GroupCellCounts]):
    return write_csv(path, COUNTS_HEADER, counts_rows(cells))


def read_counts_csv(path) -> dict[CellKey, GroupCellCounts]:
    out: dict[CellKey, GroupCellCounts] = {}
    for row in read_csv(path, COUNTS_HEADER):
        key = (row["scope"], PeriodKey.parse(row["period"]))
        cell = out.setdefault(key, GroupCellCounts(*key))
        g = parse_group([row["gender"], row["age_bin"]])
        for l in LEVELS:
            v = int(row[l.name.lower()])
            if v < 0:
                raise ValueError(f"{path}: negative count in {key}")
            if v:
                cell.counts[(g, l)] += v
    return dict(sorted(out.items()))


def _labels(groups: Iterable[SocialGroup]) -> str:
    return "|".join(g.label for g in groups)


def sad_rows(dists: Iterable[AdjustedDistribution]) -> list[list[str]]:
    rows = []
    for d in dists:
        rows.append([d.scope, d.period.label,
                     *(fmt(d.adjusted.get(l)) for l in LEVELS),
                     *(fmt(d.raw.get(l)) for l in LEVELS),
                     str(d.total_users), _labels(d.excluded_groups), _labels(d.insufficient_groups)])
    return rows


def write_sad_csv(path, dists: Iterable[AdjustedDistribution]):
    return write_csv(path, SAD_HEADER, sad_rows(dists))


def read_sad_csv(path) -> list[AdjustedDistribution]:
    out = []
    for row in read_csv(path, SAD_HEADER):
        adjusted = {l: parse_float(row[f"adj_{l.name.lower()}"]) for l in LEVELS}
        raw = {l: parse_float(row[f"raw_{l.name.lower()}"]) for l in LEVELS}
        groups = lambda s: tuple(parse_group(x) for x in s.split("|") if x)  # noqa: E731
        empty = any(v is None for v in adjusted.values())
        out.append(AdjustedDistribution(
            scope=row["scope"], period=PeriodKey.parse(row["period"]),
            adjusted={} if empty else adjusted,
            raw={} if any(v is None for v in raw.values()) else raw,
            total_users=int(row["total_users"]),
            excluded_groups=groups(row["excluded_groups"]),
            insufficient_groups=groups(row["insufficient_groups"]),
            flags=frozenset({"EmptyCell"}) if empty else frozenset(),
        ))
    return out


def weights_rows(tables: Iterable[WeightTable]) -> list[list[str]]:
    rows = []
    for t in tables:
        for g in GROUPS:
            w = t.weights.get(g)
            rows.append([t.scope, t.period.label, g.gender.value, g.age_bin.value,
                         "excluded" if w is None else fmt(w)])
    return rows


def group_percentage_rows(cells: Iterable[GroupCellCounts], min_group_users: int) -> list[list[str]]:
    rows = []
    for c in cells:
        for g, gp in per_group_percentages(c, min_group_users).items():
            rows.append([c.scope, c.period.label, g.gender.value, g.age_bin.value, str(gp.users),
                         *(fmt(gp.shares[l]) for l in LEVELS), str(int(gp.insufficient))])
    return rows


def population_for(tables: Mapping[str, PopulationTable], scope: str, mode: str = "matched") -> PopulationTable:
    """Pick the census table for a cell: its own scope, or always national."""
    key = scope if mode == "matched" else NATIONAL
    try:
        return tables[key]
    except KeyError:
        raise KeyError(f"no population table for scope {key}") from None
