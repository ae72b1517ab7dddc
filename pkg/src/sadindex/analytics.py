"""Series alignment, Pearson correlation with significance, raw-vs-adjusted deltas."""

from __future__ import annotations

import datetime as dt
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .csvio import fmt, read_csv, write_csv
from .ingest import PeriodKey, period_of_date
from .poststrat import AdjustedDistribution, sad_series

CORRELATION_HEADER = ("scope", "window", "n", "r", "p_value")


class InsufficientOverlap(ValueError):
    pass


class ZeroVariance(ValueError):
    pass


# --- regularized incomplete beta --------------------------------------------

_TINY = 1e-300


def _beta_cf(a: float, b: float, x: float, tol: float, max_iter: int) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float, tol: float = 1e-12, max_iter: int = 300) -> float:
    """Regularized incomplete beta function I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError("betainc needs 0 <= x <= 1")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x, tol, max_iter) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x, tol, max_iter) / b


def t_two_sided_p(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


# --- correlation -------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationResult:
    n: int
    r: float
    p_value: float
    window: str = "all"


def pearson(pairs: Sequence[tuple[float, float]], window: str = "all") -> CorrelationResult:
    n = len(pairs)
    if n < 3:
        raise InsufficientOverlap(f"pearson needs at least 3 pairs, got {n}")
    xs = [float(p[0]) for p in pairs]
    ys = [float(p[1]) for p in pairs]
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise ZeroVariance("pearson is undefined for a constant series")
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    r = max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))
    df = n - 2
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt(df / (1.0 - r * r))
        p = min(1.0, max(0.0, t_two_sided_p(t, df)))
    return CorrelationResult(n, r, p, window)


# --- alignment ---------------------------------------------------------------

@dataclass(frozen=True)
class CaseRateSeries:
    scope: str
    points: tuple[tuple[PeriodKey, float], ...]

    def __post_init__(self):
        for (p0, _), (p1, _) in zip(self.points, self.points[1:]):
            if not p0 < p1:
                raise ValueError(f"case-rate periods not strictly increasing at {p1}")
        if any(v < 0 for _, v in self.points):
            raise ValueError("case rates must be non-negative")


@dataclass(frozen=True)
class Aligned:
    pairs: tuple[tuple[PeriodKey, float, float], ...]  # (period, sad, case rate)
    dropped_sad: int
    dropped_cases: int

    def values(self) -> list[tuple[float, float]]:
        return [(s, c) for _, s, c in self.pairs]


def align(sad: Iterable[tuple[PeriodKey, float | None]], cases: CaseRateSeries,
          min_pairs: int = 3) -> Aligned:
    """Inner join on period. Absent SAD points count as unmatched."""
    sad_map = {p: v for p, v in sad if v is not None}
    case_map = dict(cases.points)
    common = sorted(set(sad_map) & set(case_map))
    if len(common) < min_pairs:
        raise InsufficientOverlap(f"only {len(common)} overlapping periods for {cases.scope}")
    return Aligned(tuple((p, sad_map[p], case_map[p]) for p in common),
                   len(sad_map) - len(common), len(case_map) - len(common))


def split_by_year(pairs: Iterable[tuple]) -> dict[int, list[tuple]]:
    """Bucket period-keyed tuples by year (ISO week-year for weekly keys), keeping order."""
    out: dict[int, list[tuple]] = {}
    for item in pairs:
        out.setdefault(item[0].year, []).append(item)
    return out


def correlate(sad: Sequence[tuple[PeriodKey, float | None]], cases: CaseRateSeries,
              by_year: bool = True) -> list[CorrelationResult]:
    aligned = align(sad, cases)
    results = []
    if by_year:
        for year, items in sorted(split_by_year(aligned.pairs).items()):
            if len(items) >= 3:
                results.append(pearson([(s, c) for _, s, c in items], str(year)))
    results.append(pearson(aligned.values(), "all"))
    return results


# --- case data ---------------------------------------------------------------

def read_cumulative_cases(path) -> dict[str, list[tuple[dt.date, float]]]:
    by_scope: dict[str, list[tuple[dt.date, float]]] = defaultdict(list)
    for n, row in enumerate(read_csv(path, ("scope", "date", "cumulative_cases")), 2):
        try:
            day = dt.date.fromisoformat(row["date"].strip())
            value = float(row["cumulative_cases"])
        except ValueError as exc:
            raise ValueError(f"{path}:{n}: {exc}") from None
        by_scope[row["scope"].strip().upper()].append((day, value))
    return {s: sorted(v) for s, v in sorted(by_scope.items())}


def case_rates(daily: Sequence[tuple[dt.date, float]], population: float, scope: str,
               granularity: str = "week", mode: str = "new") -> CaseRateSeries:
    """Convert daily cumulative counts into per-100,000 rates per period.

    ``mode="new"`` sums daily increases within each period (cumulative is taken to
    be 0 before the first row; negative corrections are kept but a period never
    goes below 0). ``mode="cumulative"`` uses the last cumulative value of the period.
    """
    if population <= 0:
        raise ValueError(f"population for {scope} must be positive")
    per: dict[PeriodKey, float] = {}
    prev = 0.0
    for day, cum in sorted(daily):
        key = period_of_date(day, granularity)
        if mode == "new":
            per[key] = per.get(key, 0.0) + (cum - prev)
        elif mode == "cumulative":
            per[key] = cum
        else:
            raise ValueError(f"unknown case-rate mode {mode!r}")
        prev = cum
    points = tuple((k, max(0.0, v) / population * 100_000) for k, v in sorted(per.items()))
    return CaseRateSeries(scope, points)


# --- raw vs adjusted ---------------------------------------------------------

@dataclass(frozen=True)
class Delta:
    scope: str
    period: PeriodKey
    raw_negative: float
    sad_index: float

    @property
    def delta(self) -> float:
        return self.sad_index - self.raw_negative


@dataclass(frozen=True)
class DeltaSummary:
    rows: tuple[Delta, ...]
    increased: int
    decreased: int
    unchanged: int


def adjustment_delta(cells: Iterable[AdjustedDistribution]) -> DeltaSummary:
    rows = tuple(Delta(c.scope, c.period, c.raw_negative, c.sad_index)
                 for c in cells if not c.is_empty)
    rows = tuple(sorted(rows, key=lambda d: (d.scope, d.period)))
    up = sum(d.delta > 0 for d in rows)
    down = sum(d.delta < 0 for d in rows)
    return DeltaSummary(rows, up, down, len(rows) - up - down)


def write_correlation_csv(path, scope: str, results: Iterable[CorrelationResult]):
    rows = [[scope, r.window, str(r.n), fmt(r.r), fmt(r.p_value)] for r in results]
    return write_csv(path, CORRELATION_HEADER, rows)


def delta_rows(summary: DeltaSummary) -> list[list[str]]:
    return [[d.scope, d.period.label, fmt(d.raw_negative), fmt(d.sad_index), fmt(d.delta)]
            for d in summary.rows]


def sad_points_from_cells(cells: Iterable[AdjustedDistribution], scope: str) -> list[tuple[PeriodKey, float | None]]:
    return sad_series([c for c in cells if c.scope == scope])


def population_totals(tables: Mapping) -> dict[str, float]:
    return {scope: t.total for scope, t in tables.items()}
