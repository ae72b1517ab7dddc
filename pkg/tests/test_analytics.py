import datetime as dt
import math

import pytest
from hypothesis import given, strategies as st

from sadindex.analytics import (CaseRateSeries, Delta, InsufficientOverlap, ZeroVariance, adjustment_delta, align,
                                betainc, case_rates, correlate, pearson, read_cumulative_cases, split_by_year)
from sadindex.ingest import PeriodKey, period_range
from sadindex.poststrat import AdjustedDistribution
from sadindex.sentiment import Level

# 20-point fixture; expected r from numpy.corrcoef and p from adaptive quadrature of the
# Student-t density (scipy.integrate.quad), computed once and frozen here
FIX_X = [8.363, 8.583, 5.441, 2.473, 6.35, 9.736, 4.738, 0.637, 2.699, 4.75,
         9.132, 1.613, 8.296, 7.433, 6.738, 5.478, 0.51, 8.266, 4.673, 1.995]
FIX_Y = [6.129, 1.786, 7.853, 0.93, 2.028, 6.566, -0.204, 2.412, 2.686, 3.274,
         6.878, 0.301, 6.12, 5.468, 0.313, 2.746, 0.399, 3.532, -4.204, -0.624]
FIX_R = 0.5739018788714261
FIX_P = 0.00814546669911403


def weeks(first, n):
    start = PeriodKey.parse(first)
    return period_range(start, start if n == 1 else _advance(start, n - 1))


def _advance(k, n):
    for _ in range(n):
        k = k.next()
    return k


class TestBeta:
    @pytest.mark.parametrize("a", [0.5, 1.0, 2.5, 9.0, 30.0])
    @pytest.mark.parametrize("b", [0.5, 1.0, 3.0, 12.0])
    @pytest.mark.parametrize("x", [0.01, 0.2, 0.5, 0.77, 0.99])
    def test_symmetry(self, a, b, x):
        assert betainc(a, b, x) + betainc(b, a, 1 - x) == pytest.approx(1.0, abs=1e-10)

    def test_closed_forms(self):
        assert betainc(1, 1, 0.3) == pytest.approx(0.3, abs=1e-12)
        assert betainc(2, 1, 0.3) == pytest.approx(0.09, abs=1e-12)
        assert betainc(0.5, 0.5, 0.5) == pytest.approx(0.5, abs=1e-12)
        assert betainc(3, 4, 0) == 0 and betainc(3, 4, 1) == 1

    def test_domain(self):
        with pytest.raises(ValueError):
            betainc(0, 1, 0.5)
        with pytest.raises(ValueError):
            betainc(1, 1, 1.5)


class TestPearson:
    def test_linear(self):
        xs = [0.5, 1.7, 2.2, 3.9, 8.0]
        res = pearson([(x, 2 * x + 1) for x in xs])
        assert res.r == 1.0 and res.p_value == 0.0

    def test_anti_linear(self):
        assert pearson([(1, 6), (2, 4), (3, 2)]).r == -1.0

    def test_fixture_against_quadrature(self):
        res = pearson(list(zip(FIX_X, FIX_Y)))
        assert res.n == 20
        assert res.r == pytest.approx(FIX_R, abs=1e-6)
        assert res.p_value == pytest.approx(FIX_P, abs=1e-6)

    def test_errors(self):
        with pytest.raises(InsufficientOverlap):
            pearson([(1, 2), (2, 3)])
        with pytest.raises(ZeroVariance):
            pearson([(1, 2), (2, 2), (3, 2)])

    @given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=3, max_size=30),
           st.floats(0.1, 10), st.floats(-50, 50))
    def test_symmetric_and_affine_invariant(self, pairs, scale, shift):
        try:
            base = pearson(pairs)
        except ZeroVariance:
            return
        if math.isclose(base.r, 0, abs_tol=1e-6):
            return
        assert pearson([(y, x) for x, y in pairs]).r == pytest.approx(base.r, abs=1e-12)
        moved = pearson([(x * scale + shift, y) for x, y in pairs])
        assert moved.r == pytest.approx(base.r, abs=1e-9)
        assert 0 <= base.p_value <= 1 and -1 <= base.r <= 1

    def test_p_monotone_in_r(self):
        from sadindex.analytics import t_two_sided_p

        ps = [t_two_sided_p(r * math.sqrt(18 / (1 - r * r)), 18) for r in [i / 20 for i in range(20)]]
        assert all(a > b for a, b in zip(ps, ps[1:]))


class TestAlign:
    def test_full_overlap(self):
        ks = weeks("2020-W01", 52)
        a = align([(k, 0.3) for k in ks], CaseRateSeries("US", tuple((k, 1.0) for k in ks)))
        assert len(a.pairs) == 52 and a.dropped_sad == a.dropped_cases == 0

    def test_partial(self):
        ks = weeks("2020-W10", 10)
        a = align([(k, 0.3) for k in ks], CaseRateSeries("US", tuple((k, 1.0) for k in ks[2:])))
        assert len(a.pairs) == 8 and a.dropped_sad == 2

    def test_disjoint(self):
        with pytest.raises(InsufficientOverlap):
            align([(k, 0.3) for k in weeks("2020-W01", 5)],
                  CaseRateSeries("US", tuple((k, 1.0) for k in weeks("2020-W20", 5))))

    def test_absent_sad_points_skip(self):
        ks = weeks("2020-W01", 5)
        a = align([(k, None if i == 1 else 0.3) for i, k in enumerate(ks)],
                  CaseRateSeries("US", tuple((k, 1.0) for k in ks)))
        assert len(a.pairs) == 4

    def test_case_series_invariants(self):
        k1, k2 = weeks("2020-W01", 2)
        with pytest.raises(ValueError):
            CaseRateSeries("US", ((k2, 1.0), (k1, 1.0)))
        with pytest.raises(ValueError):
            CaseRateSeries("US", ((k1, -1.0),))


class TestYears:
    def test_two_years(self):
        ks = weeks("2020-W01", 105)
        buckets = split_by_year([(k, 0.0) for k in ks])
        assert sorted(buckets) == [2020, 2021] and len(buckets[2020]) == 53 and len(buckets[2021]) == 52

    def test_single_year(self):
        assert list(split_by_year([(k, 0.0) for k in weeks("2021-W05", 4)])) == [2021]

    def test_iso_week_year(self):
        k = PeriodKey("week", dt.date(2021, 1, 1).isocalendar()[:2])
        assert list(split_by_year([(k, 1.0)])) == [2020]

    def test_correlate_per_year(self):
        ks = weeks("2020-W40", 30)
        sad = [(k, 0.2 + 0.01 * i) for i, k in enumerate(ks)]
        cases = CaseRateSeries("US", tuple((k, 5.0 * i + 3) for i, k in enumerate(ks)))
        res = correlate(sad, cases)
        assert [r.window for r in res] == ["2020", "2021", "all"]
        assert all(r.r == pytest.approx(1.0, abs=1e-12) for r in res)
        anti = CaseRateSeries("US", tuple((k, 500 - 5.0 * i) for i, k in enumerate(ks)))
        assert correlate(sad, anti)[-1].r == pytest.approx(-1.0, abs=1e-12)


class TestCaseRates:
    def test_weekly_new_per_100k(self):
        d = dt.date(2020, 3, 2)  # a Monday
        daily = [(d + dt.timedelta(days=i), float(10 * (i + 1))) for i in range(14)]
        s = case_rates(daily, 1_000_000, "US", "week")
        assert [k.label for k, _ in s.points] == ["2020-W10", "2020-W11"]
        assert s.points[0][1] == pytest.approx(70 / 1_000_000 * 1e5)
        assert s.points[1][1] == pytest.approx(70 / 1_000_000 * 1e5)

    def test_cumulative_mode(self):
        d = dt.date(2020, 3, 2)
        daily = [(d + dt.timedelta(days=i), float(i)) for i in range(7)]
        (point,) = case_rates(daily, 100_000, "US", "week", mode="cumulative").points
        assert point[1] == 6.0

    def test_read(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("scope,date,cumulative_cases\nus,2020-03-02,5\nUS,2020-03-01,1\n")
        assert read_cumulative_cases(p) == {"US": [(dt.date(2020, 3, 1), 1.0), (dt.date(2020, 3, 2), 5.0)]}
        p.write_text("scope,date,cumulative_cases\nUS,yesterday,5\n")
        with pytest.raises(ValueError, match=":2:"):
            read_cumulative_cases(p)


def dist(scope, raw, adj):
    return AdjustedDistribution(scope, PeriodKey.parse("all"), {Level.Negative: adj}, {Level.Negative: raw}, 10)


class TestDelta:
    def test_reference_states(self):
        s = adjustment_delta([dist("VT", 0.2063, 0.2201), dist("TX", 0.2921, 0.2817), dist("WY", 0.3, 0.3)])
        by = {d.scope: d.delta for d in s.rows}
        assert by["VT"] == pytest.approx(0.0138, abs=1e-12)
        assert by["TX"] == pytest.approx(-0.0104, abs=1e-12)
        assert by["WY"] == 0
        assert (s.increased, s.decreased, s.unchanged) == (1, 1, 1)

    def test_delta_type(self):
        assert Delta("US", PeriodKey.parse("all"), 0.5, 0.25).delta == -0.25
