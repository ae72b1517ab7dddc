import datetime as dt
import json
import string

import pytest
from hypothesis import given, strategies as st

from conftest import FIXTURES
from sadindex.ingest import (ALL_PERIOD, DROP_REASONS, CleaningPolicy, CleaningReport, KeywordSet, PeriodKey,
                             PostRecord, RecordError, assign_period, clean_corpus, default_keyword_set,
                             dump_record, is_human_generated, load_source_allowlist, matches_keywords,
                             parse_record, period_range, read_corpus)

UTC = dt.timezone.utc
KW20 = default_keyword_set("2020")
KW21 = default_keyword_set("2021")
POLICY = CleaningPolicy(load_source_allowlist())


def rec(i, text="covid today", state="CA", source="Twitter for iPhone", verified=False, user="u"):
    return PostRecord(str(i), user, dt.datetime(2020, 3, 1, tzinfo=UTC), text, state, source, verified)


def line(**kw):
    base = {"id": "1", "user_id": "u", "created_at": "2020-03-15T12:00:00Z", "text": "covid"}
    base.update(kw)
    return json.dumps({k: v for k, v in base.items() if v is not None})


class TestParse:
    def test_state_is_uppercased(self):
        assert parse_record(line(state="tx")).state == "TX"

    def test_missing_id(self):
        with pytest.raises(RecordError) as err:
            parse_record(line(id=None), 7)
        assert err.value.kind == "MissingField" and err.value.detail == "id"
        assert err.value.line_no == 7

    def test_score_out_of_range(self):
        with pytest.raises(RecordError) as err:
            parse_record(line(sentiment=1.2))
        assert (err.value.kind, err.value.detail) == ("OutOfRange", "precomputed_score")

    def test_malformed_json_carries_line(self):
        with pytest.raises(RecordError) as err:
            parse_record('{"id": ', 12)
        assert err.value.kind == "Malformed" and err.value.line_no == 12

    def test_timestamp_normalized_to_utc(self):
        r = parse_record(line(created_at="2020-03-15T08:00:00-04:00"))
        assert r.created_at == dt.datetime(2020, 3, 15, 12, 0, tzinfo=UTC)

    def test_epoch_seconds(self):
        assert parse_record(line(created_at=0)).created_at == dt.datetime(1970, 1, 1, tzinfo=UTC)

    def test_unknown_state_becomes_none(self):
        assert parse_record(line(state="ZZ")).state is None

    def test_group_and_score(self):
        r = parse_record(line(group="Female,A_le18", sentiment=-0.87))
        assert r.precomputed_group.label == "Female,A_le18"
        assert r.precomputed_score == -0.87

    def test_round_trip(self):
        r = parse_record(line(state="ny", bio="hi", sentiment=0.5, group="Male,A_ge40"))
        assert parse_record(dump_record(r)) == r


class TestKeywords:
    def test_documented_examples(self):
        assert matches_keywords("Lockdown does save precious lives", KW20)
        assert not matches_keywords("hello world", KW20)
        assert matches_keywords("Got my Pfizer shot!", KW21)

    def test_stem_substring(self):
        assert matches_keywords("fully vaccinated", KW21)

    @given(st.text(alphabet=string.ascii_letters + string.digits + " -", max_size=60))
    def test_case_insensitive(self, text):
        assert matches_keywords(text, KW21) == matches_keywords(text.upper(), KW21)

    def test_keyword_set_validation(self):
        with pytest.raises(ValueError):
            KeywordSet("x", ("Covid",))
        with pytest.raises(ValueError):
            KeywordSet("x", ())


class TestHuman:
    def test_verified_dropped(self):
        assert not is_human_generated(rec(1, verified=True), POLICY)

    def test_allowlisted(self):
        assert is_human_generated(rec(1), POLICY)

    def test_bot_source(self):
        assert not is_human_generated(rec(1, source="AutoPosterBot9000"), POLICY)

    def test_empty_allowlist_rejected(self):
        with pytest.raises(ValueError):
            CleaningPolicy(frozenset())


class TestClean:
    def test_duplicates(self):
        recs = [rec(1), rec(2), rec(1), rec(3), rec(2)]
        report = CleaningReport()
        out = list(clean_corpus(recs, KW20, POLICY, report))
        assert [r.id for r in out] == ["1", "2", "3"]
        assert report.dropped["duplicate"] == 2

    def test_no_geo(self):
        report = CleaningReport()
        assert list(clean_corpus([rec(1, state=None)], KW20, POLICY, report)) == []
        assert report.dropped["no_geo"] == 1

    def test_fixture_corpus(self):
        report = CleaningReport()
        out = list(clean_corpus(read_corpus(FIXTURES / "cleaning_12.jsonl", report), KW20, POLICY, report,
                                count_input=False))
        assert len(out) == 7
        assert report.dropped["non_human"] == 3 and report.dropped["off_topic"] == 2
        assert report.input == 12

    def test_parse_errors_counted_not_fatal(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text(line(id="a") + "\n{bad\n" + line(id="b") + "\n")
        report = CleaningReport()
        assert [r.id for r in read_corpus(p, report)] == ["a", "b"]
        assert report.dropped["parse_error"] == 1 and report.input == 3
        with pytest.raises(RecordError):
            list(read_corpus(p, strict=True))

    @given(st.lists(st.tuples(st.integers(0, 15), st.sampled_from(["covid", "hello", "LOCKDOWN now"]),
                              st.sampled_from(["CA", None]), st.sampled_from(["Twitter for iPhone", "bot"]),
                              st.booleans()), max_size=40))
    def test_accounting_and_idempotence(self, rows):
        recs = [rec(i, t, s, src, v) for i, t, s, src, v in rows]
        report = CleaningReport()
        out = list(clean_corpus(recs, KW20, POLICY, report))
        assert report.kept == len(out)
        assert report.kept + sum(report.dropped[r] for r in DROP_REASONS) == report.input == len(recs)
        again = list(clean_corpus(out, KW20, POLICY))
        assert again == out

    def test_report_rows(self):
        r = CleaningReport(5, 3)
        r.drop("duplicate", 2)
        assert r.rows()[0] == ("input", 5) and r.rows()[-1] == ("kept", 3)


class TestPeriods:
    def test_month(self):
        assert assign_period(dt.datetime(2020, 3, 15, 12, tzinfo=UTC), "month") == PeriodKey("month", (2020, 3))

    def test_iso_week_year_boundary(self):
        k = assign_period(dt.datetime(2021, 1, 1, tzinfo=UTC), "week")
        assert k.parts == (2020, 53) and k.label == "2020-W53" and k.year == 2020

    def test_all(self):
        assert assign_period(dt.datetime(1999, 1, 1, tzinfo=UTC), "all") == ALL_PERIOD

    def test_day(self):
        assert assign_period(dt.datetime(2020, 2, 29, 23, 59, tzinfo=UTC), "day").label == "2020-02-29"

    @given(st.datetimes(min_value=dt.datetime(2000, 1, 1), max_value=dt.datetime(2030, 1, 1)),
           st.sampled_from(["day", "week", "month", "all"]))
    def test_label_round_trip(self, ts, g):
        k = assign_period(ts.replace(tzinfo=UTC), g)
        assert PeriodKey.parse(k.label) == k

    @given(st.integers(1, 27), st.integers(1, 27))
    def test_same_month_same_key(self, d1, d2):
        a = assign_period(dt.datetime(2021, 2, d1, tzinfo=UTC), "month")
        b = assign_period(dt.datetime(2021, 2, d2, tzinfo=UTC), "month")
        assert a == b

    def test_range_crosses_year(self):
        r = period_range(PeriodKey.parse("2020-W52"), PeriodKey.parse("2021-W02"))
        assert [k.label for k in r] == ["2020-W52", "2020-W53", "2021-W01", "2021-W02"]
        m = period_range(PeriodKey.parse("2020-11"), PeriodKey.parse("2021-02"))
        assert [k.label for k in m] == ["2020-11", "2020-12", "2021-01", "2021-02"]
