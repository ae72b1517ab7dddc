import datetime as dt
import math

import pytest
from hypothesis import given, strategies as st

from sadindex.ingest import ALL_PERIOD, PostRecord, PeriodKey
from sadindex.sentiment import (Level, ScoredPost, Thresholds, UserAccumulator, classify, effective_score,
                                load_lexicon, parse_lexicon, score_text, summarize_all, summarize_user, tokenize)

LEX = load_lexicon()
POSITIVE = sorted(t for t, v in LEX.valences.items() if v > 0 and t.isalpha())
NEGATIVE = sorted(t for t, v in LEX.valences.items() if v < 0 and t.isalpha())
VOCAB = sorted(LEX.valences) + sorted(LEX.boosters) + sorted(LEX.negations) + ["covid", "the", "day", "!", "?"]


def norm(s):
    return s / math.sqrt(s * s + 15)


class TestScore:
    def test_empty(self):
        assert score_text("", LEX) == 0.0

    def test_single_token(self):
        assert score_text("good", LEX) == pytest.approx(1.9 / math.sqrt(1.9 ** 2 + 15), abs=1e-12)
        assert score_text("good", LEX) == pytest.approx(0.4404, abs=1e-4)

    def test_negation(self):
        assert score_text("not good", LEX) == pytest.approx(norm(-0.74 * 1.9), abs=1e-12)

    def test_negation_reaches_three_tokens_back(self):
        assert score_text("not very much good", LEX) < 0
        assert score_text("not one two three good", LEX) > 0

    def test_booster_damping(self):
        assert score_text("very good", LEX) == pytest.approx(norm(1.9 + 0.293), abs=1e-12)
        assert score_text("very x good", LEX) == pytest.approx(norm(1.9 + 0.293 * 0.95), abs=1e-12)
        assert score_text("very x y good", LEX) == pytest.approx(norm(1.9 + 0.293 * 0.9), abs=1e-12)

    def test_caps_only_when_mixed(self):
        assert score_text("GOOD day", LEX) == pytest.approx(norm(1.9 + 0.733), abs=1e-12)
        assert score_text("GOOD DAY", LEX) == pytest.approx(norm(1.9), abs=1e-12)

    def test_exclamations_capped(self):
        assert score_text("good!!", LEX) == pytest.approx(norm(1.9 + 2 * 0.292), abs=1e-12)
        assert score_text("good!!!!!!", LEX) == pytest.approx(norm(1.9 + 3 * 0.292), abs=1e-12)
        assert score_text("bad!", LEX) == pytest.approx(norm(-2.5 - 0.292), abs=1e-12)

    def test_emoji_lookup(self):
        assert score_text("covid \U0001F622", LEX) < 0
        assert tokenize("love❤️") == ["love", "❤"]

    def test_unknown_tokens_zero(self):
        assert score_text("zebra quantum", LEX) == 0.0

    def test_lexicon_constant_override(self):
        lex = parse_lexicon("@alpha\t4\ngood\t2\n")
        assert score_text("good", lex) == pytest.approx(2 / math.sqrt(8))

    def test_lexicon_rejects_bad_lines(self):
        with pytest.raises(ValueError):
            parse_lexicon("good 2\n")
        with pytest.raises(ValueError):
            parse_lexicon("[weird]\n")

    @given(st.lists(st.sampled_from(VOCAB), max_size=30), st.booleans())
    def test_bounded(self, toks, upper):
        text = " ".join(toks)
        s = score_text(text.upper() if upper else text, LEX)
        assert -1.0 <= s <= 1.0

    @given(st.lists(st.sampled_from(VOCAB), max_size=20), st.sampled_from(POSITIVE), st.booleans())
    def test_monotone_in_positive_tokens(self, toks, pos, upper):
        text = " ".join(toks)
        if upper:
            text = text.upper()
        cased = [t for t in tokenize(text) if t.upper() != t.lower()]
        all_caps = bool(cased) and all(t.isupper() for t in cased)
        # three fillers keep the new token outside any negation or booster window
        extra = " zz zz zz " + pos
        extra = extra.upper() if all_caps else extra
        assert score_text(text + extra, LEX) >= score_text(text, LEX)

    @given(st.lists(st.sampled_from(VOCAB), max_size=20), st.sampled_from(NEGATIVE))
    def test_monotone_in_negative_tokens(self, toks, neg):
        text = " ".join(toks).lower()
        assert score_text(text + " zz zz zz " + neg, LEX) <= score_text(text, LEX)

    @pytest.mark.parametrize("tok", POSITIVE + NEGATIVE)
    def test_negation_flips_sign(self, tok):
        assert math.copysign(1, score_text("not " + tok, LEX)) == -math.copysign(1, score_text(tok, LEX))


class TestClassify:
    GRID = [(-1, Level.Negative), (-0.051, Level.Negative), (-0.05, Level.Negative), (-0.049, Level.Neutral),
            (0, Level.Neutral), (0.049, Level.Neutral), (0.05, Level.Positive), (0.051, Level.Positive),
            (1, Level.Positive)]

    @pytest.mark.parametrize("x,level", GRID)
    def test_grid(self, x, level):
        assert classify(x) is level

    @given(st.floats(-1, 1))
    def test_mirror(self, x):
        if abs(x) >= 0.05:
            assert classify(-x) == Level(2 - classify(x))

    def test_threshold_order(self):
        with pytest.raises(ValueError):
            Thresholds(0.1, -0.1)


def post(score, state="CA", user="u1", period=ALL_PERIOD):
    return ScoredPost(user, period, state, score)


class TestSummaries:
    def test_symmetric_mean(self):
        s = summarize_user([post(0.9), post(-0.9)])
        assert s.mean_score == 0.0 and s.level is Level.Neutral and s.n_posts == 2

    def test_single(self):
        s = summarize_user([post(-0.87)])
        assert s.mean_score == -0.87 and s.level is Level.Negative

    def test_modal_state(self):
        assert summarize_user([post(0, "CA"), post(0, "CA"), post(0, "TX")]).state == "CA"
        assert summarize_user([post(0, "TX"), post(0, "CA")]).state == "CA"

    def test_errors(self):
        with pytest.raises(ValueError):
            summarize_user([])
        with pytest.raises(ValueError):
            summarize_user([post(0, user="a"), post(0, user="b")])

    @given(st.lists(st.floats(-1, 1), min_size=1, max_size=30), st.randoms())
    def test_permutation_invariant(self, scores, rnd):
        posts = [post(s, state=st_) for s, st_ in zip(scores, ["CA", "TX", "NY"] * 10)]
        shuffled = posts[:]
        rnd.shuffle(shuffled)
        assert summarize_user(posts) == summarize_user(shuffled)

    @given(st.lists(st.floats(-1, 1), min_size=2, max_size=30), st.integers(1, 29))
    def test_accumulator_merge(self, scores, cut):
        cut = min(cut, len(scores) - 1)
        a, b, whole = UserAccumulator(), UserAccumulator(), UserAccumulator()
        for i, s in enumerate(scores):
            (a if i < cut else b).add(s, "CA" if i % 2 else "TX")
            whole.add(s, "CA" if i % 2 else "TX")
        assert a.merge(b).summary("u", ALL_PERIOD) == whole.summary("u", ALL_PERIOD)
        assert b.merge(a).summary("u", ALL_PERIOD) == whole.summary("u", ALL_PERIOD)

    def test_summarize_all_groups_by_user_and_period(self):
        m1, m2 = PeriodKey.parse("2020-01"), PeriodKey.parse("2020-02")
        out = summarize_all([post(0.5, user="b", period=m1), post(-0.5, user="a", period=m1),
                             post(-0.3, user="a", period=m1), post(0.2, user="a", period=m2)])
        assert [(s.period.label, s.user_id, s.n_posts) for s in out] == [
            ("2020-01", "a", 2), ("2020-01", "b", 1), ("2020-02", "a", 1)]
        assert out[0].mean_score == pytest.approx(-0.4)


class TestEffective:
    def rec(self, score=None, text=""):
        return PostRecord("1", "u", dt.datetime(2020, 1, 1, tzinfo=dt.timezone.utc), text,
                          precomputed_score=score)

    def test_precomputed_wins(self):
        assert effective_score(self.rec(0.93, "terrible"), LEX) == 0.93
        assert effective_score(self.rec(-1.0), LEX) == -1.0

    def test_empty_text(self):
        assert effective_score(self.rec(), LEX) == 0.0
