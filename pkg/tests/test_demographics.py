import pytest
from hypothesis import given, strategies as st

from sadindex.demographics import (GROUPS, AgeBin, AttributionResult, CensusError, Gender, LabelProvider,
                                   NameLookupProvider, PopulationTable, SocialGroup, UnknownProvider, UserProfile,
                                   age_to_bin, attribute_user, default_population_tables, default_providers,
                                   load_name_table, load_population_table, parse_group, sample_composition,
                                   write_population_table)

PROVIDERS = default_providers()


def write_census(path, rows):
    path.write_text("scope,gender,age_bin,population\n" + "".join(f"{r}\n" for r in rows))
    return path


class TestGroups:
    def test_eight_groups_canonical_order(self):
        assert len(GROUPS) == 8
        assert GROUPS[0] == SocialGroup(Gender.Female, AgeBin.A_le18)
        assert GROUPS[-1] == SocialGroup(Gender.Male, AgeBin.A_ge40)

    @pytest.mark.parametrize("text", ["Female,A_le18", "female, <=18", ("F", "le18")])
    def test_parse(self, text):
        assert parse_group(text) == SocialGroup(Gender.Female, AgeBin.A_le18)

    def test_parse_rejects(self):
        with pytest.raises(ValueError):
            parse_group("Nonbinary,A_le18")

    @pytest.mark.parametrize("age,bin_", [(5, AgeBin.A_le18), (18, AgeBin.A_le18), (19, AgeBin.A_19_29),
                                          (29, AgeBin.A_19_29), (30, AgeBin.A_30_39), (39, AgeBin.A_30_39),
                                          (40, AgeBin.A_ge40), (90, AgeBin.A_ge40)])
    def test_age_bins(self, age, bin_):
        assert age_to_bin(age) is bin_


class TestAttribution:
    def test_label_passthrough(self):
        g = parse_group("Female,A_le18")
        res = attribute_user(UserProfile("u", precomputed_group=g), PROVIDERS)
        assert res.group == g and res.provider == "label"

    def test_name_and_bio(self):
        res = attribute_user(UserProfile("u", user_name="Emma Stone", bio="17 years old, band kid"), PROVIDERS)
        assert res.group == SocialGroup(Gender.Female, AgeBin.A_le18)
        assert res.provider == "name_lookup"

    def test_born_in(self):
        res = attribute_user(UserProfile("u", screen_name="james_1985", bio="born in 1985"), PROVIDERS)
        assert res.group == SocialGroup(Gender.Male, AgeBin.A_30_39)

    def test_unknown(self):
        res = attribute_user(UserProfile("u"), PROVIDERS)
        assert res.group is None and not res.known and res.provider == "unknown"

    def test_name_without_age_is_unknown(self):
        assert attribute_user(UserProfile("u", user_name="Emma"), PROVIDERS).group is None

    def test_first_provider_wins(self):
        g = parse_group("Male,A_ge40")
        res = attribute_user(UserProfile("u", user_name="Emma", bio="17 yo", precomputed_group=g), PROVIDERS)
        assert res.group == g

    def test_needs_provider(self):
        with pytest.raises(ValueError):
            attribute_user(UserProfile("u"), [])

    def test_bad_pattern(self):
        with pytest.raises(ValueError):
            NameLookupProvider({}, [r"\d+"])

    def test_deterministic(self):
        p = UserProfile("u", user_name="Ashley", bio="age: 33")
        assert attribute_user(p, PROVIDERS) == attribute_user(p, PROVIDERS)

    def test_name_table(self):
        names = load_name_table()
        assert names["emma"] is Gender.Female and names["james"] is Gender.Male
        assert [type(p) for p in PROVIDERS] == [LabelProvider, NameLookupProvider, UnknownProvider]


class TestCensus:
    def test_national_under_18_share(self):
        us = default_population_tables()["US"]
        under18 = us.shares[GROUPS[0]] + us.shares[GROUPS[4]]
        assert under18 == pytest.approx(0.2336, abs=1e-4)

    def test_bundled_tables_cover_states(self):
        tables = default_population_tables()
        assert len(tables) == 52 and "DC" in tables and "WY" in tables
        for t in tables.values():
            assert sum(t.shares.values()) == pytest.approx(1, abs=1e-9)

    def test_uniform(self, tmp_path):
        p = write_census(tmp_path / "c.csv", [f"TX,{g.gender.value},{g.age_bin.value},1" for g in GROUPS])
        assert set(load_population_table(p)["TX"].shares.values()) == {0.125}

    def test_missing_cell(self, tmp_path):
        p = write_census(tmp_path / "c.csv", [f"TX,{g.gender.value},{g.age_bin.value},1" for g in GROUPS[:-1]])
        with pytest.raises(CensusError, match=r"MissingCell: \(TX, Male,A_ge40\)"):
            load_population_table(p)

    def test_negative_count(self, tmp_path):
        rows = [f"TX,{g.gender.value},{g.age_bin.value},{-1 if i == 2 else 5}" for i, g in enumerate(GROUPS)]
        with pytest.raises(CensusError, match="negative"):
            load_population_table(write_census(tmp_path / "c.csv", rows))

    def test_duplicate(self, tmp_path):
        rows = [f"TX,{g.gender.value},{g.age_bin.value},1" for g in GROUPS] + ["TX,Female,A_le18,3"]
        with pytest.raises(CensusError, match="duplicate"):
            load_population_table(write_census(tmp_path / "c.csv", rows))

    @given(st.lists(st.floats(0.5, 1e8), min_size=8, max_size=8))
    def test_round_trip(self, counts):
        import tempfile
        from pathlib import Path

        t = PopulationTable("CA", tuple(counts))
        with tempfile.TemporaryDirectory() as d:
            p = Path(d) / "c.csv"
            write_population_table([t], p)
            back = load_population_table(p)["CA"]
        assert back.shares == t.shares
        assert sum(back.shares.values()) == pytest.approx(1, abs=1e-9)

    def test_from_shares_validates(self):
        with pytest.raises(CensusError):
            PopulationTable.from_shares("US", {GROUPS[0]: 0.7})


class TestComposition:
    def test_equal(self):
        c = sample_composition(GROUPS * 3)
        assert all(v == 0.125 for v in c.shares.values())

    def test_unknowns_excluded(self):
        groups = [GROUPS[0]] * 3 + [GROUPS[1]] * 3 + [None] * 4
        c = sample_composition(groups)
        assert c.attributed == 6 and c.total == 10 and c.coverage == 0.6
        assert c.shares[GROUPS[0]] == 0.5

    def test_accepts_results(self):
        c = sample_composition([AttributionResult("a", GROUPS[2], "label"), AttributionResult("b", None, "unknown")])
        assert c.shares[GROUPS[2]] == 1.0 and c.coverage == 0.5

    def test_empty(self):
        c = sample_composition([None, None])
        assert c.empty and c.shares == {}

    def test_young_adult_share(self):
        # 3535 of 10000 attributed users aged 19-29
        groups = [GROUPS[1]] * 3535 + [GROUPS[0]] * 6465
        assert sample_composition(groups).shares[GROUPS[1]] == pytest.approx(0.3535)

    @given(st.lists(st.sampled_from(list(GROUPS) + [None]), min_size=1, max_size=200))
    def test_sums_to_one(self, groups):
        c = sample_composition(groups)
        if not c.empty:
            assert sum(c.shares.values()) == pytest.approx(1, abs=1e-9)
