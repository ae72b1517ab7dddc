"""Social groups, user attribution and census population tables."""

from __future__ import annotations

import csv
import enum
import math
import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Protocol, Sequence


class Gender(str, enum.Enum):
    Female = "Female"
    Male = "Male"


class AgeBin(str, enum.Enum):
    A_le18 = "A_le18"
    A_19_29 = "A_19_29"
    A_30_39 = "A_30_39"
    A_ge40 = "A_ge40"


class SocialGroup(NamedTuple):
    gender: Gender
    age_bin: AgeBin

    @property
    def label(self) -> str:
        return f"{self.gender.value},{self.age_bin.value}"

    def __str__(self) -> str:
        return self.label


# Canonical order: Female first, ages ascending. All outputs follow it.
GROUPS: tuple[SocialGroup, ...] = tuple(SocialGroup(g, a) for g in Gender for a in AgeBin)
GROUP_INDEX = {g: i for i, g in enumerate(GROUPS)}

_GENDER_ALIASES = {"female": Gender.Female, "f": Gender.Female, "woman": Gender.Female,
                   "male": Gender.Male, "m": Gender.Male, "man": Gender.Male}
_AGE_ALIASES = {
    "a_le18": AgeBin.A_le18, "le18": AgeBin.A_le18, "<=18": AgeBin.A_le18, "0-18": AgeBin.A_le18,
    "a_19_29": AgeBin.A_19_29, "19-29": AgeBin.A_19_29, "19_29": AgeBin.A_19_29,
    "a_30_39": AgeBin.A_30_39, "30-39": AgeBin.A_30_39, "30_39": AgeBin.A_30_39,
    "a_ge40": AgeBin.A_ge40, "ge40": AgeBin.A_ge40, ">=40": AgeBin.A_ge40, "40+": AgeBin.A_ge40,
}


def parse_gender(s: str) -> Gender:
    try:
        return _GENDER_ALIASES[s.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown gender {s!r}") from None


def parse_age_bin(s: str) -> AgeBin:
    try:
        return _AGE_ALIASES[s.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown age bin {s!r}") from None


def parse_group(value) -> SocialGroup:
    """Parse ``"Female,A_le18"`` (or a [gender, age] pair) into a SocialGroup."""
    if isinstance(value, SocialGroup):
        return value
    if isinstance(value, str):
        return _parse_group_str(value)
    if isinstance(value, (list, tuple)):
        return _group_from_parts(list(value), value)
    raise ValueError(f"cannot parse group from {value!r}")


@lru_cache(maxsize=512)
def _parse_group_str(value: str) -> SocialGroup:
    # corpora repeat the same few labels millions of times
    return _group_from_parts(value.split(","), value)


def _group_from_parts(parts: list, value) -> SocialGroup:
    if len(parts) != 2 or not all(isinstance(p, str) for p in parts):
        raise ValueError(f"cannot parse group from {value!r}")
    return SocialGroup(parse_gender(parts[0]), parse_age_bin(parts[1]))


def age_to_bin(age: int) -> AgeBin:
    if age <= 18:
        return AgeBin.A_le18
    if age <= 29:
        return AgeBin.A_19_29
    if age <= 39:
        return AgeBin.A_30_39
    return AgeBin.A_ge40


# --- attribution -------------------------------------------------------------

@dataclass(frozen=True)
class UserProfile:
    user_id: str
    user_name: str | None = None
    screen_name: str | None = None
    bio: str | None = None
    precomputed_group: SocialGroup | None = None


@dataclass(frozen=True)
class AttributionResult:
    user_id: str
    group: SocialGroup | None  # None means Unknown
    provider: str
    confidence: float | None = None

    @property
    def known(self) -> bool:
        return self.group is not None


class Provider(Protocol):
    name: str

    def __call__(self, profile: UserProfile) -> tuple[SocialGroup, float | None] | None: ...


class LabelProvider:
    """Passes through a group label already attached to the user's records."""

    name = "label"

    def __call__(self, profile):
        if profile.precomputed_group is None:
            return None
        return profile.precomputed_group, None


DEFAULT_BIO_PATTERNS = (
    r"\b(?P<age>\d{1,2})\s*(?:years?|yrs?)[\s-]*old\b",
    r"\b(?P<age>\d{1,2})\s*y/?o\b",
    r"\bage[:\s]+(?P<age>\d{1,2})\b",
    r"\bborn\s+in\s+(?P<year>(?:19|20)\d{2})\b",
)


class NameLookupProvider:
    """Gender from a given-name table, age bin from self-reported phrases in the bio.

    Both signals are required. ``reference_year`` converts "born in YYYY" into an age.
    """

    name = "name_lookup"

    def __init__(self, names: Mapping[str, Gender], bio_patterns: Sequence[str] = DEFAULT_BIO_PATTERNS,
                 reference_year: int = 2020):
        self.names = {k.lower(): v for k, v in names.items()}
        self.patterns = [re.compile(p, re.IGNORECASE) for p in bio_patterns]
        for p in self.patterns:
            if not {"age", "year"} & set(p.groupindex):
                raise ValueError(f"bio pattern needs an 'age' or 'year' group: {p.pattern}")
        self.reference_year = reference_year

    def gender_of(self, profile: UserProfile) -> Gender | None:
        for field in (profile.user_name, profile.screen_name):
            if not field:
                continue
            m = re.match(r"[^\W\d_]+", field.strip())
            if m and m.group(0).lower() in self.names:
                return self.names[m.group(0).lower()]
        return None

    def age_of(self, bio: str | None) -> int | None:
        if not bio:
            return None
        for p in self.patterns:
            m = p.search(bio)
            if not m:
                continue
            d = m.groupdict()
            if d.get("age"):
                age = int(d["age"])
            else:
                age = self.reference_year - int(d["year"])
            if 5 <= age <= 110:
                return age
        return None

    def __call__(self, profile):
        gender = self.gender_of(profile)
        age = self.age_of(profile.bio)
        if gender is None or age is None:
            return None
        return SocialGroup(gender, age_to_bin(age)), None


class UnknownProvider:
    name = "unknown"

    def __call__(self, profile):
        return None


def attribute_user(profile: UserProfile, providers: Sequence[Provider]) -> AttributionResult:
    """First provider that returns a group wins; otherwise the user is Unknown."""
    if not providers:
        raise ValueError("at least one attribution provider is required")
    for provider in providers:
        hit = provider(profile)
        if hit is not None:
            group, conf = hit
            return AttributionResult(profile.user_id, group, provider.name, conf)
    return AttributionResult(profile.user_id, None, providers[-1].name)


def load_name_table(path: str | Path | None = None) -> dict[str, Gender]:
    if path is None:
        text = resources.files("sadindex").joinpath("data/given_names.csv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    out = {}
    for row in csv.DictReader(text.splitlines()):
        out[row["name"].strip().lower()] = parse_gender(row["gender"])
    return out


def load_bio_patterns(path: str | Path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln for ln in (x.strip() for x in lines) if ln and not ln.startswith("#")]


def default_providers(names: Mapping[str, Gender] | None = None,
                      bio_patterns: Sequence[str] | None = None,
                      reference_year: int = 2020) -> list[Provider]:
    lookup = NameLookupProvider(load_name_table() if names is None else names,
                                bio_patterns or DEFAULT_BIO_PATTERNS, reference_year)
    return [LabelProvider(), lookup, UnknownProvider()]


# --- population tables -------------------------------------------------------

class CensusError(ValueError):
    pass


@dataclass(frozen=True)
class PopulationTable:
    scope: str
    counts: tuple[float, ...]  # canonical group order
    source_year: int = 2020

    @property
    def total(self) -> float:
        return math.fsum(self.counts)

    @property
    def shares(self) -> dict[SocialGroup, float]:
        tot = self.total
        return {g: c / tot for g, c in zip(GROUPS, self.counts)}

    @classmethod
    def from_shares(cls, scope: str, shares: Mapping[SocialGroup, float], source_year: int = 2020,
                    total: float = 1.0) -> PopulationTable:
        """Table whose shares are exactly ``shares`` (absent groups get 0)."""
        vals = [float(shares.get(g, 0.0)) for g in GROUPS]
        if any(v < 0 for v in vals):
            raise CensusError(f"negative share in scope {scope}")
        s = math.fsum(vals)
        if abs(s - 1.0) > 1e-9:
            raise CensusError(f"shares for scope {scope} sum to {s}, not 1")
        return cls(scope, tuple(v * total for v in vals), source_year)


def load_population_table(path: str | Path, source_year: int = 2020) -> dict[str, PopulationTable]:
    """Read ``scope,gender,age_bin,population`` rows into one table per scope."""
    cells: dict[str, dict[SocialGroup, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"scope", "gender", "age_bin", "population"} - set(reader.fieldnames or ())
        if missing:
            raise CensusError(f"{path}: missing columns {sorted(missing)}")
        for n, row in enumerate(reader, 2):
            scope = row["scope"].strip().upper()
            try:
                group = SocialGroup(parse_gender(row["gender"]), parse_age_bin(row["age_bin"]))
                pop = float(row["population"])
            except ValueError as exc:
                raise CensusError(f"{path}:{n}: {exc}") from None
            if not math.isfinite(pop) or pop < 0:
                raise CensusError(f"{path}:{n}: negative or invalid count for ({scope}, {group.label})")
            by_group = cells.setdefault(scope, {})
            if group in by_group:
                raise CensusError(f"{path}:{n}: duplicate cell ({scope}, {group.label})")
            by_group[group] = pop
    tables = {}
    for scope in sorted(cells):
        by_group = cells[scope]
        for g in GROUPS:
            if g not in by_group:
                raise CensusError(f"MissingCell: ({scope}, {g.label})")
        counts = tuple(by_group[g] for g in GROUPS)
        if math.fsum(counts) <= 0:
            raise CensusError(f"scope {scope} has zero total population")
        tables[scope] = PopulationTable(scope, counts, source_year)
    return tables


def write_population_table(tables: Iterable[PopulationTable], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scope", "gender", "age_bin", "population"])
        for t in tables:
            for g, c in zip(GROUPS, t.counts):
                w.writerow([t.scope, g.gender.value, g.age_bin.value, repr(float(c))])


def default_population_tables() -> dict[str, PopulationTable]:
    path = resources.files("sadindex").joinpath("data/census_2020_fixture.csv")
    with resources.as_file(path) as p:
        return load_population_table(p)


# --- sample composition ------------------------------------------------------

@dataclass(frozen=True)
class Composition:
    shares: dict[SocialGroup, float]  # empty when nobody was attributed
    attributed: int
    total: int

    @property
    def coverage(self) -> float:
        return self.attributed / self.total if self.total else 0.0

    @property
    def empty(self) -> bool:
        return self.attributed == 0


def sample_composition(groups: Iterable[SocialGroup | AttributionResult | None]) -> Composition:
    """Share of each group among attributed users of one cell; Unknown (None) excluded."""
    tally: Counter = Counter()
    total = 0
    for g in groups:
        total += 1
        if isinstance(g, AttributionResult):
            g = g.group
        if g is not None:
            tally[g] += 1
    attributed = sum(tally.values())
    shares = {g: tally[g] / attributed for g in GROUPS} if attributed else {}
    return Composition(shares, attributed, total)

