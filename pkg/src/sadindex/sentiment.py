"""Lexicon scoring, three-level classification and per-user period summaries."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple

from .ingest import PeriodKey, PostRecord


class Level(enum.IntEnum):
    Negative = 0
    Neutral = 1
    Positive = 2


LEVELS = tuple(Level)


@dataclass(frozen=True)
class Thresholds:
    negative: float = -0.05
    positive: float = 0.05

    def __post_init__(self):
        if not -1.0 <= self.negative < self.positive <= 1.0:
            raise ValueError(f"thresholds must satisfy -1 <= negative < positive <= 1, got {self}")


DEFAULT_THRESHOLDS = Thresholds()


def classify(score: float, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> Level:
    # both bounds belong to the outer classes; neutral is the open interval between
    if score <= thresholds.negative:
        return Level.Negative
    if score >= thresholds.positive:
        return Level.Positive
    return Level.Neutral


# --- lexicon -----------------------------------------------------------------

@dataclass(frozen=True)
class ScorerConstants:
    negation_scalar: float = -0.74
    caps_increment: float = 0.733
    exclamation_increment: float = 0.292
    max_exclamations: int = 3
    alpha: float = 15.0
    booster_damping: tuple[float, float, float] = (1.0, 0.95, 0.9)


@dataclass(frozen=True)
class Lexicon:
    valences: dict[str, float]
    boosters: dict[str, float] = field(default_factory=dict)
    negations: frozenset[str] = frozenset()
    constants: ScorerConstants = ScorerConstants()

    def __post_init__(self):
        for table in (self.valences, self.boosters):
            for tok, v in table.items():
                if tok != tok.lower():
                    raise ValueError(f"lexicon token {tok!r} must be lowercase")
                if not math.isfinite(v):
                    raise ValueError(f"non-finite valence for {tok!r}")


_CONSTANT_KEYS = {"negation_scalar": float, "caps_increment": float, "exclamation_increment": float,
                  "max_exclamations": int, "alpha": float}


def parse_lexicon(text: str) -> Lexicon:
    """Parse ``token<TAB>valence`` lines with optional ``[boosters]``/``[negations]`` sections.

    ``@name<TAB>value`` lines before the first section override scorer constants.
    """
    valences: dict[str, float] = {}
    boosters: dict[str, float] = {}
    negations: set[str] = set()
    consts: dict[str, float] = {}
    section = "valences"
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("valences", "boosters", "negations"):
                raise ValueError(f"lexicon line {n}: unknown section [{section}]")
            continue
        if section == "negations":
            negations.add(line.lower())
            continue
        parts = raw.rstrip("\n").split("\t")
        if len(parts) < 2:
            raise ValueError(f"lexicon line {n}: expected token<TAB>value")
        key, value = parts[0].strip(), parts[1].strip()
        if key.startswith("@"):
            name = key[1:]
            if section != "valences" or name not in _CONSTANT_KEYS:
                raise ValueError(f"lexicon line {n}: unknown constant {key}")
            consts[name] = _CONSTANT_KEYS[name](value)
            continue
        target = boosters if section == "boosters" else valences
        target[key.lower()] = float(value)
    return Lexicon(valences, boosters, frozenset(negations), ScorerConstants(**consts))


def load_lexicon(path: str | Path | None = None) -> Lexicon:
    if path is None:
        text = resources.files("sadindex").joinpath("data/lexicon_default.tsv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_lexicon(text)


# --- scoring -----------------------------------------------------------------

# word runs (keeping apostrophes for contractions) or single symbols such as emoji
_TOKEN_RE = re.compile(r"[\w']+|[^\w\s!-/:-@\[-`{-~]")
_IGNORABLE = dict.fromkeys(map(ord, "\ufe0e\ufe0f\u200d"), None)
_TRAILING_BANGS = re.compile(r"!+\s*$")


def tokenize(text: str) -> list[str]:
    out = []
    for tok in _TOKEN_RE.findall(text.translate(_IGNORABLE)):
        tok = tok.strip("'")
        if tok:
            out.append(tok)
    return out


def _is_cased(tok: str) -> bool:
    return tok.upper() != tok.lower()


def raw_sum(text: str, lexicon: Lexicon) -> float:
    """Sum of rule-adjusted token valences, before punctuation emphasis."""
    tokens = tokenize(text)
    if not tokens:
        return 0.0
    c = lexicon.constants
    lowered = [t.lower() for t in tokens]
    cased = [t.isupper() for t in tokens if _is_cased(t)]
    shouting = any(cased) and not all(cased)

    total = 0.0
    for i, tok in enumerate(lowered):
        v = lexicon.valences.get(tok)
        if not v:
            continue
        sign = 1.0 if v > 0 else -1.0
        if shouting and tokens[i].isupper():
            v += sign * c.caps_increment
        for dist, damp in enumerate(c.booster_damping, 1):
            if i - dist < 0:
                break
            inc = lexicon.boosters.get(lowered[i - dist])
            if inc is not None:
                v += sign * inc * damp
        for dist in (1, 2, 3):
            if i - dist >= 0 and lowered[i - dist] in lexicon.negations:
                v *= c.negation_scalar
        total += v
    return total


def score_text(text: str, lexicon: Lexicon) -> float:
    c = lexicon.constants
    s = raw_sum(text, lexicon)
    m = _TRAILING_BANGS.search(text)
    if m and s:
        bangs = min(m.group(0).count("!"), c.max_exclamations)
        s += math.copysign(bangs * c.exclamation_increment, s)
    score = s / math.sqrt(s * s + c.alpha)
    return min(1.0, max(-1.0, score))


def effective_score(rec: PostRecord, lexicon: Lexicon) -> float:
    if rec.precomputed_score is not None:
        return rec.precomputed_score
    return score_text(rec.text, lexicon)


# --- per-user summaries ------------------------------------------------------

class ScoredPost(NamedTuple):
    user_id: str
    period: PeriodKey
    state: str
    score: float


class UserPeriodSummary(NamedTuple):
    user_id: str
    period: PeriodKey
    state: str
    mean_score: float
    level: Level
    n_posts: int


class UserAccumulator:
    """Mergeable partial state for one (user, period); merge order never changes the result."""

    __slots__ = ("scores", "states")

    def __init__(self, scores: list[float] | None = None, states: dict[str, int] | None = None):
        self.scores = scores if scores is not None else []
        self.states = states if states is not None else {}

    def add(self, score: float, state: str) -> None:
        self.scores.append(score)
        self.states[state] = self.states.get(state, 0) + 1

    def merge(self, other: UserAccumulator) -> UserAccumulator:
        states = dict(self.states)
        for s, n in other.states.items():
            states[s] = states.get(s, 0) + n
        return UserAccumulator(self.scores + other.scores, states)

    def summary(self, user_id: str, period: PeriodKey,
                thresholds: Thresholds = DEFAULT_THRESHOLDS) -> UserPeriodSummary:
        if not self.scores:
            raise ValueError(f"no posts for user {user_id} in {period}")
        # fsum is correctly rounded, so the mean does not depend on post order
        mean = math.fsum(self.scores) / len(self.scores)
        if len(self.states) == 1:
            (state,) = self.states
        else:
            top = max(self.states.values())
            state = min(s for s, n in self.states.items() if n == top)
        return UserPeriodSummary(user_id, period, state, mean, classify(mean, thresholds), len(self.scores))


def summarize_user(posts: Iterable[ScoredPost], thresholds: Thresholds = DEFAULT_THRESHOLDS) -> UserPeriodSummary:
    acc = UserAccumulator()
    key = None
    for p in posts:
        if key is None:
            key = (p.user_id, p.period)
        elif (p.user_id, p.period) != key:
            raise ValueError("summarize_user needs posts of a single user and period")
        acc.add(p.score, p.state)
    if key is None:
        raise ValueError("summarize_user needs at least one post")
    return acc.summary(key[0], key[1], thresholds)


def summarize_all(posts: Iterable[ScoredPost],
                  thresholds: Thresholds = DEFAULT_THRESHOLDS) -> list[UserPeriodSummary]:
    """Group posts by (user, period) and summarize; output sorted by (period, user)."""
    grouped: dict[tuple[PeriodKey, str], list[ScoredPost]] = {}
    for p in posts:
        key = (p.period, p.user_id)
        bucket = grouped.get(key)
        if bucket is None:
            grouped[key] = [p]
        else:
            bucket.append(p)
    out = []
    for key in sorted(grouped):
        bucket = grouped[key]
        if len(bucket) == 1:
            p = bucket[0]
            out.append(UserPeriodSummary(p.user_id, p.period, p.state, p.score,
                                         classify(p.score, thresholds), 1))
            continue
        acc = UserAccumulator()
        for p in bucket:
            acc.add(p.score, p.state)
        out.append(acc.summary(key[1], key[0], thresholds))
    return out
