"""Corpus ingestion: parsing, keyword filtering, bot removal and period keys."""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .demographics import SocialGroup, parse_group

US_STATES = frozenset(
    "AL AK AZ AR CA CO CT DE DC FL GA HI ID IL IN IA KS KY LA ME MD MA MI MN MS "
    "MO MT NE NV NH NJ NM NY NC ND OH OK OR PA RI SC SD TN TX UT VT VA WA WV WI WY".split()
)

REQUIRED_FIELDS = ("id", "user_id", "created_at", "text")

GRANULARITIES = ("day", "week", "month", "all")

DROP_REASONS = ("parse_error", "duplicate", "off_topic", "non_human", "no_geo")


class RecordError(ValueError):
    """A corpus line that cannot be turned into a PostRecord."""

    def __init__(self, kind: str, detail: str, line_no: int | None = None):
        self.kind = kind
        self.detail = detail
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}{kind}:{detail}")


@dataclass(slots=True)
class PostRecord:
    id: str
    user_id: str
    created_at: dt.datetime
    text: str
    state: str | None = None
    source: str = ""
    verified: bool = False
    precomputed_score: float | None = None
    precomputed_group: SocialGroup | None = None
    user_name: str | None = None
    screen_name: str | None = None
    bio: str | None = None


@dataclass(frozen=True)
class KeywordSet:
    name: str
    terms: tuple[str, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError(f"keyword set {self.name!r} is empty")
        for t in self.terms:
            if t != t.strip().lower() or not t:
                raise ValueError(f"keyword {t!r} must be lowercase and trimmed")


@dataclass(frozen=True)
class CleaningPolicy:
    source_allowlist: frozenset[str] = frozenset()
    drop_verified: bool = True
    filter_sources: bool = True

    def __post_init__(self):
        if self.filter_sources and not self.source_allowlist:
            raise ValueError("source filtering enabled with an empty allowlist")


@dataclass
class CleaningReport:
    input: int = 0
    kept: int = 0
    dropped: dict[str, int] = field(default_factory=lambda: dict.fromkeys(DROP_REASONS, 0))

    def drop(self, reason: str, n: int = 1) -> None:
        self.dropped[reason] += n

    def merge(self, other: CleaningReport) -> CleaningReport:
        out = CleaningReport(self.input + other.input, self.kept + other.kept)
        for r in DROP_REASONS:
            out.dropped[r] = self.dropped[r] + other.dropped[r]
        return out

    def rows(self) -> list[tuple[str, int]]:
        return [("input", self.input), *((r, self.dropped[r]) for r in DROP_REASONS), ("kept", self.kept)]


# --- parsing ---------------------------------------------------------------

def parse_timestamp(value) -> dt.datetime:
    """ISO-8601 string or epoch seconds -> aware UTC datetime at second resolution.

    Naive timestamps are taken to be UTC already.
    """
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, (int, float)):
        ts = dt.datetime.fromtimestamp(value, tz=dt.timezone.utc)
    elif isinstance(value, str):
        s = value.strip()
        if s.endswith(("Z", "z")):
            s = s[:-1] + "+00:00"
        ts = dt.datetime.fromisoformat(s)
        ts = ts.replace(tzinfo=dt.timezone.utc) if ts.tzinfo is None else ts.astimezone(dt.timezone.utc)
    else:
        raise ValueError(f"unsupported timestamp {value!r}")
    return ts.replace(microsecond=0)


def normalize_state(value) -> str | None:
    if not isinstance(value, str):
        return None
    code = value.strip().upper()
    return code if code in US_STATES else None


def _opt_str(obj: dict, key: str) -> str | None:
    v = obj.get(key)
    if v is None:
        return None
    return v if isinstance(v, str) else str(v)


def _as_bool(v, line_no) -> bool:
    if isinstance(v, bool):
        return v
    if v in (0, 1):
        return bool(v)
    if isinstance(v, str) and v.lower() in ("true", "false"):
        return v.lower() == "true"
    raise RecordError("InvalidValue", "verified", line_no)


def record_from_dict(obj: dict, line_no: int | None = None) -> PostRecord:
    for name in REQUIRED_FIELDS:
        if obj.get(name) in (None, ""):
            raise RecordError("MissingField", name, line_no)
    text = obj["text"]
    if not isinstance(text, str):
        raise RecordError("InvalidValue", "text", line_no)
    try:
        created = parse_timestamp(obj["created_at"])
    except (ValueError, OverflowError, OSError):
        raise RecordError("InvalidValue", "created_at", line_no) from None

    score = obj.get("sentiment")
    if score is not None:
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise RecordError("InvalidValue", "precomputed_score", line_no)
        score = float(score)
        if not -1.0 <= score <= 1.0:
            raise RecordError("OutOfRange", "precomputed_score", line_no)

    group = obj.get("group")
    if group not in (None, ""):
        try:
            group = parse_group(group)
        except ValueError:
            raise RecordError("InvalidValue", "group", line_no) from None
    else:
        group = None

    return PostRecord(
        id=str(obj["id"]),
        user_id=str(obj["user_id"]),
        created_at=created,
        text=text,
        state=normalize_state(obj.get("state")),
        source=_opt_str(obj, "source") or "",
        verified=_as_bool(obj.get("verified", False), line_no),
        precomputed_score=score,
        precomputed_group=group,
        user_name=_opt_str(obj, "user_name"),
        screen_name=_opt_str(obj, "screen_name"),
        bio=_opt_str(obj, "bio"),
    )


def parse_record(line: str, line_no: int | None = None) -> PostRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordError("Malformed", exc.msg, line_no) from None
    if not isinstance(obj, dict):
        raise RecordError("Malformed", "not a JSON object", line_no)
    return record_from_dict(obj, line_no)


def record_to_dict(rec: PostRecord, score: float | None = None) -> dict:
    out = {
        "id": rec.id,
        "user_id": rec.user_id,
        "created_at": rec.created_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "text": rec.text,
        "state": rec.state,
        "source": rec.source,
        "verified": rec.verified,
    }
    if rec.precomputed_score is not None:
        out["sentiment"] = rec.precomputed_score
    if rec.precomputed_group is not None:
        out["group"] = rec.precomputed_group.label
    for key in ("user_name", "screen_name", "bio"):
        v = getattr(rec, key)
        if v is not None:
            out[key] = v
    if score is not None:
        out["score"] = score
    return out


def dump_record(rec: PostRecord, score: float | None = None) -> str:
    return json.dumps(record_to_dict(rec, score), ensure_ascii=False, sort_keys=True)


def iter_lines(path: str | Path) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, line) for non-blank lines."""
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            if line.strip():
                yield i, line


def read_corpus(path: str | Path, report: CleaningReport | None = None,
                strict: bool = False) -> Iterator[PostRecord]:
    """Parse a JSON-lines corpus. Bad lines are counted in ``report`` unless strict."""
    for line_no, line in iter_lines(path):
        if report is not None:
            report.input += 1
        try:
            yield parse_record(line, line_no)
        except RecordError:
            if strict:
                raise
            if report is not None:
                report.drop("parse_error")


# --- keyword and source filters ----------------------------------------------

def matches_keywords(text: str, keywords: KeywordSet) -> bool:
    low = text.lower()
    return any(term in low for term in keywords.terms)


def is_human_generated(rec: PostRecord, policy: CleaningPolicy) -> bool:
    if rec.verified and policy.drop_verified:
        return False
    if policy.filter_sources and rec.source not in policy.source_allowlist:
        return False
    return True


def rejection_reason(rec: PostRecord, keywords: KeywordSet, policy: CleaningPolicy) -> str | None:
    """Per-record filter verdict, excluding deduplication (which needs corpus order)."""
    if not matches_keywords(rec.text, keywords):
        return "off_topic"
    if not is_human_generated(rec, policy):
        return "non_human"
    if rec.state is None:
        return "no_geo"
    return None


def clean_corpus(records: Iterable[PostRecord], keywords: KeywordSet, policy: CleaningPolicy,
                 report: CleaningReport | None = None,
                 count_input: bool = True) -> Iterator[PostRecord]:
    """Yield records that survive dedup, keyword, human and geo filters, in input order.

    ``report`` is updated as the stream is consumed. Set ``count_input=False`` when
    the caller (e.g. :func:`read_corpus`) already counted input lines.
    """
    report = report if report is not None else CleaningReport()
    seen: set[str] = set()
    for rec in records:
        if count_input:
            report.input += 1
        if rec.id in seen:
            report.drop("duplicate")
            continue
        seen.add(rec.id)
        reason = rejection_reason(rec, keywords, policy)
        if reason:
            report.drop(reason)
            continue
        report.kept += 1
        yield rec


# --- resources -------------------------------------------------------------

def _data_text(name: str) -> str:
    return resources.files("sadindex").joinpath("data/" + name).read_text(encoding="utf-8")


def _term_lines(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def load_keyword_set(path: str | Path, name: str | None = None) -> KeywordSet:
    p = Path(path)
    terms = [t.lower() for t in _term_lines(p.read_text(encoding="utf-8"))]
    return KeywordSet(name or p.stem, tuple(dict.fromkeys(terms)))


def default_keyword_set(name: str) -> KeywordSet:
    """Built-in keyword lists for the 2020 and 2021 collections."""
    if name not in ("2020", "2021"):
        raise ValueError(f"no built-in keyword set {name!r} (expected 2020 or 2021)")
    return KeywordSet(name, tuple(_term_lines(_data_text(f"keywords_{name}.txt"))))


def load_source_allowlist(path: str | Path | None = None) -> frozenset[str]:
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("source_allowlist.txt")
    return frozenset(_term_lines(text))


# --- periods ---------------------------------------------------------------

_PERIOD_RE = {
    "day": re.compile(r"^(\d{4})-(\d{2})-(\d{2})$"),
    "week": re.compile(r"^(\d{4})-W(\d{2})$"),
    "month": re.compile(r"^(\d{4})-(\d{2})$"),
}


class PeriodKey(NamedTuple):
    """A reporting period. ``parts`` is (y, m, d), ISO (year, week), (y, m) or ()."""

    granularity: str
    parts: tuple[int, ...]

    @property
    def label(self) -> str:
        g, p = self.granularity, self.parts
        if g == "day":
            return f"{p[0]:04d}-{p[1]:02d}-{p[2]:02d}"
        if g == "week":
            return f"{p[0]:04d}-W{p[1]:02d}"
        if g == "month":
            return f"{p[0]:04d}-{p[1]:02d}"
        return "all"

    @property
    def year(self) -> int | None:
        """Calendar year, or ISO week-year for weekly keys."""
        return self.parts[0] if self.parts else None

    def start(self) -> dt.date | None:
        g, p = self.granularity, self.parts
        if g == "day":
            return dt.date(*p)
        if g == "week":
            return dt.date.fromisocalendar(p[0], p[1], 1)
        if g == "month":
            return dt.date(p[0], p[1], 1)
        return None

    def next(self) -> PeriodKey:
        g = self.granularity
        if g == "all":
            return self
        if g == "month":
            y, m = self.parts
            return PeriodKey(g, (y + (m == 12), m % 12 + 1))
        step = 1 if g == "day" else 7
        return period_of_date(self.start() + dt.timedelta(days=step), g)

    def __str__(self) -> str:
        return self.label

    @classmethod
    def parse(cls, label: str) -> PeriodKey:
        label = label.strip()
        if label == "all":
            return ALL_PERIOD
        for g, rx in _PERIOD_RE.items():
            m = rx.match(label)
            if m:
                key = cls(g, tuple(int(x) for x in m.groups()))
                key.start()  # validates the date
                return key
        raise ValueError(f"unrecognized period label {label!r}")


ALL_PERIOD = PeriodKey("all", ())


def period_of_date(d: dt.date, granularity: str) -> PeriodKey:
    if granularity == "day":
        return PeriodKey("day", (d.year, d.month, d.day))
    if granularity == "week":
        iso = d.isocalendar()
        return PeriodKey("week", (iso[0], iso[1]))
    if granularity == "month":
        return PeriodKey("month", (d.year, d.month))
    if granularity == "all":
        return ALL_PERIOD
    raise ValueError(f"unknown granularity {granularity!r}")


def assign_period(ts: dt.datetime, granularity: str) -> PeriodKey:
    if ts.tzinfo is not None:
        ts = ts.astimezone(dt.timezone.utc)
    return period_of_date(ts.date(), granularity)


def period_range(first: PeriodKey, last: PeriodKey) -> list[PeriodKey]:
    """All consecutive periods from ``first`` to ``last`` inclusive."""
    if first.granularity != last.granularity:
        raise ValueError("period range across granularities")
    out = [first]
    while out[-1] < last:
        out.append(out[-1].next())
    return out
