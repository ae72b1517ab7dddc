"""End-to-end orchestration: score -> attribute -> tabulate -> sad -> report.

Every stage reads its inputs from files in the output directory and writes its own
outputs there, so any suffix of the pipeline can be re-run on its own.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from itertools import islice
from pathlib import Path
from typing import Callable, Iterable, Iterator

from . import report as rpt
from .analytics import (CORRELATION_HEADER, InsufficientOverlap, ZeroVariance, adjustment_delta, case_rates,
                        correlate, delta_rows, read_cumulative_cases)
from .csvio import fmt, read_csv, write_csv
from .demographics import (CensusError, SocialGroup, UserProfile, attribute_user, default_population_tables,
                           default_providers, load_bio_patterns, load_name_table, load_population_table,
                           parse_group)
from .ingest import (GRANULARITIES, CleaningPolicy, CleaningReport, KeywordSet, PeriodKey, PostRecord,
                     RecordError, assign_period, default_keyword_set, iter_lines, load_keyword_set,
                     load_source_allowlist, parse_record, record_from_dict, dump_record, rejection_reason)
from .poststrat import (NATIONAL, AdjustedDistribution, GroupCellCounts, PipelineConfig, adjust, compute_weights,
                        group_percentage_rows, population_for, read_counts_csv, read_sad_csv, sad_series,
                        tabulate, weights_rows, write_counts_csv, write_sad_csv)
from .sentiment import Lexicon, ScoredPost, Thresholds, load_lexicon, score_text, summarize_all

STAGES = ("score", "attribute", "tabulate", "sad", "report")
SCOPE_CHOICES = ("national", "state", "both")

SCORED = "scored.jsonl"
CLEANING = "cleaning.csv"
ATTRIBUTION = "attribution.csv"
COUNTS = "counts.csv"
UNKNOWN = "unknown_users.csv"
MAP_COUNTS = "map_counts.csv"
MAP_UNKNOWN = "map_unknown_users.csv"
SAD = "sad.csv"
MAP_SAD = "map_sad.csv"
WEIGHTS = "weights.csv"
GROUP_PCT = "group_percentages.csv"
DELTA = "delta.csv"
CORRELATION = "correlation.csv"
TIMESERIES_SVG = "sad_timeseries.svg"
MAP_SVG = "sad_map.svg"
RAW_MAP_SVG = "raw_map.svg"

STAGE_INPUTS = {
    "score": (),
    "attribute": (SCORED,),
    "tabulate": (SCORED, ATTRIBUTION),
    "sad": (COUNTS, UNKNOWN),
    "report": (SAD, COUNTS),
}
ARTIFACTS = (SCORED, CLEANING, ATTRIBUTION, COUNTS, UNKNOWN, MAP_COUNTS, MAP_UNKNOWN, SAD, MAP_SAD,
             WEIGHTS, GROUP_PCT, TIMESERIES_SVG, MAP_SVG, RAW_MAP_SVG)

ATTRIBUTION_HEADER = ("user_id", "gender", "age_bin", "provider")
UNKNOWN_HEADER = ("scope", "period", "unknown_users")
GROUP_PCT_HEADER = ("scope", "period", "gender", "age_bin", "users", "negative", "neutral", "positive",
                    "insufficient")
WEIGHTS_HEADER = ("scope", "period", "gender", "age_bin", "weight")
DELTA_HEADER = ("scope", "period", "raw_negative", "sad_index", "delta")


class ConfigError(ValueError):
    """Invalid configuration or missing input; maps to exit code 2."""


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


# --- configuration -----------------------------------------------------------

_PATHS = ("corpus", "census", "lexicon", "names", "bio_patterns", "cases", "boundaries", "source_allowlist")


@dataclass(frozen=True)
class RunConfig:
    output_dir: Path
    corpus: Path | None = None
    census: Path | None = None
    lexicon: Path | None = None
    names: Path | None = None
    bio_patterns: Path | None = None
    cases: Path | None = None
    boundaries: Path | None = None
    source_allowlist: Path | None = None
    keywords: str = "both"
    granularity: str = "month"
    scope_level: str = "both"
    population_mode: str = "matched"
    thresholds: Thresholds = field(default_factory=Thresholds)
    min_group_users: int = 50
    min_cell_users: int = 1
    max_weight: float | None = None
    case_mode: str = "new"
    drop_verified: bool = True
    filter_sources: bool = True
    reference_year: int = 2020
    strict: bool = False
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    chunk_lines: int = 256
    figures: bool = False
    ramp: str = "sequential"
    map_classes: str = "linear"
    seed: int | None = None

    @property
    def scope_levels(self) -> tuple[str, ...]:
        return ("national", "state") if self.scope_level == "both" else (self.scope_level,)

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(self.granularity, self.scope_level if self.scope_level != "both" else "national",
                              self.min_group_users, self.min_cell_users, self.thresholds, self.max_weight)

    def validate(self, stages: Iterable[str] = STAGES) -> RunConfig:
        stages = tuple(stages)
        if self.granularity not in GRANULARITIES:
            raise ConfigError(f"granularity must be one of {GRANULARITIES}, got {self.granularity!r}")
        checks = [("scope_level", SCOPE_CHOICES), ("population_mode", ("matched", "national")),
                  ("case_mode", ("new", "cumulative")), ("ramp", ("sequential", "diverging")),
                  ("map_classes", ("linear", "quantile"))]
        for name, allowed in checks:
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.workers < 1 or self.chunk_lines < 1:
            raise ConfigError("workers and chunk_lines must be >= 1")
        if self.min_group_users < 0 or self.min_cell_users < 0:
            raise ConfigError("minimum user counts must be >= 0")
        if self.max_weight is not None and not self.max_weight > 0:
            raise ConfigError("max_weight must be positive")
        if "score" in stages and self.corpus is None:
            raise ConfigError("config has no corpus path")
        for name in _PATHS:
            p = getattr(self, name)
            if p is not None and not p.is_file():
                raise ConfigError(f"{name} file not found: {p}")
        if self.keywords not in ("2020", "2021", "both") and not Path(self.keywords).is_file():
            raise ConfigError(f"keywords must be 2020, 2021, both or a file path; not found: {self.keywords}")
        if stages:
            first = stages[0]
            for name in STAGE_INPUTS[first]:
                if not (self.output_dir / name).is_file():
                    raise ConfigError(f"stage {first} needs {self.output_dir / name}; run the earlier stages first")
        return self


def _coerce(name: str, value, base: Path):
    if value is None:
        return None
    if name in _PATHS:
        p = Path(value)
        return p if p.is_absolute() else base / p
    if name == "output_dir":
        # outputs land relative to where the command runs, inputs relative to the config
        return Path(value).absolute()
    if name == "keywords":
        v = str(value)
        if v in ("2020", "2021", "both"):
            return v
        p = Path(v)
        return str(p if p.is_absolute() else base / p)
    if name == "thresholds":
        if isinstance(value, Thresholds):
            return value
        if not isinstance(value, dict) or set(value) - {"negative", "positive"}:
            raise ConfigError("thresholds must be an object with 'negative' and 'positive'")
        try:
            return Thresholds(float(value.get("negative", -0.05)), float(value.get("positive", 0.05)))
        except ValueError as exc:
            raise ConfigError(f"thresholds: {exc}") from None
    types = {f.name: f.type for f in fields(RunConfig)}
    t = types[name]
    try:
        if t == "bool":
            if not isinstance(value, bool):
                raise ValueError(f"expected true/false, got {value!r}")
            return value
        if t in ("int", "int | None"):
            if isinstance(value, bool) or int(value) != value:
                raise ValueError(f"expected an integer, got {value!r}")
            return int(value)
        if t == "float | None":
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON run config; relative paths resolve against the config's directory. Overrides win."""
    raw: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        base = path.resolve().parent
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    values = {k: _coerce(k, v, base) for k, v in raw.items()}
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = _coerce(k, v, Path.cwd())
    if values.get("output_dir") is None:
        raise ConfigError("output_dir is required")
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def keyword_set(spec: str) -> KeywordSet:
    if spec in ("2020", "2021"):
        return default_keyword_set(spec)
    if spec == "both":
        terms = sorted(set(default_keyword_set("2020").terms) | set(default_keyword_set("2021").terms))
        return KeywordSet("both", tuple(terms))
    return load_keyword_set(spec)


# --- stage: score ------------------------------------------------------------

_WORKER: dict = {}
_BAD = "bad"


def _init_worker(lexicon: Lexicon, keywords: KeywordSet, policy: CleaningPolicy, strict: bool) -> None:
    _WORKER.update(lexicon=lexicon, keywords=keywords, policy=policy, strict=strict)


def _process_chunk(chunk: list[tuple[int, str]]) -> list[tuple]:
    lexicon, keywords, policy = _WORKER["lexicon"], _WORKER["keywords"], _WORKER["policy"]
    out = []
    for line_no, line in chunk:
        try:
            rec = parse_record(line, line_no)
        except RecordError as exc:
            # exceptions with custom constructors do not survive pickling; ship the text
            out.append((_BAD, str(exc)))
            continue
        reason = rejection_reason(rec, keywords, policy)
        score = None
        if reason is None:
            score = rec.precomputed_score if rec.precomputed_score is not None else score_text(rec.text, lexicon)
        out.append((rec, reason, score))
    return out


def _chunks(it: Iterator, size: int) -> Iterator[list]:
    while True:
        block = list(islice(it, size))
        if not block:
            return
        yield block


def score_corpus(cfg: RunConfig, lexicon: Lexicon, keywords: KeywordSet, policy: CleaningPolicy,
                 report: CleaningReport) -> list[tuple[PostRecord, float]]:
    """Parse, filter and score in parallel chunks; merge in line order so dedup is order-exact."""
    lines = iter_lines(cfg.corpus)
    chunks = _chunks(lines, cfg.chunk_lines)
    init = (lexicon, keywords, policy, cfg.strict)
    if cfg.workers == 1:
        _init_worker(*init)
        results = map(_process_chunk, chunks)
        pool = None
    else:
        pool = ProcessPoolExecutor(cfg.workers, initializer=_init_worker, initargs=init)
        results = pool.map(_process_chunk, chunks)
    kept: list[tuple[PostRecord, float]] = []
    seen: set[str] = set()
    try:
        for block in results:
            for item in block:
                report.input += 1
                if item[0] == _BAD:
                    if cfg.strict:
                        raise ValueError(item[1])
                    report.drop("parse_error")
                    continue
                rec, reason, score = item
                if rec.id in seen:
                    report.drop("duplicate")
                    continue
                seen.add(rec.id)
                if reason:
                    report.drop(reason)
                    continue
                report.kept += 1
                kept.append((rec, score))
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return kept


def read_scored(path: Path) -> Iterator[tuple[PostRecord, float]]:
    for line_no, line in iter_lines(path):
        try:
            obj = json.loads(line)
            score = float(obj.pop("score"))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise ValueError(f"{path}:{line_no}: not a scored record") from None
        yield record_from_dict(obj, line_no), score


def stage_score(cfg: RunConfig, echo: Callable[[str], None]) -> None:
    lexicon = load_lexicon(cfg.lexicon)
    policy = CleaningPolicy(load_source_allowlist(cfg.source_allowlist), cfg.drop_verified, cfg.filter_sources)
    report = CleaningReport()
    kept = score_corpus(cfg, lexicon, keyword_set(cfg.keywords), policy, report)
    out = cfg.output_dir / SCORED
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        for rec, score in kept:
            fh.write(dump_record(rec, score) + "\n")
    write_csv(cfg.output_dir / CLEANING, ("reason", "count"), report.rows())
    dropped = " ".join(f"{r}={report.dropped[r]}" for r in report.dropped)
    echo(f"[score] records in={report.input} out={report.kept} dropped: {dropped}")


# --- stage: attribute --------------------------------------------------------

def stage_attribute(cfg: RunConfig, echo: Callable[[str], None]) -> None:
    profiles: dict[str, UserProfile] = {}
    for rec, _ in read_scored(cfg.output_dir / SCORED):
        p = profiles.get(rec.user_id)
        if p is None:
            profiles[rec.user_id] = UserProfile(rec.user_id, rec.user_name, rec.screen_name, rec.bio,
                                                rec.precomputed_group)
        elif p.precomputed_group is None and rec.precomputed_group is not None:
            profiles[rec.user_id] = replace(p, precomputed_group=rec.precomputed_group)
    names = load_name_table(cfg.names)
    patterns = load_bio_patterns(cfg.bio_patterns) if cfg.bio_patterns else None
    providers = default_providers(names, patterns, cfg.reference_year)
    rows, known = [], 0
    for uid in sorted(profiles):
        res = attribute_user(profiles[uid], providers)
        g = res.group
        known += g is not None
        rows.append([uid, g.gender.value if g else "", g.age_bin.value if g else "", res.provider])
    write_csv(cfg.output_dir / ATTRIBUTION, ATTRIBUTION_HEADER, rows)
    cov = known / len(rows) if rows else 0.0
    echo(f"[attribute] users={len(rows)} attributed={known} unknown={len(rows) - known} coverage={fmt(cov)}")


def read_attribution(path: Path) -> dict[str, SocialGroup | None]:
    out = {}
    for row in read_csv(path, ATTRIBUTION_HEADER):
        out[row["user_id"]] = parse_group([row["gender"], row["age_bin"]]) if row["gender"] else None
    return out


# --- stage: tabulate ---------------------------------------------------------

def _unknown_rows(cells: Iterable[GroupCellCounts]) -> list[list[str]]:
    return [[c.scope, c.period.label, str(c.unknown_users)] for c in cells]


def _read_with_unknown(counts_path: Path, unknown_path: Path) -> list[GroupCellCounts]:
    cells = read_counts_csv(counts_path)
    for row in read_csv(unknown_path, UNKNOWN_HEADER):
        key = (row["scope"], PeriodKey.parse(row["period"]))
        cell = cells.setdefault(key, GroupCellCounts(*key))
        cell.unknown_users = int(row["unknown_users"])
    return [cells[k] for k in sorted(cells)]


def stage_tabulate(cfg: RunConfig, echo: Callable[[str], None]) -> None:
    groups = read_attribution(cfg.output_dir / ATTRIBUTION)
    scored = list(read_scored(cfg.output_dir / SCORED))

    def summaries(granularity: str):
        posts = (ScoredPost(r.user_id, assign_period(r.created_at, granularity), r.state, s) for r, s in scored)
        return summarize_all(posts, cfg.thresholds)

    main = summaries(cfg.granularity)
    missing = {s.user_id for s in main} - set(groups)
    if missing:
        raise ValueError(f"{len(missing)} users missing from {ATTRIBUTION}, e.g. {min(missing)}")
    cells = tabulate(((s, groups[s.user_id]) for s in main), cfg.scope_levels, cfg.strict)
    write_counts_csv(cfg.output_dir / COUNTS, cells.values())
    write_csv(cfg.output_dir / UNKNOWN, UNKNOWN_HEADER, _unknown_rows(cells.values()))
    if "state" in cfg.scope_levels:
        overall = main if cfg.granularity == "all" else summaries("all")
        map_cells = tabulate(((s, groups[s.user_id]) for s in overall), "state", cfg.strict)
        write_counts_csv(cfg.output_dir / MAP_COUNTS, map_cells.values())
        write_csv(cfg.output_dir / MAP_UNKNOWN, UNKNOWN_HEADER, _unknown_rows(map_cells.values()))
    known = sum(groups[s.user_id] is not None for s in main)
    per_level = " ".join(f"{lv}={sum((c.scope == NATIONAL) == (lv == 'national') for c in cells.values())}"
                         for lv in cfg.scope_levels)
    echo(f"[tabulate] user-periods={len(main)} attributed={known} unknown={len(main) - known} "
         f"cells={len(cells)} ({per_level})")


# --- stage: sad --------------------------------------------------------------

def _population_tables(cfg: RunConfig):
    return load_population_table(cfg.census) if cfg.census else default_population_tables()


def estimate_cells(cells: Iterable[GroupCellCounts], tables, cfg: RunConfig) -> tuple[list, list]:
    pc = cfg.pipeline_config()
    dists, wtables = [], []
    for c in cells:
        pop = population_for(tables, c.scope, cfg.population_mode)
        w = compute_weights(pop, c, cfg.max_weight, check_scope=cfg.population_mode == "matched")
        wtables.append(w)
        dists.append(adjust(c, w, pc))
    return dists, wtables


def stage_sad(cfg: RunConfig, echo: Callable[[str], None]) -> None:
    tables = _population_tables(cfg)
    cells = _read_with_unknown(cfg.output_dir / COUNTS, cfg.output_dir / UNKNOWN)
    dists, wtables = estimate_cells(cells, tables, cfg)
    write_sad_csv(cfg.output_dir / SAD, dists)
    write_csv(cfg.output_dir / WEIGHTS, WEIGHTS_HEADER, weights_rows(wtables))
    write_csv(cfg.output_dir / GROUP_PCT, GROUP_PCT_HEADER, group_percentage_rows(cells, cfg.min_group_users))
    map_path = cfg.output_dir / MAP_COUNTS
    if map_path.is_file():
        map_cells = _read_with_unknown(map_path, cfg.output_dir / MAP_UNKNOWN)
        write_sad_csv(cfg.output_dir / MAP_SAD, estimate_cells(map_cells, tables, cfg)[0])
    empty = sum(d.is_empty for d in dists)
    seen = sum(d.total_users + d.unknown_users for d in dists)
    cov = sum(d.total_users for d in dists) / seen if seen else 0.0
    echo(f"[sad] cells={len(dists)} estimated={len(dists) - empty} empty={empty} coverage={fmt(cov)}")


# --- stage: report -----------------------------------------------------------

def correlation_rows(dists: list[AdjustedDistribution], cfg: RunConfig,
                     warn: Callable[[str], None]) -> list[list[str]]:
    if cfg.cases is None:
        return []
    if cfg.granularity == "all":
        warn("correlation skipped: granularity 'all' has a single period")
        return []
    cases = read_cumulative_cases(cfg.cases)
    totals = {scope: t.total for scope, t in _population_tables(cfg).items()}
    rows = []
    for scope in sorted({d.scope for d in dists}):
        if scope not in cases:
            continue
        if scope not in totals:
            warn(f"correlation skipped for {scope}: no population total")
            continue
        rates = case_rates(cases[scope], totals[scope], scope, cfg.granularity, cfg.case_mode)
        try:
            results = correlate(sad_series([d for d in dists if d.scope == scope]), rates)
        except (InsufficientOverlap, ZeroVariance) as exc:
            warn(f"correlation skipped for {scope}: {exc}")
            continue
        rows += [[scope, r.window, str(r.n), fmt(r.r), fmt(r.p_value)] for r in results]
    return rows


def stage_report(cfg: RunConfig, echo: Callable[[str], None], warn: Callable[[str], None]) -> Path:
    out = cfg.output_dir
    dists = read_sad_csv(out / SAD)
    tables = {DELTA: (DELTA_HEADER, delta_rows(adjustment_delta(dists)))}
    if cfg.cases is not None:
        tables[CORRELATION] = (CORRELATION_HEADER, correlation_rows(dists, cfg, warn))

    national = [d for d in dists if d.scope == NATIONAL]
    ts = out / TIMESERIES_SVG
    ts.unlink(missing_ok=True)
    if any(not d.is_empty for d in national):
        adj = sad_series(national)
        raw = {d.period: d.raw_negative for d in national}
        series = [adj, [(p, raw.get(p)) for p, _ in adj]]
        rpt.write_text(ts, rpt.render_timeseries(series, ["SAD index", "raw negative"],
                                                 title="Negative users, national"))
    else:
        warn("no non-empty national cells; time-series chart skipped")

    for name in (MAP_SVG, RAW_MAP_SVG):
        (out / name).unlink(missing_ok=True)
    if (out / MAP_SAD).is_file():
        state = [d for d in read_sad_csv(out / MAP_SAD) if not d.is_empty]
        if state:
            bounds = rpt.load_boundaries(cfg.boundaries)
            ramp = rpt.ramp(cfg.ramp, cfg.map_classes)
            rpt.write_text(out / MAP_SVG, rpt.render_choropleth(
                {d.scope: d.sad_index for d in state}, bounds, ramp, title="SAD index by state"))
            rpt.write_text(out / RAW_MAP_SVG, rpt.render_choropleth(
                {d.scope: d.raw_negative for d in state}, bounds, ramp, title="Raw negative share by state"))
        else:
            warn("no non-empty state cells; maps skipped")

    extra: list[Path] = []
    if cfg.figures:
        from . import figures  # matplotlib import is slow; only pay for it when asked

        fig_dir = out / "figures"
        fig_dir.mkdir(exist_ok=True)
        counts = list(read_counts_csv(out / COUNTS).values())
        made = [figures.plot_sad_series(dists, NATIONAL, fig_dir / "sad_series.png"),
                figures.plot_group_heatmap(counts, NATIONAL, fig_dir / "group_negative.png", cfg.min_group_users)]
        if (out / MAP_SAD).is_file():
            made.append(figures.plot_state_bars(read_sad_csv(out / MAP_SAD), fig_dir / "state_sad.png"))
        extra = [p for p in made if p is not None]

    artifacts = [out / a for a in ARTIFACTS if (out / a).is_file()] + extra
    manifest = rpt.emit_tables(out, tables, artifacts)
    echo(f"[report] artifacts={len(artifacts) + len(tables)} manifest={manifest}")
    return manifest


# --- driver ------------------------------------------------------------------

def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def run_pipeline(cfg: RunConfig, start: str = "score", stop: str = "report",
                 echo: Callable[[str], None] = print, warn: Callable[[str], None] = _warn) -> Path:
    if start not in STAGES or stop not in STAGES:
        raise ConfigError(f"stages must be among {STAGES}")
    stages = STAGES[STAGES.index(start):STAGES.index(stop) + 1]
    if not stages:
        raise ConfigError(f"stage {start} comes after {stop}")
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {cfg.output_dir}: {exc.strerror or exc}") from None
    cfg.validate(stages)
    runners = {
        "score": lambda: stage_score(cfg, echo),
        "attribute": lambda: stage_attribute(cfg, echo),
        "tabulate": lambda: stage_tabulate(cfg, echo),
        "sad": lambda: stage_sad(cfg, echo),
        "report": lambda: stage_report(cfg, echo, warn),
    }
    for stage in stages:
        try:
            runners[stage]()
        except (OSError, ValueError, KeyError, CensusError) as exc:
            msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
            raise StageError(stage, msg) from exc
        if stage == "score" and (cfg.output_dir / SCORED).stat().st_size == 0:
            warn("no records survived cleaning; downstream outputs will be empty")
    return cfg.output_dir
