"""Synthetic populations with known truth, biased sampling, and a naive reference estimator.

Random numbers come from a SplitMix64 counter hash: the draw for (stream, counter)
is ``mix(mix(seed + G*(stream+1)) + G*(counter+1))`` where ``G`` is the 64-bit golden
ratio increment and ``mix`` the SplitMix64 output finalizer. Streams are user indices,
so any range of users can be generated independently and in any order.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .csvio import fmt
from .demographics import GROUPS, LabelProvider, PopulationTable, SocialGroup, UserProfile, attribute_user, parse_group
from .ingest import PostRecord, assign_period
from .poststrat import PipelineConfig, compute_weights, adjust, tabulate
from .sentiment import DEFAULT_THRESHOLDS, LEVELS, Level, ScoredPost, Thresholds, summarize_all

GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class CounterRNG:
    """Stateless counter-based generator; ``uniform(streams, k)`` is the k-th draw of each stream."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK

    def bits(self, streams, counter: int) -> np.ndarray:
        s = np.asarray(streams, dtype=np.uint64)
        with np.errstate(over="ignore"):
            key = _mix(np.uint64(self.seed) + np.uint64(GOLDEN) * (s + np.uint64(1)))
            return _mix(key + np.uint64((GOLDEN * (counter + 1)) & _MASK))

    def uniform(self, streams, counter: int) -> np.ndarray:
        """Doubles in [0, 1) built from the top 53 bits."""
        return (self.bits(streams, counter) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


# --- spec --------------------------------------------------------------------

class SimSpecError(ValueError):
    pass


@dataclass(frozen=True)
class GroupSpec:
    share: float
    levels: tuple[float, float, float]  # negative, neutral, positive
    multiplier: float = 1.0


@dataclass(frozen=True)
class SimSpec:
    groups: dict[SocialGroup, GroupSpec]
    n: int
    seed: int = 0
    periods: int = 1
    states: tuple[str, ...] = ("CA", "TX", "NY", "FL")
    max_posts_per_user: int = 1
    start: str = "2020-01"
    self_check: bool = True

    def __post_init__(self):
        if not self.groups:
            raise SimSpecError("groups: at least one group is required")
        total = math.fsum(g.share for g in self.groups.values())
        if abs(total - 1.0) > 1e-9:
            raise SimSpecError(f"groups: population shares sum to {total}, not 1")
        for grp, gs in self.groups.items():
            if gs.share < 0:
                raise SimSpecError(f"groups.{grp.label}.share must be >= 0")
            if len(gs.levels) != 3 or any(p < 0 for p in gs.levels) or abs(math.fsum(gs.levels) - 1) > 1e-9:
                raise SimSpecError(f"groups.{grp.label}.levels must be 3 probabilities summing to 1")
            if not gs.multiplier > 0:
                raise SimSpecError(f"groups.{grp.label}.multiplier must be > 0")
        if self.n < 1:
            raise SimSpecError("n must be >= 1")
        if self.periods < 1:
            raise SimSpecError("periods must be >= 1")
        if self.max_posts_per_user < 1:
            raise SimSpecError("max_posts_per_user must be >= 1")
        if not self.states:
            raise SimSpecError("states must be non-empty")
        if not 0 <= self.seed <= _MASK:
            raise SimSpecError("seed must be an unsigned 64-bit integer")

    @property
    def ordered(self) -> list[tuple[SocialGroup, GroupSpec]]:
        return [(g, self.groups[g]) for g in GROUPS if g in self.groups]

    @property
    def sampling_probs(self) -> list[float]:
        raw = [gs.share * gs.multiplier for _, gs in self.ordered]
        tot = math.fsum(raw)
        return [r / tot for r in raw]

    def population_table(self, scope: str = "US") -> PopulationTable:
        return PopulationTable.from_shares(scope, {g: gs.share for g, gs in self.groups.items()})

    @property
    def heterogeneous(self) -> bool:
        """True when both group sentiment and sampling rates differ, so raw estimates are biased."""
        dists = {gs.levels for gs in self.groups.values() if gs.share > 0}
        mults = {gs.multiplier for gs in self.groups.values() if gs.share > 0}
        return len(dists) > 1 and len(mults) > 1

    def with_seed(self, seed: int) -> SimSpec:
        return replace(self, seed=seed)

    def with_n(self, n: int) -> SimSpec:
        return replace(self, n=n)


def simspec_from_dict(obj: Mapping) -> SimSpec:
    if not isinstance(obj, Mapping):
        raise SimSpecError("spec must be a JSON object")
    try:
        groups = {}
        for label, g in obj["groups"].items():
            try:
                grp = parse_group(label)
            except ValueError as exc:
                raise SimSpecError(f"groups: {exc}") from None
            groups[grp] = GroupSpec(float(g["share"]), tuple(float(x) for x in g["levels"]),
                                    float(g.get("multiplier", 1.0)))
        return SimSpec(
            groups=groups,
            n=int(obj["n"]),
            seed=int(obj.get("seed", 0)),
            periods=int(obj.get("periods", 1)),
            states=tuple(obj.get("states", SimSpec.states)),
            max_posts_per_user=int(obj.get("max_posts_per_user", 1)),
            start=str(obj.get("start", "2020-01")),
            self_check=bool(obj.get("self_check", True)),
        )
    except KeyError as exc:
        raise SimSpecError(f"missing field {exc.args[0]!r}") from None
    except (TypeError, AttributeError, ValueError) as exc:
        if isinstance(exc, SimSpecError):
            raise
        raise SimSpecError(f"invalid spec: {exc}") from None


def load_simspec(path: str | Path) -> SimSpec:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SimSpecError(f"{path}: not valid JSON ({exc.msg})") from None
    return simspec_from_dict(obj)


def default_simspec() -> SimSpec:
    text = resources.files("sadindex").joinpath("data/simspec_default.json").read_text(encoding="utf-8")
    return simspec_from_dict(json.loads(text))


# --- generation --------------------------------------------------------------

@dataclass(frozen=True)
class GroundTruth:
    distribution: dict[Level, float]

    @property
    def negative(self) -> float:
        return self.distribution[Level.Negative]


def ground_truth(spec: SimSpec) -> GroundTruth:
    dist = {l: math.fsum(gs.share * gs.levels[l] for _, gs in spec.ordered) for l in LEVELS}
    return GroundTruth(dist)


@dataclass
class SyntheticSample:
    """Per-user draws plus flat per-post arrays; ``records`` materializes a corpus."""

    spec: SimSpec
    group_idx: np.ndarray  # per user, index into spec.ordered
    level: np.ndarray
    n_posts: np.ndarray
    truth: GroundTruth
    first_user: int = 0
    state_idx: np.ndarray | None = None
    period_idx: np.ndarray | None = None
    post_row: np.ndarray | None = None  # per post, row into the per-user arrays
    post_k: np.ndarray | None = None
    post_score: np.ndarray | None = None
    post_seconds: np.ndarray | None = None

    @property
    def groups(self) -> list[SocialGroup]:
        return [g for g, _ in self.spec.ordered]

    def user_id(self, row: int) -> str:
        return f"u{self.first_user + row:07d}"

    def _month_starts(self) -> list[dt.datetime]:
        return [_month_start(self.spec.start, j) for j in range(self.spec.periods)]

    def records(self) -> list[PostRecord]:
        starts = self._month_starts()
        groups = self.groups
        states = self.spec.states
        out = []
        for row, k, score, secs in zip(self.post_row.tolist(), self.post_k.tolist(),
                                       self.post_score.tolist(), self.post_seconds.tolist()):
            out.append(PostRecord(
                id=f"sim{self.spec.seed}-{self.first_user + row}-{k}",
                user_id=self.user_id(row),
                created_at=starts[int(self.period_idx[row])] + dt.timedelta(seconds=secs),
                text="synthetic covid post",
                state=states[int(self.state_idx[row])],
                source="Twitter for iPhone",
                verified=False,
                precomputed_score=score,
                precomputed_group=groups[int(self.group_idx[row])],
            ))
        return out

    def scored_posts(self, granularity: str = "all") -> list[ScoredPost]:
        """Posts as the scoring stage would emit them, without building records."""
        starts = self._month_starts()
        uids = [self.user_id(r) for r in range(len(self.group_idx))]
        states = [self.spec.states[i] for i in self.state_idx.tolist()]
        periods = self.period_idx.tolist()
        if granularity in ("all", "month"):
            keys = [assign_period(t, granularity) for t in starts]
            return [ScoredPost(uids[r], keys[periods[r]], states[r], sc)
                    for r, sc in zip(self.post_row.tolist(), self.post_score.tolist())]
        return [ScoredPost(uids[r], assign_period(starts[periods[r]] + dt.timedelta(seconds=secs), granularity),
                           states[r], sc)
                for r, sc, secs in zip(self.post_row.tolist(), self.post_score.tolist(),
                                       self.post_seconds.tolist())]


# draw slots within one user's stream
_SLOT_GROUP, _SLOT_LEVEL, _SLOT_STATE, _SLOT_PERIOD, _SLOT_NPOSTS, _SLOT_POSTS = range(6)
_EPS = 0.001


def _level_bands(th: Thresholds) -> np.ndarray:
    return np.array([(-1.0, th.negative - _EPS), (th.negative + _EPS, th.positive - _EPS),
                     (th.positive + _EPS, 1.0)])


def _month_start(start: str, offset: int) -> dt.datetime:
    y, m = (int(x) for x in start.split("-"))
    m0 = y * 12 + (m - 1) + offset
    return dt.datetime(m0 // 12, m0 % 12 + 1, 1, tzinfo=dt.timezone.utc)


def generate(spec: SimSpec, user_range: tuple[int, int] | None = None,
             thresholds: Thresholds = DEFAULT_THRESHOLDS) -> SyntheticSample:
    """Draw users group-first, then level, then per-post scores uniform inside the level's band.

    ``user_range`` generates a slice of the user index space; slices concatenate to
    exactly the full sample.
    """
    lo, hi = user_range or (0, spec.n)
    users = np.arange(lo, hi, dtype=np.uint64)
    rng = CounterRNG(spec.seed)

    cum = np.cumsum(spec.sampling_probs)
    cum[-1] = 1.0
    gidx = np.searchsorted(cum, rng.uniform(users, _SLOT_GROUP), side="right")
    level_cum = np.array([np.cumsum(gs.levels) for _, gs in spec.ordered])
    level_cum[:, -1] = 1.0
    level = (rng.uniform(users, _SLOT_LEVEL)[:, None] >= level_cum[gidx]).sum(axis=1)
    n_posts = 1 + np.floor(rng.uniform(users, _SLOT_NPOSTS) * spec.max_posts_per_user).astype(np.int64)
    state_idx = np.floor(rng.uniform(users, _SLOT_STATE) * len(spec.states)).astype(np.int64)
    period_idx = np.floor(rng.uniform(users, _SLOT_PERIOD) * spec.periods).astype(np.int64)

    post_row = np.repeat(np.arange(len(users)), n_posts)
    post_k = np.arange(len(post_row)) - np.repeat(np.cumsum(n_posts) - n_posts, n_posts)
    kmax = spec.max_posts_per_user
    u_score = np.stack([rng.uniform(users, _SLOT_POSTS + 2 * k) for k in range(kmax)])
    u_secs = np.stack([rng.uniform(users, _SLOT_POSTS + 2 * k + 1) for k in range(kmax)])
    bands = _level_bands(thresholds)[level[post_row]]
    score = np.round(bands[:, 0] + u_score[post_k, post_row] * (bands[:, 1] - bands[:, 0]), 6)
    # stay inside the first 28 days so every post lands in the drawn month
    seconds = np.floor(u_secs[post_k, post_row] * 28 * 86400).astype(np.int64)

    return SyntheticSample(spec, gidx, level, n_posts, ground_truth(spec), lo, state_idx, period_idx,
                           post_row, post_k, score, seconds)


# --- reference estimator -----------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    adjusted: dict[Level, float]
    raw: dict[Level, float]
    total_users: int

    @property
    def sad_index(self) -> float:
        return self.adjusted[Level.Negative]


def oracle_adjusted(users: Iterable[tuple[SocialGroup, Level]],
                    population_shares: Mapping[SocialGroup, float]) -> OracleResult | None:
    """Direct evaluation from a flat user list: each user carries its group's weight.

    Deliberately naive and independent of the production tabulation/weighting code.
    Returns None when no user belongs to a group with positive total weight.
    """
    users = [(g, Level(l)) for g, l in users]
    if not users:
        return None
    size: dict[SocialGroup, int] = {}
    for g, _ in users:
        size[g] = size.get(g, 0) + 1
    n = len(users)
    weight = {g: population_shares.get(g, 0.0) / (k / n) for g, k in size.items()}

    weighted = {l: 0.0 for l in Level}
    plain = {l: 0 for l in Level}
    total_weight = 0.0
    for g, l in users:
        weighted[l] += weight[g]
        plain[l] += 1
        total_weight += weight[g]
    if total_weight <= 0:
        return None
    return OracleResult({l: weighted[l] / total_weight for l in Level},
                        {l: plain[l] / n for l in Level}, n)


# --- bias experiment ---------------------------------------------------------

@dataclass(frozen=True)
class ExperimentReport:
    truth_negative: float
    raw_negative: float
    adjusted_negative: float
    users: int
    coverage: float
    heterogeneous: bool

    @property
    def raw_error(self) -> float:
        return abs(self.raw_negative - self.truth_negative)

    @property
    def adjusted_error(self) -> float:
        return abs(self.adjusted_negative - self.truth_negative)

    def rows(self) -> list[tuple[str, str]]:
        return [
            ("truth_negative", fmt(self.truth_negative)),
            ("raw_negative", fmt(self.raw_negative)),
            ("adjusted_negative", fmt(self.adjusted_negative)),
            ("raw_abs_error", fmt(self.raw_error)),
            ("adjusted_abs_error", fmt(self.adjusted_error)),
            ("users", str(self.users)),
            ("coverage", fmt(self.coverage)),
            ("heterogeneous", str(int(self.heterogeneous))),
        ]


def bias_experiment(spec: SimSpec, granularity: str = "all") -> ExperimentReport:
    """Generate a biased corpus and push it through the production estimator (national scope)."""
    sample = generate(spec)
    pop = spec.population_table("US")
    summaries = summarize_all(sample.scored_posts(granularity))
    provider = [LabelProvider()]
    groups = sample.groups
    profiles = {}
    for row, g in enumerate(sample.group_idx.tolist()):
        uid = sample.user_id(row)
        profiles[uid] = attribute_user(UserProfile(uid, precomputed_group=groups[g]), provider).group
    cells = tabulate(((s, profiles[s.user_id]) for s in summaries), "national")
    if len(cells) != 1:
        raise ValueError("bias_experiment expects a single national cell; use granularity='all'")
    (counts,) = cells.values()
    dist = adjust(counts, compute_weights(pop, counts), PipelineConfig(granularity=granularity))
    truth = sample.truth.negative
    return ExperimentReport(truth, dist.raw_negative, dist.sad_index, dist.total_users,
                            dist.coverage, spec.heterogeneous)
