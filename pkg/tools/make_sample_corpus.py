"""Regenerate the bundled sample run: corpus.jsonl, cases.csv and config.json.

The corpus is synthetic: 500 lines over 2020-2021 exercising every cleaning rule
(malformed lines, duplicates, bots, verified accounts, off-topic and no-geo posts)
plus all three attribution paths (group label, name + bio, unknown).
Usage: python3 tools/make_sample_corpus.py
"""

import csv
import datetime as dt
import json
import math
import random
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "sadindex" / "data" / "sample"
SEED = 20200301
N_LINES = 500

STATES = ["CA", "TX", "NY", "FL", "IL", "PA", "OH", "GA", "WA", "WY", "VT", "MA", "AZ", "CO", "MI"]
STATE_W = [12, 9, 8, 7, 4, 4, 4, 3, 3, 2, 2, 3, 3, 2, 3]
CASE_SCOPES = {"US": 331_000_000, "CA": 39_538_000, "TX": 29_146_000, "NY": 20_201_000, "FL": 21_538_000}
HUMAN = ["Twitter for iPhone", "Twitter for Android", "Twitter Web App", "Twitter for iPad"]
BOTS = ["IFTTT", "dlvr.it", "Buffer", "CoronaBot 3000"]
KW_2020 = ["covid", "coronavirus", "lockdown", "quarantine", "pandemic", "social distancing", "virus"]
KW_2021 = ["vaccine", "pfizer", "moderna", "covid", "pandemic", "vax"]
POS = ["good", "great", "love", "happy", "safe", "hope", "thanks", "grateful", "relief", "recovered", "best"]
NEG = ["bad", "sad", "scared", "afraid", "worried", "sick", "terrible", "awful", "lonely", "tired", "worst"]
NEUTRAL = ["today", "update", "news", "again", "week", "masks", "work", "home", "store", "family"]
GROUP_NEG = {"A_le18": 0.5, "A_19_29": 0.45, "A_30_39": 0.35, "A_ge40": 0.25}
FEMALE = ["emma", "olivia", "sophia", "ashley", "abigail", "jessica", "sarah", "emily"]
MALE = ["james", "michael", "david", "andrew", "anthony", "daniel", "matthew", "joshua"]
AGES = {"A_le18": (15, 18), "A_19_29": (19, 29), "A_30_39": (30, 39), "A_ge40": (40, 70)}
AGE_W = [1, 5, 3, 2]  # sample skews young, as on social media


def make_users(rng, n=150):
    users = []
    for i in range(1, n + 1):
        gender = rng.choice(["Female", "Male"])
        age_bin = rng.choices(list(AGES), AGE_W)[0]
        kind = rng.choices(["label", "bio", "unknown"], [40, 35, 25])[0]
        u = {"user_id": f"u{i:04d}", "state": rng.choices(STATES, STATE_W)[0], "neg": GROUP_NEG[age_bin]}
        if kind == "label":
            u["group"] = f"{gender},{age_bin}"
        elif kind == "bio":
            age = rng.randint(*AGES[age_bin])
            first = rng.choice(FEMALE if gender == "Female" else MALE)
            u["user_name"] = f"{first.title()} {rng.choice(['Smith', 'Lee', 'Garcia', 'Brown'])}"
            u["screen_name"] = f"{first}{rng.randint(1, 99)}"
            u["bio"] = rng.choice([f"{age} years old, coffee first", f"born in {2020 - age}. runner",
                                   f"age: {age} | dog person"])
        else:
            u["user_name"] = rng.choice(["Xyz Quux", "The Daily Feed", "Zorblat"])
            u["bio"] = rng.choice(["", "opinions my own", "news junkie"])
        users.append(u)
    return users


def make_text(rng, when, neg_rate):
    kw = rng.choice(KW_2020 if when.year == 2020 else KW_2021)
    # more negative in the spring 2020 wave and the winter 2020/21 wave
    wave = 0.12 * math.exp(-((when.month + 12 * (when.year - 2020) - 4) ** 2) / 4) \
        + 0.1 * math.exp(-((when.month + 12 * (when.year - 2020) - 13) ** 2) / 3)
    r = rng.random()
    parts = [kw]
    if r < neg_rate + wave:
        word = rng.choice(NEG)
        parts += [rng.choice(["", "so", "really"]), word, rng.choice(NEUTRAL)]
    elif r < neg_rate + wave + 0.2:
        parts += [rng.choice(NEUTRAL), rng.choice(NEUTRAL)]
    else:
        word = rng.choice(POS)
        if rng.random() < 0.15:
            parts = [kw, "not", rng.choice(POS)]  # negated positive reads negative
        else:
            parts += [rng.choice(["", "very"]), word, rng.choice(NEUTRAL)]
    text = " ".join(p for p in parts if p)
    if rng.random() < 0.2:
        text += "!" * rng.randint(1, 3)
    if rng.random() < 0.1:
        text = text.upper()
    return text[0].upper() + text[1:]


def make_corpus(rng):
    users = make_users(rng)
    start = dt.datetime(2020, 1, 1, tzinfo=dt.timezone.utc)
    span = int((dt.datetime(2022, 1, 1, tzinfo=dt.timezone.utc) - start).total_seconds())
    lines, valid = [], []
    kinds = (["ok"] * 430 + ["verified"] * 8 + ["bot"] * 12 + ["offtopic"] * 12 + ["nogeo"] * 10
             + ["dup"] * 15 + ["bad"] * 13)
    rng.shuffle(kinds)
    kinds.sort(key=lambda k: k == "dup")  # duplicates last, so they always have a source line
    for n, kind in enumerate(kinds[:N_LINES]):
        if kind == "dup":
            lines.append(rng.choice(valid))
            continue
        if kind == "bad":
            lines.append(rng.choice([
                '{"id": "broken", "text": "covid',
                json.dumps({"user_id": "u0001", "created_at": "2020-05-01T00:00:00Z", "text": "covid"}),
                json.dumps({"id": f"r{n}", "user_id": "u0002", "created_at": "2020-06-01T00:00:00Z",
                            "text": "covid ok", "state": "CA", "sentiment": 1.2}),
                json.dumps({"id": f"r{n}", "user_id": "u0003", "created_at": "last tuesday",
                            "text": "covid", "state": "TX"}),
                "[1, 2, 3]",
            ]))
            continue
        u = rng.choice(users)
        when = start + dt.timedelta(seconds=rng.randrange(span))
        rec = {"id": f"t{n:05d}", "user_id": u["user_id"], "created_at": when.strftime("%Y-%m-%dT%H:%M:%SZ"),
               "text": make_text(rng, when, u["neg"]), "state": u["state"], "source": rng.choice(HUMAN),
               "verified": False}
        for key in ("group", "user_name", "screen_name", "bio"):
            if u.get(key):
                rec[key] = u[key]
        if rng.random() < 0.08:
            rec["sentiment"] = round(rng.uniform(-0.9, 0.9), 4)
        if rng.random() < 0.15:
            rec["state"] = rec["state"].lower()
        if kind == "verified":
            rec["verified"] = True
        elif kind == "bot":
            rec["source"] = rng.choice(BOTS)
        elif kind == "offtopic":
            rec["text"] = rng.choice(["Great game last night", "new recipe turned out so good",
                                      "traffic is the worst today"])
        elif kind == "nogeo":
            rec["state"] = rng.choice([None, "", "ZZ", "Texas"])
        line = json.dumps(rec, ensure_ascii=False)
        lines.append(line)
        if kind == "ok":
            valid.append(line)
    return lines


def make_cases():
    rows = []
    day = dt.date(2020, 1, 22)
    end = dt.date(2021, 12, 31)
    cum = dict.fromkeys(CASE_SCOPES, 0.0)
    while day <= end:
        t = (day - dt.date(2020, 1, 22)).days
        waves = (0.00004 * math.exp(-((t - 80) / 25) ** 2) + 0.0002 * math.exp(-((t - 350) / 40) ** 2)
                 + 0.00012 * math.exp(-((t - 580) / 35) ** 2))
        for i, (scope, pop) in enumerate(CASE_SCOPES.items()):
            tilt = 1 + 0.2 * math.sin(t / 30 + i)
            cum[scope] += pop * waves * tilt
            rows.append([scope, day.isoformat(), str(int(cum[scope]))])
        day += dt.timedelta(days=1)
    return rows


def main():
    rng = random.Random(SEED)
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "corpus.jsonl").write_text("\n".join(make_corpus(rng)) + "\n", encoding="utf-8")
    with open(OUT / "cases.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scope", "date", "cumulative_cases"])
        w.writerows(make_cases())
    config = {"corpus": "corpus.jsonl", "cases": "cases.csv", "output_dir": "sadindex-out",
              "keywords": "both", "granularity": "month", "scope_level": "both",
              "population_mode": "matched", "thresholds": {"negative": -0.05, "positive": 0.05},
              "min_group_users": 50, "case_mode": "new"}
    (OUT / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
