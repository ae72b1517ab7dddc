"""Throughput benchmark: ingest + score + tabulate on a generated corpus.

Usage: python3 tools/bench_throughput.py [N_RECORDS] [WORKERS]
Prints records/second/core for the score, attribute and tabulate stages run
through the normal pipeline (intermediate files included).
"""

import json
import random
import sys
import tempfile
import time
from pathlib import Path

from sadindex.pipeline import load_config, run_pipeline

WORDS = ["covid", "lockdown", "vaccine", "pandemic", "good", "bad", "great", "sad", "worried", "happy",
         "not", "very", "today", "masks", "family", "work", "home", "tired", "hope", "news"]
STATES = ["CA", "TX", "NY", "FL", "IL", "PA", "OH", "GA", "WA", "WY", "VT"]
GROUPS = [f"{g},{a}" for g in ("Female", "Male") for a in ("A_le18", "A_19_29", "A_30_39", "A_ge40")]


def write_corpus(path: Path, n: int, seed: int = 7) -> Path:
    """``n`` JSONL posts from about n/5 users; every post needs text scoring."""
    rng = random.Random(seed)
    users = max(1, n // 5)
    base = 1577836800  # 2020-01-01T00:00:00Z
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n):
            u = rng.randrange(users)
            rec = {"id": f"b{i}", "user_id": f"u{u}", "created_at": base + rng.randrange(63_158_400),
                   "text": " ".join(rng.choices(WORDS, k=rng.randint(5, 14))).capitalize(),
                   "state": STATES[u % len(STATES)], "source": "Twitter for iPhone"}
            if u % 3:
                rec["group"] = GROUPS[u % len(GROUPS)]
            fh.write(json.dumps(rec) + "\n")
    return path


def measure(corpus: Path, out_dir: Path, workers: int = 1) -> dict:
    cfg = load_config(None, {"corpus": str(corpus), "output_dir": str(out_dir), "workers": workers,
                             "granularity": "week", "scope_level": "both"})
    n = sum(1 for _ in open(corpus, encoding="utf-8"))
    t0 = time.perf_counter()
    run_pipeline(cfg, "score", "tabulate", echo=lambda *_: None)
    elapsed = time.perf_counter() - t0
    return {"records": n, "seconds": elapsed, "workers": workers, "per_core": n / elapsed / workers}


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 1_000_000
    workers = int(sys.argv[2]) if len(sys.argv) > 2 else 1
    with tempfile.TemporaryDirectory() as tmp:
        corpus = write_corpus(Path(tmp) / "bench.jsonl", n)
        r = measure(corpus, Path(tmp) / "out", workers)
    print(f"{r['records']} records in {r['seconds']:.2f} s with {workers} worker(s): "
          f"{r['per_core']:,.0f} records/s/core")


if __name__ == "__main__":
    main()
