"""Regenerate the golden files under tests/golden.

Run after an intentional change to report formatting or the sample data:
    python3 tools/update_golden.py
Review the diff before committing.
"""

import tempfile
from pathlib import Path

from sadindex.ingest import PeriodKey
from sadindex.pipeline import load_config, run_pipeline
from sadindex.report import render_timeseries

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = ROOT / "tests" / "golden"
SAMPLE = ROOT / "src" / "sadindex" / "data" / "sample"

# A small fixed chart: three monthly points, then a gap, then two more.
TIMESERIES = [
    [(PeriodKey("month", (2020, m)), v) for m, v in
     [(3, 0.31), (4, 0.42), (5, 0.38), (6, None), (7, 0.27), (8, 0.33)]],
    [(PeriodKey("month", (2020, m)), v) for m, v in
     [(3, 0.35), (4, 0.47), (5, 0.40), (6, 0.36), (7, 0.30), (8, 0.31)]],
]
TIMESERIES_LABELS = ["raw", "SAD index"]


def timeseries_svg() -> str:
    return render_timeseries(TIMESERIES, TIMESERIES_LABELS, title="Negative share, US")


def sample_manifest(workers: int = 1) -> str:
    with tempfile.TemporaryDirectory() as tmp:
        cfg = load_config(SAMPLE / "config.json", {"output_dir": tmp, "workers": workers})
        run_pipeline(cfg, "score", "report", echo=lambda *_: None)
        return (Path(tmp) / "manifest.csv").read_text(encoding="utf-8")


def main():
    GOLDEN.mkdir(parents=True, exist_ok=True)
    (GOLDEN / "timeseries.svg").write_text(timeseries_svg(), encoding="utf-8")
    (GOLDEN / "sample_manifest.csv").write_text(sample_manifest(), encoding="utf-8")
    print(f"wrote {GOLDEN}")


if __name__ == "__main__":
    main()
