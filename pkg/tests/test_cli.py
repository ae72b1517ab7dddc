import csv
import datetime as dt
import json
import shutil

import pytest

from sadindex.cli import main
from sadindex.csvio import read_csv
from sadindex.poststrat import SAD_HEADER

US_POP = 331_000_000


@pytest.fixture
def sample(tmp_path, sample_dir):
    """A writable copy of the bundled sample (config paths are relative to it)."""
    dest = tmp_path / "sample"
    shutil.copytree(sample_dir, dest)
    return dest


def run(*argv):
    return main([str(a) for a in argv])


def write_sad(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAD_HEADER)
        for scope, period, neg in rows:
            w.writerow([scope, period, f"{neg:.6f}", "0.000000", f"{1 - neg:.6f}",
                        f"{neg:.6f}", "0.000000", f"{1 - neg:.6f}", "10", "", ""])


def write_cases(path, months):
    """One row per month on its first day; ``months`` maps (y, m) to new cases."""
    cum = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scope", "date", "cumulative_cases"])
        for (y, m), new in sorted(months.items()):
            cum += new
            w.writerow(["US", dt.date(y, m, 1).isoformat(), cum])


MONTHS = [(2020, m) for m in range(3, 13)] + [(2021, m) for m in range(1, 7)]
NEW = {ym: 10_000 * (1 + (i * 7) % 11) for i, ym in enumerate(MONTHS)}


def rate(ym):
    return NEW[ym] / US_POP * 100_000


class TestRun:
    def test_sample_run(self, sample, tmp_path, capsys):
        out = tmp_path / "out"
        assert run("run", "-c", sample / "config.json", "--out", out, "-j", 1) == 0
        text = capsys.readouterr().out
        for stage in ("[score]", "[attribute]", "[tabulate]", "[sad]", "[report]"):
            assert stage in text
        assert (out / "manifest.csv").is_file() and (out / "sad_map.svg").is_file()

    def test_missing_census(self, sample, tmp_path, capsys):
        rc = run("run", "-c", sample / "config.json", "--out", tmp_path / "o", "--census", tmp_path / "nope.csv")
        assert rc == 2
        assert "nope.csv" in capsys.readouterr().err

    def test_empty_corpus(self, sample, tmp_path, capsys):
        (sample / "corpus.jsonl").write_text("")
        assert run("run", "-c", sample / "config.json", "--out", tmp_path / "o") == 0
        assert "warning" in capsys.readouterr().err.lower()

    def test_from_tabulate(self, sample, tmp_path):
        out = tmp_path / "o"
        assert run("run", "-c", sample / "config.json", "--out", out, "--to", "attribute") == 0
        assert not (out / "sad.csv").exists()
        assert run("run", "-c", sample / "config.json", "--out", out, "--from", "tabulate") == 0
        assert (out / "sad.csv").is_file()

    def test_from_without_intermediates(self, sample, tmp_path):
        assert run("run", "-c", sample / "config.json", "--out", tmp_path / "o", "--from", "sad") == 2

    def test_single_stage(self, sample, tmp_path):
        out = tmp_path / "o"
        assert run("score", "-c", sample / "config.json", "--out", out) == 0
        assert (out / "scored.jsonl").is_file() and not (out / "attribution.csv").exists()

    def test_bad_flag_value(self, sample):
        with pytest.raises(SystemExit) as exc:
            run("run", "-c", sample / "config.json", "--granularity", "fortnight")
        assert exc.value.code == 2

    def test_unknown_config_key(self, sample, tmp_path):
        cfg = json.loads((sample / "config.json").read_text())
        cfg["colour"] = "blue"
        (sample / "bad.json").write_text(json.dumps(cfg))
        assert run("validate-config", "-c", sample / "bad.json") == 2

    def test_validate_config(self, sample, capsys):
        assert run("validate-config", "-c", sample / "config.json") == 0
        assert "config ok" in capsys.readouterr().out


class TestCorrelate:
    def setup_files(self, tmp_path, slope):
        write_sad(tmp_path / "sad.csv", [("US", f"{y}-{m:02d}", 0.5 + slope * rate((y, m))) for y, m in MONTHS])
        write_cases(tmp_path / "cases.csv", NEW)

    def correlate(self, tmp_path):
        return run("correlate", "--sad", tmp_path / "sad.csv", "--cases", tmp_path / "cases.csv",
                   "--granularity", "month", "--report", tmp_path / "corr.csv")

    @pytest.mark.parametrize("slope,want", [(0.001, "1.000000"), (-0.001, "-1.000000")])
    def test_perfect_linear(self, tmp_path, slope, want):
        self.setup_files(tmp_path, slope)
        assert self.correlate(tmp_path) == 0
        rows = read_csv(tmp_path / "corr.csv")
        assert [r["window"] for r in rows] == ["2020", "2021", "all"]
        assert all(r["r"] == want for r in rows)
        assert rows[-1]["n"] == str(len(MONTHS))

    def test_insufficient_overlap(self, tmp_path, capsys):
        write_sad(tmp_path / "sad.csv", [("US", "2019-01", 0.3), ("US", "2019-02", 0.4)])
        write_cases(tmp_path / "cases.csv", NEW)
        assert self.correlate(tmp_path) == 2
        assert "error" in capsys.readouterr().err

    def test_missing_sad(self, tmp_path):
        write_cases(tmp_path / "cases.csv", NEW)
        assert self.correlate(tmp_path) == 2


class TestSimulate:
    def test_default_self_check(self, capsys):
        assert run("simulate", "--n", 20_000, "--seed", 3) == 0
        out = capsys.readouterr().out
        assert "self-check passed" in out and "adjusted_abs_error" in out

    def test_homogeneous_skips(self, tmp_path, capsys):
        spec = {"n": 2000, "seed": 1, "groups": {
            "Female,A_19_29": {"share": 0.5, "levels": [0.3, 0.3, 0.4], "multiplier": 1},
            "Male,A_ge40": {"share": 0.5, "levels": [0.2, 0.3, 0.5], "multiplier": 1}}}
        (tmp_path / "s.json").write_text(json.dumps(spec))
        assert run("simulate", "--spec", tmp_path / "s.json", "--self-check") == 0
        assert "skipped" in capsys.readouterr().out

    @pytest.mark.parametrize("text", ['{"n": 10}', "not json", '{"n": 10, "groups": {"X,Y": {}}}'])
    def test_malformed_spec(self, tmp_path, text):
        (tmp_path / "s.json").write_text(text)
        assert run("simulate", "--spec", tmp_path / "s.json") == 2

    def test_report_csv(self, tmp_path):
        assert run("simulate", "--n", 5000, "--report", tmp_path / "r.csv", "--no-self-check") == 0
        metrics = {r["metric"] for r in read_csv(tmp_path / "r.csv")}
        assert {"truth_negative", "raw_negative", "adjusted_negative"} <= metrics


def test_figures_opt_in(sample, tmp_path):
    out = tmp_path / "o"
    assert run("run", "-c", sample / "config.json", "--out", out, "--figures", "-j", 1) == 0
    pngs = sorted(p.name for p in (out / "figures").glob("*.png"))
    assert pngs == ["group_negative.png", "sad_series.png", "state_sad.png"]
    assert all((out / "figures" / p).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n" for p in pngs)
    assert "figures/sad_series.png" in (out / "manifest.csv").read_text()
