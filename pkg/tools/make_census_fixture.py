"""Regenerate src/sadindex/data/census_2020_fixture.csv.

National row: combined age shares of 0.2336 (<=18), 0.1490 (19-29), 0.1356 (30-39),
female >=40 0.2531 and male >=40 0.2287 over a 331,000,000 total; the gender split
inside the three younger bins is illustrative. State rows: approximate 2020 resident
totals with the national composition tilted by a fixed deterministic pattern. This is
a test fixture, not an official census extract.
"""

import csv
import math
import sys
from pathlib import Path

NATIONAL = {
    ("Female", "A_le18"): 37_821_600, ("Male", "A_le18"): 39_500_000,
    ("Female", "A_19_29"): 24_159_000, ("Male", "A_19_29"): 25_160_000,
    ("Female", "A_30_39"): 22_383_600, ("Male", "A_30_39"): 22_500_000,
    ("Female", "A_ge40"): 83_776_100, ("Male", "A_ge40"): 75_699_700,
}

# thousands of residents, rounded
STATE_POP = {
    "AL": 5024, "AK": 733, "AZ": 7152, "AR": 3012, "CA": 39538, "CO": 5774, "CT": 3606,
    "DE": 990, "DC": 690, "FL": 21538, "GA": 10712, "HI": 1455, "ID": 1839, "IL": 12813,
    "IN": 6786, "IA": 3190, "KS": 2938, "KY": 4506, "LA": 4658, "ME": 1362, "MD": 6177,
    "MA": 7030, "MI": 10077, "MN": 5706, "MS": 2961, "MO": 6154, "MT": 1084, "NE": 1962,
    "NV": 3105, "NH": 1378, "NJ": 9289, "NM": 2118, "NY": 20201, "NC": 10439, "ND": 779,
    "OH": 11799, "OK": 3959, "OR": 4237, "PA": 13003, "RI": 1097, "SC": 5118, "SD": 887,
    "TN": 6911, "TX": 29146, "UT": 3272, "VT": 643, "VA": 8631, "WA": 7705, "WV": 1794,
    "WI": 5894, "WY": 577,
}

GROUP_ORDER = [(g, a) for g in ("Female", "Male") for a in ("A_le18", "A_19_29", "A_30_39", "A_ge40")]


def state_counts(k: int, total: int) -> list[int]:
    nat_total = sum(NATIONAL.values())
    tilted = [NATIONAL[g] / nat_total * (1 + 0.12 * math.sin(0.7 * (k + 1) * (i + 1)))
              for i, g in enumerate(GROUP_ORDER)]
    s = sum(tilted)
    return [round(total * t / s) for t in tilted]


def main(out: Path) -> None:
    assert sum(NATIONAL.values()) == 331_000_000
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scope", "gender", "age_bin", "population"])
        for g in GROUP_ORDER:
            w.writerow(["US", g[0], g[1], NATIONAL[g]])
        for k, (code, thousands) in enumerate(sorted(STATE_POP.items())):
            for g, c in zip(GROUP_ORDER, state_counts(k, thousands * 1000)):
                w.writerow([code, g[0], g[1], c])


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "src/sadindex/data/census_2020_fixture.csv"
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else default)
