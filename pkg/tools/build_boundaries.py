"""Build src/sadindex/data/us_states_simplified.json from a us-atlas TopoJSON file.

us-atlas (ISC license) is derived from the Census Bureau cartographic boundary files.
Usage: python3 tools/build_boundaries.py path/to/counties-10m.json
Requires shapely (build-time only; not a package dependency).
"""

import json
import sys
from pathlib import Path

from shapely.geometry import Polygon

FIPS = {
    "01": "AL", "02": "AK", "04": "AZ", "05": "AR", "06": "CA", "08": "CO", "09": "CT", "10": "DE",
    "11": "DC", "12": "FL", "13": "GA", "15": "HI", "16": "ID", "17": "IL", "18": "IN", "19": "IA",
    "20": "KS", "21": "KY", "22": "LA", "23": "ME", "24": "MD", "25": "MA", "26": "MI", "27": "MN",
    "28": "MS", "29": "MO", "30": "MT", "31": "NE", "32": "NV", "33": "NH", "34": "NJ", "35": "NM",
    "36": "NY", "37": "NC", "38": "ND", "39": "OH", "40": "OK", "41": "OR", "42": "PA", "44": "RI",
    "45": "SC", "46": "SD", "47": "TN", "48": "TX", "49": "UT", "50": "VT", "51": "VA", "53": "WA",
    "54": "WV", "55": "WI", "56": "WY",
}
TOLERANCE = 0.03  # degrees
MIN_AREA = 0.02   # square degrees; drops tiny islands, always keeps the largest ring
# Alaska and Hawaii are moved into insets below the lower 48 so that a plain
# lon/lat projection stays readable: (scale, source anchor, target anchor).
INSETS = {"AK": (0.35, (-150.0, 58.0), (-117.0, 27.0)), "HI": (1.0, (-157.0, 20.5), (-104.0, 25.0))}


def decode_arcs(topo):
    sx, sy = topo["transform"]["scale"]
    tx, ty = topo["transform"]["translate"]
    arcs = []
    for arc in topo["arcs"]:
        x = y = 0
        pts = []
        for dx, dy in arc:
            x += dx
            y += dy
            pts.append((x * sx + tx, y * sy + ty))
        arcs.append(pts)
    return arcs


def ring(arcs, idxs):
    pts = []
    for i in idxs:
        seg = arcs[i] if i >= 0 else arcs[~i][::-1]
        pts.extend(seg if not pts else seg[1:])
    return pts


def main(src):
    topo = json.loads(Path(src).read_text())
    arcs = decode_arcs(topo)
    out = {}
    for geom in topo["objects"]["states"]["geometries"]:
        code = FIPS.get(geom["id"])
        if code is None:
            continue
        polys = geom["arcs"] if geom["type"] == "MultiPolygon" else [geom["arcs"]]
        rings = []
        for poly in polys:
            outer = ring(arcs, poly[0])
            if code == "AK" and min(p[0] for p in outer) > 0:
                continue  # Aleutians across the antimeridian
            shp = Polygon(outer).simplify(TOLERANCE, preserve_topology=True)
            if shp.is_empty:
                continue
            pts = shp.exterior.coords[:-1]
            if code in INSETS:
                k, (ax, ay), (bx, by) = INSETS[code]
                pts = [(bx + (x - ax) * k, by + (y - ay) * k) for x, y in pts]
            rings.append((shp.area, [[round(x, 2), round(y, 2)] for x, y in pts]))
        rings.sort(key=lambda r: -r[0])
        kept = [r for i, (a, r) in enumerate(rings) if (i == 0 or a >= MIN_AREA) and len(r) >= 3]
        out[code] = kept
    assert len(out) == 51, len(out)
    dest = Path(__file__).resolve().parents[1] / "src" / "sadindex" / "data" / "us_states_simplified.json"
    dest.write_text(json.dumps(dict(sorted(out.items())), separators=(",", ":")) + "\n")
    print(f"wrote {dest} ({dest.stat().st_size} bytes)")


if __name__ == "__main__":
    main(sys.argv[1])
