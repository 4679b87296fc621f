"""Writers and readers for matcher outputs: per-step CSV, GeoJSON, truth CSV."""

from __future__ import annotations

import csv
import json
from typing import IO, Sequence

import numpy as np

from roadmatch.matcher import MatchResult
from roadmatch.observation import GeoReference, map_to_latlon
from roadmatch.road_map import MapPoint, RoadMap

RESULT_COLUMNS = [
    "step", "time", "best_segment", "x", "y", "theta", "weight_best", "n_hypotheses",
    "gps_used", "hypotheses", "candidate_count", "off_road",
    "pxx", "pxy", "pxt", "pyy", "pyt", "ptt",
]
TRUTH_COLUMNS = ["step", "time", "x", "y", "theta", "segment_id"]


def format_hypotheses(hyps) -> str:
    """``id:weight`` pairs joined by ``|``; off-road hypotheses use ``-``."""
    return "|".join(f"{'-' if sid is None else sid}:{w!r}" for sid, w, *_ in hyps)


def parse_hypotheses(text: str) -> list[tuple]:
    out = []
    for item in filter(None, text.split("|")):
        sid, w = item.split(":")
        out.append((None if sid == "-" else int(sid), float(w)))
    return out


def write_results_csv(fp: IO[str], results: Sequence[MatchResult]) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in results:
        m, P = r.best.mean, r.best.cov
        w.writerow([
            r.step, repr(r.time), "" if r.best_segment is None else r.best_segment,
            repr(float(m[0])), repr(float(m[1])), repr(float(m[2])), repr(r.weight_best),
            len(r.hypotheses), int(r.gps_used), format_hypotheses(r.hypotheses),
            r.candidate_count, int(r.off_road),
            *(repr(float(v)) for v in (P[0, 0], P[0, 1], P[0, 2], P[1, 1], P[1, 2], P[2, 2])),
        ])


def read_results_csv(fp: IO[str]) -> list[dict]:
    rows = []
    reader = csv.DictReader(fp)
    missing = set(RESULT_COLUMNS) - set(reader.fieldnames or [])
    if missing:
        raise ValueError(f"results file lacks column(s): {', '.join(sorted(missing))}")
    for k, row in enumerate(reader, start=2):
        try:
            xx, xy, xt, yy, yt, tt = (float(row[c]) for c in ("pxx", "pxy", "pxt", "pyy", "pyt", "ptt"))
            rows.append({
                "step": int(row["step"]),
                "time": float(row["time"]),
                "best_segment": int(row["best_segment"]) if row["best_segment"] else None,
                "mean": np.array([float(row["x"]), float(row["y"]), float(row["theta"])]),
                "cov": np.array([[xx, xy, xt], [xy, yy, yt], [xt, yt, tt]]),
                "n_hypotheses": int(row["n_hypotheses"]),
                "gps_used": bool(int(row["gps_used"])),
                "hypotheses": parse_hypotheses(row["hypotheses"]),
            })
        except (TypeError, ValueError) as exc:
            raise ValueError(f"line {k}: {exc}") from None
    return rows


def write_truth_csv(fp: IO[str], truth) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(TRUTH_COLUMNS)
    for k, (t, pose, sid) in enumerate(zip(truth.times, truth.poses, truth.segment_ids)):
        w.writerow([k, repr(float(t)), *(repr(float(v)) for v in pose), sid])


def read_truth_csv(fp: IO[str]):
    from roadmatch.simulator import GroundTruth

    reader = csv.DictReader(fp)
    times, poses, ids = [], [], []
    for k, row in enumerate(reader, start=2):
        try:
            if int(row["step"]) != k - 2:
                raise ValueError(f"step {row['step']} out of order")
            times.append(float(row["time"]))
            poses.append([float(row["x"]), float(row["y"]), float(row["theta"])])
            ids.append(int(row["segment_id"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"line {k}: bad truth record ({exc})") from None
    return GroundTruth(np.array(times), np.array(poses).reshape(-1, 3), ids)


def _coords(points, ref: GeoReference | None) -> list:
    if ref is None:
        return [[float(x), float(y)] for x, y in points]
    out = []
    for x, y in points:
        lat, lon = map_to_latlon(MapPoint(float(x), float(y)), ref)
        out.append([lon, lat])
    return out


def map_to_geojson(road_map: RoadMap, ref: GeoReference | None = None) -> dict:
    """One LineString per segment. Coordinates are lon/lat when ``ref`` is
    given, local meters otherwise."""
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {"type": "LineString",
                             "coordinates": _coords([(s.a.x, s.a.y), (s.b.x, s.b.y)], ref)},
                "properties": {"id": s.id, "width": s.width},
            }
            for s in road_map.segments
        ],
    }


def track_to_geojson(results: Sequence[MatchResult], ref: GeoReference | None = None) -> dict:
    """Matched track as a LineString plus one Point per step carrying the
    hypothesis weights."""
    pts = [(r.best.mean[0], r.best.mean[1]) for r in results]
    features = [{
        "type": "Feature",
        "geometry": {"type": "LineString", "coordinates": _coords(pts, ref)},
        "properties": {"kind": "track", "steps": len(results)},
    }]
    for r, c in zip(results, _coords(pts, ref)):
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": c},
            "properties": {
                "kind": "step",
                "step": r.step,
                "time": r.time,
                "best_segment": r.best_segment,
                "gps_used": r.gps_used,
                "weights": {("-" if sid is None else str(sid)): w for sid, w, _ in r.hypotheses},
            },
        })
    return {"type": "FeatureCollection", "features": features}


def dump_json(obj, fp: IO[str]) -> None:
    json.dump(obj, fp, indent=1)
    fp.write("\n")
