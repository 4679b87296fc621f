"""Road network model: segments, candidate selection, projection and the
cartographic error ellipse.

Map files are JSON objects::

    {
      "format": "roadmatch-map/1",
      "origin": {"lat": 49.0, "lon": 2.5},            # optional
      "errors": {"absolute_error": 10.0,                # optional
                 "relative_error": 1.0,
                 "containment_sigma": 2.0},
      "segments": [
        {"id": 1, "ax": 0.0, "ay": 0.0, "bx": 100.0, "by": 0.0, "width": 7.0},
        ...
      ]
    }

Coordinates are meters in a local east/north frame. Connectivity is never
stored; two segments are connected when they share an endpoint (within
``ENDPOINT_TOLERANCE``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Sequence

import numpy as np
import shapely
from shapely import STRtree

ENDPOINT_TOLERANCE = 1e-6
MAP_FORMAT = "roadmatch-map/1"


class MapError(ValueError):
    """Invalid road map content."""


class MapFormatError(MapError):
    def __init__(self, message: str, locus: str | None = None):
        self.locus = locus
        super().__init__(f"{locus}: {message}" if locus else message)


class DanglingReference(MapError):
    pass


class DegenerateSegment(MapError):
    pass


@dataclass(frozen=True)
class MapPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite map point ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class MapErrorModel:
    absolute_error: float = 10.0
    relative_error: float = 1.0
    containment_sigma: float = 2.0

    def __post_init__(self):
        for name in ("absolute_error", "relative_error", "containment_sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class Segment:
    id: int
    a: MapPoint
    b: MapPoint
    width: float
    connected: frozenset = field(default_factory=frozenset, compare=False)

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"segment {self.id}: width must be > 0")
        if self.length <= 0:
            raise DegenerateSegment(f"segment {self.id} has zero length")
        if self.id in self.connected:
            raise ValueError(f"segment {self.id} lists itself as connected")

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)

    def reversed(self) -> "Segment":
        return replace(self, a=self.b, b=self.a)


@dataclass(frozen=True)
class Projection:
    point: MapPoint
    abscissa: float
    distance: float
    clamped: bool


def segment_heading(seg: Segment) -> float:
    """Direction of a->b, in (-pi, pi]."""
    h = math.atan2(seg.b.y - seg.a.y, seg.b.x - seg.a.x)
    return math.pi if h == -math.pi else h


def project_onto_segment(p: MapPoint, seg: Segment) -> Projection:
    """Orthogonal projection, falling back to the nearer endpoint when the
    foot of the perpendicular is off the segment."""
    dx, dy = seg.b.x - seg.a.x, seg.b.y - seg.a.y
    length_sq = dx * dx + dy * dy
    t = ((p.x - seg.a.x) * dx + (p.y - seg.a.y) * dy) / length_sq
    clamped = t < 0.0 or t > 1.0
    t = min(max(t, 0.0), 1.0)
    if t == 0.0:
        foot = seg.a
    elif t == 1.0:
        foot = seg.b
    else:
        foot = MapPoint(seg.a.x + t * dx, seg.a.y + t * dy)
    return Projection(
        point=foot,
        abscissa=t * math.sqrt(length_sq),
        distance=math.hypot(p.x - foot.x, p.y - foot.y),
        clamped=clamped,
    )


def carto_covariance(seg: Segment, errs: MapErrorModel) -> np.ndarray:
    """3x3 covariance of a cartographic observation of ``seg``.

    The position block is an ellipse aligned with the segment whose
    ``containment_sigma`` contour encloses the segment grown by the map
    errors; the heading variance comes from a lateral endpoint error of
    ``relative_error``.
    """
    length = seg.length
    if length <= 0:
        raise DegenerateSegment(f"segment {seg.id} has zero length")
    s_along = (length / 2 + errs.absolute_error) / errs.containment_sigma
    s_across = (seg.width / 2 + errs.relative_error) / errs.containment_sigma
    phi = segment_heading(seg)
    c, s = math.cos(phi), math.sin(phi)
    rot = np.array([[c, -s], [s, c]])
    block = rot @ np.diag([s_along**2, s_across**2]) @ rot.T
    cov = np.zeros((3, 3))
    cov[:2, :2] = 0.5 * (block + block.T)
    cov[2, 2] = math.atan2(2 * errs.relative_error, length) ** 2
    return cov


def _point_segment_distances(px: float, py: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    t = ((px - a[:, 0]) * d[:, 0] + (py - a[:, 1]) * d[:, 1]) / np.einsum("ij,ij->i", d, d)
    t = np.clip(t, 0.0, 1.0)
    fx = a[:, 0] + t * d[:, 0]
    fy = a[:, 1] + t * d[:, 1]
    return np.hypot(px - fx, py - fy)


class RoadMap:
    """Immutable collection of segments with a bounding-box index.

    The index is a pre-filter only; candidate queries are refined with exact
    point-to-segment distances.
    """

    def __init__(
        self,
        segments: Iterable[Segment],
        map_errors: MapErrorModel | None = None,
        origin: tuple[float, float] | None = None,
    ):
        segs = list(segments)
        self._by_id: dict[int, Segment] = {}
        for s in segs:
            if s.id in self._by_id:
                raise MapError(f"duplicate segment id {s.id}")
            self._by_id[s.id] = s
        for s in segs:
            for other in s.connected:
                if other not in self._by_id:
                    raise DanglingReference(f"segment {s.id} references unknown segment {other}")
                if s.id not in self._by_id[other].connected:
                    raise MapError(f"connectivity between {s.id} and {other} is not symmetric")
        self.map_errors = map_errors or MapErrorModel()
        self.origin = origin
        self._ids = [s.id for s in segs]
        self._a = np.array([[s.a.x, s.a.y] for s in segs], dtype=float).reshape(-1, 2)
        self._b = np.array([[s.b.x, s.b.y] for s in segs], dtype=float).reshape(-1, 2)
        if segs:
            lo = np.minimum(self._a, self._b)
            hi = np.maximum(self._a, self._b)
            self.index = STRtree(shapely.box(lo[:, 0], lo[:, 1], hi[:, 0], hi[:, 1]))
        else:
            self.index = None

    @classmethod
    def from_segments(cls, segments: Iterable[Segment], **kwargs) -> "RoadMap":
        """Build a map deriving connectivity from shared endpoints."""
        segs = [replace(s, connected=frozenset()) for s in segments]
        links = _shared_endpoint_links(segs)
        segs = [replace(s, connected=frozenset(links.get(s.id, ()))) for s in segs]
        return cls(segs, **kwargs)

    @property
    def segments(self) -> list[Segment]:
        return list(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, seg_id) -> bool:
        return seg_id in self._by_id

    def __getitem__(self, seg_id) -> Segment:
        return self._by_id[seg_id]

    def connected(self, i, j) -> bool:
        return i in self._by_id and j in self._by_id[i].connected

    def query_box(self, center: MapPoint, radius: float) -> np.ndarray:
        """Positional indices whose bounding box meets the query square."""
        if self.index is None:
            return np.empty(0, dtype=int)
        box = shapely.box(center.x - radius, center.y - radius, center.x + radius, center.y + radius)
        return np.sort(self.index.query(box))


def _shared_endpoint_links(segs: Sequence[Segment]) -> dict[int, set]:
    buckets: dict[tuple[int, int], list[tuple[int, MapPoint]]] = {}
    for s in segs:
        for p in (s.a, s.b):
            key = (math.floor(p.x / ENDPOINT_TOLERANCE), math.floor(p.y / ENDPOINT_TOLERANCE))
            buckets.setdefault(key, []).append((s.id, p))
    links: dict[int, set] = {}
    for (kx, ky), members in buckets.items():
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for sid, p in members:
                    for oid, q in buckets.get((kx + dx, ky + dy), ()):
                        if oid == sid:
                            continue
                        if abs(p.x - q.x) <= ENDPOINT_TOLERANCE and abs(p.y - q.y) <= ENDPOINT_TOLERANCE:
                            links.setdefault(sid, set()).add(oid)
                            links.setdefault(oid, set()).add(sid)
    return links


def select_candidates(road_map: RoadMap, center: MapPoint, radius: float = 30.0) -> list[Segment]:
    """Segments within ``radius`` of ``center``, nearest first (ties by id)."""
    if not radius > 0:
        raise ValueError("radius must be > 0")
    hits = road_map.query_box(center, radius)
    if hits.size == 0:
        return []
    dist = _point_segment_distances(center.x, center.y, road_map._a[hits], road_map._b[hits])
    keep = [(float(d), road_map._ids[k]) for k, d in zip(hits, dist) if d <= radius]
    keep.sort()
    return [road_map[sid] for _, sid in keep]


def brute_force_candidates(road_map: RoadMap, center: MapPoint, radius: float) -> list[Segment]:
    """Exhaustive reference scan; used to check the indexed query."""
    found = []
    for s in road_map.segments:
        d = project_onto_segment(center, s).distance
        if d <= radius:
            found.append((d, s.id))
    found.sort()
    return [road_map[sid] for _, sid in found]


# -- serialization -----------------------------------------------------------

_SEGMENT_KEYS = ("id", "ax", "ay", "bx", "by", "width")


def map_to_dict(road_map: RoadMap) -> dict:
    doc: dict = {"format": MAP_FORMAT}
    if road_map.origin is not None:
        doc["origin"] = {"lat": road_map.origin[0], "lon": road_map.origin[1]}
    e = road_map.map_errors
    doc["errors"] = {
        "absolute_error": e.absolute_error,
        "relative_error": e.relative_error,
        "containment_sigma": e.containment_sigma,
    }
    doc["segments"] = [
        {"id": s.id, "ax": s.a.x, "ay": s.a.y, "bx": s.b.x, "by": s.b.y, "width": s.width}
        for s in road_map.segments
    ]
    return doc


def save_map(road_map: RoadMap, fp: IO[str]) -> None:
    json.dump(map_to_dict(road_map), fp, indent=1)
    fp.write("\n")


def load_map(source: IO[str] | IO[bytes] | str | bytes) -> RoadMap:
    """Parse a JSON map document from a stream or a string."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise MapFormatError(exc.msg, locus=f"line {exc.lineno} column {exc.colno}") from None
    return map_from_dict(doc)


def map_from_dict(doc) -> RoadMap:
    if not isinstance(doc, dict):
        raise MapFormatError("top level must be an object")
    fmt = doc.get("format", MAP_FORMAT)
    if fmt != MAP_FORMAT:
        raise MapFormatError(f"unsupported format {fmt!r}", locus="format")
    origin = None
    if doc.get("origin") is not None:
        try:
            origin = (float(doc["origin"]["lat"]), float(doc["origin"]["lon"]))
        except (KeyError, TypeError, ValueError):
            raise MapFormatError("origin needs numeric lat and lon", locus="origin") from None
    errs = MapErrorModel()
    if doc.get("errors") is not None:
        try:
            errs = MapErrorModel(**{k: float(v) for k, v in doc["errors"].items()})
        except (TypeError, ValueError) as exc:
            raise MapFormatError(str(exc), locus="errors") from None
    raw = doc.get("segments", [])
    if not isinstance(raw, list):
        raise MapFormatError("segments must be a list", locus="segments")
    segs = []
    for k, rec in enumerate(raw):
        locus = f"segments[{k}]"
        if not isinstance(rec, dict):
            raise MapFormatError("record must be an object", locus=locus)
        missing = [key for key in _SEGMENT_KEYS if key not in rec]
        if missing:
            raise MapFormatError(f"missing field(s) {', '.join(missing)}", locus=locus)
        sid = rec["id"]
        if isinstance(sid, bool) or not isinstance(sid, int):
            raise MapFormatError("id must be an integer", locus=locus)
        try:
            vals = [float(rec[key]) for key in _SEGMENT_KEYS[1:]]
            seg = Segment(sid, MapPoint(vals[0], vals[1]), MapPoint(vals[2], vals[3]), vals[4])
        except DegenerateSegment as exc:
            raise DegenerateSegment(f"{locus}: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise MapFormatError(str(exc), locus=locus) from None
        segs.append(seg)
    try:
        return RoadMap.from_segments(segs, map_errors=errs, origin=origin)
    except MapError as exc:
        raise MapFormatError(str(exc), locus="segments") from None
