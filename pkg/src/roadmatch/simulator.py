"""Deterministic scenarios: maps, ground truth, noisy sensor logs, metrics.

Four scenario kinds are built in:

``straight``  one long road, GPS throughout.
``parallel``  two parallel roads; the vehicle is on road 1 and GPS carries a
              constant bias toward road 2.
``junction``  a symmetric Y fork; the branch taken is drawn from the seed.
``outage``    a winding road of ~1.75 km with GPS masked after the first
              frames.

Ground truth samples the route every ``speed`` meters starting half a step in,
and every route vertex lies on a multiple of ``speed``. Each step that crosses
a vertex is then an exact odometry step (chord at the mid-step heading), so
sensor synthesis inverts the motion model exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from roadmatch.matcher import MatchConfig, MatchResult, SensorFrame, match_log
from roadmatch.motion import (
    ElementaryMotion,
    StateEstimate,
    VehicleParams,
    elementary_to_wheel,
    wrap_angle,
)
from roadmatch.nmea import format_gga, format_gst, parse_nmea
from roadmatch.observation import GeoReference, gps_fix_from_nmea, map_to_latlon
from roadmatch.road_map import MapErrorModel, MapPoint, RoadMap, Segment, segment_heading

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

KINDS = ("straight", "outage", "parallel", "junction")

# (length m, heading deg) legs of the default winding road
WINDING_LEGS = (
    (200, 0), (150, 25), (180, -5), (160, -30), (200, 0),
    (150, 20), (170, 45), (160, 15), (180, -10), (200, -35),
)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    kind: str
    seed: int = 0
    speed: float = 10.0  # m per step
    dt: float = 1.0  # s per step
    length: float | None = None  # main road; None = kind default
    branch_length: float = 300.0
    separation: float = 10.0
    branch_angle_deg: float = 30.0  # angle between the two branches
    branch: str | None = None  # "left"/"right"; None = drawn from the seed
    legs: tuple = WINDING_LEGS
    width: float = 7.0
    track: float = 1.5
    odo_sigma_s: float = 0.02
    odo_sigma_theta: float = 0.01
    gps_sigma: float = 2.0
    gps_sigma_jitter: float = 0.0  # relative spread of per-fix sigma
    gps_bias: tuple = (0.0, 0.0)
    outages: tuple | None = None  # inclusive (start, end) frame windows
    initial_sigma_xy: float = 1.0
    initial_sigma_theta: float = 0.02
    origin: tuple = (49.0, 2.5)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        if not self.speed > 0 or not self.dt > 0:
            raise ScenarioError("speed and dt must be > 0")
        if self.branch not in (None, "left", "right"):
            raise ScenarioError("branch must be 'left' or 'right'")
        if self.width <= 0 or self.gps_sigma < 0:
            raise ScenarioError("invalid width or gps_sigma")

    @classmethod
    def default(cls, kind: str, **overrides) -> "Scenario":
        base = dict(kind=kind)
        if kind == "parallel":
            base["gps_bias"] = (0.0, 6.0)
        base.update(overrides)
        return cls(**base)

    @property
    def vehicle(self) -> VehicleParams:
        return VehicleParams(track=self.track, sigma_s=self.odo_sigma_s,
                             sigma_theta=self.odo_sigma_theta)


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a scenario from a parsed TOML document.

    Keys are the :class:`Scenario` field names; a ``[matcher]`` table, if
    present, is ignored here (the command line applies it).
    """
    doc = {k: v for k, v in doc.items() if k != "matcher"}
    if "kind" not in doc:
        raise ScenarioError("scenario needs a 'kind'")
    known = {f.name for f in fields(Scenario)}
    unknown = set(doc) - known
    if unknown:
        raise ScenarioError(f"unknown scenario key(s): {', '.join(sorted(unknown))}")
    for key in ("gps_bias", "origin"):
        if key in doc:
            doc[key] = tuple(float(v) for v in doc[key])
    if "legs" in doc:
        doc["legs"] = tuple((float(a), float(b)) for a, b in doc["legs"])
    if "outages" in doc:
        doc["outages"] = tuple((int(a), int(b)) for a, b in doc["outages"])
    return Scenario.default(**doc)


def load_scenario(path) -> tuple[Scenario, dict]:
    """Scenario plus the raw ``[matcher]`` override table from a TOML file."""
    with open(path, "rb") as fp:
        doc = tomllib.load(fp)
    return scenario_from_dict(doc), dict(doc.get("matcher", {}))


@dataclass
class GroundTruth:
    times: np.ndarray
    poses: np.ndarray  # (N, 3)
    segment_ids: list
    fork_step: int | None = None

    def __len__(self):
        return len(self.segment_ids)


@dataclass
class SimRun:
    scenario: Scenario
    road_map: RoadMap
    truth: GroundTruth
    frames: list[SensorFrame]
    records: list  # (t, d_left, d_right, sentences) for the sensor log
    initial: StateEstimate
    outages: tuple


# -- geometry ----------------------------------------------------------------

def _check_multiple(length: float, speed: float, what: str) -> None:
    n = length / speed
    if n < 1 or abs(n - round(n)) > 1e-9:
        raise ScenarioError(f"{what} ({length} m) must be a positive multiple of the step ({speed} m)")


def _polyline_segments(points: Sequence[tuple[float, float]], first_id: int, width: float) -> list[Segment]:
    return [Segment(first_id + k, MapPoint(*points[k]), MapPoint(*points[k + 1]), width)
            for k in range(len(points) - 1)]


def _build_geometry(s: Scenario) -> tuple[list[Segment], list[int]]:
    if s.kind == "straight":
        L = s.length or 1000.0
        _check_multiple(L, s.speed, "road length")
        return [Segment(1, MapPoint(0.0, 0.0), MapPoint(L, 0.0), s.width)], [1]
    if s.kind == "parallel":
        L = s.length or 500.0
        _check_multiple(L, s.speed, "road length")
        if not s.separation > 0:
            raise ScenarioError("separation must be > 0")
        return [Segment(1, MapPoint(0.0, 0.0), MapPoint(L, 0.0), s.width),
                Segment(2, MapPoint(0.0, s.separation), MapPoint(L, s.separation), s.width)], [1]
    if s.kind == "junction":
        T = s.length or 300.0
        _check_multiple(T, s.speed, "trunk length")
        _check_multiple(s.branch_length, s.speed, "branch length")
        if not 0 < s.branch_angle_deg < 180:
            raise ScenarioError("branch angle must be in (0, 180) degrees")
        half = math.radians(s.branch_angle_deg) / 2
        Lb = s.branch_length
        segs = [
            Segment(1, MapPoint(-T, 0.0), MapPoint(0.0, 0.0), s.width),
            Segment(2, MapPoint(0.0, 0.0), MapPoint(Lb * math.cos(half), Lb * math.sin(half)), s.width),
            Segment(3, MapPoint(0.0, 0.0), MapPoint(Lb * math.cos(half), -Lb * math.sin(half)), s.width),
        ]
        return segs, [1, 2 if s.branch == "left" else 3]
    # winding road
    pts = [(0.0, 0.0)]
    prev_heading = None
    for k, (length, heading_deg) in enumerate(s.legs):
        _check_multiple(length, s.speed, f"leg {k}")
        if prev_heading is not None and abs(wrap_angle(math.radians(heading_deg - prev_heading))) > math.radians(60):
            raise ScenarioError(f"turn into leg {k} exceeds 60 degrees")
        prev_heading = heading_deg
        h = math.radians(heading_deg)
        x, y = pts[-1]
        pts.append((x + length * math.cos(h), y + length * math.sin(h)))
    segs = _polyline_segments(pts, 1, s.width)
    return segs, [seg.id for seg in segs]


def generate_scenario(s: Scenario) -> tuple[RoadMap, GroundTruth]:
    if s.kind == "junction" and s.branch is None:
        branch = "left" if np.random.default_rng([s.seed, 1]).integers(2) == 0 else "right"
        s = replace(s, branch=branch)
    segs, route = _build_geometry(s)
    road_map = RoadMap.from_segments(segs, map_errors=MapErrorModel(), origin=tuple(s.origin))
    for a, b in zip(route, route[1:]):
        if not road_map.connected(a, b):
            raise ScenarioError(f"route segments {a} and {b} are not connected")

    route_segs = [road_map[i] for i in route]
    starts = np.cumsum([0.0] + [seg.length for seg in route_segs])
    total = starts[-1]
    n = int(math.floor((total - s.speed / 2) / s.speed)) + 1
    poses = np.empty((n, 3))
    ids = []
    for k in range(n):
        arc = s.speed / 2 + k * s.speed
        j = min(int(np.searchsorted(starts, arc, side="right")) - 1, len(route_segs) - 1)
        seg = route_segs[j]
        t = (arc - starts[j]) / seg.length
        poses[k] = (seg.a.x + t * (seg.b.x - seg.a.x), seg.a.y + t * (seg.b.y - seg.a.y),
                    segment_heading(seg))
        ids.append(seg.id)
    fork = ids.index(route[1]) if s.kind == "junction" else None
    truth = GroundTruth(np.arange(n) * s.dt, poses, ids, fork)
    return road_map, truth


# -- sensors -----------------------------------------------------------------

def exact_motion(p0: np.ndarray, p1: np.ndarray) -> ElementaryMotion:
    """Invert one odometry step between two consecutive true poses."""
    dth = wrap_angle(p1[2] - p0[2])
    a = p0[2] + dth / 2
    ds = (p1[0] - p0[0]) * math.cos(a) + (p1[1] - p0[1]) * math.sin(a)
    return ElementaryMotion(ds, dth)


def default_outages(s: Scenario, truth: GroundTruth) -> tuple:
    if s.outages is not None:
        return tuple(tuple(w) for w in s.outages)
    last = len(truth) - 1
    if s.kind == "outage":
        return ((min(10, last), last),)
    return ()


def in_outage(k: int, outages) -> bool:
    return any(a <= k <= b for a, b in outages)


def simulate_sensors(truth: GroundTruth, s: Scenario,
                     rng: np.random.Generator | None = None) -> tuple[list, StateEstimate, tuple]:
    """Noisy sensor records and a perturbed initial estimate.

    Returns ``(records, initial, outages)`` where each record is
    ``(t, d_left, d_right, sentences)``. Frame 0 has no motion.
    """
    rng = rng if rng is not None else np.random.default_rng(s.seed)
    params = s.vehicle
    ref = GeoReference.at(*s.origin)
    outages = default_outages(s, truth)

    p0 = np.diag([s.initial_sigma_xy**2, s.initial_sigma_xy**2, s.initial_sigma_theta**2])
    init_mean = truth.poses[0] + rng.standard_normal(3) * np.sqrt(np.diag(p0))
    initial = StateEstimate(init_mean, p0)

    bias = np.asarray(s.gps_bias, dtype=float)
    records = []
    for k in range(len(truth)):
        if k == 0:
            dl = dr = 0.0
        else:
            m = exact_motion(truth.poses[k - 1], truth.poses[k])
            d = abs(m.delta_s)
            noise = rng.standard_normal(2)
            noisy = ElementaryMotion(m.delta_s + s.odo_sigma_s * d * noise[0],
                                     m.delta_theta + s.odo_sigma_theta * d * noise[1])
            wheels = elementary_to_wheel(noisy, params)
            dl, dr = wheels.d_left, wheels.d_right
        t = float(truth.times[k])
        sentences: tuple = ()
        if not in_outage(k, outages):
            sigma = s.gps_sigma
            if s.gps_sigma_jitter > 0:
                sigma *= 1.0 + s.gps_sigma_jitter * rng.uniform(-1.0, 1.0)
            pos = truth.poses[k, :2] + bias + sigma * rng.standard_normal(2)
            lat, lon = map_to_latlon(MapPoint(*pos), ref)
            sentences = (
                format_gga(t, lat, lon),
                format_gst(t, sigma, sigma, sigma, 0.0, sigma, sigma, 1.5 * sigma),
            )
        records.append((t, dl, dr, sentences))
    return records, initial, outages


def frames_from_records(records, ref: GeoReference) -> list[SensorFrame]:
    from roadmatch.motion import OdometryInput

    frames = []
    for t, dl, dr, sentences in records:
        fix = None
        if sentences:
            parsed = {p.type: p for p in map(parse_nmea, sentences)}
            fix = gps_fix_from_nmea(t, parsed["GGA"], parsed.get("GST"), ref)
        frames.append(SensorFrame(t, OdometryInput(dl, dr), fix))
    return frames


def simulate(s: Scenario) -> SimRun:
    road_map, truth = generate_scenario(s)
    records, initial, outages = simulate_sensors(truth, s)
    frames = frames_from_records(records, GeoReference.at(*s.origin))
    return SimRun(s, road_map, truth, frames, records, initial, outages)


# -- evaluation --------------------------------------------------------------

@dataclass
class Metrics:
    correct_rate: float
    rmse: float
    final_error: float
    disambiguation: list  # (onset step, steps to disambiguation or None)
    nees: np.ndarray = field(repr=False)

    @property
    def disambiguation_steps(self) -> list:
        return [d for _, d in self.disambiguation]

    def as_dict(self) -> dict:
        return {
            "correct_rate": self.correct_rate,
            "rmse": self.rmse,
            "final_error": self.final_error,
            "disambiguation": [{"onset": o, "steps": d} for o, d in self.disambiguation],
            "mean_nees": float(np.nanmean(self.nees)) if np.isfinite(self.nees).any() else None,
            "steps": int(len(self.nees)),
        }


def nees(error: np.ndarray, cov: np.ndarray) -> float:
    e = np.array(error, dtype=float)
    e[2] = wrap_angle(e[2])
    try:
        return float(e @ np.linalg.solve(cov, e))
    except np.linalg.LinAlgError:  # exact (zero-covariance) estimate
        return math.nan


def disambiguation_events(n_hypotheses: Sequence[int], correct_weight: Sequence[float],
                          threshold: float = 0.95) -> list:
    """Ambiguity events as (onset, steps until the true segment's weight
    exceeds ``threshold``). An event opens on the first step of each run of
    steps carrying two or more hypotheses."""
    events = []
    n = len(n_hypotheses)
    for k in range(n):
        if n_hypotheses[k] >= 2 and (k == 0 or n_hypotheses[k - 1] < 2):
            done = next((j for j in range(k, n) if correct_weight[j] > threshold), None)
            events.append((k, None if done is None else done - k))
    return events


def evaluate_arrays(best_ids, best_means, best_covs, n_hyps, correct_weights,
                    truth_ids, truth_poses) -> Metrics:
    if not (len(best_ids) == len(truth_ids) == len(truth_poses)):
        raise ValueError(f"results ({len(best_ids)}) and truth ({len(truth_ids)}) differ in length")
    n = len(truth_ids)
    if n == 0:
        raise ValueError("nothing to evaluate")
    correct = sum(1 for a, b in zip(best_ids, truth_ids) if a == b)
    err = np.asarray(best_means, dtype=float) - np.asarray(truth_poses, dtype=float)
    pos_err = np.hypot(err[:, 0], err[:, 1])
    nees_seq = np.array([nees(e, c) for e, c in zip(err, best_covs)])
    return Metrics(
        correct_rate=correct / n,
        rmse=float(np.sqrt(np.mean(pos_err**2))),
        final_error=float(pos_err[-1]),
        disambiguation=disambiguation_events(n_hyps, correct_weights),
        nees=nees_seq,
    )


def evaluate(results: Sequence[MatchResult], truth: GroundTruth) -> Metrics:
    if len(results) != len(truth):
        raise ValueError(f"results ({len(results)}) and truth ({len(truth)}) differ in length")
    return evaluate_arrays(
        [r.best_segment for r in results],
        [r.best.mean for r in results],
        [r.best.cov for r in results],
        [len(r.hypotheses) for r in results],
        [r.weights.get(sid, 0.0) for r, sid in zip(results, truth.segment_ids)],
        truth.segment_ids,
        truth.poses,
    )


def run_scenario(s: Scenario, config: MatchConfig | None = None):
    """Simulate, match and evaluate one scenario."""
    sim = simulate(s)
    if config is None:
        config = MatchConfig(vehicle=s.vehicle)
    results = match_log(sim.road_map, sim.initial, sim.frames, config)
    return sim, results, evaluate(results, sim.truth)
