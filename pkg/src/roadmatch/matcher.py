"""One road-matching cycle per sensor frame.

Cycle: odometry -> predicted (collapsed) pose -> candidate segments around it
-> one cartographic observation per candidate -> mode transition -> SKF step
(with GPS when the frame has a fix) -> prune -> result record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from roadmatch.motion import (
    OdometryInput,
    StateEstimate,
    VehicleParams,
    predict,
    wheel_to_elementary,
)
from roadmatch.observation import GpsFix, build_carto_observation, build_gps_observation
from roadmatch.road_map import MapErrorModel, MapPoint, RoadMap, select_candidates
from roadmatch.skf import (
    Hypothesis,
    HypothesisSet,
    SkfConfig,
    best_hypothesis,
    collapse,
    kf_update,
    mode_transition,
    normalize_and_prune,
    skf_step,
)


class NonMonotonicTime(ValueError):
    """Frame rejected: its time does not follow the previous frame."""


@dataclass(frozen=True)
class SensorFrame:
    time: float
    odometry: OdometryInput
    gps: GpsFix | None = None


@dataclass(frozen=True)
class MatchConfig:
    radius: float = 30.0
    skf: SkfConfig = field(default_factory=SkfConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    map_errors: MapErrorModel | None = None  # None: use the map's own

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be > 0")


@dataclass(frozen=True)
class MatchResult:
    step: int
    time: float
    best_segment: int | None
    best: StateEstimate
    weight_best: float
    hypotheses: tuple  # (segment_id, weight, mean) per hypothesis
    gps_used: bool
    candidate_count: int
    candidates: tuple = ()
    off_road: bool = False
    fallback: bool = False

    @property
    def weights(self) -> dict:
        return {sid: w for sid, w, _ in self.hypotheses}


class Matcher:
    """Road-matching state for one vehicle track.

    The road map is shared read-only; one ``Matcher`` must not be stepped
    from several threads at once.
    """

    def __init__(self, road_map: RoadMap, initial: StateEstimate, config: MatchConfig | None = None):
        self.map = road_map
        self.config = config or MatchConfig()
        self.errors = self.config.map_errors or road_map.map_errors
        self.step_count = 0
        self.last_time = -math.inf
        cands = select_candidates(road_map, MapPoint(initial.mean[0], initial.mean[1]),
                                  self.config.radius)
        if cands:
            n = len(cands)
            self.hypotheses = HypothesisSet(
                [Hypothesis(s.id, initial.copy(), 1.0 / n) for s in cands])
            self.off_road = False
        else:
            self.hypotheses = HypothesisSet([Hypothesis(None, initial.copy(), 1.0)])
            self.off_road = True

    def step(self, frame: SensorFrame) -> MatchResult:
        if not frame.time > self.last_time:
            raise NonMonotonicTime(f"frame time {frame.time} does not follow {self.last_time}")
        cfg = self.config
        motion = wheel_to_elementary(frame.odometry, cfg.vehicle)
        predicted = predict(collapse(self.hypotheses.weights, [h.estimate for h in self.hypotheses]),
                            motion, cfg.vehicle)
        center = MapPoint(predicted.mean[0], predicted.mean[1])
        cands = select_candidates(self.map, center, cfg.radius)
        gps = build_gps_observation(frame.gps) if frame.gps is not None else None

        if cands:
            observations = [(s, build_carto_observation(predicted.mean, s, self.errors)) for s in cands]
            B = mode_transition(self.hypotheses.ids, [s.id for s in cands], self.map, cfg.skf)
            stepped = skf_step(self.hypotheses, motion, observations, gps, B, cfg.skf, cfg.vehicle)
            self.hypotheses = normalize_and_prune(stepped, cfg.skf)
            self.off_road = False
        else:
            # dead reckoning off the network, GPS still used if present
            est = predicted
            if gps is not None:
                est, _ = kf_update(est, *gps)
            self.hypotheses = HypothesisSet([Hypothesis(None, est, 1.0)])
            self.off_road = True

        self.last_time = frame.time
        result = self._result(frame.time, gps is not None, [s.id for s in cands])
        self.step_count += 1
        return result

    def _result(self, time: float, gps_used: bool, cand_ids: list) -> MatchResult:
        sid, est, w = best_hypothesis(self.hypotheses)
        hyps = tuple((h.segment_id, h.weight, tuple(h.estimate.mean.tolist())) for h in self.hypotheses)
        return MatchResult(
            step=self.step_count,
            time=time,
            best_segment=sid,
            best=est.copy(),
            weight_best=w,
            hypotheses=hyps,
            gps_used=gps_used,
            candidate_count=len(cand_ids),
            candidates=tuple(cand_ids),
            off_road=self.off_road,
            fallback=self.hypotheses.fallback,
        )

    def run(self, frames: Iterable[SensorFrame]) -> Iterator[MatchResult]:
        for frame in frames:
            yield self.step(frame)


def match_log(road_map: RoadMap, initial: StateEstimate, frames: Iterable[SensorFrame],
              config: MatchConfig | None = None) -> list[MatchResult]:
    return list(Matcher(road_map, initial, config).run(frames))
