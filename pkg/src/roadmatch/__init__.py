"""Multi-hypothesis road matching with a switching Kalman filter.

The engine fuses rear-wheel odometry, GPS fixes whose covariance arrives with
each fix (NMEA GST), and cartographic pseudo-observations built from a road
map. One Gaussian pose hypothesis is kept per candidate road segment and each
carries a posterior probability.
"""

from roadmatch.road_map import (
    MapErrorModel,
    MapPoint,
    Projection,
    RoadMap,
    Segment,
    carto_covariance,
    load_map,
    project_onto_segment,
    save_map,
    segment_heading,
    select_candidates,
)
from roadmatch.motion import (
    ElementaryMotion,
    OdometryInput,
    Pose,
    StateEstimate,
    VehicleParams,
    predict,
    wheel_to_elementary,
)
from roadmatch.observation import (
    CartoObservation,
    GeoReference,
    GpsFix,
    build_carto_observation,
    build_gps_observation,
    gps_covariance,
    latlon_to_map,
    map_to_latlon,
)
from roadmatch.skf import (
    Hypothesis,
    HypothesisSet,
    ModeTransition,
    SkfConfig,
    best_hypothesis,
    kf_update,
    mode_transition,
    normalize_and_prune,
    skf_step,
)
from roadmatch.matcher import MatchConfig, Matcher, MatchResult, SensorFrame

__version__ = "0.1.0"

__all__ = [
    "CartoObservation",
    "ElementaryMotion",
    "GeoReference",
    "GpsFix",
    "Hypothesis",
    "HypothesisSet",
    "MapErrorModel",
    "MapPoint",
    "MatchConfig",
    "MatchResult",
    "Matcher",
    "ModeTransition",
    "OdometryInput",
    "Pose",
    "Projection",
    "RoadMap",
    "Segment",
    "SensorFrame",
    "SkfConfig",
    "StateEstimate",
    "VehicleParams",
    "best_hypothesis",
    "build_carto_observation",
    "build_gps_observation",
    "carto_covariance",
    "gps_covariance",
    "kf_update",
    "latlon_to_map",
    "load_map",
    "map_to_latlon",
    "mode_transition",
    "normalize_and_prune",
    "predict",
    "project_onto_segment",
    "save_map",
    "segment_heading",
    "select_candidates",
    "skf_step",
    "wheel_to_elementary",
]
