"""Observation channels: GPS fixes with per-fix covariance, and
cartographic pseudo-observations of candidate segments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from roadmatch.motion import wrap_angle
from roadmatch.nmea import MissingErrorFields, NmeaError, NmeaSentence, read_gga
from roadmatch.road_map import (
    MapErrorModel,
    MapPoint,
    Segment,
    carto_covariance,
    project_onto_segment,
    segment_heading,
)

# WGS84
_A = 6378137.0
_F = 1 / 298.257223563
_E2 = _F * (2 - _F)

GPS_H = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class GeoReference:
    """Local tangent plane anchored at (lat0, lon0)."""

    lat0: float
    lon0: float
    meridional_radius: float
    normal_radius: float

    @classmethod
    def at(cls, lat0: float, lon0: float) -> "GeoReference":
        if not abs(lat0) < 90:
            raise ValueError("origin latitude must be within (-90, 90)")
        s2 = math.sin(math.radians(lat0)) ** 2
        w = math.sqrt(1 - _E2 * s2)
        return cls(lat0, lon0, _A * (1 - _E2) / w**3, _A / w)


def latlon_to_map(lat: float, lon: float, ref: GeoReference) -> MapPoint:
    k = math.pi / 180
    x = (lon - ref.lon0) * math.cos(ref.lat0 * k) * ref.normal_radius * k
    y = (lat - ref.lat0) * ref.meridional_radius * k
    return MapPoint(x, y)


def map_to_latlon(p: MapPoint, ref: GeoReference) -> tuple[float, float]:
    k = math.pi / 180
    lat = ref.lat0 + p.y / (ref.meridional_radius * k)
    lon = ref.lon0 + p.x / (math.cos(ref.lat0 * k) * ref.normal_radius * k)
    return lat, lon


def gps_covariance(gst: NmeaSentence) -> np.ndarray:
    """2x2 east/north position covariance from a GST sentence.

    The error ellipse (fields 3-5) is preferred; its orientation is the
    semi-major axis bearing in degrees clockwise from north.
    """
    if gst.type != "GST":
        raise NmeaError(f"expected GST, got {gst.type}")
    try:
        if gst.field(3) and gst.field(4) and gst.field(5):
            s_maj, s_min = float(gst.field(3)), float(gst.field(4))
            phi = math.pi / 2 - math.radians(float(gst.field(5)))
            c, s = math.cos(phi), math.sin(phi)
            rot = np.array([[c, -s], [s, c]])
            q = rot @ np.diag([s_maj**2, s_min**2]) @ rot.T
            return 0.5 * (q + q.T)
        if gst.field(6) and gst.field(7):
            s_lat, s_lon = float(gst.field(6)), float(gst.field(7))
            return np.diag([s_lon**2, s_lat**2])
    except ValueError as exc:
        raise NmeaError(f"bad GST field: {exc}") from None
    raise MissingErrorFields("GST carries neither an error ellipse nor lat/lon sigmas")


@dataclass(frozen=True)
class GpsFix:
    time: float
    position: MapPoint
    cov: np.ndarray


def gps_fix_from_nmea(time: float, gga: NmeaSentence, gst: NmeaSentence | None,
                      ref: GeoReference, default_sigma: float = 5.0) -> GpsFix | None:
    """Combine a GGA position and its GST statistics into a map-frame fix.

    Without a GST sentence the fix gets an isotropic ``default_sigma``.
    """
    decoded = read_gga(gga)
    if decoded is None:
        return None
    cov = gps_covariance(gst) if gst is not None else np.eye(2) * default_sigma**2
    return GpsFix(time, latlon_to_map(decoded.lat, decoded.lon, ref), cov)


@dataclass(frozen=True)
class CartoObservation:
    segment_id: int
    z: np.ndarray  # x_carto, y_carto, cap_carto
    cov: np.ndarray


def nearest_direction(heading: float, reference: float) -> float:
    """``heading`` or its reverse, whichever is closer to ``reference``."""
    if abs(wrap_angle(heading - reference)) <= math.pi / 2:
        return wrap_angle(heading)
    return wrap_angle(heading + math.pi)


def build_carto_observation(mean, seg: Segment, errs: MapErrorModel) -> CartoObservation:
    x, y, theta = (float(v) for v in (mean.as_array() if hasattr(mean, "as_array") else mean))
    proj = project_onto_segment(MapPoint(x, y), seg)
    cap = nearest_direction(segment_heading(seg), theta)
    return CartoObservation(seg.id, np.array([proj.point.x, proj.point.y, cap]),
                            carto_covariance(seg, errs))


def build_gps_observation(fix: GpsFix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return np.array([fix.position.x, fix.position.y]), GPS_H.copy(), np.array(fix.cov, dtype=float)
