"""Sensor log files.

One record per line::

    t,d_left,d_right[,$GPGGA,...*hh[,$GPGST,...*hh]]

``t`` is seconds, wheel arcs are meters. NMEA sentences follow the three
numeric fields verbatim (they contain commas; each starts at a ``$``).
Lines starting with ``#`` are comments, except the optional directive::

    #!init,x,y,theta,pxx,pxy,pxt,pyy,pyt,ptt

which carries the initial pose and the upper triangle of its covariance.
GPS positions are converted to the map frame with the map's geographic
origin; sentences of other types are skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from roadmatch.matcher import SensorFrame
from roadmatch.motion import OdometryInput, StateEstimate
from roadmatch.nmea import NmeaError, UnknownType, parse_nmea
from roadmatch.observation import GeoReference, gps_fix_from_nmea

HEADER = "# roadmatch sensor log v1"
_SENTENCE = re.compile(r"\$[^$]*")


class LogFormatError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass
class SensorLog:
    frames: list[SensorFrame]
    initial: StateEstimate | None = None
    nmea: list[tuple[str, ...]] | None = None  # raw sentences per frame


def _upper(cov: np.ndarray) -> list[float]:
    return [cov[0, 0], cov[0, 1], cov[0, 2], cov[1, 1], cov[1, 2], cov[2, 2]]


def _from_upper(v) -> np.ndarray:
    xx, xy, xt, yy, yt, tt = v
    return np.array([[xx, xy, xt], [xy, yy, yt], [xt, yt, tt]])


def write_log(fp: IO[str], records: Iterable[tuple[float, float, float, tuple[str, ...]]],
              initial: StateEstimate | None = None) -> None:
    """Write ``(t, d_left, d_right, sentences)`` records."""
    fp.write(HEADER + "\n")
    if initial is not None:
        vals = list(initial.mean) + _upper(initial.cov)
        fp.write("#!init," + ",".join(repr(float(v)) for v in vals) + "\n")
    for t, dl, dr, sentences in records:
        fp.write(",".join([repr(float(t)), repr(float(dl)), repr(float(dr)), *sentences]) + "\n")


def read_log(fp: IO[str], ref: GeoReference | None) -> SensorLog:
    frames: list[SensorFrame] = []
    raw: list[tuple[str, ...]] = []
    initial = None
    last_t = -np.inf
    for lineno, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#!init"):
            try:
                vals = [float(v) for v in line.split(",")[1:]]
                if len(vals) != 9:
                    raise ValueError("expected 9 numbers")
            except ValueError as exc:
                raise LogFormatError(f"bad init directive ({exc})", lineno) from None
            initial = StateEstimate(vals[:3], _from_upper(vals[3:]))
            continue
        if line.startswith("#"):
            continue
        head, dollar, tail = line.partition("$")
        parts = [p.strip() for p in head.rstrip().rstrip(",").split(",")]
        if len(parts) != 3:
            raise LogFormatError("expected t,d_left,d_right", lineno)
        try:
            t, dl, dr = (float(p) for p in parts)
        except ValueError:
            raise LogFormatError("non-numeric t/d_left/d_right", lineno) from None
        if not t > last_t:
            raise LogFormatError(f"time {t} does not increase", lineno)
        last_t = t
        sentences = tuple(s.rstrip().rstrip(",") for s in _SENTENCE.findall(dollar + tail)) if dollar else ()
        gga = gst = None
        for text in sentences:
            try:
                s = parse_nmea(text)
            except UnknownType:
                continue
            except NmeaError as exc:
                raise LogFormatError(str(exc), lineno) from None
            if s.type == "GGA":
                gga = s
            elif s.type == "GST":
                gst = s
        fix = None
        if gga is not None:
            if ref is None:
                raise LogFormatError("GPS sentences need a map with a geographic origin", lineno)
            try:
                fix = gps_fix_from_nmea(t, gga, gst, ref)
            except NmeaError as exc:
                raise LogFormatError(str(exc), lineno) from None
        frames.append(SensorFrame(t, OdometryInput(dl, dr), fix))
        raw.append(sentences)
    return SensorLog(frames, initial, raw)
