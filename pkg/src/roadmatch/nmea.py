"""NMEA 0183 framing, checksums, and the two sentences the matcher uses:
GGA (position fix) and GST (pseudorange error statistics)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

KNOWN_TYPES = frozenset({"GGA", "GST"})


class NmeaError(ValueError):
    pass


class MalformedFraming(NmeaError):
    pass


class ChecksumMismatch(NmeaError):
    pass


class UnknownType(NmeaError):
    """Well-formed sentence of a type we do not interpret; safe to skip."""

    def __init__(self, sentence: "NmeaSentence"):
        self.sentence = sentence
        super().__init__(f"unsupported sentence type {sentence.talker}{sentence.type}")


class MissingErrorFields(NmeaError):
    pass


@dataclass(frozen=True)
class NmeaSentence:
    talker: str
    type: str
    fields: tuple[str, ...]
    checksum: int

    def field(self, k: int) -> str:
        """Data field ``k`` (1-based, as in the NMEA tables); '' if absent."""
        return self.fields[k - 1] if k - 1 < len(self.fields) else ""


def checksum(body: str) -> int:
    """XOR of every character between '$' and '*'."""
    return reduce(lambda acc, ch: acc ^ ord(ch), body, 0)


def format_sentence(address: str, fields) -> str:
    body = ",".join([address, *fields])
    return f"${body}*{checksum(body):02X}"


def parse_nmea(line: str) -> NmeaSentence:
    line = line.strip()
    if not line or line[0] != "$":
        raise MalformedFraming("sentence must start with '$'")
    star = line.rfind("*")
    if star < 0 or len(line) - star != 3:
        raise MalformedFraming("sentence must end with '*hh'")
    body = line[1:star]
    if "$" in body or "*" in body or any(not (32 <= ord(ch) < 127) for ch in body):
        raise MalformedFraming("illegal character in sentence body")
    try:
        given = int(line[star + 1 :], 16)
    except ValueError:
        raise MalformedFraming("checksum is not hexadecimal") from None
    computed = checksum(body)
    if given != computed:
        raise ChecksumMismatch(f"checksum {given:02X} != computed {computed:02X}")
    parts = body.split(",")
    address = parts[0]
    if len(address) != 5 or not address.isalnum():
        raise MalformedFraming(f"bad address field {address!r}")
    sentence = NmeaSentence(address[:2], address[2:], tuple(parts[1:]), given)
    if sentence.type not in KNOWN_TYPES:
        raise UnknownType(sentence)
    return sentence


def _hhmmss(t: float) -> str:
    t = t % 86400.0
    h = int(t // 3600)
    m = int((t - 3600 * h) // 60)
    s = t - 3600 * h - 60 * m
    return f"{h:02d}{m:02d}{s:05.2f}"


def _parse_hhmmss(text: str) -> float:
    return int(text[0:2]) * 3600 + int(text[2:4]) * 60 + float(text[4:])


def _to_ddmm(value: float, deg_digits: int) -> tuple[str, bool]:
    negative = value < 0
    value = abs(value)
    deg = int(value)
    minutes = (value - deg) * 60
    return f"{deg:0{deg_digits}d}{minutes:010.7f}", negative


def _from_ddmm(text: str, deg_digits: int) -> float:
    return int(text[:deg_digits]) + float(text[deg_digits:]) / 60


def format_gga(time_s: float, lat: float, lon: float, quality: int = 2, n_sats: int = 9,
               hdop: float = 0.9, altitude: float = 50.0, talker: str = "GP") -> str:
    lat_txt, south = _to_ddmm(lat, 2)
    lon_txt, west = _to_ddmm(lon, 3)
    fields = [
        _hhmmss(time_s), lat_txt, "S" if south else "N", lon_txt, "W" if west else "E",
        str(quality), f"{n_sats:02d}", f"{hdop:.1f}", f"{altitude:.1f}", "M", "47.0", "M", "", "",
    ]
    return format_sentence(talker + "GGA", fields)


def format_gst(time_s: float, rms: float, sigma_major: float, sigma_minor: float,
               orientation_deg: float, sigma_lat: float, sigma_lon: float,
               sigma_alt: float, talker: str = "GP") -> str:
    fields = [_hhmmss(time_s)] + [
        f"{v:.3f}" for v in (rms, sigma_major, sigma_minor, orientation_deg % 180.0,
                              sigma_lat, sigma_lon, sigma_alt)
    ]
    return format_sentence(talker + "GST", fields)


@dataclass(frozen=True)
class GgaFix:
    time_of_day: float
    lat: float
    lon: float
    quality: int


def read_gga(s: NmeaSentence) -> GgaFix | None:
    """Decoded position; None when the receiver reports no fix."""
    if s.type != "GGA":
        raise NmeaError(f"expected GGA, got {s.type}")
    try:
        quality = int(s.field(6) or 0)
        if quality == 0 or not s.field(2) or not s.field(4):
            return None
        lat = _from_ddmm(s.field(2), 2) * (-1 if s.field(3) == "S" else 1)
        lon = _from_ddmm(s.field(4), 3) * (-1 if s.field(5) == "W" else 1)
        tod = _parse_hhmmss(s.field(1)) if s.field(1) else math.nan
    except ValueError as exc:
        raise NmeaError(f"bad GGA field: {exc}") from None
    return GgaFix(tod, lat, lon, quality)
