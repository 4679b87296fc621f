import math
import random
import string

import numpy as np
import pytest

from oracles import xor_checksum
from roadmatch.nmea import (
    ChecksumMismatch,
    MalformedFraming,
    MissingErrorFields,
    UnknownType,
    format_gga,
    format_gst,
    format_sentence,
    parse_nmea,
    read_gga,
)
from roadmatch.observation import gps_covariance

FIELD_CHARS = string.ascii_letters + string.digits + ".-+ "


def random_sentence(rng: random.Random):
    kind = rng.choice(["GGA", "GST"])
    talker = rng.choice(["GP", "GN", "GL"])
    fields = ["".join(rng.choice(FIELD_CHARS) for _ in range(rng.randint(0, 12)))
              for _ in range(rng.randint(1, 16))]
    return talker, kind, fields


def test_checksum_matches_xor_oracle():
    rng = random.Random(0)
    for _ in range(1000):
        body = "".join(rng.choice(FIELD_CHARS + ",") for _ in range(rng.randint(1, 80)))
        line = format_sentence("GP" + "GGA", [body])
        assert int(line[-2:], 16) == xor_checksum("GPGGA," + body)


def test_fuzzed_round_trip():
    rng = random.Random(1)
    for _ in range(10_000):
        talker, kind, fields = random_sentence(rng)
        s = parse_nmea(format_sentence(talker + kind, fields))
        assert (s.talker, s.type, list(s.fields)) == (talker, kind, fields)


def test_corrupted_checksum_rejected():
    rng = random.Random(2)
    for _ in range(10_000):
        talker, kind, fields = random_sentence(rng)
        line = format_sentence(talker + kind, fields)
        bad = (int(line[-2:], 16) ^ rng.randint(1, 255))
        with pytest.raises(ChecksumMismatch):
            parse_nmea(line[:-2] + f"{bad:02X}")


def test_flipped_checksum_byte():
    line = format_gga(3600.5, 49.1, 2.6)
    flipped = line[:-1] + ("0" if line[-1] != "0" else "1")
    with pytest.raises(ChecksumMismatch):
        parse_nmea(flipped)


@pytest.mark.parametrize("line", ["", "   ", "GPGGA,1,2*00", "$GPGGA,1,2", "$*00", "$GPGGA,1*ZZ"])
def test_malformed_framing(line):
    with pytest.raises(MalformedFraming):
        parse_nmea(line)


def test_unknown_type_is_its_own_error():
    with pytest.raises(UnknownType) as info:
        parse_nmea(format_sentence("GPRMC", ["1", "2"]))
    assert info.value.sentence.type == "RMC"


def test_gga_round_trip_position():
    s = parse_nmea(format_gga(45296.25, -33.8568, 151.2153))
    fix = read_gga(s)
    assert fix.lat == pytest.approx(-33.8568, abs=1e-9)
    assert fix.lon == pytest.approx(151.2153, abs=1e-9)
    assert fix.time_of_day == pytest.approx(45296.25)


def test_gga_without_fix():
    s = parse_nmea(format_gga(10.0, 49.0, 2.5, quality=0))
    assert read_gga(s) is None


def _gst(smaj, smin, orient, slat=1.0, slon=1.0):
    return parse_nmea(format_gst(0.0, 1.0, smaj, smin, orient, slat, slon, 2.0))


@pytest.mark.parametrize("orient", [0.0, 33.0, 90.0, 147.5])
def test_gst_isotropic(orient):
    assert np.allclose(gps_covariance(_gst(1, 1, orient)), np.eye(2))


def test_gst_north_major_axis():
    assert np.allclose(gps_covariance(_gst(2, 1, 0)), np.diag([1, 4]))


def test_gst_east_major_axis():
    assert np.allclose(gps_covariance(_gst(2, 1, 90)), np.diag([4, 1]), atol=1e-12)


def test_gst_zero():
    assert np.array_equal(gps_covariance(_gst(0, 0, 0)), np.zeros((2, 2)))


def test_gst_eigenvalues():
    rng = np.random.default_rng(3)
    for _ in range(200):
        a, b = sorted(rng.uniform(0.01, 20, 2), reverse=True)
        q = gps_covariance(_gst(round(a, 3), round(b, 3), rng.uniform(0, 180)))
        assert np.allclose(np.linalg.eigvalsh(q), sorted([round(b, 3) ** 2, round(a, 3) ** 2]), rtol=1e-9)


def test_gst_lat_lon_fallback():
    s = parse_nmea(format_sentence("GPGST", ["000000.00", "1.0", "", "", "", "3.0", "2.0", "5.0"]))
    assert np.allclose(gps_covariance(s), np.diag([4.0, 9.0]))


def test_gst_missing_both():
    s = parse_nmea(format_sentence("GPGST", ["000000.00", "1.0", "", "", "", "", "", ""]))
    with pytest.raises(MissingErrorFields):
        gps_covariance(s)
