"""JSON Schemas of the files the CLI writes (used by the test suite and
available to downstream consumers)."""

_feature_collection = {
    "type": "object",
    "required": ["type", "features"],
    "properties": {"type": {"const": "FeatureCollection"}, "features": {"type": "array"}},
}

_position = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

MAP_GEOJSON = {
    **_feature_collection,
    "properties": {
        "type": {"const": "FeatureCollection"},
        "features": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type", "geometry", "properties"],
                "properties": {
                    "type": {"const": "Feature"},
                    "geometry": {
                        "type": "object",
                        "required": ["type", "coordinates"],
                        "properties": {
                            "type": {"const": "LineString"},
                            "coordinates": {"type": "array", "items": _position, "minItems": 2},
                        },
                    },
                    "properties": {
                        "type": "object",
                        "required": ["id", "width"],
                        "properties": {"id": {"type": "integer"}, "width": {"type": "number", "exclusiveMinimum": 0}},
                    },
                },
            },
        },
    },
}

TRACK_GEOJSON = {
    **_feature_collection,
    "properties": {
        "type": {"const": "FeatureCollection"},
        "features": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["type", "geometry", "properties"],
                "properties": {
                    "type": {"const": "Feature"},
                    "geometry": {
                        "type": "object",
                        "required": ["type", "coordinates"],
                        "properties": {"type": {"enum": ["LineString", "Point"]}},
                    },
                    "properties": {
                        "type": "object",
                        "required": ["kind"],
                        "properties": {
                            "kind": {"enum": ["track", "step"]},
                            "step": {"type": "integer", "minimum": 0},
                            "best_segment": {"type": ["integer", "null"]},
                            "gps_used": {"type": "boolean"},
                            "weights": {
                                "type": "object",
                                "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1},
                            },
                        },
                    },
                },
            },
        },
    },
}

MAP_FILE = {
    "type": "object",
    "required": ["segments"],
    "properties": {
        "format": {"const": "roadmatch-map/1"},
        "origin": {
            "type": "object",
            "required": ["lat", "lon"],
            "properties": {"lat": {"type": "number", "exclusiveMinimum": -90, "exclusiveMaximum": 90},
                           "lon": {"type": "number"}},
        },
        "errors": {
            "type": "object",
            "properties": {k: {"type": "number", "exclusiveMinimum": 0}
                           for k in ("absolute_error", "relative_error", "containment_sigma")},
        },
        "segments": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "ax", "ay", "bx", "by", "width"],
                "properties": {
                    "id": {"type": "integer"},
                    "ax": {"type": "number"}, "ay": {"type": "number"},
                    "bx": {"type": "number"}, "by": {"type": "number"},
                    "width": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
    },
}
