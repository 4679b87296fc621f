"""Command line: ``roadmatch {sim,match,eval,mc}``.

Exit codes: 0 success, 1 usage error, 2 data error. The default output
directory comes from ``$ROADMATCH_OUT`` (else the current directory).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from roadmatch.export import (
    dump_json,
    map_to_geojson,
    read_results_csv,
    read_truth_csv,
    track_to_geojson,
    write_results_csv,
    write_truth_csv,
)
from roadmatch.matcher import MatchConfig, Matcher
from roadmatch.motion import StateEstimate, VehicleParams
from roadmatch.observation import GeoReference
from roadmatch.road_map import MapError, load_map, save_map
from roadmatch.sensor_log import LogFormatError, read_log, write_log
from roadmatch.simulator import (
    KINDS,
    Scenario,
    ScenarioError,
    evaluate_arrays,
    load_scenario,
    simulate,
)
from roadmatch.skf import SkfConfig

log = logging.getLogger("roadmatch")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
OUT_ENV = "ROADMATCH_OUT"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_out() -> str:
    return os.environ.get(OUT_ENV, ".")


def _add_matcher_flags(p):
    g = p.add_argument_group("matcher overrides")
    g.add_argument("--radius", type=float)
    g.add_argument("--stay-probability", type=float)
    g.add_argument("--jump-epsilon", type=float)
    g.add_argument("--prune-threshold", type=float)


def _add_scenario_flags(p):
    p.add_argument("--scenario", help="scenario TOML file")
    p.add_argument("--kind", choices=KINDS, help="built-in scenario (when no --scenario)")
    g = p.add_argument_group("scenario overrides")
    g.add_argument("--gps-sigma", type=float)
    g.add_argument("--odo-sigma-s", type=float)
    g.add_argument("--odo-sigma-theta", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="roadmatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sim", help="simulate a scenario: map, sensor log, ground truth")
    _add_scenario_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=None)

    p = sub.add_parser("match", help="run the matcher over a sensor log")
    p.add_argument("--map", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--config", help="TOML file whose [matcher] table sets defaults")
    p.add_argument("--init", help="initial pose 'x,y,theta[,sxy,stheta]' (else the log's #!init)")
    p.add_argument("--track", type=float, help="rear track width [m]")
    p.add_argument("--odo-sigma-s", type=float)
    p.add_argument("--odo-sigma-theta", type=float)
    p.add_argument("--truth", help="ground truth CSV, only drawn in the figure")
    p.add_argument("--plot", action="store_true", help="also render match.png")
    _add_matcher_flags(p)

    p = sub.add_parser("eval", help="score a results CSV against ground truth")
    p.add_argument("--results", required=True)
    p.add_argument("--truth", required=True)

    p = sub.add_parser("mc", help="Monte-Carlo: sim + match + eval over many seeds")
    _add_scenario_flags(p)
    p.add_argument("--runs", "-n", type=int, default=10)
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--seeds", help="explicit comma-separated seed list")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--plot", action="store_true", help="also render mc.png")
    _add_matcher_flags(p)
    return parser


# -- helpers -----------------------------------------------------------------

def _scenario_from_args(args) -> tuple[Scenario, dict]:
    if args.scenario:
        if not Path(args.scenario).is_file():
            raise DataError(f"scenario file not found: {args.scenario}")
        try:
            scenario, matcher = load_scenario(args.scenario)
        except ScenarioError:
            raise
        except Exception as exc:
            raise DataError(f"cannot read scenario {args.scenario}: {exc}") from None
    elif args.kind:
        scenario, matcher = Scenario.default(args.kind), {}
    else:
        raise UsageError("one of --scenario or --kind is required")
    overrides = {}
    for flag, name in (("gps_sigma", "gps_sigma"), ("odo_sigma_s", "odo_sigma_s"),
                       ("odo_sigma_theta", "odo_sigma_theta")):
        if getattr(args, flag, None) is not None:
            overrides[name] = getattr(args, flag)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return replace(scenario, **overrides), matcher


def match_config(table: dict, args, vehicle: VehicleParams) -> MatchConfig:
    """Matcher settings: file table first, command-line flags on top."""
    allowed = {"radius", "stay_probability", "jump_epsilon", "prune_threshold",
               "track", "odo_sigma_s", "odo_sigma_theta"}
    unknown = set(table) - allowed
    if unknown:
        raise DataError(f"unknown [matcher] key(s): {', '.join(sorted(unknown))}")
    vals = dict(table)
    for name in allowed:
        flag = getattr(args, name, None)
        if flag is not None:
            vals[name] = flag
    veh = VehicleParams(
        track=vals.get("track", vehicle.track),
        sigma_s=vals.get("odo_sigma_s", vehicle.sigma_s),
        sigma_theta=vals.get("odo_sigma_theta", vehicle.sigma_theta),
    )
    skf = SkfConfig(**{k: vals[k] for k in ("stay_probability", "jump_epsilon", "prune_threshold") if k in vals})
    return MatchConfig(radius=vals.get("radius", 30.0), skf=skf, vehicle=veh)


def _write_atomic(out_dir: Path, files: dict) -> None:
    """Write all files or none: stage in a temp dir, then move into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=out_dir) as tmp:
        staged = []
        for name, writer in files.items():
            path = Path(tmp) / name
            with open(path, "w", encoding="utf-8", newline="") as fp:
                writer(fp)
            staged.append((path, out_dir / name))
        for src, dst in staged:
            os.replace(src, dst)


def _parse_init(text: str) -> StateEstimate:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"bad --init {text!r}") from None
    if len(vals) not in (3, 5):
        raise UsageError("--init takes x,y,theta[,sigma_xy,sigma_theta]")
    sxy, sth = (vals[3], vals[4]) if len(vals) == 5 else (1.0, 0.02)
    return StateEstimate(vals[:3], [[sxy**2, 0, 0], [0, sxy**2, 0], [0, 0, sth**2]])


# -- subcommands -------------------------------------------------------------

def cmd_sim(args) -> int:
    scenario, _ = _scenario_from_args(args)
    run = simulate(scenario)
    out = Path(args.out or _default_out())
    _write_atomic(out, {
        "map.json": lambda fp: save_map(run.road_map, fp),
        "log.csv": lambda fp: write_log(fp, run.records, run.initial),
        "truth.csv": lambda fp: write_truth_csv(fp, run.truth),
    })
    log.info("wrote map.json, log.csv, truth.csv to %s (%d frames)", out, len(run.frames))
    return EXIT_OK


def cmd_match(args) -> int:
    for path in (args.map, args.log):
        if not Path(path).is_file():
            raise DataError(f"file not found: {path}")
    with open(args.map, encoding="utf-8") as fp:
        road_map = load_map(fp)
    ref = GeoReference.at(*road_map.origin) if road_map.origin else None
    with open(args.log, encoding="utf-8") as fp:
        sensor_log = read_log(fp, ref)
    table = {}
    if args.config:
        try:
            _, table = load_scenario(args.config)
        except FileNotFoundError:
            raise DataError(f"config file not found: {args.config}") from None
    config = match_config(table, args, VehicleParams())
    initial = _parse_init(args.init) if args.init else sensor_log.initial
    if initial is None:
        raise DataError("no initial pose: pass --init or add a #!init line to the log")
    matcher = Matcher(road_map, initial, config)
    results = []
    for k, frame in enumerate(sensor_log.frames):
        results.append(matcher.step(frame))

    out = Path(args.out or _default_out())
    files = {
        "results.csv": lambda fp: write_results_csv(fp, results),
        "track.geojson": lambda fp: dump_json(track_to_geojson(results, ref), fp),
        "map.geojson": lambda fp: dump_json(map_to_geojson(road_map, ref), fp),
    }
    _write_atomic(out, files)
    if args.plot:
        from roadmatch.plotting import plot_match

        truth = None
        if args.truth:
            with open(args.truth, encoding="utf-8") as fp:
                truth = read_truth_csv(fp)
        plot_match(road_map, results, out / "match.png", truth=truth)
    log.info("matched %d frames -> %s", len(results), out)
    return EXIT_OK


def cmd_eval(args) -> int:
    for path in (args.results, args.truth):
        if not Path(path).is_file():
            raise DataError(f"file not found: {path}")
    with open(args.results, encoding="utf-8") as fp:
        rows = read_results_csv(fp)
    with open(args.truth, encoding="utf-8") as fp:
        truth = read_truth_csv(fp)
    if len(rows) != len(truth):
        raise DataError(f"results have {len(rows)} rows but truth has {len(truth)}")
    steps = [r["step"] for r in rows]
    if steps != list(range(len(truth))):
        raise DataError("results steps are not aligned with truth steps")
    metrics = evaluate_arrays(
        [r["best_segment"] for r in rows],
        [r["mean"] for r in rows],
        [r["cov"] for r in rows],
        [r["n_hypotheses"] for r in rows],
        [dict(r["hypotheses"]).get(sid, 0.0) for r, sid in zip(rows, truth.segment_ids)],
        truth.segment_ids,
        truth.poses,
    )
    print(json.dumps(metrics.as_dict(), indent=1))
    return EXIT_OK


def cmd_mc(args) -> int:
    from roadmatch.report import monte_carlo

    scenario, table = _scenario_from_args(args)
    if args.seeds:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            raise UsageError(f"bad --seeds {args.seeds!r}") from None
    else:
        if args.runs < 1:
            raise UsageError("--runs must be >= 1")
        seeds = list(range(args.seed_start, args.seed_start + args.runs))
    config = match_config(table, args, scenario.vehicle)
    report = monte_carlo(scenario, seeds, config, jobs=args.jobs)
    text = json.dumps(report, indent=1)
    print(text)
    if args.out or os.environ.get(OUT_ENV):
        out = Path(args.out or _default_out())
        _write_atomic(out, {"mc_report.json": lambda fp: fp.write(text + "\n")})
        if args.plot:
            from roadmatch.plotting import plot_mc

            plot_mc(report, out / "mc.png")
    return EXIT_OK


COMMANDS = {"sim": cmd_sim, "match": cmd_match, "eval": cmd_eval, "mc": cmd_mc}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"roadmatch: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, MapError, LogFormatError, ScenarioError, ValueError) as exc:
        print(f"roadmatch: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # seed failures from mc and the like
        print(f"roadmatch: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
