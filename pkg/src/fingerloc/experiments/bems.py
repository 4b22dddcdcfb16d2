"""Building-management study: binary occupancy sensors, tracking, lighting.

Eight wall-mounted detectors emit one bit per step.  Detection probability
maps are learned per sensor on the room grid, a recursive grid Bayes filter
tracks the occupant (with the unfiltered per-snapshot argmax as baseline),
and the thresholded candidate cell set drives a minimum-power lighting LP
that is compared against switching every luminaire on.
"""

import json
import math
import os

import numpy as np

from ..database import DatabaseMeta, FingerprintDatabase, load_database, save_database
from ..errors import ConfigError
from ..geometry import Grid, Position, build_uniform_grid
from ..lighting import Light, LightingScenario, illuminance, solve_lighting
from ..matching import LikelihoodMap, binary_likelihood, threshold_set
from ..signals import FingerprintKind, FingerprintVector
from ..simulate import SensorCoverage, derive_seed, simulate_binary_sensor
from ..stats import DetectionMap, learn_detection_map
from ..tracking import MobilityModel, grid_bayes_step, transition_matrix
from .common import cdf_table, summarize_errors, write_csv, write_json

MEASUREMENTS_FORMAT = "fingerloc-measurements-1"
_TAG_TRAIN_VISIT = 301
_TAG_TRAIN_BIT = 302
_TAG_WALK = 303
_TAG_WALK_BIT = 304


def build_grid(cfg: dict) -> Grid:
    g = cfg["scenario"]["grid"]
    return build_uniform_grid(Position(*g["origin"]), g["nx"], g["ny"], g["spacing_m"])


def build_sensors(cfg: dict) -> list:
    """SensorCoverage per configured sensor (shared profile, per-sensor overrides)."""
    scn = cfg["scenario"]
    base = scn["coverage"]
    sensors = []
    for s in scn["sensors"]:
        merged = dict(base)
        merged.update({k: v for k, v in s.items() if k != "pos"})
        sensors.append(SensorCoverage(
            pos=Position(*s["pos"]),
            range_edges_m=tuple(merged["range_edges_m"]),
            p_moving=tuple(merged["p_moving"]),
            p_static=merged["p_static"],
        ))
    return sensors


def simulate_training(cfg: dict) -> list:
    """Training visit records ``(cell, moving, bits)`` for every grid cell."""
    grid = build_grid(cfg)
    sensors = build_sensors(cfg)
    scn = cfg["scenario"]
    records = []
    for cell in range(len(grid)):
        for visit in range(scn["train_visits"]):
            rng = np.random.default_rng(
                derive_seed(cfg["seed"], _TAG_TRAIN_VISIT, cell, visit))
            moving = bool(rng.random() < scn["train_move_prob"])
            bits = [
                simulate_binary_sensor(
                    grid.points[cell], moving, cov,
                    derive_seed(cfg["seed"], _TAG_TRAIN_BIT, cell, visit, si))
                for si, cov in enumerate(sensors)
            ]
            records.append((cell, moving, bits))
    return records


def measurements_to_obj(cfg: dict, records: list) -> dict:
    return {
        "format": MEASUREMENTS_FORMAT,
        "pipeline": "bems_binary",
        "observations": [[cell, int(moving)] + list(bits)
                         for cell, moving, bits in records],
    }


def measurements_from_obj(cfg: dict, obj: dict) -> list:
    if obj.get("format") != MEASUREMENTS_FORMAT or obj.get("pipeline") != "bems_binary":
        raise ConfigError("measurement file does not hold occupancy observations")
    raw = obj.get("observations", [])
    if not raw:
        raise ConfigError("measurement set is empty")
    n_sensors = len(cfg["scenario"]["sensors"])
    records = []
    for row in raw:
        if len(row) != 2 + n_sensors:
            raise ConfigError("observation row does not match the sensor count")
        records.append((int(row[0]), bool(row[1]), [int(b) for b in row[2:]]))
    return records


def load_training(cfg: dict) -> list:
    path = cfg["scenario"]["measurements"]
    if path is None:
        return simulate_training(cfg)
    with open(path, "r", encoding="utf-8") as fh:
        return measurements_from_obj(cfg, json.load(fh))


def build_database(cfg: dict, records: list) -> FingerprintDatabase:
    """Detection probability per sensor per cell, stored as plain scalars."""
    grid = build_grid(cfg)
    n_sensors = len(cfg["scenario"]["sensors"])
    maps = []
    for si in range(n_sensors):
        obs = [(cell, moving, bits[si]) for cell, moving, bits in records]
        maps.append(learn_detection_map(obs, grid))
    entries = [
        {f"det:{si}": float(maps[si].probs[cell]) for si in range(n_sensors)}
        for cell in range(len(grid))
    ]
    meta = DatabaseMeta(extra={"pipeline": "bems_binary", "sensors": n_sensors})
    return FingerprintDatabase(grid=grid, entries=entries, meta=meta)


def detection_maps(db: FingerprintDatabase) -> list:
    """Rebuild per-sensor DetectionMaps from database scalars."""
    n_sensors = len([k for k in db.entries[0] if k.startswith("det:")])
    maps = []
    for si in range(n_sensors):
        probs = np.array([entry[f"det:{si}"] for entry in db.entries])
        maps.append(DetectionMap(grid=db.grid, probs=probs))
    return maps


def generate_walk(cfg: dict) -> tuple:
    """Grid-cell walk; returns (cells, moving_flags), each of length steps."""
    grid = build_grid(cfg)
    g = cfg["scenario"]["grid"]
    nx, ny = g["nx"], g["ny"]
    walk = cfg["scenario"]["walk"]
    cell = walk["start_cell"]
    if not (0 <= cell < len(grid)):
        raise ConfigError("walk start cell is outside the grid", path="scenario.walk.start_cell")
    rng = np.random.default_rng(derive_seed(cfg["seed"], _TAG_WALK))
    cells, moving = [], []
    for _ in range(walk["steps"]):
        moved = False
        if rng.random() < walk["move_prob"]:
            ix, iy = cell % nx, cell // nx
            options = []
            if ix > 0:
                options.append(cell - 1)
            if ix < nx - 1:
                options.append(cell + 1)
            if iy > 0:
                options.append(cell - nx)
            if iy < ny - 1:
                options.append(cell + nx)
            cell = int(options[rng.integers(len(options))])
            moved = True
        cells.append(cell)
        moving.append(moved)
    return cells, moving


def evaluate_track(cfg: dict, db: FingerprintDatabase) -> tuple:
    """Tracked vs per-snapshot localization along the walk.

    Returns (rows, candidate_sets, summary); candidate_sets holds the
    thresholded cell set U_t per step for downstream lighting control.
    """
    grid = db.grid
    maps = detection_maps(db)
    sensors = build_sensors(cfg)
    spacing = cfg["scenario"]["grid"]["spacing_m"]
    cells, moving = generate_walk(cfg)
    eta = math.log(cfg["matching"]["eta_rel"])
    tr = cfg["tracking"]
    model = MobilityModel(p_static=tr["p_static"], accel_sigma=tr["accel_sigma"],
                          dt=tr["dt"])
    trans = transition_matrix(grid, model)
    pts = grid.as_array()

    prior = None
    rows = []
    candidate_sets = []
    errs_track, errs_snap = [], []
    for t, (cell, moved) in enumerate(zip(cells, moving), start=1):
        bits = np.array([
            simulate_binary_sensor(grid.points[cell], moved, cov,
                                   derive_seed(cfg["seed"], _TAG_WALK_BIT, t, si))
            for si, cov in enumerate(sensors)
        ])
        f = FingerprintVector(kind=FingerprintKind.BINARY, values=bits)
        obs = binary_likelihood(f, maps)
        if prior is None:  # first step: normalize like the filter does
            post = LikelihoodMap(grid=obs.grid, values=obs.values - np.max(obs.values),
                                 mode=obs.mode)
        else:
            post = grid_bayes_step(prior, trans, obs)
        prior = post
        snap_idx = int(np.argmax(obs.values))
        track_idx = int(np.argmax(post.values))
        cand = threshold_set(post, eta)
        candidate_sets.append([int(c) for c in cand])
        err_s = float(np.hypot(*(pts[snap_idx] - pts[cell])))
        err_t = float(np.hypot(*(pts[track_idx] - pts[cell])))
        errs_snap.append(err_s)
        errs_track.append(err_t)
        rows.append((t, cell, pts[cell, 0], pts[cell, 1], snap_idx, err_s,
                     track_idx, pts[track_idx, 0], pts[track_idx, 1], err_t,
                     len(cand), cell in cand))

    summary = {
        "steps": len(cells),
        "tracked": summarize_errors(errs_track),
        "snapshot": summarize_errors(errs_snap),
        "grid_spacing_m": spacing,
        "mean_candidates": float(np.mean([len(c) for c in candidate_sets]))
        if candidate_sets else None,
        "true_in_candidates_rate": float(np.mean([
            row[1] in cand for row, cand in zip(rows, candidate_sets)]))
        if candidate_sets else None,
    }
    if candidate_sets:
        summary["tracked_cells"] = summary["tracked"]["mean"] / spacing
        summary["snapshot_cells"] = summary["snapshot"]["mean"] / spacing
        summary["cdf"] = {"tracked": cdf_table(errs_track),
                          "snapshot": cdf_table(errs_snap)}
    return rows, candidate_sets, summary


def build_lighting_scenario(cfg: dict, grid: Grid) -> LightingScenario:
    lcfg = cfg["lighting"]
    lights = tuple(
        Light(position=Position(*l["pos"]), power_w=l["power_w"],
              peak_lux=l["peak_lux"], height_m=l["height_m"])
        for l in lcfg["lights"]
    )
    env = np.full(len(grid), float(lcfg["env_lux"]))
    return LightingScenario(grid=grid, lights=lights,
                            target_lux=lcfg["target_lux"], env_lux=env)


def evaluate_lighting(cfg: dict, grid: Grid, rows: list, candidate_sets: list) -> tuple:
    """Per-step LP control on the candidate sets vs the all-on baseline."""
    scenario = build_lighting_scenario(cfg, grid)
    all_on = float(sum(light.power_w for light in scenario.lights))
    target = scenario.target_lux
    out_rows = []
    powers = []
    satisfied = []
    for row, cand in zip(rows, candidate_sets):
        t, true_cell = row[0], row[1]
        plan = solve_lighting(scenario, cand)
        powers.append(plan.power_w)
        in_set = true_cell in cand
        ok = None
        if in_set:
            ok = illuminance(scenario, plan.switches, true_cell) >= target - 1e-6
            satisfied.append(bool(ok))
        out_rows.append((t, len(cand), plan.power_w,
                         1.0 - plan.power_w / all_on, in_set,
                         "" if ok is None else ok))
    summary = {
        "steps": len(out_rows),
        "all_on_power_w": all_on,
        "mean_power_w": float(np.mean(powers)) if powers else None,
        "energy_saving": 1.0 - float(np.mean(powers)) / all_on if powers else None,
        "satisfaction_rate": float(np.mean(satisfied)) if satisfied else None,
        "covered_steps": len(satisfied),
    }
    return out_rows, summary


def _load_db(cfg: dict, out_dir: str) -> FingerprintDatabase:
    path = os.path.join(out_dir, "db.json")
    if not os.path.exists(path):
        cmd_learn(cfg, out_dir)
    return load_database(path)


def cmd_simulate(cfg: dict, out_dir: str) -> dict:
    records = simulate_training(cfg)
    write_json(os.path.join(out_dir, "measurements.json"),
               measurements_to_obj(cfg, records))
    summary = {"observations": len(records),
               "sensors": len(cfg["scenario"]["sensors"])}
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def cmd_learn(cfg: dict, out_dir: str) -> dict:
    records = load_training(cfg)
    db = build_database(cfg, records)
    save_database(db, os.path.join(out_dir, "db.json"))
    counts = np.zeros(len(db), dtype=int)
    for cell, _moving, _bits in records:
        counts[cell] += 1
    log = {"points": len(db), "sensors": len(cfg["scenario"]["sensors"]),
           "per_point_samples": [int(c) for c in counts]}
    write_json(os.path.join(out_dir, "learn_log.json"), log)
    return log


_TRACK_HEADER = ("step", "true_cell", "true_x", "true_y", "snap_index",
                 "snap_error_m", "tracked_index", "est_x", "est_y",
                 "tracked_error_m", "candidates", "true_in_candidates")


def cmd_localize(cfg: dict, out_dir: str) -> dict:
    db = _load_db(cfg, out_dir)
    rows, _sets, summary = evaluate_track(cfg, db)
    trial_rows = [(r[0], r[1], r[2], r[3], r[4], r[5]) for r in rows]
    header = ("step", "true_cell", "true_x", "true_y", "est_index", "error_m")
    write_csv(os.path.join(out_dir, "trials.csv"), header, trial_rows)
    reduced = {"steps": summary["steps"], "snapshot": summary["snapshot"],
               "grid_spacing_m": summary["grid_spacing_m"]}
    if "cdf" in summary:
        reduced["cdf"] = {"snapshot": summary["cdf"]["snapshot"]}
    write_json(os.path.join(out_dir, "summary.json"), reduced)
    return reduced


def cmd_track(cfg: dict, out_dir: str) -> dict:
    db = _load_db(cfg, out_dir)
    rows, sets, summary = evaluate_track(cfg, db)
    write_csv(os.path.join(out_dir, "track.csv"), _TRACK_HEADER, rows)
    write_json(os.path.join(out_dir, "track_sets.json"),
               {"candidate_sets": sets, "true_cells": [r[1] for r in rows]})
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def cmd_lighting(cfg: dict, out_dir: str) -> dict:
    db = _load_db(cfg, out_dir)
    sets_path = cfg["lighting"]["track_output"] or os.path.join(out_dir, "track_sets.json")
    if os.path.exists(sets_path):
        with open(sets_path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        sets = [[int(c) for c in cand] for cand in data["candidate_sets"]]
        rows = [(t + 1, int(cell)) for t, cell in enumerate(data["true_cells"])]
    else:
        track_rows, sets, _ = evaluate_track(cfg, db)
        rows = [(r[0], r[1]) for r in track_rows]
    out_rows, summary = evaluate_lighting(cfg, db.grid, rows, sets)
    header = ("step", "occupied_cells", "power_w", "saving_vs_all_on",
              "true_in_candidates", "satisfied_at_true")
    write_csv(os.path.join(out_dir, "lighting.csv"), header, out_rows)
    # Merge under a namespaced key so a prior tracking summary survives.
    summary_path = os.path.join(out_dir, "summary.json")
    merged = {}
    if os.path.exists(summary_path):
        with open(summary_path, "r", encoding="utf-8") as fh:
            merged = json.load(fh)
        merged.pop("lighting", None)
    merged["lighting"] = summary
    write_json(summary_path, merged)
    return merged
