"""Wi-Fi study: power/phase fingerprints fused with dead reckoning.

Three two-antenna sensors survey a room grid.  Per sensor the fingerprint is
the received power (Gamma-modeled) and the phase of the averaged
cross-product between its antennas (von-Mises-modeled).  A walking target is
localized per step by grid maximum likelihood over RSSI only, phase only,
and both, and by a particle filter that additionally fuses noisy step
vectors from pedestrian dead reckoning.
"""

import json
import math
import os

import numpy as np

from ..database import (
    DatabaseMeta,
    FingerprintDatabase,
    load_database,
    real_to_json,
    save_database,
)
from ..errors import ConfigError
from ..features import rssi_rspd
from ..geometry import Grid, Position, build_uniform_grid
from ..matching import mle_rssi_rspd
from ..signals import SignalBuffer
from ..simulate import ChannelModel, TxSignalSpec, derive_seed, gen_cir, simulate_pdr, synthesize_rx
from ..stats import fit_gamma, fit_vonmises
from ..tracking import ParticleSet, particle_predict, particle_update
from .common import cdf_table, summarize_errors, write_csv, write_json

MEASUREMENTS_FORMAT = "fingerloc-measurements-1"
_TAG_TRAIN_BITS = 201
_TAG_TRAIN_NOISE = 202
_TAG_WALK_BITS = 203
_TAG_WALK_NOISE = 204
_TAG_WALK = 205
_TAG_PDR = 206
_TAG_PF = 207


def build_grid(cfg: dict) -> Grid:
    g = cfg["scenario"]["grid"]
    return build_uniform_grid(Position(*g["origin"]), g["nx"], g["ny"], g["spacing_m"])


def room_bounds(cfg: dict) -> tuple:
    g = cfg["scenario"]["grid"]
    x0, y0 = g["origin"]
    return (x0, y0, x0 + (g["nx"] - 1) * g["spacing_m"], y0 + (g["ny"] - 1) * g["spacing_m"])


def sensor_antennas(cfg: dict) -> list:
    """Per sensor, its two antenna positions (split along x)."""
    half = cfg["scenario"]["antenna_sep_m"] / 2.0
    return [
        (Position(sx - half, sy), Position(sx + half, sy))
        for sx, sy in cfg["scenario"]["sensors"]
    ]


def _tx_spec(cfg: dict) -> TxSignalSpec:
    scn = cfg["scenario"]
    return TxSignalSpec(kind="random_bits", length=scn["bits"],
                        sample_rate_hz=scn["bandwidth_hz"])


def measure_features(cfg: dict, tx: Position, snapshot: int, bits_seed,
                     noise_tag_parts) -> np.ndarray:
    """One measurement: (rssi, rspd) per sensor, shape (n_sensors, 2).

    All antennas hear the same transmitted bits; receiver noise is drawn
    independently per antenna at the configured SNR relative to that
    antenna's clean signal power.
    """
    scn = cfg["scenario"]
    model = ChannelModel(seed=cfg["seed"], **scn["channel"])
    spec = _tx_spec(cfg)
    snr = 10.0 ** (scn["snr_db"] / 10.0)
    out = np.empty((len(scn["sensors"]), 2))
    for si, (ant_a, ant_b) in enumerate(sensor_antennas(cfg)):
        bufs = []
        for ai, ant in enumerate((ant_a, ant_b)):
            cir = gen_cir(tx, ant, scn["freq_hz"], scn["bandwidth_hz"],
                          model, scn["tap_count"], snapshot=snapshot)
            clean = synthesize_rx(cir, spec, 0.0, bits_seed)
            noise_power = float(np.mean(np.abs(clean.samples) ** 2)) / snr
            rng = np.random.default_rng(
                derive_seed(cfg["seed"], *noise_tag_parts, si, ai))
            noise = math.sqrt(noise_power / 2.0) * (
                rng.standard_normal(clean.samples.size)
                + 1j * rng.standard_normal(clean.samples.size))
            bufs.append(SignalBuffer(samples=clean.samples + noise,
                                     sample_rate_hz=clean.sample_rate_hz))
        out[si] = rssi_rspd(bufs[0], bufs[1])
    return out


def simulate_measurements(cfg: dict) -> np.ndarray:
    """Training features, shape (points, snapshots, sensors, 2)."""
    scn = cfg["scenario"]
    grid = build_grid(cfg)
    n_snap = scn["train_snapshots"]
    out = np.empty((len(grid), n_snap, len(scn["sensors"]), 2))
    for p, point in enumerate(grid.points):
        for k in range(n_snap):
            bits_seed = derive_seed(cfg["seed"], _TAG_TRAIN_BITS, p, k)
            out[p, k] = measure_features(cfg, point, k, bits_seed,
                                         (_TAG_TRAIN_NOISE, p, k))
    return out


def measurements_to_obj(cfg: dict, feats: np.ndarray) -> dict:
    return {
        "format": MEASUREMENTS_FORMAT,
        "pipeline": "wifi_rssi_rspd",
        "shape": list(feats.shape),
        "features": real_to_json(feats.reshape(-1)),
    }


def measurements_from_obj(cfg: dict, obj: dict) -> np.ndarray:
    if obj.get("format") != MEASUREMENTS_FORMAT or obj.get("pipeline") != "wifi_rssi_rspd":
        raise ConfigError("measurement file does not hold power/phase features")
    shape = tuple(obj.get("shape", ()))
    data = np.asarray(obj.get("features", []), dtype=float)
    if len(shape) != 4 or data.size == 0:
        raise ConfigError("measurement set is empty")
    scn = cfg["scenario"]
    expect = (len(build_grid(cfg)), scn["train_snapshots"], len(scn["sensors"]), 2)
    if shape != expect or data.size != int(np.prod(shape)):
        raise ConfigError(f"measurement shape {shape} does not match the scenario {expect}")
    return data.reshape(shape)


def load_measurements(cfg: dict) -> np.ndarray:
    path = cfg["scenario"]["measurements"]
    if path is None:
        return simulate_measurements(cfg)
    with open(path, "r", encoding="utf-8") as fh:
        return measurements_from_obj(cfg, json.load(fh))


def build_database(cfg: dict, feats: np.ndarray) -> FingerprintDatabase:
    """Gamma power model and von Mises phase model per sensor per grid point."""
    scn = cfg["scenario"]
    grid = build_grid(cfg)
    entries = []
    for p in range(feats.shape[0]):
        entry = {}
        for s in range(feats.shape[2]):
            entry[f"rssi:{s}"] = fit_gamma(feats[p, :, s, 0])
            entry[f"rspd:{s}"] = fit_vonmises(feats[p, :, s, 1])
        entries.append(entry)
    meta = DatabaseMeta(train_freqs_hz=(scn["freq_hz"],),
                        train_bandwidths_hz=(scn["bandwidth_hz"],),
                        extra={"pipeline": "wifi_rssi_rspd",
                               "snapshots": feats.shape[1]})
    return FingerprintDatabase(grid=grid, entries=entries, meta=meta)


def generate_walk(cfg: dict) -> np.ndarray:
    """Reflecting Gaussian random walk inside the room, shape (steps+1, 2)."""
    scn = cfg["scenario"]
    x0, y0, x1, y1 = room_bounds(cfg)
    rng = np.random.default_rng(derive_seed(cfg["seed"], _TAG_WALK))
    pos = np.array(scn["walk"]["start"], dtype=float)
    path = [pos.copy()]
    sigma = scn["walk"]["step_sigma_m"]
    for _ in range(scn["walk"]["steps"]):
        pos = pos + rng.normal(0.0, sigma, size=2)
        # one bounce off each wall keeps the walk inside for small steps
        if pos[0] < x0:
            pos[0] = 2 * x0 - pos[0]
        if pos[0] > x1:
            pos[0] = 2 * x1 - pos[0]
        if pos[1] < y0:
            pos[1] = 2 * y0 - pos[1]
        if pos[1] > y1:
            pos[1] = 2 * y1 - pos[1]
        pos = np.clip(pos, (x0, y0), (x1, y1))
        path.append(pos.copy())
    return np.array(path)


def step_features(cfg: dict, path: np.ndarray, t: int) -> list:
    """Feature pairs [(key, value), ...] measured at walk position t."""
    tx = Position(path[t, 0], path[t, 1])
    bits_seed = derive_seed(cfg["seed"], _TAG_WALK_BITS, t)
    feats = measure_features(cfg, tx, t, bits_seed, (_TAG_WALK_NOISE, t))
    out = []
    for s in range(feats.shape[0]):
        out.append((f"rssi:{s}", float(feats[s, 0])))
        out.append((f"rspd:{s}", float(feats[s, 1])))
    return out


def _split(features: list, prefix: str) -> list:
    return [(k, v) for k, v in features if k.startswith(prefix)]


def evaluate_walk(cfg: dict, db: FingerprintDatabase, with_pf: bool) -> tuple:
    """Per-step errors of the static matchers (and the particle filter).

    Steps are indexed 1..T; a zero-step walk yields no rows.  The particle
    filter starts uniform over the room, advances by the noisy dead-reckoning
    step, and is reweighted by the combined power+phase likelihood map.
    """
    scn = cfg["scenario"]
    path = generate_walk(cfg)
    n_steps = scn["walk"]["steps"]
    pts = db.grid.as_array()

    ps = None
    pdr = None
    if with_pf and n_steps > 0:
        tr = cfg["tracking"]
        pdr = simulate_pdr([Position(x, y) for x, y in path],
                           tr["pdr_sigma_m"], derive_seed(cfg["seed"], _TAG_PDR))
        rng = np.random.default_rng(derive_seed(cfg["seed"], _TAG_PF, 0))
        x0, y0, x1, y1 = room_bounds(cfg)
        positions = rng.uniform((x0, y0), (x1, y1), size=(tr["particles"], 2))
        ps = ParticleSet(positions=positions,
                         weights=np.full(tr["particles"], 1.0 / tr["particles"]))

    rows = []
    errors = {"rssi": [], "rspd": [], "rssi_rspd": [], "pf": []}
    for t in range(1, n_steps + 1):
        features = step_features(cfg, path, t)
        true = path[t]
        row = [t, float(true[0]), float(true[1])]
        for method, feats in (("rssi", _split(features, "rssi:")),
                              ("rspd", _split(features, "rspd:")),
                              ("rssi_rspd", features)):
            _, idx = mle_rssi_rspd(feats, db)
            err = float(np.hypot(*(pts[idx] - true)))
            errors[method].append(err)
            row.append(err)
        if ps is not None:
            ps = particle_predict(ps, pdr[t - 1], cfg["tracking"]["pdr_sigma_m"],
                                  derive_seed(cfg["seed"], _TAG_PF, 1, t))
            ps, est = particle_update(ps, features, db,
                                      seed=derive_seed(cfg["seed"], _TAG_PF, 2, t))
            err = float(math.hypot(est.x - true[0], est.y - true[1]))
            errors["pf"].append(err)
            row.extend([float(est.x), float(est.y), err])
        rows.append(tuple(row))

    methods = ["rssi", "rspd", "rssi_rspd"] + (["pf"] if with_pf else [])
    summary = {"methods": {m: summarize_errors(errors[m]) for m in methods},
               "steps": n_steps}
    if n_steps > 0:
        summary["cdf"] = {m: cdf_table(errors[m]) for m in methods}
    if with_pf and n_steps > 0:
        means = {m: summary["methods"][m]["mean"] for m in methods}
        summary["ordering"] = {
            "rssi_ge_rspd": means["rssi"] >= means["rspd"],
            "rspd_ge_combined": means["rspd"] >= means["rssi_rspd"],
            "combined_ge_pf": means["rssi_rspd"] >= means["pf"],
            "pf_gain_rel": (means["rssi_rspd"] - means["pf"]) / means["rssi_rspd"]
            if means["rssi_rspd"] > 0 else 0.0,
        }
    return rows, summary


def _load_db(cfg: dict, out_dir: str) -> FingerprintDatabase:
    path = os.path.join(out_dir, "db.json")
    if not os.path.exists(path):
        cmd_learn(cfg, out_dir)
    return load_database(path)


def cmd_simulate(cfg: dict, out_dir: str) -> dict:
    feats = simulate_measurements(cfg)
    write_json(os.path.join(out_dir, "measurements.json"), measurements_to_obj(cfg, feats))
    summary = {"points": feats.shape[0], "snapshots": feats.shape[1],
               "sensors": feats.shape[2]}
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def cmd_learn(cfg: dict, out_dir: str) -> dict:
    feats = load_measurements(cfg)
    db = build_database(cfg, feats)
    save_database(db, os.path.join(out_dir, "db.json"))
    log = {"points": len(db), "sensors": feats.shape[2],
           "per_point_samples": [int(feats.shape[1])] * len(db)}
    write_json(os.path.join(out_dir, "learn_log.json"), log)
    return log


def cmd_localize(cfg: dict, out_dir: str) -> dict:
    db = _load_db(cfg, out_dir)
    rows, summary = evaluate_walk(cfg, db, with_pf=False)
    header = ("step", "true_x", "true_y", "err_rssi", "err_rspd", "err_rssi_rspd")
    write_csv(os.path.join(out_dir, "trials.csv"), header, rows)
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def cmd_track(cfg: dict, out_dir: str) -> dict:
    db = _load_db(cfg, out_dir)
    rows, summary = evaluate_walk(cfg, db, with_pf=True)
    header = ("step", "true_x", "true_y", "err_rssi", "err_rspd",
              "err_rssi_rspd", "est_x", "est_y", "err_pf")
    write_csv(os.path.join(out_dir, "track.csv"), header, rows)
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary
