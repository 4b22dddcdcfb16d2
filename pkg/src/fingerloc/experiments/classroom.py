"""Classroom study: seat-level localization from channel-response fingerprints.

A 12x12 seat grid is surveyed by five wall/ceiling sensors (four corner
antennas plus a three-element circular array in the center).  Fingerprints
are cross-correlations of per-antenna channel impulse responses for every
antenna pair; matching is Gaussian maximum likelihood over the grid, with a
received-power Euclidean matcher as the baseline.  Evaluation is
leave-one-out over the per-seat snapshots.
"""

import json
import math
import os

import numpy as np

from ..database import (
    DatabaseMeta,
    FingerprintDatabase,
    complex_from_json,
    complex_to_json,
    save_database,
)
from ..errors import ConfigError
from ..features import cir_xcorr_fingerprint
from ..geometry import Grid, Position, build_uniform_grid
from ..signals import Cir, FingerprintKind, FingerprintMeta, FingerprintVector
from ..simulate import ChannelModel, derive_seed, gen_cir
from ..stats import fit_gaussian, gaussian_loglik
from ..matching import mle_cir
from .common import cdf_table, summarize_errors, write_csv, write_json

MEASUREMENTS_FORMAT = "fingerloc-measurements-1"
_TAG_CIR_NOISE = 101


def build_grid(cfg: dict) -> Grid:
    g = cfg["scenario"]["grid"]
    origin = Position(g["origin"][0], g["origin"][1])
    return build_uniform_grid(origin, g["nx"], g["ny"], g["spacing_m"])


def antenna_layout(cfg: dict) -> tuple:
    """Four corner antennas just outside the seat grid plus the center array."""
    scn = cfg["scenario"]
    g = scn["grid"]
    x0, y0 = g["origin"]
    x1 = x0 + (g["nx"] - 1) * g["spacing_m"]
    y1 = y0 + (g["ny"] - 1) * g["spacing_m"]
    off = scn["corner_offset_m"]
    antennas = [
        Position(x0 - off, y0 - off),
        Position(x1 + off, y0 - off),
        Position(x0 - off, y1 + off),
        Position(x1 + off, y1 + off),
    ]
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    n = scn["uca"]["elements"]
    r = scn["uca"]["radius_m"]
    for k in range(n):
        ang = 2.0 * math.pi * k / n
        antennas.append(Position(cx + r * math.cos(ang), cy + r * math.sin(ang)))
    return tuple(antennas)


def pair_keys(n_antennas: int) -> list:
    return [f"xc:{i}-{j}" for i in range(n_antennas) for j in range(i + 1, n_antennas)]


def simulate_measurements(cfg: dict) -> np.ndarray:
    """Noisy per-antenna channel responses, shape (seats, snapshots, antennas, taps).

    Each snapshot redraws the diffuse paths and adds receiver noise at the
    configured per-snapshot SNR (noise power referenced to that response's
    own energy, so every snapshot meets the stated SNR exactly).
    """
    scn = cfg["scenario"]
    grid = build_grid(cfg)
    antennas = antenna_layout(cfg)
    model = ChannelModel(seed=cfg["seed"], **scn["channel"])
    snr = 10.0 ** (scn["snr_db"] / 10.0)
    n_snap, taps = scn["snapshots"], scn["tap_count"]
    out = np.empty((len(grid), n_snap, len(antennas), taps), dtype=complex)
    for s, seat in enumerate(grid.points):
        for k in range(n_snap):
            for a, ant in enumerate(antennas):
                cir = gen_cir(seat, ant, scn["freq_hz"], scn["bandwidth_hz"],
                              model, taps, snapshot=k)
                noise_power = float(np.mean(np.abs(cir.taps) ** 2)) / snr
                rng = np.random.default_rng(
                    derive_seed(cfg["seed"], _TAG_CIR_NOISE, s, k, a))
                noise = math.sqrt(noise_power / 2.0) * (
                    rng.standard_normal(taps) + 1j * rng.standard_normal(taps))
                out[s, k, a] = cir.taps + noise
    return out


def measurements_to_obj(cfg: dict, cirs: np.ndarray) -> dict:
    scn = cfg["scenario"]
    return {
        "format": MEASUREMENTS_FORMAT,
        "pipeline": "classroom_cir",
        "freq_hz": scn["freq_hz"],
        "bandwidth_hz": scn["bandwidth_hz"],
        "shape": list(cirs.shape),
        "cirs": complex_to_json(cirs.reshape(-1)),
    }


def measurements_from_obj(cfg: dict, obj: dict) -> np.ndarray:
    if obj.get("format") != MEASUREMENTS_FORMAT or obj.get("pipeline") != "classroom_cir":
        raise ConfigError("measurement file does not hold classroom channel responses")
    shape = tuple(obj.get("shape", ()))
    data = complex_from_json(obj.get("cirs", []))
    if len(shape) != 4 or data.size == 0:
        raise ConfigError("measurement set is empty")
    scn = cfg["scenario"]
    grid = build_grid(cfg)
    expect = (len(grid), scn["snapshots"], len(antenna_layout(cfg)), scn["tap_count"])
    if shape != expect or data.size != int(np.prod(shape)):
        raise ConfigError(f"measurement shape {shape} does not match the scenario {expect}")
    return data.reshape(shape)


def load_measurements(cfg: dict) -> np.ndarray:
    """Measurements from the configured file, or simulated in-process."""
    path = cfg["scenario"]["measurements"]
    if path is None:
        return simulate_measurements(cfg)
    with open(path, "r", encoding="utf-8") as fh:
        return measurements_from_obj(cfg, json.load(fh))


def extract_features(cfg: dict, cirs: np.ndarray) -> tuple:
    """Per-snapshot pair fingerprints and per-antenna received powers.

    Returns:
        (xc, rssi): complex (seats, snapshots, pairs, 2*taps-1) and real
        (seats, snapshots, antennas).
    """
    scn = cfg["scenario"]
    n_seats, n_snap, n_ant, taps = cirs.shape
    pairs = [(i, j) for i in range(n_ant) for j in range(i + 1, n_ant)]
    xc = np.empty((n_seats, n_snap, len(pairs), 2 * taps - 1), dtype=complex)
    rssi = np.empty((n_seats, n_snap, n_ant))
    for s in range(n_seats):
        for k in range(n_snap):
            snap = [Cir(taps=cirs[s, k, a], bandwidth_hz=scn["bandwidth_hz"])
                    for a in range(n_ant)]
            for p, (i, j) in enumerate(pairs):
                fp = _pair_fingerprint(snap[i], snap[j])
                xc[s, k, p] = fp.values
            rssi[s, k] = np.sum(np.abs(cirs[s, k]) ** 2, axis=1)
    return xc, rssi


def _pair_fingerprint(cir_i: Cir, cir_j: Cir) -> FingerprintVector:
    return cir_xcorr_fingerprint(cir_i, cir_j)


def build_database(cfg: dict, xc: np.ndarray, rssi: np.ndarray) -> FingerprintDatabase:
    """Fit the per-seat Gaussian pair models and mean-power baseline vectors."""
    scn = cfg["scenario"]
    grid = build_grid(cfg)
    keys = pair_keys(_n_antennas(xc))
    entries = []
    for s in range(xc.shape[0]):
        entry = {}
        for p, key in enumerate(keys):
            entry[key] = fit_gaussian(xc[s, :, p, :], cfg["matching"]["loading_eps"])
        entry["rssi"] = FingerprintVector(
            kind=FingerprintKind.RSSI,
            values=rssi[s].mean(axis=0),
            meta=FingerprintMeta(freq_hz=scn["freq_hz"], bandwidth_hz=scn["bandwidth_hz"]),
        )
        entries.append(entry)
    meta = DatabaseMeta(train_freqs_hz=(scn["freq_hz"],),
                        train_bandwidths_hz=(scn["bandwidth_hz"],),
                        extra={"pipeline": "classroom_cir", "snapshots": xc.shape[1]})
    return FingerprintDatabase(grid=grid, entries=entries, meta=meta)


def _n_antennas(xc: np.ndarray) -> int:
    # pairs = n*(n-1)/2 inverted
    n_pairs = xc.shape[2]
    n = int(round((1 + math.sqrt(1 + 8 * n_pairs)) / 2))
    if n * (n - 1) // 2 != n_pairs:
        raise ValueError(f"pair count {n_pairs} is not a full antenna pairing")
    return n


def cmd_simulate(cfg: dict, out_dir: str) -> dict:
    cirs = simulate_measurements(cfg)
    write_json(os.path.join(out_dir, "measurements.json"), measurements_to_obj(cfg, cirs))
    summary = {"seats": cirs.shape[0], "snapshots": cirs.shape[1],
               "antennas": cirs.shape[2], "taps": cirs.shape[3]}
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def cmd_learn(cfg: dict, out_dir: str) -> dict:
    cirs = load_measurements(cfg)
    xc, rssi = extract_features(cfg, cirs)
    db = build_database(cfg, xc, rssi)
    save_database(db, os.path.join(out_dir, "db.json"))
    log = {
        "points": len(db),
        "pairs": len(pair_keys(cirs.shape[2])),
        "per_point_samples": [int(cirs.shape[1])] * len(db),
    }
    write_json(os.path.join(out_dir, "learn_log.json"), log)
    return log


def evaluate_loo(cfg: dict, cirs: np.ndarray) -> tuple:
    """Leave-one-out evaluation over every (seat, snapshot) trial.

    For the true seat the database's Gaussian statistics (and the baseline's
    mean power) are refit on the remaining snapshots, so a trial never
    matches against a model trained on itself.

    Returns:
        (rows, summary): CSV rows for both methods and the summary dict.
    """
    xc, rssi = extract_features(cfg, cirs)
    grid = build_grid(cfg)
    loading = cfg["matching"]["loading_eps"]
    n_seats, n_snap, n_pairs, dim = xc.shape
    n_trials = n_seats * n_snap
    flat = xc.reshape(n_trials, n_pairs, dim)

    scores = np.zeros((n_trials, n_seats))
    for s in range(n_seats):
        for p in range(n_pairs):
            stats = fit_gaussian(xc[s, :, p, :], loading)
            scores[:, s] += gaussian_loglik(flat[:, p, :], stats)
    for s in range(n_seats):
        for k in range(n_snap):
            t = s * n_snap + k
            fold = np.delete(np.arange(n_snap), k)
            total = 0.0
            for p in range(n_pairs):
                stats = fit_gaussian(xc[s, fold, p, :], loading)
                total += float(gaussian_loglik(xc[s, k, p, :], stats))
            scores[t, s] = total
    est_mle = np.argmax(scores, axis=1)

    means = rssi.mean(axis=1)  # (seats, antennas)
    flat_r = rssi.reshape(n_trials, -1)
    d2 = ((flat_r[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    for s in range(n_seats):
        for k in range(n_snap):
            t = s * n_snap + k
            fold_mean = (n_snap * means[s] - rssi[s, k]) / (n_snap - 1)
            d2[t, s] = ((rssi[s, k] - fold_mean) ** 2).sum()
    est_rssi = np.argmin(d2, axis=1)

    pts = grid.as_array()
    rows = []
    errors = {"cir_mle": [], "rssi_euclid": []}
    for method, est in (("cir_mle", est_mle), ("rssi_euclid", est_rssi)):
        for t in range(n_trials):
            s, k = divmod(t, n_snap)
            e = int(est[t])
            err = float(np.hypot(*(pts[e] - pts[s])))
            errors[method].append(err)
            rows.append((method, s, k, pts[s, 0], pts[s, 1], e, pts[e, 0], pts[e, 1], err))
    summary = {
        "methods": {m: summarize_errors(v) for m, v in errors.items()},
        "cdf": {m: cdf_table(v) for m, v in errors.items()},
        "grid_spacing_m": cfg["scenario"]["grid"]["spacing_m"],
        "trials_per_method": n_trials,
    }
    return rows, summary


def cmd_localize(cfg: dict, out_dir: str) -> dict:
    cirs = load_measurements(cfg)
    rows, summary = evaluate_loo(cfg, cirs)
    header = ("method", "seat", "snapshot", "true_x", "true_y",
              "est_index", "est_x", "est_y", "error_m")
    write_csv(os.path.join(out_dir, "trials.csv"), header, rows)
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def localize_one(cfg: dict, db: FingerprintDatabase, cirs_snapshot: np.ndarray) -> int:
    """Match one snapshot of per-antenna responses against a learned database."""
    scn = cfg["scenario"]
    n_ant = cirs_snapshot.shape[0]
    snap = [Cir(taps=cirs_snapshot[a], bandwidth_hz=scn["bandwidth_hz"])
            for a in range(n_ant)]
    keys = pair_keys(n_ant)
    target = []
    p = 0
    for i in range(n_ant):
        for j in range(i + 1, n_ant):
            target.append((keys[p], _pair_fingerprint(snap[i], snap[j])))
            p += 1
    _, idx = mle_cir(target, db)
    return idx
