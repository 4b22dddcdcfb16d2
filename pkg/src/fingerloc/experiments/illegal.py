"""Unknown-emitter study: localize an off-training-frequency transmitter.

Three circular-array sensors learn raw-signal correlation and
phase-difference fingerprints at a few training frequencies on a coarse
grid.  The database is then projected to the emitter's frequency and
bandwidth, densified spatially, and power-normalized so the emitter's
unknown transmit power cancels.  Matching fuses the two fingerprint kinds
with a weight gamma that is swept, since no principled value exists.
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
    load_database,
    real_to_json,
    save_database,
)
from ..errors import ConfigError
from ..features import phasediff_fingerprint, rx_xcorr_fingerprint
from ..geometry import Grid, Position, build_uniform_grid
from ..interp import (
    UcaGeometry,
    bandwidth_interp,
    freq_interp_xcorr,
    normalize_power,
    phasediff_freq_interp,
    spatial_densify,
    windowed_sinc_lowpass,
)
from ..matching import (
    MODE_SQUARED_ERROR,
    HybridConfig,
    LikelihoodMap,
    fingerprint_sqerr,
    hybrid_match,
)
from ..signals import (
    Cir,
    FingerprintKind,
    FingerprintMeta,
    FingerprintVector,
    SignalBuffer,
)
from ..simulate import ChannelModel, TxSignalSpec, derive_seed, gen_cir, synthesize_rx
from .common import cdf_table, summarize_errors, write_csv, write_json

MEASUREMENTS_FORMAT = "fingerloc-measurements-1"
_TAG_TRAIN_BITS = 401
_TAG_TRAIN_NOISE = 402
_TAG_TRIALS = 403
_TAG_TRIAL_BITS = 404
_TAG_TRIAL_NOISE = 405

ELEMENT_PAIRS = ((0, 1), (0, 2), (1, 2))


def build_grid(cfg: dict) -> Grid:
    g = cfg["scenario"]["grid"]
    return build_uniform_grid(Position(*g["origin"]), g["nx"], g["ny"], g["spacing_m"])


def fine_grid(cfg: dict) -> Grid:
    """Densified grid sharing the training hull."""
    g = cfg["scenario"]["grid"]
    f = cfg["scenario"]["densify_factor"]
    return build_uniform_grid(Position(*g["origin"]),
                              (g["nx"] - 1) * f + 1, (g["ny"] - 1) * f + 1,
                              g["spacing_m"] / f)


def uca_geom(cfg: dict) -> UcaGeometry:
    u = cfg["scenario"]["uca"]
    return UcaGeometry(n_elements=u["elements"], radius_m=u["radius_m"])


def sensor_elements(cfg: dict) -> list:
    """Per sensor, its circular-array element positions."""
    geom = uca_geom(cfg)
    out = []
    for sx, sy in cfg["scenario"]["sensors"]:
        elems = []
        for k in range(geom.n_elements):
            ang = 2.0 * math.pi * k / geom.n_elements
            elems.append(Position(sx + geom.radius_m * math.cos(ang),
                                  sy + geom.radius_m * math.sin(ang)))
        out.append(elems)
    return out


def xcorr_keys(cfg: dict) -> list:
    n = cfg["scenario"]["uca"]["elements"]
    return [f"xc:{si}:{a}-{b}"
            for si in range(len(cfg["scenario"]["sensors"]))
            for a in range(n) for b in range(a, n)]


def phase_keys(cfg: dict) -> list:
    return [f"pd:{si}" for si in range(len(cfg["scenario"]["sensors"]))]


def _element_pairs(n: int) -> tuple:
    return tuple((a, b) for a in range(n) for b in range(a + 1, n))


def measure_buffers(cfg: dict, tx: Position, freq_hz: float, pulse: tuple,
                    snapshot: int, bits_seed, noise_parts, power_scale: float) -> list:
    """Received buffers per sensor element, [[SignalBuffer x elements] x sensors].

    One shared bit stream reaches every element; per-element noise is drawn
    at the configured SNR relative to that element's own clean signal power,
    so scaling the transmit power rescales the buffers without reshaping
    them.
    """
    scn = cfg["scenario"]
    model = ChannelModel(seed=cfg["seed"], **scn["channel"])
    spec = TxSignalSpec(kind="random_bits", length=scn["bits"], pulse=pulse,
                        sample_rate_hz=scn["sample_rate_hz"])
    snr = 10.0 ** (scn["snr_db"] / 10.0)
    amp = math.sqrt(power_scale)
    out = []
    for si, elems in enumerate(sensor_elements(cfg)):
        bufs = []
        for ai, elem in enumerate(elems):
            cir = gen_cir(tx, elem, freq_hz, scn["sample_rate_hz"], model,
                          scn["tap_count"], snapshot=snapshot)
            cir = Cir(taps=cir.taps * amp, bandwidth_hz=cir.bandwidth_hz)
            clean = synthesize_rx(cir, spec, 0.0, bits_seed)
            noise_power = float(np.mean(np.abs(clean.samples) ** 2)) / snr
            rng = np.random.default_rng(
                derive_seed(cfg["seed"], *noise_parts, si, ai))
            noise = math.sqrt(noise_power / 2.0) * (
                rng.standard_normal(clean.samples.size)
                + 1j * rng.standard_normal(clean.samples.size))
            bufs.append(SignalBuffer(samples=clean.samples + noise,
                                     sample_rate_hz=clean.sample_rate_hz))
        out.append(bufs)
    return out


def extract_fingerprints(cfg: dict, buffers: list, freq_hz: float,
                         bandwidth_hz: float) -> tuple:
    """(xcorr vectors, phase vectors) keyed like the database entries."""
    scn = cfg["scenario"]
    max_lag = scn["tap_count"] - 1
    n = scn["uca"]["elements"]
    xc = {}
    pd = {}
    for si, bufs in enumerate(buffers):
        for a in range(n):
            for b in range(a, n):
                meta = FingerprintMeta(pair=(a, b), sensor=si, freq_hz=freq_hz,
                                       bandwidth_hz=bandwidth_hz)
                xc[f"xc:{si}:{a}-{b}"] = rx_xcorr_fingerprint(
                    bufs[a], bufs[b], max_lag, meta=meta)
        meta = FingerprintMeta(sensor=si, pairs=_element_pairs(n),
                               freq_hz=freq_hz, bandwidth_hz=bandwidth_hz)
        pd[f"pd:{si}"] = phasediff_fingerprint(bufs, _element_pairs(n), meta=meta)
    return xc, pd


def simulate_training(cfg: dict) -> tuple:
    """Training fingerprints at every (point, frequency, snapshot).

    Returns:
        (xc, ph): complex (freqs, points, snaps, xcorr keys, lag dim) and
        real (freqs, points, snaps, sensors, element pairs).
    """
    scn = cfg["scenario"]
    grid = build_grid(cfg)
    freqs = scn["train_freqs_hz"]
    n_snap = scn["train_snapshots"]
    xkeys = xcorr_keys(cfg)
    dim = 2 * scn["tap_count"] - 1
    n_sens = len(scn["sensors"])
    n_pairs = len(ELEMENT_PAIRS)
    xc = np.empty((len(freqs), len(grid), n_snap, len(xkeys), dim), dtype=complex)
    ph = np.empty((len(freqs), len(grid), n_snap, n_sens, n_pairs))
    for fi, freq in enumerate(freqs):
        for p, point in enumerate(grid.points):
            for k in range(n_snap):
                bits_seed = derive_seed(cfg["seed"], _TAG_TRAIN_BITS, fi, p, k)
                bufs = measure_buffers(cfg, point, freq, (1.0,), k, bits_seed,
                                       (_TAG_TRAIN_NOISE, fi, p, k), 1.0)
                xfp, pfp = extract_fingerprints(cfg, bufs, freq,
                                                scn["train_bandwidth_hz"])
                for ki, key in enumerate(xkeys):
                    xc[fi, p, k, ki] = xfp[key].values
                for si in range(n_sens):
                    ph[fi, p, k, si] = pfp[f"pd:{si}"].values
    return xc, ph


def measurements_to_obj(cfg: dict, xc: np.ndarray, ph: np.ndarray) -> dict:
    return {
        "format": MEASUREMENTS_FORMAT,
        "pipeline": "illegal_hybrid",
        "xcorr_shape": list(xc.shape),
        "xcorr": complex_to_json(xc.reshape(-1)),
        "phase_shape": list(ph.shape),
        "phase": real_to_json(ph.reshape(-1)),
    }


def measurements_from_obj(cfg: dict, obj: dict) -> tuple:
    if obj.get("format") != MEASUREMENTS_FORMAT or obj.get("pipeline") != "illegal_hybrid":
        raise ConfigError("measurement file does not hold training fingerprints")
    xshape = tuple(obj.get("xcorr_shape", ()))
    pshape = tuple(obj.get("phase_shape", ()))
    xdata = complex_from_json(obj.get("xcorr", []))
    pdata = np.asarray(obj.get("phase", []), dtype=float)
    if len(xshape) != 5 or xdata.size == 0:
        raise ConfigError("measurement set is empty")
    scn = cfg["scenario"]
    expect_x = (len(scn["train_freqs_hz"]), len(build_grid(cfg)),
                scn["train_snapshots"], len(xcorr_keys(cfg)),
                2 * scn["tap_count"] - 1)
    expect_p = expect_x[:3] + (len(scn["sensors"]), len(ELEMENT_PAIRS))
    if xshape != expect_x or pshape != expect_p:
        raise ConfigError("measurement shapes do not match the scenario")
    if xdata.size != int(np.prod(xshape)) or pdata.size != int(np.prod(pshape)):
        raise ConfigError("measurement payload does not match its declared shape")
    return xdata.reshape(xshape), pdata.reshape(pshape)


def load_training(cfg: dict) -> tuple:
    path = cfg["scenario"]["measurements"]
    if path is None:
        return simulate_training(cfg)
    with open(path, "r", encoding="utf-8") as fh:
        return measurements_from_obj(cfg, json.load(fh))


def build_database(cfg: dict, xc: np.ndarray, ph: np.ndarray) -> FingerprintDatabase:
    """Snapshot-averaged training fingerprints projected to the emitter.

    Per point: frequency projection of every correlation fingerprint to the
    target frequency, bandwidth narrowing to the target bandwidth, and
    phase-difference re-projection via the fitted arrival azimuth; then
    spatial densification onto the fine grid and per-point power
    normalization.
    """
    scn = cfg["scenario"]
    grid = build_grid(cfg)
    geom = uca_geom(cfg)
    freqs = list(scn["train_freqs_hz"])
    t_freq = scn["target"]["freq_hz"]
    t_bw = scn["target"]["bandwidth_hz"]
    train_bw = scn["train_bandwidth_hz"]
    xkeys = xcorr_keys(cfg)
    pkeys = phase_keys(cfg)
    nearest_fi = int(np.argmin(np.abs(np.asarray(freqs) - t_freq)))
    n = geom.n_elements

    xc_avg = xc.mean(axis=2)  # (freqs, points, keys, dim)
    ph_avg = np.angle(np.exp(1j * ph).sum(axis=2))  # circular mean

    entries = []
    confidences = {key: np.empty(len(grid)) for key in pkeys}
    for p in range(len(grid)):
        entry = {}
        for ki, key in enumerate(xkeys):
            fps = [
                FingerprintVector(
                    kind=FingerprintKind.RX_XCORR, values=xc_avg[fi, p, ki],
                    meta=FingerprintMeta(freq_hz=freqs[fi], bandwidth_hz=train_bw))
                for fi in range(len(freqs))
            ]
            fp = freq_interp_xcorr(freqs, fps, t_freq)
            entry[key] = bandwidth_interp(fp, train_bw, t_bw)
        for si, key in enumerate(pkeys):
            fp = FingerprintVector(
                kind=FingerprintKind.PHASE_DIFF, values=ph_avg[nearest_fi, p, si],
                meta=FingerprintMeta(sensor=si, pairs=_element_pairs(n),
                                     freq_hz=freqs[nearest_fi], bandwidth_hz=train_bw))
            proj = phasediff_freq_interp(fp, geom, freqs[nearest_fi], t_freq)
            entry[key] = proj.vector
            confidences[key][p] = proj.confidence
        entries.append(entry)

    meta = DatabaseMeta(
        train_freqs_hz=tuple(float(f) for f in freqs),
        train_bandwidths_hz=(float(train_bw),),
        extra={"pipeline": "illegal_hybrid", "target_freq_hz": float(t_freq),
               "target_bandwidth_hz": float(t_bw)},
    )
    coarse = FingerprintDatabase(grid=grid, entries=entries, meta=meta)
    dense = spatial_densify(coarse, fine_grid(cfg), confidences=confidences)
    for entry in dense.entries:
        normalized = normalize_power([entry[key] for key in xkeys])
        for key, fp in zip(xkeys, normalized):
            entry[key] = fp
    return dense


def draw_trials(cfg: dict) -> np.ndarray:
    """Uniform emitter positions inside the training hull, shape (trials, 2)."""
    g = cfg["scenario"]["grid"]
    x0, y0 = g["origin"]
    x1 = x0 + (g["nx"] - 1) * g["spacing_m"]
    y1 = y0 + (g["ny"] - 1) * g["spacing_m"]
    rng = np.random.default_rng(derive_seed(cfg["seed"], _TAG_TRIALS))
    return rng.uniform((x0, y0), (x1, y1), size=(cfg["evaluation"]["trials"], 2))


def trial_fingerprints(cfg: dict, trial: int, tx: Position) -> tuple:
    """Normalized emitter fingerprints for one trial."""
    scn = cfg["scenario"]
    t_freq = scn["target"]["freq_hz"]
    t_bw = scn["target"]["bandwidth_hz"]
    # Complex baseband at the critically sampled rate: a bandwidth of B
    # occupies |f| < B/2 of the fs/2 Nyquist band, so the cutoff is B / fs.
    ratio = t_bw / scn["sample_rate_hz"]
    pulse = tuple(windowed_sinc_lowpass(ratio, scn["pulse_taps"]))
    bits_seed = derive_seed(cfg["seed"], _TAG_TRIAL_BITS, trial)
    bufs = measure_buffers(cfg, tx, t_freq, pulse, trial, bits_seed,
                           (_TAG_TRIAL_NOISE, trial),
                           scn["target"]["tx_power_scale"])
    xc, pd = extract_fingerprints(cfg, bufs, t_freq, t_bw)
    xkeys = xcorr_keys(cfg)
    normalized = normalize_power([xc[key] for key in xkeys])
    return dict(zip(xkeys, normalized)), pd


def error_maps(cfg: dict, db: FingerprintDatabase, xc: dict, pd: dict) -> tuple:
    """Summed squared-error maps over the database grid for both kinds."""
    mcfg = cfg["matching"]
    vx = np.zeros(len(db.grid))
    vp = np.zeros(len(db.grid))
    for i, entry in enumerate(db.entries):
        for key, fp in xc.items():
            vx[i] += fingerprint_sqerr(fp, entry[key],
                                       magnitude_only=mcfg["magnitude_only"],
                                       include_zero_lag=mcfg["include_zero_lag"])
        for key, fp in pd.items():
            vp[i] += fingerprint_sqerr(fp, entry[key])
    return (LikelihoodMap(grid=db.grid, values=vx, mode=MODE_SQUARED_ERROR),
            LikelihoodMap(grid=db.grid, values=vp, mode=MODE_SQUARED_ERROR))


def evaluate(cfg: dict, db: FingerprintDatabase) -> tuple:
    """All trials x {pure xcorr, pure phasediff, hybrid per gamma}."""
    trials = draw_trials(cfg)
    sweep = list(cfg["evaluation"]["gamma_sweep"])
    pts = db.grid.as_array()
    rows = []
    errors = {"xcorr": [], "phasediff": []}
    hybrid_errors = {g: [] for g in sweep}
    endpoint_x = True
    endpoint_p = True
    for t, (tx_x, tx_y) in enumerate(trials):
        tx = Position(float(tx_x), float(tx_y))
        xc, pd = trial_fingerprints(cfg, t, tx)
        err_x, err_p = error_maps(cfg, db, xc, pd)
        idx_x = err_x.argbest()
        idx_p = err_p.argbest()
        for method, idx in (("xcorr", idx_x), ("phasediff", idx_p)):
            e = float(np.hypot(pts[idx, 0] - tx.x, pts[idx, 1] - tx.y))
            errors[method].append(e)
            rows.append((t, method, "", tx.x, tx.y, idx, pts[idx, 0], pts[idx, 1], e))
        for g in sweep:
            cfg_h = HybridConfig(gamma=float(g),
                                 magnitude_only=cfg["matching"]["magnitude_only"],
                                 include_zero_lag=cfg["matching"]["include_zero_lag"])
            idx, _ = hybrid_match(err_x, err_p, cfg_h)
            e = float(np.hypot(pts[idx, 0] - tx.x, pts[idx, 1] - tx.y))
            hybrid_errors[g].append(e)
            rows.append((t, "hybrid", float(g), tx.x, tx.y, idx,
                         pts[idx, 0], pts[idx, 1], e))
            if g == sweep[0]:
                endpoint_x = endpoint_x and idx == idx_x
            if g == sweep[-1]:
                endpoint_p = endpoint_p and idx == idx_p

    med = {m: float(np.median(v)) for m, v in errors.items()}
    hybrid_med = {repr(float(g)): float(np.median(v)) for g, v in hybrid_errors.items()}
    best_gamma = min(hybrid_errors, key=lambda g: (float(np.median(hybrid_errors[g])), g))
    summary = {
        "trials": len(trials),
        "mean": {**{m: float(np.mean(v)) for m, v in errors.items()},
                 "hybrid": {repr(float(g)): float(np.mean(v))
                            for g, v in hybrid_errors.items()}},
        "median": {**med, "hybrid": hybrid_med},
        "cdf": {"xcorr": cdf_table(errors["xcorr"]),
                "phasediff": cdf_table(errors["phasediff"]),
                "hybrid_best": cdf_table(hybrid_errors[best_gamma])},
        "best_gamma": float(best_gamma),
        "best_hybrid_median": float(np.median(hybrid_errors[best_gamma])),
        "endpoints_exact": {"xcorr": endpoint_x, "phasediff": endpoint_p},
        "hybrid_beats_both": float(np.median(hybrid_errors[best_gamma]))
        <= min(med.values()),
    }
    return rows, summary


def _load_db(cfg: dict, out_dir: str) -> FingerprintDatabase:
    path = os.path.join(out_dir, "db.json")
    if not os.path.exists(path):
        cmd_learn(cfg, out_dir)
    return load_database(path)


def cmd_simulate(cfg: dict, out_dir: str) -> dict:
    xc, ph = simulate_training(cfg)
    write_json(os.path.join(out_dir, "measurements.json"),
               measurements_to_obj(cfg, xc, ph))
    summary = {"points": xc.shape[1], "freqs": xc.shape[0], "snapshots": xc.shape[2]}
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def cmd_learn(cfg: dict, out_dir: str) -> dict:
    xc, ph = load_training(cfg)
    db = build_database(cfg, xc, ph)
    save_database(db, os.path.join(out_dir, "db.json"))
    log = {"points": len(db), "derived": True,
           "per_point_samples": [int(xc.shape[2])] * xc.shape[1],
           "target_freq_hz": cfg["scenario"]["target"]["freq_hz"],
           "target_bandwidth_hz": cfg["scenario"]["target"]["bandwidth_hz"]}
    write_json(os.path.join(out_dir, "learn_log.json"), log)
    return log


def cmd_localize(cfg: dict, out_dir: str) -> dict:
    db = _load_db(cfg, out_dir)
    rows, summary = evaluate(cfg, db)
    header = ("trial", "method", "gamma", "true_x", "true_y",
              "est_index", "est_x", "est_y", "error_m")
    write_csv(os.path.join(out_dir, "trials.csv"), header, rows)
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary
