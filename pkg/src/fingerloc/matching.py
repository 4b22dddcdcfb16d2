"""Snapshot position estimation: likelihood maps, matchers, and hybrid combining."""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Grid
from .signals import FingerprintKind, FingerprintVector, wrap_angle
from .stats import (
    DetectionMap,
    GammaParams,
    GaussianStats,
    VonMisesParams,
    gamma_logpdf,
    gaussian_loglik,
    vonmises_logpdf,
)

__all__ = [
    "LikelihoodMap",
    "HybridConfig",
    "mle_cir",
    "mle_rssi_rspd",
    "binary_likelihood",
    "threshold_set",
    "hybrid_match",
    "fingerprint_sqerr",
    "likelihood_map_csv",
]

MODE_LOG_LIKELIHOOD = "log_likelihood"
MODE_SQUARED_ERROR = "squared_error"

_CORRELATION_KINDS = (FingerprintKind.CIR_XCORR, FingerprintKind.RX_XCORR)
_ANGLE_KINDS = (FingerprintKind.RSPD, FingerprintKind.PHASE_DIFF)


@dataclass(frozen=True)
class LikelihoodMap:
    """One value per grid point, either a log-likelihood or a squared error."""

    grid: Grid
    values: np.ndarray
    mode: str = MODE_LOG_LIKELIHOOD

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.grid),):
            raise ValueError(
                f"need one value per grid point, got {values.shape} for {len(self.grid)}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("likelihood map values must be finite")
        if self.mode not in (MODE_LOG_LIKELIHOOD, MODE_SQUARED_ERROR):
            raise ValueError(f"unknown map mode {self.mode!r}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def argbest(self) -> int:
        """Index of the best grid point: argmax for log-likelihoods, argmin for errors."""
        if self.mode == MODE_LOG_LIKELIHOOD:
            return int(np.argmax(self.values))
        return int(np.argmin(self.values))


@dataclass(frozen=True)
class HybridConfig:
    """Weights and flags for combining correlation and phase error maps."""

    gamma: float = 1.0
    magnitude_only: bool = False
    include_zero_lag: bool = True

    def __post_init__(self):
        if not (self.gamma >= 0.0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and non-negative, got {self.gamma}")


def mle_cir(target_pairs, db) -> tuple:
    """Maximum-likelihood matching of correlation fingerprints.

    Args:
        target_pairs: iterable of ``(key, FingerprintVector)``; each key names
            the Gaussian model stored in every database entry.
        db: FingerprintDatabase whose entries hold GaussianStats per key.

    Returns:
        (map, index): the summed log-likelihood map over the grid and its
        argmax (lowest index on ties).
    """
    pairs = list(target_pairs)
    if len(pairs) == 0:
        raise ValueError("at least one target fingerprint is required")
    values = np.zeros(len(db.grid), dtype=float)
    for key, fp in pairs:
        for idx, entry in enumerate(db.entries):
            model = entry.get(key)
            if not isinstance(model, GaussianStats):
                raise ValueError(f"entry {idx} key {key!r} does not hold Gaussian statistics")
            values[idx] += gaussian_loglik(fp.values, model)
    lmap = LikelihoodMap(grid=db.grid, values=values, mode=MODE_LOG_LIKELIHOOD)
    return lmap, int(np.argmax(values))


def mle_rssi_rspd(target_features, db) -> tuple:
    """Maximum-likelihood matching of power/phase features.

    Args:
        target_features: iterable of ``(key, value)`` with RSSI features as
            positive linear powers and phase features in radians; the model
            type stored at each key (Gamma vs von Mises) selects the density.
        db: FingerprintDatabase with a fitted model per key per entry.

    Returns:
        (map, index) as in :func:`mle_cir`.
    """
    feats = list(target_features)
    if len(feats) == 0:
        raise ValueError("at least one target feature is required")
    values = np.zeros(len(db.grid), dtype=float)
    for key, value in feats:
        for idx, entry in enumerate(db.entries):
            model = entry.get(key)
            if isinstance(model, GammaParams):
                if value <= 0:
                    raise ValueError(f"feature {key!r} must be positive for a power model")
                values[idx] += gamma_logpdf(float(value), model)
            elif isinstance(model, VonMisesParams):
                values[idx] += vonmises_logpdf(float(value), model)
            else:
                raise ValueError(
                    f"entry {idx} key {key!r} holds no power or phase model"
                )
    lmap = LikelihoodMap(grid=db.grid, values=values, mode=MODE_LOG_LIKELIHOOD)
    return lmap, int(np.argmax(values))


def binary_likelihood(f: FingerprintVector, maps) -> LikelihoodMap:
    """Log-likelihood of a detection bit vector under per-sensor detection maps.

    Args:
        f: BINARY fingerprint, one bit per sensor.
        maps: one DetectionMap per sensor, all on the same grid.

    Returns:
        LikelihoodMap with ``sum_m b ln p_m + (1-b) ln(1-p_m)`` per cell.
    """
    maps = list(maps)
    if f.kind is not FingerprintKind.BINARY:
        raise ValueError("binary matching needs a BINARY fingerprint")
    if len(maps) != f.dim:
        raise ValueError(f"got {f.dim} bits but {len(maps)} detection maps")
    grid = maps[0].grid
    values = np.zeros(len(grid), dtype=float)
    for bit, dmap in zip(f.values, maps):
        if dmap.grid != grid:
            raise ValueError("all detection maps must share one grid")
        if bit:
            values += np.log(dmap.probs)
        else:
            values += np.log1p(-dmap.probs)
    return LikelihoodMap(grid=grid, values=values, mode=MODE_LOG_LIKELIHOOD)


def threshold_set(lmap: LikelihoodMap, eta: float) -> np.ndarray:
    """Grid indices whose value exceeds ``eta``; never empty.

    Falls back to the single best index when nothing clears the threshold,
    so the result always contains the argmax.
    """
    idx = np.nonzero(lmap.values > eta)[0]
    if idx.size == 0:
        return np.array([int(np.argmax(lmap.values))], dtype=int)
    return idx.astype(int)


def hybrid_match(err_xcorr: LikelihoodMap, err_phase: LikelihoodMap,
                 cfg: HybridConfig) -> tuple:
    """Combine correlation and phase squared-error maps.

    Returns:
        (index, map): argmin of ``err_xcorr + gamma * err_phase`` (lowest
        index on ties) and the combined squared-error map.
    """
    if err_xcorr.grid != err_phase.grid:
        raise ValueError("error maps must share one grid")
    if err_xcorr.mode != MODE_SQUARED_ERROR or err_phase.mode != MODE_SQUARED_ERROR:
        raise ValueError("hybrid matching combines squared-error maps")
    combined = err_xcorr.values + cfg.gamma * err_phase.values
    lmap = LikelihoodMap(grid=err_xcorr.grid, values=combined, mode=MODE_SQUARED_ERROR)
    return int(np.argmin(combined)), lmap


def fingerprint_sqerr(target: FingerprintVector, reference: FingerprintVector,
                      magnitude_only: bool = False,
                      include_zero_lag: bool = True) -> float:
    """Squared error between two fingerprints of the same kind and dimension.

    Angle-valued kinds use wrapped phase differences; correlation kinds use
    complex residuals, or magnitude residuals with ``magnitude_only``; the
    center (zero) lag of correlation kinds can be excluded to ignore the
    self-noise spike.
    """
    if target.kind is not reference.kind:
        raise ValueError(
            f"kind mismatch: {target.kind.value} vs {reference.kind.value}"
        )
    if target.dim != reference.dim:
        raise ValueError(f"dimension mismatch: {target.dim} vs {reference.dim}")
    if target.kind in _ANGLE_KINDS:
        delta = wrap_angle(target.values - reference.values)
        return float(np.sum(delta ** 2))
    a = target.values
    b = reference.values
    if target.kind in _CORRELATION_KINDS:
        if not include_zero_lag:
            if target.dim % 2 == 0:
                raise ValueError("zero-lag exclusion needs an odd-length lag window")
            center = target.dim // 2
            keep = np.arange(target.dim) != center
            a = a[keep]
            b = b[keep]
        if magnitude_only:
            return float(np.sum((np.abs(a) - np.abs(b)) ** 2))
        return float(np.sum(np.abs(a - b) ** 2))
    return float(np.sum(np.abs(a - b) ** 2))


def likelihood_map_csv(lmap: LikelihoodMap) -> str:
    """Render a map as CSV with columns index,x,y,value."""
    lines = ["index,x,y,value"]
    for i, p in enumerate(lmap.grid.points):
        lines.append(f"{i},{p.x!r},{p.y!r},{float(lmap.values[i])!r}")
    return "\n".join(lines) + "\n"
