"""Distribution fitting and evaluation for fingerprint likelihood models."""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import gammaln, i0e, i1e

from .database import complex_from_json, complex_to_json, real_to_json, register_codec
from .errors import NumericError
from .geometry import Grid

__all__ = [
    "GaussianStats",
    "fit_gaussian",
    "gaussian_loglik",
    "GammaParams",
    "fit_gamma",
    "gamma_logpdf",
    "VonMisesParams",
    "fit_vonmises",
    "vonmises_logpdf",
    "DetectionMap",
    "learn_detection_map",
    "LogLinearModel",
    "fit_loglinear",
    "KrigingKernel",
    "KrigingModel",
    "kriging_fit",
    "kriging_predict",
]

DEFAULT_LOADING_EPS = 1e-3
KAPPA_MAX = 1000.0
_RESULTANT_CAP = 1.0 - 1e-6
_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# complex Gaussian fingerprint model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianStats:
    """Circularly symmetric complex Gaussian: mean vector and loaded covariance.

    ``cov`` already includes the diagonal loading recorded in ``loading``.
    """

    mean: np.ndarray
    cov: np.ndarray
    loading: float

    def __post_init__(self):
        mean = np.array(self.mean, dtype=complex)
        cov = np.array(self.cov, dtype=complex)
        if mean.ndim != 1 or mean.size == 0:
            raise ValueError("mean must be a non-empty vector")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match dim {mean.size}")
        herm_gap = float(np.max(np.abs(cov - cov.conj().T))) if cov.size else 0.0
        scale = max(float(np.abs(np.trace(cov)).real), 1.0)
        if herm_gap > 1e-12 * scale:
            raise ValueError(f"covariance is not Hermitian (max asymmetry {herm_gap:.3e})")
        if self.loading < 0:
            raise ValueError("loading must be non-negative")
        eigmin = float(np.min(scipy.linalg.eigvalsh(cov)))
        if eigmin < -1e-9 * scale:
            raise ValueError(f"covariance has negative eigenvalue {eigmin:.3e}")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


def fit_gaussian(samples, loading_eps: float = DEFAULT_LOADING_EPS) -> GaussianStats:
    """Fit mean and covariance of complex fingerprint samples.

    The covariance is the biased (divide by n) scatter of complex outer
    products plus diagonal loading ``loading_eps * trace / dim`` (or
    ``loading_eps`` outright when the scatter is exactly zero), which keeps
    the model invertible with few snapshots.

    Args:
        samples: (n, d) array-like of complex sample vectors, n >= 1.
        loading_eps: relative diagonal loading factor.

    Returns:
        GaussianStats with the loading already applied to ``cov``.
    """
    arr = np.asarray(samples, dtype=complex)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("samples must form a non-empty (n, d) array")
    if loading_eps < 0:
        raise ValueError("loading_eps must be non-negative")
    n, d = arr.shape
    mean = arr.mean(axis=0)
    centered = arr - mean
    scatter = centered.T @ centered.conj() / n
    scatter = (scatter + scatter.conj().T) / 2.0
    trace = float(np.trace(scatter).real)
    loading = loading_eps * trace / d if trace > 0.0 else loading_eps
    cov = scatter + loading * np.eye(d)
    return GaussianStats(mean=mean, cov=cov, loading=float(loading))


def gaussian_loglik(f, stats: GaussianStats):
    """Log-density of fingerprint(s) under a complex Gaussian model.

    Computes ``-d ln(pi) - ln det(R) - (f - m)^H R^{-1} (f - m)`` through a
    Cholesky factorization (no explicit inverse).

    Args:
        f: one fingerprint vector (d,) or a batch (n, d).
        stats: fitted model.

    Returns:
        Scalar for a single vector, (n,) array for a batch.
    """
    arr = np.asarray(f, dtype=complex)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[1] != stats.dim:
        raise ValueError(f"fingerprint dim {arr.shape[1]} does not match model dim {stats.dim}")
    try:
        cho = scipy.linalg.cho_factor(stats.cov, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(
            f"covariance is not positive definite even after loading {stats.loading}: {exc}"
        ) from exc
    logdet = 2.0 * float(np.sum(np.log(np.real(np.diag(cho[0])))))
    delta = arr - stats.mean
    z = scipy.linalg.cho_solve(cho, delta.T)
    quad = np.real(np.sum(delta.conj().T * z, axis=0))
    out = -stats.dim * math.log(math.pi) - logdet - quad
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# Gamma model for received power
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaParams:
    """Gamma distribution, shape/scale parameterization."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError(f"shape and scale must be positive, got {self.shape}, {self.scale}")


def fit_gamma(samples) -> GammaParams:
    """Method-of-moments Gamma fit: scale = var/mean, shape = mean/scale.

    Uses the unbiased sample variance, so at least two samples are required
    and all samples must be positive with non-zero spread.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("gamma fitting needs at least 2 samples")
    if np.any(arr <= 0):
        raise ValueError("gamma samples must be positive")
    mean = float(arr.mean())
    var = float(arr.var(ddof=1))
    if var == 0.0:
        raise ValueError("gamma samples have zero variance")
    scale = var / mean
    return GammaParams(shape=mean / scale, scale=scale)


def gamma_logpdf(x, p: GammaParams):
    """Gamma log-density ``(shape-1) ln x - x/scale - ln Gamma(shape) - shape ln scale``."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("gamma density is defined for positive values only")
    out = ((p.shape - 1.0) * np.log(arr) - arr / p.scale
           - gammaln(p.shape) - p.shape * math.log(p.scale))
    return float(out) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# von Mises model for phases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VonMisesParams:
    """Von Mises distribution on the circle."""

    mu: float
    kappa: float

    def __post_init__(self):
        if not (-math.pi < self.mu <= math.pi):
            raise ValueError(f"mu must lie in (-pi, pi], got {self.mu}")
        if not (0.0 <= self.kappa <= KAPPA_MAX):
            raise ValueError(f"kappa must lie in [0, {KAPPA_MAX}], got {self.kappa}")


def _bessel_ratio(kappa: float) -> float:
    # I1/I0 via exponentially scaled Bessel functions, stable for large kappa
    return float(i1e(kappa) / i0e(kappa))


def fit_vonmises(angles) -> VonMisesParams:
    """Fit a von Mises distribution from angles in radians.

    The mean direction is the argument of the summed phasors.  Concentration
    starts from the rational closed form ``R(2 - R^2)/(1 - R^2)`` and is
    tightened with two Newton steps on the Bessel ratio equation
    ``I1(k)/I0(k) = R``; nearly aligned samples cap at ``KAPPA_MAX``.
    """
    arr = np.asarray(angles, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("von Mises fitting needs at least one angle")
    z = np.exp(1j * arr).mean()
    rbar = float(np.abs(z))
    if rbar == 0.0:
        return VonMisesParams(mu=0.0, kappa=0.0)
    mu = float(np.angle(z))
    if rbar >= _RESULTANT_CAP:
        return VonMisesParams(mu=mu, kappa=KAPPA_MAX)
    kappa = rbar * (2.0 - rbar ** 2) / (1.0 - rbar ** 2)
    for _ in range(2):
        if kappa <= 0.0:
            break
        a = _bessel_ratio(kappa)
        da = 1.0 - a * a - a / kappa
        if da <= 0.0:
            break
        kappa = kappa - (a - rbar) / da
        if not math.isfinite(kappa):
            return VonMisesParams(mu=mu, kappa=KAPPA_MAX)
    kappa = min(max(kappa, 0.0), KAPPA_MAX)
    return VonMisesParams(mu=mu, kappa=kappa)


def _log_i0(kappa: float) -> float:
    """ln I0(kappa): power series below 15, asymptotic expansion above.

    Both branches work in log domain, so large concentrations cannot
    overflow.
    """
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if kappa < 15.0:
        q = kappa * kappa / 4.0
        term = 1.0
        total = 1.0
        for k in range(1, 80):
            term *= q / (k * k)
            total += term
            if term < total * 1e-18:
                break
        return math.log(total)
    # I0(k) ~ e^k / sqrt(2 pi k) * (1 + 1/(8k) + 9/(2!(8k)^2) + ...)
    inv8k = 1.0 / (8.0 * kappa)
    term = 1.0
    series = 1.0
    for k in range(1, 10):
        term *= (2 * k - 1) ** 2 * inv8k / k
        series += term
    return kappa - 0.5 * math.log(2.0 * math.pi * kappa) + math.log(series)


def vonmises_logpdf(x, p: VonMisesParams):
    """Von Mises log-density ``kappa cos(x - mu) - ln(2 pi) - ln I0(kappa)``."""
    arr = np.asarray(x, dtype=float)
    out = p.kappa * np.cos(arr - p.mu) - _LOG_2PI - _log_i0(p.kappa)
    return float(out) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# occupancy detection maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectionMap:
    """Per-grid-point detection probability for one binary sensor."""

    grid: Grid
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.shape != (len(self.grid),):
            raise ValueError(
                f"need one probability per grid point, got {probs.shape} for {len(self.grid)}"
            )
        if np.any(probs <= 0.0) or np.any(probs >= 1.0):
            raise ValueError("detection probabilities must lie strictly inside (0, 1)")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)


def learn_detection_map(observations, grid: Grid) -> DetectionMap:
    """Estimate a sensor's detection probability per grid cell.

    Args:
        observations: iterable of ``(grid_index, moving, bit)`` records; the
            moving flag is provenance and does not alter the estimate.
        grid: cell layout.

    Returns:
        DetectionMap with the Laplace-smoothed frequency ``(k+1)/(n+2)`` per
        cell; unvisited cells sit at the uninformative 0.5.
    """
    hits = np.zeros(len(grid), dtype=float)
    counts = np.zeros(len(grid), dtype=float)
    for idx, _moving, bit in observations:
        idx = int(idx)
        if not (0 <= idx < len(grid)):
            raise ValueError(f"grid index {idx} out of range")
        if bit not in (0, 1):
            raise ValueError(f"detection bit must be 0 or 1, got {bit}")
        hits[idx] += bit
        counts[idx] += 1
    probs = (hits + 1.0) / (counts + 2.0)
    return DetectionMap(grid=grid, probs=probs)


# ---------------------------------------------------------------------------
# log-linear frequency trend
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogLinearModel:
    """Straight-line fit of a dB quantity against log10 frequency."""

    slope_db_per_decade: float
    intercept_db: float

    def predict_db(self, freq_hz):
        f = np.asarray(freq_hz, dtype=float)
        out = self.slope_db_per_decade * np.log10(f) + self.intercept_db
        return float(out) if np.ndim(freq_hz) == 0 else out


def fit_loglinear(freqs_hz, values_db) -> LogLinearModel:
    """Least-squares fit of ``values_db = slope * log10(f) + intercept``."""
    f = np.asarray(freqs_hz, dtype=float)
    v = np.asarray(values_db, dtype=float)
    if f.shape != v.shape or f.ndim != 1:
        raise ValueError("frequencies and values must be equal-length 1-D arrays")
    if np.any(f <= 0):
        raise ValueError("frequencies must be positive")
    if np.unique(f).size < 2:
        raise ValueError("log-linear fitting needs at least two distinct frequencies")
    design = np.column_stack([np.log10(f), np.ones_like(f)])
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    return LogLinearModel(slope_db_per_decade=float(coef[0]), intercept_db=float(coef[1]))


# ---------------------------------------------------------------------------
# Gaussian-process spatial interpolation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KrigingKernel:
    """Squared-exponential kernel with a diagonal nugget."""

    length_scale: float
    signal_var: float
    noise_var: float

    def __post_init__(self):
        if not (self.length_scale > 0):
            raise ValueError("length scale must be positive")
        if self.signal_var < 0 or self.noise_var < 0:
            raise ValueError("variances must be non-negative")


@dataclass(frozen=True)
class KrigingModel:
    """Fitted Gaussian-process interpolator (zero prior mean)."""

    kernel: KrigingKernel
    locations: np.ndarray
    values: np.ndarray
    alpha: np.ndarray
    cho: tuple

    @property
    def n_train(self) -> int:
        return self.locations.shape[0]


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sum(diff * diff, axis=-1)


def _default_length_scale(locations: np.ndarray) -> float:
    # 2x the typical nearest-neighbor distance; equals 2*spacing on uniform grids
    d2 = _sq_dists(locations, locations)
    np.fill_diagonal(d2, np.inf)
    nn = np.sqrt(np.min(d2, axis=1))
    return 2.0 * float(np.median(nn))


def _log_marginal_likelihood(kernel, locations, values) -> float:
    k = kernel.signal_var * np.exp(-_sq_dists(locations, locations) / (2 * kernel.length_scale ** 2))
    k[np.diag_indices_from(k)] += kernel.noise_var
    try:
        cho = scipy.linalg.cho_factor(k, lower=True)
    except scipy.linalg.LinAlgError:
        return -np.inf
    alpha = scipy.linalg.cho_solve(cho, values)
    logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    n = values.size
    return float(-0.5 * values @ alpha - 0.5 * logdet - 0.5 * n * _LOG_2PI)


def kriging_fit(locations, values, kernel: KrigingKernel | None = None,
                optimize_length_scale: bool = False) -> KrigingModel:
    """Fit a Gaussian-process interpolator to scattered real values.

    Without an explicit kernel the defaults are: length scale twice the
    typical nearest-neighbor spacing, signal variance equal to the sample
    variance of the values, nugget 1e-6 of the signal variance.  With
    ``optimize_length_scale`` the length scale is picked from a log-spaced
    candidate grid (several per decade) by maximum marginal likelihood.

    Raises:
        NumericError: the kernel matrix is numerically singular; a larger
            nugget is the usual fix.
    """
    locs = np.array(locations, dtype=float)
    vals = np.array(values, dtype=float)
    if locs.ndim != 2 or locs.shape[1] != 2 or locs.shape[0] == 0:
        raise ValueError("locations must form a non-empty (n, 2) array")
    if vals.shape != (locs.shape[0],):
        raise ValueError("need exactly one value per location")
    if kernel is None:
        if locs.shape[0] < 2:
            raise ValueError("kernel defaults need at least two training points")
        sigf = float(np.var(vals, ddof=1)) if vals.size > 1 else 1.0
        sigf = max(sigf, 1e-12)
        kernel = KrigingKernel(
            length_scale=_default_length_scale(locs),
            signal_var=sigf,
            noise_var=1e-6 * sigf,
        )
    if optimize_length_scale:
        base = kernel.length_scale
        candidates = np.geomspace(base / 3.0, base * 3.0, 7)
        scored = [
            (_log_marginal_likelihood(
                KrigingKernel(float(ls), kernel.signal_var, kernel.noise_var), locs, vals), -i)
            for i, ls in enumerate(candidates)
        ]
        best = int(-max(scored)[1])
        kernel = KrigingKernel(float(candidates[best]), kernel.signal_var, kernel.noise_var)

    gram = kernel.signal_var * np.exp(-_sq_dists(locs, locs) / (2 * kernel.length_scale ** 2))
    gram[np.diag_indices_from(gram)] += kernel.noise_var
    try:
        cho = scipy.linalg.cho_factor(gram, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(
            "kriging kernel matrix is singular; increase the nugget (noise_var)"
        ) from exc
    alpha = scipy.linalg.cho_solve(cho, vals)
    locs.flags.writeable = False
    vals.flags.writeable = False
    return KrigingModel(kernel=kernel, locations=locs, values=vals, alpha=alpha, cho=cho)


def kriging_predict(model: KrigingModel, queries) -> tuple:
    """Posterior mean and variance at query locations.

    Args:
        model: fitted interpolator.
        queries: (m, 2) array of positions.

    Returns:
        (mean, var) arrays of shape (m,); variances are clipped at zero.
    """
    q = np.asarray(queries, dtype=float)
    single = q.ndim == 1
    if single:
        q = q[None, :]
    if q.ndim != 2 or q.shape[1] != 2:
        raise ValueError("queries must form an (m, 2) array")
    kstar = model.kernel.signal_var * np.exp(
        -_sq_dists(q, model.locations) / (2 * model.kernel.length_scale ** 2)
    )
    mean = kstar @ model.alpha
    v = scipy.linalg.cho_solve(model.cho, kstar.T)
    var = model.kernel.signal_var - np.sum(kstar * v.T, axis=1)
    var = np.maximum(var, 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


# ---------------------------------------------------------------------------
# database codecs for the fitted models
# ---------------------------------------------------------------------------

register_codec(
    "gaussian",
    GaussianStats,
    lambda s: {
        "mean": complex_to_json(s.mean),
        "cov": [complex_to_json(row) for row in s.cov],
        "loading": float(s.loading),
    },
    lambda d: GaussianStats(
        mean=complex_from_json(d["mean"]),
        cov=np.array([complex_from_json(row) for row in d["cov"]]),
        loading=float(d["loading"]),
    ),
)

register_codec(
    "gamma",
    GammaParams,
    lambda p: {"shape": float(p.shape), "scale": float(p.scale)},
    lambda d: GammaParams(shape=float(d["shape"]), scale=float(d["scale"])),
)

register_codec(
    "von_mises",
    VonMisesParams,
    lambda p: {"mu": float(p.mu), "kappa": float(p.kappa)},
    lambda d: VonMisesParams(mu=float(d["mu"]), kappa=float(d["kappa"])),
)

register_codec(
    "log_linear",
    LogLinearModel,
    lambda m: {"slope_db_per_decade": float(m.slope_db_per_decade),
               "intercept_db": float(m.intercept_db)},
    lambda d: LogLinearModel(slope_db_per_decade=float(d["slope_db_per_decade"]),
                             intercept_db=float(d["intercept_db"])),
)

register_codec(
    "kriging",
    KrigingModel,
    lambda m: {
        "length_scale": float(m.kernel.length_scale),
        "signal_var": float(m.kernel.signal_var),
        "noise_var": float(m.kernel.noise_var),
        "locations": [real_to_json(row) for row in m.locations],
        "values": real_to_json(m.values),
    },
    lambda d: kriging_fit(
        np.asarray(d["locations"], dtype=float),
        np.asarray(d["values"], dtype=float),
        kernel=KrigingKernel(float(d["length_scale"]), float(d["signal_var"]),
                             float(d["noise_var"])),
    ),
)
