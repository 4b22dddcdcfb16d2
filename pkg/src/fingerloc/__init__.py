"""fingerloc: fingerprint-based radio emitter localization.

Build databases of channel fingerprints on a survey grid, match live
measurements against them probabilistically, track moving emitters, and
project fingerprints across frequency, bandwidth, and space when the
emitter does not match the training conditions.
"""

# ----------------------------------------------------------------------------
# Errors
# ----------------------------------------------------------------------------
from .errors import ConfigError, DegenerateUpdateError, InfeasibleError, NumericError

# ----------------------------------------------------------------------------
# Geometry and signal containers
# ----------------------------------------------------------------------------
from .geometry import Grid, Position, build_uniform_grid, uniform_grid_shape
from .signals import (
    Cir,
    FingerprintKind,
    FingerprintMeta,
    FingerprintVector,
    SignalBuffer,
    wrap_angle,
)

# ----------------------------------------------------------------------------
# Databases
# ----------------------------------------------------------------------------
from .database import (
    DatabaseMeta,
    FingerprintDatabase,
    database_from_json,
    database_to_json,
    euclidean_match,
    load_database,
    save_database,
)

# ----------------------------------------------------------------------------
# Simulation
# ----------------------------------------------------------------------------
from .simulate import (
    SPEED_OF_LIGHT,
    ChannelModel,
    SensorCoverage,
    TxSignalSpec,
    derive_seed,
    gen_cir,
    simulate_binary_sensor,
    simulate_pdr,
    synthesize_rx,
    tx_sequence,
    zadoff_chu,
)

# ----------------------------------------------------------------------------
# Fingerprint extraction
# ----------------------------------------------------------------------------
from .features import (
    cir_xcorr_fingerprint,
    estimate_cir,
    phasediff_fingerprint,
    rssi_rspd,
    rx_xcorr_fingerprint,
    xcorr,
)

# ----------------------------------------------------------------------------
# Statistical models
# ----------------------------------------------------------------------------
from .stats import (
    DetectionMap,
    GammaParams,
    GaussianStats,
    KrigingKernel,
    KrigingModel,
    LogLinearModel,
    VonMisesParams,
    fit_gamma,
    fit_gaussian,
    fit_loglinear,
    fit_vonmises,
    gamma_logpdf,
    gaussian_loglik,
    kriging_fit,
    kriging_predict,
    learn_detection_map,
    vonmises_logpdf,
)

# ----------------------------------------------------------------------------
# Matching and tracking
# ----------------------------------------------------------------------------
from .matching import (
    HybridConfig,
    LikelihoodMap,
    binary_likelihood,
    fingerprint_sqerr,
    hybrid_match,
    likelihood_map_csv,
    mle_cir,
    mle_rssi_rspd,
    threshold_set,
)
from .tracking import (
    MobilityModel,
    ParticleSet,
    grid_bayes_step,
    particle_predict,
    particle_update,
    resample_systematic,
    track_estimate,
    transition_matrix,
)

# ----------------------------------------------------------------------------
# Fingerprint projection (frequency / bandwidth / space)
# ----------------------------------------------------------------------------
from .interp import (
    EmitterSpec,
    UcaGeometry,
    bandwidth_interp,
    estimate_aoa,
    freq_interp_xcorr,
    normalize_power,
    phasediff_freq_interp,
    spatial_densify,
    uca_steering,
    windowed_sinc_lowpass,
)

# ----------------------------------------------------------------------------
# Lighting control
# ----------------------------------------------------------------------------
from .lighting import (
    Light,
    LightingPlan,
    LightingScenario,
    illuminance,
    light_gain,
    solve_lighting,
)

__version__ = "0.1.0"
