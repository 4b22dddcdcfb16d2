"""Occupancy-driven lighting control: meet a lux target at minimum power.

Dimmable luminaires are set by solving a small linear program over the
occupied grid cells; unoccupied cells carry no constraint, which is where
the energy saving over an all-on baseline comes from.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError
from .geometry import Grid, Position
from .simplex import solve_bounded_lp

__all__ = ["Light", "LightingScenario", "LightingPlan", "light_gain",
           "illuminance", "solve_lighting"]

FEASIBILITY_MARGIN = 1e-9


def light_gain(light_pos: Position, height_m: float, peak_lux: float,
               target: Position) -> float:
    """Illuminance a ceiling luminaire delivers to a floor location.

    Inverse-square law with the cosine of the incidence angle cubed:
    ``peak * h**3 / (h**2 + d**2)**1.5`` for horizontal offset ``d``,
    so a target directly below the light receives ``peak_lux``.
    """
    if not (height_m > 0):
        raise ValueError("mounting height must be positive")
    if not (peak_lux >= 0):
        raise ValueError("peak illuminance must be nonnegative")
    d2 = (target.x - light_pos.x) ** 2 + (target.y - light_pos.y) ** 2
    return peak_lux * height_m ** 3 / (height_m ** 2 + d2) ** 1.5


@dataclass(frozen=True)
class Light:
    """One dimmable luminaire: its floor position, electrical cost, and output."""

    position: Position
    power_w: float
    peak_lux: float
    height_m: float

    def __post_init__(self):
        if not (self.power_w > 0):
            raise ValueError("power draw must be positive")
        if not (self.peak_lux > 0):
            raise ValueError("peak illuminance must be positive")
        if not (self.height_m > 0):
            raise ValueError("mounting height must be positive")

    def gain(self, target: Position) -> float:
        return light_gain(self.position, self.height_m, self.peak_lux, target)


@dataclass(frozen=True)
class LightingScenario:
    """Room geometry plus the photometric requirement.

    Attributes:
        grid: candidate occupant locations.
        lights: the controllable luminaires.
        target_lux: minimum illuminance at every occupied cell.
        env_lux: ambient (daylight) illuminance per grid cell.
    """

    grid: Grid
    lights: tuple
    target_lux: float
    env_lux: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "lights", tuple(self.lights))
        if len(self.lights) == 0:
            raise ValueError("at least one light is required")
        if not (self.target_lux > 0):
            raise ValueError("the illuminance target must be positive")
        env = self.env_lux
        env = np.zeros(len(self.grid)) if env is None else np.array(env, dtype=float)
        if env.shape != (len(self.grid),):
            raise ValueError("ambient illuminance needs one value per grid cell")
        if not np.all(np.isfinite(env)) or np.any(env < 0):
            raise ValueError("ambient illuminance must be finite and nonnegative")
        env.flags.writeable = False
        object.__setattr__(self, "env_lux", env)

    def gain_matrix(self, cell_indices) -> np.ndarray:
        """Per-cell-per-light illuminance at full power, shape (cells, lights)."""
        out = np.empty((len(cell_indices), len(self.lights)))
        for r, idx in enumerate(cell_indices):
            cell = self.grid.points[idx]
            for l, light in enumerate(self.lights):
                out[r, l] = light.gain(cell)
        return out


@dataclass(frozen=True)
class LightingPlan:
    """Dimmer settings in [0, 1] per light and the resulting power draw."""

    switches: np.ndarray
    power_w: float


def illuminance(scenario: LightingScenario, switches, cell_index: int) -> float:
    """Total illuminance at one grid cell under the given dimmer settings."""
    sw = np.asarray(switches, dtype=float)
    if sw.shape != (len(scenario.lights),):
        raise ValueError("need one dimmer setting per light")
    cell = scenario.grid.points[cell_index]
    lit = sum(s * light.gain(cell) for s, light in zip(sw, scenario.lights))
    return float(lit + scenario.env_lux[cell_index])


def solve_lighting(scenario: LightingScenario, occupied_indices) -> LightingPlan:
    """Pick dimmer settings meeting the lux target at occupied cells at min power.

    Args:
        scenario: room, lights, and illuminance requirement.
        occupied_indices: grid indices that must reach ``target_lux``.

    Returns:
        The power-optimal LightingPlan; all lights off when nothing is occupied.

    Raises:
        InfeasibleError: some occupied cell misses the target even with every
            light fully on; the violated grid indices ride on the exception.
    """
    occupied = sorted(set(int(i) for i in occupied_indices))
    n_lights = len(scenario.lights)
    if any(i < 0 or i >= len(scenario.grid) for i in occupied):
        raise ValueError("occupied cell index out of range")
    if len(occupied) == 0:
        return LightingPlan(switches=np.zeros(n_lights), power_w=0.0)

    gains = scenario.gain_matrix(occupied)
    need = scenario.target_lux - scenario.env_lux[occupied]

    all_on = gains.sum(axis=1)
    violated = tuple(idx for r, idx in enumerate(occupied)
                     if all_on[r] < need[r] - FEASIBILITY_MARGIN)
    if violated:
        raise InfeasibleError(
            f"{len(violated)} occupied cell(s) cannot reach "
            f"{scenario.target_lux} lux even with all lights on",
            violated=violated,
        )

    powers = np.array([light.power_w for light in scenario.lights])
    result = solve_bounded_lp(powers, gains, need, np.ones(n_lights))
    return LightingPlan(switches=result.x, power_w=float(result.objective))
