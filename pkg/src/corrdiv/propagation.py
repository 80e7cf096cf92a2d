"""Terminal geometry, shadowing, link gains, and angular-parameter draws.

Link gain model: beta = A * zeta * (r0 / r)^alpha with lognormal shadowing
zeta (10*log10(zeta) ~ N(0, sigma_sh^2)). The attenuation constant A is
calibrated so that the 5th percentile of instantaneous ZF SNR hits 0 dB on
the reference configuration (M=64, L=6, exponential xi=0.9, rho_t=0 dB).
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import CalibrationError, InvalidParameterError


@dataclass(frozen=True)
class GeometryConfig:
    cell_radius_m: float = 500.0
    reference_distance_m: float = 50.0
    attenuation_exponent: float = 3.67
    shadowing_std_db: float = 6.0
    attenuation_constant: float = 1.0

    def __post_init__(self):
        if not 0 < self.reference_distance_m < self.cell_radius_m:
            raise InvalidParameterError(
                f"need 0 < r0 < cell radius, got r0={self.reference_distance_m}, "
                f"Rc={self.cell_radius_m}"
            )
        if self.attenuation_exponent <= 0:
            raise InvalidParameterError("attenuation exponent must be positive")
        if self.shadowing_std_db < 0:
            raise InvalidParameterError("shadowing std cannot be negative")
        if self.attenuation_constant <= 0:
            raise InvalidParameterError("attenuation constant must be positive")


@dataclass(frozen=True)
class TerminalProfile:
    """One terminal's resolved large-scale state for a drop."""

    distance_m: float
    azimuth_deg: float
    shadowing_linear: float
    link_gain: float
    model_params: dict

    def __post_init__(self):
        if self.shadowing_linear <= 0 or self.link_gain <= 0:
            raise InvalidParameterError("shadowing and link gain must be positive")


@dataclass(frozen=True)
class MeasuredAngularModel:
    """Fitted azimuth statistics: spread N(14.02, 6.45^2) deg, DOA U[-180, 180]."""

    spread_mean_deg: float = 14.02
    spread_std_deg: float = 6.45
    doa_low_deg: float = -180.0
    doa_high_deg: float = 180.0
    spread_floor_deg: float = 1.0

    def __post_init__(self):
        if self.spread_floor_deg <= 0:
            raise InvalidParameterError("spread floor must be positive")
        if self.spread_std_deg < 0:
            raise InvalidParameterError("spread std cannot be negative")
        if self.doa_low_deg > self.doa_high_deg:
            raise InvalidParameterError("DOA interval must be ordered")


def sample_terminal_geometry(config: GeometryConfig, rng, radial_law: str = "area"):
    """Drop one terminal: distance in [r0, Rc], azimuth ~ U[-180, 180] deg.

    ``radial_law="area"`` draws uniformly over the annulus area (default cell
    drop); ``"radius"`` draws the radius itself uniformly. The knob exists for
    sensitivity reporting and is not part of the scenario file schema.
    """
    r0 = config.reference_distance_m
    rc = config.cell_radius_m
    u = rng.random()
    if radial_law == "area":
        distance = float(np.sqrt(r0**2 + u * (rc**2 - r0**2)))
    elif radial_law == "radius":
        distance = r0 + u * (rc - r0)
    else:
        raise InvalidParameterError(f"unknown radial law {radial_law!r}")
    azimuth = float(rng.uniform(-180.0, 180.0))
    return distance, azimuth


def sample_link_gain(config: GeometryConfig, distance_m: float, rng):
    """Lognormal shadowing draw and the resulting link gain at a distance."""
    if not config.reference_distance_m <= distance_m <= config.cell_radius_m:
        raise InvalidParameterError(
            f"distance {distance_m} outside [{config.reference_distance_m}, "
            f"{config.cell_radius_m}]"
        )
    shadow_db = rng.normal(0.0, config.shadowing_std_db)
    zeta = 10.0 ** (shadow_db / 10.0)
    beta = (
        config.attenuation_constant
        * zeta
        * (config.reference_distance_m / distance_m) ** config.attenuation_exponent
    )
    return float(zeta), float(beta)


def sample_angular_params(model: MeasuredAngularModel, rng):
    """Per-terminal (angular spread, mean DOA) from the measured fits.

    The DOA is drawn first, then the spread is redrawn until it clears the
    floor, so a caller consuming one stream per terminal keeps DOA draws
    aligned regardless of how many spread redraws occur.
    """
    doa = float(rng.uniform(model.doa_low_deg, model.doa_high_deg))
    spread = draw_truncated_spread(model, rng)
    return spread, doa


def draw_truncated_spread(model: MeasuredAngularModel, rng) -> float:
    while True:
        spread = rng.normal(model.spread_mean_deg, model.spread_std_deg)
        if spread >= model.spread_floor_deg:
            return float(spread)


def _require_baseline(scenario):
    model = scenario.model
    ok = (
        scenario.m == 64
        and scenario.l == 6
        and scenario.rho_t_db == 0
        and model.variant == "exponential"
        and model.xi == 0.9
    )
    if not ok:
        raise InvalidParameterError(
            "calibration requires the reference configuration: M=64, L=6, "
            "rho_t=0 dB, exponential model with xi=0.9"
        )


def calibrate_attenuation_constant(baseline, method: str = "rescale") -> float:
    """Attenuation constant A putting the 5th-percentile instantaneous ZF SNR at 0 dB.

    Instantaneous SNR is exactly linear in A, so one Monte Carlo pass at A=1
    plus a rescale solves the problem; ``method="bisection"`` reruns the
    percentile search by bisection over the same samples as a cross-check
    oracle. Deterministic given the scenario seed.
    """
    from .montecarlo import collect_instantaneous_snr_db

    _require_baseline(baseline)
    unit = replace(
        baseline, geometry=replace(baseline.geometry, attenuation_constant=1.0)
    )
    samples_db = collect_instantaneous_snr_db(unit)
    p5_db = float(np.percentile(samples_db, 5.0))

    if method == "rescale":
        return 10.0 ** (-p5_db / 10.0)
    if method == "bisection":
        lo, hi = -12.0, 12.0  # log10(A) bracket
        shift = lambda log_a: p5_db + 10.0 * log_a  # noqa: E731 - tiny local map
        if shift(lo) > 0 or shift(hi) < 0:
            raise CalibrationError("bisection bracket does not contain the target")
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if abs(shift(mid)) <= 1e-9:
                return 10.0**mid
            if shift(mid) > 0:
                hi = mid
            else:
                lo = mid
        raise CalibrationError("bisection did not converge within 60 iterations")
    raise InvalidParameterError(f"unknown calibration method {method!r}")
