"""McKibben muscle force model with closed-form endpoint calibration.

Units are chosen so no conversion constants appear in the force law:
pressure in MPa, diameters in mm, forces in N (1 MPa * 1 mm^2 = 1 N).
Strain is the contraction fraction, positive when the muscle shortens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Braid fibers lock at arccos(1/sqrt(3)); the ideal-cylinder model is only
# meaningful for rest braid angles below this.
BRAID_LOCK_ANGLE_DEG = math.degrees(math.acos(1.0 / math.sqrt(3.0)))

# Human skeletal muscle reference values, used for stress comparisons in
# reports (never simulated).
HUMAN_PEAK_STRESS_MPA = 0.35
HUMAN_SUSTAINED_STRESS_MPA = 0.1
HUMAN_TYPICAL_STRAIN = 0.20

# Bench endpoints measured on the prototype actuator: blocked force at zero
# strain and free strain at zero load, both at 0.5 MPa.
MEASURED_ENDPOINT_PRESSURE_MPA = 0.5
MEASURED_BLOCKED_FORCE_N = 38.05
MEASURED_FREE_STRAIN = 0.301

# Nominal silicone tube bore of the physical actuator. Metadata only: the
# effective model diameter is fitted, not taken from the sleeve geometry.
NOMINAL_TUBE_INNER_DIAMETER_MM = 1.5


class InvalidPamParams(ValueError):
    """Muscle geometry outside the model's validity range."""


class StrainDomainError(ValueError):
    """Strain outside [0, 1) or negative pressure."""


class InfeasibleEndpoints(ValueError):
    """Endpoint pair that no braid angle below lock can reproduce."""


@dataclass(frozen=True)
class PamParams:
    """Geometry and operating limits of one McKibben muscle."""

    rest_length_mm: float
    d0_mm: float            # effective diameter at zero strain (fitted)
    theta0_deg: float       # braid angle at zero strain
    tube_stiffness_n: float = 0.0   # elastomer correction, N per unit strain
    max_pressure_mpa: float = MEASURED_ENDPOINT_PRESSURE_MPA


@dataclass(frozen=True)
class PamState:
    """Operating point of one muscle."""

    pressure_mpa: float
    strain: float
    force_n: float


@dataclass(frozen=True)
class ForceStrainCurve:
    """Sampled force over strain at one pressure, strains increasing."""

    pressure_mpa: float
    samples: tuple[tuple[float, float], ...]   # (strain, force_n)


def validate_params(params: PamParams) -> None:
    if not (0.0 < params.theta0_deg < BRAID_LOCK_ANGLE_DEG):
        raise InvalidPamParams(
            f"braid angle {params.theta0_deg} deg outside (0, {BRAID_LOCK_ANGLE_DEG:.4f})"
        )
    if params.d0_mm <= 0.0:
        raise InvalidPamParams(f"diameter {params.d0_mm} mm must be positive")
    if params.rest_length_mm <= 0.0:
        raise InvalidPamParams(f"rest length {params.rest_length_mm} mm must be positive")
    if params.max_pressure_mpa <= 0.0:
        raise InvalidPamParams(f"max pressure {params.max_pressure_mpa} MPa must be positive")
    if params.tube_stiffness_n < 0.0:
        raise InvalidPamParams(f"tube stiffness {params.tube_stiffness_n} N must be >= 0")


def pam_force(params: PamParams, pressure_mpa: float, strain: float) -> float:
    """Tensile force of the muscle at the given pressure and contraction.

    Ideal-cylinder braid model with an additive linear tube-elasticity term,
    clamped at zero: the muscle can only pull.
    """
    validate_params(params)
    if pressure_mpa < 0.0:
        raise StrainDomainError(f"pressure {pressure_mpa} MPa must be >= 0")
    if not (0.0 <= strain < 1.0):
        raise StrainDomainError(f"strain {strain} outside [0, 1)")
    theta0 = math.radians(params.theta0_deg)
    area = math.pi * params.d0_mm**2 / 4.0
    braid = 3.0 * (1.0 - strain) ** 2 / math.tan(theta0) ** 2 - 1.0 / math.sin(theta0) ** 2
    force = area * pressure_mpa * braid - params.tube_stiffness_n * strain
    return max(0.0, force)


def geometric_free_strain(params: PamParams) -> float:
    """Free strain of the zero-tube-stiffness model, independent of pressure."""
    validate_params(params)
    return 1.0 - 1.0 / (math.sqrt(3.0) * math.cos(math.radians(params.theta0_deg)))


def pam_free_strain(params: PamParams, pressure_mpa: float) -> float:
    """Contraction at zero load: the root of pam_force in strain.

    Bisection on [0, geometric free strain]; iterated essentially to machine
    precision so the force residual at the returned strain is far below 1e-9 N.
    Returns 0 when the pressure produces no force at zero strain.
    """
    validate_params(params)
    lo = 0.0
    hi = geometric_free_strain(params)
    if pressure_mpa <= 0.0 or pam_force(params, pressure_mpa, 0.0) <= 0.0:
        return 0.0
    # f(lo) > 0 and f(hi) <= 0: the tube term only lowers the force, so the
    # zero-stiffness root always brackets from above.
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f = pam_force(params, pressure_mpa, mid)
        if f > 0.0:
            lo = mid
        else:
            hi = mid
    return lo if abs(pam_force(params, pressure_mpa, lo)) <= abs(
        pam_force(params, pressure_mpa, hi)
    ) else hi


def calibrate_pam(
    blocked: tuple[float, float],
    free: tuple[float, float],
    rest_length_mm: float = 220.0,
    max_pressure_mpa: float = MEASURED_ENDPOINT_PRESSURE_MPA,
) -> PamParams:
    """Invert the two-endpoint equations for (theta0, d0) with zero tube term.

    blocked: (pressure MPa, force N) at zero strain.
    free: (pressure MPa, strain) at zero load.
    """
    pressure_b, force_b = blocked
    pressure_f, strain_f = free
    if force_b <= 0.0 or pressure_b <= 0.0 or pressure_f <= 0.0:
        raise InfeasibleEndpoints("endpoint pressures and blocked force must be positive")
    if not (0.0 < strain_f < 1.0):
        raise InfeasibleEndpoints(f"free strain {strain_f} outside (0, 1)")
    arg = 1.0 / (math.sqrt(3.0) * (1.0 - strain_f))
    if not (0.0 < arg <= 1.0):
        raise InfeasibleEndpoints(
            f"free strain {strain_f} requires cos(theta0) = {arg:.4f} > 1"
        )
    theta0 = math.acos(arg)
    braid = 3.0 / math.tan(theta0) ** 2 - 1.0 / math.sin(theta0) ** 2
    d0 = math.sqrt(4.0 * force_b / (math.pi * pressure_b * braid))
    return PamParams(
        rest_length_mm=rest_length_mm,
        d0_mm=d0,
        theta0_deg=math.degrees(theta0),
        tube_stiffness_n=0.0,
        max_pressure_mpa=max_pressure_mpa,
    )


def reference_pam(rest_length_mm: float = 220.0) -> PamParams:
    """Muscle calibrated to the bench endpoint measurements."""
    return calibrate_pam(
        (MEASURED_ENDPOINT_PRESSURE_MPA, MEASURED_BLOCKED_FORCE_N),
        (MEASURED_ENDPOINT_PRESSURE_MPA, MEASURED_FREE_STRAIN),
        rest_length_mm=rest_length_mm,
    )


def force_strain_table(
    params: PamParams, pressures_mpa: list[float], n_points: int
) -> list[ForceStrainCurve]:
    """Sample one force-strain curve per pressure on [0, free strain]."""
    validate_params(params)
    if n_points < 2:
        raise ValueError(f"n_points {n_points} must be >= 2")
    curves = []
    for pressure in pressures_mpa:
        if not (0.0 <= pressure <= params.max_pressure_mpa):
            raise ValueError(
                f"pressure {pressure} MPa outside [0, {params.max_pressure_mpa}]"
            )
        upper = pam_free_strain(params, pressure)
        if upper <= 0.0:
            # Zero pressure produces a flat zero curve; sample the geometric
            # span so strains stay strictly increasing.
            upper = geometric_free_strain(params)
        samples = []
        for i in range(n_points):
            s = upper * i / (n_points - 1)
            samples.append((s, pam_force(params, pressure, s)))
        curves.append(ForceStrainCurve(pressure_mpa=pressure, samples=tuple(samples)))
    return curves


def pam_stress(params: PamParams, force_n: float) -> float:
    """Engineering stress F / (pi d0^2 / 4) in MPa, for muscle comparisons."""
    validate_params(params)
    if force_n < 0.0:
        raise ValueError(f"force {force_n} N must be >= 0")
    return force_n / (math.pi * params.d0_mm**2 / 4.0)


def curves_to_csv(curves: list[ForceStrainCurve]) -> str:
    """CSV export, header pressure_mpa,strain,force_n, one row per sample."""
    lines = ["pressure_mpa,strain,force_n"]
    for curve in curves:
        for strain, force in curve.samples:
            lines.append(f"{curve.pressure_mpa!r},{strain!r},{force!r}")
    return "\n".join(lines) + "\n"
