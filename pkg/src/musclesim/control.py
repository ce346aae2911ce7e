"""Pneumatic touch sensing and the per-finger ramp/hold grasp controller.

Each digit ramps its flexor lead pressure until the fingertip sensor crosses
its threshold, then freezes the pressure (adaptive grasp). Extensors stay
vented throughout. Lead pressures are computed from step counters, never
accumulated, so ramp values are exact and traces are bit-reproducible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .hand import DIGITS, HandDescription, SensorSpec
from .mechanics import (
    DEFAULT_PENALTY_N_PER_MM,
    EquilibriumResult,
    FingerConfig,
    rest_config,
    solve_finger_equilibrium,
)
from .scene import SceneObject

DEFAULT_RAMP_RATE_MPA_PER_S = 0.067
DEFAULT_PRESSURE_CAP_MPA = 0.2
DEFAULT_STEP_S = 0.01


class Phase(enum.Enum):
    IDLE = "idle"
    RAMP = "ramp"
    HOLD = "hold"
    RELEASE = "release"


class MissingReadingError(KeyError):
    pass


@dataclass(frozen=True)
class TouchReading:
    sensor_id: str
    pressure_kpa: float


def sensor_pressure(
    sensor: SensorSpec, contact_force_n: float, saturation_kpa: float | None = None
) -> float:
    """Pad pressure for a contact force: linear gain with saturation."""
    if contact_force_n < 0.0:
        raise ValueError(f"contact force {contact_force_n} N must be >= 0")
    cap = sensor.saturation_kpa if saturation_kpa is None else saturation_kpa
    return min(sensor.compliance_kpa_per_n * contact_force_n, cap)


@dataclass(frozen=True)
class FingerChannel:
    phase: Phase = Phase.RAMP
    lead_pressure_mpa: float = 0.0
    ramp_steps: int = 0          # steps spent ramping (pressure = steps*rate*dt)
    release_steps: int = 0
    release_from_mpa: float = 0.0


@dataclass(frozen=True)
class GraspControllerState:
    channels: dict[str, FingerChannel]
    ramp_rate_mpa_per_s: float = DEFAULT_RAMP_RATE_MPA_PER_S
    threshold_kpa: float = 4.0
    pressure_cap_mpa: float = DEFAULT_PRESSURE_CAP_MPA

    @staticmethod
    def initial(
        digits: Sequence[str] = DIGITS,
        ramp_rate_mpa_per_s: float = DEFAULT_RAMP_RATE_MPA_PER_S,
        threshold_kpa: float = 4.0,
        pressure_cap_mpa: float = DEFAULT_PRESSURE_CAP_MPA,
        phase: Phase = Phase.RAMP,
    ) -> "GraspControllerState":
        return GraspControllerState(
            channels={d: FingerChannel(phase=phase) for d in digits},
            ramp_rate_mpa_per_s=ramp_rate_mpa_per_s,
            threshold_kpa=threshold_kpa,
            pressure_cap_mpa=pressure_cap_mpa,
        )


@dataclass(frozen=True)
class PressureCommand:
    flexor_mpa: float
    extensor_mpa: float = 0.0


def step_grasp_controller(
    state: GraspControllerState, readings: Sequence[TouchReading], dt_s: float
) -> tuple[GraspControllerState, dict[str, PressureCommand]]:
    """Advance the controller one step and emit per-digit pressure commands.

    A digit in RAMP whose reading exceeds the threshold switches to HOLD with
    its pressure untouched; otherwise its pressure is the exact ramp value
    min(cap, steps*rate*dt). HOLD pressure never changes. RELEASE ramps down
    symmetrically and parks in IDLE at zero.
    """
    if dt_s <= 0.0:
        raise ValueError(f"dt {dt_s} s must be positive")
    by_sensor = {r.sensor_id: r for r in readings}
    channels: dict[str, FingerChannel] = {}
    commands: dict[str, PressureCommand] = {}
    for digit, channel in state.channels.items():
        if channel.phase == Phase.RAMP:
            if digit not in by_sensor:
                raise MissingReadingError(digit)
            if by_sensor[digit].pressure_kpa > state.threshold_kpa:
                channel = replace(channel, phase=Phase.HOLD)
            else:
                steps = channel.ramp_steps + 1
                pressure = min(
                    state.pressure_cap_mpa, steps * state.ramp_rate_mpa_per_s * dt_s
                )
                channel = replace(channel, ramp_steps=steps, lead_pressure_mpa=pressure)
        elif channel.phase == Phase.RELEASE:
            steps = channel.release_steps + 1
            pressure = max(
                0.0, channel.release_from_mpa - steps * state.ramp_rate_mpa_per_s * dt_s
            )
            phase = Phase.IDLE if pressure == 0.0 else Phase.RELEASE
            channel = replace(
                channel, release_steps=steps, lead_pressure_mpa=pressure, phase=phase
            )
        # HOLD and IDLE leave the channel untouched.
        channels[digit] = channel
        commands[digit] = PressureCommand(flexor_mpa=channel.lead_pressure_mpa)
    return replace(state, channels=channels), commands


def start_release(state: GraspControllerState) -> GraspControllerState:
    """Switch every non-idle digit to RELEASE from its current pressure."""
    channels = {}
    for digit, channel in state.channels.items():
        if channel.phase in (Phase.RAMP, Phase.HOLD):
            channel = replace(
                channel,
                phase=Phase.RELEASE,
                release_steps=0,
                release_from_mpa=channel.lead_pressure_mpa,
            )
        channels[digit] = channel
    return replace(state, channels=channels)


@dataclass(frozen=True)
class DigitSample:
    phase: Phase
    lead_pressure_mpa: float
    angles_deg: tuple[float, ...]
    sensor_kpa: float
    contact_n: float
    solver_ok: bool = True


@dataclass(frozen=True)
class TraceRecord:
    time_s: float
    digits: dict[str, DigitSample]


def _tip_contact_force(result: EquilibriumResult, digit: str) -> float:
    """Total contact force on the digit's distal phalanx sample points."""
    prefix = f"{digit}/seg2/"
    return sum(c.force_n for c in result.contacts if c.body.startswith(prefix))


def run_closed_loop(
    desc: HandDescription,
    objects: Sequence[SceneObject],
    duration_s: float,
    dt_s: float = DEFAULT_STEP_S,
    *,
    controller: GraspControllerState | None = None,
    digits: Sequence[str] = DIGITS,
    penalty_n_per_mm: float = DEFAULT_PENALTY_N_PER_MM,
) -> list[TraceRecord]:
    """Simulate the adaptive grasp: controller step, equilibrium, sensing.

    One TraceRecord per step at t = k*dt. A digit whose equilibrium solve
    fails keeps its last good configuration for that step and the sample is
    flagged; the run continues.
    """
    if duration_s <= 0.0 or dt_s <= 0.0:
        raise ValueError("duration and dt must be positive")
    state = controller or GraspControllerState.initial(digits)
    threshold = state.threshold_kpa
    configs: dict[str, FingerConfig] = {d: rest_config(desc, d) for d in digits}
    readings = [TouchReading(sensor_id=d, pressure_kpa=0.0) for d in digits]
    trace: list[TraceRecord] = []
    n_steps = int(round(duration_s / dt_s))
    for k in range(1, n_steps + 1):
        state, commands = step_grasp_controller(state, readings, dt_s)
        samples: dict[str, DigitSample] = {}
        new_readings: list[TouchReading] = []
        for digit in digits:
            pressures = {
                mid: commands[digit].flexor_mpa for mid in desc.flexor_ids(digit)
            }
            pressures.update(
                {mid: commands[digit].extensor_mpa for mid in desc.extensor_ids(digit)}
            )
            result = solve_finger_equilibrium(
                desc,
                digit,
                pressures,
                scene_objects=objects,
                penalty_n_per_mm=penalty_n_per_mm,
                initial=configs[digit],
            )
            ok = result.converged
            if ok:
                configs[digit] = result.config
            tip_force = _tip_contact_force(result, digit) if ok else 0.0
            sensor = desc.sensor_by_id[digit]
            kpa = sensor_pressure(sensor, tip_force)
            new_readings.append(TouchReading(sensor_id=digit, pressure_kpa=kpa))
            samples[digit] = DigitSample(
                phase=state.channels[digit].phase,
                lead_pressure_mpa=state.channels[digit].lead_pressure_mpa,
                angles_deg=configs[digit].angles_deg,
                sensor_kpa=kpa,
                contact_n=tip_force,
                solver_ok=ok,
            )
        readings = new_readings
        trace.append(TraceRecord(time_s=k * dt_s, digits=samples))
    return trace


def trace_to_csv(trace: Sequence[TraceRecord]) -> str:
    """CSV export, one row per digit per step.

    Thumb rows report (CMC flexion, MP, IP) in the three angle columns.
    """
    lines = [
        "time_s,finger,phase,lead_pressure_mpa,alpha_deg,beta_deg,gamma_deg,sensor_kpa,contact_n"
    ]
    for record in trace:
        for digit, s in record.digits.items():
            angles = s.angles_deg
            if len(angles) == 4:   # thumb: drop the abduction column
                angles = (angles[0], angles[2], angles[3])
            lines.append(
                f"{record.time_s!r},{digit},{s.phase.value},{s.lead_pressure_mpa!r},"
                f"{angles[0]!r},{angles[1]!r},{angles[2]!r},{s.sensor_kpa!r},{s.contact_n!r}"
            )
    return "\n".join(lines) + "\n"
