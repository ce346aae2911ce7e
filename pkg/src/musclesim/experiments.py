"""Reproduction experiments and the calibration that backs the shipped hand.

Range-of-motion angles, fingertip and grasping forces, the Kapandji
opposition score, and the grasp suite are checked against the bench
measurements of the physical prototype. Moment arms, joint stiffnesses,
slack, and the extension pressure are not measurable on the prototype, so
they are fitted (all reports label results as fit-reproductions).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import control, mechanics, scene
from .hand import (
    DIGITS,
    FINGERS,
    HandDescription,
    JointSpec,
    TendonRoute,
    Waypoint,
)
from .lm import LMResult, levenberg_marquardt

# Bench reference measurements of the prototype.
ROM_TARGETS_DEG = {
    "stretched": (7.2, 15.0, 0.0),
    "relaxed": (29.7, 29.8, 14.5),
    "curled": (90.9, 87.1, 45.0),
}
ROM_LEAD_PRESSURE_MPA = 0.2
ROM_TOLERANCE_DEG = 2.0
FINGERTIP_TARGET_N = 1.95
FINGERTIP_UNCERTAINTY_N = 0.15
FINGERTIP_PRESSURE_MPA = 0.2
GRASP_TARGET_N = 2.97
GRASP_UNCERTAINTY_N = 0.25
GRASP_PRESSURE_MPA = 0.18
HUMAN_GRASP_MODERATE_N = 24.0
HUMAN_GRASP_STRONG_N = 43.0
KAPANDJI_TARGET_SCORE = 6


@dataclass(frozen=True)
class CalibrationTargets:
    rom_deg: dict[str, tuple[float, float, float]] = field(
        default_factory=lambda: dict(ROM_TARGETS_DEG)
    )
    rom_lead_pressure_mpa: float = ROM_LEAD_PRESSURE_MPA
    rom_tolerance_deg: float = ROM_TOLERANCE_DEG
    fingertip_n: float = FINGERTIP_TARGET_N
    fingertip_uncertainty_n: float = FINGERTIP_UNCERTAINTY_N
    fingertip_pressure_mpa: float = FINGERTIP_PRESSURE_MPA
    grasp_n: float = GRASP_TARGET_N
    grasp_uncertainty_n: float = GRASP_UNCERTAINTY_N
    grasp_pressure_mpa: float = GRASP_PRESSURE_MPA
    kapandji_score: int = KAPANDJI_TARGET_SCORE


def targets_from_json(text: str) -> CalibrationTargets:
    doc = json.loads(text)
    base = CalibrationTargets()
    rom = {k: tuple(v) for k, v in doc.get("rom_deg", base.rom_deg).items()}
    return replace(
        base,
        rom_deg=rom,
        **{k: doc[k] for k in doc if k != "rom_deg"},
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol constants plus the scalar calibration outputs.

    The geometric calibration outputs live in the hand description itself;
    the scalars that describe test protocols (extension pressure, fingertip
    posture, cylinder placement) live here.
    """

    extension_pressure_mpa: float = 0.14
    rom_finger: str = "little"
    fingertip_finger: str = "index"
    fingertip_mcp_deg: float = 45.0
    fingertip_pip_deg: float = 40.0
    fingertip_dip_deg: float = 20.0
    grasp_radius_mm: float = 30.0
    grasp_center_x_mm: float = 70.0
    grasp_center_z_mm: float = 32.0
    grasp_half_length_mm: float = 45.0
    penalty_n_per_mm: float = mechanics.DEFAULT_PENALTY_N_PER_MM
    kapandji_tolerance_mm: float = 5.0
    friction_coefficient: float = 0.8
    ramp_rate_mpa_per_s: float = control.DEFAULT_RAMP_RATE_MPA_PER_S
    pressure_cap_mpa: float = control.DEFAULT_PRESSURE_CAP_MPA
    controller_dt_s: float = control.DEFAULT_STEP_S
    grasp_duration_s: float = 3.2


def config_to_json(config: ExperimentConfig) -> str:
    return json.dumps(asdict(config), indent=2) + "\n"


def config_from_json(text: str) -> ExperimentConfig:
    return ExperimentConfig(**json.loads(text))


def default_experiment_config() -> ExperimentConfig:
    text = resources.files("musclesim").joinpath("data/experiment_config.json").read_text()
    return config_from_json(text)


def _flexor_map(desc: HandDescription, digit: str, lead_mpa: float) -> dict[str, float]:
    return {mid: lead_mpa for mid in desc.flexor_ids(digit)}


def _extensor_map(desc: HandDescription, digit: str, lead_mpa: float) -> dict[str, float]:
    return {mid: lead_mpa for mid in desc.extensor_ids(digit)}


# ----------------------------------------------------------------------------
# Range of motion


@dataclass(frozen=True)
class RomReport:
    finger: str
    lead_pressure_mpa: float
    extension_pressure_mpa: float
    postures: dict[str, tuple[float, float, float]]
    targets: dict[str, tuple[float, float, float]]
    tolerance_deg: float

    @property
    def deviations(self) -> dict[str, tuple[float, float, float]]:
        return {
            name: tuple(abs(a - t) for a, t in zip(angles, self.targets[name]))
            for name, angles in self.postures.items()
        }

    @property
    def passed(self) -> bool:
        return all(d <= self.tolerance_deg for devs in self.deviations.values() for d in devs)

    name = "rom"
    header = (
        "posture,alpha_deg,beta_deg,gamma_deg,"
        "target_alpha_deg,target_beta_deg,target_gamma_deg,"
        "dev_alpha_deg,dev_beta_deg,dev_gamma_deg"
    ).split(",")

    def to_rows(self) -> list[list]:
        rows = []
        for posture in ("stretched", "relaxed", "curled"):
            angles = self.postures[posture]
            target = self.targets[posture]
            dev = self.deviations[posture]
            rows.append([posture, *angles, *target, *dev])
        return rows


def rom_experiment(
    desc: HandDescription,
    config: ExperimentConfig | None = None,
    targets: CalibrationTargets | None = None,
) -> RomReport:
    """Solve the three bench postures on the reference finger."""
    config = config or default_experiment_config()
    targets = targets or CalibrationTargets()
    finger = config.rom_finger
    solves = {
        "relaxed": {},
        "curled": _flexor_map(desc, finger, targets.rom_lead_pressure_mpa),
        "stretched": _extensor_map(desc, finger, config.extension_pressure_mpa),
    }
    postures = {}
    for posture, pressures in solves.items():
        result = mechanics.solve_finger_equilibrium(desc, finger, pressures)
        if not result.converged:
            raise mechanics.NoConvergenceError(
                f"rom posture {posture} did not converge", result
            )
        postures[posture] = result.config.angles_deg
    return RomReport(
        finger=finger,
        lead_pressure_mpa=targets.rom_lead_pressure_mpa,
        extension_pressure_mpa=config.extension_pressure_mpa,
        postures=postures,
        targets={k: tuple(v) for k, v in targets.rom_deg.items()},
        tolerance_deg=targets.rom_tolerance_deg,
    )


# ----------------------------------------------------------------------------
# Forces


@dataclass(frozen=True)
class ForceReport:
    fingertip_n: float
    fingertip_pressure_mpa: float
    grasp_n: float
    grasp_pressure_mpa: float
    targets: CalibrationTargets

    @property
    def fingertip_dev_n(self) -> float:
        return abs(self.fingertip_n - self.targets.fingertip_n)

    @property
    def grasp_dev_n(self) -> float:
        return abs(self.grasp_n - self.targets.grasp_n)

    @property
    def passed(self) -> bool:
        return (
            self.fingertip_dev_n <= self.targets.fingertip_uncertainty_n
            and self.grasp_dev_n <= self.targets.grasp_uncertainty_n
        )

    name = "forces"
    header = "type,force_n,pressure_mpa,target_n,uncertainty_n,dev_n".split(",")

    def to_rows(self) -> list[list]:
        t = self.targets
        return [
            ["fingertip", self.fingertip_n, self.fingertip_pressure_mpa,
             t.fingertip_n, t.fingertip_uncertainty_n, self.fingertip_dev_n],
            ["grasping", self.grasp_n, self.grasp_pressure_mpa,
             t.grasp_n, t.grasp_uncertainty_n, self.grasp_dev_n],
            ["human_moderate", HUMAN_GRASP_MODERATE_N, None, None, None, None],
            ["human_strong", HUMAN_GRASP_STRONG_N, None, None, None, None],
        ]


def fingertip_posture(config: ExperimentConfig) -> tuple[float, float, float]:
    return (config.fingertip_mcp_deg, config.fingertip_pip_deg, config.fingertip_dip_deg)


def fingertip_force_experiment(
    desc: HandDescription,
    config: ExperimentConfig | None = None,
    targets: CalibrationTargets | None = None,
    pressure_mpa: float | None = None,
) -> float:
    """Simulated load-cell force of one finger at the test posture."""
    config = config or default_experiment_config()
    targets = targets or CalibrationTargets()
    pressure = targets.fingertip_pressure_mpa if pressure_mpa is None else pressure_mpa
    result = mechanics.fingertip_force(
        desc,
        config.fingertip_finger,
        _flexor_map(desc, config.fingertip_finger, pressure),
        fingertip_posture(config),
    )
    if not result.converged:
        raise mechanics.NoConvergenceError("fingertip solve did not converge", None)
    return result.force_n


def grasp_force_experiment(
    desc: HandDescription,
    config: ExperimentConfig | None = None,
    targets: CalibrationTargets | None = None,
    pressure_mpa: float | None = None,
) -> mechanics.GraspResult:
    """Split-cylinder compression during a medium wrap at the lead pressure."""
    config = config or default_experiment_config()
    targets = targets or CalibrationTargets()
    pressure = targets.grasp_pressure_mpa if pressure_mpa is None else pressure_mpa
    return mechanics.grasp_cylinder(
        desc,
        config.grasp_radius_mm,
        pressure,
        center_x_mm=config.grasp_center_x_mm,
        center_z_mm=config.grasp_center_z_mm,
        half_length_mm=config.grasp_half_length_mm,
        penalty_n_per_mm=config.penalty_n_per_mm,
    )


def force_experiment(
    desc: HandDescription,
    config: ExperimentConfig | None = None,
    targets: CalibrationTargets | None = None,
) -> ForceReport:
    config = config or default_experiment_config()
    targets = targets or CalibrationTargets()
    tip = fingertip_force_experiment(desc, config, targets)
    grasp = grasp_force_experiment(desc, config, targets)
    return ForceReport(
        fingertip_n=tip,
        fingertip_pressure_mpa=targets.fingertip_pressure_mpa,
        grasp_n=grasp.compression_n,
        grasp_pressure_mpa=targets.grasp_pressure_mpa,
        targets=targets,
    )


# ----------------------------------------------------------------------------
# Kapandji opposition score


@dataclass(frozen=True)
class KapandjiReport:
    score: int
    tolerance_mm: float
    target_names: tuple[str, ...]
    distances_mm: tuple[float, ...]

    name = "kapandji"
    header = "target_index,target_name,distance_mm,tolerance_mm,reached".split(",")

    def to_rows(self) -> list[list]:
        rows = []
        for i, (tname, dist) in enumerate(zip(self.target_names, self.distances_mm), 1):
            rows.append([i, tname, dist, self.tolerance_mm, dist <= self.tolerance_mm])
        rows.append(["score", "", None, None, self.score])
        return rows


def kapandji_targets(
    desc: HandDescription, config: ExperimentConfig
) -> list[tuple[str, np.ndarray]]:
    """Ordered opposition targets: points along the long fingers, then down
    the little finger toward the palm, all at the touch posture."""
    posture = ROM_TARGETS_DEG["curled"]
    tips = {}
    joints = {}
    for finger in FINGERS:
        pts = mechanics.forward_kinematics(desc, finger, posture)
        joints[finger] = pts[:3]
        tips[finger] = pts[3]
    little_mcp = joints["little"][0]
    palm_point = np.array([little_mcp[0] - 15.0, little_mcp[1], 0.0])
    return [
        ("index_proximal_side", joints["index"][1]),
        ("index_middle_side", joints["index"][2]),
        ("index_tip", tips["index"]),
        ("middle_tip", tips["middle"]),
        ("ring_tip", tips["ring"]),
        ("little_tip", tips["little"]),
        ("little_dip_joint", joints["little"][2]),
        ("little_pip_joint", joints["little"][1]),
        ("little_mcp_joint", joints["little"][0]),
        ("palm_base_little", palm_point),
    ]


def _thumb_tip(desc: HandDescription, angles_deg: np.ndarray) -> np.ndarray:
    return mechanics.forward_kinematics(desc, "thumb", angles_deg)[-1]


def thumb_tip_min_distance(
    desc: HandDescription, target: np.ndarray, n_coarse: int = 7
) -> float:
    """Min distance from the thumb-tip workspace (within joint limits) to the
    target: coarse grid then deterministic pattern-search refinement."""
    model = mechanics.chain_model(desc, "thumb")
    lo, hi = model.lo_deg, model.hi_deg
    axes = [np.linspace(lo[i], hi[i], n_coarse) for i in range(4)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)
    best = None
    best_d = np.inf
    for angles in grid:
        d = float(np.linalg.norm(_thumb_tip(desc, angles) - target))
        if d < best_d:
            best_d, best = d, angles.copy()
    steps = (hi - lo) / (n_coarse - 1)
    for _ in range(60):
        moved = False
        for i in range(4):
            for sign in (-1.0, 1.0):
                trial = best.copy()
                trial[i] = min(max(trial[i] + sign * steps[i], lo[i]), hi[i])
                d = float(np.linalg.norm(_thumb_tip(desc, trial) - target))
                if d < best_d:
                    best_d, best = d, trial
                    moved = True
        if not moved:
            steps = steps / 2.0
            if np.max(steps) < 1e-3:
                break
    return best_d


def kapandji_test(
    desc: HandDescription,
    config: ExperimentConfig | None = None,
    tolerance_mm: float | None = None,
) -> KapandjiReport:
    """Clinical 0-10 opposition score: the highest prefix of ordered targets
    the thumb tip can approach within tolerance."""
    config = config or default_experiment_config()
    tol = config.kapandji_tolerance_mm if tolerance_mm is None else tolerance_mm
    targets = kapandji_targets(desc, config)
    distances = tuple(
        thumb_tip_min_distance(desc, point) for _, point in targets
    )
    score = 0
    for dist in distances:
        if dist <= tol:
            score += 1
        else:
            break
    return KapandjiReport(
        score=score,
        tolerance_mm=tol,
        target_names=tuple(name for name, _ in targets),
        distances_mm=distances,
    )


# ----------------------------------------------------------------------------
# Grasp suite (closed-loop adaptive grasps)


@dataclass(frozen=True)
class GraspOutcome:
    object_name: str
    mass_g: float
    success: bool
    fingers_holding: int
    total_normal_n: float
    required_n: float
    margin_n: float
    diagnostic: str


@dataclass(frozen=True)
class GraspSuiteReport:
    outcomes: tuple[GraspOutcome, ...]

    @property
    def passed(self) -> bool:
        return all(o.success == (o.required_n <= o.total_normal_n) for o in self.outcomes)

    name = "grasp_suite"
    header = (
        "object,mass_g,success,fingers_holding,total_normal_n,required_n,margin_n,diagnostic"
    ).split(",")

    def to_rows(self) -> list[list]:
        return [
            [o.object_name, o.mass_g, o.success, o.fingers_holding,
             o.total_normal_n, o.required_n, o.margin_n, o.diagnostic]
            for o in self.outcomes
        ]


def grasp_object(
    desc: HandDescription,
    obj: scene.SceneObject,
    config: ExperimentConfig | None = None,
) -> tuple[GraspOutcome, list[control.TraceRecord]]:
    """Close the hand around one object under the adaptive controller."""
    config = config or default_experiment_config()
    threshold = min(s.threshold_kpa for s in desc.sensors if s.location == "fingertip")
    state = control.GraspControllerState.initial(
        ramp_rate_mpa_per_s=config.ramp_rate_mpa_per_s,
        threshold_kpa=threshold,
        pressure_cap_mpa=config.pressure_cap_mpa,
    )
    trace = control.run_closed_loop(
        desc,
        [obj],
        config.grasp_duration_s,
        config.controller_dt_s,
        controller=state,
        penalty_n_per_mm=config.penalty_n_per_mm,
    )
    final = trace[-1]
    holding = sum(
        1 for s in final.digits.values() if s.phase == control.Phase.HOLD
    )
    # Total normal force from the final equilibrium of every digit, plus the
    # palm reaction: an enveloping grasp squeezes the object into the palm,
    # which carries the net palm-ward push as its own contact normal force.
    total = 0.0
    palm_ward = 0.0
    for digit in DIGITS:
        pressures = {
            mid: final.digits[digit].lead_pressure_mpa for mid in desc.flexor_ids(digit)
        }
        result = mechanics.solve_finger_equilibrium(
            desc,
            digit,
            pressures,
            scene_objects=[obj],
            penalty_n_per_mm=config.penalty_n_per_mm,
            initial=mechanics.FingerConfig(
                joint_ids=mechanics.chain_model(desc, digit).joint_ids,
                angles_deg=final.digits[digit].angles_deg,
            ),
        )
        for contact in result.contacts:
            total += contact.force_n
            palm_ward += contact.force_n * contact.normal[2]
    total += max(0.0, palm_ward)
    required = scene.required_hold_force_n(obj, config.friction_coefficient)
    success = holding >= 2 and total >= required
    if success:
        diagnostic = ""
    elif holding < 2:
        diagnostic = f"only {holding} digits reached hold"
    else:
        diagnostic = (
            f"force budget: need {required:.2f} N, achieved {total:.2f} N at cap"
        )
    outcome = GraspOutcome(
        object_name=obj.name,
        mass_g=obj.mass_g,
        success=success,
        fingers_holding=holding,
        total_normal_n=total,
        required_n=required,
        margin_n=total - required,
        diagnostic=diagnostic,
    )
    return outcome, trace


def grasp_object_suite(
    desc: HandDescription,
    objects: Sequence[scene.SceneObject] | None = None,
    config: ExperimentConfig | None = None,
) -> GraspSuiteReport:
    config = config or default_experiment_config()
    if objects is None:
        objects = [factory() for factory in scene.OBJECT_LIBRARY.values()]
    outcomes = []
    for obj in objects:
        outcome, _ = grasp_object(desc, obj, config)
        outcomes.append(outcome)
    return GraspSuiteReport(outcomes=tuple(outcomes))


# ----------------------------------------------------------------------------
# Calibration

# Parameter layout: shared across the four fingers.
_PARAM_NAMES = (
    "arm_fdp_mcp", "arm_fdp_pip", "arm_fdp_dip",
    "arm_fds_mcp", "arm_fds_pip",
    "arm_ed_mcp", "arm_ed_pip", "arm_ed_dip",
    "stiff_mcp", "stiff_pip", "stiff_dip",
    "slack_flexor", "slack_extensor",
    "extension_pressure_mpa",
    "fingertip_pip_deg", "fingertip_dip_deg",
    "grasp_center_x_mm", "grasp_center_z_mm",
)
_PARAM_LOWER = np.array([1.2, 1.2, 1.2, 1.2, 1.2, 1.2, 1.2, 1.2,
                         0.3, 0.3, 0.3, 0.0, 0.0, 0.02, 10.0, 5.0, 35.0, 18.0])
_PARAM_UPPER = np.array([12.0, 12.0, 12.0, 12.0, 12.0, 12.0, 12.0, 12.0,
                         15.0, 15.0, 15.0, 6.0, 6.0, 0.45, 80.0, 80.0, 90.0, 60.0])


def _extract_parameters(desc: HandDescription, config: ExperimentConfig) -> np.ndarray:
    route = desc.route_by_muscle
    fdp = route["fdp_index"]
    fds = route["fds_index_a"]
    ed = route["ed_index"]
    joints = desc.joint_by_id
    return np.array([
        fdp.waypoints[0].moment_arm_mm, fdp.waypoints[1].moment_arm_mm,
        fdp.waypoints[2].moment_arm_mm,
        fds.waypoints[0].moment_arm_mm, fds.waypoints[1].moment_arm_mm,
        ed.waypoints[0].moment_arm_mm, ed.waypoints[1].moment_arm_mm,
        ed.waypoints[2].moment_arm_mm,
        joints["index_mcp"].stiffness_nmm_per_deg,
        joints["index_pip"].stiffness_nmm_per_deg,
        joints["index_dip"].stiffness_nmm_per_deg,
        fdp.slack_mm, ed.slack_mm,
        config.extension_pressure_mpa,
        config.fingertip_pip_deg, config.fingertip_dip_deg,
        config.grasp_center_x_mm, config.grasp_center_z_mm,
    ])


def apply_parameters(
    desc: HandDescription, config: ExperimentConfig, p: np.ndarray
) -> tuple[HandDescription, ExperimentConfig]:
    """Rebuild the description and config with the shared parameter vector."""
    v = dict(zip(_PARAM_NAMES, p))
    arms = {
        "fdp": (v["arm_fdp_mcp"], v["arm_fdp_pip"], v["arm_fdp_dip"]),
        "fds": (v["arm_fds_mcp"], v["arm_fds_pip"]),
        "ed": (v["arm_ed_mcp"], v["arm_ed_pip"], v["arm_ed_dip"]),
    }
    stiffness = {"mcp": v["stiff_mcp"], "pip": v["stiff_pip"], "dip": v["stiff_dip"]}

    joints = []
    for joint in desc.joints:
        digit, _, name = joint.id.partition("_")
        if digit in FINGERS and name in stiffness:
            joints.append(replace(joint, stiffness_nmm_per_deg=stiffness[name]))
        else:
            joints.append(joint)

    routes = []
    for route_ in desc.routes:
        kind = route_.muscle_id.split("_")[0]
        if kind in arms and desc.muscle_by_id[route_.muscle_id].target_finger in FINGERS:
            new_wps = tuple(
                replace(wp, moment_arm_mm=arm)
                for wp, arm in zip(route_.waypoints, arms[kind])
            )
            slack = v["slack_flexor"] if kind in ("fdp", "fds") else v["slack_extensor"]
            routes.append(replace(route_, waypoints=new_wps, slack_mm=slack))
        else:
            routes.append(route_)

    new_desc = replace(desc, joints=tuple(joints), routes=tuple(routes))
    new_config = replace(
        config,
        extension_pressure_mpa=v["extension_pressure_mpa"],
        fingertip_pip_deg=v["fingertip_pip_deg"],
        fingertip_dip_deg=v["fingertip_dip_deg"],
        grasp_center_x_mm=v["grasp_center_x_mm"],
        grasp_center_z_mm=v["grasp_center_z_mm"],
    )
    return new_desc, new_config


@dataclass(frozen=True)
class CalibrationReport:
    converged: bool
    success: bool        # targets met within their tolerances
    reason: str
    iterations: int
    cost: float
    residual_names: tuple[str, ...]
    residuals: tuple[float, ...]
    parameter_names: tuple[str, ...]
    parameters: tuple[float, ...]

    name = "fit_report"
    header = "kind,name,value".split(",")

    def to_rows(self) -> list[list]:
        rows = [
            ["status", "converged", self.converged],
            ["status", "success", self.success],
            ["status", "reason", self.reason],
            ["status", "iterations", self.iterations],
            ["status", "cost", self.cost],
        ]
        rows += [["residual", n, v] for n, v in zip(self.residual_names, self.residuals)]
        rows += [["parameter", n, v] for n, v in zip(self.parameter_names, self.parameters)]
        return rows


@dataclass(frozen=True)
class CalibrationResult:
    hand: HandDescription
    config: ExperimentConfig
    report: CalibrationReport
    lm: LMResult


_RESIDUAL_NAMES = (
    "curled_alpha", "curled_beta", "curled_gamma",
    "stretched_alpha", "stretched_beta", "stretched_gamma",
    "fingertip_force", "grasp_force",
)


def calibration_residuals(
    desc: HandDescription,
    config: ExperimentConfig,
    targets: CalibrationTargets,
) -> np.ndarray:
    """Weighted deviations: posture angles at 1/deg, forces at 1/uncertainty."""
    finger = config.rom_finger
    curled = mechanics.solve_finger_equilibrium(
        desc, finger, _flexor_map(desc, finger, targets.rom_lead_pressure_mpa)
    )
    stretched = mechanics.solve_finger_equilibrium(
        desc, finger, _extensor_map(desc, finger, config.extension_pressure_mpa)
    )
    tip = mechanics.fingertip_force(
        desc,
        config.fingertip_finger,
        _flexor_map(desc, config.fingertip_finger, targets.fingertip_pressure_mpa),
        fingertip_posture(config),
    )
    grasp = grasp_force_experiment(desc, config, targets)
    out = []
    for angles, key in ((curled, "curled"), (stretched, "stretched")):
        for measured, target in zip(angles.config.angles_deg, targets.rom_deg[key]):
            out.append(measured - target)
    out.append((tip.force_n - targets.fingertip_n) / targets.fingertip_uncertainty_n)
    out.append((grasp.compression_n - targets.grasp_n) / targets.grasp_uncertainty_n)
    return np.asarray(out)


def _reference_force(desc: HandDescription, muscle_id: str, pressure: float, strain: float) -> float:
    from .pam import pam_force

    pam = desc.muscle_by_id[muscle_id].pam
    return pam_force(pam, pressure, max(0.0, min(strain, 0.999)))


def _rom_arm_fixed_point(
    desc: HandDescription, targets: CalibrationTargets, p: np.ndarray, p_ext: float
) -> np.ndarray:
    """Moment arms satisfying the curled/stretched torque balances at the
    target angles, for the stiffness currently in p (little-finger reference).

    The FDS arms keep their ratio to the FDP arms; strains and forces are
    iterated to a fixed point. Results are clipped to the parameter bounds.
    """
    v = dict(zip(_PARAM_NAMES, p))
    rest = np.asarray(targets.rom_deg["relaxed"])
    d_curl = np.radians(np.asarray(targets.rom_deg["curled"]) - rest)
    d_str = np.radians(rest - np.asarray(targets.rom_deg["stretched"]))
    curl_deg = np.degrees(d_curl)
    str_deg = np.degrees(d_str)
    k = np.array([v["stiff_mcp"], v["stiff_pip"], v["stiff_dip"]])
    lead = targets.rom_lead_pressure_mpa

    fdp = np.array([v["arm_fdp_mcp"], v["arm_fdp_pip"], v["arm_fdp_dip"]])
    ratio = np.array([v["arm_fds_mcp"] / v["arm_fdp_mcp"], v["arm_fds_pip"] / v["arm_fdp_pip"]])
    slack_f = v["slack_flexor"]
    for _ in range(25):
        fds = ratio * fdp[:2]
        e_fdp = float(fdp @ d_curl)
        e_fds = float(fds @ d_curl[:2])
        f_fdp = _reference_force(desc, "fdp_little", lead, (e_fdp - slack_f) / 220.0)
        f_fds = _reference_force(desc, "fds_little_a", lead, (e_fds - slack_f) / 160.0)
        if f_fdp <= 0.1 or f_fds <= 0.1:
            break
        new = np.array([
            k[0] * curl_deg[0] / (f_fdp + 2.0 * f_fds * ratio[0]),
            k[1] * curl_deg[1] / (f_fdp + 2.0 * f_fds * ratio[1]),
            k[2] * curl_deg[2] / f_fdp,
        ])
        new = np.clip(new, _PARAM_LOWER[0:3], _PARAM_UPPER[0:3])
        if np.max(np.abs(new - fdp)) < 1e-10:
            fdp = new
            break
        fdp = new
    fds = np.clip(ratio * fdp[:2], _PARAM_LOWER[3:5], _PARAM_UPPER[3:5])

    ed = np.array([v["arm_ed_mcp"], v["arm_ed_pip"], v["arm_ed_dip"]])
    slack_e = v["slack_extensor"]
    for _ in range(25):
        e_ed = float(ed @ d_str)
        f_ed = _reference_force(desc, "ed_little", p_ext, (e_ed - slack_e) / 220.0)
        if f_ed <= 0.1:
            break
        new = np.clip(k * str_deg / f_ed, _PARAM_LOWER[5:8], _PARAM_UPPER[5:8])
        if np.max(np.abs(new - ed)) < 1e-10:
            ed = new
            break
        ed = new

    out = p.copy()
    out[0:3] = fdp
    out[3:5] = fds
    out[5:8] = ed
    return out


def _presolve(
    desc: HandDescription,
    config: ExperimentConfig,
    targets: CalibrationTargets,
    p0: np.ndarray,
) -> np.ndarray:
    """Deterministic starting point for the LM polish.

    Scans the stiffness scale (which trades fingertip surplus against the
    moment arms re-fitted to the posture targets) and the cylinder placement,
    both of which sit in kinked valleys that plain LM navigates poorly.
    """
    p = p0.copy()
    p_ext = p[_PARAM_NAMES.index("extension_pressure_mpa")]
    base_k = p[8:11].copy()

    def fingertip_at(scale: float) -> tuple[float, np.ndarray]:
        trial = p.copy()
        trial[8:11] = np.clip(base_k * scale, _PARAM_LOWER[8:11], _PARAM_UPPER[8:11])
        trial = _rom_arm_fixed_point(desc, targets, trial, p_ext)
        d, c = apply_parameters(desc, config, trial)
        force = mechanics.fingertip_force(
            d, c.fingertip_finger,
            _flexor_map(d, c.fingertip_finger, targets.fingertip_pressure_mpa),
            fingertip_posture(c),
        ).force_n
        return force, trial

    best_err = None
    best_p = None
    lo_s, hi_s = 0.45, 1.6
    for scale in np.linspace(lo_s, hi_s, 9):
        force, trial = fingertip_at(float(scale))
        err = abs(force - targets.fingertip_n)
        if best_err is None or err < best_err:
            best_err, best_p, best_scale = err, trial, float(scale)
    step = (hi_s - lo_s) / 8.0
    for _ in range(7):
        step *= 0.5
        for cand in (best_scale - step, best_scale + step):
            if not (lo_s <= cand <= hi_s):
                continue
            force, trial = fingertip_at(cand)
            err = abs(force - targets.fingertip_n)
            if err < best_err:
                best_err, best_p, best_scale = err, trial, cand
    p = best_p

    # Cylinder placement scan for the grasp target.
    ix = _PARAM_NAMES.index("grasp_center_x_mm")
    iz = _PARAM_NAMES.index("grasp_center_z_mm")

    def grasp_err(x_mm: float, z_mm: float) -> float:
        trial = p.copy()
        trial[ix], trial[iz] = x_mm, z_mm
        d, c = apply_parameters(desc, config, trial)
        force = grasp_force_experiment(d, c, targets).compression_n
        return abs(force - targets.grasp_n)

    best = (p[ix], p[iz])
    best_err = grasp_err(*best)
    for x_mm in (58.0, 65.0, 72.0, 79.0, 86.0):
        for z_mm in (26.0, 33.0, 40.0):
            err = grasp_err(x_mm, z_mm)
            if err < best_err:
                best_err, best = err, (x_mm, z_mm)
    step_x, step_z = 3.5, 3.5
    for _ in range(4):
        moved = False
        for dx, dz in ((-step_x, 0), (step_x, 0), (0, -step_z), (0, step_z)):
            cand = (
                float(np.clip(best[0] + dx, _PARAM_LOWER[ix], _PARAM_UPPER[ix])),
                float(np.clip(best[1] + dz, _PARAM_LOWER[iz], _PARAM_UPPER[iz])),
            )
            err = grasp_err(*cand)
            if err < best_err:
                best_err, best, moved = err, cand, True
        if not moved:
            step_x *= 0.5
            step_z *= 0.5
    p[ix], p[iz] = best
    return p


def calibrate_hand(
    desc: HandDescription,
    targets: CalibrationTargets | None = None,
    config: ExperimentConfig | None = None,
    max_iterations: int = 500,
    presolve: bool = True,
) -> CalibrationResult:
    """Fit the unmeasured mechanical parameters to the bench targets.

    Bounded Levenberg-Marquardt over shared moment arms, joint stiffnesses,
    slack, the extension pressure, and the two test-protocol placements.
    A deterministic presolve (arm fixed point, stiffness-scale scan, placement
    scan) supplies the starting point when the targets are far off.
    """
    targets = targets or CalibrationTargets()
    config = config or ExperimentConfig()
    x0 = _extract_parameters(desc, config)

    def residual_fn(p: np.ndarray) -> np.ndarray:
        d, c = apply_parameters(desc, config, p)
        return calibration_residuals(d, c, targets)

    def targets_met(res: np.ndarray) -> bool:
        return bool(
            np.max(np.abs(res[:6])) <= targets.rom_tolerance_deg
            and abs(res[6]) <= 1.0
            and abs(res[7]) <= 1.0
        )

    res0 = residual_fn(x0)
    if targets_met(res0):
        # Fixed point: nothing to fit, parameters unchanged.
        lm_result = LMResult(
            x=x0, cost=float(res0 @ res0), residual=res0, iterations=0,
            converged=True, reason="targets-already-met", cost_history=[float(res0 @ res0)],
        )
    else:
        start = _presolve(desc, config, targets, x0) if presolve else x0
        lm_result = levenberg_marquardt(
            residual_fn, start, _PARAM_LOWER, _PARAM_UPPER,
            max_iterations=max_iterations, rel_step=1e-4,
        )
    fitted_desc, fitted_config = apply_parameters(desc, config, lm_result.x)
    res = lm_result.residual
    rom_ok = bool(np.max(np.abs(res[:6])) <= targets.rom_tolerance_deg)
    forces_ok = bool(abs(res[6]) <= 1.0 and abs(res[7]) <= 1.0)
    report = CalibrationReport(
        converged=lm_result.converged,
        success=rom_ok and forces_ok,
        reason=lm_result.reason,
        iterations=lm_result.iterations,
        cost=lm_result.cost,
        residual_names=_RESIDUAL_NAMES,
        residuals=tuple(float(r) for r in res),
        parameter_names=_PARAM_NAMES,
        parameters=tuple(float(x) for x in lm_result.x),
    )
    return CalibrationResult(hand=fitted_desc, config=fitted_config, report=report, lm=lm_result)


# ----------------------------------------------------------------------------
# Export


def export_reports(reports: Sequence, out_dir: Path, fmt: str = "csv") -> Path:
    """Write every report plus a checksum manifest; returns the manifest path."""
    from .reporting import write_manifest, write_report

    out_dir = Path(out_dir)
    entries: dict[str, str] = {}
    for report in reports:
        filename, digest = write_report(
            out_dir, report.name, report.header, report.to_rows(), fmt
        )
        entries[filename] = digest
    return write_manifest(out_dir, entries)
