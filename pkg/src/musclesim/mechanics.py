"""Tendon kinematics and quasi-static equilibrium of single digits.

Conventions: joint angles in degrees, flexion positive; torques in N*mm;
tendon excursions in mm (positive when a flexion-sense tendon is reeled in).
Each digit is a planar chain placed in 3D by its metacarpal frame; the thumb
adds an abduction DOF that pronates its flexion plane about the thumb column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .hand import (
    DIGITS,
    FingerChain,
    Frame,
    HandDescription,
    MuscleSpec,
    TendonRoute,
)
from .pam import pam_force
from .scene import SceneObject, signed_distance

DEFAULT_PENALTY_N_PER_MM = 5.0
SOLVER_TOL_NMM = 1e-6
MAX_SOLVER_ITERATIONS = 200

# Sample points per phalanx used for contact detection: midpoint and tip.
_SEGMENT_FRACTIONS = ((0.5, "mid"), (1.0, "end"))


class UnknownJointError(KeyError):
    pass


class UnknownFingerError(KeyError):
    pass


class NoConvergenceError(RuntimeError):
    def __init__(self, message: str, result: "EquilibriumResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class FingerConfig:
    """Joint angles of one digit chain, in degrees."""

    joint_ids: tuple[str, ...]
    angles_deg: tuple[float, ...]

    def angle(self, joint_id: str) -> float:
        try:
            return self.angles_deg[self.joint_ids.index(joint_id)]
        except ValueError as err:
            raise UnknownJointError(joint_id) from err

    def as_array(self) -> np.ndarray:
        return np.asarray(self.angles_deg, dtype=float)


@dataclass(frozen=True)
class Contact:
    """One penalty contact between a phalanx sample point and an object."""

    body: str                       # "<digit>/seg<k>/<mid|end>" or "palm"
    segment: int                    # phalanx index on the digit chain
    fraction: float                 # position along the phalanx (0..1]
    point_mm: tuple[float, float, float]
    normal: tuple[float, float, float]   # outward from the object
    penetration_mm: float
    force_n: float


@dataclass(frozen=True)
class EquilibriumResult:
    config: FingerConfig
    tendon_tensions: dict[str, float]
    residual_nmm: float             # max-norm with limit complementarity masked
    iterations: int
    converged: bool
    at_limit: tuple[bool, ...]
    limit_torque_nmm: tuple[float, ...]
    contacts: tuple[Contact, ...] = ()


# ----------------------------------------------------------------------------
# Compiled chain model


def _rot_x(rad: float) -> np.ndarray:
    c, s = math.cos(rad), math.sin(rad)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(rad: float) -> np.ndarray:
    c, s = math.cos(rad), math.sin(rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(rad: float) -> np.ndarray:
    c, s = math.cos(rad), math.sin(rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _frame_rotation(frame: Frame) -> np.ndarray:
    return (
        _rot_z(math.radians(frame.yaw_deg))
        @ _rot_y(math.radians(frame.pitch_deg))
        @ _rot_x(math.radians(frame.roll_deg))
    )


@dataclass
class _ChainModel:
    digit: str
    joint_ids: tuple[str, ...]
    rest_deg: np.ndarray
    stiffness: np.ndarray           # N*mm per degree
    lo_deg: np.ndarray
    hi_deg: np.ndarray
    seg_mm: np.ndarray
    origin: np.ndarray
    rot: np.ndarray                 # frame rotation matrix
    is_thumb: bool
    muscle_ids: tuple[str, ...]
    arm_mm: np.ndarray              # (n_m, n_j) signed, + = flexion
    slack_mm: np.ndarray
    area_mm2: np.ndarray            # pi d0^2 / 4 per muscle
    tan2: np.ndarray
    sin2: np.ndarray
    kt: np.ndarray
    mlen: np.ndarray
    flexor: np.ndarray              # bool per muscle

    @property
    def n_joints(self) -> int:
        return len(self.joint_ids)


def chain_model(desc: HandDescription, digit: str) -> _ChainModel:
    """Compiled per-digit arrays; cached on the description instance."""
    cache = desc.__dict__.setdefault("_chain_models", {})
    if digit in cache:
        return cache[digit]
    if digit not in DIGITS:
        raise UnknownFingerError(digit)
    joint_ids = desc.chain_joint_ids(digit)
    joints = [desc.joint_by_id[j] for j in joint_ids]
    frame = desc.frame_by_digit[digit]
    muscles = desc.muscles_of(digit)
    index_of = {j: i for i, j in enumerate(joint_ids)}

    arm = np.zeros((len(muscles), len(joint_ids)))
    slack = np.zeros(len(muscles))
    for mi, muscle in enumerate(muscles):
        route = desc.route_by_muscle[muscle.id]
        slack[mi] = route.slack_mm
        for wp in route.waypoints:
            if wp.joint_id not in index_of:
                raise UnknownJointError(
                    f"route for {muscle.id} references {wp.joint_id} outside {digit}"
                )
            sense = 1.0 if wp.sense == "flexion" else -1.0
            arm[mi, index_of[wp.joint_id]] = sense * wp.moment_arm_mm

    theta0 = np.array([math.radians(m.pam.theta0_deg) for m in muscles])
    from .hand import FLEXOR_ACRONYMS

    model = _ChainModel(
        digit=digit,
        joint_ids=joint_ids,
        rest_deg=np.array([j.rest_angle_deg for j in joints]),
        stiffness=np.array([j.stiffness_nmm_per_deg for j in joints]),
        lo_deg=np.array([j.min_angle_deg for j in joints]),
        hi_deg=np.array([j.max_angle_deg for j in joints]),
        seg_mm=np.asarray(desc.segment_lengths(digit), dtype=float),
        origin=np.asarray(frame.origin_mm, dtype=float),
        rot=_frame_rotation(frame),
        is_thumb=(digit == "thumb"),
        muscle_ids=tuple(m.id for m in muscles),
        arm_mm=arm,
        slack_mm=slack,
        area_mm2=np.array([math.pi * m.pam.d0_mm**2 / 4.0 for m in muscles]),
        tan2=np.tan(theta0) ** 2,
        sin2=np.sin(theta0) ** 2,
        kt=np.array([m.pam.tube_stiffness_n for m in muscles]),
        mlen=np.array([m.pam.rest_length_mm for m in muscles]),
        flexor=np.array([m.acronym in FLEXOR_ACRONYMS for m in muscles]),
    )
    cache[digit] = model
    return model


def _pressure_vector(model: _ChainModel, pressures: Mapping[str, float]) -> np.ndarray:
    return np.array([float(pressures.get(mid, 0.0)) for mid in model.muscle_ids])


def rest_config(desc: HandDescription, digit: str) -> FingerConfig:
    model = chain_model(desc, digit)
    return FingerConfig(joint_ids=model.joint_ids, angles_deg=tuple(float(x) for x in model.rest_deg))


# ----------------------------------------------------------------------------
# Kinematics


def _chain_points_local(model: _ChainModel, theta_deg: np.ndarray):
    """Cumulative flexion angles and planar joint positions (local frame)."""
    if model.is_thumb:
        flex = np.radians([theta_deg[0], theta_deg[2], theta_deg[3]])
    else:
        flex = np.radians(theta_deg)
    phi = np.cumsum(flex)
    d = np.column_stack([np.cos(phi), np.zeros_like(phi), np.sin(phi)])
    steps = model.seg_mm[:, None] * d
    joints_local = np.vstack([np.zeros(3), np.cumsum(steps, axis=0)])
    return phi, d, joints_local


def _total_rotation(model: _ChainModel, theta_deg: np.ndarray) -> np.ndarray:
    if model.is_thumb:
        return model.rot @ _rot_x(math.radians(theta_deg[1]))
    return model.rot


def forward_kinematics(desc: HandDescription, digit: str, config) -> np.ndarray:
    """World positions of every joint pivot plus the fingertip, (n_j+1, 3).

    For the thumb the two CMC joints share a pivot, so the first two rows
    coincide.
    """
    model = chain_model(desc, digit)
    theta = _as_angles(model, config)
    _, _, joints_local = _chain_points_local(model, theta)
    rot = _total_rotation(model, theta)
    world = model.origin + joints_local @ rot.T
    if model.is_thumb:
        return np.vstack([world[0], world])
    return world


def _as_angles(model: _ChainModel, config) -> np.ndarray:
    if isinstance(config, FingerConfig):
        if config.joint_ids != model.joint_ids:
            raise UnknownJointError(
                f"config joints {config.joint_ids} do not match {model.joint_ids}"
            )
        return config.as_array()
    theta = np.asarray(config, dtype=float)
    if theta.shape != (model.n_joints,):
        raise UnknownJointError(
            f"expected {model.n_joints} angles for {model.digit}, got shape {theta.shape}"
        )
    return theta


_SEG_IDX = np.array([0, 0, 1, 1, 2, 2])
_FRACS = np.array([0.5, 1.0, 0.5, 1.0, 0.5, 1.0])


def _surface_points(model: _ChainModel, theta_deg: np.ndarray):
    """Contact sample points (world) with their (segment, fraction) tags."""
    pts, _ = _points_and_jacobians(model, theta_deg)
    tags = [
        (int(k), float(f), f"{model.digit}/seg{k}/{'mid' if f == 0.5 else 'end'}")
        for k, f in zip(_SEG_IDX, _FRACS)
    ]
    return pts, tags


def _points_and_jacobians(model: _ChainModel, theta_deg: np.ndarray):
    """All contact sample points and d(point)/d(theta_rad) in one pass.

    Returns (pts_world (n_pts, 3), jac_world (n_pts, 3, n_joints)).
    """
    if model.is_thumb:
        flex = np.radians(theta_deg[[0, 2, 3]])
    else:
        flex = np.radians(theta_deg)
    phi = np.cumsum(flex)
    cphi, sphi = np.cos(phi), np.sin(phi)
    zeros = np.zeros_like(phi)
    d = np.stack([cphi, zeros, sphi], axis=1)          # (3, 3) segment directions
    dperp = np.stack([-sphi, zeros, cphi], axis=1)
    joints_local = np.vstack([np.zeros(3), np.cumsum(model.seg_mm[:, None] * d, axis=0)])
    pts_local = (
        joints_local[_SEG_IDX]
        + (_FRACS * model.seg_mm[_SEG_IDX])[:, None] * d[_SEG_IDX]
    )
    # Weight of flexion joint j on point m: full phalanx lengths below the
    # point's segment, the partial length on its own segment, zero beyond.
    j_idx = np.arange(3)
    w = model.seg_mm[None, :] * (j_idx[None, :] < _SEG_IDX[:, None]) + (
        (_FRACS[:, None] * model.seg_mm[_SEG_IDX][:, None])
        * (j_idx[None, :] == _SEG_IDX[:, None])
    )
    terms = w[:, :, None] * dperp[None, :, :]          # (n_pts, 3 joints, xyz)
    jac_chain = np.flip(np.cumsum(np.flip(terms, 1), 1), 1)
    if model.is_thumb:
        rot = model.rot @ _rot_x(math.radians(theta_deg[1]))
        # d/d(abd) = x_local cross point_local.
        abd = np.empty_like(pts_local)
        abd[:, 0] = 0.0
        abd[:, 1] = -pts_local[:, 2]
        abd[:, 2] = pts_local[:, 1]
        jac_local = np.stack(
            [jac_chain[:, 0], abd, jac_chain[:, 1], jac_chain[:, 2]], axis=1
        )
    else:
        rot = model.rot
        jac_local = jac_chain
    pts_world = model.origin + pts_local @ rot.T
    jac_world = np.einsum("ab,mjb->maj", rot, jac_local)   # (n_pts, xyz, n_joints)
    return pts_world, jac_world


def _point_jacobian(model: _ChainModel, theta_deg: np.ndarray, segment: int, fraction: float) -> np.ndarray:
    """d(point)/d(theta_rad), world frame, shape (3, n_joints)."""
    phi, d, joints_local = _chain_points_local(model, theta_deg)
    rot = _total_rotation(model, theta_deg)
    n_chain = len(model.seg_mm)
    dperp = np.column_stack([-np.sin(phi), np.zeros_like(phi), np.cos(phi)])
    # Local planar derivatives with respect to each flexion angle.
    cols_chain = []
    for i in range(n_chain):
        col = np.zeros(3)
        for j in range(i, segment + 1):
            weight = model.seg_mm[j] * (fraction if j == segment else 1.0)
            col += weight * dperp[j]
        cols_chain.append(col)
    point_local = joints_local[segment] + fraction * model.seg_mm[segment] * d[segment]
    if model.is_thumb:
        # DOF order: cmc_flex, cmc_abd, mp, ip.
        abd_col = np.array([0.0, -point_local[2], point_local[1]])
        cols = [cols_chain[0], abd_col, cols_chain[1], cols_chain[2]]
    else:
        cols = cols_chain
    return rot @ np.column_stack(cols)


def tendon_excursion(route: TendonRoute, config: FingerConfig, rest: FingerConfig) -> float:
    """Signed tendon excursion (mm): sum of arc lengths, flexion positive."""
    total = 0.0
    for wp in route.waypoints:
        delta = math.radians(config.angle(wp.joint_id) - rest.angle(wp.joint_id))
        sense = 1.0 if wp.sense == "flexion" else -1.0
        total += wp.moment_arm_mm * sense * delta
    return total


def muscle_tension(
    muscle: MuscleSpec, lead_pressure_mpa: float, excursion_mm: float, slack_mm: float
) -> float:
    """PAM tension at the strain implied by tendon excursion beyond slack."""
    strain = max(0.0, excursion_mm - slack_mm) / muscle.pam.rest_length_mm
    if strain >= 1.0:
        return 0.0
    return pam_force(muscle.pam, lead_pressure_mpa, strain)


# ----------------------------------------------------------------------------
# Torque balance


def _tensions(model: _ChainModel, theta_deg: np.ndarray, p_mpa: np.ndarray) -> np.ndarray:
    delta_rad = np.radians(theta_deg - model.rest_deg)
    excursion = model.arm_mm @ delta_rad
    strain = np.maximum(0.0, excursion - model.slack_mm) / model.mlen
    strain = np.minimum(strain, 0.999999)
    braid = 3.0 * (1.0 - strain) ** 2 / model.tan2 - 1.0 / model.sin2
    force = model.area_mm2 * p_mpa * braid - model.kt * strain
    return np.maximum(0.0, force)


def _contact_torque(model: _ChainModel, theta_deg: np.ndarray, contacts: Sequence[Contact]) -> np.ndarray:
    tau = np.zeros(model.n_joints)
    for contact in contacts:
        if contact.segment < 0:
            continue
        jac = _point_jacobian(model, theta_deg, contact.segment, contact.fraction)
        force_vec = contact.force_n * np.asarray(contact.normal)
        tau += jac.T @ force_vec
    return tau


def _scene_contact_torque(
    model: _ChainModel,
    theta_deg: np.ndarray,
    objects: Sequence[SceneObject],
    penalty_n_per_mm: float,
) -> np.ndarray:
    """Penalty contact torque against live scene objects (hot path)."""
    pts, jac = _points_and_jacobians(model, theta_deg)
    tau = np.zeros(model.n_joints)
    for obj in objects:
        dist, normal = signed_distance(obj, pts)
        active = dist < 0.0
        if not np.any(active):
            continue
        forces = -penalty_n_per_mm * dist[active]
        tau += np.einsum("m,ma,maj->j", forces, normal[active], jac[active])
    return tau


def detect_contacts(
    desc: HandDescription,
    digit: str,
    config,
    objects: Sequence[SceneObject],
    penalty_n_per_mm: float = DEFAULT_PENALTY_N_PER_MM,
) -> list[Contact]:
    """Penalty contacts between the digit's sample points and scene objects."""
    model = chain_model(desc, digit)
    theta = _as_angles(model, config)
    pts, tags = _surface_points(model, theta)
    contacts: list[Contact] = []
    for obj in objects:
        dist, normal = signed_distance(obj, pts)
        for idx in np.flatnonzero(dist < 0.0):
            seg, frac, label = tags[idx]
            depth = -float(dist[idx])
            contacts.append(
                Contact(
                    body=label,
                    segment=seg,
                    fraction=frac,
                    point_mm=tuple(pts[idx]),
                    normal=tuple(normal[idx]),
                    penetration_mm=depth,
                    force_n=penalty_n_per_mm * depth,
                )
            )
    return contacts


def joint_residual(
    desc: HandDescription,
    digit: str,
    config,
    pressures: Mapping[str, float],
    contacts: Sequence[Contact] = (),
) -> np.ndarray:
    """Net joint torque (N*mm): muscle pull minus spring minus contact load.

    Zero at equilibrium. Muscles not present in `pressures` are unpressurized.
    """
    model = chain_model(desc, digit)
    theta = _as_angles(model, config)
    p_mpa = _pressure_vector(model, pressures)
    tension = _tensions(model, theta, p_mpa)
    tau = model.arm_mm.T @ tension
    tau -= model.stiffness * (theta - model.rest_deg)
    if contacts:
        tau += _contact_torque(model, theta, contacts)
    return tau


def total_energy(
    desc: HandDescription, digit: str, config, pressures: Mapping[str, float]
) -> float:
    """Potential of springs plus muscles (no contacts), in N*mm.

    The joint residual is the negative gradient of this potential with respect
    to joint angles in radians.
    """
    model = chain_model(desc, digit)
    theta = _as_angles(model, config)
    p_mpa = _pressure_vector(model, pressures)
    delta_rad = np.radians(theta - model.rest_deg)
    spring = 0.5 * np.sum(model.stiffness * (180.0 / math.pi) * delta_rad**2)

    excursion = model.arm_mm @ delta_rad
    energy = spring
    for mi in range(len(model.muscle_ids)):
        energy += _muscle_potential(model, mi, p_mpa[mi], excursion[mi])
    return float(energy)


def _muscle_potential(model: _ChainModel, mi: int, p_mpa: float, excursion_mm: float) -> float:
    """Negative work stored by one muscle as its tendon reels in, N*mm."""
    area = model.area_mm2[mi]
    tan2 = model.tan2[mi]
    sin2 = model.sin2[mi]
    kt = model.kt[mi]
    mlen = model.mlen[mi]
    slack = model.slack_mm[mi]

    blocked = max(0.0, area * p_mpa * (3.0 / tan2 - 1.0 / sin2))
    if excursion_mm <= slack:
        return -blocked * excursion_mm

    def integral(s: float) -> float:
        return area * p_mpa * ((1.0 - (1.0 - s) ** 3) / tan2 - s / sin2) - 0.5 * kt * s**2

    strain = (excursion_mm - slack) / mlen
    s_free = _free_strain(model, mi, p_mpa)
    return -blocked * slack - mlen * integral(min(strain, s_free))


def _free_strain(model: _ChainModel, mi: int, p_mpa: float) -> float:
    """Zero-force strain of muscle mi at pressure p (bisection, cached)."""
    cache = getattr(model, "_free_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(model, "_free_cache", cache)
    key = (mi, p_mpa)
    if key in cache:
        return cache[key]
    area = model.area_mm2[mi]
    tan2 = model.tan2[mi]
    sin2 = model.sin2[mi]
    kt = model.kt[mi]

    def force(s: float) -> float:
        return max(0.0, area * p_mpa * (3.0 * (1.0 - s) ** 2 / tan2 - 1.0 / sin2) - kt * s)

    # Geometric root of the zero-tube-stiffness model brackets from above.
    cos2 = 1.0 / (1.0 + tan2)
    hi = 1.0 - 1.0 / (math.sqrt(3.0) * math.sqrt(cos2))
    lo = 0.0
    if p_mpa <= 0.0 or force(0.0) <= 0.0:
        cache[key] = 0.0
        return 0.0
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if force(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    cache[key] = lo
    return lo


# ----------------------------------------------------------------------------
# Equilibrium solving


def _masked_norm(model: _ChainModel, theta: np.ndarray, residual: np.ndarray) -> float:
    """Max torque imbalance, ignoring components blocked by an active limit."""
    worst = 0.0
    for i in range(model.n_joints):
        if theta[i] <= model.lo_deg[i] + 1e-12 and residual[i] < 0.0:
            continue
        if theta[i] >= model.hi_deg[i] - 1e-12 and residual[i] > 0.0:
            continue
        worst = max(worst, abs(residual[i]))
    return worst


def _bisection_sweeps(model, residual_fn, theta, max_sweeps=3, tol_deg=1e-7):
    """Nonlinear Gauss-Seidel fallback for Newton stalls.

    Per joint, a sign-change bracket is grown locally (each residual component
    decreases in its own angle away from contact kinks) and bisected; a
    component pushing outward at a limit parks the joint on the limit.
    """
    theta = theta.copy()
    for _ in range(max_sweeps):
        moved = 0.0
        for i in range(model.n_joints):
            lo, hi = model.lo_deg[i], model.hi_deg[i]

            def component(x: float) -> float:
                trial = theta.copy()
                trial[i] = x
                return residual_fn(trial)[i]

            f_here = component(theta[i])
            if f_here == 0.0:
                continue
            # Expand toward the root: positive residual drives flexion.
            direction = 1.0 if f_here > 0.0 else -1.0
            a = theta[i]
            fa = f_here
            step = 0.5
            b = None
            while True:
                x = a + direction * step
                if x <= lo or x >= hi:
                    x = lo if direction < 0 else hi
                    fx = component(x)
                    if fa * fx > 0.0:
                        b = None
                        a = x   # same sign all the way to the limit
                    else:
                        b, fb = x, fx
                    break
                fx = component(x)
                if fa * fx <= 0.0:
                    b, fb = x, fx
                    break
                a, fa = x, fx
                step *= 2.0
            if b is None:
                new = a
            else:
                for _ in range(40):
                    mid = 0.5 * (a + b)
                    if mid == a or mid == b:
                        break
                    fm = component(mid)
                    if fa * fm <= 0.0:
                        b = mid
                    else:
                        a, fa = mid, fm
                new = 0.5 * (a + b)
            moved = max(moved, abs(new - theta[i]))
            theta[i] = new
        if moved < tol_deg:
            break
    return theta


def _newton_solve(model, residual_fn, theta0, tol_nmm, max_iter, fallback=True):
    """Damped Newton with numerical Jacobian and joint-limit clamping.

    The Jacobian is reused while full steps are accepted and refreshed after
    any damping, which roughly halves the residual evaluations. Stalls fall
    back to per-joint bisection (unless disabled for loose warm-up solves).
    """
    theta = np.clip(theta0, model.lo_deg, model.hi_deg)
    residual = residual_fn(theta)
    iterations = 0
    h = 1e-5  # degrees
    stalls = 0
    jac = None
    jac_age = 0
    while iterations < max_iter:
        if _masked_norm(model, theta, residual) < tol_nmm:
            break
        if jac is None or jac_age >= 3:
            jac = np.zeros((model.n_joints, model.n_joints))
            for i in range(model.n_joints):
                up = theta.copy()
                up[i] += h
                down = theta.copy()
                down[i] -= h
                jac[:, i] = (residual_fn(up) - residual_fn(down)) / (2.0 * h)
            jac_age = 0
        try:
            step = np.linalg.solve(jac, -residual)
        except np.linalg.LinAlgError:
            step = -residual / np.maximum(np.abs(np.diag(jac)), 1e-9)
        norm0 = _masked_norm(model, theta, residual)
        lam = 1.0
        accepted = False
        while lam >= 1e-6:
            trial = np.clip(theta + lam * step, model.lo_deg, model.hi_deg)
            if lam == 1.0 and np.array_equal(trial, theta):
                break   # pinned at the limits, no progress possible
            trial_res = residual_fn(trial)
            if _masked_norm(model, trial, trial_res) < norm0 * (1.0 - 1e-4 * lam) + 1e-300:
                theta, residual = trial, trial_res
                accepted = True
                jac_age = jac_age + 1 if lam == 1.0 else 99
                break
            lam *= 0.5
        iterations += 1
        if not accepted:
            stalls += 1
            jac = None
            if not fallback:
                break
            theta = _bisection_sweeps(model, residual_fn, theta)
            residual = residual_fn(theta)
            if stalls >= 2:
                break
    return theta, residual, iterations


def solve_finger_equilibrium(
    desc: HandDescription,
    digit: str,
    pressures: Mapping[str, float],
    contacts: Sequence[Contact] = (),
    *,
    scene_objects: Sequence[SceneObject] = (),
    penalty_n_per_mm: float = DEFAULT_PENALTY_N_PER_MM,
    initial: FingerConfig | None = None,
    tol_nmm: float = SOLVER_TOL_NMM,
    max_iter: int = MAX_SOLVER_ITERATIONS,
    _fallback: bool = True,
) -> EquilibriumResult:
    """Solve the digit's torque balance for the given muscle pressures.

    `contacts` are held fixed; `scene_objects` generate live penalty contacts
    that follow the configuration during the solve.
    """
    model = chain_model(desc, digit)
    p_mpa = _pressure_vector(model, pressures)

    def residual_fn(theta: np.ndarray) -> np.ndarray:
        tension = _tensions(model, theta, p_mpa)
        tau = model.arm_mm.T @ tension
        tau -= model.stiffness * (theta - model.rest_deg)
        if contacts:
            tau += _contact_torque(model, theta, contacts)
        if scene_objects:
            tau += _scene_contact_torque(model, theta, scene_objects, penalty_n_per_mm)
        return tau

    theta0 = (
        _as_angles(model, initial) if initial is not None else model.rest_deg.copy()
    )
    theta, residual, iterations = _newton_solve(
        model, residual_fn, theta0, tol_nmm, max_iter, fallback=_fallback
    )

    at_lo = theta <= model.lo_deg + 1e-12
    at_hi = theta >= model.hi_deg - 1e-12
    at_limit = tuple(bool((at_lo[i] and residual[i] < 0) or (at_hi[i] and residual[i] > 0))
                     for i in range(model.n_joints))
    tension = _tensions(model, theta, p_mpa)
    final_contacts = tuple(
        detect_contacts(desc, digit, theta, scene_objects, penalty_n_per_mm)
    ) if scene_objects else tuple(contacts)
    norm = _masked_norm(model, theta, residual)
    return EquilibriumResult(
        config=FingerConfig(joint_ids=model.joint_ids, angles_deg=tuple(float(x) for x in theta)),
        tendon_tensions=dict(zip(model.muscle_ids, tension.tolist())),
        residual_nmm=norm,
        iterations=iterations,
        converged=bool(norm < tol_nmm),
        at_limit=at_limit,
        limit_torque_nmm=tuple(residual[i] if at_limit[i] else 0.0 for i in range(model.n_joints)),
        contacts=final_contacts,
    )


# ----------------------------------------------------------------------------
# Fingertip force (tip pinned to a load cell)


@dataclass(frozen=True)
class FingertipResult:
    force_n: float
    reaction_n: tuple[float, float]   # in the finger plane (distal, palmar)
    config: FingerConfig
    converged: bool
    iterations: int


def _tip_plane_coords(model: _ChainModel, theta_deg: np.ndarray) -> np.ndarray:
    _, _, joints_local = _chain_points_local(model, theta_deg)
    tip = joints_local[-1]
    return np.array([tip[0], tip[2]])   # (distal, palmar) in the finger plane


def _tip_plane_jacobian(model: _ChainModel, theta_deg: np.ndarray) -> np.ndarray:
    if model.is_thumb:
        raise UnknownFingerError("fingertip force test runs on finger chains only")
    jac = _point_jacobian(model, theta_deg, len(model.seg_mm) - 1, 1.0)
    local = model.rot.T @ jac
    return np.vstack([local[0], local[2]])   # rows: d(u)/dtheta, d(w)/dtheta


def fingertip_force(
    desc: HandDescription,
    finger: str,
    pressures: Mapping[str, float],
    contact_config,
    *,
    tol: float = 1e-8,
    max_iter: int = 120,
) -> FingertipResult:
    """Reaction force when the fingertip is pinned at the test posture.

    Unknowns are the joint angles (one internal DOF survives the pin) and the
    two in-plane reaction components; the three torque-balance equations plus
    the two pin equations close the system. A reaction that would pull the
    finger onto the cell means lift-off and reports zero force.
    """
    if finger == "thumb":
        raise UnknownFingerError("fingertip force test runs on finger chains only")
    model = chain_model(desc, finger)
    theta_pin = _as_angles(model, contact_config)
    pin = _tip_plane_coords(model, theta_pin)
    p_mpa = _pressure_vector(model, pressures)

    def torque(theta: np.ndarray) -> np.ndarray:
        tension = _tensions(model, theta, p_mpa)
        return model.arm_mm.T @ tension - model.stiffness * (theta - model.rest_deg)

    def system(u: np.ndarray) -> np.ndarray:
        theta, force = u[:3], u[3:]
        jac = _tip_plane_jacobian(model, theta)
        res_torque = torque(theta) + jac.T @ force
        res_pin = _tip_plane_coords(model, theta) - pin
        return np.concatenate([res_torque, res_pin])

    u = np.concatenate([theta_pin, np.zeros(2)])
    res = system(u)
    steps = np.array([1e-5, 1e-5, 1e-5, 1e-6, 1e-6])
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        if np.max(np.abs(res)) < tol:
            converged = True
            break
        jac = np.zeros((5, 5))
        for i in range(5):
            up = u.copy()
            up[i] += steps[i]
            down = u.copy()
            down[i] -= steps[i]
            jac[:, i] = (system(up) - system(down)) / (2.0 * steps[i])
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        norm0 = np.linalg.norm(res)
        while lam >= 1e-8:
            trial = u + lam * step
            trial_res = system(trial)
            if np.linalg.norm(trial_res) < norm0:
                u, res = trial, trial_res
                break
            lam *= 0.5
        else:
            break
    if np.max(np.abs(res)) < tol:
        converged = True

    theta, force = u[:3], u[3:]
    press_dir = _tip_plane_jacobian(model, theta) @ np.ones(3)
    pushing = float(force @ press_dir) < 0.0
    magnitude = float(np.linalg.norm(force)) if pushing else 0.0
    return FingertipResult(
        force_n=magnitude,
        reaction_n=(float(force[0]), float(force[1])),
        config=FingerConfig(joint_ids=model.joint_ids, angles_deg=tuple(float(x) for x in theta)),
        converged=converged,
        iterations=iterations,
    )


# ----------------------------------------------------------------------------
# Grasp force on a split cylinder


@dataclass(frozen=True)
class GraspResult:
    compression_n: float
    contacts: tuple[Contact, ...]
    digit_results: dict[str, EquilibriumResult]
    converged: bool
    diagnostic: str = ""


def grasp_cylinder(
    desc: HandDescription,
    radius_mm: float,
    pressures: float | Mapping[str, float],
    *,
    center_x_mm: float,
    center_z_mm: float,
    half_length_mm: float = 60.0,
    penalty_n_per_mm: float = DEFAULT_PENALTY_N_PER_MM,
    digits: Sequence[str] = DIGITS,
    max_rounds: int = 50,
    tol_nmm: float = SOLVER_TOL_NMM,
) -> GraspResult:
    """Wrap the digits around a split cylinder and report the compression.

    The cylinder is split by the plane through its axis normal to x; the
    reported force is the net contact force on the distal half projected onto
    the split axis. `pressures` is either a full per-muscle map or one lead
    pressure applied to every flexor-group muscle.
    """
    from .scene import Cylinder

    if radius_mm <= 0.0:
        raise ValueError(f"radius {radius_mm} mm must be positive")
    if isinstance(pressures, Mapping):
        pressure_map = dict(pressures)
    else:
        pressure_map = {}
        for digit in digits:
            for mid in desc.flexor_ids(digit):
                pressure_map[mid] = float(pressures)
    cylinder = Cylinder(
        center_mm=(center_x_mm, 0.0, center_z_mm),
        radius_mm=radius_mm,
        half_length_mm=half_length_mm,
    )

    digit_results: dict[str, EquilibriumResult] = {}
    warm: dict[str, FingerConfig] = {}
    # Pressure continuation: ramp each digit onto the cylinder so the wrap
    # approaches from outside instead of jumping through the object. The
    # intermediate solves only provide warm starts and run at loose tolerance.
    n_ramp = 5
    for digit in digits:
        for k in range(1, n_ramp):
            scaled = {mid: p * k / n_ramp for mid, p in pressure_map.items()}
            result = solve_finger_equilibrium(
                desc,
                digit,
                scaled,
                scene_objects=[cylinder],
                penalty_n_per_mm=penalty_n_per_mm,
                initial=warm.get(digit),
                tol_nmm=1e-2,
                max_iter=60,
                _fallback=False,
            )
            warm[digit] = result.config
    # Fixed-point stabilization between contact forces and equilibria.
    previous: dict[str, np.ndarray] = {}
    for _ in range(max_rounds):
        moved = 0.0
        for digit in digits:
            result = solve_finger_equilibrium(
                desc,
                digit,
                pressure_map,
                scene_objects=[cylinder],
                penalty_n_per_mm=penalty_n_per_mm,
                initial=warm.get(digit),
                tol_nmm=tol_nmm,
            )
            digit_results[digit] = result
            warm[digit] = result.config
            angles = result.config.as_array()
            if digit in previous:
                moved = max(moved, float(np.max(np.abs(angles - previous[digit]))))
            else:
                moved = max(moved, 1.0)
            previous[digit] = angles
        if moved < 1e-9:
            break
    converged = all(r.converged for r in digit_results.values())

    contacts: list[Contact] = []
    for result in digit_results.values():
        contacts.extend(result.contacts)
    axis = np.array([1.0, 0.0, 0.0])
    center = np.asarray(cylinder.center_mm)
    compression = 0.0
    for contact in contacts:
        if (np.asarray(contact.point_mm) - center) @ axis > 0.0:
            compression += contact.force_n * float(np.asarray(contact.normal) @ axis)
    diagnostic = "" if contacts else "no contact between hand and cylinder"
    return GraspResult(
        compression_n=float(compression),
        contacts=tuple(contacts),
        digit_results=digit_results,
        converged=converged,
        diagnostic=diagnostic,
    )
