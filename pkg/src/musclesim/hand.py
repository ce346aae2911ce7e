"""Declarative hand model: joints, tendon routes, muscles, sensors, frames.

The description is a plain JSON document (schema in docs/hand_schema.md).
Angles are in degrees, lengths in mm, stiffnesses in N*mm/deg, pressures in
MPa, sensor gains in kPa/N. Flexion is the positive angle direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources

from .pam import PamParams, reference_pam

FINGERS = ("index", "middle", "ring", "little")
DIGITS = FINGERS + ("thumb",)

FLEXOR_ACRONYMS = frozenset({"FDP", "FDS", "FPL", "AP", "OP"})
EXTENSOR_ACRONYMS = frozenset({"ED", "EPL"})
MUSCLE_ACRONYMS = FLEXOR_ACRONYMS | EXTENSOR_ACRONYMS

# Actuator inventory of the prototype: acronym, rest length (mm) -> count.
# 22 muscles in total.
MUSCLE_INVENTORY = {
    ("FDP", 220.0): 4,
    ("FDS", 200.0): 4,
    ("FDS", 160.0): 4,
    ("FPL", 160.0): 2,
    ("ED", 220.0): 4,
    ("EPL", 160.0): 1,
    ("AP", 160.0): 2,
    ("OP", 140.0): 1,
}

# Joint angles of the relaxed (unpressurized) posture, applied to all long
# fingers: (MCP, PIP, DIP) in degrees.
RELAXED_ANGLES_DEG = (29.7, 29.8, 14.5)

DEFAULT_SENSOR_COMPLIANCE_KPA_PER_N = 8.0
DEFAULT_SENSOR_THRESHOLD_KPA = 4.0
DEFAULT_SENSOR_SATURATION_KPA = 30.0


@dataclass(frozen=True)
class JointSpec:
    id: str
    rest_angle_deg: float
    stiffness_nmm_per_deg: float
    min_angle_deg: float
    max_angle_deg: float


@dataclass(frozen=True)
class Waypoint:
    joint_id: str
    moment_arm_mm: float
    sense: str  # "flexion" | "extension"


@dataclass(frozen=True)
class TendonRoute:
    muscle_id: str
    waypoints: tuple[Waypoint, ...]
    slack_mm: float = 0.0


@dataclass(frozen=True)
class MuscleSpec:
    id: str
    acronym: str
    length_mm: float
    target_finger: str
    pam: PamParams


@dataclass(frozen=True)
class SensorSpec:
    id: str  # digit name for fingertip sensors, "palm" for the palm pad
    location: str  # "fingertip" | "palm"
    compliance_kpa_per_n: float = DEFAULT_SENSOR_COMPLIANCE_KPA_PER_N
    threshold_kpa: float = DEFAULT_SENSOR_THRESHOLD_KPA
    saturation_kpa: float = DEFAULT_SENSOR_SATURATION_KPA


@dataclass(frozen=True)
class FingerChain:
    id: str
    joint_ids: tuple[str, str, str]  # MCP, PIP, DIP
    segment_lengths_mm: tuple[float, float, float]


@dataclass(frozen=True)
class ThumbChain:
    joint_ids: tuple[str, str, str, str]  # CMC flexion, CMC abduction, MP, IP
    segment_lengths_mm: tuple[float, float, float]  # metacarpal, proximal, distal


@dataclass(frozen=True)
class Frame:
    """Rigid placement of a digit's flexion plane in the hand frame.

    x points distal, z palmar. Rotation applied as Rz(yaw)*Ry(pitch)*Rx(roll).
    """

    digit: str
    origin_mm: tuple[float, float, float]
    yaw_deg: float = 0.0
    pitch_deg: float = 0.0
    roll_deg: float = 0.0


@dataclass
class HandDescription:
    joints: tuple[JointSpec, ...]
    muscles: tuple[MuscleSpec, ...]
    routes: tuple[TendonRoute, ...]
    sensors: tuple[SensorSpec, ...]
    fingers: tuple[FingerChain, ...]
    thumb: ThumbChain
    frames: tuple[Frame, ...]

    @cached_property
    def joint_by_id(self) -> dict[str, JointSpec]:
        return {j.id: j for j in self.joints}

    @cached_property
    def muscle_by_id(self) -> dict[str, MuscleSpec]:
        return {m.id: m for m in self.muscles}

    @cached_property
    def route_by_muscle(self) -> dict[str, TendonRoute]:
        return {r.muscle_id: r for r in self.routes}

    @cached_property
    def frame_by_digit(self) -> dict[str, Frame]:
        return {f.digit: f for f in self.frames}

    @cached_property
    def sensor_by_id(self) -> dict[str, SensorSpec]:
        return {s.id: s for s in self.sensors}

    def chain_joint_ids(self, digit: str) -> tuple[str, ...]:
        if digit == "thumb":
            return self.thumb.joint_ids
        for finger in self.fingers:
            if finger.id == digit:
                return finger.joint_ids
        raise KeyError(f"unknown digit {digit!r}")

    def segment_lengths(self, digit: str) -> tuple[float, ...]:
        if digit == "thumb":
            return self.thumb.segment_lengths_mm
        for finger in self.fingers:
            if finger.id == digit:
                return finger.segment_lengths_mm
        raise KeyError(f"unknown digit {digit!r}")

    def muscles_of(self, digit: str) -> tuple[MuscleSpec, ...]:
        return tuple(m for m in self.muscles if m.target_finger == digit)

    def flexor_ids(self, digit: str) -> tuple[str, ...]:
        return tuple(
            m.id for m in self.muscles_of(digit) if m.acronym in FLEXOR_ACRONYMS
        )

    def extensor_ids(self, digit: str) -> tuple[str, ...]:
        return tuple(
            m.id for m in self.muscles_of(digit) if m.acronym in EXTENSOR_ACRONYMS
        )


@dataclass(frozen=True)
class ParseIssue:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.path}: {self.message}"


class HandParseError(ValueError):
    """Raised with the full list of parse issues."""

    def __init__(self, issues: list[ParseIssue]):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in issues) or "invalid hand description")


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.path}: {self.message}"


# ----------------------------------------------------------------------------
# Parsing

_PAM_FIELDS = {
    "rest_length_mm": float,
    "d0_mm": float,
    "theta0_deg": float,
    "tube_stiffness_n": float,
    "max_pressure_mpa": float,
}
_JOINT_FIELDS = {
    "id": str,
    "rest_angle_deg": float,
    "stiffness_nmm_per_deg": float,
    "min_angle_deg": float,
    "max_angle_deg": float,
}
_MUSCLE_FIELDS = {
    "id": str,
    "acronym": str,
    "length_mm": float,
    "target_finger": str,
    "pam": dict,
}
_WAYPOINT_FIELDS = {"joint_id": str, "moment_arm_mm": float, "sense": str}
_ROUTE_FIELDS = {"muscle_id": str, "waypoints": list, "slack_mm": float}
_SENSOR_FIELDS = {
    "id": str,
    "location": str,
    "compliance_kpa_per_n": float,
    "threshold_kpa": float,
    "saturation_kpa": float,
}
_FINGER_FIELDS = {"id": str, "joint_ids": list, "segment_lengths_mm": list}
_THUMB_FIELDS = {"joint_ids": list, "segment_lengths_mm": list}
_FRAME_FIELDS = {
    "digit": str,
    "origin_mm": list,
    "yaw_deg": float,
    "pitch_deg": float,
    "roll_deg": float,
}
_OPTIONAL_FIELDS = {
    "compliance_kpa_per_n",
    "threshold_kpa",
    "saturation_kpa",
    "slack_mm",
    "yaw_deg",
    "pitch_deg",
    "roll_deg",
    "tube_stiffness_n",
    "max_pressure_mpa",
}
_TOP_LEVEL_KEYS = ("joints", "muscles", "routes", "sensors", "fingers", "thumb", "frames")


class _Reader:
    def __init__(self) -> None:
        self.issues: list[ParseIssue] = []

    def check_obj(self, obj, fields: dict, path: str) -> bool:
        if not isinstance(obj, dict):
            self.issues.append(ParseIssue("syntax-error", path, "expected an object"))
            return False
        ok = True
        for key in obj:
            if key not in fields:
                self.issues.append(ParseIssue("unknown-field", f"{path}.{key}", "not in schema"))
                ok = False
        for key, kind in fields.items():
            if key in _OPTIONAL_FIELDS:
                continue
            if key not in obj:
                self.issues.append(
                    ParseIssue("missing-required-field", f"{path}.{key}", "required")
                )
                ok = False
        return ok

    def num(self, obj: dict, key: str, path: str, default=None) -> float:
        if key not in obj:
            return default
        value = obj[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.issues.append(ParseIssue("syntax-error", f"{path}.{key}", "expected a number"))
            return default if default is not None else 0.0
        return float(value)

    def text(self, obj: dict, key: str, path: str, default: str = "") -> str:
        value = obj.get(key, default)
        if not isinstance(value, str):
            self.issues.append(ParseIssue("syntax-error", f"{path}.{key}", "expected a string"))
            return default
        return value

    def vec3(self, obj: dict, key: str, path: str) -> tuple[float, float, float]:
        value = obj.get(key)
        if (
            not isinstance(value, list)
            or len(value) != 3
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
        ):
            self.issues.append(
                ParseIssue("syntax-error", f"{path}.{key}", "expected [x, y, z] numbers")
            )
            return (0.0, 0.0, 0.0)
        return (float(value[0]), float(value[1]), float(value[2]))


def parse_hand_description(text: str) -> HandDescription:
    """Parse a JSON hand description; raises HandParseError listing all issues."""
    reader = _Reader()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise HandParseError(
            [ParseIssue("syntax-error", f"line {err.lineno}", err.msg)]
        ) from err
    if not isinstance(doc, dict):
        raise HandParseError([ParseIssue("syntax-error", "$", "expected a top-level object")])

    for key in doc:
        if key not in _TOP_LEVEL_KEYS:
            reader.issues.append(ParseIssue("unknown-field", key, "not in schema"))
    for key in _TOP_LEVEL_KEYS:
        if key not in doc:
            reader.issues.append(ParseIssue("missing-required-field", key, "required"))
    if reader.issues:
        raise HandParseError(reader.issues)

    joints = []
    for i, obj in enumerate(doc["joints"]):
        path = f"joints[{i}]"
        if not reader.check_obj(obj, _JOINT_FIELDS, path):
            continue
        joints.append(
            JointSpec(
                id=reader.text(obj, "id", path),
                rest_angle_deg=reader.num(obj, "rest_angle_deg", path),
                stiffness_nmm_per_deg=reader.num(obj, "stiffness_nmm_per_deg", path),
                min_angle_deg=reader.num(obj, "min_angle_deg", path),
                max_angle_deg=reader.num(obj, "max_angle_deg", path),
            )
        )

    muscles = []
    for i, obj in enumerate(doc["muscles"]):
        path = f"muscles[{i}]"
        if not reader.check_obj(obj, _MUSCLE_FIELDS, path):
            continue
        pam_obj = obj.get("pam", {})
        if not reader.check_obj(pam_obj, _PAM_FIELDS, f"{path}.pam"):
            continue
        pam = PamParams(
            rest_length_mm=reader.num(pam_obj, "rest_length_mm", f"{path}.pam"),
            d0_mm=reader.num(pam_obj, "d0_mm", f"{path}.pam"),
            theta0_deg=reader.num(pam_obj, "theta0_deg", f"{path}.pam"),
            tube_stiffness_n=reader.num(pam_obj, "tube_stiffness_n", f"{path}.pam", 0.0),
            max_pressure_mpa=reader.num(pam_obj, "max_pressure_mpa", f"{path}.pam", 0.5),
        )
        muscles.append(
            MuscleSpec(
                id=reader.text(obj, "id", path),
                acronym=reader.text(obj, "acronym", path),
                length_mm=reader.num(obj, "length_mm", path),
                target_finger=reader.text(obj, "target_finger", path),
                pam=pam,
            )
        )

    routes = []
    for i, obj in enumerate(doc["routes"]):
        path = f"routes[{i}]"
        if not reader.check_obj(obj, _ROUTE_FIELDS, path):
            continue
        waypoints = []
        for k, wp in enumerate(obj.get("waypoints", [])):
            wp_path = f"{path}.waypoints[{k}]"
            if not reader.check_obj(wp, _WAYPOINT_FIELDS, wp_path):
                continue
            waypoints.append(
                Waypoint(
                    joint_id=reader.text(wp, "joint_id", wp_path),
                    moment_arm_mm=reader.num(wp, "moment_arm_mm", wp_path),
                    sense=reader.text(wp, "sense", wp_path),
                )
            )
        routes.append(
            TendonRoute(
                muscle_id=reader.text(obj, "muscle_id", path),
                waypoints=tuple(waypoints),
                slack_mm=reader.num(obj, "slack_mm", path, 0.0),
            )
        )

    sensors = []
    for i, obj in enumerate(doc["sensors"]):
        path = f"sensors[{i}]"
        if not reader.check_obj(obj, _SENSOR_FIELDS, path):
            continue
        sensors.append(
            SensorSpec(
                id=reader.text(obj, "id", path),
                location=reader.text(obj, "location", path),
                compliance_kpa_per_n=reader.num(
                    obj, "compliance_kpa_per_n", path, DEFAULT_SENSOR_COMPLIANCE_KPA_PER_N
                ),
                threshold_kpa=reader.num(
                    obj, "threshold_kpa", path, DEFAULT_SENSOR_THRESHOLD_KPA
                ),
                saturation_kpa=reader.num(
                    obj, "saturation_kpa", path, DEFAULT_SENSOR_SATURATION_KPA
                ),
            )
        )

    fingers = []
    for i, obj in enumerate(doc["fingers"]):
        path = f"fingers[{i}]"
        if not reader.check_obj(obj, _FINGER_FIELDS, path):
            continue
        joint_ids = obj.get("joint_ids", [])
        segments = obj.get("segment_lengths_mm", [])
        if len(joint_ids) != 3 or len(segments) != 3:
            reader.issues.append(
                ParseIssue("syntax-error", path, "finger chains need 3 joints and 3 segments")
            )
            continue
        fingers.append(
            FingerChain(
                id=reader.text(obj, "id", path),
                joint_ids=tuple(str(j) for j in joint_ids),
                segment_lengths_mm=tuple(float(s) for s in segments),
            )
        )

    thumb = None
    thumb_obj = doc["thumb"]
    if reader.check_obj(thumb_obj, _THUMB_FIELDS, "thumb"):
        joint_ids = thumb_obj.get("joint_ids", [])
        segments = thumb_obj.get("segment_lengths_mm", [])
        if len(joint_ids) != 4 or len(segments) != 3:
            reader.issues.append(
                ParseIssue("syntax-error", "thumb", "thumb needs 4 joints and 3 segments")
            )
        else:
            thumb = ThumbChain(
                joint_ids=tuple(str(j) for j in joint_ids),
                segment_lengths_mm=tuple(float(s) for s in segments),
            )

    frames = []
    for i, obj in enumerate(doc["frames"]):
        path = f"frames[{i}]"
        if not reader.check_obj(obj, _FRAME_FIELDS, path):
            continue
        frames.append(
            Frame(
                digit=reader.text(obj, "digit", path),
                origin_mm=reader.vec3(obj, "origin_mm", path),
                yaw_deg=reader.num(obj, "yaw_deg", path, 0.0),
                pitch_deg=reader.num(obj, "pitch_deg", path, 0.0),
                roll_deg=reader.num(obj, "roll_deg", path, 0.0),
            )
        )

    if thumb is not None and not reader.issues:
        desc = HandDescription(
            joints=tuple(joints),
            muscles=tuple(muscles),
            routes=tuple(routes),
            sensors=tuple(sensors),
            fingers=tuple(fingers),
            thumb=thumb,
            frames=tuple(frames),
        )
        known_joints = desc.joint_by_id
        known_muscles = desc.muscle_by_id
        for i, route in enumerate(desc.routes):
            if route.muscle_id not in known_muscles:
                reader.issues.append(
                    ParseIssue(
                        "reference-to-undefined-muscle",
                        f"routes[{i}].muscle_id",
                        route.muscle_id,
                    )
                )
            for k, wp in enumerate(route.waypoints):
                if wp.joint_id not in known_joints:
                    reader.issues.append(
                        ParseIssue(
                            "reference-to-undefined-joint",
                            f"routes[{i}].waypoints[{k}].joint_id",
                            wp.joint_id,
                        )
                    )
        for i, chain in enumerate(desc.fingers):
            for joint_id in chain.joint_ids:
                if joint_id not in known_joints:
                    reader.issues.append(
                        ParseIssue(
                            "reference-to-undefined-joint", f"fingers[{i}]", joint_id
                        )
                    )
        for joint_id in desc.thumb.joint_ids:
            if joint_id not in known_joints:
                reader.issues.append(
                    ParseIssue("reference-to-undefined-joint", "thumb", joint_id)
                )
        if not reader.issues:
            return desc
    raise HandParseError(reader.issues)


# ----------------------------------------------------------------------------
# Serialization (canonical form: fixed key order, repr floats, 2-space indent)


def _pam_doc(p: PamParams) -> dict:
    return {
        "rest_length_mm": p.rest_length_mm,
        "d0_mm": p.d0_mm,
        "theta0_deg": p.theta0_deg,
        "tube_stiffness_n": p.tube_stiffness_n,
        "max_pressure_mpa": p.max_pressure_mpa,
    }


def serialize(desc: HandDescription) -> str:
    """Canonical JSON text; serialize(parse(serialize(d))) is byte-identical."""
    doc = {
        "joints": [
            {
                "id": j.id,
                "rest_angle_deg": j.rest_angle_deg,
                "stiffness_nmm_per_deg": j.stiffness_nmm_per_deg,
                "min_angle_deg": j.min_angle_deg,
                "max_angle_deg": j.max_angle_deg,
            }
            for j in desc.joints
        ],
        "muscles": [
            {
                "id": m.id,
                "acronym": m.acronym,
                "length_mm": m.length_mm,
                "target_finger": m.target_finger,
                "pam": _pam_doc(m.pam),
            }
            for m in desc.muscles
        ],
        "routes": [
            {
                "muscle_id": r.muscle_id,
                "waypoints": [
                    {
                        "joint_id": w.joint_id,
                        "moment_arm_mm": w.moment_arm_mm,
                        "sense": w.sense,
                    }
                    for w in r.waypoints
                ],
                "slack_mm": r.slack_mm,
            }
            for r in desc.routes
        ],
        "sensors": [
            {
                "id": s.id,
                "location": s.location,
                "compliance_kpa_per_n": s.compliance_kpa_per_n,
                "threshold_kpa": s.threshold_kpa,
                "saturation_kpa": s.saturation_kpa,
            }
            for s in desc.sensors
        ],
        "fingers": [
            {
                "id": f.id,
                "joint_ids": list(f.joint_ids),
                "segment_lengths_mm": list(f.segment_lengths_mm),
            }
            for f in desc.fingers
        ],
        "thumb": {
            "joint_ids": list(desc.thumb.joint_ids),
            "segment_lengths_mm": list(desc.thumb.segment_lengths_mm),
        },
        "frames": [
            {
                "digit": f.digit,
                "origin_mm": list(f.origin_mm),
                "yaw_deg": f.yaw_deg,
                "pitch_deg": f.pitch_deg,
                "roll_deg": f.roll_deg,
            }
            for f in desc.frames
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


# ----------------------------------------------------------------------------
# Validation


def validate(desc: HandDescription, strict_inventory: bool = False) -> list[Violation]:
    """Invariant checks; returns one violation per problem (empty when valid)."""
    out: list[Violation] = []

    for i, j in enumerate(desc.joints):
        path = f"joints[{i}]"
        if j.stiffness_nmm_per_deg <= 0.0:
            out.append(Violation("nonpositive-stiffness", path, f"{j.stiffness_nmm_per_deg}"))
        if not (j.min_angle_deg <= j.rest_angle_deg <= j.max_angle_deg):
            out.append(
                Violation(
                    "rest-angle-outside-limits",
                    path,
                    f"{j.min_angle_deg} <= {j.rest_angle_deg} <= {j.max_angle_deg} fails",
                )
            )

    for i, m in enumerate(desc.muscles):
        path = f"muscles[{i}]"
        if m.acronym not in MUSCLE_ACRONYMS:
            out.append(Violation("unknown-acronym", path, m.acronym))
        if m.length_mm <= 0.0:
            out.append(Violation("nonpositive-length", path, f"{m.length_mm}"))
        if m.target_finger not in DIGITS:
            out.append(Violation("unknown-finger", path, m.target_finger))
        try:
            from .pam import validate_params

            validate_params(m.pam)
        except ValueError as err:
            out.append(Violation("invalid-pam-params", path, str(err)))

    known_joints = {j.id for j in desc.joints}
    known_muscles = {m.id for m in desc.muscles}
    for i, r in enumerate(desc.routes):
        path = f"routes[{i}]"
        if r.muscle_id not in known_muscles:
            out.append(Violation("undefined-muscle", path, r.muscle_id))
        if r.slack_mm < 0.0:
            out.append(Violation("negative-slack", path, f"{r.slack_mm}"))
        seen: set[str] = set()
        for k, wp in enumerate(r.waypoints):
            wp_path = f"{path}.waypoints[{k}]"
            if wp.joint_id not in known_joints:
                out.append(Violation("undefined-joint", wp_path, wp.joint_id))
            if wp.moment_arm_mm <= 0.0:
                out.append(Violation("nonpositive-moment-arm", wp_path, f"{wp.moment_arm_mm}"))
            if wp.sense not in ("flexion", "extension"):
                out.append(Violation("unknown-sense", wp_path, wp.sense))
            if wp.joint_id in seen:
                out.append(Violation("duplicate-joint-in-route", wp_path, wp.joint_id))
            seen.add(wp.joint_id)

    for i, s in enumerate(desc.sensors):
        path = f"sensors[{i}]"
        if s.compliance_kpa_per_n <= 0.0:
            out.append(Violation("nonpositive-compliance", path, f"{s.compliance_kpa_per_n}"))
        if s.threshold_kpa <= 0.0:
            out.append(Violation("nonpositive-threshold", path, f"{s.threshold_kpa}"))
        if s.location not in ("fingertip", "palm"):
            out.append(Violation("unknown-location", path, s.location))

    for i, chain in enumerate(desc.fingers):
        path = f"fingers[{i}]"
        if any(s <= 0.0 for s in chain.segment_lengths_mm):
            out.append(Violation("nonpositive-segment", path, f"{chain.segment_lengths_mm}"))
    if any(s <= 0.0 for s in desc.thumb.segment_lengths_mm):
        out.append(Violation("nonpositive-segment", "thumb", f"{desc.thumb.segment_lengths_mm}"))

    # Antagonist pairing: every digit needs at least one flexion-sense and one
    # extension-sense route among its muscles.
    for digit in DIGITS:
        digit_muscles = {m.id for m in desc.muscles_of(digit)}
        senses = {
            wp.sense
            for r in desc.routes
            if r.muscle_id in digit_muscles
            for wp in r.waypoints
        }
        if "flexion" not in senses or "extension" not in senses:
            out.append(Violation("missing-antagonist", digit, f"senses present: {sorted(senses)}"))

    for digit in DIGITS:
        if digit not in desc.frame_by_digit:
            out.append(Violation("missing-frame", digit, "no placement frame"))

    if strict_inventory:
        counts: dict[tuple[str, float], int] = {}
        for m in desc.muscles:
            counts[(m.acronym, m.length_mm)] = counts.get((m.acronym, m.length_mm), 0) + 1
        if counts != MUSCLE_INVENTORY:
            out.append(
                Violation(
                    "table1-count-mismatch",
                    "muscles",
                    f"got {sorted(counts.items())}, want {sorted(MUSCLE_INVENTORY.items())}",
                )
            )

    return out


# ----------------------------------------------------------------------------
# Shipped hands

# Anthropometric phalanx lengths (mm), scaled to a ~190 mm hand.
_SEGMENTS = {
    "index": (45.0, 25.0, 22.0),
    "middle": (50.0, 30.0, 23.0),
    "ring": (46.0, 28.0, 22.0),
    "little": (38.0, 22.0, 20.0),
    "thumb": (40.0, 28.0, 22.0),
}

# MCP (CMC for the thumb) placements in the hand frame; x distal, y radial
# (thumb side), z palmar.
_FRAMES = {
    "index": ((88.0, 25.0, 0.0), -4.0, 0.0, 0.0),
    "middle": ((92.0, 8.0, 0.0), 0.0, 0.0, 0.0),
    "ring": ((86.0, -9.0, 0.0), 4.0, 0.0, 0.0),
    "little": ((78.0, -25.0, 0.0), 8.0, 0.0, 0.0),
    "thumb": ((14.0, 52.0, 0.0), 28.0, -17.0, 15.0),
}

_FINGER_JOINT_NAMES = ("mcp", "pip", "dip")

# Initial (pre-calibration) mechanical parameters. The shipped default hand
# replaces these with the calibration output.
_INITIAL_STIFFNESS = {"mcp": 3.4, "pip": 3.1, "dip": 1.7}
_INITIAL_ARMS = {
    "fdp": (6.5, 5.5, 4.5),
    "fds": (6.0, 5.0),
    "ed": (7.7, 4.5, 2.5),
}
_INITIAL_SLACK = {"flexor": 0.5, "extensor": 0.5}
_FINGER_LIMITS = {"mcp": (-5.0, 105.0), "pip": (-5.0, 110.0), "dip": (-5.0, 85.0)}

_THUMB_REST = {"cmc_flex": 15.0, "cmc_abd": 20.0, "mp": 10.0, "ip": 8.0}
_THUMB_LIMITS = {
    "cmc_flex": (-5.0, 84.0),
    "cmc_abd": (0.0, 56.0),
    "mp": (-5.0, 59.0),
    "ip": (-5.0, 84.0),
}
_THUMB_STIFFNESS = {"cmc_flex": 3.0, "cmc_abd": 3.0, "mp": 2.0, "ip": 1.2}
_THUMB_ARMS = {
    "fpl": {"cmc_flex": 7.0, "mp": 6.0, "ip": 5.0},
    "epl": {"cmc_abd": 3.0, "cmc_flex": 6.0, "mp": 5.0, "ip": 4.0},
    "ap": {"cmc_abd": 8.0},
    "op": {"cmc_abd": 6.0, "cmc_flex": 5.0},
}

# FDS comes in two lengths; the longer pair of actuators serves index/middle.
_FDS_LENGTH = {"index": 200.0, "middle": 200.0, "ring": 160.0, "little": 160.0}


def _flex(joint_id: str, arm: float) -> Waypoint:
    return Waypoint(joint_id=joint_id, moment_arm_mm=arm, sense="flexion")


def _ext(joint_id: str, arm: float) -> Waypoint:
    return Waypoint(joint_id=joint_id, moment_arm_mm=arm, sense="extension")


def initial_hand() -> HandDescription:
    """Uncalibrated hand: full structure with initial-guess mechanics."""
    joints = []
    for finger in FINGERS:
        for name, rest in zip(_FINGER_JOINT_NAMES, RELAXED_ANGLES_DEG):
            lo, hi = _FINGER_LIMITS[name]
            joints.append(
                JointSpec(
                    id=f"{finger}_{name}",
                    rest_angle_deg=rest,
                    stiffness_nmm_per_deg=_INITIAL_STIFFNESS[name],
                    min_angle_deg=lo,
                    max_angle_deg=hi,
                )
            )
    for name in ("cmc_flex", "cmc_abd", "mp", "ip"):
        lo, hi = _THUMB_LIMITS[name]
        joints.append(
            JointSpec(
                id=f"thumb_{name}",
                rest_angle_deg=_THUMB_REST[name],
                stiffness_nmm_per_deg=_THUMB_STIFFNESS[name],
                min_angle_deg=lo,
                max_angle_deg=hi,
            )
        )

    muscles = []
    routes = []

    def add_muscle(mid, acronym, length, finger, waypoints, slack):
        muscles.append(
            MuscleSpec(
                id=mid,
                acronym=acronym,
                length_mm=length,
                target_finger=finger,
                pam=reference_pam(rest_length_mm=length),
            )
        )
        routes.append(TendonRoute(muscle_id=mid, waypoints=tuple(waypoints), slack_mm=slack))

    for finger in FINGERS:
        mcp, pip_, dip = (f"{finger}_{n}" for n in _FINGER_JOINT_NAMES)
        fdp = _INITIAL_ARMS["fdp"]
        fds = _INITIAL_ARMS["fds"]
        ed = _INITIAL_ARMS["ed"]
        add_muscle(
            f"fdp_{finger}", "FDP", 220.0, finger,
            [_flex(mcp, fdp[0]), _flex(pip_, fdp[1]), _flex(dip, fdp[2])],
            _INITIAL_SLACK["flexor"],
        )
        for tag in ("a", "b"):
            add_muscle(
                f"fds_{finger}_{tag}", "FDS", _FDS_LENGTH[finger], finger,
                [_flex(mcp, fds[0]), _flex(pip_, fds[1])],
                _INITIAL_SLACK["flexor"],
            )
        add_muscle(
            f"ed_{finger}", "ED", 220.0, finger,
            [_ext(mcp, ed[0]), _ext(pip_, ed[1]), _ext(dip, ed[2])],
            _INITIAL_SLACK["extensor"],
        )

    fpl = _THUMB_ARMS["fpl"]
    for tag in ("a", "b"):
        add_muscle(
            f"fpl_{tag}", "FPL", 160.0, "thumb",
            [
                _flex("thumb_cmc_flex", fpl["cmc_flex"]),
                _flex("thumb_mp", fpl["mp"]),
                _flex("thumb_ip", fpl["ip"]),
            ],
            _INITIAL_SLACK["flexor"],
        )
    epl = _THUMB_ARMS["epl"]
    add_muscle(
        "epl", "EPL", 160.0, "thumb",
        [
            _ext("thumb_cmc_abd", epl["cmc_abd"]),
            _ext("thumb_cmc_flex", epl["cmc_flex"]),
            _ext("thumb_mp", epl["mp"]),
            _ext("thumb_ip", epl["ip"]),
        ],
        _INITIAL_SLACK["extensor"],
    )
    ap = _THUMB_ARMS["ap"]
    for tag in ("a", "b"):
        add_muscle(
            f"ap_{tag}", "AP", 160.0, "thumb",
            [_flex("thumb_cmc_abd", ap["cmc_abd"])],
            _INITIAL_SLACK["flexor"],
        )
    op = _THUMB_ARMS["op"]
    add_muscle(
        "op", "OP", 140.0, "thumb",
        [_flex("thumb_cmc_abd", op["cmc_abd"]), _flex("thumb_cmc_flex", op["cmc_flex"])],
        _INITIAL_SLACK["flexor"],
    )

    sensors = [SensorSpec(id=digit, location="fingertip") for digit in DIGITS]
    sensors.append(SensorSpec(id="palm", location="palm"))

    fingers = tuple(
        FingerChain(
            id=finger,
            joint_ids=tuple(f"{finger}_{n}" for n in _FINGER_JOINT_NAMES),
            segment_lengths_mm=_SEGMENTS[finger],
        )
        for finger in FINGERS
    )
    thumb = ThumbChain(
        joint_ids=("thumb_cmc_flex", "thumb_cmc_abd", "thumb_mp", "thumb_ip"),
        segment_lengths_mm=_SEGMENTS["thumb"],
    )
    frames = tuple(
        Frame(digit=digit, origin_mm=_FRAMES[digit][0], yaw_deg=_FRAMES[digit][1],
              pitch_deg=_FRAMES[digit][2], roll_deg=_FRAMES[digit][3])
        for digit in DIGITS
    )

    return HandDescription(
        joints=tuple(joints),
        muscles=tuple(muscles),
        routes=tuple(routes),
        sensors=tuple(sensors),
        fingers=fingers,
        thumb=thumb,
        frames=frames,
    )


def default_hand() -> HandDescription:
    """The shipped calibrated hand (parsed from the embedded description)."""
    text = resources.files("musclesim").joinpath("data/default_hand.json").read_text()
    return parse_hand_description(text)
