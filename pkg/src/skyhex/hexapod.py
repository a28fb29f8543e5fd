"""Hexapod kinematics and quasi-statics: 3-DOF leg FK/IK, the four gait
schedules, support-polygon stability, joint torque and payload analysis,
body posing, and the body-height energy model.

Conventions. Legs are indexed L1,R1,L2,R2,L3,R3 front to back. Each leg
frame sits at its mount with x pointing outward along the mount yaw and z
up; at all-zero joint angles the leg is a straight horizontal chain, so the
foot lies coxa+femur+tibia along the mount yaw. IK returns the knee-up
branch. Torque analysis is quasi-static with vertical ground forces only:
the coxa axis is vertical (zero torque), femur and tibia torques are force
times horizontal lever.

Two load models coexist deliberately. joint_torque_estimate is the simple
screening model (each stance leg carries an equal share). max_payload uses
a force-distribution model: per stance phase, vertical foot loads solve the
force/moment balance (minimum-norm with non-negativity for 4-5 legs), with
the payload placed in a rear compartment; capacity is the largest payload
whose worst-case femur torque stays inside the stall-torque safety margin.
Equal shares cannot reproduce a small amble-vs-tripod capacity gap; a
moment-limited rear compartment can.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DegenerateSupport, JointLimitViolation, Unreachable

LEG_NAMES = ("L1", "R1", "L2", "R2", "L3", "R3")
STANCE = "stance"
SWING = "swing"

STALL_TORQUE = 1.5  # N*m, servo stall
SAFETY_MARGIN = 0.25  # fraction of stall held in reserve
DEFAULT_STANCE_RADIUS = 0.140  # m, foot distance from mount, calibrated
DEFAULT_BODY_MASS = 3.51  # kg
# payload compartment sits just aft of the body center; the offset and the
# stance radius are frozen by scripts/calibrate_hexapod.py
COMPARTMENT_X = -0.020
GRAVITY = 9.81


@dataclass(frozen=True)
class LegGeometry:
    """Link lengths, per-leg mounts, and joint limits for all six legs."""

    coxa: float = 0.052
    femur: float = 0.066
    tibia: float = 0.132
    # waisted mid-section: all six default stance feet land at the same
    # lateral offset, which evens out the four-leg support distributions
    mounts: Tuple[Tuple[float, float], ...] = (
        (0.12, 0.06),
        (0.12, -0.06),
        (0.0, 0.0175),
        (0.0, -0.0175),
        (-0.12, 0.06),
        (-0.12, -0.06),
    )
    mount_yaws: Tuple[float, ...] = (
        math.pi / 4,
        -math.pi / 4,
        math.pi / 2,
        -math.pi / 2,
        3 * math.pi / 4,
        -3 * math.pi / 4,
    )
    coxa_limits: Tuple[float, float] = (-1.6, 1.6)
    femur_limits: Tuple[float, float] = (-1.6, 1.6)
    tibia_limits: Tuple[float, float] = (-2.8, 0.0)

    def __post_init__(self):
        if min(self.coxa, self.femur, self.tibia) <= 0:
            raise ConfigError("link lengths must be positive")
        if len(self.mounts) != 6 or len(self.mount_yaws) != 6:
            raise ConfigError("six legs required")


def _check_limits(name: str, value: float, lim: Tuple[float, float]) -> None:
    if not (lim[0] - 1e-12 <= value <= lim[1] + 1e-12):
        raise JointLimitViolation(f"{name} angle {value:.4f} outside {lim}")


def leg_fk(geom: LegGeometry, leg: int, angles: Sequence[float]) -> np.ndarray:
    """Body-frame foot position for one leg's (coxa, femur, tibia) angles."""
    qc, qf, qt = float(angles[0]), float(angles[1]), float(angles[2])
    _check_limits("coxa", qc, geom.coxa_limits)
    _check_limits("femur", qf, geom.femur_limits)
    _check_limits("tibia", qt, geom.tibia_limits)
    radial = geom.coxa + geom.femur * math.cos(qf) + geom.tibia * math.cos(qf + qt)
    z = geom.femur * math.sin(qf) + geom.tibia * math.sin(qf + qt)
    foot_leg = np.array([radial * math.cos(qc), radial * math.sin(qc), z])
    psi = geom.mount_yaws[leg]
    c, s = math.cos(psi), math.sin(psi)
    mx, my = geom.mounts[leg]
    return np.array(
        [
            mx + c * foot_leg[0] - s * foot_leg[1],
            my + s * foot_leg[0] + c * foot_leg[1],
            foot_leg[2],
        ]
    )


def leg_ik(geom: LegGeometry, leg: int, target: Sequence[float]) -> np.ndarray:
    """Knee-up closed-form IK for one leg; target in the body frame."""
    psi = geom.mount_yaws[leg]
    c, s = math.cos(psi), math.sin(psi)
    dx = float(target[0]) - geom.mounts[leg][0]
    dy = float(target[1]) - geom.mounts[leg][1]
    qx = c * dx + s * dy
    qy = -s * dx + c * dy
    qz = float(target[2])
    qc = math.atan2(qy, qx)
    r_h = math.hypot(qx, qy) - geom.coxa
    f, t = geom.femur, geom.tibia
    d2 = r_h * r_h + qz * qz
    cos_knee = (d2 - f * f - t * t) / (2.0 * f * t)
    if abs(cos_knee) > 1.0 + 1e-12:
        raise Unreachable(f"target at planar range {math.sqrt(d2):.4f} m outside annulus")
    gamma = math.acos(min(1.0, max(-1.0, cos_knee)))
    qt = -gamma  # knee-up branch
    qf = math.atan2(qz, r_h) + math.atan2(t * math.sin(gamma), f + t * math.cos(gamma))
    _check_limits("coxa", qc, geom.coxa_limits)
    _check_limits("femur", qf, geom.femur_limits)
    _check_limits("tibia", qt, geom.tibia_limits)
    return np.array([qc, qf, qt])


# --- gait scheduling ---


@dataclass(frozen=True)
class GaitSpec:
    name: str
    duty: float
    offsets: Tuple[float, ...]  # per leg, order L1,R1,L2,R2,L3,R3

    def __post_init__(self):
        if not 0.0 < self.duty < 1.0:
            raise ConfigError("duty factor must be in (0, 1)")
        if len(self.offsets) != 6:
            raise ConfigError("six phase offsets required")


# ripple uses the contralateral schedule: consecutive swing pairs alternate
# sides, keeping the support hull around the CoM at every instant
GAITS: Dict[str, GaitSpec] = {
    "tripod": GaitSpec("tripod", 0.5, (0.0, 0.5, 0.5, 0.0, 0.0, 0.5)),
    "wave": GaitSpec("wave", 5.0 / 6.0, (0.0, 1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0, 4.0 / 6.0, 5.0 / 6.0)),
    "ripple": GaitSpec("ripple", 2.0 / 3.0, (0.0, 1.0 / 2.0, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0, 5.0 / 6.0)),
    "amble": GaitSpec("amble", 2.0 / 3.0, (0.0, 1.0 / 3.0, 2.0 / 3.0, 0.0, 1.0 / 3.0, 2.0 / 3.0)),
}


def gait_phase(spec: GaitSpec, t: float, period: float) -> Dict[str, Tuple[str, float]]:
    """Per-leg (state, phase fraction); a leg swings in the last 1-duty of
    its cycle: swing iff frac(t/period - offset) >= duty."""
    if period <= 0:
        raise ValueError("period must be positive")
    out = {}
    for name, off in zip(LEG_NAMES, spec.offsets):
        phase = (t / period - off) % 1.0
        out[name] = (SWING if phase >= spec.duty else STANCE, phase)
    return out


def stance_legs(spec: GaitSpec, t: float, period: float = 1.0) -> Tuple[str, ...]:
    ph = gait_phase(spec, t, period)
    return tuple(name for name in LEG_NAMES if ph[name][0] == STANCE)


def default_stance(
    geom: LegGeometry,
    body_height: float = 0.12,
    stance_radius: float = DEFAULT_STANCE_RADIUS,
) -> Dict[str, np.ndarray]:
    """Neutral body-frame foot positions: radial from each mount, body_height
    below the body origin."""
    feet = {}
    for i, name in enumerate(LEG_NAMES):
        mx, my = geom.mounts[i]
        psi = geom.mount_yaws[i]
        feet[name] = np.array(
            [mx + stance_radius * math.cos(psi), my + stance_radius * math.sin(psi), -body_height]
        )
    return feet


# --- static stability ---


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Andrew monotone chain, CCW order."""
    idx = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[idx]

    def half(chain_pts):
        out = []
        for p in chain_pts:
            while len(out) >= 2:
                u = out[-1] - out[-2]
                v = p - out[-2]
                if u[0] * v[1] - u[1] * v[0] > 1e-12:
                    break
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def static_stability(feet: Sequence, com: Sequence[float]) -> float:
    """Signed distance from the CoM ground projection to the support polygon
    boundary: positive inside, negative outside."""
    pts = np.array([[f[0], f[1]] for f in feet], dtype=float)
    if len(pts) < 3:
        raise DegenerateSupport(f"{len(pts)} stance feet")
    centered = pts - pts.mean(axis=0)
    if np.linalg.svd(centered, compute_uv=False)[1] < 1e-9:
        raise DegenerateSupport("stance feet are collinear")
    hull = _convex_hull(pts)
    p = np.array([com[0], com[1]], dtype=float)
    inside = True
    min_d = math.inf
    for a, b in zip(hull, np.roll(hull, -1, axis=0)):
        edge = b - a
        cross = edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0])
        if cross < 0:
            inside = False
        # distance to the segment, not the infinite line
        s = np.clip(np.dot(p - a, edge) / np.dot(edge, edge), 0.0, 1.0)
        min_d = min(min_d, float(np.linalg.norm(p - (a + s * edge))))
    return min_d if inside else -min_d


# --- torque and payload ---


def _leg_levers(geom: LegGeometry, leg: int, foot: np.ndarray) -> Tuple[float, float]:
    """Horizontal lever arms (femur, tibia) for a vertical foot force."""
    angles = leg_ik(geom, leg, foot)
    qf, qt = angles[1], angles[2]
    lever_femur = abs(geom.femur * math.cos(qf) + geom.tibia * math.cos(qf + qt))
    lever_tibia = abs(geom.tibia * math.cos(qf + qt))
    return lever_femur, lever_tibia


def joint_torque_estimate(
    geom: LegGeometry,
    stance_feet: Dict[str, np.ndarray],
    body_mass: float,
    payload: float = 0.0,
    g: float = GRAVITY,
) -> Dict[str, float]:
    """Screening torque model: stance legs share the weight equally; returns
    the max torque per joint type. The coxa axis is vertical, so a vertical
    ground force loads it with exactly zero torque."""
    n = len(stance_feet)
    if n == 0:
        raise DegenerateSupport("no stance feet")
    force = (body_mass + payload) * g / n
    worst_femur = 0.0
    worst_tibia = 0.0
    for name, foot in stance_feet.items():
        leg = LEG_NAMES.index(name)
        lf, lt = _leg_levers(geom, leg, foot)
        worst_femur = max(worst_femur, force * lf)
        worst_tibia = max(worst_tibia, force * lt)
    return {"coxa": 0.0, "femur": worst_femur, "tibia": worst_tibia}


def solve_foot_forces(feet_xy: np.ndarray, com_xy: Sequence[float], weight: float) -> np.ndarray:
    """Vertical foot loads balancing force and moments.

    Minimum-norm solution of sum(F) = W, sum(F*x) = W*com_x, sum(F*y) = W*com_y
    with F >= 0, via iterative clamping of negative supports. Raises
    DegenerateSupport when no non-negative distribution exists (CoM outside
    the support of the remaining legs).
    """
    n = len(feet_xy)
    active = list(range(n))
    b = np.array([weight, weight * com_xy[0], weight * com_xy[1]])
    for _ in range(n):
        A = np.vstack([np.ones(len(active)), feet_xy[active, 0], feet_xy[active, 1]])
        AAT = A @ A.T
        if np.linalg.matrix_rank(AAT) < 3:
            raise DegenerateSupport("support degenerates under clamping")
        f_active = A.T @ np.linalg.solve(AAT, b)
        if (f_active >= -1e-9).all():
            out = np.zeros(n)
            out[active] = np.maximum(f_active, 0.0)
            return out
        active = [a for a, f in zip(active, f_active) if f > -1e-9]
        if len(active) < 3:
            raise DegenerateSupport("fewer than 3 loaded legs")
    raise DegenerateSupport("no non-negative force distribution")


def _stance_sets(spec: GaitSpec, samples: int = 240) -> list:
    seen = []
    for i in range(samples):
        legs = stance_legs(spec, i / samples)
        if legs not in seen:
            seen.append(legs)
    return seen


def _worst_case_torque(
    geom: LegGeometry,
    spec: GaitSpec,
    body_mass: float,
    payload: float,
    stance_radius: float,
    compartment_x: float,
    g: float,
) -> float:
    """Max femur torque over the gait's stance phases under the
    force-distribution model; inf when some phase cannot balance."""
    feet = default_stance(geom, stance_radius=stance_radius)
    total = body_mass + payload
    com_x = payload * compartment_x / total if total > 0 else 0.0
    worst = 0.0
    for legs in _stance_sets(spec):
        xy = np.array([feet[name][:2] for name in legs])
        try:
            forces = solve_foot_forces(xy, (com_x, 0.0), total * g)
        except DegenerateSupport:
            return math.inf
        for name, force in zip(legs, forces):
            lf, _ = _leg_levers(geom, LEG_NAMES.index(name), feet[name])
            worst = max(worst, force * lf)
    return worst


def max_payload(
    geom: LegGeometry,
    spec: GaitSpec,
    body_mass: float = DEFAULT_BODY_MASS,
    stance_radius: float = DEFAULT_STANCE_RADIUS,
    compartment_x: float = COMPARTMENT_X,
    stall: float = STALL_TORQUE,
    margin: float = SAFETY_MARGIN,
    g: float = GRAVITY,
) -> float:
    """Largest rear-compartment payload whose worst-case stance torque stays
    within stall * (1 - margin). Zero when the bare body already saturates
    the budget (tripod does: three uneven supports)."""
    budget = stall * (1.0 - margin)

    def torque(p):
        return _worst_case_torque(geom, spec, body_mass, p, stance_radius, compartment_x, g)

    if torque(0.0) > budget:
        return 0.0
    lo, hi = 0.0, 0.5
    while torque(hi) <= budget:
        hi *= 2.0
        if hi > 64.0:
            return hi  # torque budget practically unbounded
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if torque(mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


# --- body-height energy model ---


@dataclass(frozen=True)
class EnergyCurve:
    """Synthetic convex current-vs-height model, I(h) = base + k*(h - h_star)^2.

    The anchor values are declared, not fitted: the argmin heights and the
    gait-stage current level come from the platform's reported operating
    points; the curvature is a plausible placeholder.
    """

    h_star: float
    curvature: float = 260.0  # A / m^2
    base: float = 2.45  # A at the optimum

    def current(self, h) -> np.ndarray:
        return self.base + self.curvature * (np.asarray(h, dtype=float) - self.h_star) ** 2


ENERGY_CURVES: Dict[str, EnergyCurve] = {
    "stance": EnergyCurve(h_star=0.14, base=2.45),
    "gait": EnergyCurve(h_star=0.12, base=3.02),
}


def optimal_body_height(mode: str, curve: EnergyCurve = None) -> float:
    """Height minimizing the configured current-vs-height curve."""
    if curve is None:
        if mode not in ENERGY_CURVES:
            raise ConfigError(f"unknown mode {mode!r}")
        curve = ENERGY_CURVES[mode]
    return float(curve.h_star)


# --- body posing ---


@dataclass(frozen=True)
class BodyPose:
    """Body offset relative to the neutral stance frame; no yaw."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0

    def __post_init__(self):
        if abs(self.x) > 0.08 or abs(self.y) > 0.08 or abs(self.z) > 0.08:
            raise ConfigError("body translation outside posing envelope")
        if abs(self.roll) > 0.4 or abs(self.pitch) > 0.4:
            raise ConfigError("body tilt outside posing envelope")


def apply_body_pose(
    geom: LegGeometry, pose: BodyPose, feet_world: Dict[str, np.ndarray]
) -> Dict[str, np.ndarray]:
    """Joint angles keeping the given world-frame feet fixed while the body
    moves to `pose` (world frame = neutral body frame)."""
    cr, sr = math.cos(pose.roll), math.sin(pose.roll)
    cp, sp = math.cos(pose.pitch), math.sin(pose.pitch)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rot = ry @ rx
    offset = np.array([pose.x, pose.y, pose.z])
    angles = {}
    for name, foot_w in feet_world.items():
        leg = LEG_NAMES.index(name)
        foot_body = rot.T @ (np.asarray(foot_w, dtype=float) - offset)
        angles[name] = leg_ik(geom, leg, foot_body)
    return angles


# --- reporting ---


def torque_report_lines(
    geom: LegGeometry,
    body_mass: float = DEFAULT_BODY_MASS,
    payload: float = 0.0,
    stall: float = STALL_TORQUE,
) -> list:
    """CSV rows `gait,joint,torque_nm,margin_pct` from the screening model at
    each gait's thinnest stance phase."""
    lines = ["gait,joint,torque_nm,margin_pct"]
    feet = default_stance(geom)
    for name in ("wave", "ripple", "amble", "tripod"):
        spec = GAITS[name]
        sets = _stance_sets(spec)
        thinnest = min(sets, key=len)
        stance = {leg: feet[leg] for leg in thinnest}
        torques = joint_torque_estimate(geom, stance, body_mass, payload)
        for joint in ("coxa", "femur", "tibia"):
            tau = torques[joint]
            margin_pct = 100.0 * (1.0 - tau / stall)
            lines.append(f"{name},{joint},{tau:.6f},{margin_pct:.2f}")
    return lines
