"""Synthetic disaster arena and sensor models.

The world is a box-walled arena with axis-aligned obstacle boxes, point
landmarks carrying discrete descriptor ids, and victims on the floor.
Everything downstream consumes it through four sensor models:

* ``sample_imu``       gyro / specific force / magnetometer along a trajectory
* ``observe_landmarks`` frustum + occlusion culling, bearing/elevation/range
* ``simulate_vo``      relative pose with count-driven loss and 1/sqrt(n) noise
* ``depth_scan``       planar ray fan against the obstacle boxes

All randomness is keyed by (seed, timestamp bits) so a sample at a given
time is reproducible regardless of query order. The world itself is
immutable after construction and safe to share.

Frames: camera looks along body +x, bearing positive toward +y, elevation
positive toward +z. Gravity is -z at 9.81 m/s^2, magnetic north is +x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import yaml

from .attitude import ImuSample
from .errors import ConfigError, OutOfSpan
from .geom import EulerRpy, Pose6, UnitQuaternion, wrap_angle

GRAVITY_VEC = np.array([0.0, 0.0, -9.81])
NORTH = np.array([1.0, 0.0, 0.0])

_SEG_EPS = 1e-6


def rng_for(seed: int, t: float, stream: int = 0) -> np.random.Generator:
    """Generator keyed by (seed, time): order-independent reproducibility."""
    t_bits = int(np.float64(t).view(np.uint64))
    return np.random.default_rng([int(seed), stream, t_bits])


@dataclass(frozen=True)
class Landmark:
    id: int
    position: np.ndarray
    desc: int

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(3)
        hi = np.asarray(self.hi, dtype=float).reshape(3)
        if np.any(hi <= lo):
            raise ValueError(f"degenerate box {lo} .. {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, p: np.ndarray, margin: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - margin) and np.all(p <= self.hi + margin))


@dataclass(frozen=True)
class VictimTruth:
    id: int
    position: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))


@dataclass(frozen=True)
class Terrain:
    resolution: float
    origin: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(2))
        object.__setattr__(self, "heights", np.asarray(self.heights, dtype=float))

    def height_at(self, x: float, y: float) -> float:
        i = int(np.clip((y - self.origin[1]) / self.resolution, 0, self.heights.shape[0] - 1))
        j = int(np.clip((x - self.origin[0]) / self.resolution, 0, self.heights.shape[1] - 1))
        return float(self.heights[i, j])


@dataclass(frozen=True)
class World:
    bounds_lo: np.ndarray
    bounds_hi: np.ndarray
    landmarks: tuple
    obstacles: tuple
    victims: tuple
    terrain: Terrain
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bounds_lo", np.asarray(self.bounds_lo, dtype=float).reshape(3))
        object.__setattr__(self, "bounds_hi", np.asarray(self.bounds_hi, dtype=float).reshape(3))
        object.__setattr__(self, "landmarks", tuple(self.landmarks))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "victims", tuple(self.victims))
        ids = [lm.id for lm in self.landmarks]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate landmark ids")
        for v in self.victims:
            if not (np.all(v.position >= self.bounds_lo) and np.all(v.position <= self.bounds_hi)):
                raise ValueError(f"victim {v.id} outside bounds")

    def landmark_array(self) -> np.ndarray:
        if not self.landmarks:
            return np.zeros((0, 3))
        return np.stack([lm.position for lm in self.landmarks])

    def is_free(self, p: np.ndarray, margin: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        if np.any(p[:2] < self.bounds_lo[:2] + margin) or np.any(p[:2] > self.bounds_hi[:2] - margin):
            return False
        return not any(b.contains(p, margin) for b in self.obstacles)


# ---------------------------------------------------------------------------
# trajectory


class TrueTrajectory:
    """Dense uniformly-sampled ground-truth poses with derivative queries.

    Positions are piecewise linear between samples; orientation between
    samples follows the shortest arc. Body rates and accelerations are the
    per-interval finite differences, so a constant-rate segment reports its
    rate exactly.
    """

    def __init__(self, ts: np.ndarray, positions: np.ndarray, quats: Sequence[UnitQuaternion]):
        self.ts = np.asarray(ts, dtype=float)
        if len(self.ts) < 2:
            raise ValueError("trajectory needs at least two samples")
        dts = np.diff(self.ts)
        if np.any(dts <= 0):
            raise ValueError("timestamps must be strictly increasing")
        self.dt = float(dts[0])
        if not np.allclose(dts, self.dt, rtol=0, atol=1e-9):
            raise ValueError("samples must be uniformly spaced")
        self.positions = np.asarray(positions, dtype=float)
        self.quats = list(quats)
        n = len(self.ts)
        # per-interval body rates from relative rotations
        self._rates = np.zeros((n - 1, 3))
        for i in range(n - 1):
            rel = self.quats[i].conjugate().multiply(self.quats[i + 1])
            self._rates[i] = rel.to_rotvec() / self.dt
        vel = np.diff(self.positions, axis=0) / self.dt
        self._vels = vel
        self._accs = np.zeros((n - 1, 3))
        if n > 2:
            self._accs[1:] = np.diff(vel, axis=0) / self.dt

    @property
    def t0(self) -> float:
        return float(self.ts[0])

    @property
    def t1(self) -> float:
        return float(self.ts[-1])

    def _index(self, t: float) -> tuple[int, float]:
        if t < self.t0 - 1e-9 or t > self.t1 + 1e-9:
            raise OutOfSpan(f"t={t} outside [{self.t0}, {self.t1}]")
        u = (t - self.t0) / self.dt
        i = int(np.clip(math.floor(u), 0, len(self.ts) - 2))
        return i, u - i

    def pose_at(self, t: float) -> Pose6:
        i, a = self._index(t)
        pos = (1.0 - a) * self.positions[i] + a * self.positions[i + 1]
        rel = self.quats[i].conjugate().multiply(self.quats[i + 1])
        q = self.quats[i].multiply(rel.scaled(a))
        return Pose6(pos, q)

    def body_rates_at(self, t: float) -> np.ndarray:
        i, _ = self._index(t)
        return self._rates[i].copy()

    def accel_at(self, t: float) -> np.ndarray:
        i, _ = self._index(t)
        return self._accs[i].copy()

    def velocity_at(self, t: float) -> np.ndarray:
        i, _ = self._index(t)
        return self._vels[i].copy()

    @classmethod
    def static(cls, pose: Pose6, duration: float, dt: float = 0.01) -> "TrueTrajectory":
        n = max(2, int(round(duration / dt)) + 1)
        ts = np.arange(n) * dt
        positions = np.tile(pose.position, (n, 1))
        return cls(ts, positions, [pose.orientation] * n)

    @classmethod
    def from_waypoints(
        cls,
        waypoints: np.ndarray,
        speed: float = 0.5,
        dt: float = 0.02,
        yaw_rate_limit: float = 1.5,
        initial_yaw: Optional[float] = None,
    ) -> "TrueTrajectory":
        """Constant-speed polyline walk; yaw slews toward travel heading."""
        wp = np.asarray(waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[0] < 2 or wp.shape[1] != 3:
            raise ValueError("waypoints must be (M, 3) with M >= 2")
        seg = np.diff(wp, axis=0)
        seg_len = np.linalg.norm(seg, axis=1)
        if np.any(seg_len < 1e-9):
            raise ValueError("repeated waypoints")
        total = float(seg_len.sum())
        n = max(2, int(math.ceil(total / (speed * dt))) + 1)
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])

        def heading(i_seg: int) -> float:
            d = seg[i_seg]
            return math.atan2(d[1], d[0])

        yaw = heading(0) if initial_yaw is None else float(initial_yaw)
        ts, positions, quats = [], [], []
        for k in range(n):
            t = k * dt
            s = min(speed * t, total)
            i_seg = int(np.searchsorted(cum, s, side="right") - 1)
            i_seg = min(i_seg, len(seg) - 1)
            a = (s - cum[i_seg]) / seg_len[i_seg]
            pos = wp[i_seg] + a * seg[i_seg]
            target = heading(i_seg)
            err = wrap_angle(target - yaw)
            step = np.clip(err, -yaw_rate_limit * dt, yaw_rate_limit * dt)
            yaw = wrap_angle(yaw + step)
            ts.append(t)
            positions.append(pos)
            quats.append(EulerRpy(0.0, 0.0, yaw).to_quat())
        return cls(np.array(ts), np.array(positions), quats)


# ---------------------------------------------------------------------------
# sensor models


@dataclass(frozen=True)
class ImuNoiseConfig:
    sigma_gyro: float = 0.01
    sigma_acc: float = 0.05
    sigma_mag: float = 0.02
    bias_gyro: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class CameraConfig:
    fov_deg: float = 90.0
    max_range: float = 8.0


@dataclass(frozen=True)
class VoNoiseConfig:
    sigma_t: float = 0.01
    sigma_r: float = 0.005
    n_min: int = 15


@dataclass(frozen=True)
class ScanConfig:
    fov_deg: float = 120.0
    n_rays: int = 121
    max_range: float = 5.0


@dataclass(frozen=True)
class LandmarkObs:
    id: int
    bearing: float
    elevation: float
    range: float
    desc: int

    def body_point(self) -> np.ndarray:
        cb, sb = math.cos(self.bearing), math.sin(self.bearing)
        ce, se = math.cos(self.elevation), math.sin(self.elevation)
        return self.range * np.array([ce * cb, ce * sb, se])


@dataclass(frozen=True)
class VoEstimate:
    t: float
    rel: Optional[Pose6]
    valid: bool
    visible_count: int


def sample_imu(
    traj: TrueTrajectory,
    t: float,
    noise: ImuNoiseConfig = ImuNoiseConfig(),
    seed: int = 0,
) -> ImuSample:
    """Ideal strapdown measurements plus bias and white noise at time t."""
    pose = traj.pose_at(t)
    R = pose.orientation.to_matrix()
    gyro = traj.body_rates_at(t)
    accel = R.T @ (traj.accel_at(t) - GRAVITY_VEC)
    mag = R.T @ NORTH
    rng = rng_for(seed, t)
    gyro = gyro + np.asarray(noise.bias_gyro, dtype=float) + rng.normal(0.0, 1.0, 3) * noise.sigma_gyro
    accel = accel + rng.normal(0.0, 1.0, 3) * noise.sigma_acc
    mag = mag + rng.normal(0.0, 1.0, 3) * noise.sigma_mag
    return ImuSample(t=t, gyro=gyro, accel=accel, mag=mag)


def _segments_blocked(origin: np.ndarray, targets: np.ndarray, boxes: Sequence[Box]) -> np.ndarray:
    """For each target, does the segment origin->target pass through a box?

    Slab test run per box over all segments at once. Touching a face at the
    far endpoint (a landmark sitting on the surface) does not count.
    """
    n = targets.shape[0]
    blocked = np.zeros(n, dtype=bool)
    if n == 0:
        return blocked
    d = targets - origin[None, :]
    for box in boxes:
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (box.lo[None, :] - origin[None, :]) / d
            t2 = (box.hi[None, :] - origin[None, :]) / d
        tlo = np.minimum(t1, t2)
        thi = np.maximum(t1, t2)
        # axis-parallel segments: inside the slab -> unconstrained, else miss
        zero = np.abs(d) < 1e-15
        if np.any(zero):
            inside = (origin[None, :] >= box.lo[None, :]) & (origin[None, :] <= box.hi[None, :])
            tlo = np.where(zero, np.where(inside, -np.inf, np.inf), tlo)
            thi = np.where(zero, np.where(inside, np.inf, -np.inf), thi)
        enter = tlo.max(axis=1)
        exit_ = thi.min(axis=1)
        hit = (enter <= exit_) & (exit_ > _SEG_EPS) & (enter < 1.0 - _SEG_EPS)
        blocked |= hit
    return blocked


def segment_blocked(world: World, a: np.ndarray, b: np.ndarray) -> bool:
    """True when the open segment a->b passes through an obstacle box."""
    a = np.asarray(a, dtype=float).reshape(3)
    b = np.asarray(b, dtype=float).reshape(1, 3)
    return bool(_segments_blocked(a, b, world.obstacles)[0])


def observe_landmarks(
    world: World,
    pose: Pose6,
    cam: CameraConfig = CameraConfig(),
) -> list[LandmarkObs]:
    """Landmarks inside the frustum, in range, and not occluded by a box."""
    pts = world.landmark_array()
    if pts.shape[0] == 0:
        return []
    R = pose.orientation.to_matrix()
    body = (pts - pose.position[None, :]) @ R
    ranges = np.linalg.norm(body, axis=1)
    bearing = np.arctan2(body[:, 1], body[:, 0])
    elevation = np.arctan2(body[:, 2], np.hypot(body[:, 0], body[:, 1]))
    half = math.radians(cam.fov_deg) / 2.0
    keep = (
        (ranges > 1e-9)
        & (ranges <= cam.max_range)
        & (np.abs(bearing) <= half)
        & (np.abs(elevation) <= half)
    )
    idx = np.nonzero(keep)[0]
    if idx.size:
        blocked = _segments_blocked(pose.position, pts[idx], world.obstacles)
        idx = idx[~blocked]
    out = []
    for i in idx:
        lm = world.landmarks[i]
        out.append(LandmarkObs(lm.id, float(bearing[i]), float(elevation[i]), float(ranges[i]), lm.desc))
    return out


def simulate_vo(
    prev: Pose6,
    cur: Pose6,
    visible_count: int,
    noise: VoNoiseConfig = VoNoiseConfig(),
    seed: int = 0,
    t: float = 0.0,
) -> VoEstimate:
    """Relative-pose estimate; tracking is lost below the count threshold."""
    if visible_count < noise.n_min:
        return VoEstimate(t=t, rel=None, valid=False, visible_count=visible_count)
    rel = cur.relative_to(prev)
    if noise.sigma_t == 0.0 and noise.sigma_r == 0.0:
        return VoEstimate(t=t, rel=rel, valid=True, visible_count=visible_count)
    scale = 1.0 / math.sqrt(visible_count)
    rng = rng_for(seed, t, stream=1)
    dt_noise = rng.normal(0.0, 1.0, 3) * (noise.sigma_t * scale)
    dr_noise = rng.normal(0.0, 1.0, 3) * (noise.sigma_r * scale)
    rel_noisy = Pose6(
        rel.position + dt_noise,
        rel.orientation.multiply(UnitQuaternion.from_rotvec(dr_noise)),
    )
    return VoEstimate(t=t, rel=rel_noisy, valid=True, visible_count=visible_count)


def depth_scan(world: World, pose: Pose6, cfg: ScanConfig = ScanConfig()) -> np.ndarray:
    """Planar fan of rays in the body xy-plane; returns global hit points."""
    if cfg.n_rays < 1:
        return np.zeros((0, 3))
    half = math.radians(cfg.fov_deg) / 2.0
    if cfg.n_rays == 1:
        angles = np.array([0.0])
    else:
        angles = np.linspace(-half, half, cfg.n_rays)
    dirs_body = np.stack([np.cos(angles), np.sin(angles), np.zeros_like(angles)], axis=1)
    R = pose.orientation.to_matrix()
    dirs = dirs_body @ R.T
    origin = pose.position
    best = np.full(cfg.n_rays, np.inf)
    for box in world.obstacles:
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (box.lo[None, :] - origin[None, :]) / dirs
            t2 = (box.hi[None, :] - origin[None, :]) / dirs
        tlo = np.minimum(t1, t2)
        thi = np.maximum(t1, t2)
        zero = np.abs(dirs) < 1e-15
        if np.any(zero):
            inside = (origin[None, :] >= box.lo[None, :]) & (origin[None, :] <= box.hi[None, :])
            tlo = np.where(zero, np.where(inside, -np.inf, np.inf), tlo)
            thi = np.where(zero, np.where(inside, np.inf, -np.inf), thi)
        enter = tlo.max(axis=1)
        exit_ = thi.min(axis=1)
        hit = (enter <= exit_) & (exit_ > 0.0) & (enter > 0.0)
        best = np.where(hit & (enter < best), enter, best)
    mask = best <= cfg.max_range
    return origin[None, :] + best[mask, None] * dirs[mask]


# ---------------------------------------------------------------------------
# world generation and files


def generate_world(
    seed: int,
    arena: tuple = (20.0, 15.0),
    height: float = 3.0,
    n_landmarks: int = 300,
    n_victims: Optional[int] = None,
    wall_thickness: float = 0.2,
) -> World:
    """Seeded arena: four walls, 5-10 boxes, landmarks on the surfaces.

    Landmarks sit 1 cm off their supporting face so the face itself never
    occludes them. A margin around (1.5, 1.5) stays clear for the robots.
    """
    rng = np.random.default_rng([int(seed), 0xA12EA])
    w, h = float(arena[0]), float(arena[1])
    lo = np.zeros(3)
    hi = np.array([w, h, height])
    tw = wall_thickness
    walls = [
        Box([0.0, 0.0, 0.0], [w, tw, height]),
        Box([0.0, h - tw, 0.0], [w, h, height]),
        Box([0.0, tw, 0.0], [tw, h - tw, height]),
        Box([w - tw, tw, 0.0], [w, h - tw, height]),
    ]
    home = np.array([1.5, 1.5])

    boxes = []
    n_boxes = int(rng.integers(5, 11))
    attempts = 0
    while len(boxes) < n_boxes and attempts < 500:
        attempts += 1
        size = rng.uniform([0.5, 0.5, 0.5], [2.5, 2.5, 2.0])
        cx = rng.uniform(tw + 1.0 + size[0] / 2, w - tw - 1.0 - size[0] / 2)
        cy = rng.uniform(tw + 1.0 + size[1] / 2, h - tw - 1.0 - size[1] / 2)
        blo = np.array([cx - size[0] / 2, cy - size[1] / 2, 0.0])
        bhi = np.array([cx + size[0] / 2, cy + size[1] / 2, size[2]])
        if np.all(np.abs([cx, cy] - home) < size[:2] / 2 + 1.5):
            continue
        clear = all(
            np.any(blo[:2] > b.hi[:2] + 0.8) or np.any(bhi[:2] < b.lo[:2] - 0.8)
            for b in boxes
        )
        if clear:
            boxes.append(Box(blo, bhi))

    obstacles = tuple(walls + boxes)

    landmarks = []
    n_wall = int(n_landmarks * 0.6)
    inner = [
        # inner faces: (fixed axis, value, normal direction)
        (1, tw + 0.01, [0.0, 1.0]),
        (1, h - tw - 0.01, [0.0, h]),
        (0, tw + 0.01, [0.0, 1.0]),
        (0, w - tw - 0.01, [0.0, h]),
    ]
    for i in range(n_wall):
        face = int(rng.integers(0, 4))
        axis, val, _ = inner[face]
        p = np.zeros(3)
        p[axis] = val
        other = 1 - axis
        span = w if other == 0 else h
        p[other] = rng.uniform(tw + 0.1, span - tw - 0.1)
        p[2] = rng.uniform(0.2, height - 0.3)
        landmarks.append(Landmark(id=i, position=p, desc=i))
    for i in range(n_wall, n_landmarks):
        if boxes:
            box = boxes[int(rng.integers(0, len(boxes)))]
            face = int(rng.integers(0, 4))
            axis = 0 if face < 2 else 1
            side = box.lo[axis] - 0.01 if face % 2 == 0 else box.hi[axis] + 0.01
            p = np.zeros(3)
            p[axis] = side
            other = 1 - axis
            p[other] = rng.uniform(box.lo[other] + 0.02, box.hi[other] - 0.02)
            p[2] = rng.uniform(max(0.2, box.lo[2]), box.hi[2] - 0.02)
        else:
            p = np.array([rng.uniform(1, w - 1), rng.uniform(1, h - 1), rng.uniform(0.3, 2.0)])
        landmarks.append(Landmark(id=i, position=p, desc=i))

    victims = []
    n_vic = int(rng.integers(1, 6)) if n_victims is None else int(n_victims)
    placed = 0
    attempts = 0
    world_probe = World(lo, hi, (), obstacles, (), Terrain(0.5, lo[:2], np.zeros((2, 2))), seed)
    while placed < n_vic and attempts < 2000:
        attempts += 1
        p = np.array([rng.uniform(1.2, w - 1.2), rng.uniform(1.2, h - 1.2), 0.0])
        if not world_probe.is_free(p, margin=0.7):
            continue
        if np.linalg.norm(p[:2] - home) < 1.0:
            continue
        if any(np.linalg.norm(p[:2] - v.position[:2]) < 2.0 for v in victims):
            continue
        victims.append(VictimTruth(id=placed, position=p, yaw=float(rng.uniform(-math.pi, math.pi))))
        placed += 1

    ny = int(math.ceil(h / 0.5)) + 1
    nx = int(math.ceil(w / 0.5)) + 1
    terrain = Terrain(0.5, lo[:2], np.zeros((ny, nx)))
    return World(lo, hi, tuple(landmarks), obstacles, tuple(victims), terrain, seed)


def save_world(path, world: World) -> None:
    doc = {
        "seed": int(world.seed),
        "bounds": {
            "min": [float(v) for v in world.bounds_lo],
            "max": [float(v) for v in world.bounds_hi],
        },
        "terrain": {
            "resolution": float(world.terrain.resolution),
            "origin": [float(v) for v in world.terrain.origin],
            "heights": [[float(v) for v in row] for row in world.terrain.heights],
        },
        "landmarks": [
            {"id": int(lm.id), "pos": [float(v) for v in lm.position], "desc": int(lm.desc)}
            for lm in world.landmarks
        ],
        "obstacles": [
            {"min": [float(v) for v in b.lo], "max": [float(v) for v in b.hi]}
            for b in world.obstacles
        ],
        "victims": [
            {"id": int(v.id), "pos": [float(x) for x in v.position], "yaw": float(v.yaw)}
            for v in world.victims
        ],
    }
    with open(path, "w") as f:
        yaml.safe_dump(doc, f, sort_keys=False)


def load_world(path) -> World:
    with open(path) as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    try:
        bounds = doc["bounds"]
        lo = np.asarray(bounds["min"], dtype=float)
        hi = np.asarray(bounds["max"], dtype=float)
        ter = doc.get("terrain") or {}
        terrain = Terrain(
            float(ter.get("resolution", 0.5)),
            np.asarray(ter.get("origin", lo[:2]), dtype=float),
            np.asarray(ter.get("heights", [[0.0]]), dtype=float),
        )
        landmarks = tuple(
            Landmark(int(d["id"]), np.asarray(d["pos"], dtype=float), int(d.get("desc", d["id"])))
            for d in doc.get("landmarks", [])
        )
        obstacles = tuple(
            Box(np.asarray(d["min"], dtype=float), np.asarray(d["max"], dtype=float))
            for d in doc.get("obstacles", [])
        )
        victims = tuple(
            VictimTruth(int(d["id"]), np.asarray(d["pos"], dtype=float), float(d.get("yaw", 0.0)))
            for d in doc.get("victims", [])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed world file ({exc})") from exc
    return World(lo, hi, landmarks, obstacles, victims, terrain, int(doc.get("seed", 0)))
