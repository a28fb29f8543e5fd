"""Victim detection and map marking.

The detector is a calibrated probabilistic stand-in for a neural pipeline:
a victim inside the camera frustum and not hidden behind an obstacle is
reported with a range-dependent probability, and every report carries
bearing/elevation/range in the camera frame. Marking converts a report
into a world-frame arrow anchored at the robot: direction plus a ranged
position estimate. Repeated sightings of the same victim are consolidated
by distance clustering; manually placed marks outrank automatic ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geom import Pose6
from .worldsim import World, rng_for, segment_blocked

MANUAL = "manual"
AUTOMATIC = "automatic"


@dataclass(frozen=True)
class DetectorConfig:
    fov_deg: float = 90.0
    max_range: float = 8.0
    p_near: float = 0.95
    r_near: float = 4.0
    p_far: float = 0.5
    r_far: float = 8.0
    false_positive_rate: float = 0.0
    range_sigma: float = 0.05
    # victims lie on the floor; the detector sights their torso height
    sight_height: float = 0.3


@dataclass(frozen=True)
class Detection:
    bearing: float
    elevation: float
    range: float
    confidence: float
    t: float

    def __post_init__(self):
        if not self.range > 0.0:
            raise ValueError(f"range must be positive, got {self.range}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence outside [0, 1]: {self.confidence}")

    def body_point(self) -> np.ndarray:
        cb, sb = math.cos(self.bearing), math.sin(self.bearing)
        ce, se = math.cos(self.elevation), math.sin(self.elevation)
        return self.range * np.array([ce * cb, ce * sb, se])


@dataclass(frozen=True)
class VictimMark:
    id: int
    source: str
    anchor: np.ndarray
    direction: np.ndarray
    estimate: np.ndarray

    def __post_init__(self):
        anchor = np.asarray(self.anchor, dtype=float).reshape(3)
        direction = np.asarray(self.direction, dtype=float).reshape(3)
        estimate = np.asarray(self.estimate, dtype=float).reshape(3)
        n = np.linalg.norm(direction)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"direction must be unit length, |d|={n}")
        if self.source not in (MANUAL, AUTOMATIC):
            raise ValueError(f"unknown source {self.source!r}")
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "estimate", estimate)


def detection_probability(r: float, cfg: DetectorConfig = DetectorConfig()) -> float:
    if r <= cfg.r_near:
        return cfg.p_near
    if r >= cfg.r_far:
        return cfg.p_far
    a = (r - cfg.r_near) / (cfg.r_far - cfg.r_near)
    return cfg.p_near + a * (cfg.p_far - cfg.p_near)


def detect_victims(
    pose: Pose6,
    world: World,
    cfg: DetectorConfig = DetectorConfig(),
    seed: int = 0,
    t: float = 0.0,
) -> list[Detection]:
    """Probabilistic sightings of in-view victims, deterministic per (seed, t)."""
    R = pose.orientation.to_matrix()
    half = math.radians(cfg.fov_deg) / 2.0
    rng = rng_for(seed, t, stream=2)
    out = []
    for v in world.victims:
        target = v.position + np.array([0.0, 0.0, cfg.sight_height])
        body = R.T @ (target - pose.position)
        r = float(np.linalg.norm(body))
        if r < 1e-9 or r > cfg.max_range:
            continue
        bearing = math.atan2(body[1], body[0])
        elevation = math.atan2(body[2], math.hypot(body[0], body[1]))
        if abs(bearing) > half or abs(elevation) > half:
            continue
        if segment_blocked(world, pose.position, target):
            continue
        draw = float(rng.uniform())
        if draw >= detection_probability(r, cfg):
            continue
        r_meas = max(1e-6, r + float(rng.normal(0.0, 1.0)) * cfg.range_sigma)
        conf = float(rng.uniform(0.6, 0.99))
        out.append(Detection(bearing, elevation, r_meas, conf, t))
    if cfg.false_positive_rate > 0.0:
        for _ in range(int(rng.poisson(cfg.false_positive_rate))):
            out.append(
                Detection(
                    bearing=float(rng.uniform(-half, half)),
                    elevation=float(rng.uniform(-half / 2, half / 2)),
                    range=float(rng.uniform(1.0, cfg.max_range)),
                    confidence=float(rng.uniform(0.3, 0.7)),
                    t=t,
                )
            )
    return out


def mark_victim(pose: Pose6, det: Detection, source: str = AUTOMATIC, mark_id: int = -1) -> VictimMark:
    """Arrow from the robot toward the sighting, with a ranged endpoint."""
    body = det.body_point()
    if not np.all(np.isfinite(body)):
        raise ValueError("detection is not finite")
    direction = pose.orientation.rotate(body / det.range)
    estimate = pose.position + det.range * direction
    return VictimMark(mark_id, source, pose.position.copy(), direction, estimate)


def dedupe_marks(marks: Sequence[VictimMark], radius: float = 0.75) -> list[VictimMark]:
    """Merge marks closer than radius until all survivors are separated.

    Closest pairs merge first; a merged mark sits at the member-weighted
    centroid and is manual if any member was. The arrow is re-aimed from
    the surviving anchor so estimate = anchor + range * direction holds.
    """
    if radius <= 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    # (estimate, weight, source, id, anchor)
    items = [
        [m.estimate.astype(float), 1, m.source, m.id, m.anchor.astype(float)] for m in marks
    ]
    while len(items) > 1:
        best = None
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                d = float(np.linalg.norm(items[i][0] - items[j][0]))
                if d < radius and (best is None or d < best[0]):
                    best = (d, i, j)
        if best is None:
            break
        _, i, j = best
        a, b = items[i], items[j]
        w = a[1] + b[1]
        est = (a[0] * a[1] + b[0] * b[1]) / w
        # manual wins; otherwise keep the older (lower-id) identity
        if (b[2] == MANUAL) and (a[2] != MANUAL):
            keep = b
        elif (a[2] == MANUAL) and (b[2] != MANUAL):
            keep = a
        else:
            keep = a if a[3] <= b[3] else b
        items[i] = [est, w, keep[2], keep[3], keep[4]]
        del items[j]
    out = []
    for est, _, source, mid, anchor in items:
        ray = est - anchor
        rng_len = float(np.linalg.norm(ray))
        if rng_len < 1e-9:
            direction = np.array([1.0, 0.0, 0.0])
        else:
            direction = ray / rng_len
        out.append(VictimMark(mid, source, anchor, direction, est))
    return out


def marks_csv_lines(marks: Sequence[VictimMark]) -> list[str]:
    lines = []
    for m in marks:
        fields = [str(m.id), m.source]
        fields += [repr(float(v)) for v in m.anchor]
        fields += [repr(float(v)) for v in m.direction]
        fields += [repr(float(v)) for v in m.estimate]
        lines.append(",".join(fields))
    return lines


def mark_from_csv_fields(fields: Sequence[str]) -> VictimMark:
    if len(fields) != 11:
        raise ValueError(f"expected 11 fields, got {len(fields)}")
    vals = [float(x) for x in fields[2:]]
    return VictimMark(
        int(fields[0]),
        fields[1],
        np.array(vals[0:3]),
        np.array(vals[3:6]),
        np.array(vals[6:9]),
    )
