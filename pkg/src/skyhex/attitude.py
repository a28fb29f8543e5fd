"""Quaternion complementary attitude filter for gyro/accel/mag streams.

The estimate ``q`` maps body to global. Each step composes three factors:

1. gyro prediction, right-composed body increment:
   ``q_omega = q * exp(gyro * dt)``
2. an accelerometer delta that tilts the prediction so measured gravity
   lines up with global +z. It is built as the shortest arc between the
   predicted gravity direction and +z, so its rotation axis is horizontal
   (zero global-z generator): it can never touch yaw.
3. a magnetometer delta of the exact form ``(w, 0, 0, z)``, a pure
   global-z rotation aligning the horizontal field projection with +x
   (magnetic north). It cannot touch roll or pitch.

Corrections are expressed in the global frame and therefore left-composed:
``q+ = dq_mag * dq_acc * q_omega``. Each delta is blended toward identity by
its gain: spherical interpolation above a 10 degree delta, normalized linear
below. The accelerometer gain is additionally attenuated when the measured
magnitude departs from gravity (full weight within 10%, zero beyond 20%),
which rejects transient linear acceleration.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateMagField,
    NonMonotonicTimestamp,
    NonPositiveDt,
    ZeroAccelVector,
)
from .geom import EulerRpy, UnitQuaternion

GRAVITY = 9.81

_LERP_THRESHOLD = math.radians(10.0)


@dataclass(frozen=True)
class ImuSample:
    """One IMU reading. gyro rad/s (body), accel m/s^2 (specific force,
    body), mag unitless direction (body) or None."""

    t: float
    gyro: np.ndarray
    accel: np.ndarray
    mag: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "gyro", np.asarray(self.gyro, dtype=float).reshape(3))
        object.__setattr__(self, "accel", np.asarray(self.accel, dtype=float).reshape(3))
        if self.mag is not None:
            object.__setattr__(self, "mag", np.asarray(self.mag, dtype=float).reshape(3))


@dataclass(frozen=True)
class AttitudeConfig:
    gain_acc: float = 0.02
    gain_mag: float = 0.01
    gravity: float = GRAVITY
    # magnitude-error ramp: full accel weight below the low threshold,
    # zero above the high one, linear in between (fractions of g)
    adaptive_low: float = 0.1
    adaptive_high: float = 0.2
    lowpass_cutoff_hz: Optional[float] = None


@dataclass(frozen=True)
class AttitudeState:
    q: UnitQuaternion
    t: float


def predict_from_gyro(state: AttitudeState, gyro, dt: float) -> UnitQuaternion:
    """Integrate body rates over dt: q * exp(gyro * dt)."""
    if dt <= 0.0:
        raise NonPositiveDt(f"dt={dt}")
    rv = np.asarray(gyro, dtype=float) * dt
    return state.q.multiply(UnitQuaternion.from_rotvec(rv))


def _magnitude_ramp(accel_norm: float, cfg: AttitudeConfig) -> float:
    e = abs(accel_norm - cfg.gravity) / cfg.gravity
    if e <= cfg.adaptive_low:
        return 1.0
    if e >= cfg.adaptive_high:
        return 0.0
    return (cfg.adaptive_high - e) / (cfg.adaptive_high - cfg.adaptive_low)


def accel_correction(
    q_pred: UnitQuaternion, accel, gain_acc: float, cfg: AttitudeConfig = AttitudeConfig()
) -> UnitQuaternion:
    """Gain-scaled tilt delta aligning predicted gravity with global +z.

    Returned quaternion has zero z component by construction; the effective
    gain is ``gain_acc`` times the magnitude-error ramp.
    """
    a = np.asarray(accel, dtype=float)
    n = float(np.linalg.norm(a))
    if n < 1e-12:
        raise ZeroAccelVector("accelerometer vector is zero")
    v = q_pred.rotate(a / n)  # measured gravity direction, global frame
    # shortest arc v -> e_z: q = normalize(1 + v.e_z, v x e_z); the cross
    # product with e_z has no z component, so neither does the delta
    w = 1.0 + v[2]
    if w < 1e-12:
        full = UnitQuaternion(0.0, 1.0, 0.0, 0.0)  # antiparallel: flip about x
    else:
        full = UnitQuaternion(w, v[1], -v[0], 0.0)
    g_eff = gain_acc * _magnitude_ramp(n, cfg)
    return full.scaled(g_eff, _LERP_THRESHOLD)


def mag_correction(q: UnitQuaternion, mag, gain_mag: float) -> UnitQuaternion:
    """Gain-scaled pure global-z delta aligning the horizontal field with +x.

    The result has x = y = 0 exactly, so composing it cannot change roll or
    pitch. Raises DegenerateMagField when the field has no horizontal
    projection in the global frame (yaw unobservable).
    """
    m = np.asarray(mag, dtype=float)
    n = float(np.linalg.norm(m))
    if n < 1e-12:
        raise DegenerateMagField("magnetometer vector is zero")
    h = q.rotate(m / n)
    hx, hy = h[0], h[1]
    if math.hypot(hx, hy) < 1e-9:
        raise DegenerateMagField("field parallel to gravity, yaw unobservable")
    delta = math.atan2(hy, hx)
    full = UnitQuaternion(math.cos(0.5 * delta), 0.0, 0.0, -math.sin(0.5 * delta))
    return full.scaled(gain_mag, _LERP_THRESHOLD)


def init_from_sample(sample: ImuSample, cfg: AttitudeConfig = AttitudeConfig()) -> AttitudeState:
    """Roll/pitch from the accelerometer, yaw from the magnetometer (or 0)."""
    a = sample.accel
    n = float(np.linalg.norm(a))
    if n < 1e-12:
        raise ZeroAccelVector("cannot initialize from zero accel")
    ah = a / n
    roll = math.atan2(ah[1], ah[2])
    pitch = math.asin(max(-1.0, min(1.0, -ah[0])))
    yaw = 0.0
    if sample.mag is not None:
        q_rp = EulerRpy(roll, pitch, 0.0).to_quat()
        m = np.asarray(sample.mag, dtype=float)
        mn = float(np.linalg.norm(m))
        if mn > 1e-12:
            h = q_rp.rotate(m / mn)
            if math.hypot(h[0], h[1]) >= 1e-9:
                yaw = -math.atan2(h[1], h[0])
    return AttitudeState(EulerRpy(roll, pitch, yaw).to_quat(), sample.t)


def filter_step(
    state: AttitudeState, sample: ImuSample, cfg: AttitudeConfig = AttitudeConfig()
) -> AttitudeState:
    """One predict + correct cycle. Timestamps must strictly increase."""
    dt = sample.t - state.t
    if dt <= 0.0:
        raise NonMonotonicTimestamp(f"sample t={sample.t} not after state t={state.t}")
    q_omega = predict_from_gyro(state, sample.gyro, dt)
    dq_acc = accel_correction(q_omega, sample.accel, cfg.gain_acc, cfg)
    q = dq_acc.multiply(q_omega)
    if sample.mag is not None:
        try:
            dq_mag = mag_correction(q, sample.mag, cfg.gain_mag)
        except DegenerateMagField:
            dq_mag = UnitQuaternion.identity()
        q = dq_mag.multiply(q)
    return AttitudeState(q, sample.t)


class ImuLowPass:
    """First-order low-pass applied per channel; optional pre-filter stage."""

    def __init__(self, cutoff_hz: float):
        if cutoff_hz <= 0.0:
            raise ConfigError(f"cutoff must be positive, got {cutoff_hz}")
        self.rc = 1.0 / (2.0 * math.pi * cutoff_hz)
        self._y = None
        self._t = None

    def apply(self, sample: ImuSample) -> ImuSample:
        x = np.concatenate(
            [sample.gyro, sample.accel, sample.mag if sample.mag is not None else np.zeros(0)]
        )
        if self._y is None or len(self._y) != len(x):
            self._y = x.copy()
            self._t = sample.t
        else:
            dt = sample.t - self._t
            if dt <= 0.0:
                raise NonMonotonicTimestamp(f"sample t={sample.t} not after t={self._t}")
            alpha = dt / (self.rc + dt)
            self._y = self._y + alpha * (x - self._y)
            self._t = sample.t
        mag = self._y[6:9] if sample.mag is not None else None
        return ImuSample(sample.t, self._y[0:3], self._y[3:6], mag)


class AttitudeFilter:
    """Stateful wrapper: initializes from the first sample, then steps."""

    def __init__(self, cfg: AttitudeConfig = AttitudeConfig()):
        self.cfg = cfg
        self.state: Optional[AttitudeState] = None
        self._lp = ImuLowPass(cfg.lowpass_cutoff_hz) if cfg.lowpass_cutoff_hz else None

    def step(self, sample: ImuSample) -> AttitudeState:
        if self._lp is not None:
            sample = self._lp.apply(sample)
        if self.state is None:
            self.state = init_from_sample(sample, self.cfg)
        else:
            self.state = filter_step(self.state, sample, self.cfg)
        return self.state

    def run(self, samples: Iterable[ImuSample]) -> list[AttitudeState]:
        return [self.step(s) for s in samples]


# CSV interfaces -----------------------------------------------------------

_REQUIRED_COLS = ("t", "gx", "gy", "gz", "ax", "ay", "az")
_MAG_COLS = ("mx", "my", "mz")
_TRUTH_COLS = ("gt_roll", "gt_pitch", "gt_yaw")


def read_imu_csv(path) -> tuple[list[ImuSample], Optional[np.ndarray]]:
    """Parse an IMU log. Returns (samples, truth) where truth is an (N, 3)
    roll/pitch/yaw array when the optional ground-truth columns are present.

    Header must contain t,gx,gy,gz,ax,ay,az; mx,my,mz add the magnetometer.
    Raises ConfigError naming the missing column or the offending row.
    """
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise ConfigError(f"{path}: empty file")
        cols = [c.strip() for c in reader.fieldnames]
        for c in _REQUIRED_COLS:
            if c not in cols:
                raise ConfigError(f"{path}: missing required column '{c}'")
        has_mag = all(c in cols for c in _MAG_COLS)
        has_truth = all(c in cols for c in _TRUTH_COLS)
        samples: list[ImuSample] = []
        truth: list[list[float]] = []
        prev_t = None
        for i, row in enumerate(reader):
            try:
                t = float(row["t"])
                gyro = [float(row[c]) for c in ("gx", "gy", "gz")]
                accel = [float(row[c]) for c in ("ax", "ay", "az")]
                mag = [float(row[c]) for c in _MAG_COLS] if has_mag else None
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{path}: row {i + 2}: {e}") from e
            if prev_t is not None and t <= prev_t:
                raise ConfigError(f"{path}: row {i + 2}: t={t} not after {prev_t}")
            prev_t = t
            samples.append(ImuSample(t, gyro, accel, mag))
            if has_truth:
                truth.append([float(row[c]) for c in _TRUTH_COLS])
    return samples, (np.asarray(truth) if has_truth else None)


def write_attitude_csv(path, states: Sequence[AttitudeState]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "roll", "pitch", "yaw", "qw", "qx", "qy", "qz"])
        for s in states:
            e = s.q.to_euler()
            w.writerow(
                [
                    f"{s.t:.6f}",
                    f"{e.roll:.9f}",
                    f"{e.pitch:.9f}",
                    f"{e.yaw:.9f}",
                    f"{s.q.w:.9f}",
                    f"{s.q.x:.9f}",
                    f"{s.q.y:.9f}",
                    f"{s.q.z:.9f}",
                ]
            )


def write_imu_csv(path, samples: Sequence[ImuSample], truth: Optional[np.ndarray] = None) -> None:
    """Inverse of read_imu_csv, used to synthesize logs."""
    has_mag = samples and samples[0].mag is not None
    header = list(_REQUIRED_COLS) + (list(_MAG_COLS) if has_mag else [])
    if truth is not None:
        header += list(_TRUTH_COLS)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for i, s in enumerate(samples):
            row = [f"{s.t:.6f}"] + [f"{v:.9f}" for v in s.gyro] + [f"{v:.9f}" for v in s.accel]
            if has_mag:
                row += [f"{v:.9f}" for v in s.mag]
            if truth is not None:
                row += [f"{v:.9f}" for v in truth[i]]
            w.writerow(row)
