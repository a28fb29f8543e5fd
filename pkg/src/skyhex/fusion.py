"""Error-state fusion of visual odometry and attitude measurements.

A 12-state extended Kalman filter over

    x = [x y z roll pitch yaw vx vy vz vroll vpitch vyaw]

with a constant-velocity process model. Each sensor carries a selection
mask naming the components it observes, and the measurement matrix is the
corresponding m x 12 row-selection matrix:

* visual odometry observes all 12 (pose directly; rates by finite
  differencing consecutive frames),
* the attitude estimator observes {roll, pitch, yaw} only.

Updates use the Joseph form so the covariance stays symmetric positive
semidefinite, and angle residuals are wrapped to (-pi, pi]. Because masked
updates leave untouched blocks of a diagonal covariance bit-identical, the
fast attitude stream can run at its own rate between odometry frames: the
fused output cadence is the union of input event times, which is how a
7 Hz odometry stream rides up to the 15 Hz attitude rate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyMask, NonPositiveDt, StaleMeasurement
from .geom import EulerRpy, Pose6, wrap_angle

STATE_DIM = 12
ANGLE_IDX = (3, 4, 5)

POS = slice(0, 3)
ANG = slice(3, 6)
VEL = slice(6, 9)
ANGVEL = slice(9, 12)

VO_MASK = tuple(range(12))
AE_MASK = (3, 4, 5)


@dataclass(frozen=True)
class FusionConfig:
    # process noise PSD per block (units^2 / s)
    q_pos: float = 0.01
    q_ang: float = 0.01
    q_vel: float = 0.01
    q_angvel: float = 0.01
    # default measurement variances
    vo_pos_var: float = 1e-4
    vo_ang_var: float = 1e-4
    vo_vel_var: float = 1e-2
    vo_angvel_var: float = 1e-2
    ae_var: float = 1e-4
    init_var: float = 1e-6


@dataclass
class FusionState:
    x: np.ndarray
    P: np.ndarray
    t: float

    def pose(self) -> Pose6:
        return Pose6(
            self.x[POS].copy(),
            EulerRpy(self.x[3], self.x[4], self.x[5]).to_quat(),
        )


@dataclass(frozen=True)
class Measurement:
    """Partial observation: values[i] observes state component mask[i]."""

    t: float
    mask: tuple
    values: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).reshape(-1))
        object.__setattr__(self, "var", np.asarray(self.var, dtype=float).reshape(-1))
        if len(self.mask) == 0:
            raise EmptyMask("measurement mask is empty")
        if len(self.values) != len(self.mask) or len(self.var) != len(self.mask):
            raise ValueError("mask, values, and var lengths differ")


@dataclass(frozen=True)
class VoEvent:
    """One visual-odometry frame: pose increment since the previous frame."""

    t: float
    rel: Pose6
    valid: bool = True


@dataclass(frozen=True)
class AeEvent:
    t: float
    rpy: np.ndarray
    var: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "rpy", np.asarray(self.rpy, dtype=float).reshape(3))


@dataclass(frozen=True)
class FusedSample:
    t: float
    x: np.ndarray
    cov_trace: float


def make_initial_state(pose: Pose6, cfg: FusionConfig = FusionConfig(), t: float = 0.0) -> FusionState:
    x = np.zeros(STATE_DIM)
    x[POS] = pose.position
    e = pose.orientation.to_euler()
    x[ANG] = (e.roll, e.pitch, e.yaw)
    return FusionState(x, np.eye(STATE_DIM) * cfg.init_var, t)


def _wrap_state_angles(x: np.ndarray) -> None:
    roll, pitch, yaw = x[3], x[4], x[5]
    pitch = wrap_angle(pitch)
    if pitch > 0.5 * math.pi:
        pitch = math.pi - pitch
        roll += math.pi
        yaw += math.pi
    elif pitch < -0.5 * math.pi:
        pitch = -math.pi - pitch
        roll += math.pi
        yaw += math.pi
    x[3] = wrap_angle(roll)
    x[4] = pitch
    x[5] = wrap_angle(yaw)


def ekf_predict(state: FusionState, dt: float, cfg: FusionConfig = FusionConfig()) -> FusionState:
    """Constant-velocity propagation by dt with additive noise Q * dt."""
    if dt <= 0.0:
        raise NonPositiveDt(f"dt={dt}")
    F = np.eye(STATE_DIM)
    for i in range(6):
        F[i, i + 6] = dt
    x = F @ state.x
    _wrap_state_angles(x)
    q = np.concatenate(
        [
            np.full(3, cfg.q_pos),
            np.full(3, cfg.q_ang),
            np.full(3, cfg.q_vel),
            np.full(3, cfg.q_angvel),
        ]
    )
    P = F @ state.P @ F.T + np.diag(q) * dt
    return FusionState(x, P, state.t + dt)


def ekf_update_partial(state: FusionState, meas: Measurement) -> FusionState:
    """Joseph-form update against the components named by meas.mask."""
    if meas.t < state.t - 1e-12:
        raise StaleMeasurement(f"measurement t={meas.t} before state t={state.t}")
    m = len(meas.mask)
    H = np.zeros((m, STATE_DIM))
    for r, idx in enumerate(meas.mask):
        H[r, idx] = 1.0
    R = np.diag(meas.var)
    r = meas.values - state.x[list(meas.mask)]
    for i, idx in enumerate(meas.mask):
        if idx in ANGLE_IDX:
            r[i] = wrap_angle(r[i])
    S = H @ state.P @ H.T + R
    K = state.P @ H.T @ np.linalg.inv(S)
    x = state.x + K @ r
    _wrap_state_angles(x)
    IKH = np.eye(STATE_DIM) - K @ H
    P = IKH @ state.P @ IKH.T + K @ R @ K.T
    P = 0.5 * (P + P.T)
    return FusionState(x, P, meas.t)


def vo_to_measurement(
    prev_abs: Pose6,
    cur_abs: Pose6,
    dt: float,
    t: float,
    cfg: FusionConfig = FusionConfig(),
) -> Measurement:
    """Full-state measurement from consecutive dead-reckoned odometry poses.

    Pose components come from the current frame; rate components are finite
    differences over dt (angle deltas wrapped before dividing).
    """
    if dt <= 0.0:
        raise NonPositiveDt(f"dt={dt}")
    cur_e = cur_abs.orientation.to_euler().as_array()
    prev_e = prev_abs.orientation.to_euler().as_array()
    dang = np.array([wrap_angle(a) for a in (cur_e - prev_e)])
    values = np.concatenate(
        [
            cur_abs.position,
            cur_e,
            (cur_abs.position - prev_abs.position) / dt,
            dang / dt,
        ]
    )
    var = np.concatenate(
        [
            np.full(3, cfg.vo_pos_var),
            np.full(3, cfg.vo_ang_var),
            np.full(3, cfg.vo_vel_var),
            np.full(3, cfg.vo_angvel_var),
        ]
    )
    return Measurement(t, VO_MASK, values, var)


def fuse_streams(
    vo_events: Sequence[VoEvent],
    ae_events: Sequence[AeEvent],
    initial: FusionState,
    cfg: FusionConfig = FusionConfig(),
) -> list[FusedSample]:
    """Merge both event streams in time order and run the filter.

    Events sharing a timestamp form one group (odometry applied before
    attitude) and emit one fused sample, so the output cadence is the union
    of distinct event times. Invalid odometry frames advance time but skip
    the update, leaving the covariance to grow through prediction.
    """
    tagged = [(e.t, 0, e) for e in vo_events] + [(e.t, 1, e) for e in ae_events]
    tagged.sort(key=lambda p: (p[0], p[1]))

    state = FusionState(initial.x.copy(), initial.P.copy(), initial.t)
    vo_abs = state.pose()
    vo_prev: Optional[tuple[float, Pose6]] = (state.t, vo_abs)

    out: list[FusedSample] = []
    i = 0
    n = len(tagged)
    while i < n:
        t = tagged[i][0]
        if t < state.t:
            raise StaleMeasurement(f"event t={t} before state t={state.t}")
        if t > state.t:
            state = ekf_predict(state, t - state.t, cfg)
        while i < n and tagged[i][0] == t:
            ev = tagged[i][2]
            if isinstance(ev, VoEvent):
                if ev.valid:
                    vo_abs = vo_abs.compose(ev.rel)
                    prev_t, prev_pose = vo_prev
                    dt_vo = t - prev_t
                    if dt_vo > 0.0:
                        state = ekf_update_partial(
                            state, vo_to_measurement(prev_pose, vo_abs, dt_vo, t, cfg)
                        )
                    vo_prev = (t, vo_abs)
            else:
                var = ev.var if ev.var is not None else np.full(3, cfg.ae_var)
                state = ekf_update_partial(state, Measurement(t, AE_MASK, ev.rpy, var))
            i += 1
        out.append(FusedSample(t, state.x.copy(), float(np.trace(state.P))))
    return out


def write_fused_csv(path, samples: Sequence[FusedSample]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "x", "y", "z", "roll", "pitch", "yaw", "cov_trace"])
        for s in samples:
            w.writerow(
                [f"{s.t:.6f}"]
                + [f"{v:.9f}" for v in s.x[:6]]
                + [f"{s.cov_trace:.9e}"]
            )
