import math

import numpy as np
import pytest

from skyhex.errors import EmptyMask, NonPositiveDt, StaleMeasurement
from skyhex.fusion import (
    AE_MASK,
    AeEvent,
    FusionConfig,
    FusionState,
    Measurement,
    VoEvent,
    ekf_predict,
    ekf_update_partial,
    fuse_streams,
    make_initial_state,
    vo_to_measurement,
    write_fused_csv,
)
from skyhex.geom import EulerRpy, Pose6, UnitQuaternion, wrap_angle


def _random_state(rng, p_diag=True):
    x = rng.normal(size=12)
    x[3:6] = rng.uniform(-1.0, 1.0, size=3)  # stay away from pitch flip
    if p_diag:
        P = np.diag(rng.uniform(0.1, 2.0, size=12))
    else:
        A = rng.normal(size=(12, 12))
        P = A @ A.T + 0.1 * np.eye(12)
    return FusionState(x, P, 0.0)


def test_predict_constant_velocity_kinematics():
    x = np.zeros(12)
    x[6:9] = [1.0, -2.0, 0.5]
    x[9:12] = [0.1, 0.0, -0.2]
    s = FusionState(x.copy(), np.eye(12), 0.0)
    s2 = ekf_predict(s, 0.5)
    assert np.allclose(s2.x[0:3], [0.5, -1.0, 0.25])
    assert np.allclose(s2.x[3:6], [0.05, 0.0, -0.1])
    assert np.allclose(s2.x[6:12], x[6:12])
    assert s2.t == 0.5


def test_predict_covariance_matches_hand_formula():
    # independent elementwise oracle for P' = F P F^T + Q dt with diagonal P
    rng = np.random.default_rng(7)
    p = rng.uniform(0.5, 2.0, size=12)
    s = FusionState(np.zeros(12), np.diag(p), 0.0)
    dt = 0.2
    cfg = FusionConfig(q_pos=0.03, q_ang=0.05, q_vel=0.07, q_angvel=0.11)
    s2 = ekf_predict(s, dt, cfg)
    q = [0.03] * 3 + [0.05] * 3 + [0.07] * 3 + [0.11] * 3
    for i in range(6):
        assert s2.P[i, i] == pytest.approx(p[i] + dt * dt * p[i + 6] + q[i] * dt)
        assert s2.P[i, i + 6] == pytest.approx(dt * p[i + 6])
    for i in range(6, 12):
        assert s2.P[i, i] == pytest.approx(p[i] + q[i] * dt)


def test_predict_rejects_nonpositive_dt():
    s = FusionState(np.zeros(12), np.eye(12), 0.0)
    with pytest.raises(NonPositiveDt):
        ekf_predict(s, 0.0)
    with pytest.raises(NonPositiveDt):
        ekf_predict(s, -0.1)


def test_single_component_update_matches_scalar_kalman():
    # with diagonal P a one-component mask reduces to the scalar filter
    rng = np.random.default_rng(11)
    for _ in range(50):
        s = _random_state(rng)
        idx = int(rng.integers(0, 12))
        z = float(rng.normal())
        r = float(rng.uniform(0.05, 1.0))
        s2 = ekf_update_partial(s, Measurement(0.0, (idx,), [z], [r]))
        p = s.P[idx, idx]
        k = p / (p + r)
        resid = z - s.x[idx]
        if idx in (3, 4, 5):
            resid = wrap_angle(resid)
        assert s2.x[idx] == pytest.approx(s.x[idx] + k * resid, abs=1e-12)
        assert s2.P[idx, idx] == pytest.approx((1 - k) ** 2 * p + k * k * r, abs=1e-12)


def test_masked_update_leaves_other_components_bit_identical():
    rng = np.random.default_rng(3)
    for _ in range(20):
        s = _random_state(rng, p_diag=True)
        z = rng.normal(size=3)
        s2 = ekf_update_partial(s, Measurement(0.0, AE_MASK, z, np.full(3, 0.01)))
        untouched = [i for i in range(12) if i not in AE_MASK]
        for i in untouched:
            assert s2.x[i] == s.x[i]  # exact
            assert s2.P[i, i] == s.P[i, i]


def test_update_wraps_angle_residual_across_seam():
    x = np.zeros(12)
    x[5] = math.pi - 0.01
    s = FusionState(x, np.eye(12) * 0.1, 0.0)
    z = -math.pi + 0.01  # 0.02 rad away across the seam
    s2 = ekf_update_partial(s, Measurement(0.0, (5,), [z], [1e-6]))
    # must step across the seam, not swing back through zero
    assert abs(wrap_angle(s2.x[5] - z)) < 5e-3
    assert abs(s2.x[5]) > 3.0


def test_update_never_increases_trace():
    rng = np.random.default_rng(19)
    for _ in range(50):
        s = _random_state(rng, p_diag=False)
        m = int(rng.integers(1, 13))
        mask = tuple(sorted(rng.choice(12, size=m, replace=False).tolist()))
        z = rng.normal(size=m)
        var = rng.uniform(0.01, 1.0, size=m)
        s2 = ekf_update_partial(s, Measurement(0.0, mask, z, var))
        assert np.trace(s2.P) <= np.trace(s.P) + 1e-9
        assert np.allclose(s2.P, s2.P.T)


def test_update_rejects_empty_mask_and_stale_time():
    s = FusionState(np.zeros(12), np.eye(12), 5.0)
    with pytest.raises(EmptyMask):
        Measurement(5.0, (), [], [])
    with pytest.raises(StaleMeasurement):
        ekf_update_partial(s, Measurement(4.0, (0,), [1.0], [0.1]))


def test_vo_measurement_finite_difference_rates():
    prev = Pose6(np.array([0.0, 0.0, 0.0]), EulerRpy(0.0, 0.0, 0.1).to_quat())
    cur = Pose6(np.array([0.2, -0.1, 0.05]), EulerRpy(0.0, 0.0, 0.3).to_quat())
    m = vo_to_measurement(prev, cur, 0.5, t=1.0)
    assert m.mask == tuple(range(12))
    assert np.allclose(m.values[0:3], [0.2, -0.1, 0.05])
    assert m.values[5] == pytest.approx(0.3)
    assert np.allclose(m.values[6:9], [0.4, -0.2, 0.1])
    assert m.values[11] == pytest.approx(0.4)


def test_vo_rate_wraps_across_seam():
    prev = Pose6(np.zeros(3), EulerRpy(0.0, 0.0, math.pi - 0.05).to_quat())
    cur = Pose6(np.zeros(3), EulerRpy(0.0, 0.0, -math.pi + 0.05).to_quat())
    m = vo_to_measurement(prev, cur, 0.1, t=1.0)
    assert m.values[11] == pytest.approx(1.0, abs=1e-9)


def _snapped_vo_times(duration=10.0, vo_hz=7, ae_hz=15):
    n = int(round(duration * vo_hz))
    return [round(j * ae_hz / vo_hz) / ae_hz for j in range(1, n + 1)]


def test_fused_cadence_rides_attitude_rate():
    # 7 Hz odometry snapped onto the 15 Hz attitude grid over 10 s:
    # 150 distinct event times, 70 of them carrying an odometry frame
    vo_times = _snapped_vo_times()
    ae_times = [k / 15 for k in range(1, 151)]
    vo = [VoEvent(t, Pose6.identity()) for t in vo_times]
    ae = [AeEvent(t, np.zeros(3)) for t in ae_times]
    init = make_initial_state(Pose6.identity())
    out = fuse_streams(vo, ae, init)
    assert len(out) == 150
    assert len(vo) == 70
    assert set(vo_times) <= set(ae_times)
    out_vo_only = fuse_streams(vo, [], init)
    assert len(out_vo_only) == 70


def test_fuse_streams_monotone_and_single_sample_per_time():
    vo = [VoEvent(0.2, Pose6.identity()), VoEvent(0.4, Pose6.identity())]
    ae = [AeEvent(0.2, np.zeros(3)), AeEvent(0.3, np.zeros(3))]
    out = fuse_streams(vo, ae, make_initial_state(Pose6.identity()))
    assert [s.t for s in out] == [0.2, 0.3, 0.4]


def test_invalid_vo_frames_grow_covariance_until_next_fix():
    times = [0.1 * k for k in range(1, 21)]
    vo = []
    pose = Pose6.identity()
    step = Pose6(np.array([0.05, 0.0, 0.0]), UnitQuaternion.identity())
    for t in times:
        valid = not (0.95 < t < 1.55)  # frames 10..15 dropped
        vo.append(VoEvent(t, step, valid))
    out = fuse_streams(vo, [], make_initial_state(pose))
    tr = {round(s.t, 3): s.cov_trace for s in out}
    assert tr[1.5] > tr[0.9] * 3.0  # grows through the outage
    assert tr[1.6] < tr[1.5]  # first valid frame pulls it back down


def test_fused_attitude_beats_dead_reckoned_odometry():
    # odometry attitude drifts as a random walk; the attitude stream is
    # unbiased, so fusion should track truth much more closely
    duration = 10.0
    yaw_rate = 0.1
    vo_times = _snapped_vo_times(duration)
    ae_times = [k / 15 for k in range(1, 151)]
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        vo = []
        prev_t = 0.0
        for t in vo_times:
            dt = t - prev_t
            rel_rot = EulerRpy(0.0, 0.0, yaw_rate * dt).to_quat()
            noise = UnitQuaternion.from_rotvec(rng.normal(0.0, 0.01, size=3))
            vo.append(VoEvent(t, Pose6(np.zeros(3), rel_rot.multiply(noise))))
            prev_t = t
        ae = [
            AeEvent(t, np.array([0.0, 0.0, yaw_rate * t]) + rng.normal(0.0, 0.02, size=3))
            for t in ae_times
        ]
        init = make_initial_state(Pose6.identity())
        fused = {s.t: s for s in fuse_streams(vo, ae, init)}
        vo_only = {s.t: s for s in fuse_streams(vo, [], init)}

        def rmse(samples):
            errs = [wrap_angle(s.x[5] - yaw_rate * t) for t, s in samples.items()]
            return math.sqrt(np.mean(np.square(errs)))

        if rmse(fused) < rmse(vo_only):
            wins += 1
    assert wins >= 9


def test_fused_csv_schema(tmp_path):
    out = fuse_streams(
        [VoEvent(0.5, Pose6.identity())],
        [AeEvent(0.25, np.zeros(3))],
        make_initial_state(Pose6.identity()),
    )
    path = tmp_path / "fused.csv"
    write_fused_csv(path, out)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,x,y,z,roll,pitch,yaw,cov_trace"
    assert len(lines) == 3
