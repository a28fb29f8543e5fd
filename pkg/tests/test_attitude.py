import math

import numpy as np
import pytest

from skyhex.attitude import (
    AttitudeConfig,
    AttitudeFilter,
    AttitudeState,
    ImuLowPass,
    ImuSample,
    accel_correction,
    filter_step,
    init_from_sample,
    mag_correction,
    predict_from_gyro,
    read_imu_csv,
    write_imu_csv,
)
from skyhex.errors import (
    ConfigError,
    DegenerateMagField,
    NonMonotonicTimestamp,
    NonPositiveDt,
    ZeroAccelVector,
)
from skyhex.geom import EulerRpy, UnitQuaternion

G = 9.81


def _static_sample(t, q, mag=True, g=G):
    """Noiseless IMU reading for a static body with attitude q."""
    accel = q.conjugate().rotate([0.0, 0.0, g])
    m = q.conjugate().rotate([1.0, 0.0, 0.0]) if mag else None
    return ImuSample(t, np.zeros(3), accel, m)


def test_predict_constant_rate_yaw():
    st = AttitudeState(UnitQuaternion.identity(), 0.0)
    q = st.q
    for _ in range(100):
        q = predict_from_gyro(AttitudeState(q, 0.0), [0, 0, math.radians(90)], 0.01)
    assert abs(q.to_euler().yaw - math.radians(90)) < 1e-9


def test_predict_rejects_bad_dt():
    st = AttitudeState(UnitQuaternion.identity(), 0.0)
    with pytest.raises(NonPositiveDt):
        predict_from_gyro(st, [0, 0, 1], 0.0)
    with pytest.raises(NonPositiveDt):
        predict_from_gyro(st, [0, 0, 1], -0.01)


def test_accel_full_gain_removes_tilt():
    q_true = EulerRpy(0.1, -0.2, 0.7).to_quat()
    q_pred = q_true.multiply(EulerRpy(math.radians(5), 0, 0).to_quat())
    accel = q_true.conjugate().rotate([0, 0, G])
    dq = accel_correction(q_pred, accel, 1.0)
    q1 = dq.multiply(q_pred)
    e = q1.to_euler()
    assert abs(e.roll - 0.1) < 1e-6
    assert abs(e.pitch + 0.2) < 1e-6


def test_accel_delta_has_zero_z_generator():
    rng = np.random.default_rng(11)
    for _ in range(500):
        q = UnitQuaternion(*rng.normal(size=4))
        a = rng.normal(size=3) * 3 + [0, 0, 5]
        if np.linalg.norm(a) < 1e-6:
            continue
        dq = accel_correction(q, a, rng.uniform(0.1, 1.0))
        assert dq.z == 0.0


def test_accel_adaptive_gain():
    q_true = UnitQuaternion.identity()
    q_pred = EulerRpy(math.radians(4), 0, 0).to_quat()
    down_body = q_true.conjugate().rotate([0, 0, 1.0])
    # magnitude error 100% -> fully rejected
    dq = accel_correction(q_pred, down_body * 2 * G, 1.0)
    assert dq.w == 1.0 and dq.x == 0.0 and dq.y == 0.0 and dq.z == 0.0
    # magnitude error 15% -> half weight, delta angle halves
    full = accel_correction(q_pred, down_body * G, 1.0)
    half = accel_correction(q_pred, down_body * 1.15 * G, 1.0)
    a_full = 2 * math.atan2(math.hypot(full.x, full.y), full.w)
    a_half = 2 * math.atan2(math.hypot(half.x, half.y), half.w)
    assert abs(a_half - 0.5 * a_full) < 1e-6
    # inside the dead band -> full weight
    same = accel_correction(q_pred, down_body * 1.05 * G, 1.0)
    assert same.angle_to(full) < 1e-12


def test_accel_zero_vector_raises():
    with pytest.raises(ZeroAccelVector):
        accel_correction(UnitQuaternion.identity(), [0, 0, 0], 1.0)


def test_mag_delta_exact_form_and_yaw_isolation():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        q = UnitQuaternion(*rng.normal(size=4))
        m = rng.normal(size=3)
        try:
            dq = mag_correction(q, m, rng.uniform(0.1, 1.0))
        except DegenerateMagField:
            continue
        assert dq.x == 0.0 and dq.y == 0.0
        before = q.to_euler()
        after = dq.multiply(q).to_euler()
        assert abs(after.roll - before.roll) < 1e-12
        assert abs(after.pitch - before.pitch) < 1e-12


def test_mag_full_gain_aligns_north():
    q = EulerRpy(0.2, -0.1, 0.9).to_quat()
    m_body = q.conjugate().rotate([1.0, 0.0, 0.0])
    dq = mag_correction(q, m_body, 1.0)
    h = dq.multiply(q).rotate(m_body)
    assert abs(h[1]) < 1e-12 and h[0] > 0


def test_mag_degenerate_field():
    with pytest.raises(DegenerateMagField):
        mag_correction(UnitQuaternion.identity(), [0, 0, 1.0], 1.0)
    with pytest.raises(DegenerateMagField):
        mag_correction(UnitQuaternion.identity(), [0, 0, 0], 1.0)


def test_init_recovers_static_attitude():
    q = EulerRpy(0.3, -0.4, 1.3).to_quat()
    st = init_from_sample(_static_sample(0.0, q))
    assert st.q.angle_to(q) < 1e-9


def test_filter_converges_stationary_noiseless():
    q = EulerRpy(0.25, 0.15, -2.0).to_quat()
    f = AttitudeFilter(AttitudeConfig(gain_acc=0.5, gain_mag=0.5))
    states = f.run([_static_sample(i * 0.01, q) for i in range(101)])
    assert states[-1].q.angle_to(q) < 1e-6


def test_filter_recovers_from_wrong_state():
    q = UnitQuaternion.identity()
    cfg = AttitudeConfig(gain_acc=0.2, gain_mag=0.2)
    st = AttitudeState(EulerRpy(0.3, -0.2, 0.5).to_quat(), 0.0)
    for i in range(1, 401):
        st = filter_step(st, _static_sample(i * 0.01, q), cfg)
    assert st.q.angle_to(q) < 1e-3


def test_zero_gains_equal_pure_gyro():
    rng = np.random.default_rng(13)
    cfg = AttitudeConfig(gain_acc=0.0, gain_mag=0.0)
    st = AttitudeState(UnitQuaternion.identity(), 0.0)
    q_chain = st.q
    for i in range(1, 200):
        gyro = rng.normal(size=3)
        accel = rng.normal(size=3) + [0, 0, G]
        s = ImuSample(i * 0.01, gyro, accel, rng.normal(size=3))
        q_chain = predict_from_gyro(AttitudeState(q_chain, 0.0), gyro, 0.01)
        st = filter_step(st, s, cfg)
        assert st.q.angle_to(q_chain) < 1e-12


def test_no_mag_roll_pitch_hold_yaw_drifts():
    q = UnitQuaternion.identity()
    bias = np.array([0.01, 0.01, 0.01])
    st = None
    f = AttitudeFilter(AttitudeConfig())
    for i in range(1001):
        s = _static_sample(i * 0.01, q, mag=False)
        st = f.step(ImuSample(s.t, s.gyro + bias, s.accel, None))
    e = st.q.to_euler()
    assert abs(e.roll) < math.radians(1.0)
    assert abs(e.pitch) < math.radians(1.0)
    assert abs(e.yaw) > math.radians(3.0)  # unconstrained axis integrates bias


def test_filter_step_rejects_non_monotonic():
    st = AttitudeState(UnitQuaternion.identity(), 1.0)
    with pytest.raises(NonMonotonicTimestamp):
        filter_step(st, _static_sample(1.0, UnitQuaternion.identity()))


def test_static_noisy_stream_accuracy():
    rng = np.random.default_rng(14)
    q = EulerRpy(0.1, -0.05, 0.8).to_quat()
    f = AttitudeFilter(AttitudeConfig())
    st = None
    for i in range(1000):
        s = _static_sample(i * 0.01, q)
        st = f.step(
            ImuSample(
                s.t,
                s.gyro + rng.normal(0, 0.02, 3),
                s.accel + rng.normal(0, 0.1, 3),
                s.mag + rng.normal(0, 0.02, 3),
            )
        )
    e = st.q.to_euler()
    t = q.to_euler()
    assert abs(e.roll - t.roll) < math.radians(1.0)
    assert abs(e.pitch - t.pitch) < math.radians(1.0)
    assert abs(e.yaw - t.yaw) < math.radians(3.0)


def test_lowpass_dc_and_smoothing():
    lp = ImuLowPass(5.0)
    out = None
    for i in range(2000):
        out = lp.apply(ImuSample(i * 0.01, [1.0, 0, 0], [0, 0, G], [1, 0, 0]))
    assert abs(out.gyro[0] - 1.0) < 1e-3  # DC gain 1
    lp2 = ImuLowPass(5.0)
    lp2.apply(ImuSample(0.0, [0, 0, 0], [0, 0, G], None))
    stepped = lp2.apply(ImuSample(0.01, [1.0, 0, 0], [0, 0, G], None))
    assert 0.0 < stepped.gyro[0] < 1.0  # smoothed, not passed through


def test_imu_csv_round_trip(tmp_path):
    rng = np.random.default_rng(15)
    samples = [
        ImuSample(i * 0.01, rng.normal(size=3), rng.normal(size=3) + [0, 0, G], rng.normal(size=3))
        for i in range(50)
    ]
    truth = rng.normal(size=(50, 3))
    p = tmp_path / "imu.csv"
    write_imu_csv(p, samples, truth)
    got, gt = read_imu_csv(p)
    assert len(got) == 50 and gt.shape == (50, 3)
    assert np.allclose(got[7].gyro, samples[7].gyro, atol=1e-8)
    assert np.allclose(gt, truth, atol=1e-8)


def test_imu_csv_missing_column_named(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,gx,gy,gz,ax,ay\n0,0,0,0,0,0\n")
    with pytest.raises(ConfigError, match="az"):
        read_imu_csv(p)


def test_imu_csv_non_monotonic_row_named(tmp_path):
    p = tmp_path / "bad2.csv"
    p.write_text("t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,9.81\n0,0,0,0,0,0,9.81\n")
    with pytest.raises(ConfigError, match="row 3"):
        read_imu_csv(p)


def test_imu_csv_without_mag_runs():
    samples = [_static_sample(i * 0.01, UnitQuaternion.identity(), mag=False) for i in range(20)]
    f = AttitudeFilter(AttitudeConfig())
    states = f.run(samples)
    assert len(states) == 20
