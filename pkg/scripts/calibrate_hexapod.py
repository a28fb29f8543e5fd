"""Calibrate and verify the hexapod load-model constants.

Two constants are frozen in skyhex.hexapod from this script's sweep:

  DEFAULT_STANCE_RADIUS  foot distance from the mount in the default stance
  COMPARTMENT_X          payload compartment x offset from the body center

The tripod screening torque pins the usable femur lever to a narrow band
(torque = W/3 * (radius - coxa) must land in [1.005, 1.125] N*m at 3.51 kg),
and within that band the amble capacity must land near 0.2 kg so that a
0.15 kg payload passes and a 0.25 kg payload fails.  The sweep below walks
the feasible rectangle and prints the margin of every constraint at the
frozen values; exit status is nonzero if any band is violated, so the script
doubles as a calibration regression check.

Run:  python3 scripts/calibrate_hexapod.py
"""

import sys

import numpy as np

from skyhex.hexapod import (
    COMPARTMENT_X,
    DEFAULT_BODY_MASS,
    DEFAULT_STANCE_RADIUS,
    GAITS,
    LegGeometry,
    STALL_TORQUE,
    default_stance,
    joint_torque_estimate,
    max_payload,
    static_stability,
    stance_legs,
)

SCREEN_BAND = (1.005, 1.125)
DELTA_BAND = (0.15, 0.25)
GATE_PASS = 0.15
GATE_FAIL = 0.25


def screen_torque(geom, radius):
    feet = default_stance(geom, stance_radius=radius)
    tri = {n: feet[n] for n in ("L1", "R2", "L3")}
    return max(joint_torque_estimate(geom, tri, DEFAULT_BODY_MASS).values())


def capacities(geom, radius, xc):
    return {
        g: max_payload(geom, GAITS[g], stance_radius=radius, compartment_x=xc)
        for g in ("tripod", "ripple", "amble", "wave")
    }


def sweep(geom):
    print("stance radius sweep (screen band %.3f..%.3f):" % SCREEN_BAND)
    for r in np.arange(0.1390, 0.1431, 0.0005):
        s = screen_torque(geom, r)
        mark = " <- in band" if SCREEN_BAND[0] <= s <= SCREEN_BAND[1] else ""
        print("  r=%.4f  screen=%.4f%s" % (r, s, mark))
    print("compartment sweep at r=%.4f (amble target %.2f..%.2f):"
          % (DEFAULT_STANCE_RADIUS, GATE_PASS, GATE_FAIL))
    for xc in np.arange(-0.005, -0.081, -0.005):
        caps = capacities(geom, DEFAULT_STANCE_RADIUS, xc)
        print("  xc=%+.3f  amble=%.4f  wave=%.4f  tripod=%.4f"
              % (xc, caps["amble"], caps["wave"], caps["tripod"]))


def verify(geom):
    failures = []
    s = screen_torque(geom, DEFAULT_STANCE_RADIUS)
    margin = (1.0 - s / STALL_TORQUE) * 100.0
    print("frozen: radius=%.4f m  compartment_x=%+.3f m"
          % (DEFAULT_STANCE_RADIUS, COMPARTMENT_X))
    print("tripod screening torque %.4f N*m (stall margin %.1f%%)" % (s, margin))
    if not SCREEN_BAND[0] <= s <= SCREEN_BAND[1]:
        failures.append("screening torque outside %s" % (SCREEN_BAND,))

    caps = capacities(geom, DEFAULT_STANCE_RADIUS, COMPARTMENT_X)
    print("capacities: " + "  ".join("%s=%.4f" % kv for kv in caps.items()))
    delta = caps["amble"] - caps["tripod"]
    print("amble - tripod = %.4f kg" % delta)
    if not DELTA_BAND[0] <= delta <= DELTA_BAND[1]:
        failures.append("payload delta outside %s" % (DELTA_BAND,))
    if not caps["wave"] >= caps["ripple"] >= caps["tripod"]:
        failures.append("capacity ordering violated")
    if not caps["amble"] >= GATE_PASS:
        failures.append("amble gate: %.2f kg payload would fail" % GATE_PASS)
    if caps["amble"] >= GATE_FAIL:
        failures.append("amble gate: %.2f kg payload would pass" % GATE_FAIL)

    feet = default_stance(geom)
    for g, spec in GAITS.items():
        worst = min(
            static_stability([feet[n] for n in stance_legs(spec, t)], np.zeros(2))
            for t in np.linspace(0.0, 1.0, 481)
        )
        print("%-7s min stability margin %.4f m" % (g, worst))
        if worst < 0.0:
            failures.append("%s stance margin negative" % g)
    return failures


def main():
    geom = LegGeometry()
    sweep(geom)
    failures = verify(geom)
    if failures:
        for f in failures:
            print("FAIL: " + f)
        return 1
    print("calibration OK")
    return 0


if __name__ == "__main__":
    sys.exit(main())
