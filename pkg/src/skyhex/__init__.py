"""Aerial-mapping-to-ground-robot mission toolkit.

Subsystems: rotation/pose primitives (geom), IMU attitude filtering
(attitude), visual-inertial state fusion (fusion), synthetic worlds and
sensors (worldsim), landmark pose-graph mapping (mapgraph), victim marking
(victims), grid/velocity-space navigation (nav), hexapod kinematics and
gaits (hexapod), discrete-event messaging (comms), and end-to-end mission
orchestration (mission) with a command-line front end (cli).
"""

__version__ = "0.1.0"
