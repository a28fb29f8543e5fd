"""Ground-robot navigation: global A* on a costmap, DWA local planning,
and costmap maintenance from depth scans.

The walker is abstracted as a unicycle (v, omega); the gait layer consumes
the selected command. A Costmap wraps an occupancy grid with an inflated
cost field: occupied cells are lethal, cells within the footprint radius of
a lethal cell are inscribed-lethal, and cost decays linearly to zero across
the inflation skirt beyond that. Planner calls are pure given (state, map);
update_costmap returns a new snapshot so planners never see a half-written
field.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import AllTrajectoriesCollide, InvalidEndpoint, NoPath
from .geom import Pose6, wrap_angle
from .mapgraph import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, save_occupancy_pgm

LETHAL_COST = 254
INSCRIBED_COST = 253
MAX_DECAY_COST = 252

SQRT2 = math.sqrt(2.0)
# cell-cost weighting for A* edge costs; dyadic so path costs sum exactly
CELL_COST_WEIGHT = 1.0 / 256.0


@dataclass
class Costmap:
    """Cost field over an occupancy grid plus the radii that shaped it."""

    resolution: float
    origin: np.ndarray
    cost: np.ndarray  # uint8 [iy, ix], 0 free .. 252 decay, 253 inscribed, 254 lethal
    lethal_mask: np.ndarray  # bool [iy, ix], the uninflected obstacle cells
    dist_m: np.ndarray  # float [iy, ix], distance to nearest lethal cell
    footprint_radius: float = 0.25
    inflation_radius: float = 0.25

    @property
    def width(self) -> int:
        return self.cost.shape[1]

    @property
    def height(self) -> int:
        return self.cost.shape[0]

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return (
            int(math.floor((x - self.origin[0]) / self.resolution)),
            int(math.floor((y - self.origin[1]) / self.resolution)),
        )

    def cell_center(self, ix: int, iy: int) -> np.ndarray:
        return self.origin + (np.array([ix, iy]) + 0.5) * self.resolution

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def is_lethal(self, ix: int, iy: int) -> bool:
        return self.cost[iy, ix] >= INSCRIBED_COST

    def copy(self) -> "Costmap":
        return Costmap(
            self.resolution,
            self.origin.copy(),
            self.cost.copy(),
            self.lethal_mask.copy(),
            self.dist_m.copy(),
            self.footprint_radius,
            self.inflation_radius,
        )


def _inflate(lethal: np.ndarray, resolution: float, footprint: float, skirt: float):
    """Cost field and metric clearance from a boolean obstacle mask."""
    if lethal.any():
        dist = ndimage.distance_transform_edt(~lethal) * resolution
    else:
        dist = np.full(lethal.shape, np.inf)
    cost = np.zeros(lethal.shape, dtype=np.uint8)
    if skirt > 0:
        frac = np.clip((footprint + skirt - dist) / skirt, 0.0, 1.0)
        cost = (frac * MAX_DECAY_COST).astype(np.uint8)
    cost[dist <= footprint] = INSCRIBED_COST
    cost[lethal] = LETHAL_COST
    return cost, dist


def costmap_from_occupancy(
    grid: OccupancyGrid,
    footprint_radius: float = 0.25,
    inflation_radius: float = 0.25,
    unknown_is_lethal: bool = True,
) -> Costmap:
    lethal = grid.cells == OCCUPIED
    if unknown_is_lethal:
        lethal = lethal | (grid.cells == UNKNOWN)
    cost, dist = _inflate(lethal, grid.resolution, footprint_radius, inflation_radius)
    return Costmap(
        grid.resolution,
        np.asarray(grid.origin, dtype=float).copy(),
        cost,
        lethal,
        dist,
        footprint_radius,
        inflation_radius,
    )


def _bresenham(ix0: int, iy0: int, ix1: int, iy1: int) -> list:
    """Grid cells from (ix0, iy0) to (ix1, iy1) inclusive."""
    cells = []
    dx, dy = abs(ix1 - ix0), abs(iy1 - iy0)
    sx = 1 if ix1 >= ix0 else -1
    sy = 1 if iy1 >= iy0 else -1
    err = dx - dy
    x, y = ix0, iy0
    while True:
        cells.append((x, y))
        if x == ix1 and y == iy1:
            return cells
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy


def update_costmap(c: Costmap, scan_points: Sequence, robot_pose: Pose6) -> Costmap:
    """Fold a depth scan into the costmap.

    Cells along each ray before the hit are cleared (a dynamic obstacle can
    vanish); each hit cell becomes lethal; inflation is recomputed. Identical
    consecutive scans are a fixed point.
    """
    lethal = c.lethal_mask.copy()
    rx, ry = float(robot_pose.position[0]), float(robot_pose.position[1])
    cr = c.world_to_cell(rx, ry)
    for p in scan_points:
        hit = c.world_to_cell(float(p[0]), float(p[1]))
        ray = _bresenham(cr[0], cr[1], hit[0], hit[1])
        for ix, iy in ray[:-1]:
            if 0 <= ix < c.width and 0 <= iy < c.height:
                lethal[iy, ix] = False
        if 0 <= hit[0] < c.width and 0 <= hit[1] < c.height:
            lethal[hit[1], hit[0]] = True
    cost, dist = _inflate(lethal, c.resolution, c.footprint_radius, c.inflation_radius)
    return Costmap(
        c.resolution,
        c.origin.copy(),
        cost,
        lethal,
        dist,
        c.footprint_radius,
        c.inflation_radius,
    )


# --- A* global planner ---

# 8-connected moves; diagonals may not cut corners past a lethal cell
_MOVES = (
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT2),
    (1, -1, SQRT2),
    (-1, 1, SQRT2),
    (-1, -1, SQRT2),
)


def octile(a: tuple, b: tuple) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    lo, hi = (dx, dy) if dx < dy else (dy, dx)
    return (hi - lo) + SQRT2 * lo


def path_cost(c: Costmap, path: Sequence) -> float:
    """Cost of a cell path under the planner's metric.

    Evaluated in canonical form (straight steps + cell-cost sum as one dyadic
    term, diagonal count times sqrt(2) as the other) so any two paths of equal
    real cost produce bit-identical floats.
    """
    straights = 0
    diagonals = 0
    cell_sum = 0
    for (x0, y0), (x1, y1) in zip(path[:-1], path[1:]):
        if x0 != x1 and y0 != y1:
            diagonals += 1
        else:
            straights += 1
        cell_sum += int(c.cost[y1, x1])
    return (straights * 256 + cell_sum) / 256.0 + diagonals * SQRT2


def _check_endpoint(c: Costmap, cell: tuple, name: str) -> None:
    if not c.in_bounds(cell[0], cell[1]):
        raise InvalidEndpoint(f"{name} cell {cell} outside grid")
    if c.is_lethal(cell[0], cell[1]):
        raise InvalidEndpoint(f"{name} cell {cell} is lethal")


def astar(c: Costmap, start: tuple, goal: tuple) -> list:
    """8-connected A* with the octile heuristic; optimal for the path_cost
    metric (edges cost at least their geometric step, so octile never
    overestimates)."""
    start = (int(start[0]), int(start[1]))
    goal = (int(goal[0]), int(goal[1]))
    _check_endpoint(c, start, "start")
    _check_endpoint(c, goal, "goal")
    if start == goal:
        return [start]

    cost_field = c.cost
    g = {start: 0.0}
    parent = {start: None}
    closed = set()
    heap = [(octile(start, goal), 0, start)]
    tick = 0
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            path = []
            node = cur
            while node is not None:
                path.append(node)
                node = parent[node]
            path.reverse()
            return path
        closed.add(cur)
        cx, cy = cur
        for dx, dy, step in _MOVES:
            nx, ny = cx + dx, cy + dy
            if not (0 <= nx < c.width and 0 <= ny < c.height):
                continue
            if cost_field[ny, nx] >= INSCRIBED_COST:
                continue
            if dx != 0 and dy != 0:
                # corner cut: both orthogonal neighbours must be passable
                if cost_field[cy, nx] >= INSCRIBED_COST or cost_field[ny, cx] >= INSCRIBED_COST:
                    continue
            ng = g[cur] + step + cost_field[ny, nx] * CELL_COST_WEIGHT
            nxt = (nx, ny)
            if nxt in g and g[nxt] <= ng:
                continue
            g[nxt] = ng
            parent[nxt] = cur
            tick += 1
            heapq.heappush(heap, (ng + octile(nxt, goal), tick, nxt))
    raise NoPath(f"no path from {start} to {goal}")


def path_csv_lines(path: Sequence) -> list:
    lines = ["ix,iy"]
    lines.extend(f"{ix},{iy}" for ix, iy in path)
    return lines


def save_costmap_pgm(c: Costmap, path: str) -> None:
    """Dump the cost field in the occupancy graymap format (cost as gray)."""
    save_occupancy_pgm(path, OccupancyGrid(c.resolution, c.origin, c.cost))


# --- DWA local planner ---


@dataclass(frozen=True)
class VelocityCommand:
    v: float
    omega: float


@dataclass(frozen=True)
class UnicycleState:
    pose: Pose6
    v: float = 0.0
    omega: float = 0.0


@dataclass(frozen=True)
class DwaConfig:
    v_max: float = 0.4
    v_min: float = 0.0
    omega_max: float = 1.5
    accel: float = 0.5
    alpha: float = 3.0  # yaw acceleration bound
    period: float = 0.1  # control period; the window is accel * period wide
    horizon: float = 1.5
    horizon_dt: float = 0.1
    n_v: int = 11
    n_omega: int = 21
    lookahead: float = 0.8
    weight_heading: float = 0.6
    weight_clearance: float = 0.3
    weight_speed: float = 0.1
    # clearance saturates here; a loose cap makes the clearance term punish
    # every approach harder than the speed term rewards it, freezing the robot
    clearance_cap: float = 0.25


def _rollout(x: float, y: float, yaw: float, v: float, w: float, cfg: DwaConfig) -> np.ndarray:
    n = int(round(cfg.horizon / cfg.horizon_dt))
    pts = np.empty((n, 2))
    for i in range(n):
        x += v * math.cos(yaw) * cfg.horizon_dt
        y += v * math.sin(yaw) * cfg.horizon_dt
        yaw += w * cfg.horizon_dt
        pts[i] = (x, y)
    return pts


def _lookahead_point(path: Sequence, c: Costmap, position: np.ndarray, dist: float) -> np.ndarray:
    """First path point at least `dist` ahead of the nearest path point.

    Scanning forward from the nearest index keeps the carrot ahead; scanning
    from the path start would hand back cells already behind the robot.
    """
    centers = np.array([c.cell_center(ix, iy) for ix, iy in path])
    d = np.hypot(centers[:, 0] - position[0], centers[:, 1] - position[1])
    for i in range(int(np.argmin(d)), len(path)):
        if d[i] >= dist:
            return centers[i]
    return centers[-1]


def dwa_step(state: UnicycleState, global_path: Sequence, c: Costmap, cfg: DwaConfig = DwaConfig()) -> VelocityCommand:
    """One dynamic-window step toward the first path point past the lookahead.

    Candidates whose rollout touches an inscribed-or-worse cell (or leaves the
    map) are discarded; survivors score
    0.6 * heading + 0.3 * clearance + 0.1 * speed, ties to higher v then lower
    |omega|.
    """
    if len(global_path) == 0:
        raise ValueError("global path is empty")
    x, y = float(state.pose.position[0]), float(state.pose.position[1])
    yaw = state.pose.orientation.to_euler().yaw
    target = _lookahead_point(global_path, c, np.array([x, y]), cfg.lookahead)

    v_lo = max(cfg.v_min, state.v - cfg.accel * cfg.period)
    v_hi = min(cfg.v_max, state.v + cfg.accel * cfg.period)
    w_lo = max(-cfg.omega_max, state.omega - cfg.alpha * cfg.period)
    w_hi = min(cfg.omega_max, state.omega + cfg.alpha * cfg.period)
    v_samples = np.linspace(v_lo, v_hi, cfg.n_v)
    w_samples = np.linspace(w_lo, w_hi, cfg.n_omega)
    if w_lo <= 0.0 <= w_hi:
        # the zero-turn command belongs on the lattice exactly
        w_samples[np.argmin(np.abs(w_samples))] = 0.0

    best = None
    best_key = None
    for v in v_samples:
        for w in w_samples:
            pts = _rollout(x, y, yaw, float(v), float(w), cfg)
            ix = np.floor((pts[:, 0] - c.origin[0]) / c.resolution).astype(int)
            iy = np.floor((pts[:, 1] - c.origin[1]) / c.resolution).astype(int)
            if (ix < 0).any() or (ix >= c.width).any() or (iy < 0).any() or (iy >= c.height).any():
                continue
            if (c.cost[iy, ix] >= INSCRIBED_COST).any():
                continue
            clearance = float(c.dist_m[iy, ix].min())
            end = pts[-1]
            heading_err = abs(wrap_angle(math.atan2(target[1] - end[1], target[0] - end[0]) - (yaw + w * cfg.horizon)))
            score = (
                cfg.weight_heading * (1.0 - heading_err / math.pi)
                + cfg.weight_clearance * min(clearance / cfg.clearance_cap, 1.0)
                + cfg.weight_speed * (v / cfg.v_max if cfg.v_max > 0 else 0.0)
            )
            key = (score, v, -abs(w))
            if best_key is None or key > best_key:
                best_key = key
                best = VelocityCommand(float(v), float(w))
    if best is None:
        raise AllTrajectoriesCollide("every sampled rollout intersects an obstacle")
    return best
