"""Feature-based keyframe map graph.

Keyframes store an estimated pose plus the set of landmark ids seen from
it (the signature) and their body-frame positions. Edges carry relative
poses: consecutive keyframes get odometry edges; revisits detected by
signature similarity get loop-closure edges whose relative pose comes from
rigid alignment of the shared landmarks. A damped Gauss-Newton pass over

    sum_ij || log( That_ij^-1 * (T_i^-1 T_j) ) ||^2_Lambda

with keyframe 0 pinned removes accumulated drift. Insertion is gated by
odometry validity: while the gate is PAUSED nothing enters the graph.

Localization is the read-only inverse: match a query's landmark ids
against keyframe signatures, then rigidly align the query's body-frame
points to the map's landmark estimates. Because alignment works on 3D
structure rather than appearance, a ground-level query can localize in a
map built from above.

The 2D occupancy projection rasterizes landmark estimates inside a height
band as occupied and marks cells near keyframe ground tracks as free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import (
    DegenerateConfiguration,
    DisconnectedGraph,
    InsufficientCorrespondences,
    LocalizationFailed,
)
from .geom import (
    Pose6,
    UnitQuaternion,
    normalize_arr,
    quat_conj_arr,
    quat_exp_arr,
    quat_log_arr,
    quat_mul_arr,
    quat_rotate_arr,
)
from .victims import VictimMark, mark_from_csv_fields, marks_csv_lines

ACTIVE = "ACTIVE"
PAUSED = "PAUSED"

ODOMETRY = "odometry"
LOOP_CLOSURE = "loop-closure"

OCCUPIED = 0
UNKNOWN = 127
FREE = 254

_DEFAULT_INFO = np.diag([2500.0, 2500.0, 2500.0, 10000.0, 10000.0, 10000.0])


@dataclass(frozen=True)
class Keyframe:
    id: int
    pose: Pose6
    signature: frozenset
    observations: tuple
    t: float

    def __post_init__(self):
        obs_ids = [lid for lid, _ in self.observations]
        if len(obs_ids) != len(set(obs_ids)):
            raise ValueError("duplicate landmark ids in one keyframe")
        if self.observations and self.signature != frozenset(obs_ids):
            raise ValueError("signature does not match observation ids")


@dataclass(frozen=True)
class GraphEdge:
    from_id: int
    to_id: int
    kind: str
    rel: Pose6
    information: np.ndarray = field(default_factory=lambda: _DEFAULT_INFO.copy())

    def __post_init__(self):
        if self.from_id == self.to_id:
            raise ValueError("self edge")
        info = np.asarray(self.information, dtype=float).reshape(6, 6)
        if not np.allclose(info, info.T):
            raise ValueError("information matrix must be symmetric")
        object.__setattr__(self, "information", info)


@dataclass(frozen=True)
class KeyframeThresholds:
    translation: float = 0.3
    rotation_deg: float = 15.0


@dataclass(frozen=True)
class LoopConfig:
    tau_sim: float = 0.3
    exclude_recent: int = 5
    min_correspondences: int = 3


@dataclass(frozen=True)
class OptimizeConfig:
    max_iters: int = 50
    damping: float = 1e-4
    tol: float = 1e-9


class MapGraph:
    """Single-writer container; finalized graphs are treated as read-only."""

    def __init__(self):
        self.keyframes: list[Keyframe] = []
        self.edges: list[GraphEdge] = []
        self.state: str = ACTIVE
        self.gate_events: list[tuple[float, str]] = []
        self.insert_events: list[tuple[float, int]] = []
        self.finalized: bool = False
        self._lm_sum: dict[int, np.ndarray] = {}
        self._lm_count: dict[int, int] = {}

    def landmark_estimates(self) -> dict:
        return {lid: self._lm_sum[lid] / self._lm_count[lid] for lid in self._lm_sum}

    def finalize(self) -> None:
        self.finalized = True

    def poses(self) -> list[Pose6]:
        return [kf.pose for kf in self.keyframes]


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def mapping_gate(g: MapGraph, valid: bool, t: float) -> str:
    """PAUSED while odometry is lost; transitions are logged with times."""
    new = ACTIVE if valid else PAUSED
    if new != g.state:
        g.state = new
        g.gate_events.append((t, new))
    return g.state


def maybe_add_keyframe(
    g: MapGraph,
    pose: Pose6,
    obs: Sequence[tuple],
    t: float,
    thresholds: KeyframeThresholds = KeyframeThresholds(),
) -> Optional[Keyframe]:
    """Insert a keyframe when ACTIVE and moved enough since the last one."""
    if g.state != ACTIVE:
        return None
    if g.keyframes:
        # tiny slack so thresholds survive float cancellation (1.2 - 0.9 < 0.3)
        last = g.keyframes[-1]
        moved = last.pose.translation_to(pose) >= thresholds.translation - 1e-9
        turned = last.pose.rotation_to(pose) >= math.radians(thresholds.rotation_deg) - 1e-9
        if not (moved or turned):
            return None
    obs = tuple((int(lid), np.asarray(p, dtype=float).reshape(3)) for lid, p in obs)
    kf = Keyframe(
        id=len(g.keyframes),
        pose=pose,
        signature=frozenset(lid for lid, _ in obs),
        observations=obs,
        t=t,
    )
    if g.keyframes:
        prev = g.keyframes[-1]
        g.edges.append(GraphEdge(prev.id, kf.id, ODOMETRY, pose.relative_to(prev.pose)))
    g.keyframes.append(kf)
    g.insert_events.append((t, kf.id))
    for lid, body in obs:
        p_global = pose.transform(body)
        if lid in g._lm_sum:
            g._lm_sum[lid] = g._lm_sum[lid] + p_global
            g._lm_count[lid] += 1
        else:
            g._lm_sum[lid] = p_global.copy()
            g._lm_count[lid] = 1
    return kf


def rigid_align(pairs: Sequence[tuple]) -> Pose6:
    """Least-squares rigid T with T * a_i ~ b_i (centroid + SVD rotation)."""
    if len(pairs) < 3:
        raise DegenerateConfiguration(f"need >= 3 pairs, got {len(pairs)}")
    A = np.asarray([p[0] for p in pairs], dtype=float)
    B = np.asarray([p[1] for p in pairs], dtype=float)
    ca = A.mean(axis=0)
    cb = B.mean(axis=0)
    A0 = A - ca
    B0 = B - cb
    H = A0.T @ B0
    # coincident or collinear point sets leave the rotation unconstrained
    spread = np.linalg.svd(A0, compute_uv=False)
    if spread[1] < max(1e-9, 1e-6 * spread[0]):
        raise DegenerateConfiguration("pairs are collinear or coincident")
    U, _, Vt = np.linalg.svd(H)
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ D @ U.T
    q = UnitQuaternion.from_matrix(R)
    return Pose6(cb - R @ ca, q)


def _common_pairs(query_obs: Sequence[tuple], other_obs: Sequence[tuple]) -> list[tuple]:
    other = {lid: p for lid, p in other_obs}
    return [(p, other[lid]) for lid, p in query_obs if lid in other]


def detect_loop_closure(
    g: MapGraph,
    query: Keyframe,
    cfg: LoopConfig = LoopConfig(),
) -> Optional[GraphEdge]:
    """Best signature match outside the recent window, if similar enough.

    The edge's relative pose maps the query's body frame into the matched
    keyframe's body frame, recovered from the shared landmarks.
    """
    candidates = [kf for kf in g.keyframes if kf.id < query.id - cfg.exclude_recent]
    if not candidates:
        return None
    best = max(candidates, key=lambda kf: (jaccard(query.signature, kf.signature), -kf.id))
    sim = jaccard(query.signature, best.signature)
    if sim < cfg.tau_sim:
        return None
    pairs = _common_pairs(query.observations, best.observations)
    if len(pairs) < cfg.min_correspondences:
        raise InsufficientCorrespondences(
            f"similarity {sim:.3f} accepted but only {len(pairs)} shared landmarks"
        )
    rel = rigid_align(pairs)
    return GraphEdge(best.id, query.id, LOOP_CLOSURE, rel)


def localize(g: MapGraph, obs: Sequence[tuple], tau_loc: float = 0.2) -> Pose6:
    """Global pose from body-frame landmark sightings; never mutates g."""
    obs = [(int(lid), np.asarray(p, dtype=float).reshape(3)) for lid, p in obs]
    sig = frozenset(lid for lid, _ in obs)
    if not g.keyframes:
        raise LocalizationFailed("empty graph")
    best = max(g.keyframes, key=lambda kf: (jaccard(sig, kf.signature), -kf.id))
    sim = jaccard(sig, best.signature)
    if sim < tau_loc:
        raise LocalizationFailed(f"best signature similarity {sim:.3f} below {tau_loc}")
    estimates = g.landmark_estimates()
    shared = [lid for lid in sig & best.signature if lid in estimates]
    if len(shared) < 3:
        raise LocalizationFailed(f"only {len(shared)} usable correspondences")
    body = {lid: p for lid, p in obs}
    pairs = [(body[lid], estimates[lid]) for lid in sorted(shared)]
    try:
        return rigid_align(pairs)
    except DegenerateConfiguration as exc:
        raise LocalizationFailed(str(exc)) from exc


# ---------------------------------------------------------------------------
# pose-graph optimization


def _check_connected(g: MapGraph) -> None:
    n = len(g.keyframes)
    if n <= 1:
        return
    adj = [[] for _ in range(n)]
    for e in g.edges:
        adj[e.from_id].append(e.to_id)
        adj[e.to_id].append(e.from_id)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != n:
        raise DisconnectedGraph(f"{n - len(seen)} keyframes unreachable from keyframe 0")


def _color_nodes(n: int, edges: Sequence[GraphEdge]) -> np.ndarray:
    """Greedy coloring so no edge joins two same-colored nodes."""
    adj = [set() for _ in range(n)]
    for e in edges:
        adj[e.from_id].add(e.to_id)
        adj[e.to_id].add(e.from_id)
    colors = np.full(n, -1, dtype=int)
    for u in range(n):
        used = {colors[v] for v in adj[u] if colors[v] >= 0}
        c = 0
        while c in used:
            c += 1
        colors[u] = c
    return colors


def _vinv_apply(omega: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply the inverse left Jacobian of SO(3) rowwise: rho = V(w)^-1 v."""
    theta2 = np.einsum("ij,ij->i", omega, omega)
    theta = np.sqrt(theta2)
    small = theta < 1e-8
    half = 0.5 * theta
    denom = np.where(small, 1.0, theta2)
    sin_half = np.sin(half)
    sin_half = np.where(np.abs(sin_half) < 1e-300, 1.0, sin_half)
    coef = np.where(small, 1.0 / 12.0, (1.0 - half * np.cos(half) / sin_half) / denom)
    wxv = np.cross(omega, v)
    return v - 0.5 * wxv + coef[:, None] * np.cross(omega, wxv)


class _GraphProblem:
    """Array form of the edge residuals for fast repeated evaluation."""

    def __init__(self, g: MapGraph):
        self.n = len(g.keyframes)
        self.ei = np.array([e.from_id for e in g.edges], dtype=int)
        self.ej = np.array([e.to_id for e in g.edges], dtype=int)
        self.meas_t = np.stack([e.rel.position for e in g.edges])
        self.meas_q_conj = quat_conj_arr(
            np.stack([e.rel.orientation.as_array() for e in g.edges])
        )
        # whitening: r' = L^T r with information = L L^T
        self.Lt = np.stack([np.linalg.cholesky(e.information).T for e in g.edges])

    def pack(self, g: MapGraph) -> tuple[np.ndarray, np.ndarray]:
        pos = np.stack([kf.pose.position for kf in g.keyframes])
        quat = np.stack([kf.pose.orientation.as_array() for kf in g.keyframes])
        return pos, quat

    def residuals(self, pos: np.ndarray, quat: np.ndarray) -> np.ndarray:
        qi_c = quat_conj_arr(quat[self.ei])
        q_rel = quat_mul_arr(qi_c, quat[self.ej])
        t_rel = quat_rotate_arr(qi_c, pos[self.ej] - pos[self.ei])
        err_q = quat_mul_arr(self.meas_q_conj, q_rel)
        err_t = quat_rotate_arr(self.meas_q_conj, t_rel - self.meas_t)
        omega = quat_log_arr(normalize_arr(err_q))
        rho = _vinv_apply(omega, err_t)
        r = np.concatenate([rho, omega], axis=1)
        return np.einsum("eij,ei->ej", self.Lt, r)

    def retract(
        self, pos: np.ndarray, quat: np.ndarray, delta: np.ndarray, free: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        d = delta.reshape(-1, 6)
        pos2 = pos.copy()
        quat2 = quat.copy()
        pos2[free] = pos[free] + d[:, 0:3]
        quat2[free] = normalize_arr(quat_mul_arr(quat[free], quat_exp_arr(d[:, 3:6])))
        return pos2, quat2


def optimize_pose_graph(g: MapGraph, cfg: OptimizeConfig = OptimizeConfig()) -> dict:
    """Damped Gauss-Newton over all keyframe poses, keyframe 0 fixed.

    Jacobians are central differences batched by node color: perturbing an
    independent set moves each edge residual through at most one of its
    endpoints, so one residual evaluation fills many columns at once.
    Returns iteration statistics; g is updated in place.
    """
    _check_connected(g)
    if len(g.keyframes) <= 1 or not g.edges:
        return {
            "iterations": 0,
            "initial_objective": 0.0,
            "final_objective": 0.0,
            "history": [0.0],
        }

    prob = _GraphProblem(g)
    pos, quat = prob.pack(g)
    free = np.arange(1, prob.n)
    col_of_node = {int(n): k for k, n in enumerate(free)}
    colors = _color_nodes(prob.n, g.edges)

    # per color: (edge rows, perturbed endpoint node) for J assembly
    color_edges: dict[int, list[tuple[int, int]]] = {}
    for e_idx in range(len(prob.ei)):
        for node in (int(prob.ei[e_idx]), int(prob.ej[e_idx])):
            if node == 0:
                continue
            color_edges.setdefault(int(colors[node]), []).append((e_idx, node))

    h = 1e-6
    lam = cfg.damping
    n_free = len(free)
    m = 6 * len(prob.ei)

    r = prob.residuals(pos, quat)
    obj = float(np.sum(r * r))
    initial_obj = obj
    iters = 0
    history = [obj]

    for _ in range(cfg.max_iters):
        rows, cols, vals = [], [], []
        for color, entries in color_edges.items():
            nodes = np.array(sorted({node for _, node in entries}), dtype=int)
            for axis in range(6):
                dstep = np.zeros((len(nodes), 6))
                dstep[:, axis] = h
                p_plus, q_plus = prob.retract(pos, quat, dstep, nodes)
                p_minus, q_minus = prob.retract(pos, quat, -dstep, nodes)
                r_plus = prob.residuals(p_plus, q_plus)
                r_minus = prob.residuals(p_minus, q_minus)
                dr = (r_plus - r_minus) / (2.0 * h)
                for e_idx, node in entries:
                    col = 6 * col_of_node[node] + axis
                    for k in range(6):
                        rows.append(6 * e_idx + k)
                        cols.append(col)
                        vals.append(dr[e_idx, k])
        J = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(m, 6 * n_free))
        g_vec = J.T @ r.reshape(-1)
        JtJ = (J.T @ J).tocsc()

        accepted = False
        for _ in range(8):
            A = JtJ + lam * scipy.sparse.identity(6 * n_free, format="csc")
            try:
                delta = scipy.sparse.linalg.spsolve(A, -g_vec)
            except RuntimeError:
                lam *= 10.0
                continue
            pos_new, quat_new = prob.retract(pos, quat, delta, free)
            r_new = prob.residuals(pos_new, quat_new)
            obj_new = float(np.sum(r_new * r_new))
            if obj_new < obj:
                pos, quat, r = pos_new, quat_new, r_new
                rel_drop = (obj - obj_new) / max(obj, 1e-300)
                obj = obj_new
                history.append(obj)
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                iters += 1
                break
            lam *= 10.0
        if not accepted or rel_drop < cfg.tol:
            break

    for k, kf in enumerate(g.keyframes):
        q = UnitQuaternion(*quat[k])
        g.keyframes[k] = replace(kf, pose=Pose6(pos[k], q))
    return {
        "iterations": iters,
        "initial_objective": initial_obj,
        "final_objective": obj,
        "history": history,
    }


# ---------------------------------------------------------------------------
# occupancy projection


@dataclass
class OccupancyGrid:
    resolution: float
    origin: np.ndarray  # world position of cell (0, 0)'s lower corner
    cells: np.ndarray  # uint8, indexed [iy, ix]

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.origin = np.asarray(self.origin, dtype=float).reshape(2)
        self.cells = np.asarray(self.cells, dtype=np.uint8)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return (
            int(math.floor((x - self.origin[0]) / self.resolution)),
            int(math.floor((y - self.origin[1]) / self.resolution)),
        )

    def cell_center(self, ix: int, iy: int) -> np.ndarray:
        return self.origin + (np.array([ix, iy]) + 0.5) * self.resolution

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.resolution, self.origin.copy(), self.cells.copy())


def project_occupancy(
    g: MapGraph,
    band: tuple = (0.05, 0.5),
    resolution: float = 0.1,
    sensing_radius: float = 3.0,
    bounds: Optional[tuple] = None,
) -> OccupancyGrid:
    """Project landmark estimates in the height band onto a 2D grid.

    Occupied wins over free; free cells are those within sensing radius of
    some keyframe's ground track; the rest stay unknown.
    """
    estimates = g.landmark_estimates()
    kf_xy = np.array([kf.pose.position[:2] for kf in g.keyframes]).reshape(-1, 2)
    pts = np.array(
        [p for p in estimates.values() if band[0] <= p[2] <= band[1]]
    ).reshape(-1, 3)
    if bounds is not None:
        lo = np.asarray(bounds[0], dtype=float)[:2]
        hi = np.asarray(bounds[1], dtype=float)[:2]
    else:
        stack = [kf_xy] if len(kf_xy) else []
        if len(pts):
            stack.append(pts[:, :2])
        if not stack:
            return OccupancyGrid(resolution, np.zeros(2), np.full((1, 1), UNKNOWN, np.uint8))
        allp = np.vstack(stack)
        lo = allp.min(axis=0) - sensing_radius
        hi = allp.max(axis=0) + sensing_radius
    w = max(1, int(math.ceil((hi[0] - lo[0]) / resolution)))
    h = max(1, int(math.ceil((hi[1] - lo[1]) / resolution)))
    cells = np.full((h, w), UNKNOWN, dtype=np.uint8)

    if len(kf_xy):
        xs = lo[0] + (np.arange(w) + 0.5) * resolution
        ys = lo[1] + (np.arange(h) + 0.5) * resolution
        cx, cy = np.meshgrid(xs, ys)
        near = np.zeros((h, w), dtype=bool)
        r2 = sensing_radius * sensing_radius
        for p in kf_xy:
            near |= (cx - p[0]) ** 2 + (cy - p[1]) ** 2 <= r2
        cells[near] = FREE

    for p in pts:
        ix = int(math.floor((p[0] - lo[0]) / resolution))
        iy = int(math.floor((p[1] - lo[1]) / resolution))
        if 0 <= ix < w and 0 <= iy < h:
            cells[iy, ix] = OCCUPIED
    return OccupancyGrid(resolution, lo, cells)


# ---------------------------------------------------------------------------
# serialization


def _fmt_pose(p: Pose6) -> str:
    q = p.orientation
    vals = list(p.position) + [q.w, q.x, q.y, q.z]
    return " ".join(repr(float(v)) for v in vals)


def _parse_pose(fields: Sequence[str]) -> Pose6:
    v = [float(x) for x in fields]
    return Pose6(np.array(v[0:3]), UnitQuaternion(v[3], v[4], v[5], v[6]))


def save_map_graph(path, g: MapGraph, victim_marks: Sequence[VictimMark] = ()) -> None:
    lines = ["MAPGRAPH 1"]
    for kf in g.keyframes:
        sig = " ".join(str(i) for i in sorted(kf.signature))
        lines.append(f"KF {kf.id} {float(kf.t)!r} {_fmt_pose(kf.pose)} | {sig}".rstrip())
    for e in g.edges:
        lines.append(f"EDGE {e.from_id} {e.to_id} {e.kind} {_fmt_pose(e.rel)}")
    for lid, p in sorted(g.landmark_estimates().items()):
        lines.append(f"LM {lid} {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}")
    for line in marks_csv_lines(victim_marks):
        lines.append("VICTIM " + line)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_map_graph(path) -> tuple[MapGraph, list[VictimMark]]:
    g = MapGraph()
    marks: list[VictimMark] = []
    with open(path) as f:
        header = f.readline().strip()
        if header != "MAPGRAPH 1":
            raise ValueError(f"unsupported map graph header: {header!r}")
        for raw in f:
            line = raw.strip()
            if not line:
                continue
            tag, rest = line.split(" ", 1)
            if tag == "KF":
                head, _, sig_part = rest.partition("|")
                fields = head.split()
                sig = frozenset(int(x) for x in sig_part.split())
                kf = Keyframe(
                    id=int(fields[0]),
                    pose=_parse_pose(fields[2:9]),
                    signature=sig,
                    observations=(),
                    t=float(fields[1]),
                )
                g.keyframes.append(kf)
            elif tag == "EDGE":
                fields = rest.split()
                g.edges.append(
                    GraphEdge(int(fields[0]), int(fields[1]), fields[2], _parse_pose(fields[3:10]))
                )
            elif tag == "LM":
                fields = rest.split()
                lid = int(fields[0])
                g._lm_sum[lid] = np.array([float(x) for x in fields[1:4]])
                g._lm_count[lid] = 1
            elif tag == "VICTIM":
                marks.append(mark_from_csv_fields(rest.split(",")))
            else:
                raise ValueError(f"unknown record tag {tag!r}")
    g.finalize()
    return g, marks


def save_occupancy_pgm(path_pgm, grid: OccupancyGrid) -> None:
    """Binary graymap plus a sidecar metadata file next to it.

    Pixel row 0 is the y-min edge of the map (no vertical flip).
    """
    path_pgm = str(path_pgm)
    with open(path_pgm, "wb") as f:
        f.write(f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii"))
        f.write(grid.cells.tobytes())
    meta = "\n".join(
        [
            f"image: {path_pgm.rsplit('/', 1)[-1]}",
            f"resolution: {float(grid.resolution)!r}",
            f"origin: [{float(grid.origin[0])!r}, {float(grid.origin[1])!r}]",
            f"width: {grid.width}",
            f"height: {grid.height}",
            "values: {occupied: 0, free: 254, unknown: 127}",
            "row0_y: min",
        ]
    )
    with open(path_pgm + ".yaml", "w") as f:
        f.write(meta + "\n")


def load_occupancy_pgm(path_pgm) -> OccupancyGrid:
    import yaml as _yaml

    path_pgm = str(path_pgm)
    with open(path_pgm, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P5":
            raise ValueError(f"not a binary graymap: {magic!r}")
        dims = f.readline().split()
        while dims and dims[0].startswith(b"#"):
            dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        maxval = int(f.readline().strip())
        if maxval != 255:
            raise ValueError(f"expected maxval 255, got {maxval}")
        data = f.read(w * h)
    cells = np.frombuffer(data, dtype=np.uint8).reshape(h, w)
    with open(path_pgm + ".yaml") as f:
        meta = _yaml.safe_load(f)
    return OccupancyGrid(float(meta["resolution"]), np.asarray(meta["origin"], dtype=float), cells.copy())
