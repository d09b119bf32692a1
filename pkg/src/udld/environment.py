"""Room geometry, blockage-aware line of sight, mobility and layer classification."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import linkbudget as lb

Point = tuple[float, float]

SPEED_CLASSES = {"static": 0.0, "slow": 0.5, "fast": 1.5}
BODY_RADIUS = 0.2  # half of a 40 cm shoulder width
QUEUE_MAX = 5
MIN_LINK_DISTANCE = 1e-3  # guard against co-located radios


class SceneError(ValueError):
    pass


class Role(enum.Enum):
    AGENT = "agent"
    LAYER2 = "layer2"


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self) -> None:
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise SceneError(f"degenerate obstacle {self}")

    @classmethod
    def from_seq(cls, seq: Sequence[float]) -> "Rect":
        if len(seq) != 4:
            raise SceneError(f"obstacle needs [xmin, ymin, xmax, ymax], got {seq!r}")
        return cls(*map(float, seq))

    def as_list(self) -> list[float]:
        return [self.xmin, self.ymin, self.xmax, self.ymax]


DEFAULT_OBSTACLES = (Rect(2.0, 6.5, 3.5, 8.0), Rect(6.5, 2.0, 8.0, 3.5))


@dataclass(frozen=True)
class Room:
    width: float = 10.0
    height: float = 10.0
    ap_position: Point = (5.0, 5.0)
    static_obstacles: tuple[Rect, ...] = DEFAULT_OBSTACLES

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise SceneError("room width and height must be > 0")
        if not self.contains(self.ap_position):
            raise SceneError(f"AP {self.ap_position} outside the room")
        for r in self.static_obstacles:
            if r.xmin < 0 or r.ymin < 0 or r.xmax > self.width or r.ymax > self.height:
                raise SceneError(f"obstacle {r.as_list()} extends outside the room")
        object.__setattr__(self, "ap_position", (float(self.ap_position[0]), float(self.ap_position[1])))
        object.__setattr__(self, "static_obstacles", tuple(self.static_obstacles))

    def contains(self, p: Sequence[float]) -> bool:
        return 0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height


@dataclass
class Device:
    id: int
    position: Point
    body_radius: float = BODY_RADIUS
    speed: float = 0.0
    current_waypoint: Point = (0.0, 0.0)
    role: Role = Role.LAYER2
    queue_capacity: int = QUEUE_MAX
    queue_in_use: int = 0

    def __post_init__(self) -> None:
        if self.body_radius < 0:
            raise SceneError("body_radius must be >= 0")
        if not 0 <= self.queue_in_use <= self.queue_capacity <= QUEUE_MAX:
            raise SceneError("queue bounds violated")

    @property
    def queue_free(self) -> int:
        return self.queue_capacity - self.queue_in_use


# ---------------------------------------------------------------- geometry

def _segment_point_distance(a: Point, b: Point, p: Point) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    px, py = p[0] - ax, p[1] - ay
    seg2 = dx * dx + dy * dy
    t = 0.0 if seg2 == 0 else min(1.0, max(0.0, (px * dx + py * dy) / seg2))
    return math.hypot(px - t * dx, py - t * dy)


def _segment_hits_rect(a: Point, b: Point, r: Rect) -> bool:
    # Liang-Barsky clipping; touching the boundary counts as a hit.
    t0, t1 = 0.0, 1.0
    dx, dy = b[0] - a[0], b[1] - a[1]
    for p, q in ((-dx, a[0] - r.xmin), (dx, r.xmax - a[0]), (-dy, a[1] - r.ymin), (dy, r.ymax - a[1])):
        if p == 0:
            if q < 0:
                return False
        else:
            t = q / p
            if p < 0:
                t0 = max(t0, t)
            else:
                t1 = min(t1, t)
            if t0 > t1:
                return False
    return True


def line_of_sight(
    a: Point,
    b: Point,
    room: Room,
    devices: Iterable[Device],
    exclude: Iterable[int] = (),
) -> bool:
    """True iff segment a-b misses every obstacle and every non-excluded body disk.

    A disk blocks when its centre is strictly closer than ``body_radius`` to the
    segment. Endpoints are put in a canonical order so the result is symmetric.
    """
    if tuple(b) < tuple(a):
        a, b = b, a
    exclude = set(exclude)
    for r in room.static_obstacles:
        if _segment_hits_rect(a, b, r):
            return False
    for dev in devices:
        if dev.id in exclude or dev.body_radius <= 0:
            continue
        if _segment_point_distance(a, b, dev.position) < dev.body_radius:
            return False
    return True


def _segments_hit_rects(starts: np.ndarray, ends: np.ndarray, rects: Sequence[Rect]) -> np.ndarray:
    """Vectorised Liang-Barsky; shapes (..., 2) -> bool (...)."""
    hit = np.zeros(starts.shape[:-1], dtype=bool)
    d = ends - starts
    with np.errstate(divide="ignore", invalid="ignore"):
        for r in rects:
            t0 = np.zeros(hit.shape)
            t1 = np.ones(hit.shape)
            ok = np.ones(hit.shape, dtype=bool)
            for p, q in (
                (-d[..., 0], starts[..., 0] - r.xmin),
                (d[..., 0], r.xmax - starts[..., 0]),
                (-d[..., 1], starts[..., 1] - r.ymin),
                (d[..., 1], r.ymax - starts[..., 1]),
            ):
                par = p == 0
                ok &= ~(par & (q < 0))
                t = np.where(par, 0.0, q / np.where(par, 1.0, p))
                t0 = np.where(~par & (p < 0), np.maximum(t0, t), t0)
                t1 = np.where(~par & (p > 0), np.minimum(t1, t), t1)
            hit |= ok & (t0 <= t1)
    return hit


def _segments_hit_disks(
    starts: np.ndarray, ends: np.ndarray, centers: np.ndarray, radii: np.ndarray
) -> np.ndarray:
    """Distance test of S segments against K disks -> bool (S, K)."""
    d = ends - starts  # (S, 2)
    seg2 = np.einsum("ij,ij->i", d, d)
    # rel = center - start, expanded so only (S, K) arrays are materialised
    rel_d = centers @ d.T - np.einsum("ij,ij->i", starts, d)  # (K, S)
    rel_d = rel_d.T
    rel2 = (
        np.einsum("ij,ij->i", centers, centers)[None, :]
        - 2.0 * (starts @ centers.T)
        + np.einsum("ij,ij->i", starts, starts)[:, None]
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        t = rel_d / seg2[:, None]
    t = np.clip(np.nan_to_num(t), 0.0, 1.0)
    dist2 = rel2 - 2.0 * t * rel_d + t * t * seg2[:, None]
    return dist2 < (radii * radii)[None, :]


# ---------------------------------------------------------------- topology

@dataclass(frozen=True)
class TopologySnapshot:
    """Layer partition and pairwise geometry at one instant.

    Index ``i`` in every array is device id ``i``.
    """

    layer1_ids: frozenset
    layer2_ids: frozenset
    positions: np.ndarray  # (N, 2)
    pairwise_distances: np.ndarray  # (N, N)
    los_matrix: np.ndarray  # (N, N) device <-> device
    ap_distances: np.ndarray  # (N,)
    ap_los: np.ndarray  # (N,)
    ap_received_power: np.ndarray = field(default=None)  # (N,) dBm

    @property
    def n(self) -> int:
        return len(self.positions)


def los_matrices(room: Room, devices: Sequence[Device]) -> tuple[np.ndarray, np.ndarray]:
    """(device-device LoS matrix, device-AP LoS vector) for ids 0..N-1 in order."""
    n = len(devices)
    pos = np.array([d.position for d in devices], dtype=float).reshape(n, 2)
    radii = np.array([d.body_radius for d in devices], dtype=float)
    ap = np.asarray(room.ap_position, dtype=float)

    # device -> AP; canonical endpoint order keeps parity with line_of_sight()
    ap_rep = np.broadcast_to(ap, pos.shape)
    swap = (pos[:, 0] > ap[0]) | ((pos[:, 0] == ap[0]) & (pos[:, 1] > ap[1]))
    s = np.where(swap[:, None], ap_rep, pos)
    e = np.where(swap[:, None], pos, ap_rep)
    blocked = _segments_hit_rects(s, e, room.static_obstacles)
    if n:
        hits = _segments_hit_disks(s, e, pos, radii)
        hits[np.arange(n), np.arange(n)] = False
        blocked |= hits.any(axis=1)
    ap_los = ~blocked

    los = np.ones((n, n), dtype=bool)
    iu, ju = np.triu_indices(n, k=1)
    if len(iu):
        a, b = pos[iu], pos[ju]
        swap = (a[:, 0] > b[:, 0]) | ((a[:, 0] == b[:, 0]) & (a[:, 1] > b[:, 1]))
        s = np.where(swap[:, None], b, a)
        e = np.where(swap[:, None], a, b)
        blocked = _segments_hit_rects(s, e, room.static_obstacles)
        hits = _segments_hit_disks(s, e, pos, radii)
        rows = np.arange(len(iu))
        hits[rows, iu] = False
        hits[rows, ju] = False
        blocked |= hits.any(axis=1)
        los[iu, ju] = ~blocked
        los[ju, iu] = ~blocked
    return los, ap_los


def default_gamma0(params: lb.LinkBudgetParams, reference_bandwidth: float, target_se: float = 10.0) -> float:
    """Received power (dBm) giving ``target_se`` bps/Hz at the reference bandwidth."""
    return lb.noise_power(params, reference_bandwidth) + lb.required_snr_db(target_se)


def classify_layers(
    room: Room,
    devices: Sequence[Device],
    params: lb.LinkBudgetParams,
    gamma0: float,
) -> TopologySnapshot:
    """Layer 1 = LoS to the AP and received AP power >= ``gamma0`` dBm."""
    if not devices:
        raise SceneError("device list is empty")
    if [d.id for d in devices] != list(range(len(devices))):
        raise SceneError("device ids must be 0..N-1 in order")
    pos = np.array([d.position for d in devices], dtype=float)
    ap = np.asarray(room.ap_position, dtype=float)
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    ap_dist = np.hypot(*(pos - ap).T)
    los, ap_los = los_matrices(room, devices)

    k = lb.absorption_coefficient(
        params.absorption_coefficient_table,
        params.carrier_frequency,
        params.relative_humidity,
        params.temperature,
        params.reference_humidity,
    )
    d = np.maximum(ap_dist, MIN_LINK_DISTANCE)
    rx = (
        params.transmit_power
        + 2.0 * lb.antenna_gain(params.beamwidth)
        - lb.DB_PER_NEPER * k * d
        - 20.0 * np.log10(4.0 * np.pi * d * params.carrier_frequency / lb.SPEED_OF_LIGHT)
    )
    layer1 = ap_los & (rx >= gamma0)
    ids = np.arange(len(devices))
    return TopologySnapshot(
        layer1_ids=frozenset(int(i) for i in ids[layer1]),
        layer2_ids=frozenset(int(i) for i in ids[~layer1]),
        positions=pos,
        pairwise_distances=dist,
        los_matrix=los,
        ap_distances=ap_dist,
        ap_los=ap_los,
        ap_received_power=rx,
    )


def neighbors_within(device_id: int, snapshot: TopologySnapshot, radius: float) -> int:
    """Number of other Layer-1 devices within ``radius`` metres (LoS not required)."""
    if radius <= 0:
        raise ValueError("radius must be > 0")
    if not 0 <= device_id < snapshot.n:
        raise KeyError(f"unknown device id {device_id}")
    row = snapshot.pairwise_distances[device_id]
    return sum(1 for j in snapshot.layer1_ids if j != device_id and row[j] <= radius)


# ---------------------------------------------------------------- mobility

def _uniform_point(room: Room, rng: np.random.Generator) -> Point:
    return (float(rng.uniform(0.0, room.width)), float(rng.uniform(0.0, room.height)))


def random_waypoint_step(device: Device, room: Room, dt: float, rng: np.random.Generator) -> Device:
    """Advance ``device`` by ``dt`` seconds of random-waypoint motion.

    Reaching (or overshooting) the waypoint parks the device on it and draws
    the next waypoint; leftover travel in that step is dropped.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if device.speed == 0:
        return device
    x, y = device.position
    wx, wy = device.current_waypoint
    remaining = math.hypot(wx - x, wy - y)
    step = device.speed * dt
    if step >= remaining:
        return replace(device, position=(wx, wy), current_waypoint=_uniform_point(room, rng))
    f = step / remaining
    return replace(device, position=(x + f * (wx - x), y + f * (wy - y)))


class Scene:
    """Mutable collection of devices in a room, advanced one step per episode."""

    def __init__(
        self,
        room: Room,
        n_devices: int,
        speed: float,
        rng: np.random.Generator,
        body_radius: float = BODY_RADIUS,
        queue_capacity: int = QUEUE_MAX,
    ):
        if n_devices < 1:
            raise SceneError("need at least one device")
        self.room = room
        self.rng = rng
        self.devices = [
            Device(
                id=i,
                position=_uniform_point(room, rng),
                body_radius=body_radius,
                speed=speed,
                current_waypoint=_uniform_point(room, rng),
                queue_capacity=queue_capacity,
            )
            for i in range(n_devices)
        ]

    def snapshot(self, params: lb.LinkBudgetParams, gamma0: float) -> TopologySnapshot:
        snap = classify_layers(self.room, self.devices, params, gamma0)
        for d in self.devices:
            d.role = Role.AGENT if d.id in snap.layer1_ids else Role.LAYER2
            d.queue_in_use = 0
        return snap

    def step(self, dt: float = 1.0) -> None:
        self.devices = [random_waypoint_step(d, self.room, dt, self.rng) for d in self.devices]

    def positions(self) -> np.ndarray:
        return np.array([d.position for d in self.devices])

