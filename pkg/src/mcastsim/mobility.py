"""Node motion: Random Waypoint, Reference Point Group and Manhattan models.

Every model produces, per node, a :class:`MobilityPath` made of
time-contiguous straight-line legs followed by an optional pause.  Paths
round-trip through the ns-2 ``setdest`` trace format.
"""

from __future__ import annotations

import bisect
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class InvalidParams(ValueError):
    pass


class OutOfRangeTime(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Area:
    width: float = 1000.0
    height: float = 700.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise InvalidParams(f"area must be positive, got {self.width}x{self.height}")

    def clip(self, x: float, y: float) -> tuple[float, float]:
        return min(max(x, 0.0), self.width), min(max(y, 0.0), self.height)


@dataclass(frozen=True)
class WaypointSegment:
    """Straight move from ``start_pos`` to ``dest_pos`` at ``speed``, then a pause."""

    start_time: float
    start_pos: tuple[float, float]
    dest_pos: tuple[float, float]
    speed: float
    pause_after: float = 0.0

    @property
    def distance(self) -> float:
        return math.hypot(self.dest_pos[0] - self.start_pos[0], self.dest_pos[1] - self.start_pos[1])

    @property
    def travel_time(self) -> float:
        if self.speed <= 0.0:
            return 0.0
        return self.distance / self.speed

    @property
    def arrival_time(self) -> float:
        return self.start_time + self.travel_time

    @property
    def end_time(self) -> float:
        return self.arrival_time + self.pause_after

    def at(self, t: float) -> tuple[float, float]:
        travel = self.travel_time
        dt = t - self.start_time
        if travel <= 0.0 or dt >= travel:
            return self.dest_pos
        if dt <= 0.0:
            return self.start_pos
        f = dt / travel
        (x0, y0), (x1, y1) = self.start_pos, self.dest_pos
        return x0 + (x1 - x0) * f, y0 + (y1 - y0) * f


@dataclass
class MobilityPath:
    node: int
    segments: list[WaypointSegment]
    duration: float
    _starts: list[float] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if not self.segments:
            raise InvalidParams(f"node {self.node}: empty path")
        self._starts = [s.start_time for s in self.segments]

    def position(self, t: float) -> tuple[float, float]:
        return position(self, t)

    def positions(self, times: np.ndarray) -> np.ndarray:
        """Vectorised position lookup; returns an array of shape (len(times), 2)."""
        times = np.asarray(times, dtype=float)
        t0, p0, d, move = _segment_arrays(self.segments)
        idx = np.searchsorted(t0, times, side="right") - 1
        idx = np.clip(idx, 0, len(t0) - 1)
        frac = _fraction(times - t0[idx], move[idx])
        return p0[idx] + d[idx] * frac[:, None]


def position(path: MobilityPath, t: float) -> tuple[float, float]:
    """Exact piecewise-linear position of ``path`` at time ``t``."""
    if t != t or t < 0.0 or t > path.duration + 1e-9:
        raise OutOfRangeTime(f"t={t} outside [0, {path.duration}]")
    i = bisect.bisect_right(path._starts, t) - 1
    return path.segments[max(i, 0)].at(t)


def _segment_arrays(segments: Sequence[WaypointSegment]):
    t0 = np.array([s.start_time for s in segments], dtype=float)
    p0 = np.array([s.start_pos for s in segments], dtype=float).reshape(-1, 2)
    p1 = np.array([s.dest_pos for s in segments], dtype=float).reshape(-1, 2)
    move = np.array([s.travel_time for s in segments], dtype=float)
    return t0, p0, p1 - p0, move


def _fraction(dt: np.ndarray, move: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(move > 0.0, dt / np.where(move > 0.0, move, 1.0), 1.0)
    return np.clip(f, 0.0, 1.0)


class PositionTable:
    """All nodes' paths packed into padded arrays for fast snapshot queries.

    ``snapshot(t)`` is optimised for non-decreasing ``t`` (the simulator's
    access pattern) by keeping a per-node segment cursor.
    """

    def __init__(self, paths: Sequence[MobilityPath]):
        self.n = len(paths)
        width = max(len(p.segments) for p in paths) + 1
        self.t0 = np.full((self.n, width), np.inf)
        self.p0 = np.zeros((self.n, width, 2))
        self.d = np.zeros((self.n, width, 2))
        self.move = np.zeros((self.n, width))
        for i, p in enumerate(paths):
            t0, p0, d, move = _segment_arrays(p.segments)
            k = len(t0)
            self.t0[i, :k] = t0
            self.p0[i, :k] = p0
            self.d[i, :k] = d
            self.move[i, :k] = move
        self.duration = min(p.duration for p in paths)
        self.max_speed = max(s.speed for p in paths for s in p.segments)
        self._rows = np.arange(self.n)
        self._cursor = np.zeros(self.n, dtype=np.int64)
        self._last_t = -np.inf
        self._last = None
        self._load_cursor(self._rows)

    def _load_cursor(self, rows):
        # per-node copy of the current segment so the hot path avoids 2-D gathers
        if not hasattr(self, "_cx"):
            self._cx = np.zeros(self.n)
            self._cy = np.zeros(self.n)
            self._dx = np.zeros(self.n)
            self._dy = np.zeros(self.n)
            self._ct0 = np.zeros(self.n)
            self._inv = np.zeros(self.n)
            self._next = np.zeros(self.n)
        cur = self._cursor[rows]
        move = self.move[rows, cur]
        moving = move > 0.0
        p0 = self.p0[rows, cur]
        d = self.d[rows, cur]
        self._cx[rows] = np.where(moving, p0[:, 0], p0[:, 0] + d[:, 0])
        self._cy[rows] = np.where(moving, p0[:, 1], p0[:, 1] + d[:, 1])
        self._dx[rows] = np.where(moving, d[:, 0], 0.0)
        self._dy[rows] = np.where(moving, d[:, 1], 0.0)
        self._ct0[rows] = self.t0[rows, cur]
        self._inv[rows] = np.where(moving, 1.0 / np.where(moving, move, 1.0), 0.0)
        self._next[rows] = self.t0[rows, cur + 1]

    def snapshot_xy(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Positions of every node at ``t`` as two arrays (x, y)."""
        if t == self._last_t:
            return self._last
        if t < self._last_t:
            self._cursor = np.array(
                [max(np.searchsorted(self.t0[i], t, side="right") - 1, 0) for i in self._rows], dtype=np.int64
            )
            self._load_cursor(self._rows)
        adv = self._next <= t
        if adv.any():
            rows = np.flatnonzero(adv)
            while rows.size:
                self._cursor[rows] += 1
                nxt = self.t0[rows, self._cursor[rows] + 1]
                rows = rows[nxt <= t]
            self._load_cursor(np.flatnonzero(adv))
        f = np.minimum((t - self._ct0) * self._inv, 1.0)
        xy = (self._cx + self._dx * f, self._cy + self._dy * f)
        self._last_t = t
        self._last = xy
        return xy

    def snapshot(self, t: float) -> np.ndarray:
        """Positions of every node at ``t`` as an (n, 2) array."""
        x, y = self.snapshot_xy(t)
        return np.column_stack((x, y))

    def sample(self, times: np.ndarray) -> np.ndarray:
        """Positions at many times, shape (len(times), n, 2)."""
        times = np.asarray(times, dtype=float)
        out = np.empty((len(times), self.n, 2))
        for i in range(self.n):
            t0 = self.t0[i]
            idx = np.clip(np.searchsorted(t0, times, side="right") - 1, 0, None)
            frac = _fraction(times - t0[idx], self.move[i, idx])
            out[:, i] = self.p0[i, idx] + self.d[i, idx] * frac[:, None]
        return out


# --------------------------------------------------------------------------
# Random Waypoint


@dataclass(frozen=True)
class RwpParams:
    v_min: float = 1.0
    v_max: float = 10.0
    pause: float = 2.0

    def validate(self):
        if not (0.0 <= self.v_min <= self.v_max):
            raise InvalidParams(f"need 0 <= v_min <= v_max, got {self.v_min}, {self.v_max}")
        if self.v_max > 0.0 and self.v_min <= 0.0:
            raise InvalidParams("v_min must be > 0 when v_max > 0")
        if self.pause < 0.0:
            raise InvalidParams("pause must be >= 0")


def _rwp_segments(rng, area: Area, start: tuple[float, float], t_start: float, t_end: float,
                  v_min: float, v_max: float, pause: float, dest_fn=None) -> list[WaypointSegment]:
    if dest_fn is None:
        def dest_fn():
            return rng.uniform(0.0, area.width), rng.uniform(0.0, area.height)
    pos = start
    t = t_start
    if v_max <= 0.0:
        return [WaypointSegment(t_start, pos, pos, 0.0, max(t_end - t_start, pause))]
    segs = []
    if pause > 0.0:
        segs.append(WaypointSegment(t, pos, pos, 0.0, pause))
        t += pause
    while t < t_end:
        dest = dest_fn()
        speed = rng.uniform(v_min, v_max)
        seg = WaypointSegment(t, pos, dest, speed, pause)
        segs.append(seg)
        t = seg.end_time
        pos = dest
    return segs


def _trim_start(segs: list[WaypointSegment], t0: float) -> list[WaypointSegment]:
    """Drop the part of a path before ``t0`` and re-anchor it at ``t0``."""
    out = []
    for s in segs:
        if s.end_time <= t0:
            continue
        if s.start_time >= t0:
            out.append(s)
            continue
        here = s.at(t0)
        if t0 < s.arrival_time:
            out.append(WaypointSegment(t0, here, s.dest_pos, s.speed, s.pause_after))
        else:
            out.append(WaypointSegment(t0, here, here, 0.0, s.end_time - t0))
    return out


def generate_rwp(params: RwpParams, area: Area, nodes: int, duration: float, rng,
                 warmup: float = 0.0) -> list[MobilityPath]:
    """Random Waypoint paths; ``warmup`` seconds of motion are simulated then discarded."""
    params.validate()
    if nodes <= 0 or duration <= 0:
        raise InvalidParams("nodes and duration must be positive")
    paths = []
    for i in range(nodes):
        start = (rng.uniform(0.0, area.width), rng.uniform(0.0, area.height))
        segs = _rwp_segments(rng, area, start, -warmup, duration, params.v_min, params.v_max, params.pause)
        if warmup > 0.0:
            segs = _trim_start(segs, 0.0)
        paths.append(MobilityPath(i, segs, duration))
    return paths


# --------------------------------------------------------------------------
# Reference Point Group Mobility


@dataclass(frozen=True)
class RpgmParams:
    group_count: int = 5
    nodes_per_group: int = 10
    max_deviation: float = 100.0
    group_v_min: float = 1.0
    group_v_max: float = 10.0
    group_pause: float = 2.0
    member_speed_ratio: float = 0.5

    def validate(self, nodes: int | None = None):
        if self.group_count <= 0 or self.nodes_per_group <= 0:
            raise InvalidParams("group_count and nodes_per_group must be positive")
        if nodes is not None and self.group_count * self.nodes_per_group != nodes:
            raise InvalidParams(
                f"{self.group_count} groups x {self.nodes_per_group} nodes != {nodes} nodes"
            )
        if self.max_deviation < 0.0:
            raise InvalidParams("max_deviation must be >= 0")
        if self.member_speed_ratio < 0.0:
            raise InvalidParams("member_speed_ratio must be >= 0")
        RwpParams(self.group_v_min, self.group_v_max, self.group_pause).validate()

    def group_of(self, node: int) -> int:
        return node // self.nodes_per_group


@dataclass
class RpgmLayout:
    """Unclipped building blocks of an RPGM scenario (kept for inspection)."""

    centers: list[MobilityPath]
    offsets: list[tuple[float, float]]
    walks: list[MobilityPath]
    group_of: list[int]

    def reference_point(self, area: Area, node: int, t: float) -> tuple[float, float]:
        cx, cy = self.centers[self.group_of[node]].position(t)
        ox, oy = self.offsets[node]
        return area.clip(cx + ox, cy + oy)


def _uniform_in_disk(rng, radius: float) -> tuple[float, float]:
    if radius <= 0.0:
        return 0.0, 0.0
    r = radius * math.sqrt(rng.random())
    a = rng.uniform(0.0, 2.0 * math.pi)
    return r * math.cos(a), r * math.sin(a)


def rpgm_layout(params: RpgmParams, area: Area, nodes: int, duration: float, rng) -> RpgmLayout:
    params.validate(nodes)
    centers = []
    for g in range(params.group_count):
        start = (rng.uniform(0.0, area.width), rng.uniform(0.0, area.height))
        segs = _rwp_segments(rng, area, start, 0.0, duration, params.group_v_min, params.group_v_max,
                             params.group_pause)
        centers.append(MobilityPath(g, segs, duration))
    offsets = []
    walks = []
    group_of = []
    w_min = params.member_speed_ratio * params.group_v_min
    w_max = params.member_speed_ratio * params.group_v_max
    if w_max > 0.0 and w_min <= 0.0:
        w_min = min(w_max, 0.1)
    for i in range(nodes):
        group_of.append(params.group_of(i))
        offsets.append(_uniform_in_disk(rng, params.max_deviation))
        if params.max_deviation > 0.0:
            segs = _rwp_segments(rng, area, (0.0, 0.0), 0.0, duration, w_min, w_max, params.group_pause,
                                 dest_fn=lambda: _uniform_in_disk(rng, params.max_deviation))
        else:
            segs = [WaypointSegment(0.0, (0.0, 0.0), (0.0, 0.0), 0.0, duration)]
        walks.append(MobilityPath(i, segs, duration))
    return RpgmLayout(centers, offsets, walks, group_of)


def _breakpoints(path: MobilityPath) -> list[float]:
    pts = []
    for s in path.segments:
        pts.append(s.start_time)
        pts.append(s.arrival_time)
    return pts


def _clip_crossings(a: float, b: float, pa, pb, area: Area) -> list[float]:
    """Times in (a, b) where the straight move pa->pb crosses an area edge."""
    out = []
    for k, hi in ((0, area.width), (1, area.height)):
        va, vb = pa[k], pb[k]
        if va == vb:
            continue
        for edge in (0.0, hi):
            if min(va, vb) < edge < max(va, vb):
                out.append(a + (b - a) * (edge - va) / (vb - va))
    return sorted(out)


def _compose_member(layout: RpgmLayout, area: Area, node: int, duration: float) -> MobilityPath:
    center = layout.centers[layout.group_of[node]]
    walk = layout.walks[node]
    ox, oy = layout.offsets[node]

    def raw(t):
        cx, cy = center.position(t)
        wx, wy = walk.position(t)
        return cx + ox + wx, cy + oy + wy

    knots = sorted({t for t in _breakpoints(center) + _breakpoints(walk) + [0.0, duration]
                    if 0.0 <= t <= duration})
    # split at area-edge crossings so that clipping stays piecewise linear
    times = []
    for a, b in zip(knots, knots[1:]):
        times.append(a)
        times.extend(_clip_crossings(a, b, raw(a), raw(b), area))
    times.append(knots[-1])
    pts = [area.clip(*raw(t)) for t in times]

    segs: list[WaypointSegment] = []
    for (a, pa), (b, pb) in zip(zip(times, pts), zip(times[1:], pts[1:])):
        if b <= a:
            continue
        if pa == pb:
            if segs and segs[-1].dest_pos == pa:
                last = segs[-1]
                segs[-1] = WaypointSegment(last.start_time, last.start_pos, last.dest_pos, last.speed,
                                           last.pause_after + (b - a))
            else:
                segs.append(WaypointSegment(a, pa, pb, 0.0, b - a))
            continue
        if segs:
            pa = segs[-1].dest_pos
        speed = math.hypot(pb[0] - pa[0], pb[1] - pa[1]) / (b - a)
        segs.append(WaypointSegment(a, pa, pb, speed, 0.0))
    if not segs:
        p = pts[0]
        segs = [WaypointSegment(0.0, p, p, 0.0, duration)]
    return MobilityPath(node, segs, duration)


def generate_rpgm(params: RpgmParams, area: Area, nodes: int, duration: float, rng) -> list[MobilityPath]:
    """Group motion: members follow a logical centre plus a bounded private walk."""
    if nodes <= 0 or duration <= 0:
        raise InvalidParams("nodes and duration must be positive")
    layout = rpgm_layout(params, area, nodes, duration, rng)
    return [_compose_member(layout, area, i, duration) for i in range(nodes)]


# --------------------------------------------------------------------------
# Manhattan grid


@dataclass(frozen=True)
class ManhattanParams:
    h_streets: int = 5
    v_streets: int = 5
    v_min: float = 1.0
    v_max: float = 10.0
    turn_probs: tuple[float, float, float] = (0.25, 0.25, 0.5)  # left, right, straight

    def validate(self):
        if self.h_streets < 2 or self.v_streets < 2:
            raise InvalidParams("need at least 2 horizontal and 2 vertical streets")
        RwpParams(self.v_min, self.v_max, 0.0).validate()
        if len(self.turn_probs) != 3 or any(p < 0 for p in self.turn_probs):
            raise InvalidParams("turn_probs must be three non-negative numbers")
        if abs(sum(self.turn_probs) - 1.0) > 1e-9:
            raise InvalidParams(f"turn_probs must sum to 1, got {sum(self.turn_probs)}")

    def grid(self, area: Area) -> tuple[list[float], list[float]]:
        xs = [area.width * k / (self.v_streets - 1) for k in range(self.v_streets)]
        ys = [area.height * k / (self.h_streets - 1) for k in range(self.h_streets)]
        return xs, ys


def _next_stop(coord: float, step: int, lines: list[float]):
    if step > 0:
        i = bisect.bisect_right(lines, coord)
        return lines[i] if i < len(lines) else None
    i = bisect.bisect_left(lines, coord) - 1
    return lines[i] if i >= 0 else None


def _advance(pos, heading, xs, ys):
    """Next intersection from ``pos`` along ``heading`` or None off the grid."""
    x, y = pos
    dx, dy = heading
    if dx:
        nx = _next_stop(x, dx, xs)
        return None if nx is None else (nx, y)
    ny = _next_stop(y, dy, ys)
    return None if ny is None else (x, ny)


def generate_manhattan(params: ManhattanParams, area: Area, nodes: int, duration: float,
                       rng) -> list[MobilityPath]:
    """Street-grid motion with probabilistic turns at every intersection."""
    params.validate()
    if nodes <= 0 or duration <= 0:
        raise InvalidParams("nodes and duration must be positive")
    xs, ys = params.grid(area)
    n_streets = len(xs) + len(ys)
    paths = []
    for i in range(nodes):
        k = rng.randrange(n_streets)
        if k < len(ys):
            pos = (rng.uniform(0.0, area.width), ys[k])
            options = [(1, 0), (-1, 0)]
        else:
            pos = (xs[k - len(ys)], rng.uniform(0.0, area.height))
            options = [(0, 1), (0, -1)]
        options = [h for h in options if _advance(pos, h, xs, ys) is not None]
        heading = options[rng.randrange(len(options))]
        if params.v_max <= 0.0:
            paths.append(MobilityPath(i, [WaypointSegment(0.0, pos, pos, 0.0, duration)], duration))
            continue
        t = 0.0
        segs = []
        while t < duration:
            dest = _advance(pos, heading, xs, ys)
            speed = rng.uniform(params.v_min, params.v_max)
            seg = WaypointSegment(t, pos, dest, speed, 0.0)
            segs.append(seg)
            t = seg.end_time
            pos = dest
            heading = _choose_turn(rng, pos, heading, xs, ys, params.turn_probs)
        paths.append(MobilityPath(i, segs, duration))
    return paths


def _choose_turn(rng, pos, heading, xs, ys, probs):
    dx, dy = heading
    candidates = [((-dy, dx), probs[0]), ((dy, -dx), probs[1]), ((dx, dy), probs[2])]
    possible = [(h, p) for h, p in candidates if _advance(pos, h, xs, ys) is not None]
    total = sum(p for _, p in possible)
    if total <= 0.0:
        possible = [(h, 1.0) for h, _ in possible]
        total = float(len(possible))
    u = rng.random() * total
    acc = 0.0
    for h, p in possible:
        acc += p
        if u < acc:
            return h
    return possible[-1][0]


def street_distance(params: ManhattanParams, area: Area, pts: np.ndarray) -> np.ndarray:
    """Distance from each (x, y) row of ``pts`` to the nearest street line."""
    xs, ys = params.grid(area)
    pts = np.asarray(pts, dtype=float)
    dx = np.min(np.abs(pts[..., 0, None] - np.asarray(xs)), axis=-1)
    dy = np.min(np.abs(pts[..., 1, None] - np.asarray(ys)), axis=-1)
    return np.minimum(dx, dy)


# --------------------------------------------------------------------------
# ns-2 trace format

_SET_RE = re.compile(r'^\$node_\((\d+)\)\s+set\s+([XYZ])_\s+(\S+)$')
_DEST_RE = re.compile(r'^\$ns_\s+at\s+(\S+)\s+"\$node_\((\d+)\)\s+setdest\s+(\S+)\s+(\S+)\s+(\S+)"$')


def _fmt(v: float) -> str:
    return repr(float(v))


def export_ns2(paths: Iterable[MobilityPath]) -> str:
    lines = []
    paths = list(paths)
    for p in paths:
        x, y = p.segments[0].start_pos
        lines.append(f"$node_({p.node}) set X_ {_fmt(x)}")
        lines.append(f"$node_({p.node}) set Y_ {_fmt(y)}")
        lines.append(f"$node_({p.node}) set Z_ 0.0")
    for p in paths:
        for s in p.segments:
            if s.speed > 0.0:
                dx, dy = s.dest_pos
                lines.append(f'$ns_ at {_fmt(s.start_time)} "$node_({p.node}) setdest '
                             f'{_fmt(dx)} {_fmt(dy)} {_fmt(s.speed)}"')
    return "\n".join(lines) + "\n"


def import_ns2(text: str, duration: float | None = None) -> list[MobilityPath]:
    """Parse an ns-2 mobility trace; movement may be redirected mid-leg as in ns-2."""
    init: dict[int, dict[str, float]] = {}
    moves: dict[int, list[tuple[float, float, float, float]]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            m = _SET_RE.match(line)
            if m:
                init.setdefault(int(m.group(1)), {})[m.group(2)] = float(m.group(3))
                continue
            m = _DEST_RE.match(line)
            if m:
                t, node, x, y, v = float(m.group(1)), int(m.group(2)), *map(float, m.group(3, 4, 5))
                if t < 0 or v < 0:
                    raise ValueError("negative time or speed")
                moves.setdefault(node, []).append((t, x, y, v))
                continue
        except ValueError as exc:
            raise ParseError(lineno, f"bad number in {line!r}: {exc}") from None
        raise ParseError(lineno, f"unrecognised trace line {line!r}")

    nodes = sorted(set(init) | set(moves))
    for n in nodes:
        missing = {"X", "Y"} - set(init.get(n, {}))
        if missing:
            raise ParseError(0, f"node {n} has no initial {'/'.join(sorted(missing))}_ position")

    built: dict[int, list[WaypointSegment]] = {}
    end = 0.0
    for n in nodes:
        pos = (init[n]["X"], init[n]["Y"])
        segs = [WaypointSegment(0.0, pos, pos, 0.0, 0.0)]
        for t, x, y, v in sorted(moves.get(n, []), key=lambda m: m[0]):
            last = segs[-1]
            here = last.at(t)
            if t < last.arrival_time - 1e-9:
                # redirected before arrival: cut the old leg short
                segs[-1] = WaypointSegment(last.start_time, last.start_pos, here, last.speed, 0.0)
            else:
                segs[-1] = WaypointSegment(last.start_time, last.start_pos, last.dest_pos, last.speed,
                                           max(t - last.arrival_time, 0.0))
                here = last.dest_pos
            segs.append(WaypointSegment(t, here, (x, y), v, 0.0))
        if segs[0].pause_after == 0.0 and len(segs) > 1 and segs[1].start_time == 0.0:
            segs = segs[1:]
        built[n] = segs
        end = max(end, segs[-1].arrival_time)
    if duration is None:
        duration = end
    paths = []
    for n in nodes:
        segs = built[n]
        last = segs[-1]
        segs[-1] = WaypointSegment(last.start_time, last.start_pos, last.dest_pos, last.speed,
                                   max(duration - last.arrival_time, 0.0))
        paths.append(MobilityPath(n, segs, duration))
    return paths


# --------------------------------------------------------------------------
# mobility metrics


def sample_times(duration: float, dt: float) -> np.ndarray:
    if dt <= 0:
        raise InvalidParams("sample_dt must be > 0")
    k = int(math.floor(duration / dt + 1e-9))
    return np.arange(k + 1) * dt


def link_changes(paths: Sequence[MobilityPath], range_m: float, sample_dt: float = 0.1,
                 duration: float | None = None) -> int:
    """Up/down connectivity transitions per unordered pair between consecutive samples."""
    if duration is None:
        duration = min(p.duration for p in paths)
    times = sample_times(duration, sample_dt)
    table = PositionTable(paths)
    n = len(paths)
    iu = np.triu_indices(n, 1)
    r2 = range_m * range_m
    total = 0
    prev = None
    chunk = 512
    for start in range(0, len(times), chunk):
        pos = table.sample(times[start:start + chunk])
        diff = pos[:, :, None, :] - pos[:, None, :, :]
        linked = (diff ** 2).sum(-1)[:, iu[0], iu[1]] <= r2
        if prev is not None:
            total += int(np.count_nonzero(linked[0] != prev))
        total += int(np.count_nonzero(linked[1:] != linked[:-1]))
        prev = linked[-1]
    return total
