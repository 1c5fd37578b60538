"""Vehicle traces: SUMO FCD / CSV ingestion, seeded synthetic mobility, request snapshots."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
import csv
import io
import math
from typing import IO, NamedTuple
from xml.parsers import expat

import numpy as np

from .domain import Point, RequestSnapshot, ServiceRequest, ServiceSpec

CSV_HEADER = ("time", "vehicle_id", "x", "y", "speed")
DEFAULT_AREA: Point = (math.sqrt(3e6), math.sqrt(3e6))


class TraceError(ValueError):
    pass


class MalformedXml(TraceError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MissingAttribute(TraceError):
    pass


class NonMonotonicTime(TraceError):
    pass


class MalformedRow(TraceError):
    pass


class TraceSample(NamedTuple):
    # a tuple rather than a frozen dataclass: traces run to 10^5+ samples and construction dominates parsing
    time: float
    vehicle_id: str
    position: Point
    speed: float | None = None


def _check_order(prev: float | None, t: float, where: str) -> None:
    if prev is not None and t < prev:
        raise NonMonotonicTime(f"{where}: time {t} follows {prev}")


def parse_fcd(stream: IO | str) -> list[TraceSample]:
    """Read a SUMO floating-car-data export.

    ``stream`` is a path or a binary/text file object. Attributes other than
    ``id``, ``x``, ``y`` and ``speed`` are ignored.
    """
    samples: list[TraceSample] = []
    state = {"time": None, "prev": None}
    append = samples.append

    def start(tag, attrs):
        if tag == "vehicle":
            t = state["time"]
            if t is None:
                raise MalformedXml("vehicle element outside a timestep")
            try:
                vid, x, y = attrs["id"], float(attrs["x"]), float(attrs["y"])
            except KeyError as exc:
                raise MissingAttribute(f"vehicle at time {t} lacks {exc.args[0]!r}") from None
            speed = attrs.get("speed")
            append(TraceSample(t, vid, (x, y), None if speed is None else float(speed)))
        elif tag == "timestep":
            raw = attrs.get("time")
            if raw is None:
                raise MissingAttribute("timestep element without time")
            t = float(raw)
            _check_order(state["prev"], t, "timestep")
            state["time"] = state["prev"] = t

    def end(tag):
        if tag == "timestep":
            state["time"] = None

    parser = expat.ParserCreate()
    parser.buffer_text = True
    parser.StartElementHandler = start
    parser.EndElementHandler = end
    try:
        if isinstance(stream, str):
            with open(stream, "rb") as fh:
                parser.ParseFile(fh)
        else:
            data = stream.read()
            parser.Parse(data, True)
    except expat.ExpatError as exc:
        raise MalformedXml(expat.errors.messages[exc.code], exc.lineno) from None
    return samples


def parse_csv_trace(stream: IO[str] | str) -> list[TraceSample]:
    """Read ``time,vehicle_id,x,y[,speed]`` rows; a path or text stream is accepted."""
    if isinstance(stream, str):
        with open(stream, newline="", encoding="utf-8") as fh:
            return parse_csv_trace(fh)
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        return []
    header = [h.strip() for h in header]
    if tuple(header) not in (CSV_HEADER, CSV_HEADER[:4]):
        raise MalformedRow(f"line 1: header must be {','.join(CSV_HEADER)}, got {','.join(header)}")
    width = len(header)
    samples = []
    prev = None
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != width:
            raise MalformedRow(f"line {lineno}: expected {width} fields, got {len(row)}")
        try:
            t, x, y = float(row[0]), float(row[2]), float(row[3])
            speed = float(row[4]) if width == 5 and row[4] != "" else None
        except ValueError as exc:
            raise MalformedRow(f"line {lineno}: {exc}") from None
        _check_order(prev, t, f"line {lineno}")
        prev = t
        samples.append(TraceSample(t, row[1], (x, y), speed))
    return samples


def emit_csv(samples: Iterable[TraceSample], stream: IO[str] | None = None) -> str | None:
    """Write samples in the CSV trace format. Returns the text when no stream is given."""
    out = stream if stream is not None else io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in samples:
        writer.writerow(
            (repr(s.time), s.vehicle_id, repr(s.position[0]), repr(s.position[1]), "" if s.speed is None else repr(s.speed))
        )
    return out.getvalue() if stream is None else None


def emit_fcd(samples: Iterable[TraceSample], stream: IO[str]) -> None:
    """Write samples as FCD XML (``<fcd-export><timestep><vehicle/>...``)."""
    from xml.sax.saxutils import quoteattr

    stream.write('<?xml version="1.0" encoding="UTF-8"?>\n<fcd-export>\n')
    current = None
    for s in samples:
        if s.time != current:
            if current is not None:
                stream.write("  </timestep>\n")
            stream.write(f'  <timestep time="{s.time!r}">\n')
            current = s.time
        speed = "" if s.speed is None else f' speed="{s.speed!r}"'
        stream.write(f'    <vehicle id={quoteattr(s.vehicle_id)} x="{s.position[0]!r}" y="{s.position[1]!r}"{speed}/>\n')
    if current is not None:
        stream.write("  </timestep>\n")
    stream.write("</fcd-export>\n")


def generate_synthetic(
    area: Point = DEFAULT_AREA,
    vehicle_count: int = 100,
    horizon: float = 500.0,
    tick: float = 1.0,
    speed_range: Point = (3.0, 14.0),
    seed: int = 0,
    depart_window: float = 0.0,
) -> list[TraceSample]:
    """Random-waypoint traces sampled every ``tick`` seconds from ``tick`` to ``horizon``.

    Each vehicle starts at a uniform point, drives straight towards a uniform
    destination at a uniform speed, and draws a new destination and speed on
    arrival. Departures are spread uniformly over ``[tick, tick + depart_window]``;
    a vehicle has no samples before it departs.
    """
    width, height = area
    lo, hi = speed_range
    rng = np.random.default_rng(seed)
    n = vehicle_count
    ids = [f"veh{k}" for k in range(n)]
    pos = rng.uniform((0.0, 0.0), (width, height), size=(n, 2))
    dest = rng.uniform((0.0, 0.0), (width, height), size=(n, 2))
    speed = rng.uniform(lo, hi, size=n)
    depart = tick + (rng.uniform(0.0, depart_window, size=n) if depart_window > 0 else np.zeros(n))

    samples: list[TraceSample] = []
    steps = int(math.floor(horizon / tick + 1e-9))
    for k in range(1, steps + 1):
        t = k * tick
        active = depart <= t + 1e-9
        if k > 1:
            moving = active & (depart <= t - tick + 1e-9)
            delta = dest - pos
            dist = np.hypot(delta[:, 0], delta[:, 1])
            step = speed * tick
            arrive = moving & (dist <= step)
            go = moving & ~arrive
            frac = np.divide(step, dist, out=np.zeros(n), where=dist > 0)
            pos[go] += delta[go] * frac[go, None]
            pos[arrive] = dest[arrive]
            n_arr = int(arrive.sum())
            if n_arr:
                dest[arrive] = rng.uniform((0.0, 0.0), (width, height), size=(n_arr, 2))
                speed[arrive] = rng.uniform(lo, hi, size=n_arr)
            np.clip(pos[:, 0], 0.0, width, out=pos[:, 0])
            np.clip(pos[:, 1], 0.0, height, out=pos[:, 1])
        for v in np.flatnonzero(active):
            samples.append(TraceSample(t, ids[v], (float(pos[v, 0]), float(pos[v, 1])), float(speed[v])))
    return samples


class TraceIndex:
    """Samples grouped by timestamp for per-tick lookup."""

    def __init__(self, samples: Iterable[TraceSample]):
        self._by_time: dict[float, list[TraceSample]] = {}
        for s in samples:
            self._by_time.setdefault(s.time, []).append(s)

    def at(self, time: float) -> list[TraceSample]:
        return self._by_time.get(time, [])

    @property
    def times(self) -> list[float]:
        return sorted(self._by_time)

    def __len__(self) -> int:
        return sum(len(v) for v in self._by_time.values())


class Hotspots:
    """Per-service demand centers drifting over the area by random waypoint.

    A vehicle at distance ``d_s`` from the center of service ``s`` picks it
    with probability ``(1 - floor) * softmax(-d_s^2 / (2 radius^2)) + floor / n``.
    A small radius makes this "request the service of the nearest center".
    """

    def __init__(self, n_services: int, area: Point, radius: float, speed: float, floor: float, rng: np.random.Generator):
        self.area = area
        self.radius = radius
        self.speed = speed
        self.floor = floor
        self._rng = rng
        self.centers = rng.uniform((0.0, 0.0), area, size=(n_services, 2))
        self._targets = rng.uniform((0.0, 0.0), area, size=(n_services, 2))

    def step(self, dt: float) -> None:
        delta = self._targets - self.centers
        dist = np.hypot(delta[:, 0], delta[:, 1])
        reach = self.speed * dt
        for s in range(len(self.centers)):
            if dist[s] <= reach:
                self.centers[s] = self._targets[s]
                self._targets[s] = self._rng.uniform((0.0, 0.0), self.area)
            else:
                self.centers[s] += delta[s] * (reach / dist[s])

    def weights(self, positions) -> np.ndarray:
        """Service probabilities, one row per position in an ``(n, 2)`` array."""
        p = np.atleast_2d(np.asarray(positions, dtype=float))
        d2 = ((p[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        logits = -d2 / (2 * self.radius**2)
        w = np.exp(logits - logits.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        return (1 - self.floor) * w + self.floor / w.shape[1]


class DemandProfile:
    """Which service each vehicle currently requests.

    A vehicle seen for the first time draws a service; on every later tick it
    redraws with probability ``churn_rate``. Draws are uniform unless
    ``hotspots`` is given, in which case they depend on the vehicle's current
    position. Vehicles are processed in sorted-id order, so the sequence
    depends only on the seed and the trace.
    """

    def __init__(
        self,
        n_services: int,
        churn_rate: float = 0.02,
        seed: int = 0,
        subscription: dict[str, int] | None = None,
        hotspot_radius: float = 0.0,
        hotspot_speed: float = 0.0,
        hotspot_floor: float = 0.0,
        area: Point = DEFAULT_AREA,
    ):
        if not 0 <= churn_rate <= 1:
            raise ValueError("churn_rate must lie in [0, 1]")
        self.n_services = n_services
        self.churn_rate = churn_rate
        self.subscription: dict[str, int] = dict(subscription or {})
        for vid, s in self.subscription.items():
            if not 0 <= s < n_services:
                raise ValueError(f"vehicle {vid} subscribes to unknown service {s}")
        self._rng = np.random.default_rng(seed)
        self.hotspots = None
        if hotspot_radius > 0:
            # separate stream so hotspot motion does not shift the subscription draws
            self.hotspots = Hotspots(
                n_services, area, hotspot_radius, hotspot_speed, hotspot_floor,
                np.random.default_rng([seed, 1]),
            )
        self._last_time: float | None = None

    def _draw(self, vids: list[str], positions: dict) -> None:
        """Draw a fresh service for each of ``vids`` (in order) from one batch of uniforms."""
        u = self._rng.random(len(vids))
        w = np.full((len(vids), self.n_services), 1.0 / self.n_services)
        if self.hotspots is not None:
            # vehicles without a known position fall back to uniform
            located = [k for k, v in enumerate(vids) if positions.get(v) is not None]
            if located:
                w[located] = self.hotspots.weights([positions[vids[k]] for k in located])
        cdf = np.cumsum(w, axis=1)
        picks = np.minimum((u[:, None] * cdf[:, -1:] >= cdf).sum(axis=1), self.n_services - 1)
        for v, s in zip(vids, picks.tolist()):
            self.subscription[v] = s

    def advance(self, time: float, positions: dict[str, Point] | Iterable[str]) -> None:
        """Apply this tick's churn once, then enrol any unseen vehicles.

        ``positions`` maps present vehicle ids to their locations (a bare
        iterable of ids is enough for uniform draws).
        """
        if self._last_time is not None and time <= self._last_time:
            return
        if not isinstance(positions, dict):
            positions = {vid: None for vid in positions}
        first_tick = self._last_time is None
        if self.hotspots is not None and not first_tick:
            self.hotspots.step(time - self._last_time)
        self._last_time = time
        if not first_tick and self.churn_rate > 0:
            known = sorted(self.subscription)
            hit = self._rng.random(len(known)) < self.churn_rate
            self._draw([v for v, h in zip(known, hit) if h], positions)
        new = sorted(positions.keys() - self.subscription.keys())
        if new:
            self._draw(new, positions)

    def service_of(self, vehicle_id: str) -> int:
        return self.subscription[vehicle_id]


def snapshot_at(
    samples: TraceIndex | Sequence[TraceSample],
    time: float,
    profile: DemandProfile,
    services: Sequence[ServiceSpec],
) -> RequestSnapshot:
    """Turn the vehicles present at ``time`` into one request each."""
    present = samples.at(time) if isinstance(samples, TraceIndex) else [s for s in samples if s.time == time]
    profile.advance(time, {s.vehicle_id: s.position for s in present})
    valid = {s.id for s in services}
    requests = []
    for s in sorted(present, key=lambda x: x.vehicle_id):
        sid = profile.service_of(s.vehicle_id)
        if sid in valid:
            requests.append(ServiceRequest(s.vehicle_id, s.position, time, sid))
    return RequestSnapshot.from_requests(time, requests)


def place_enbs(area: Point = DEFAULT_AREA, isd: float = 500.0) -> list[Point]:
    """Square grid of sites spaced ``isd`` apart, centered in the area, row-major (y then x)."""
    if isd <= 0:
        raise ValueError("isd must be positive")
    width, height = area

    def axis(length: float) -> list[float]:
        n = int(math.floor(length / isd + 1e-9)) + 1
        start = (length - (n - 1) * isd) / 2
        return [start + k * isd for k in range(n)]

    return [(x, y) for y in axis(height) for x in axis(width)]
