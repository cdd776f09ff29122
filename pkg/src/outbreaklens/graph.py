"""Contact-graph construction, time windowing, and degree measurements.

A validated record stream turns into an undirected graph: one vertex per
case, one edge per resolved source link. Graph snapshots are immutable
value objects; every measurement here is a pure function, so windows can
be processed in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Iterable, Mapping, Union

from .records import CaseRecord, GeoPoint, ValidatedStream, format_timestamp, validate_stream

EARTH_RADIUS_KM = 6371.0
DEFAULT_DECAY_KM = 50.0


@dataclass(frozen=True)
class TimeWindow:
    """Half-open interval [start, end)."""

    start: datetime
    end: datetime

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError("window start must precede end")

    def contains(self, instant: datetime) -> bool:
        return self.start <= instant < self.end

    @property
    def duration(self) -> timedelta:
        return self.end - self.start


@dataclass(frozen=True)
class Edge:
    """Undirected contact edge. ``source``/``case`` keep the reported
    transmission direction as metadata; degree analysis ignores it."""

    source: str
    case: str
    weight: float


@dataclass(frozen=True)
class ContactGraph:
    """Immutable snapshot of the contact network.

    ``vertices`` maps case ids to their records in stream order; the
    iteration order of every derived measurement follows it, which keeps
    replays byte-for-byte reproducible. ``edges`` is keyed by the sorted
    id pair, so parallel edges cannot be represented. Treat both
    mappings as frozen; they are not defensively copied.
    """

    vertices: Mapping[str, CaseRecord]
    edges: Mapping[tuple[str, str], Edge]
    as_of: datetime | None = None

    def __post_init__(self):
        for key, edge in self.edges.items():
            a, b = key
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            if a not in self.vertices or b not in self.vertices:
                raise ValueError(f"edge {key!r} has an endpoint outside the vertex set")
            if not 0.0 <= edge.weight <= 1.0:
                raise ValueError(f"edge weight out of [0, 1]: {edge.weight!r}")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> dict[str, int]:
        """Degree per vertex, in vertex insertion order."""
        out = {case_id: 0 for case_id in self.vertices}
        for a, b in self.edges:
            out[a] += 1
            out[b] += 1
        return out

    def n_components(self) -> int:
        """Connected components (isolated vertices count singly)."""
        parent = {v: v for v in self.vertices}

        def find(v: str) -> str:
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for a, b in self.edges:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        return sum(1 for v in self.vertices if find(v) == v)


@dataclass(frozen=True)
class DegreeSample:
    """Multiset of vertex degrees used as a fitting sample.

    ``include_isolated`` records whether zero-degree vertices were kept,
    so a report can say what its sample actually was.
    """

    degrees: tuple[int, ...]
    include_isolated: bool = False

    @property
    def n(self) -> int:
        return len(self.degrees)

    def __iter__(self):
        return iter(self.degrees)

    def __len__(self) -> int:
        return len(self.degrees)


StreamLike = Union[ValidatedStream, Iterable[CaseRecord]]


def build_graph(stream: StreamLike, window: TimeWindow | None = None, *,
                decay_km: float | None = None) -> ContactGraph:
    """Build the contact graph for a window (or the whole stream).

    A record contributes a vertex when its timestamp lies in the window;
    an edge {source, case} appears only when BOTH endpoint records lie in
    the window, so every snapshot is a self-contained graph. Weights
    default to 1.0 (a recorded link is a realized transmission); pass
    ``decay_km`` to use exp(-distance/decay_km) instead. Weights never
    affect degree statistics.
    """
    if decay_km is not None and decay_km <= 0:
        raise ValueError("decay_km must be positive")
    validated = validate_stream(stream)
    vertices: dict[str, CaseRecord] = {}
    for rec in validated.records:
        if window is None or window.contains(rec.timestamp):
            vertices[rec.case_id] = rec
    edges: dict[tuple[str, str], Edge] = {}
    for rec in vertices.values():
        src = rec.source_id
        if src is None or src not in vertices:
            continue
        if decay_km is None:
            weight = 1.0
        else:
            dist = geo_distance(vertices[src].location, rec.location)
            weight = math.exp(-dist / decay_km)
        key = (src, rec.case_id) if src < rec.case_id else (rec.case_id, src)
        edges[key] = Edge(source=src, case=rec.case_id, weight=weight)
    if window is not None:
        as_of = window.end
    else:
        as_of = max((r.timestamp for r in vertices.values()), default=None)
    return ContactGraph(vertices, edges, as_of)


def subnetwork(stream: StreamLike, window: TimeWindow) -> ContactGraph:
    """The contact graph restricted to a window. Composable: the
    subnetwork of a stream equals the graph of the sub-stream."""
    if window is None:
        raise ValueError("subnetwork requires a window")
    return build_graph(stream, window)


def degree_sample(graph: ContactGraph, include_isolated: bool = False) -> DegreeSample:
    """Degrees of all vertices, in vertex order. Zero-degree vertices are
    dropped unless ``include_isolated`` is set."""
    values = graph.degrees().values()
    if include_isolated:
        degrees = tuple(values)
    else:
        degrees = tuple(d for d in values if d > 0)
    return DegreeSample(degrees, include_isolated)


def degree_distribution(sample: DegreeSample) -> dict[int, float]:
    """Empirical PMF over observed degrees, keyed in ascending order."""
    if sample.n == 0:
        raise ValueError("empty degree sample")
    counts: dict[int, int] = {}
    for d in sample.degrees:
        counts[d] = counts.get(d, 0) + 1
    n = sample.n
    return {d: counts[d] / n for d in sorted(counts)}


def geo_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in kilometres (haversine, sphere radius
    6371.0 km). Symmetric, non-negative, zero only for identical
    coordinates."""
    lon1, lat1, lon2, lat2 = map(
        math.radians, (a.longitude, a.latitude, b.longitude, b.latitude))
    h = (math.sin((lat2 - lat1) / 2.0) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2.0) ** 2)
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def edge_list_text(graph: ContactGraph) -> str:
    """Tab-separated edge list ``id1<TAB>id2<TAB>weight``, one per line."""
    lines = [f"{a}\t{b}\t{edge.weight!r}" for (a, b), edge in graph.edges.items()]
    return "".join(line + "\n" for line in lines)


def vertex_table_text(graph: ContactGraph) -> str:
    """Tab-separated vertex table ``id<TAB>lon<TAB>lat<TAB>timestamp``."""
    lines = [
        f"{rec.case_id}\t{rec.location.longitude!r}\t{rec.location.latitude!r}"
        f"\t{format_timestamp(rec.timestamp)}"
        for rec in graph.vertices.values()
    ]
    return "".join(line + "\n" for line in lines)
