"""Synthetic contact structures and outbreak record streams.

The generator grows attachment trees (preferential or uniform) and runs
a discrete-time susceptible-to-infected process over them, emitting
case records with known ground truth: who infected whom, when, where.
One simulation step is one day. Everything is a deterministic function
of the config seed; replications derive independent substreams from
(seed, purpose tag, replication index), so serial and parallel runs of
the replication loop agree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import EARTH_RADIUS_KM
from .records import CaseRecord, GeoPoint, normalize_timestamp, parse_timestamp

TOPOLOGIES = ("preferential-attachment", "uniform-attachment")

STEP = timedelta(days=1)
_KM_PER_DEG_LAT = math.pi * EARTH_RADIUS_KM / 180.0

# Substream tags; distinct draws must never share a stream.
_TAG_NETWORK = 1
_TAG_SPREAD = 2
_TAG_GEO = 3
_TAG_CURVE = 4

_CONFIG_KEYS = {"topology", "n_population", "p_transmit", "n_steps",
                "index_cases", "jitter_km", "seed"}
_DEFAULT_START = "2014-03-01"


def load_regions() -> dict[str, GeoPoint]:
    """Named outbreak-origin presets bundled with the package."""
    text = (resources.files("outbreaklens") / "data" / "regions.json").read_text("utf-8")
    raw = json.loads(text)
    return {name: GeoPoint(v["longitude"], v["latitude"]) for name, v in raw.items()}


@dataclass(frozen=True)
class IndexCase:
    """Where and when one seeded infection enters the population."""

    location: GeoPoint
    start: datetime

    def __post_init__(self):
        object.__setattr__(self, "start", normalize_timestamp(self.start))


@dataclass(frozen=True)
class SimConfig:
    topology: str = "preferential-attachment"
    n_population: int = 1000
    p_transmit: float = 0.1
    n_steps: int = 60
    index_cases: tuple[IndexCase, ...] = ()
    jitter_km: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.n_population < 1:
            raise ValueError("n_population must be at least 1")
        if not 0.0 <= self.p_transmit <= 1.0:
            raise ValueError("p_transmit must lie in [0, 1]")
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        if self.jitter_km < 0:
            raise ValueError("jitter_km must be non-negative")
        # numpy seed sequences take unsigned 64-bit entropy
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "index_cases", tuple(self.index_cases))
        if len(self.index_cases) > self.n_population:
            raise ValueError("more index cases than individuals")

    @classmethod
    def from_json(cls, doc: str | Mapping) -> "SimConfig":
        """Build a config from a single JSON document.

        ``index_cases`` entries give either a preset ``region`` name or
        explicit ``longitude``/``latitude``, plus an optional ``start``
        (default 2014-03-01). Omitted entirely, one index case at the
        first bundled region is used.
        """
        obj = json.loads(doc) if isinstance(doc, str) else dict(doc)
        if not isinstance(obj, dict):
            raise ValueError("sim config must be a JSON object")
        unknown = set(obj) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        regions = load_regions()
        entries = obj.get("index_cases")
        if entries is None:
            entries = [{"region": next(iter(regions))}]
        if not isinstance(entries, list) or not entries:
            raise ValueError("index_cases must be a non-empty list")
        index_cases = []
        for entry in entries:
            if not isinstance(entry, dict):
                raise ValueError("each index case must be an object")
            if "region" in entry:
                name = entry["region"]
                if name not in regions:
                    raise ValueError(f"unknown region {name!r}; "
                                     f"presets: {sorted(regions)}")
                loc = regions[name]
            else:
                try:
                    loc = GeoPoint(float(entry["longitude"]),
                                   float(entry["latitude"]))
                except KeyError as exc:
                    raise ValueError(f"index case needs region or "
                                     f"longitude/latitude: missing {exc}") from None
            start = parse_timestamp(str(entry.get("start", _DEFAULT_START)))
            index_cases.append(IndexCase(loc, start))
        kwargs = {k: obj[k] for k in _CONFIG_KEYS - {"index_cases"} if k in obj}
        return cls(index_cases=tuple(index_cases), **kwargs)


@dataclass(frozen=True)
class SyntheticNetwork:
    """A simple connected graph over individuals 0..n-1 with generation
    metadata, so runs can be reproduced from the record alone."""

    n: int
    edges: tuple[tuple[int, int], ...]
    topology: str
    seed: int

    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        """Neighbor lists, each sorted ascending."""
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in self.edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        return tuple(tuple(sorted(ns)) for ns in nbrs)


def _attachment_edges(topology: str, n: int,
                      rng: np.random.Generator) -> tuple[tuple[int, int], ...]:
    """Grow an attachment tree. Preferential attachment picks the target
    from the repeated-endpoints list, so the pick probability is
    proportional to current degree; uniform attachment picks any
    existing node with equal probability."""
    edges: list[tuple[int, int]] = []
    if topology == "preferential-attachment":
        endpoints = [0]
        for new in range(1, n):
            target = endpoints[int(rng.integers(0, len(endpoints)))]
            edges.append((target, new))
            endpoints.append(target)
            endpoints.append(new)
    else:
        for new in range(1, n):
            target = int(rng.integers(0, new))
            edges.append((target, new))
    return tuple(edges)


def generate_network(config: SimConfig) -> SyntheticNetwork:
    """Deterministic synthetic contact structure for the config seed."""
    rng = np.random.default_rng([config.seed, _TAG_NETWORK])
    edges = _attachment_edges(config.topology, config.n_population, rng)
    return SyntheticNetwork(config.n_population, edges, config.topology,
                            config.seed)


def _jittered(loc: GeoPoint, dx_km: float, dy_km: float) -> GeoPoint:
    lat = loc.latitude + dy_km / _KM_PER_DEG_LAT
    lat = max(-90.0, min(90.0, lat))
    # longitude degrees shrink with latitude; clamp the scale near poles
    km_per_deg_lon = _KM_PER_DEG_LAT * max(math.cos(math.radians(lat)), 0.01)
    lon = loc.longitude + dx_km / km_per_deg_lon
    lon = ((lon + 180.0) % 360.0) - 180.0
    return GeoPoint(lon, lat)


def simulate_outbreak(network: SyntheticNetwork,
                      config: SimConfig) -> tuple[CaseRecord, ...]:
    """Run the susceptible-to-infected process and emit case records.

    Each step, every individual infected on an earlier step transmits
    across each incident edge with probability p_transmit; a newly
    infected individual emits a record whose source is its infector and
    whose location is the infector's location plus isotropic Gaussian
    jitter of scale jitter_km. Index cases emit source-free records at
    their configured locations. When several infectors reach the same
    susceptible individual in one step, the smallest infector id wins.

    Geography draws use a separate substream from transmission draws,
    so the infection tree is invariant to jitter_km.
    """
    if not config.index_cases:
        raise ValueError("config has no index cases")
    if len(config.index_cases) > network.n:
        raise ValueError("more index cases than individuals")

    rng_spread = np.random.default_rng([config.seed, _TAG_SPREAD])
    rng_geo = np.random.default_rng([config.seed, _TAG_GEO])
    adjacency = network.adjacency()

    nodes = rng_spread.choice(network.n, size=len(config.index_cases),
                              replace=False)
    base = min(ic.start for ic in config.index_cases)
    activations: dict[int, list[tuple[int, IndexCase]]] = {}
    for node, ic in zip((int(v) for v in nodes), config.index_cases):
        offset = ic.start - base
        step_idx = -((-offset) // STEP)  # ceil; late starts snap forward
        activations.setdefault(step_idx, []).append((node, ic))

    records: list[CaseRecord] = []
    infected_at: dict[int, int] = {}
    locations: dict[int, GeoPoint] = {}
    ids: dict[int, str] = {}
    seq = 0

    def emit(node: int, source: int | None, instant: datetime,
             loc: GeoPoint) -> None:
        nonlocal seq
        seq += 1
        case_id = f"C{seq:06d}"
        ids[node] = case_id
        locations[node] = loc
        records.append(CaseRecord(case_id,
                                  None if source is None else ids[source],
                                  instant, loc))

    p = config.p_transmit
    for step_idx in range(config.n_steps + 1):
        instant = base + step_idx * STEP
        for node, ic in activations.get(step_idx, ()):
            if node not in infected_at:  # may already be infected by spread
                infected_at[node] = step_idx
                emit(node, None, instant, ic.location)
        if step_idx == 0 or p == 0.0:
            continue
        claimed: dict[int, int] = {}  # target -> infector, smallest id first
        for node in sorted(infected_at):
            if infected_at[node] >= step_idx:
                continue  # infected this step; transmits from the next one
            for nbr in adjacency[node]:
                if nbr in infected_at or nbr in claimed:
                    continue
                if rng_spread.random() < p:
                    claimed[nbr] = node
        for target, infector in claimed.items():
            infected_at[target] = step_idx
            if config.jitter_km > 0:
                dx, dy = rng_geo.normal(0.0, config.jitter_km, size=2)
            else:
                dx = dy = 0.0
            emit(target, infector, instant,
                 _jittered(locations[infector], float(dx), float(dy)))
    return tuple(records)


def _geometric_delays(us: np.ndarray, p: float) -> np.ndarray | None:
    """Per-edge transmission delays via inverse-CDF coupling: the same
    uniforms produce delays that are non-increasing in p, so final sizes
    are monotone in p within a replication. Returns None when p = 0
    (no transmission, infinite delay)."""
    if p == 0.0:
        return None
    if p == 1.0:
        return np.ones(len(us), dtype=np.int64)
    delays = np.ceil(np.log1p(-us) / math.log1p(-p)).astype(np.int64)
    return np.maximum(delays, 1)


def final_size_curve(topology: str, p_grid: Sequence[float],
                     replications: int, seed: int, *,
                     n_population: int = 1000, n_steps: int = 40,
                     n_index: int = 1, detail: bool = False):
    """Mean infected fraction after n_steps, per transmission probability.

    Uses the first-passage form of the process: on a tree, the step at
    which an individual is infected equals the sum of independent
    Geometric(p) delays along its unique path from the nearest index
    case, which is exact for the step dynamics of simulate_outbreak.
    One uniform per edge per replication is shared across the whole
    grid (common random numbers).

    Returns a tuple of (p, mean fraction) pairs; with ``detail=True``,
    returns (means, per_replication) where per_replication[r][i] is the
    fraction for p_grid[i] in replication r.
    """
    if topology not in TOPOLOGIES:
        raise ValueError(f"unknown topology {topology!r}")
    if replications < 1:
        raise ValueError("replications must be at least 1")
    ps = [float(p) for p in p_grid]
    if any(not 0.0 <= p <= 1.0 for p in ps):
        raise ValueError("p_grid values must lie in [0, 1]")
    if not 1 <= n_index <= n_population:
        raise ValueError("n_index must lie in [1, n_population]")

    per_rep: list[tuple[float, ...]] = []
    for rep in range(replications):
        rng = np.random.default_rng([seed, _TAG_CURVE, rep])
        edges = _attachment_edges(topology, n_population, rng)
        sources = [int(v) for v in
                   rng.choice(n_population, size=n_index, replace=False)]
        us = rng.random(len(edges))
        incident: list[list[tuple[int, int]]] = [[] for _ in range(n_population)]
        for ei, (a, b) in enumerate(edges):
            incident[a].append((b, ei))
            incident[b].append((a, ei))

        fractions = []
        for p in ps:
            delays = _geometric_delays(us, p)
            if delays is None:
                fractions.append(n_index / n_population)
                continue
            best = {}
            for src in sources:
                # tree walk from each source; keep the earliest infection
                stack = [(src, 0)]
                seen = {src}
                while stack:
                    node, dist = stack.pop()
                    if dist <= n_steps and dist < best.get(node, n_steps + 1):
                        best[node] = dist
                    for nbr, ei in incident[node]:
                        if nbr in seen:
                            continue
                        seen.add(nbr)
                        nd = dist + int(delays[ei])
                        if nd <= n_steps:
                            stack.append((nbr, nd))
            fractions.append(len(best) / n_population)
        per_rep.append(tuple(fractions))

    means = tuple((p, math.fsum(rep[i] for rep in per_rep) / replications)
                  for i, p in enumerate(ps))
    if detail:
        return means, tuple(per_rep)
    return means
