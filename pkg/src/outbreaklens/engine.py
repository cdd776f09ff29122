"""Streaming recognition of contact-network structure.

Feeds the record stream through a window schedule, maintains the graph
incrementally, and emits one structure report per closed window. A
window closes when the watermark (largest event timestamp seen) passes
its end; flushing the stream closes every remaining scheduled window.

Ingestion is single-threaded and ordered. Closed windows could be
fitted in parallel (fitting is pure over immutable samples); emission
preserves window order either way.

For timestamp-ordered feeds every emitted report is field-identical to
the offline pipeline run on the same window. Out-of-order feeds keep
exact vertex/edge/degree counts, but the fitting sample follows arrival
order rather than timestamp order, and late records follow the window
mode's policy: tumbling windows reject them with a diagnostic (their
report is already out), cumulative windows absorb them into the next
prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Iterable, Iterator, Sequence

from .fitting import (FAMILIES, FitError, StructureClass, fit_family,
                      select_structure, RULES)
from .graph import (ContactGraph, DegreeSample, Edge, TimeWindow, build_graph,
                    degree_sample)
from .records import (CaseRecord, Diagnostic, ValidationError,
                      format_timestamp, normalize_timestamp)

WINDOW_MODES = ("tumbling", "cumulative")

_ONE_SECOND = timedelta(seconds=1)


@dataclass(frozen=True)
class WindowSpec:
    """How to slice the stream: disjoint fixed slices from an origin
    (tumbling) or growing prefixes of it (cumulative). ``count`` caps
    the schedule."""

    mode: str
    period: timedelta
    origin: datetime
    count: int | None = None

    def __post_init__(self):
        if self.mode not in WINDOW_MODES:
            raise ValueError(f"unknown window mode {self.mode!r}")
        if self.period <= timedelta(0):
            raise ValueError("window period must be positive")
        if self.count is not None and self.count < 1:
            raise ValueError("window count must be at least 1")
        object.__setattr__(self, "origin", normalize_timestamp(self.origin))

    def window(self, index: int) -> TimeWindow:
        if index < 0:
            raise ValueError("window index must be non-negative")
        end = self.origin + (index + 1) * self.period
        if self.mode == "tumbling":
            return TimeWindow(self.origin + index * self.period, end)
        return TimeWindow(self.origin, end)


def schedule_windows(spec: WindowSpec, extent: TimeWindow) -> tuple[TimeWindow, ...]:
    """The ordered windows a WindowSpec produces over the extent: enough
    periods to cover [origin, extent.end), capped by spec.count."""
    span = extent.end - spec.origin
    if span <= timedelta(0):
        return ()
    k = -((-span) // spec.period)  # ceil division for timedeltas
    if spec.count is not None:
        k = min(k, spec.count)
    return tuple(spec.window(i) for i in range(k))


@dataclass(frozen=True)
class StructureReport:
    """Per-window measurement: counts, the fitting sample size, and the
    classification with every family's fit (or its skip reason)."""

    window: TimeWindow | None
    n_vertices: int
    n_edges: int
    fitting_n: int
    mean_degree: float
    classification: StructureClass | None
    skipped: tuple[tuple[str, str], ...] = ()

    def to_json_dict(self) -> dict:
        if self.window is None:
            window = None
        else:
            window = {"start": format_timestamp(self.window.start),
                      "end": format_timestamp(self.window.end)}
        if self.classification is None:
            classification = None
        else:
            classification = {
                "chosen": self.classification.chosen,
                "rule": self.classification.rule,
                "fits": [fit.to_json_dict()
                         for fit in self.classification.all_fits],
            }
        return {
            "window": window,
            "n_vertices": self.n_vertices,
            "n_edges": self.n_edges,
            "fitting_n": self.fitting_n,
            "mean_degree": self.mean_degree,
            "classification": classification,
            "skipped": {family: reason for family, reason in self.skipped},
        }


def _canonical_families(families: Iterable[str]) -> tuple[str, ...]:
    requested = list(families)
    unknown = [f for f in requested if f not in FAMILIES]
    if unknown:
        raise ValueError(f"unknown families: {unknown}")
    if not requested:
        raise ValueError("at least one family is required")
    # canonical order keeps reports stable however the list was written
    return tuple(f for f in FAMILIES if f in set(requested))


def report_for_graph(graph: ContactGraph, window: TimeWindow | None,
                     families: Sequence[str], rule: str,
                     include_isolated: bool) -> StructureReport:
    """Measure and classify one graph snapshot. Shared by the batch
    pipeline and the engine so the two can never diverge."""
    sample = degree_sample(graph, include_isolated)
    fits = []
    skipped = []
    for family in families:
        try:
            fits.append(fit_family(family, sample))
        except FitError as exc:
            skipped.append((family, str(exc)))
    classification = select_structure(fits, rule) if fits else None
    n_vertices = graph.n_vertices
    mean_degree = (2.0 * graph.n_edges / n_vertices) if n_vertices else 0.0
    return StructureReport(window, n_vertices, graph.n_edges, sample.n,
                           mean_degree, classification, tuple(skipped))


def batch_report(stream, window: TimeWindow | None = None,
                 families: Iterable[str] = FAMILIES, rule: str = "min-se",
                 include_isolated: bool = False) -> StructureReport:
    """The offline pipeline: build the window's graph, fit every family,
    select. The engine's per-window contract is to match this."""
    fams = _canonical_families(families)
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}")
    graph = build_graph(stream, window)
    return report_for_graph(graph, window, fams, rule, include_isolated)


class _GraphBuilder:
    """Incremental vertex/edge state for one window's graph.

    Children that arrive before their source wait in ``pending`` and are
    linked when (if) the source shows up, which matches the batch rule
    that an edge exists only when both endpoints are in the window.
    """

    __slots__ = ("vertices", "edges", "pending")

    def __init__(self):
        self.vertices: dict[str, CaseRecord] = {}
        self.edges: dict[tuple[str, str], Edge] = {}
        self.pending: dict[str, list[CaseRecord]] = {}

    def add(self, record: CaseRecord) -> None:
        self.vertices[record.case_id] = record
        src = record.source_id
        if src is not None:
            if src in self.vertices:
                self._link(src, record.case_id)
            else:
                self.pending.setdefault(src, []).append(record)
        for child in self.pending.pop(record.case_id, ()):
            self._link(record.case_id, child.case_id)

    def _link(self, source: str, case: str) -> None:
        key = (source, case) if source < case else (case, source)
        self.edges[key] = Edge(source=source, case=case, weight=1.0)

    def graph(self, as_of: datetime | None) -> ContactGraph:
        # snapshot copies: the builder keeps mutating after emission
        return ContactGraph(dict(self.vertices), dict(self.edges), as_of)


class RecognitionEngine:
    """Single-consumer streaming state.

    ingest() returns the reports whose windows the new watermark closed;
    flush() ends the stream and closes the rest of the schedule, empty
    windows included. Cumulative graph maintenance is amortized O(new
    records); fitting is recomputed per window (tail scans do not
    incrementalize).
    """

    def __init__(self, spec: WindowSpec, families: Iterable[str] = FAMILIES,
                 rule: str = "min-se", include_isolated: bool = False):
        if rule not in RULES:
            raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")
        self.spec = spec
        self.families = _canonical_families(families)
        self.rule = rule
        self.include_isolated = include_isolated
        self.diagnostics: list[Diagnostic] = []
        self._seen_ids: set[str] = set()
        self._arrived: list[CaseRecord] = []
        self._watermark: datetime | None = None
        self._next = 0  # next window index to emit
        self._ended = False
        self._builders: dict[int, _GraphBuilder] = {}   # tumbling
        self._cumulative = _GraphBuilder()              # cumulative
        self._pending: dict[int, list[CaseRecord]] = {}  # cumulative, by index

    @property
    def watermark(self) -> datetime | None:
        return self._watermark

    def _index_of(self, instant: datetime) -> int:
        return (instant - self.spec.origin) // self.spec.period

    def ingest(self, record: CaseRecord) -> list[StructureReport]:
        """Absorb one record; return any newly closed windows' reports."""
        if self._ended:
            raise ValidationError("stream already flushed")
        if record.case_id in self._seen_ids:
            raise ValidationError(f"duplicate case_id {record.case_id!r}")
        self._seen_ids.add(record.case_id)

        ts = record.timestamp
        if ts < self.spec.origin:
            self.diagnostics.append(Diagnostic(
                kind="before-origin", case_id=record.case_id,
                message=f"case {record.case_id!r} predates the window origin; dropped"))
        else:
            index = self._index_of(ts)
            if self.spec.count is not None and index >= self.spec.count:
                self.diagnostics.append(Diagnostic(
                    kind="beyond-schedule", case_id=record.case_id,
                    message=f"case {record.case_id!r} falls after the last "
                            f"scheduled window; dropped"))
            elif self.spec.mode == "tumbling":
                if index < self._next:
                    self.diagnostics.append(Diagnostic(
                        kind="late-record", case_id=record.case_id,
                        message=f"case {record.case_id!r} arrived after its "
                                f"window closed; rejected"))
                else:
                    self._builders.setdefault(index, _GraphBuilder()).add(record)
                    self._arrived.append(record)
            else:
                if index < self._next:
                    self.diagnostics.append(Diagnostic(
                        kind="late-record", case_id=record.case_id,
                        message=f"case {record.case_id!r} arrived after its "
                                f"window closed; absorbed into the next one"))
                    index = self._next
                self._pending.setdefault(index, []).append(record)
                self._arrived.append(record)

        if self._watermark is None or ts > self._watermark:
            self._watermark = ts
        return self._drain()

    def _drain(self) -> list[StructureReport]:
        out: list[StructureReport] = []
        if self._watermark is None:
            return out
        while self.spec.count is None or self._next < self.spec.count:
            window = self.spec.window(self._next)
            if window.end > self._watermark:
                break
            out.append(self._emit(window))
        return out

    def _emit(self, window: TimeWindow) -> StructureReport:
        index = self._next
        if self.spec.mode == "tumbling":
            builder = self._builders.pop(index, None) or _GraphBuilder()
        else:
            for record in self._pending.pop(index, ()):
                self._cumulative.add(record)
            builder = self._cumulative
        graph = builder.graph(as_of=window.end)
        self._next += 1
        return report_for_graph(graph, window, self.families, self.rule,
                                self.include_isolated)

    def flush(self) -> list[StructureReport]:
        """End of stream: emit every scheduled window up to the one
        containing the watermark, empty windows included."""
        if self._ended:
            return []
        self._ended = True
        if self._watermark is None:
            return []
        span = self._watermark + _ONE_SECOND - self.spec.origin
        if span <= timedelta(0):
            return []
        k = -((-span) // self.spec.period)
        if self.spec.count is not None:
            k = min(k, self.spec.count)
        out: list[StructureReport] = []
        while self._next < k:
            out.append(self._emit(self.spec.window(self._next)))
        return out

    def process_window(self, window: TimeWindow) -> StructureReport:
        """Report over the records absorbed so far that fall in the
        window. Pure query; emission state is untouched. Meaningful once
        every record before window.end has been ingested."""
        builder = _GraphBuilder()
        for record in self._arrived:
            if window.contains(record.timestamp):
                builder.add(record)
        graph = builder.graph(as_of=window.end)
        return report_for_graph(graph, window, self.families, self.rule,
                                self.include_isolated)


def run(stream: Iterable[CaseRecord], spec: WindowSpec,
        families: Iterable[str] = FAMILIES, rule: str = "min-se",
        include_isolated: bool = False) -> Iterator[StructureReport]:
    """Drive a record iterable through the engine, yielding each report
    as its window closes. Deterministic for a given input and spec."""
    engine = RecognitionEngine(spec, families, rule, include_isolated)
    for record in stream:
        yield from engine.ingest(record)
    yield from engine.flush()


def classify_trend(reports: Sequence[StructureReport]) -> dict:
    """Run-length summary of the chosen family across windows: each
    stretch of identical classification, and every change point."""
    reports = tuple(reports)
    if not reports:
        raise ValueError("classify_trend needs at least one report")

    def family_of(report: StructureReport) -> str | None:
        return None if report.classification is None else report.classification.chosen

    runs = []
    transitions = []
    start = 0
    current = family_of(reports[0])
    for i in range(1, len(reports) + 1):
        family = family_of(reports[i]) if i < len(reports) else object()
        if i < len(reports) and family == current:
            continue
        window_start = reports[start].window
        window_end = reports[i - 1].window
        runs.append({
            "family": current,
            "start": start,
            "end": i - 1,
            "length": i - start,
            "from": None if window_start is None
            else format_timestamp(window_start.start),
            "to": None if window_end is None
            else format_timestamp(window_end.end),
        })
        if i < len(reports):
            transitions.append({"index": i, "from": current, "to": family})
            start = i
            current = family
    return {"windows": len(reports), "runs": runs, "transitions": transitions}
