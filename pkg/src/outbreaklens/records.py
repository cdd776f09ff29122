"""Case-record parsing, validation, and ordered streaming.

The input is a feed of reported cases, one record per line, in CSV or
JSON-lines form. Both carry the same five fields: ``case_id``,
``source_id``, ``date``, ``longitude``, ``latitude``. An empty source
field marks an index case (no known infector).

Parsing is pure and thread-safe. ``read_stream`` is a single-consumer
sequential source. ``ValidatedStream`` is immutable after construction
and safe to share.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence, TextIO, Union

CSV_HEADER = ("case_id", "source_id", "date", "longitude", "latitude")
FORMATS = ("csv", "jsonl")


class ParseError(ValueError):
    """A single line could not be turned into a CaseRecord."""

    def __init__(self, message: str, *, line_no: int | None = None,
                 field: str | None = None):
        self.line_no = line_no
        self.field = field
        prefix = f"line {line_no}: " if line_no is not None else ""
        suffix = f" (field: {field})" if field else ""
        super().__init__(f"{prefix}{message}{suffix}")


class ValidationError(ValueError):
    """The stream violates a hard invariant (duplicate ids, bad links in
    reject mode, ingestion misuse)."""


@dataclass(frozen=True)
class Diagnostic:
    """Non-fatal problem found while reading or validating a stream."""

    kind: str
    message: str
    line_no: int | None = None
    case_id: str | None = None


def normalize_timestamp(value: datetime) -> datetime:
    """UTC, whole seconds. Naive datetimes are taken as UTC."""
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    else:
        value = value.astimezone(timezone.utc)
    if value.microsecond:
        value = value.replace(microsecond=0)
    return value


def parse_timestamp(text: str) -> datetime:
    """Parse an instant from ISO-style text.

    Accepts full timestamps with a trailing ``Z`` or numeric offset, and
    bare dates, which are read as midnight UTC. Naive timestamps are
    taken as UTC. Sub-second precision is truncated.
    """
    raw = text.strip()
    if not raw:
        raise ValueError("empty timestamp")
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(raw)
    except ValueError:
        raise ValueError(f"unparseable date: {text!r}") from None
    return normalize_timestamp(parsed)


def format_timestamp(value: datetime) -> str:
    return normalize_timestamp(value).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class GeoPoint:
    """A coordinate pair in decimal degrees."""

    longitude: float
    latitude: float

    def __post_init__(self):
        # NaN fails both range checks, so it is rejected here too.
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude out of range: {self.longitude!r}")
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude out of range: {self.latitude!r}")


@dataclass(frozen=True)
class CaseRecord:
    """One reported case.

    ``timestamp`` is stored timezone-aware in UTC at second resolution;
    ``source_id`` is None for index cases. A record naming itself as its
    source is rejected because it could never form a valid contact edge.
    """

    case_id: str
    source_id: str | None
    timestamp: datetime
    location: GeoPoint

    def __post_init__(self):
        if not self.case_id:
            raise ValueError("case_id must be non-empty")
        if self.source_id == "":
            object.__setattr__(self, "source_id", None)
        if self.source_id == self.case_id:
            raise ValueError(f"case {self.case_id!r} lists itself as source")
        object.__setattr__(self, "timestamp", normalize_timestamp(self.timestamp))


def parse_record(line: str, format: str = "csv", *,
                 line_no: int | None = None) -> CaseRecord:
    """Parse one line in the declared format into a CaseRecord."""
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    if format == "csv":
        try:
            row = next(csv.reader([line]))
        except (csv.Error, StopIteration):
            raise ParseError("malformed CSV line", line_no=line_no) from None
        if len(row) != len(CSV_HEADER):
            raise ParseError(f"expected {len(CSV_HEADER)} fields, got {len(row)}",
                             line_no=line_no)
        raw = dict(zip(CSV_HEADER, (cell.strip() for cell in row)))
    else:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line_no=line_no) from None
        if not isinstance(obj, dict):
            raise ParseError("JSON line is not an object", line_no=line_no)
        missing = [key for key in CSV_HEADER if key not in obj]
        if missing:
            raise ParseError(f"missing keys: {', '.join(missing)}",
                             line_no=line_no, field=missing[0])
        raw = obj

    case_id = "" if raw["case_id"] is None else str(raw["case_id"]).strip()
    if not case_id:
        raise ParseError("empty case_id", line_no=line_no, field="case_id")
    source = raw["source_id"]
    source_id = None if source is None else (str(source).strip() or None)
    try:
        timestamp = parse_timestamp(str(raw["date"]))
    except ValueError as exc:
        raise ParseError(str(exc), line_no=line_no, field="date") from None
    coords = {}
    for key in ("longitude", "latitude"):
        try:
            coords[key] = float(raw[key])
        except (TypeError, ValueError):
            raise ParseError(f"not a number: {raw[key]!r}",
                             line_no=line_no, field=key) from None
    try:
        location = GeoPoint(coords["longitude"], coords["latitude"])
        return CaseRecord(case_id, source_id, timestamp, location)
    except ValueError as exc:
        raise ParseError(str(exc), line_no=line_no) from None


def serialize_record(record: CaseRecord, format: str = "csv") -> str:
    """One output line (no trailing newline). Inverse of parse_record:
    parsing the result yields an equal record."""
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    date = format_timestamp(record.timestamp)
    if format == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow([
            record.case_id,
            record.source_id or "",
            date,
            repr(record.location.longitude),
            repr(record.location.latitude),
        ])
        return buf.getvalue().rstrip("\n")
    return json.dumps(
        {
            "case_id": record.case_id,
            "source_id": record.source_id,
            "date": date,
            "longitude": record.location.longitude,
            "latitude": record.location.latitude,
        },
        sort_keys=True,
        separators=(",", ":"),
    )


@dataclass(frozen=True)
class ValidatedStream:
    """Records sorted by (timestamp, arrival index), invariants checked.

    Validation is idempotent: a ValidatedStream passed back through
    validate_stream is returned unchanged.
    """

    records: tuple[CaseRecord, ...]
    diagnostics: tuple[Diagnostic, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[CaseRecord]:
        return iter(self.records)

    @property
    def extent(self) -> tuple[datetime, datetime] | None:
        """(first, last) timestamp, or None for an empty stream."""
        if not self.records:
            return None
        return self.records[0].timestamp, self.records[-1].timestamp


def validate_stream(records: Union[ValidatedStream, Iterable[CaseRecord]],
                    on_bad_link: str = "warn") -> ValidatedStream:
    """Order the stream and enforce cross-record invariants.

    Duplicate case_ids are always a hard error. A source_id that matches
    no record, or whose record is reported after its child, is handled
    per ``on_bad_link``: "warn" keeps the case as an index vertex and
    drops the link (with a diagnostic), "reject" raises.
    """
    if isinstance(records, ValidatedStream):
        return records
    if on_bad_link not in ("warn", "reject"):
        raise ValueError(f"on_bad_link must be 'warn' or 'reject', got {on_bad_link!r}")

    items = list(records)
    by_id: dict[str, CaseRecord] = {}
    for rec in items:
        if rec.case_id in by_id:
            raise ValidationError(f"duplicate case_id {rec.case_id!r}")
        by_id[rec.case_id] = rec

    ordered = sorted(items, key=lambda rec: rec.timestamp)  # stable for ties
    out: list[CaseRecord] = []
    diags: list[Diagnostic] = []
    for rec in ordered:
        if rec.source_id is None:
            out.append(rec)
            continue
        source = by_id.get(rec.source_id)
        if source is None:
            kind = "dangling-source"
            problem = (f"source {rec.source_id!r} of case {rec.case_id!r} "
                       f"matches no record")
        elif source.timestamp > rec.timestamp:
            kind = "source-after-case"
            problem = (f"source {rec.source_id!r} is reported after case "
                       f"{rec.case_id!r}")
        else:
            out.append(rec)
            continue
        if on_bad_link == "reject":
            raise ValidationError(problem)
        diags.append(Diagnostic(kind=kind, message=problem + "; link dropped",
                                case_id=rec.case_id))
        out.append(replace(rec, source_id=None))
    return ValidatedStream(tuple(out), tuple(diags))


def _is_csv_header(line: str) -> bool:
    try:
        row = next(csv.reader([line]))
    except (csv.Error, StopIteration):
        return False
    return tuple(cell.strip().lower() for cell in row) == CSV_HEADER


def read_stream(source: Union[str, Path, TextIO], format: str = "csv", *,
                strict: bool = False,
                on_error: Callable[[Diagnostic], None] | None = None,
                ) -> Iterator[CaseRecord]:
    """Yield records one at a time without loading the whole input.

    Blank lines are skipped; a leading CSV header row is recognized and
    skipped. In lenient mode (default) each malformed line produces a
    Diagnostic through ``on_error`` and reading continues; strict mode
    raises on the first bad line. Cross-record checks (duplicate ids,
    link resolution) are the caller's concern; see validate_stream and
    the engine.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    own = isinstance(source, (str, Path))
    handle = open(source, "r", encoding="utf-8") if own else source
    try:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            if format == "csv" and line_no == 1 and _is_csv_header(line):
                continue
            try:
                yield parse_record(line, format, line_no=line_no)
            except ParseError as exc:
                if strict:
                    raise
                if on_error is not None:
                    on_error(Diagnostic(kind="parse-error", message=str(exc),
                                        line_no=line_no))
    finally:
        if own:
            handle.close()


def write_stream(records: Iterable[CaseRecord], target: TextIO,
                 format: str = "csv") -> int:
    """Write records in the given format (CSV includes the header row).
    Returns the number of records written."""
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    count = 0
    if format == "csv":
        target.write(",".join(CSV_HEADER) + "\n")
    for record in records:
        target.write(serialize_record(record, format) + "\n")
        count += 1
    return count
