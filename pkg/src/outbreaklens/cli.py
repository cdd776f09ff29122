"""Command-line surface: analyze, stream, simulate, plot.

Exit codes are stable: 0 success, 2 unreadable or invalid input data,
64 bad flags or simulation config, 65 empty distribution where a plot
was requested. Identical inputs and flags produce byte-identical
outputs (reports and SVG alike).
"""

from __future__ import annotations

import argparse
import io
import json
import re
import sys
from dataclasses import replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from . import __version__
from .engine import (RecognitionEngine, StructureReport, WindowSpec,
                     batch_report, classify_trend, report_for_graph)
from .fitting import FAMILIES, FitError, RULES, fit_family
from .graph import build_graph, degree_distribution, degree_sample
from .records import (Diagnostic, ParseError, ValidationError, parse_timestamp,
                      read_stream, validate_stream, write_stream,
                      format_timestamp)
from .plot import render_degree_plot
from .sim import SimConfig, generate_network, simulate_outbreak

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_USAGE = 64
EXIT_EMPTY = 65

FAMILY_ALIASES = {
    "exp": "exponential",
    "norm": "normal",
    "pois": "poisson",
    "pl": "power-law",
}

_DURATION_RE = re.compile(r"^(\d+)([smhd])$")
_DURATION_UNITS = {"s": "seconds", "m": "minutes", "h": "hours", "d": "days"}


class _CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_duration(text: str) -> timedelta:
    """Durations like 15m, 1h, 1d (also seconds: 90s)."""
    match = _DURATION_RE.match(text.strip())
    if not match:
        raise ValueError(f"bad duration {text!r}; use forms like 15m, 1h, 1d")
    value, unit = match.groups()
    return timedelta(**{_DURATION_UNITS[unit]: int(value)})


def parse_window_flag(text: str) -> tuple[str, timedelta] | None:
    """'all' means the whole stream; otherwise 'tumbling:<dur>' or
    'cumulative:<dur>'."""
    raw = text.strip()
    if raw == "all":
        return None
    mode, sep, dur = raw.partition(":")
    if not sep or mode not in ("tumbling", "cumulative"):
        raise ValueError(f"bad window {text!r}; use all, tumbling:<dur> "
                         f"or cumulative:<dur>")
    return mode, parse_duration(dur)


def parse_families(text: str) -> tuple[str, ...]:
    names = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    out = []
    for name in names:
        family = FAMILY_ALIASES.get(name, name)
        if family not in FAMILIES:
            raise ValueError(f"unknown family {name!r}; "
                             f"choose from {sorted(FAMILY_ALIASES)}")
        if family not in out:
            out.append(family)
    if not out:
        raise ValueError("at least one family is required")
    return tuple(f for f in FAMILIES if f in out)


def _floor_day(instant: datetime) -> datetime:
    return instant.replace(hour=0, minute=0, second=0)


def _open_input(path: str | None) -> TextIO:
    if path in (None, "-"):
        return sys.stdin
    try:
        return open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise _CliError(EXIT_INPUT, f"cannot read {path}: {exc}") from None


def _read_text(path: str | None) -> str:
    if path in (None, "-"):
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _CliError(EXIT_INPUT, f"cannot read {path}: {exc}") from None


def _open_output(path: str | None):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _stderr_diag(diag: Diagnostic) -> None:
    print(f"warning: {diag.message}", file=sys.stderr)


def _read_records(args) -> list:
    source = _open_input(args.input)
    own = source is not sys.stdin
    try:
        return list(read_stream(source, args.format, strict=args.strict,
                                on_error=_stderr_diag))
    except ParseError as exc:
        raise _CliError(EXIT_INPUT, str(exc)) from None
    finally:
        if own:
            source.close()


def _run_config(args, command: str, origin: datetime | None,
                families: Sequence[str]) -> dict:
    return {
        "command": command,
        "input": args.input,
        "output": args.output,
        "format": args.format,
        "window": args.window,
        "origin": None if origin is None else format_timestamp(origin),
        "families": list(families),
        "rule": args.rule,
        "include_isolated": bool(args.include_isolated),
        "strict": bool(args.strict),
    }


def _empty_summary() -> dict:
    return {"windows": 0, "runs": [], "transitions": []}


def cmd_analyze(args) -> int:
    families = _families_of(args)
    window = _window_of(args)
    records = _read_records(args)
    try:
        validated = validate_stream(
            records, on_bad_link="reject" if args.strict else "warn")
    except (ValidationError, ValueError) as exc:
        raise _CliError(EXIT_INPUT, str(exc)) from None
    for diag in validated.diagnostics:
        _stderr_diag(diag)

    out, own = _open_output(args.output)
    try:
        if window is None:
            graph = build_graph(validated)
            report = report_for_graph(graph, None, families, args.rule,
                                      args.include_isolated)
            obj = report.to_json_dict()
            sample = degree_sample(graph, args.include_isolated)
            pmf = degree_distribution(sample) if sample.n else {}
            obj["degree_pmf"] = [[d, p] for d, p in pmf.items()]
            obj["config"] = _run_config(args, "analyze", None, families)
            out.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")
            return EXIT_OK

        mode, period = window
        origin = _origin_of(args, validated.records)
        if origin is None:  # empty stream, nothing to schedule
            out.write(_dump_line({
                "config": _run_config(args, "analyze", None, families),
                "summary": _empty_summary()}))
            return EXIT_OK
        spec = WindowSpec(mode, period, origin)
        engine = RecognitionEngine(spec, families, args.rule,
                                   args.include_isolated)
        reports: list[StructureReport] = []
        for record in validated.records:
            for report in engine.ingest(record):
                reports.append(report)
                out.write(_dump_line(report.to_json_dict()))
        for report in engine.flush():
            reports.append(report)
            out.write(_dump_line(report.to_json_dict()))
        for diag in engine.diagnostics:
            _stderr_diag(diag)
        summary = classify_trend(reports) if reports else _empty_summary()
        out.write(_dump_line({
            "config": _run_config(args, "analyze", origin, families),
            "summary": summary}))
        return EXIT_OK
    finally:
        if own:
            out.close()


def cmd_stream(args) -> int:
    families = _families_of(args)
    window = _window_of(args)
    if window is None:
        raise _CliError(EXIT_USAGE,
                        "stream needs a windowed --window "
                        "(tumbling:<dur> or cumulative:<dur>)")
    mode, period = window

    source = _open_input(args.input)
    own_in = source is not sys.stdin
    out, own_out = _open_output(args.output)
    reports: list[StructureReport] = []
    engine: RecognitionEngine | None = None
    origin: datetime | None = None
    try:
        try:
            for record in read_stream(source, args.format, strict=args.strict,
                                      on_error=_stderr_diag):
                if engine is None:
                    origin = (parse_timestamp(args.origin) if args.origin
                              else _floor_day(record.timestamp))
                    engine = RecognitionEngine(WindowSpec(mode, period, origin),
                                               families, args.rule,
                                               args.include_isolated)
                for report in engine.ingest(record):
                    reports.append(report)
                    out.write(_dump_line(report.to_json_dict()))
        except (ParseError, ValidationError) as exc:
            # partial results stay flushed; the error is the exit status
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        if engine is not None:
            for report in engine.flush():
                reports.append(report)
                out.write(_dump_line(report.to_json_dict()))
            for diag in engine.diagnostics:
                _stderr_diag(diag)
        summary = classify_trend(reports) if reports else _empty_summary()
        out.write(_dump_line({
            "config": _run_config(args, "stream", origin, families),
            "summary": summary}))
        return EXIT_OK
    finally:
        if own_in:
            source.close()
        if own_out:
            out.close()


def cmd_simulate(args) -> int:
    if args.input:
        text = _read_text(args.input)
        try:
            config = SimConfig.from_json(text)
        except (ValueError, KeyError) as exc:
            raise _CliError(EXIT_USAGE, f"invalid sim config: {exc}") from None
    else:
        config = SimConfig.from_json({})
    if args.seed is not None:
        try:
            config = replace(config, seed=args.seed)
        except ValueError as exc:
            raise _CliError(EXIT_USAGE, str(exc)) from None

    network = generate_network(config)
    records = simulate_outbreak(network, config)
    out, own = _open_output(args.output)
    try:
        write_stream(records, out, args.format)
    finally:
        if own:
            out.close()
    return EXIT_OK


def _looks_like_report(text: str) -> dict | None:
    stripped = text.lstrip()
    if not stripped.startswith("{"):
        return None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        return None
    if isinstance(obj, dict) and "n_vertices" in obj:
        return obj
    return None


def cmd_plot(args) -> int:
    families = _families_of(args)
    text = _read_text(args.input)
    report = _looks_like_report(text)
    if report is not None:
        pairs = report.get("degree_pmf")
        if pairs is None:
            raise _CliError(EXIT_INPUT,
                            "report carries no degree_pmf; generate it with "
                            "analyze --window all")
        pmf = {int(d): float(p) for d, p in pairs}
        classification = report.get("classification")
        fits = classification["fits"] if classification else []
    else:
        try:
            records = list(read_stream(io.StringIO(text), args.format,
                                       strict=args.strict,
                                       on_error=_stderr_diag))
        except ParseError as exc:
            raise _CliError(EXIT_INPUT, str(exc)) from None
        validated = validate_stream(records)
        graph = build_graph(validated)
        sample = degree_sample(graph, args.include_isolated)
        if sample.n == 0:
            raise _CliError(EXIT_EMPTY, "empty distribution")
        pmf = degree_distribution(sample)
        fits = []
        for family in families:
            try:
                fits.append(fit_family(family, sample))
            except FitError:
                continue
    if not pmf:
        raise _CliError(EXIT_EMPTY, "empty distribution")
    try:
        svg = render_degree_plot(pmf, fits, log_scale=args.log_log)
    except ValueError as exc:
        raise _CliError(EXIT_EMPTY, str(exc)) from None
    out, own = _open_output(args.output)
    try:
        out.write(svg)
    finally:
        if own:
            out.close()
    return EXIT_OK


def _families_of(args) -> tuple[str, ...]:
    try:
        return parse_families(args.families)
    except ValueError as exc:
        raise _CliError(EXIT_USAGE, str(exc)) from None


def _window_of(args):
    try:
        return parse_window_flag(args.window)
    except ValueError as exc:
        raise _CliError(EXIT_USAGE, str(exc)) from None


def _origin_of(args, records) -> datetime | None:
    if args.origin:
        try:
            return parse_timestamp(args.origin)
        except ValueError as exc:
            raise _CliError(EXIT_USAGE, str(exc)) from None
    if not records:
        return None
    return _floor_day(records[0].timestamp)


def _add_io_flags(sub) -> None:
    sub.add_argument("--input", help="input path; - or absent for stdin")
    sub.add_argument("--output", help="output path; - or absent for stdout")
    sub.add_argument("--format", choices=["csv", "jsonl"], default="csv",
                     help="record format (default csv)")
    sub.add_argument("--strict", action="store_true",
                     help="fail on the first malformed line or bad link")


def _add_fit_flags(sub) -> None:
    sub.add_argument("--families", default="exp,norm,pois,pl",
                     help="comma-separated: exp, norm, pois, pl")
    sub.add_argument("--rule", choices=list(RULES), default="min-se",
                     help="selection rule (default min-se)")
    sub.add_argument("--include-isolated", action="store_true",
                     dest="include_isolated",
                     help="keep zero-degree vertices in the fit sample")


def _add_window_flags(sub, default_window: str) -> None:
    sub.add_argument("--window", default=default_window,
                     help="all, tumbling:<dur>, or cumulative:<dur>; "
                          "durations like 15m, 1h, 1d "
                          f"(default {default_window})")
    sub.add_argument("--origin", help="window origin instant (default: "
                                      "midnight UTC of the first record's day)")


def build_parser() -> _Parser:
    parser = _Parser(prog="outbreaklens",
                     description="Recognize the time-varying structure of an "
                                 "outbreak contact network from case records.")
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    analyze = commands.add_parser("analyze", help="batch analysis of a "
                                  "record file; one report per window")
    _add_io_flags(analyze)
    _add_window_flags(analyze, "all")
    _add_fit_flags(analyze)
    analyze.set_defaults(handler=cmd_analyze)

    stream = commands.add_parser("stream", help="incremental windowed "
                                 "analysis, reports emitted as windows close")
    _add_io_flags(stream)
    _add_window_flags(stream, "tumbling:1d")
    _add_fit_flags(stream)
    stream.set_defaults(handler=cmd_stream)

    simulate = commands.add_parser("simulate", help="generate a synthetic "
                                   "outbreak record stream")
    simulate.add_argument("--input", help="SimConfig JSON path (optional)")
    simulate.add_argument("--output", help="output path; - or absent for stdout")
    simulate.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    simulate.add_argument("--seed", type=int, help="override the config seed")
    simulate.set_defaults(handler=cmd_simulate)

    plot = commands.add_parser("plot", help="render the degree distribution "
                               "and fitted curves as SVG")
    _add_io_flags(plot)
    _add_fit_flags(plot)
    plot.add_argument("--log-log", action="store_true", dest="log_log",
                      help="log-log axes instead of linear")
    plot.set_defaults(handler=cmd_plot)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
