"""Windowed streaming engine against the batch pipeline."""

from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outbreaklens.engine import (
    RecognitionEngine,
    StructureReport,
    WindowSpec,
    batch_report,
    classify_trend,
    run,
    schedule_windows,
)
from outbreaklens.graph import TimeWindow
from outbreaklens.records import CaseRecord, GeoPoint, ValidationError, validate_stream

UTC = timezone.utc
T0 = datetime(2014, 3, 1, tzinfo=UTC)
DAY = timedelta(days=1)


def rec(case_id, source_id, minutes, lon=0.0, lat=0.0):
    return CaseRecord(case_id, source_id, T0 + timedelta(minutes=minutes),
                      GeoPoint(lon, lat))


# --- window specs and schedules -------------------------------------------


def test_window_spec_validation():
    with pytest.raises(ValueError):
        WindowSpec("sliding", DAY, T0)
    with pytest.raises(ValueError):
        WindowSpec("tumbling", timedelta(0), T0)
    with pytest.raises(ValueError):
        WindowSpec("tumbling", -DAY, T0)
    with pytest.raises(ValueError):
        WindowSpec("tumbling", DAY, T0, count=0)


def test_tumbling_windows_are_disjoint_and_contiguous():
    spec = WindowSpec("tumbling", timedelta(hours=6), T0)
    w0, w1 = spec.window(0), spec.window(1)
    assert w0 == TimeWindow(T0, T0 + timedelta(hours=6))
    assert w1 == TimeWindow(T0 + timedelta(hours=6), T0 + timedelta(hours=12))
    assert w0.end == w1.start
    with pytest.raises(ValueError):
        spec.window(-1)


def test_cumulative_windows_share_origin():
    spec = WindowSpec("cumulative", timedelta(hours=6), T0)
    assert spec.window(0) == TimeWindow(T0, T0 + timedelta(hours=6))
    assert spec.window(3) == TimeWindow(T0, T0 + timedelta(hours=24))


def test_quarter_hour_schedule_covers_a_day_in_96_windows():
    spec = WindowSpec("tumbling", timedelta(minutes=15), T0)
    windows = schedule_windows(spec, TimeWindow(T0, T0 + DAY))
    assert len(windows) == 96
    assert windows[0].start == T0
    assert windows[-1].end == T0 + DAY


def test_schedule_single_window_when_period_equals_extent():
    spec = WindowSpec("tumbling", DAY, T0)
    assert schedule_windows(spec, TimeWindow(T0, T0 + DAY)) == (
        TimeWindow(T0, T0 + DAY),)


def test_schedule_rounds_up_partial_windows():
    spec = WindowSpec("tumbling", DAY, T0)
    windows = schedule_windows(spec, TimeWindow(T0, T0 + DAY + timedelta(hours=1)))
    assert len(windows) == 2


def test_schedule_respects_count_cap():
    spec = WindowSpec("cumulative", DAY, T0, count=3)
    windows = schedule_windows(spec, TimeWindow(T0, T0 + 10 * DAY))
    assert len(windows) == 3
    assert all(w.start == T0 for w in windows)


def test_schedule_empty_before_origin():
    spec = WindowSpec("tumbling", DAY, T0 + 5 * DAY)
    assert schedule_windows(spec, TimeWindow(T0, T0 + DAY)) == ()


# --- engine semantics -------------------------------------------------------


def test_reports_emitted_once_watermark_passes_window_end():
    engine = RecognitionEngine(WindowSpec("tumbling", DAY, T0))
    assert engine.ingest(rec("A", None, 10)) == []      # window 0 still open
    assert engine.watermark == T0 + timedelta(minutes=10)
    out = engine.ingest(rec("B", "A", 24 * 60))          # watermark hits day 1
    assert [r.window for r in out] == [TimeWindow(T0, T0 + DAY)]
    assert out[0].n_vertices == 1 and out[0].n_edges == 0


def test_flush_emits_remaining_and_empty_windows():
    engine = RecognitionEngine(WindowSpec("tumbling", DAY, T0))
    engine.ingest(rec("A", None, 10))
    engine.ingest(rec("B", "A", 3 * 24 * 60 + 5))  # day 3; days 0-2 close
    out = engine.flush()
    assert [r.window.start for r in out] == [T0 + 3 * DAY]
    assert engine.flush() == []  # idempotent
    with pytest.raises(ValidationError):
        engine.ingest(rec("C", None, 999))


def test_empty_middle_window_reports_zero_vertices():
    reports = list(run([rec("A", None, 0), rec("B", None, 2 * 24 * 60)],
                       WindowSpec("tumbling", DAY, T0)))
    assert len(reports) == 3
    middle = reports[1]
    assert middle.n_vertices == 0
    assert middle.classification is None
    assert dict(middle.skipped)  # every family says why it could not fit


def test_duplicate_id_rejected_mid_stream():
    engine = RecognitionEngine(WindowSpec("tumbling", DAY, T0))
    engine.ingest(rec("A", None, 0))
    with pytest.raises(ValidationError):
        engine.ingest(rec("A", None, 5))


def test_before_origin_record_dropped_with_diagnostic():
    engine = RecognitionEngine(WindowSpec("tumbling", DAY, T0 + DAY))
    engine.ingest(rec("OLD", None, 0))
    assert [d.kind for d in engine.diagnostics] == ["before-origin"]


def test_beyond_schedule_record_dropped_with_diagnostic():
    engine = RecognitionEngine(WindowSpec("tumbling", DAY, T0, count=1))
    engine.ingest(rec("A", None, 0))
    engine.ingest(rec("LATER", None, 5 * 24 * 60))
    assert [d.kind for d in engine.diagnostics] == ["beyond-schedule"]


def test_late_record_rejected_in_tumbling_mode():
    engine = RecognitionEngine(WindowSpec("tumbling", DAY, T0))
    engine.ingest(rec("A", None, 0))
    closed = engine.ingest(rec("B", None, 24 * 60 + 1))  # closes window 0
    assert len(closed) == 1
    engine.ingest(rec("LATE", None, 30))
    assert [d.kind for d in engine.diagnostics] == ["late-record"]
    final = engine.flush()
    # the late record is in no report
    seen = {r.window: r.n_vertices for r in closed + final}
    assert seen[TimeWindow(T0, T0 + DAY)] == 1
    assert seen[TimeWindow(T0 + DAY, T0 + 2 * DAY)] == 1


def test_late_record_absorbed_in_cumulative_mode():
    engine = RecognitionEngine(WindowSpec("cumulative", DAY, T0))
    engine.ingest(rec("A", None, 0))
    engine.ingest(rec("B", None, 24 * 60 + 1))
    engine.ingest(rec("LATE", "A", 30))
    assert [d.kind for d in engine.diagnostics] == ["late-record"]
    final = engine.flush()
    # growing prefix: the late arrival still lands in the last report
    assert final[-1].n_vertices == 3
    assert final[-1].n_edges == 1


def test_child_arriving_before_source_still_links():
    # same window, reversed arrival: the edge must appear regardless
    reports = list(run([rec("B", "A", 10), rec("A", None, 20)],
                       WindowSpec("tumbling", DAY, T0)))
    assert reports[0].n_edges == 1


def test_process_window_is_a_pure_query(outbreak_stream):
    engine = RecognitionEngine(WindowSpec("tumbling", DAY, T0))
    for record in outbreak_stream.records[:200]:
        engine.ingest(record)
    w = TimeWindow(T0, T0 + 7 * DAY)
    before = engine.watermark
    report = engine.process_window(w)
    assert engine.watermark == before
    assert report.to_json_dict() == batch_report(
        validate_stream(outbreak_stream.records[:200]), w).to_json_dict()


# --- equality with the batch pipeline ---------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_every_emitted_report_equals_batch(data):
    n = data.draw(st.integers(min_value=1, max_value=35))
    minutes = data.draw(st.lists(st.integers(0, 2000), min_size=n, max_size=n))
    parents = data.draw(st.lists(st.integers(0, 100), min_size=n, max_size=n))
    mode = data.draw(st.sampled_from(["tumbling", "cumulative"]))
    records = []
    for i, (m, p) in enumerate(zip(minutes, parents)):
        src = f"C{p % i}" if i and p % 3 else None
        records.append(rec(f"C{i}", src, m))
    vs = validate_stream(records)
    spec = WindowSpec(mode, timedelta(minutes=45), T0)
    for report in run(vs.records, spec):
        assert report.to_json_dict() == batch_report(vs, report.window).to_json_dict()


def test_cumulative_sample_sizes_never_shrink(outbreak_stream):
    spec = WindowSpec("cumulative", 7 * DAY, T0)
    sizes = [r.fitting_n for r in run(outbreak_stream.records, spec)]
    assert sizes == sorted(sizes)


def test_run_is_deterministic(outbreak_stream):
    spec = WindowSpec("tumbling", 7 * DAY, T0)
    a = [r.to_json_dict() for r in run(outbreak_stream.records, spec)]
    b = [r.to_json_dict() for r in run(outbreak_stream.records, spec)]
    assert a == b


def test_engine_rejects_bad_setup():
    with pytest.raises(ValueError):
        RecognitionEngine(WindowSpec("tumbling", DAY, T0), families=["weibull"])
    with pytest.raises(ValueError):
        RecognitionEngine(WindowSpec("tumbling", DAY, T0), families=[])
    with pytest.raises(ValueError):
        RecognitionEngine(WindowSpec("tumbling", DAY, T0), rule="bic")


def test_family_subset_and_order_do_not_matter():
    records = [rec("A", None, 0), rec("B", "A", 10), rec("C", "A", 20)]
    spec = WindowSpec("tumbling", DAY, T0)
    a = list(run(records, spec, families=["power-law", "exponential"]))
    b = list(run(records, spec, families=["exponential", "power-law"]))
    assert [r.to_json_dict() for r in a] == [r.to_json_dict() for r in b]


# --- trend summaries ---------------------------------------------------------


def _report(window, chosen):
    from outbreaklens.fitting import FitResult, StructureClass
    classification = None
    if chosen is not None:
        fit = FitResult(chosen, {"lambda": 1.0}, {"lambda": 0.1},
                        ((0.01,),), -1.0, 5)
        classification = StructureClass(chosen, "min-se", (fit,))
    return StructureReport(window, 5, 4, 5, 1.6, classification, ())


def test_classify_trend_single_run():
    w = [TimeWindow(T0 + i * DAY, T0 + (i + 1) * DAY) for i in range(3)]
    out = classify_trend([_report(w[i], "exponential") for i in range(3)])
    assert out["windows"] == 3
    assert len(out["runs"]) == 1
    assert out["runs"][0]["family"] == "exponential"
    assert out["runs"][0]["length"] == 3
    assert out["transitions"] == []


def test_classify_trend_transitions():
    w = [TimeWindow(T0 + i * DAY, T0 + (i + 1) * DAY) for i in range(4)]
    chosen = ["exponential", "exponential", "power-law", None]
    out = classify_trend([_report(wi, c) for wi, c in zip(w, chosen)])
    assert [r["family"] for r in out["runs"]] == ["exponential", "power-law", None]
    assert [r["length"] for r in out["runs"]] == [2, 1, 1]
    assert out["transitions"] == [
        {"index": 2, "from": "exponential", "to": "power-law"},
        {"index": 3, "from": "power-law", "to": None},
    ]
    assert out["runs"][0]["from"] == "2014-03-01T00:00:00Z"
    assert out["runs"][0]["to"] == "2014-03-03T00:00:00Z"


def test_classify_trend_needs_reports():
    with pytest.raises(ValueError):
        classify_trend([])
