from __future__ import annotations

from hypothesis import given, strategies as st

from sire.corpus import case_store, run_case
from sire.trace import FIELDS, EndId, Event, EventKind, format_trace, parse_line, parse_trace

ends = st.builds(EndId, st.integers(0, 63), st.integers(0, 99))
events = st.builds(
    Event,
    seq=st.integers(0, 10**6), time=st.integers(0, 10**6), proc=st.integers(0, 63),
    thread=st.integers(-1, 999), kind=st.sampled_from(list(EventKind)),
    src=st.none() | ends, dst=st.none() | ends,
    length=st.none() | st.integers(0, 9), delay=st.none() | st.integers(0, 256),
    data=st.none() | st.lists(st.integers(-2**63, 2**64 - 1), max_size=4).map(tuple),
)


@given(events)
def test_event_line_round_trip(e):
    assert parse_line(e.format()) == e


def test_field_names_and_order():
    e = Event(3, 1, 2, 4, EventKind.SEND, EndId(2, 0), EndId(5, 1), 1, None, (7,))
    assert e.format() == "seq=3 time=1 proc=2 thread=4 kind=Send from=2:0 to=5:1 len=1 data=7"
    keys = [kv.split("=")[0] for kv in e.format().split()]
    assert keys == [f for f in FIELDS if f in keys]


def test_run_trace_round_trip():
    ev = run_case(case_store(cells=2)).result.events
    text = format_trace(ev)
    assert parse_trace(text) == ev
    assert format_trace(parse_trace(text)) == text


def test_end_id_text():
    assert str(EndId(3, 1)) == "3:1"
    assert EndId.parse("3:1") == EndId(3, 1)
    assert EndId(3, 1).pack() == (3 << 32) | 1
