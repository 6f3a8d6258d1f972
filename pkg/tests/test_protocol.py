from __future__ import annotations

import dataclasses

import pytest

from sire import protocol
from sire.corpus import case_store, run_case
from sire.trace import EndId, EventKind


@pytest.fixture(scope="module")
def store_run():
    out = run_case(case_store(cells=3))
    assert out.ok, out.failures
    return out.result


def renumber(events):
    return [dataclasses.replace(e, seq=i) for i, e in enumerate(events)]


def first(events, pred):
    return next(i for i, e in enumerate(events) if pred(e))


def test_clean_trace_passes(store_run):
    assert protocol.check_protocol(store_run.events, store_run.servers) == []
    calls = protocol.call_sessions(store_run.events, store_run.servers)
    assert [s.call for s in calls] == ["write"] * 3 + ["read"] * 3
    assert [s.returns for s in calls[3:]] == [[0], [1], [2]]


def test_missing_disconnect_detected(store_run):
    ev = list(store_run.events)
    del ev[first(ev, lambda e: e.kind is EventKind.DISCONNECT)]
    problems = protocol.check_protocol(renumber(ev), store_run.servers)
    assert any("never disconnected" in p or "accepted" in p for p in problems)


def test_foreign_message_detected(store_run):
    ev = list(store_run.events)
    k = first(ev, lambda e: e.kind is EventKind.RECEIVE and e.dst == store_run.servers[0].element(0))
    ev.insert(k + 1, dataclasses.replace(ev[k], src=EndId(9, 9)))
    problems = protocol.check_protocol(renumber(ev), store_run.servers)
    assert any("foreign message" in p for p in problems)


def test_swapped_header_detected(store_run):
    ev = list(store_run.events)
    end = store_run.servers[0].element(0)
    a = first(ev, lambda e: e.kind is EventKind.RECEIVE and e.dst == end)
    b = first(ev[a + 1:], lambda e: e.kind is EventKind.RECEIVE and e.dst == end) + a + 1
    ev[a], ev[b] = dataclasses.replace(ev[a], data=ev[b].data), dataclasses.replace(ev[b], data=ev[a].data)
    problems = protocol.check_protocol(renumber(ev), store_run.servers)
    assert any("client end id" in p for p in problems)


def test_missing_reply_detected(store_run):
    ev = list(store_run.events)
    end = store_run.servers[0].element(0)
    k = first(ev, lambda e: e.kind is EventKind.SEND and e.src == end)
    del ev[k]
    problems = protocol.check_protocol(renumber(ev), store_run.servers)
    assert any("replies" in p for p in problems)


def test_message_outside_session_detected(store_run):
    ev = list(store_run.events)
    end = store_run.servers[0].element(0)
    k = first(ev, lambda e: e.kind is EventKind.RECEIVE and e.dst == end)
    ev.insert(0, dataclasses.replace(ev[k]))
    problems = protocol.check_protocol(renumber(ev), store_run.servers)
    assert any("outside any session" in p for p in problems)


def test_backoff_delays_and_count(store_run):
    assert protocol.backoff_delays(store_run.events) == {}
    assert protocol.count(store_run.events, EventKind.CONNECT_ACCEPT) == 7  # 6 calls and a termination
