"""Trace analysis of server calls.

A *session* is everything a server element end sees between accepting a
connection and the client's disconnect. The checker verifies that every
session carries exactly one well-formed call (or one termination request)
from exactly one client, in the fixed message order.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable

from .runtime import TERMINATE, ServerBinding
from .trace import EndId, Event, EventKind


@dataclass
class Session:
    server: EndId
    binding: ServerBinding
    element: int
    client: EndId
    thread: int
    accept: Event
    disconnect: Event | None = None
    received: list[Event] = field(default_factory=list)  # at the server end
    replies: list[Event] = field(default_factory=list)  # sent by the server end

    @property
    def call_id(self) -> int | None:
        if len(self.received) < 2 or len(self.received[1].data or ()) != 1:
            return None
        return self.received[1].data[0]

    @property
    def terminates(self) -> bool:
        return self.call_id == TERMINATE

    @property
    def call(self) -> str | None:
        cid = self.call_id
        sigs = self.binding.definition.interface
        return sigs[cid].name if cid is not None and 0 <= cid < len(sigs) else None

    @property
    def actuals(self) -> list[int]:
        return [e.data[0] for e in self.received[2:] if e.data]

    @property
    def returns(self) -> list[int]:
        return [e.data[0] for e in self.replies if e.data]

    @property
    def local(self) -> bool:
        return self.client.proc == self.server.proc


def server_ends(servers: Iterable[ServerBinding]) -> dict[EndId, tuple[ServerBinding, int]]:
    return {b.element(i): (b, i) for b in servers for i in range(b.extent)}


def sessions(events: list[Event], servers: Iterable[ServerBinding]) -> list[Session]:
    """All sessions in accept order."""
    ends = server_ends(servers)
    open_: dict[EndId, Session] = {}
    out: list[Session] = []
    for e in events:
        if e.kind is EventKind.CONNECT_ACCEPT and e.dst in ends:
            b, i = ends[e.dst]
            s = Session(e.dst, b, i, e.src, e.thread, e)
            open_[e.dst] = s
            out.append(s)
        elif e.kind is EventKind.RECEIVE and e.dst in ends and e.dst in open_:
            open_[e.dst].received.append(e)
        elif e.kind is EventKind.SEND and e.src in ends and e.src in open_:
            open_[e.src].replies.append(e)
        elif e.kind is EventKind.DISCONNECT and e.dst in open_:
            open_.pop(e.dst).disconnect = e
    return out


def check_protocol(events: list[Event], servers: Iterable[ServerBinding]) -> list[str]:
    """Return a description of every protocol violation found (empty if none)."""
    servers = list(servers)
    ends = server_ends(servers)
    problems: list[str] = []
    by_thread: dict[int, list[Event]] = {}
    for e in events:
        by_thread.setdefault(e.thread, []).append(e)
    seqs = {t: [e.seq for e in evs] for t, evs in by_thread.items()}
    all_sessions = sessions(events, servers)
    for s in all_sessions:
        where = f"session at {s.server} accepted at seq {s.accept.seq}"
        if s.disconnect is None:
            problems.append(f"{where}: never disconnected")
            continue
        if s.disconnect.src != s.client or s.disconnect.thread != s.thread:
            problems.append(f"{where}: disconnected by a different end or thread")
        for e in s.received:
            if e.src != s.client:
                problems.append(f"{where}: foreign message from {e.src} at seq {e.seq}")
        for e in s.replies:
            if e.dst != s.client:
                problems.append(f"{where}: reply to {e.dst} instead of {s.client} at seq {e.seq}")
        if not s.received or s.received[0].data != (s.client.pack(),):
            problems.append(f"{where}: first message is not the client end id")
        cid = s.call_id
        if s.terminates:
            expect_in, expect_out = 2, 0
        elif s.call is None:
            problems.append(f"{where}: bad call id {cid}")
            continue
        else:
            sig = s.binding.definition.interface[cid]
            expect_in, expect_out = 2 + sig.arity, sig.var_count
        if len(s.received) != expect_in:
            problems.append(f"{where}: {len(s.received)} messages in, expected {expect_in}")
        if len(s.replies) != expect_out:
            problems.append(f"{where}: {len(s.replies)} replies, expected {expect_out}")
        if any(r.seq < m.seq for r in s.replies for m in s.received):
            problems.append(f"{where}: reply sent before all actuals arrived")
        # client side: sends, then receives, nothing else on the client thread
        mine = by_thread.get(s.thread, [])
        lo = bisect.bisect_right(seqs.get(s.thread, []), s.accept.seq)
        window = []
        for e in mine[lo:]:
            if e.seq >= s.disconnect.seq:
                break
            window.append(e)
        kinds = [e.kind for e in window]
        n_out = kinds.count(EventKind.SEND)
        if n_out != expect_in or any(e.kind is EventKind.SEND and e.dst != s.server for e in window):
            problems.append(f"{where}: client sent {n_out} messages, expected {expect_in} to {s.server}")
        if kinds != [EventKind.SEND] * n_out + [EventKind.RECEIVE] * (len(kinds) - n_out):
            problems.append(f"{where}: client events out of order: {[k.value for k in kinds]}")
    # outside sessions nothing may reach a server end
    in_session = {id(e) for s in all_sessions for e in s.received}
    for e in events:
        if e.kind is EventKind.RECEIVE and e.dst in ends and id(e) not in in_session:
            problems.append(f"message to {e.dst} outside any session at seq {e.seq}")
    return problems


def call_sessions(events: list[Event], servers: Iterable[ServerBinding]) -> list[Session]:
    """Sessions carrying calls (termination requests excluded)."""
    return [s for s in sessions(events, servers) if not s.terminates]


def cross_processor_call_messages(events: list[Event], servers: Iterable[ServerBinding]) -> list[Event]:
    """Call messages between ends on different processors: the server's
    Receive event for each inbound message and its Send for each reply."""
    out: list[Event] = []
    for s in call_sessions(events, servers):
        out += [e for e in s.received + s.replies if e.src.proc != e.dst.proc]
    return out


def backoff_delays(events: list[Event]) -> dict[int, list[int]]:
    """BackoffSleep delays per thread, in trace order."""
    out: dict[int, list[int]] = {}
    for e in events:
        if e.kind is EventKind.BACKOFF_SLEEP:
            out.setdefault(e.thread, []).append(e.delay)
    return out


def count(events: list[Event], kind: EventKind) -> int:
    return sum(1 for e in events if e.kind is kind)
