"""Deterministic simulator of a message-passing multiprocessor.

Threads are Python generators that yield operation records (``Send``,
``Connect``, ``Spawn`` ...) and receive each operation's result back.
A single coordinator runs them round-robin; logical time only advances
through message latency and backoff sleeps, so a run is a pure function of
the thread bodies and the :class:`MachineConfig`.

Communication is synchronised: a send completes when a receive on the
destination end takes it. An end created with a queue capacity is
connection-managed: while connected it accepts messages only from its
peer, further connect requests wait in a bounded FIFO, and requests beyond
capacity are rejected.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Generator, Iterable

from . import errors as E
from .trace import EndId, Event, EventKind

Body = Generator[Any, Any, Any]
WaitHint = Callable[[], Iterable[int]]

ACCEPTED, QUEUED, REJECTED = "accepted", "queued", "rejected"


@dataclass
class MachineConfig:
    processors: int = 64
    seed: int = 0
    queue_capacity: int | None = None  # None: derived from client count
    backoff_base: int = 4
    backoff_factor: int = 2
    backoff_cap: int = 256
    hop_latency: int = 1

    def __post_init__(self) -> None:
        if self.processors < 1:
            raise ValueError("processor count must be at least 1")
        for name in ("backoff_base", "backoff_factor", "backoff_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.hop_latency < 0:
            raise ValueError("hop_latency must be non-negative")
        if self.queue_capacity is not None and self.queue_capacity < 1:
            raise ValueError("queue capacity must be at least 1")

    def backoff_delay(self, attempt: int) -> int:
        return min(self.backoff_base * self.backoff_factor ** attempt, self.backoff_cap)


# -- operations yielded by threads ----------------------------------------


@dataclass
class Spawn:
    """Start threads; each entry is (processor, body, label). Result: thread ids."""
    entries: list[tuple[int, Body, str]]


@dataclass
class Join:
    threads: list[int]


@dataclass
class NewEnd:
    proc: int
    capacity: int | None = None  # set for connection-managed ends


@dataclass
class NewEndArray:
    """Ends with one common local id on each listed processor. Result: the local id."""
    procs: list[int]
    capacity: int | None = None


@dataclass
class WhoAmI:
    """Result: the calling thread's id."""


@dataclass
class Own:
    """Make the calling thread the owner of an end (for wait graphs)."""
    end: EndId


@dataclass
class SetDest:
    end: EndId
    dest: EndId


@dataclass
class Connect:
    end: EndId


@dataclass
class Disconnect:
    end: EndId


@dataclass
class Send:
    end: EndId
    words: tuple[int, ...]


@dataclass
class Receive:
    end: EndId
    waits_for: WaitHint | None = None


@dataclass
class Sleep:
    ticks: int


@dataclass
class Wait:
    """Block until some thread yields ``Notify`` with the same key."""
    key: Any
    waits_for: WaitHint | None = None
    reason: str = "waits for a signal"


@dataclass
class Notify:
    key: Any


# -- machine state ----------------------------------------------------------


@dataclass
class ChannelEnd:
    id: EndId
    capacity: int | None
    owner: int | None
    dest: EndId | None = None
    peer: EndId | None = None
    queue: deque = field(default_factory=deque)  # (end, thread) waiting to connect
    pending: deque = field(default_factory=deque)  # (src end, words, sender thread)
    receiver: int | None = None  # thread blocked in Receive

    @property
    def managed(self) -> bool:
        return self.capacity is not None


@dataclass
class Thread:
    tid: int
    proc: int
    body: Body
    label: str
    parent: int | None
    resume: Any = None
    done: bool = False
    reason: str = ""
    blocked_on: Any = None
    joiners: list[int] = field(default_factory=list)
    join_left: set[int] = field(default_factory=set)
    on_exit: list[Callable[[], None]] = field(default_factory=list)


class Machine:
    def __init__(self, config: MachineConfig | None = None):
        self.config = config or MachineConfig()
        self.rng = random.Random(self.config.seed)
        self.time = 0
        self.events: list[Event] = []
        self.threads: dict[int, Thread] = {}
        self.ends: dict[EndId, ChannelEnd] = {}
        self.next_local: dict[int, int] = {}
        self.runq: deque[int] = deque()
        self.timers: list[tuple[int, int, Callable[[], None]]] = []
        self.timer_seq = 0
        self.waiting: dict[Any, list[int]] = {}
        self.live = 0

    # -- direct API -------------------------------------------------------

    def check_proc(self, proc: int) -> None:
        if not 0 <= proc < self.config.processors:
            raise E.InvalidProcessor(f"processor {proc} outside 0..{self.config.processors - 1}")

    def emit(self, thread: Thread | None, kind: EventKind, proc: int | None = None, **kw: Any) -> None:
        self.events.append(Event(
            seq=len(self.events), time=self.time,
            proc=thread.proc if proc is None else proc,
            thread=thread.tid if thread is not None else -1,
            kind=kind, **kw))

    def spawn(self, proc: int, body: Body, label: str = "", parent: int | None = None,
              schedule: bool = True) -> int:
        self.check_proc(proc)
        tid = len(self.threads)
        t = Thread(tid, proc, body, label, parent)
        self.threads[tid] = t
        self.live += 1
        self.emit(t, EventKind.THREAD_START)
        if schedule:
            self.runq.append(tid)
        return tid

    def new_end(self, proc: int, capacity: int | None = None, owner: int | None = None) -> EndId:
        self.check_proc(proc)
        local = self.next_local.get(proc, 0)
        self.next_local[proc] = local + 1
        eid = EndId(proc, local)
        self.ends[eid] = ChannelEnd(eid, capacity, owner)
        return eid

    def new_end_array(self, procs: list[int], capacity: int | None = None, owner: int | None = None) -> int:
        for p in procs:
            self.check_proc(p)
        local = max((self.next_local.get(p, 0) for p in procs), default=0)
        for p in procs:
            self.next_local[p] = local + 1
            eid = EndId(p, local)
            self.ends[eid] = ChannelEnd(eid, capacity, owner)
        return local

    def end(self, eid: EndId) -> ChannelEnd:
        try:
            return self.ends[eid]
        except KeyError:
            raise E.MachineError(f"no channel end {eid}") from None

    def run(self) -> list[Event]:
        """Run until every thread has ended; raises DeadlockDetected if they cannot."""
        while True:
            if self.runq:
                self.step_thread(self.threads[self.runq.popleft()])
            elif self.timers:
                when, _, action = heapq.heappop(self.timers)
                self.time = max(self.time, when)
                action()
            elif self.live:
                raise self.deadlock()
            else:
                return self.events

    # -- scheduling -------------------------------------------------------

    def wake(self, t: Thread, value: Any = None) -> None:
        t.resume = value
        t.reason = ""
        t.blocked_on = None
        self.runq.append(t.tid)

    def at(self, delay: int, action: Callable[[], None]) -> None:
        if delay <= 0:
            action()
            return
        heapq.heappush(self.timers, (self.time + delay, self.timer_seq, action))
        self.timer_seq += 1

    def block(self, t: Thread, reason: str, on: Any = None) -> None:
        t.reason = reason
        t.blocked_on = on

    def step_thread(self, t: Thread) -> None:
        """Resume ``t`` and run it until it blocks or ends."""
        value = t.resume
        t.resume = None
        while True:
            try:
                op = t.body.send(value)
            except StopIteration:
                self.finish(t)
                return
            value, blocked = self.perform(t, op)
            if blocked:
                return

    def finish(self, t: Thread) -> None:
        t.done = True
        self.live -= 1
        for hook in t.on_exit:
            hook()
        self.emit(t, EventKind.THREAD_END)
        for j in t.joiners:
            waiter = self.threads[j]
            waiter.join_left.discard(t.tid)
            if not waiter.join_left:
                self.wake(waiter)

    # -- operations -------------------------------------------------------

    def perform(self, t: Thread, op: Any) -> tuple[Any, bool]:
        if isinstance(op, Spawn):
            tids = [self.spawn(p, body, label, t.tid, schedule=False) for p, body, label in op.entries]
            order = list(tids)
            if len(order) > 1:
                self.rng.shuffle(order)
            self.runq.extend(order)
            return tids, False
        if isinstance(op, Join):
            left = {x for x in op.threads if not self.threads[x].done}
            if not left:
                return None, False
            t.join_left = left
            for x in left:
                self.threads[x].joiners.append(t.tid)
            self.block(t, "joins children", ("join",))
            return None, True
        if isinstance(op, NewEnd):
            return self.new_end(op.proc, op.capacity, t.tid), False
        if isinstance(op, NewEndArray):
            return self.new_end_array(op.procs, op.capacity, t.tid), False
        if isinstance(op, WhoAmI):
            return t.tid, False
        if isinstance(op, Own):
            self.end(op.end).owner = t.tid
            return None, False
        if isinstance(op, SetDest):
            self.end(op.end).dest = op.dest
            self.end(op.dest)
            return None, False
        if isinstance(op, Connect):
            return self.connect(t, op.end)
        if isinstance(op, Disconnect):
            self.disconnect(t, op.end)
            return None, False
        if isinstance(op, Send):
            return self.send(t, op.end, tuple(op.words))
        if isinstance(op, Receive):
            return self.receive(t, op.end, op.waits_for)
        if isinstance(op, Sleep):
            self.emit(t, EventKind.BACKOFF_SLEEP, delay=op.ticks)
            self.block(t, f"sleeps {op.ticks} ticks", ("sleep",))
            self.at(op.ticks, lambda: self.wake(t))
            return None, True
        if isinstance(op, Wait):
            self.waiting.setdefault(op.key, []).append(t.tid)
            self.block(t, op.reason, ("wait", op.waits_for))
            return None, True
        if isinstance(op, Notify):
            for tid in self.waiting.pop(op.key, []):
                self.wake(self.threads[tid])
            return None, False
        raise TypeError(f"unknown machine operation {op!r}")

    def target(self, eid: EndId) -> ChannelEnd:
        src = self.end(eid)
        if src.dest is None:
            raise E.NoDestination(f"channel end {eid} has no destination")
        return self.end(src.dest)

    def connect(self, t: Thread, eid: EndId) -> tuple[Any, bool]:
        dst = self.target(eid)
        if not dst.managed:
            raise E.MachineError(f"channel end {dst.id} does not accept connections")
        self.emit(t, EventKind.CONNECT_REQUEST, src=eid, dst=dst.id)
        if dst.peer is None:
            dst.peer = eid
            self.emit(t, EventKind.CONNECT_ACCEPT, src=eid, dst=dst.id)
            return ACCEPTED, False
        if dst.peer == eid:
            raise E.MachineError(f"channel end {eid} is already connected to {dst.id}")
        if len(dst.queue) < dst.capacity:
            dst.queue.append((eid, t.tid))
            self.block(t, f"queued for connection to {dst.id}", ("connect", dst.id))
            return None, True
        self.emit(t, EventKind.CONNECT_REJECT, src=eid, dst=dst.id)
        return REJECTED, False

    def disconnect(self, t: Thread, eid: EndId) -> None:
        dst = self.target(eid)
        if dst.peer != eid:
            raise E.NotConnected(f"channel end {eid} is not connected to {dst.id}")
        self.emit(t, EventKind.DISCONNECT, src=eid, dst=dst.id)
        if dst.queue:
            nxt, tid = dst.queue.popleft()
            dst.peer = nxt
            waiter = self.threads[tid]
            self.emit(waiter, EventKind.CONNECT_ACCEPT, src=nxt, dst=dst.id)
            self.wake(waiter, QUEUED)
            return
        dst.peer = None

    def send(self, t: Thread, eid: EndId, words: tuple[int, ...]) -> tuple[Any, bool]:
        dst = self.target(eid)
        if dst.managed and dst.peer != eid:
            raise E.StrayMessage(f"message from {eid} to {dst.id}, which is connected to "
                                 f"{dst.peer if dst.peer is not None else 'nobody'}")
        self.block(t, f"sends to {dst.id}", ("send", dst.id))
        if dst.receiver is not None:
            receiver = self.threads[dst.receiver]
            dst.receiver = None
            self.match(t, receiver, eid, dst, words)
        else:
            dst.pending.append((eid, words, t.tid))
        return None, True

    def receive(self, t: Thread, eid: EndId, hint: WaitHint | None) -> tuple[Any, bool]:
        end = self.end(eid)
        if end.receiver is not None:
            raise E.MachineError(f"two threads receive on channel end {eid}")
        for k, (src, words, tid) in enumerate(end.pending):
            if not end.managed or src == end.peer:
                del end.pending[k]
                self.block(t, f"receives on {eid}", ("recv", eid, hint))
                self.match(self.threads[tid], t, src, end, words)
                return None, True
        end.receiver = t.tid
        self.block(t, f"receives on {eid}", ("recv", eid, hint))
        return None, True

    def match(self, sender: Thread, receiver: Thread, src: EndId, dst: ChannelEnd,
              words: tuple[int, ...]) -> None:
        latency = 0 if src.proc == dst.id.proc else self.config.hop_latency
        self.emit(sender, EventKind.SEND, src=src, dst=dst.id, length=len(words), data=words)

        def deliver() -> None:
            self.emit(receiver, EventKind.RECEIVE, src=src, dst=dst.id, length=len(words),
                      delay=latency, data=words)
            self.wake(sender)
            self.wake(receiver, words)

        self.at(latency, deliver)

    # -- deadlock ---------------------------------------------------------

    def deadlock(self) -> E.DeadlockDetected:
        graph: dict[int, list[int]] = {}
        reasons: dict[int, str] = {}
        labels: dict[int, str] = {}
        for t in self.threads.values():
            if t.done:
                continue
            graph[t.tid] = sorted(set(self.waits_for(t)) - {t.tid})
            reasons[t.tid] = t.reason
            labels[t.tid] = t.label
        return E.DeadlockDetected(graph, reasons, labels)

    def owner_of(self, eid: EndId | None) -> list[int]:
        if eid is None:
            return []
        owner = self.ends[eid].owner
        return [owner] if owner is not None and not self.threads[owner].done else []

    def waits_for(self, t: Thread) -> list[int]:
        on = t.blocked_on or ()
        kind = on[0] if on else None
        if kind == "join":
            return sorted(t.join_left)
        if kind == "send":
            return self.owner_of(on[1])
        if kind == "connect":
            return self.owner_of(self.ends[on[1]].peer)
        if kind == "recv":
            end = self.ends[on[1]]
            if end.managed and end.peer is not None:
                return self.owner_of(end.peer)
            hint = on[2]
            return [x for x in hint() if not self.threads[x].done] if hint else []
        if kind == "wait":
            hint = on[1]
            return [x for x in hint() if not self.threads[x].done] if hint else []
        return []

    # -- queries ----------------------------------------------------------

    def descendants(self, tid: int) -> list[int]:
        """Live threads spawned, directly or not, by ``tid``."""
        out = []
        for t in self.threads.values():
            p = t.parent
            while p is not None and p != tid:
                p = self.threads[p].parent
            if p == tid and not t.done:
                out.append(t.tid)
        return out
