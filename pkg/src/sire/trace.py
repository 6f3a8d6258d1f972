"""Machine events and their line-oriented ``key=value`` text form."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

FIELDS = ("seq", "time", "proc", "thread", "kind", "from", "to", "len", "delay", "data")


class EventKind(Enum):
    THREAD_START = "ThreadStart"
    THREAD_END = "ThreadEnd"
    SEND = "Send"
    RECEIVE = "Receive"
    CONNECT_REQUEST = "ConnectRequest"
    CONNECT_ACCEPT = "ConnectAccept"
    CONNECT_REJECT = "ConnectReject"
    DISCONNECT = "Disconnect"
    BACKOFF_SLEEP = "BackoffSleep"


@dataclass(frozen=True, order=True)
class EndId:
    """A channel end: processor in the high half of a word, local id in the low half."""

    proc: int
    local: int

    def pack(self) -> int:
        return (self.proc << 32) | self.local

    @classmethod
    def unpack(cls, word: int) -> "EndId":
        return cls(word >> 32, word & 0xFFFFFFFF)

    @classmethod
    def parse(cls, text: str) -> "EndId":
        p, l = text.split(":")
        return cls(int(p), int(l))

    def __str__(self) -> str:
        return f"{self.proc}:{self.local}"


@dataclass(frozen=True)
class Event:
    seq: int
    time: int
    proc: int
    thread: int
    kind: EventKind
    src: EndId | None = None
    dst: EndId | None = None
    length: int | None = None
    delay: int | None = None
    data: tuple[int, ...] | None = None

    def format(self) -> str:
        parts = [f"seq={self.seq}", f"time={self.time}", f"proc={self.proc}",
                 f"thread={self.thread}", f"kind={self.kind.value}"]
        if self.src is not None:
            parts.append(f"from={self.src}")
        if self.dst is not None:
            parts.append(f"to={self.dst}")
        if self.length is not None:
            parts.append(f"len={self.length}")
        if self.delay is not None:
            parts.append(f"delay={self.delay}")
        if self.data is not None:
            parts.append("data=" + ",".join(str(w) for w in self.data))
        return " ".join(parts)


def format_trace(events: list[Event]) -> str:
    return "".join(e.format() + "\n" for e in events)


def parse_line(line: str) -> Event:
    kv = dict(item.split("=", 1) for item in line.split())
    unknown = set(kv) - set(FIELDS)
    if unknown:
        raise ValueError(f"unknown trace fields {sorted(unknown)}")
    data = kv.get("data")
    return Event(
        seq=int(kv["seq"]),
        time=int(kv["time"]),
        proc=int(kv["proc"]),
        thread=int(kv["thread"]),
        kind=EventKind(kv["kind"]),
        src=EndId.parse(kv["from"]) if "from" in kv else None,
        dst=EndId.parse(kv["to"]) if "to" in kv else None,
        length=int(kv["len"]) if "len" in kv else None,
        delay=int(kv["delay"]) if "delay" in kv else None,
        data=tuple(int(w) for w in data.split(",")) if data else (() if data == "" else None),
    )


def parse_trace(text: str) -> list[Event]:
    return [parse_line(line) for line in text.splitlines() if line.strip()]
