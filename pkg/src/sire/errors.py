"""Diagnostics raised by every stage of the toolchain.

Static errors (lexing, parsing, semantic checks, machine sizing) map to exit
status 1, runtime faults to 2 and deadlocks to 3; see :mod:`sire.cli`.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Pos:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class SireError(Exception):
    exit_status = 1

    def __init__(self, message: str, pos: Pos | None = None):
        super().__init__(message)
        self.message = message
        self.pos = pos

    def diagnostic(self, filename: str = "<input>") -> str:
        if self.pos is None:
            return f"{filename}: {self.message}"
        return f"{filename}:{self.pos.line}:{self.pos.column}: {self.message}"


class StaticError(SireError):
    pass


class LexError(StaticError):
    pass


class ParseError(StaticError):
    def __init__(self, message: str, pos: Pos | None = None, expected: frozenset[str] = frozenset()):
        super().__init__(message, pos)
        self.expected = expected


class SemaError(StaticError):
    pass


class UndefinedName(SemaError):
    pass


class DuplicateName(SemaError):
    pass


class NotAServer(SemaError):
    pass


class UnknownCall(SemaError):
    pass


class ArityMismatch(SemaError):
    pass


class ModeMismatch(SemaError):
    pass


class TypeMismatch(SemaError):
    pass


class NonConstantExtent(SemaError):
    pass


class RecursionDetected(SemaError):
    def __init__(self, cycle: list[str], pos: Pos | None = None):
        super().__init__("recursion detected: " + " -> ".join(cycle + cycle[:1]), pos)
        self.cycle = cycle


class ParallelWriteConflict(SemaError):
    def __init__(self, name: str, first: Pos | None, second: Pos | None, reason: str = "written"):
        msg = f"variable '{name}' {reason} by more than one parallel component"
        if first is not None:
            msg += f" (also at {first})"
        super().__init__(msg, second or first)
        self.name = name
        self.positions = (first, second)


class ServerFootprintError(SemaError):
    """A server body would need more than its own processor."""


class FootprintExceedsMachine(StaticError):
    def __init__(self, footprint: int, processors: int, pos: Pos | None = None):
        super().__init__(
            f"program footprint is {footprint} processors but the machine has {processors}", pos
        )
        self.footprint = footprint
        self.processors = processors


class RuntimeFault(SireError):
    exit_status = 2


class SubscriptOutOfRange(RuntimeFault):
    pass


class UnknownCallId(RuntimeFault):
    pass


class MachineError(RuntimeFault):
    pass


class InvalidProcessor(MachineError):
    pass


class NoDestination(MachineError):
    pass


class NotConnected(MachineError):
    pass


class StrayMessage(MachineError):
    pass


class DeadlockDetected(SireError):
    exit_status = 3

    def __init__(self, wait_graph: dict[int, list[int]], reasons: dict[int, str], labels: dict[int, str]):
        self.wait_graph = wait_graph
        self.reasons = reasons
        self.labels = labels
        lines = ["deadlock detected; blocked threads:"]
        for tid in sorted(wait_graph):
            targets = ", ".join(f"t{t}" for t in wait_graph[tid]) or "nothing runnable"
            lines.append(f"  t{tid} [{labels.get(tid, '?')}] {reasons.get(tid, '')} -> waits for {targets}")
        cycle = self.cycle()
        if cycle:
            lines.append("  cycle: " + " -> ".join(f"t{t}" for t in cycle + cycle[:1]))
        super().__init__("\n".join(lines))

    def cycle(self) -> list[int]:
        """Return one cycle of the wait graph (smallest start id first), or []."""
        graph = self.wait_graph
        done: set[int] = set()

        def visit(node: int, stack: list[int]) -> list[int]:
            if node in stack:
                return stack[stack.index(node):]
            if node in done or node not in graph:
                return []
            stack.append(node)
            for nxt in sorted(graph[node]):
                found = visit(nxt, stack)
                if found:
                    return found
            stack.pop()
            done.add(node)
            return []

        for start in sorted(graph):
            found = visit(start, [])
            if found:
                return found
        return []
