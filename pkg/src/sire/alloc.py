"""Compile-time processor allocation.

Every subtree gets a footprint (the processors it needs) and a base
processor. Distributed components take consecutive disjoint blocks, layered
components and sequential steps share their parent's base. Replicated bodies
are recorded at iteration 0; iteration k of a distributed replicator sits at
``base + k * footprint(body)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .errors import Pos
from .frontend import ast

LEAVES = (ast.Skip, ast.Assign, ast.Output, ast.Input, ast.ServerCall)


def footprint(node: Any, memo: dict[int, int] | None = None) -> int:
    """Processor count needed by an elaborated subtree."""
    if memo is not None and id(node) in memo:
        return memo[id(node)]
    w = _footprint(node, memo)
    if memo is not None:
        memo[id(node)] = w
    return w


def _footprint(node: Any, memo: dict[int, int] | None) -> int:
    if isinstance(node, LEAVES):
        return 1
    if isinstance(node, (ast.Seq, ast.LocalPar)):
        return max((footprint(c, memo) for c in node.children), default=1)
    if isinstance(node, ast.DistPar):
        return sum(footprint(c, memo) for c in node.children)
    if isinstance(node, ast.SeqRep):
        return footprint(node.body, memo)
    if isinstance(node, ast.ParRep):
        body = footprint(node.body, memo)
        return node.extent * body if node.distributed else body
    if isinstance(node, ast.Block):
        return 1 if node.body is None else footprint(node.body, memo)
    if isinstance(node, ast.ProcCall):
        return footprint(node.body, memo)
    if isinstance(node, ast.ServerInstance):
        return node.extent
    if isinstance(node, ast.ServerSpec):
        n = node.instance.extent
        body = footprint(node.body, memo)
        return n + body if node.op == "&" else max(n, body)
    raise TypeError(f"no footprint for {node!r}")


@dataclass(frozen=True)
class Placement:
    base: int
    width: int


@dataclass
class AllocationMap:
    placements: dict[int, Placement] = field(default_factory=dict)
    positions: dict[int, Pos | None] = field(default_factory=dict)
    total: int = 0

    def __getitem__(self, node_id: int) -> Placement:
        return self.placements[node_id]

    def base(self, node: Any) -> int:
        return self.placements[node.node_id].base

    def width(self, node: Any) -> int:
        return self.placements[node.node_id].width

    def format(self) -> str:
        lines = []
        for nid in sorted(self.placements):
            p = self.placements[nid]
            pos = self.positions.get(nid)
            lines.append(f"{nid}\t{p.base}\t{p.width}\t{pos if pos is not None else '-'}")
        return "\n".join(lines) + ("\n" if lines else "")


def allocate(program: ast.Program) -> AllocationMap:
    """Place every process node of an elaborated, numbered program; root at 0."""
    amap = AllocationMap()
    memo: dict[int, int] = {}

    def place(node: Any, base: int) -> None:
        amap.placements[node.node_id] = Placement(base, footprint(node, memo))
        amap.positions[node.node_id] = node.pos
        if isinstance(node, ast.DistPar):
            b = base
            for child in node.children:
                place(child, b)
                b += footprint(child, memo)
        elif isinstance(node, ast.ServerSpec):
            place(node.instance, base)
            place(node.body, base + node.instance.extent if node.op == "&" else base)
        else:
            for child in ast.child_processes(node):
                place(child, base)

    place(program.main, 0)
    amap.total = amap.placements[program.main.node_id].width
    return amap
