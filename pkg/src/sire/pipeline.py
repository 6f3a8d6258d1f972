"""Source text to runnable program: parse, resolve, elaborate, check, allocate."""

from __future__ import annotations

from dataclasses import dataclass

from . import sema
from .alloc import AllocationMap, allocate
from .frontend import ast, parse_source
from .machine import MachineConfig
from .runtime import RunResult, execute


@dataclass
class Compiled:
    program: ast.Program  # elaborated and numbered
    symbols: sema.SymbolTable
    extents: list[sema.StaticExtent]
    uses: dict[int, sema.Uses]
    alloc: AllocationMap

    @property
    def footprint(self) -> int:
        return self.alloc.total

    def run(self, config: MachineConfig | None = None) -> RunResult:
        return execute(self.program, self.alloc, self.uses, config)


def compile_program(program: ast.Program) -> Compiled:
    tree, table = sema.resolve(program)
    elaborated, extents = sema.check_static(tree)
    uses = sema.free_vars(elaborated)
    sema.check_disjoint_writes(elaborated, uses)
    return Compiled(elaborated, table, extents, uses, allocate(elaborated))


def compile_source(source: str) -> Compiled:
    return compile_program(parse_source(source))


def run_source(source: str, config: MachineConfig | None = None) -> RunResult:
    return compile_source(source).run(config)
