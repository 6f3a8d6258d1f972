"""Program tree for the notation.

Structural equality ignores source positions and every annotation added by
later passes, so a re-parsed pretty-printed tree compares equal to the
original.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Union

from ..errors import Pos


def _pos() -> Any:
    return field(default=None, compare=False, repr=False, kw_only=True)


def _ann() -> Any:
    return field(default=None, compare=False, repr=False, kw_only=True)


# -- expressions -----------------------------------------------------------


@dataclass
class IntLit:
    value: int
    pos: Pos | None = _pos()


@dataclass
class Name:
    ident: str
    subscripts: list[Expr] = field(default_factory=list)
    pos: Pos | None = _pos()
    sym: Any = _ann()


@dataclass
class BinOp:
    op: str  # one of + - * rem
    left: Expr
    right: Expr
    pos: Pos | None = _pos()


@dataclass
class Neg:
    operand: Expr
    pos: Pos | None = _pos()


Expr = Union[IntLit, Name, BinOp, Neg]


# -- declarations ----------------------------------------------------------


@dataclass
class VarDecl:
    names: list[str]
    dims: list[list[Expr]]  # one dimension list per name; [] for scalars
    pos: Pos | None = _pos()
    syms: Any = _ann()
    extents: Any = _ann()  # folded dims per name


@dataclass
class ChanDecl:
    names: list[str]
    dims: list[Expr]  # shared array shape, [] for single channels
    pos: Pos | None = _pos()
    syms: Any = _ann()
    extents: Any = _ann()


Decl = Union[VarDecl, ChanDecl]


# -- processes -------------------------------------------------------------


@dataclass
class Skip:
    pos: Pos | None = _pos()
    node_id: int | None = _ann()


@dataclass
class Assign:
    target: Name
    value: Expr
    pos: Pos | None = _pos()
    node_id: int | None = _ann()


@dataclass
class Output:
    chan: Name
    items: list[Expr]
    pos: Pos | None = _pos()
    node_id: int | None = _ann()


@dataclass
class Input:
    chan: Name
    targets: list[Name]
    pos: Pos | None = _pos()
    node_id: int | None = _ann()


@dataclass
class Seq:
    children: list[Process]
    pos: Pos | None = _pos()
    node_id: int | None = _ann()


@dataclass
class LocalPar:
    children: list[Process]
    pos: Pos | None = _pos()
    node_id: int | None = _ann()


@dataclass
class DistPar:
    children: list[Process]
    pos: Pos | None = _pos()
    node_id: int | None = _ann()


@dataclass
class SeqRep:
    index: str
    base: Expr
    count: Expr
    body: Process
    pos: Pos | None = _pos()
    node_id: int | None = _ann()
    index_sym: Any = _ann()
    extent: int | None = _ann()


@dataclass
class ParRep:
    index: str
    base: Expr
    count: Expr
    body: Process
    distributed: bool = True
    pos: Pos | None = _pos()
    node_id: int | None = _ann()
    index_sym: Any = _ann()
    extent: int | None = _ann()


@dataclass
class ServerSpec:
    name: str
    definition: str
    args: list[Expr]
    extents: list[Expr]
    op: str  # '&' places servers before the body, '|' layers them with it
    body: Process
    pos: Pos | None = _pos()
    node_id: int | None = _ann()
    sym: Any = _ann()
    def_sym: Any = _ann()
    dims: Any = _ann()  # folded extents
    instance: Any = _ann()  # ServerInstance after elaboration


@dataclass
class ServerCall:
    target: Name
    call: str
    actuals: list[Expr]
    pos: Pos | None = _pos()
    node_id: int | None = _ann()
    call_id: int | None = _ann()
    sig: Any = _ann()


@dataclass
class ProcCall:
    name: str
    actuals: list[Expr]
    pos: Pos | None = _pos()
    node_id: int | None = _ann()
    sym: Any = _ann()
    body: Any = _ann()  # instantiated callee body after elaboration


@dataclass
class Block:
    decls: list[Decl]
    body: Process | None
    pos: Pos | None = _pos()
    node_id: int | None = _ann()


Process = Union[
    Skip, Assign, Output, Input, Seq, LocalPar, DistPar, SeqRep, ParRep,
    ServerSpec, ServerCall, ProcCall, Block,
]

COMPOSITIONS = {";": Seq, "|": LocalPar, "&": DistPar}
SEPARATOR = {Seq: ";", LocalPar: "|", DistPar: "&"}


# -- definitions -----------------------------------------------------------


@dataclass
class Formal:
    mode: str  # val | var | chan | server
    name: str
    dims: list[Expr] = field(default_factory=list)
    server_def: str | None = None
    pos: Pos | None = _pos()
    sym: Any = _ann()


@dataclass
class Param:
    mode: str  # val | var
    name: str
    pos: Pos | None = _pos()


@dataclass
class CallSig:
    name: str
    params: list[Param]
    pos: Pos | None = _pos()

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def var_count(self) -> int:
        return sum(1 for p in self.params if p.mode == "var")


@dataclass
class AcceptArm:
    call: str
    params: list[Param]
    handler: Process
    pos: Pos | None = _pos()
    syms: Any = _ann()
    call_id: int | None = _ann()


@dataclass
class ConstDef:
    name: str
    value: Expr
    pos: Pos | None = _pos()
    sym: Any = _ann()


@dataclass
class ProcDef:
    name: str
    formals: list[Formal]
    body: Process
    pos: Pos | None = _pos()
    sym: Any = _ann()


@dataclass
class ServerDef:
    name: str
    formals: list[Formal]
    interface: list[CallSig]
    decls: list[Decl]
    initial: Process | None
    arms: list[AcceptArm]
    final: Process | None
    pos: Pos | None = _pos()
    sym: Any = _ann()

    def call_id(self, name: str) -> int | None:
        for i, sig in enumerate(self.interface):
            if sig.name == name:
                return i
        return None


Definition = Union[ConstDef, ProcDef, ServerDef]


@dataclass
class ServerInstance:
    """The replicated server processes of one ServerSpec, as placed by alloc."""

    definition: ServerDef
    extent: int
    pos: Pos | None = _pos()
    node_id: int | None = _ann()


@dataclass
class Program:
    definitions: list[Definition]
    main: Process
    pos: Pos | None = _pos()


# -- traversal -------------------------------------------------------------


def child_processes(node: Any) -> list[Any]:
    """Direct process children in execution-relevant order.

    After elaboration, ProcCall and ServerSpec expose their instantiated
    callee bodies and server processes here as well.
    """
    if isinstance(node, (Seq, LocalPar, DistPar)):
        return list(node.children)
    if isinstance(node, (SeqRep, ParRep)):
        return [node.body]
    if isinstance(node, Block):
        return [node.body] if node.body is not None else []
    if isinstance(node, ProcCall):
        return [node.body] if node.body is not None else []
    if isinstance(node, ServerSpec):
        out = [node.instance] if node.instance is not None else []
        return out + [node.body]
    if isinstance(node, ServerInstance):
        d = node.definition
        out = []
        if d.initial is not None:
            out.append(d.initial)
        out.extend(arm.handler for arm in d.arms)
        if d.final is not None:
            out.append(d.final)
        return out
    return []


def walk(node: Any) -> Iterator[Any]:
    """Pre-order traversal over process nodes."""
    yield node
    for child in child_processes(node):
        yield from walk(child)
