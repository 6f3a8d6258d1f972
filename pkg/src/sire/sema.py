"""Name resolution and the static restrictions behind compile-time allocation.

Three passes run over a parsed program:

``resolve``
    links every identifier to a :class:`Symbol`, checks server calls against
    their interfaces and proc calls against their formals.
``check_static``
    proves the proc call graph acyclic, then elaborates the program: every
    proc call gets its own instantiated copy of the callee body, every server
    specification its own copy of the server definition, and every extent is
    folded to a constant under the constants visible at that instance.
``check_disjoint_writes``
    the occam parallel-usage rule over free variables: no two parallel
    components write the same variable, and none reads what a sibling writes.
    Arrays count as single variables.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Iterable

from . import errors as E
from .errors import Pos
from .frontend import ast

STORAGE_KINDS = frozenset({"var", "val", "varref", "index"})


@dataclass(eq=False)
class Symbol:
    name: str
    kind: str  # const | var | val | varref | index | chan | server | proc | serverdef
    uid: int
    pos: Pos | None = None
    rank: int = 0
    dims: list[ast.Expr] = field(default_factory=list)
    definition: Any = None  # ProcDef / ServerDef, or the ServerDef a server symbol refers to
    value: int | None = None  # folded constant

    def __deepcopy__(self, memo: dict) -> "Symbol":
        return self

    def __repr__(self) -> str:
        return f"<{self.kind} {self.name}#{self.uid}>"


class Scope:
    def __init__(self, parent: "Scope | None" = None):
        self.parent = parent
        self.names: dict[str, Symbol] = {}

    def declare(self, sym: Symbol) -> Symbol:
        if sym.name in self.names:
            raise E.DuplicateName(f"'{sym.name}' is already declared in this scope", sym.pos)
        self.names[sym.name] = sym
        return sym

    def lookup(self, name: str) -> Symbol | None:
        scope: Scope | None = self
        while scope is not None:
            if name in scope.names:
                return scope.names[name]
            scope = scope.parent
        return None


@dataclass
class SymbolTable:
    globals: dict[str, Symbol]
    symbols: list[Symbol]

    def lookup(self, name: str) -> Symbol | None:
        return self.globals.get(name)


@dataclass(frozen=True)
class StaticExtent:
    value: int
    origin: Pos | None


# ---------------------------------------------------------------------------
# resolution
# ---------------------------------------------------------------------------


class Resolver:
    def __init__(self) -> None:
        self.symbols: list[Symbol] = []
        self.globals = Scope()
        self.pending_consts: set[str] = set()

    def new(self, name: str, kind: str, pos: Pos | None, **kw: Any) -> Symbol:
        sym = Symbol(name, kind, len(self.symbols), pos, **kw)
        self.symbols.append(sym)
        return sym

    def run(self, program: ast.Program) -> SymbolTable:
        kinds = {ast.ConstDef: "const", ast.ProcDef: "proc", ast.ServerDef: "serverdef"}
        for d in program.definitions:
            d.sym = self.globals.declare(self.new(d.name, kinds[type(d)], d.pos, definition=d))
            if isinstance(d, ast.ConstDef):
                self.pending_consts.add(d.name)
        for d in program.definitions:
            if isinstance(d, ast.ConstDef):
                self.expr(d.value, self.globals)
                self.pending_consts.discard(d.name)
                d.sym.value = fold(d.value, {})
                if d.sym.value is None:
                    raise E.NonConstantExtent(f"constant '{d.name}' is not a compile-time value", d.value.pos)
        for d in program.definitions:
            if isinstance(d, ast.ProcDef):
                scope = self.formals(d.formals, Scope(self.globals))
                self.process(d.body, scope)
            elif isinstance(d, ast.ServerDef):
                self.server_def(d)
        self.process(program.main, self.globals)
        return SymbolTable(dict(self.globals.names), self.symbols)

    # -- definitions ------------------------------------------------------

    def formals(self, formals: list[ast.Formal], scope: Scope) -> Scope:
        for f in formals:
            if f.mode == "val":
                f.sym = self.new(f.name, "val", f.pos)
            elif f.mode == "var":
                f.sym = self.new(f.name, "varref", f.pos, rank=len(f.dims), dims=f.dims)
            elif f.mode == "chan":
                f.sym = self.new(f.name, "chan", f.pos)
            else:
                d = self.globals.lookup(f.server_def or "")
                if d is None:
                    raise E.UndefinedName(f"undefined server '{f.server_def}'", f.pos)
                if d.kind != "serverdef":
                    raise E.NotAServer(f"'{f.server_def}' is not a server definition", f.pos)
                f.sym = self.new(f.name, "server", f.pos, rank=len(f.dims), dims=f.dims,
                                 definition=d.definition)
            scope.declare(f.sym)
        for f in formals:
            for dim in f.dims:
                self.expr(dim, scope)
        return scope

    def server_def(self, d: ast.ServerDef) -> None:
        for f in d.formals:
            if f.mode == "var":
                raise E.ModeMismatch(f"server '{d.name}' cannot take 'var' parameter '{f.name}'", f.pos)
        scope = self.formals(d.formals, Scope(self.globals))
        seen: set[str] = set()
        for sig in d.interface:
            if sig.name in seen:
                raise E.DuplicateName(f"call '{sig.name}' declared twice", sig.pos)
            seen.add(sig.name)
            names = [p.name for p in sig.params]
            if len(set(names)) != len(names):
                raise E.DuplicateName(f"duplicate parameter name in call '{sig.name}'", sig.pos)
        body = Scope(scope)
        self.decls(d.decls, body)
        if d.initial is not None:
            self.process(d.initial, body)
        armed: set[str] = set()
        for arm in d.arms:
            cid = d.call_id(arm.call)
            if cid is None:
                raise E.UnknownCall(f"server '{d.name}' has no call '{arm.call}'", arm.pos)
            if arm.call in armed:
                raise E.DuplicateName(f"call '{arm.call}' accepted twice", arm.pos)
            armed.add(arm.call)
            sig = d.interface[cid]
            if len(arm.params) != sig.arity:
                raise E.ArityMismatch(
                    f"accept '{arm.call}' takes {len(arm.params)} parameters, interface says {sig.arity}", arm.pos)
            for p, q in zip(arm.params, sig.params):
                if p.mode != q.mode:
                    raise E.ModeMismatch(f"parameter '{p.name}' of '{arm.call}' must be '{q.mode}'", p.pos)
            arm.call_id = cid
            arm_scope = Scope(body)
            arm.syms = [arm_scope.declare(self.new(p.name, "val" if p.mode == "val" else "var", p.pos))
                        for p in arm.params]
            self.process(arm.handler, arm_scope)
        for sig in d.interface:
            if sig.name not in armed:
                raise E.UnknownCall(f"call '{sig.name}' of server '{d.name}' has no accept arm", sig.pos)
        if d.final is not None:
            self.process(d.final, body)

    def decls(self, decls: list[ast.Decl], scope: Scope) -> None:
        for decl in decls:
            if isinstance(decl, ast.VarDecl):
                for dims in decl.dims:
                    for dim in dims:
                        self.expr(dim, scope)
                decl.syms = [scope.declare(self.new(n, "var", decl.pos, rank=len(ds), dims=ds))
                             for n, ds in zip(decl.names, decl.dims)]
            else:
                for dim in decl.dims:
                    self.expr(dim, scope)
                decl.syms = [scope.declare(self.new(n, "chan", decl.pos, rank=len(decl.dims), dims=decl.dims))
                             for n in decl.names]

    # -- processes --------------------------------------------------------

    def process(self, node: ast.Process, scope: Scope) -> None:
        if isinstance(node, ast.Skip):
            return
        if isinstance(node, ast.Assign):
            self.lvalue(node.target, scope)
            self.expr(node.value, scope)
        elif isinstance(node, ast.Output):
            self.channel(node.chan, scope)
            for item in node.items:
                self.item(item, scope, write=False)
        elif isinstance(node, ast.Input):
            self.channel(node.chan, scope)
            for target in node.targets:
                self.item(target, scope, write=True)
        elif isinstance(node, (ast.Seq, ast.LocalPar, ast.DistPar)):
            for child in node.children:
                self.process(child, scope)
        elif isinstance(node, (ast.SeqRep, ast.ParRep)):
            self.expr(node.base, scope)
            self.expr(node.count, scope)
            inner = Scope(scope)
            node.index_sym = inner.declare(self.new(node.index, "index", node.pos))
            self.process(node.body, inner)
        elif isinstance(node, ast.Block):
            inner = Scope(scope)
            self.decls(node.decls, inner)
            if node.body is not None:
                self.process(node.body, inner)
        elif isinstance(node, ast.ServerSpec):
            self.server_spec(node, scope)
        elif isinstance(node, ast.ServerCall):
            self.server_call(node, scope)
        elif isinstance(node, ast.ProcCall):
            self.proc_call(node, scope)
        else:
            raise TypeError(f"unexpected node {node!r}")

    def server_spec(self, node: ast.ServerSpec, scope: Scope) -> None:
        d = scope.lookup(node.definition)
        if d is None:
            raise E.UndefinedName(f"undefined server '{node.definition}'", node.pos)
        if d.kind != "serverdef":
            raise E.NotAServer(f"'{node.definition}' is not a server definition", node.pos)
        node.def_sym = d
        definition: ast.ServerDef = d.definition
        if len(node.args) != len(definition.formals):
            raise E.ArityMismatch(
                f"server '{definition.name}' takes {len(definition.formals)} arguments, got {len(node.args)}",
                node.pos)
        for actual, formal in zip(node.args, definition.formals):
            self.actual(actual, formal, scope, f"server '{definition.name}'")
        for ext in node.extents:
            self.expr(ext, scope)
        inner = Scope(scope)
        node.sym = inner.declare(self.new(node.name, "server", node.pos, rank=len(node.extents),
                                          dims=node.extents, definition=definition))
        self.process(node.body, inner)

    def server_call(self, node: ast.ServerCall, scope: Scope) -> None:
        target = node.target
        sym = self.lookup(target, scope)
        if sym.kind != "server":
            raise E.NotAServer(f"'{target.ident}' is not a server", target.pos)
        for s in target.subscripts:
            self.expr(s, scope)
        if len(target.subscripts) != sym.rank:
            raise E.TypeMismatch(
                f"server '{target.ident}' needs {sym.rank} subscripts to name one server, got {len(target.subscripts)}",
                target.pos)
        definition: ast.ServerDef = sym.definition
        cid = definition.call_id(node.call)
        if cid is None:
            raise E.UnknownCall(f"server '{definition.name}' has no call '{node.call}'", node.pos)
        sig = definition.interface[cid]
        if len(node.actuals) != sig.arity:
            raise E.ArityMismatch(f"call '{node.call}' takes {sig.arity} arguments, got {len(node.actuals)}", node.pos)
        for actual, param in zip(node.actuals, sig.params):
            if param.mode == "var":
                if not self.is_lvalue(actual, scope):
                    raise E.ModeMismatch(f"'var' parameter '{param.name}' needs a variable", _pos_of(actual, node.pos))
                self.lvalue(actual, scope)
            else:
                self.expr(actual, scope)
        node.call_id = cid
        node.sig = sig

    def proc_call(self, node: ast.ProcCall, scope: Scope) -> None:
        sym = scope.lookup(node.name)
        if sym is None:
            raise E.UndefinedName(f"undefined proc '{node.name}'", node.pos)
        if sym.kind != "proc":
            raise E.TypeMismatch(f"'{node.name}' is not a proc", node.pos)
        node.sym = sym
        definition: ast.ProcDef = sym.definition
        if len(node.actuals) != len(definition.formals):
            raise E.ArityMismatch(
                f"proc '{node.name}' takes {len(definition.formals)} arguments, got {len(node.actuals)}", node.pos)
        for actual, formal in zip(node.actuals, definition.formals):
            self.actual(actual, formal, scope, f"proc '{node.name}'")

    def actual(self, actual: ast.Expr, formal: ast.Formal, scope: Scope, what: str) -> None:
        where = _pos_of(actual, None)
        if formal.mode == "val":
            self.expr(actual, scope)
            return
        if not isinstance(actual, ast.Name):
            raise E.ModeMismatch(f"{what}: '{formal.mode}' parameter '{formal.name}' needs a name", where)
        sym = self.lookup(actual, scope)
        for s in actual.subscripts:
            self.expr(s, scope)
        remaining = sym.rank - len(actual.subscripts)
        if formal.mode == "var":
            if sym.kind not in ("var", "varref") or remaining != len(formal.dims):
                raise E.ModeMismatch(f"{what}: 'var' parameter '{formal.name}' needs a variable of rank "
                                     f"{len(formal.dims)}", where)
            if formal.dims and actual.subscripts:
                raise E.TypeMismatch(f"{what}: array parameter '{formal.name}' needs a whole array", where)
        elif formal.mode == "chan":
            if sym.kind != "chan":
                raise E.TypeMismatch(f"{what}: '{actual.ident}' is not a channel", where)
            if remaining != 0:
                raise E.TypeMismatch(f"{what}: channel parameter '{formal.name}' needs a single channel", where)
        else:
            if sym.kind != "server":
                raise E.NotAServer(f"{what}: '{actual.ident}' is not a server", where)
            if sym.definition.name != formal.server_def:
                raise E.TypeMismatch(
                    f"{what}: parameter '{formal.name}' needs a {formal.server_def} server, got {sym.definition.name}",
                    where)
            if remaining != len(formal.dims):
                raise E.TypeMismatch(
                    f"{what}: server parameter '{formal.name}' has rank {len(formal.dims)}, actual has {remaining}",
                    where)
        actual.sym = sym

    # -- names and expressions -------------------------------------------

    def lookup(self, name: ast.Name, scope: Scope) -> Symbol:
        sym = scope.lookup(name.ident)
        if sym is None or (sym.kind == "const" and sym.name in self.pending_consts):
            raise E.UndefinedName(f"undefined name '{name.ident}'", name.pos)
        name.sym = sym
        return sym

    def is_lvalue(self, e: ast.Expr, scope: Scope) -> bool:
        if not isinstance(e, ast.Name):
            return False
        sym = scope.lookup(e.ident)
        return sym is not None and sym.kind in ("var", "varref") and len(e.subscripts) == sym.rank

    def lvalue(self, target: ast.Name, scope: Scope) -> None:
        sym = self.lookup(target, scope)
        if sym.kind not in ("var", "varref"):
            raise E.ModeMismatch(f"cannot assign to {_kind_name(sym)} '{target.ident}'", target.pos)
        self.scalar_access(target, sym, scope)

    def channel(self, chan: ast.Name, scope: Scope) -> None:
        sym = self.lookup(chan, scope)
        if sym.kind != "chan":
            raise E.TypeMismatch(f"'{chan.ident}' is not a channel", chan.pos)
        for s in chan.subscripts:
            self.expr(s, scope)
        if len(chan.subscripts) != sym.rank:
            raise E.TypeMismatch(f"channel '{chan.ident}' needs {sym.rank} subscripts", chan.pos)

    def item(self, e: ast.Expr, scope: Scope, write: bool) -> None:
        """An output item or input target: a scalar, or a whole array."""
        if isinstance(e, ast.Name):
            sym = self.lookup(e, scope)
            if sym.kind in ("var", "varref") and sym.rank > 0 and not e.subscripts:
                return
        if write:
            if not isinstance(e, ast.Name):
                raise E.ModeMismatch("input target must be a variable", _pos_of(e, None))
            self.lvalue(e, scope)
        else:
            self.expr(e, scope)

    def scalar_access(self, name: ast.Name, sym: Symbol, scope: Scope) -> None:
        for s in name.subscripts:
            self.expr(s, scope)
        if len(name.subscripts) != sym.rank:
            raise E.TypeMismatch(
                f"'{name.ident}' has rank {sym.rank} but is used with {len(name.subscripts)} subscripts", name.pos)

    def expr(self, e: ast.Expr, scope: Scope) -> None:
        if isinstance(e, ast.IntLit):
            return
        if isinstance(e, ast.Name):
            sym = self.lookup(e, scope)
            if sym.kind not in ("const", "var", "val", "varref", "index"):
                raise E.TypeMismatch(f"{_kind_name(sym)} '{e.ident}' used as a value", e.pos)
            self.scalar_access(e, sym, scope)
        elif isinstance(e, ast.BinOp):
            self.expr(e.left, scope)
            self.expr(e.right, scope)
        elif isinstance(e, ast.Neg):
            self.expr(e.operand, scope)
        else:
            raise TypeError(f"unexpected expression {e!r}")


def _kind_name(sym: Symbol) -> str:
    return {"const": "constant", "val": "value parameter", "index": "replicator index",
            "chan": "channel", "server": "server", "proc": "proc", "serverdef": "server definition",
            }.get(sym.kind, "variable")


def _pos_of(e: Any, default: Pos | None) -> Pos | None:
    return getattr(e, "pos", None) or default


def resolve(program: ast.Program) -> tuple[ast.Program, SymbolTable]:
    """Return an annotated copy of ``program`` and its symbol table."""
    tree = copy.deepcopy(program)
    table = Resolver().run(tree)
    return tree, table


# ---------------------------------------------------------------------------
# static folding and elaboration
# ---------------------------------------------------------------------------


def fold(e: ast.Expr, values: dict[Symbol, int]) -> int | None:
    """Evaluate ``e`` if every name in it has a known constant value."""
    if isinstance(e, ast.IntLit):
        return e.value
    if isinstance(e, ast.Name):
        if e.subscripts:
            return None
        sym = e.sym
        if sym is not None and sym.kind == "const":
            return sym.value
        return values.get(sym)
    if isinstance(e, ast.Neg):
        v = fold(e.operand, values)
        return None if v is None else -v
    if isinstance(e, ast.BinOp):
        a, b = fold(e.left, values), fold(e.right, values)
        if a is None or b is None:
            return None
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0:
            return None
        return _rem(a, b)
    return None


def _rem(a: int, b: int) -> int:
    r = abs(a) % abs(b)
    return -r if a < 0 else r


@dataclass
class StaticEnv:
    values: dict[Symbol, int]
    shapes: dict[Symbol, tuple[int, ...]]

    def child(self) -> "StaticEnv":
        return StaticEnv(dict(self.values), dict(self.shapes))


class Elaborator:
    def __init__(self) -> None:
        self.extents: list[StaticExtent] = []

    def extent(self, e: ast.Expr, env: StaticEnv, what: str) -> int:
        v = fold(e, env.values)
        if v is None:
            raise E.NonConstantExtent(f"{what} is not a compile-time constant", _pos_of(e, None))
        if v < 0:
            raise E.NonConstantExtent(f"{what} is negative ({v})", _pos_of(e, None))
        self.extents.append(StaticExtent(v, _pos_of(e, None)))
        return v

    def decls(self, decls: list[ast.Decl], env: StaticEnv) -> None:
        for decl in decls:
            if isinstance(decl, ast.VarDecl):
                decl.extents = []
                for sym, dims in zip(decl.syms, decl.dims):
                    shape = tuple(self.extent(d, env, f"extent of '{sym.name}'") for d in dims)
                    decl.extents.append(shape)
                    env.shapes[sym] = shape
            else:
                shape = tuple(self.extent(d, env, "channel array extent") for d in decl.dims)
                decl.extents = shape
                for sym in decl.syms:
                    env.shapes[sym] = shape

    def process(self, node: ast.Process, env: StaticEnv) -> None:
        if isinstance(node, (ast.Seq, ast.LocalPar, ast.DistPar)):
            for child in node.children:
                self.process(child, env)
        elif isinstance(node, (ast.SeqRep, ast.ParRep)):
            node.extent = self.extent(node.count, env, "replicator count")
            self.process(node.body, env)
        elif isinstance(node, ast.Block):
            inner = env.child()
            self.decls(node.decls, inner)
            if node.body is not None:
                self.process(node.body, inner)
        elif isinstance(node, ast.ServerSpec):
            self.server_spec(node, env)
        elif isinstance(node, ast.ProcCall):
            self.proc_call(node, env)

    def bind_formals(self, formals: list[ast.Formal], actuals: list[ast.Expr], env: StaticEnv,
                     callee_env: StaticEnv, what: str) -> None:
        for formal, actual in zip(formals, actuals):
            if formal.mode == "val":
                v = fold(actual, env.values)
                if v is not None:
                    callee_env.values[formal.sym] = v
        for formal, actual in zip(formals, actuals):
            if formal.mode not in ("var", "server") or not isinstance(actual, ast.Name):
                continue
            shape = env.shapes.get(actual.sym)
            if shape is None:
                continue
            remaining = shape[len(actual.subscripts):]
            if formal.dims:
                want = tuple(self.extent(d, callee_env, f"shape of parameter '{formal.name}'")
                             for d in formal.dims)
                if want != remaining:
                    raise E.TypeMismatch(
                        f"{what}: parameter '{formal.name}' has shape {list(want)}, actual has {list(remaining)}",
                        _pos_of(actual, None))
            callee_env.shapes[formal.sym] = remaining

    def proc_call(self, node: ast.ProcCall, env: StaticEnv) -> None:
        definition: ast.ProcDef = node.sym.definition
        callee = StaticEnv({}, {})
        self.bind_formals(definition.formals, node.actuals, env, callee, f"proc '{node.name}'")
        node.body = copy.deepcopy(definition.body)
        self.process(node.body, callee)

    def server_spec(self, node: ast.ServerSpec, env: StaticEnv) -> None:
        node.dims = tuple(self.extent(e, env, f"extent of server array '{node.name}'") for e in node.extents)
        definition: ast.ServerDef = node.def_sym.definition
        inst_env = StaticEnv({}, {})
        self.bind_formals(definition.formals, node.args, env, inst_env, f"server '{definition.name}'")
        inst = copy.deepcopy(definition)
        self.decls(inst.decls, inst_env)
        for part in [inst.initial, *(arm.handler for arm in inst.arms), inst.final]:
            if part is not None:
                self.process(part, inst_env)
        extent = 1
        for d in node.dims:
            extent *= d
        node.instance = ast.ServerInstance(inst, extent, pos=node.pos)
        env = env.child()
        env.shapes[node.sym] = node.dims
        self.process(node.body, env)


def proc_call_graph(program: ast.Program) -> dict[str, list[str]]:
    graph: dict[str, list[str]] = {}

    def calls(node: Any) -> list[str]:
        out: list[str] = []
        for n in ast.walk(node):
            if isinstance(n, ast.ProcCall) and n.name not in out:
                out.append(n.name)
        return out

    for d in program.definitions:
        if isinstance(d, ast.ProcDef):
            graph[d.name] = calls(d.body)
        elif isinstance(d, ast.ServerDef):
            parts = [d.initial, *(a.handler for a in d.arms), d.final]
            names: list[str] = []
            for p in parts:
                if p is not None:
                    names += [c for c in calls(p) if c not in names]
            graph["server " + d.name] = names
    return graph


def check_recursion(program: ast.Program) -> None:
    graph = proc_call_graph(program)
    state: dict[str, int] = {}

    def visit(name: str, stack: list[str]) -> None:
        state[name] = 1
        stack.append(name)
        for callee in graph.get(name, []):
            if state.get(callee) == 1:
                cycle = stack[stack.index(callee):]
                d = next(x for x in program.definitions if x.name == callee)
                raise E.RecursionDetected(cycle, d.pos)
            if state.get(callee) is None:
                visit(callee, stack)
        stack.pop()
        state[name] = 2

    for name in graph:
        if state.get(name) is None:
            visit(name, [])


def check_static(tree: ast.Program) -> tuple[ast.Program, list[StaticExtent]]:
    """Elaborate a resolved program; returns the instantiated tree and every folded extent."""
    check_recursion(tree)
    out = copy.deepcopy(tree)
    elab = Elaborator()
    elab.process(out.main, StaticEnv({}, {}))
    number_nodes(out)
    from .alloc import footprint  # local: alloc depends on elaborated trees

    for node in ast.walk(out.main):
        if isinstance(node, ast.ServerInstance):
            for part in ast.child_processes(node):
                if footprint(part) > 1:
                    raise E.ServerFootprintError(
                        f"server '{node.definition.name}' must run on a single processor "
                        f"(a part of it needs {footprint(part)})", part.pos)
    return out, elab.extents


def number_nodes(program: ast.Program) -> None:
    for i, node in enumerate(ast.walk(program.main)):
        node.node_id = i


# ---------------------------------------------------------------------------
# free variables and the parallel-usage rule
# ---------------------------------------------------------------------------


@dataclass
class Uses:
    reads: dict[Symbol, Pos | None] = field(default_factory=dict)
    writes: dict[Symbol, Pos | None] = field(default_factory=dict)

    def read(self, sym: Symbol, pos: Pos | None) -> None:
        if sym is not None and sym.kind in STORAGE_KINDS:
            self.reads.setdefault(sym, pos)

    def write(self, sym: Symbol, pos: Pos | None) -> None:
        if sym is not None and sym.kind in STORAGE_KINDS:
            self.writes.setdefault(sym, pos)

    def merge(self, other: "Uses") -> None:
        for s, p in other.reads.items():
            self.reads.setdefault(s, p)
        for s, p in other.writes.items():
            self.writes.setdefault(s, p)

    def without(self, bound: Iterable[Symbol]) -> "Uses":
        bound = set(bound)
        return Uses({s: p for s, p in self.reads.items() if s not in bound},
                    {s: p for s, p in self.writes.items() if s not in bound})

    @property
    def all(self) -> set[Symbol]:
        return set(self.reads) | set(self.writes)


class FreeVars:
    """Free storage symbols of each elaborated process node, keyed by node id."""

    def __init__(self) -> None:
        self.table: dict[int, Uses] = {}

    def expr(self, e: ast.Expr, u: Uses) -> None:
        if isinstance(e, ast.Name):
            u.read(e.sym, e.pos)
            for s in e.subscripts:
                self.expr(s, u)
        elif isinstance(e, ast.BinOp):
            self.expr(e.left, u)
            self.expr(e.right, u)
        elif isinstance(e, ast.Neg):
            self.expr(e.operand, u)

    def target(self, e: ast.Name, u: Uses) -> None:
        u.write(e.sym, e.pos)
        for s in e.subscripts:
            self.expr(s, u)

    def of(self, node: Any) -> Uses:
        nid = getattr(node, "node_id", None)
        if nid is not None and nid in self.table:
            return self.table[nid]
        u = self.compute(node)
        if nid is not None:
            self.table[nid] = u
        return u

    def compute(self, node: Any) -> Uses:
        u = Uses()
        if isinstance(node, ast.Assign):
            self.target(node.target, u)
            self.expr(node.value, u)
        elif isinstance(node, ast.Output):
            self.expr(node.chan, u)
            for item in node.items:
                self.expr(item, u)
        elif isinstance(node, ast.Input):
            self.expr(node.chan, u)
            for t in node.targets:
                self.target(t, u)
        elif isinstance(node, (ast.Seq, ast.LocalPar, ast.DistPar)):
            for child in node.children:
                u.merge(self.of(child))
        elif isinstance(node, (ast.SeqRep, ast.ParRep)):
            self.expr(node.base, u)
            self.expr(node.count, u)
            u.merge(self.of(node.body).without([node.index_sym]))
        elif isinstance(node, ast.Block):
            bound: list[Symbol] = []
            for d in node.decls:
                bound += d.syms
                dims = d.dims if isinstance(d, ast.ChanDecl) else [x for ds in d.dims for x in ds]
                for x in dims:
                    self.expr(x, u)
            if node.body is not None:
                u.merge(self.of(node.body).without(bound))
            u = u.without(bound)
        elif isinstance(node, ast.ServerSpec):
            for a in node.args:
                self.expr(a, u)
            for x in node.extents:
                self.expr(x, u)
            if node.instance is not None:
                self.of(node.instance)
            u.merge(self.of(node.body))
        elif isinstance(node, ast.ServerInstance):
            for part in ast.child_processes(node):
                self.of(part)
        elif isinstance(node, ast.ServerCall):
            self.expr(node.target, u)
            for actual, param in zip(node.actuals, node.sig.params):
                if param.mode == "var":
                    self.target(actual, u)
                    u.read(actual.sym, actual.pos)
                else:
                    self.expr(actual, u)
        elif isinstance(node, ast.ProcCall):
            definition: ast.ProcDef = node.sym.definition
            for actual, formal in zip(node.actuals, definition.formals):
                if formal.mode == "var":
                    self.target(actual, u)
                    u.read(actual.sym, actual.pos)
                elif formal.mode == "val":
                    self.expr(actual, u)
                elif isinstance(actual, ast.Name):
                    for s in actual.subscripts:
                        self.expr(s, u)
            if node.body is not None:
                u.merge(self.of(node.body).without(f.sym for f in definition.formals))
        return u


def free_vars(program: ast.Program) -> dict[int, Uses]:
    fv = FreeVars()
    fv.of(program.main)
    return fv.table


def check_disjoint_writes(program: ast.Program, table: dict[int, Uses] | None = None) -> None:
    """Raise :class:`ParallelWriteConflict` on the first parallel-usage violation."""
    fv = FreeVars()
    if table is not None:
        fv.table = table
    for node in ast.walk(program.main):
        if isinstance(node, (ast.LocalPar, ast.DistPar)):
            parts = [fv.of(c) for c in node.children]
            for i, a in enumerate(parts):
                for b in parts[i + 1:]:
                    for sym, pos in a.writes.items():
                        if sym in b.writes:
                            raise E.ParallelWriteConflict(sym.name, pos, b.writes[sym])
                        if sym in b.reads:
                            raise E.ParallelWriteConflict(sym.name, pos, b.reads[sym], "written and read")
                    for sym, pos in b.writes.items():
                        if sym in a.reads:
                            raise E.ParallelWriteConflict(sym.name, a.reads[sym], pos, "written and read")
        elif isinstance(node, ast.ParRep) and (node.extent or 0) >= 2:
            body = fv.of(node.body).without([node.index_sym])
            for sym, pos in body.writes.items():
                raise E.ParallelWriteConflict(sym.name, pos, pos)
