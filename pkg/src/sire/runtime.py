"""Interpretation of allocated programs on the simulated machine.

Every process runs inside a machine thread. Sequential and layered
composition stay on the current processor; distributed components are
spawned at their allocated processors with copies of their free variables,
and written variables are copied back after the join.

A server specification places one server loop per array element. All
elements share one local channel end id, so element ``i`` is addressed as
``(base + i, local)``. Clients reach a server with a fixed message sequence:
set destination, connect (sleeping with exponential backoff when the
request queue is full), send the client's end id, the call id and each
actual, receive each ``var`` actual back, disconnect. When the scope body
ends, each element receives the reserved all-ones call id, runs ``final``
and stops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterator

from . import errors as E
from .alloc import AllocationMap, footprint
from .frontend import ast
from .machine import (
    REJECTED, Connect, Disconnect, Join, Machine, MachineConfig, NewEnd, NewEndArray, Notify, Own,
    Receive, Send, SetDest, Sleep, Spawn, Wait, WhoAmI,
)
from .sema import STORAGE_KINDS, Symbol, Uses, _rem
from .trace import EndId, Event

TERMINATE = (1 << 64) - 1
_MASK = (1 << 64) - 1


def wrap(v: int) -> int:
    """Reduce to a signed 64-bit word."""
    v &= _MASK
    return v - (1 << 64) if v >> 63 else v


# -- storage ----------------------------------------------------------------


class Cell:
    __slots__ = ("value",)

    def __init__(self, value: int = 0):
        self.value = value

    def get(self) -> int:
        return self.value

    def set(self, v: int) -> None:
        self.value = v


class ArrayVar:
    __slots__ = ("shape", "data")

    def __init__(self, shape: tuple[int, ...], data: list[int] | None = None):
        self.shape = shape
        self.data = data if data is not None else [0] * math.prod(shape)

    def offset(self, subs: list[int], pos: E.Pos | None, name: str) -> int:
        off = 0
        for s, n in zip(subs, self.shape):
            if not 0 <= s < n:
                raise E.SubscriptOutOfRange(f"subscript {s} of '{name}' outside 0..{n - 1}", pos)
            off = off * n + s
        return off

    def copy(self) -> "ArrayVar":
        return ArrayVar(self.shape, list(self.data))

    def nested(self) -> Any:
        def build(dims: tuple[int, ...], start: int) -> Any:
            if not dims:
                return self.data[start]
            step = math.prod(dims[1:])
            return [build(dims[1:], start + i * step) for i in range(dims[0])]
        return build(self.shape, 0)


class ElementRef:
    """A scalar ``var`` parameter bound to one array element."""

    __slots__ = ("array", "index")

    def __init__(self, array: ArrayVar, index: int):
        self.array = array
        self.index = index

    def get(self) -> int:
        return self.array.data[self.index]

    def set(self, v: int) -> None:
        self.array.data[self.index] = v


@dataclass
class ServerBinding:
    base: int  # processor of element 0
    local: int  # local end id shared by all elements
    dims: tuple[int, ...]
    definition: ast.ServerDef
    threads: list[int] = field(default_factory=list)
    states: list[dict[str, Any]] = field(default_factory=list)  # final element state, filled at termination

    @property
    def extent(self) -> int:
        return math.prod(self.dims)

    def element(self, i: int) -> EndId:
        return EndId(self.base + i, self.local)

    def pack(self) -> tuple[int, int]:
        return EndId(self.base, self.local).pack(), self.extent


@dataclass
class ServerRef:
    """A server array, possibly with leading subscripts fixed."""

    binding: ServerBinding
    prefix: tuple[int, ...] = ()

    def index(self, subs: list[int], pos: E.Pos | None, name: str) -> int:
        full = list(self.prefix) + subs
        off = 0
        for s, n in zip(full, self.binding.dims):
            if not 0 <= s < n:
                raise E.SubscriptOutOfRange(f"server subscript {s} of '{name}' outside 0..{n - 1}", pos)
            off = off * n + s
        return off


class Channel:
    """A language channel: an output side and an input side, each an end
    claimed lazily on the processor of the thread that uses it."""

    def __init__(self, declarer: int):
        self.declarer = declarer
        self.out_end: EndId | None = None
        self.in_end: EndId | None = None


@dataclass
class ChannelArray:
    shape: tuple[int, ...]
    items: list[Channel]

    def element(self, subs: list[int], pos: E.Pos | None, name: str) -> Channel:
        return self.items[ArrayVar(self.shape, []).offset(subs, pos, name)]


Env = dict  # Symbol -> storage


@dataclass
class Ctx:
    """Per-thread state: processor, allocation shift and the lazily created client end."""

    proc: int
    shift: int
    client: EndId | None = None


@dataclass
class RunResult:
    status: int
    events: list[Event]
    variables: dict[str, Any] = field(default_factory=dict)
    error: E.SireError | None = None
    calls: int = 0
    servers: list[ServerBinding] = field(default_factory=list)


# -- interpreter ------------------------------------------------------------


class Runtime:
    def __init__(self, program: ast.Program, amap: AllocationMap, uses: dict[int, Uses],
                 config: MachineConfig):
        self.program = program
        self.amap = amap
        self.uses = uses
        self.config = config
        self.machine = Machine(config)
        self.variables: dict[str, Any] = {}
        self.calls = 0
        self.servers: list[ServerBinding] = []
        self.fp: dict[int, int] = {}

    # -- helpers ----------------------------------------------------------

    def proc_of(self, node: Any, ctx: Ctx) -> int:
        return self.amap.base(node) + ctx.shift

    def eval(self, e: ast.Expr, env: Env) -> int:
        if isinstance(e, ast.IntLit):
            return wrap(e.value)
        if isinstance(e, ast.Name):
            sym = e.sym
            if sym.kind == "const":
                return wrap(sym.value)
            store = env[sym]
            if e.subscripts:
                return store.data[store.offset([self.eval(s, env) for s in e.subscripts], e.pos, e.ident)]
            return store.get()
        if isinstance(e, ast.BinOp):
            a, b = self.eval(e.left, env), self.eval(e.right, env)
            if e.op == "+":
                return wrap(a + b)
            if e.op == "-":
                return wrap(a - b)
            if e.op == "*":
                return wrap(a * b)
            if b == 0:
                raise E.RuntimeFault("remainder by zero", e.pos)
            return wrap(_rem(a, b))
        if isinstance(e, ast.Neg):
            return wrap(-self.eval(e.operand, env))
        raise TypeError(f"not an expression: {e!r}")

    def ref(self, name: ast.Name, env: Env) -> Cell | ElementRef:
        store = env[name.sym]
        if name.subscripts:
            return ElementRef(store, store.offset([self.eval(s, env) for s in name.subscripts],
                                                  name.pos, name.ident))
        return store

    def store(self, name: ast.Name, env: Env, value: int) -> None:
        self.ref(name, env).set(wrap(value))

    def words(self, e: ast.Expr, env: Env) -> list[int]:
        if isinstance(e, ast.Name) and not e.subscripts and isinstance(env.get(e.sym), ArrayVar):
            return list(env[e.sym].data)
        return [self.eval(e, env)]

    def channel(self, name: ast.Name, env: Env) -> Channel:
        ch = env[name.sym]
        if isinstance(ch, ChannelArray):
            return ch.element([self.eval(s, env) for s in name.subscripts], name.pos, name.ident)
        return ch

    # -- environment shipping --------------------------------------------

    def ship(self, env: Env, uses: Uses) -> Env:
        """Environment for a component on another processor: shared handles
        (servers, channels) plus copies of the free variables."""
        out: Env = {s: v for s, v in env.items() if s.kind not in STORAGE_KINDS}
        for sym in uses.all:
            v = env[sym]
            out[sym] = v.copy() if isinstance(v, ArrayVar) else Cell(v.get())
        return out

    def ship_back(self, env: Env, child: Env, uses: Uses) -> None:
        for sym in uses.writes:
            v = env[sym]
            if isinstance(v, ArrayVar):
                v.data[:] = child[sym].data
            else:
                v.set(child[sym].get())

    # -- threads ----------------------------------------------------------

    def thread(self, node: Any, env: Env, ctx: Ctx) -> Iterator[Any]:
        yield from self.exec(node, env, ctx)

    def label(self, node: Any, extra: str = "") -> str:
        return f"{type(node).__name__}@{node.pos}{extra}"

    def spawn_remote(self, parts: list[tuple[Any, int, int, Env]]) -> Iterator[Any]:
        """Run (node, processor, shift, env) components in parallel and join them."""
        entries = [(proc, self.thread(node, cenv, Ctx(proc, shift)), self.label(node))
                   for node, proc, shift, cenv in parts]
        tids = yield Spawn(entries)
        yield Join(tids)

    # -- processes --------------------------------------------------------

    def exec(self, node: Any, env: Env, ctx: Ctx) -> Iterator[Any]:
        if isinstance(node, ast.Skip):
            return
        if isinstance(node, ast.Assign):
            self.store(node.target, env, self.eval(node.value, env))
        elif isinstance(node, ast.Seq):
            for child in node.children:
                yield from self.exec(child, env, ctx)
        elif isinstance(node, ast.LocalPar):
            yield from self.spawn_remote([(c, ctx.proc, ctx.shift, env) for c in node.children])
        elif isinstance(node, ast.DistPar):
            parts = []
            for child in node.children:
                u = self.uses[child.node_id]
                parts.append((child, self.proc_of(child, ctx), ctx.shift, self.ship(env, u)))
            yield from self.spawn_remote(parts)
            for (child, _, _, cenv) in parts:
                self.ship_back(env, cenv, self.uses[child.node_id])
        elif isinstance(node, ast.SeqRep):
            base = self.eval(node.base, env)
            for k in range(node.extent):
                inner = dict(env)
                inner[node.index_sym] = Cell(wrap(base + k))
                yield from self.exec(node.body, inner, ctx)
        elif isinstance(node, ast.ParRep):
            yield from self.par_rep(node, env, ctx)
        elif isinstance(node, ast.Block):
            yield from self.block(node, env, ctx)
        elif isinstance(node, ast.Output):
            yield from self.output(node, env, ctx)
        elif isinstance(node, ast.Input):
            yield from self.input(node, env, ctx)
        elif isinstance(node, ast.ProcCall):
            yield from self.exec(node.body, self.bind(node.sym.definition.formals, node.actuals, env), ctx)
        elif isinstance(node, ast.ServerCall):
            yield from self.server_call(node, env, ctx)
        elif isinstance(node, ast.ServerSpec):
            yield from self.server_spec(node, env, ctx)
        else:
            raise TypeError(f"cannot execute {node!r}")

    def par_rep(self, node: ast.ParRep, env: Env, ctx: Ctx) -> Iterator[Any]:
        base = self.eval(node.base, env)
        parts = []
        width = footprint(node.body, self.fp)
        u = self.uses[node.body.node_id]
        for k in range(node.extent):
            if node.distributed:
                inner = self.ship(env, u.without([node.index_sym]))
                shift = ctx.shift + k * width
                proc = self.amap.base(node.body) + shift
            else:
                inner = dict(env)
                shift, proc = ctx.shift, ctx.proc
            inner[node.index_sym] = Cell(wrap(base + k))
            parts.append((node.body, proc, shift, inner))
        yield from self.spawn_remote(parts)
        if node.distributed:
            for (_, _, _, cenv) in parts:
                self.ship_back(env, cenv, u.without([node.index_sym]))

    def declare(self, decls: list[ast.Decl], env: Env, tid: int) -> None:
        for d in decls:
            if isinstance(d, ast.VarDecl):
                for sym, shape in zip(d.syms, d.extents):
                    env[sym] = ArrayVar(tuple(shape)) if shape else Cell(0)
            else:
                shape = tuple(d.extents)
                for sym in d.syms:
                    if shape:
                        env[sym] = ChannelArray(shape, [Channel(tid) for _ in range(math.prod(shape))])
                    else:
                        env[sym] = Channel(tid)

    def block(self, node: ast.Block, env: Env, ctx: Ctx) -> Iterator[Any]:
        inner = dict(env)
        tid = yield from self.whoami()
        self.declare(node.decls, inner, tid)
        if node.body is not None:
            yield from self.exec(node.body, inner, ctx)
        if node is self.program.main:
            self.variables = self.snapshot(node.decls, inner)

    def whoami(self) -> Iterator[Any]:
        tid = yield WhoAmI()
        return tid

    def bind(self, formals: list[ast.Formal], actuals: list[ast.Expr], env: Env) -> Env:
        out: Env = {}
        for f, a in zip(formals, actuals):
            if f.mode == "val":
                out[f.sym] = Cell(self.eval(a, env))
            elif f.mode == "var":
                out[f.sym] = env[a.sym] if f.dims else self.ref(a, env)
            elif f.mode == "chan":
                out[f.sym] = self.channel(a, env)
            else:
                ref: ServerRef = env[a.sym]
                subs = tuple(self.eval(s, env) for s in a.subscripts)
                for s, n in zip(ref.prefix + subs, ref.binding.dims):
                    if not 0 <= s < n:
                        raise E.SubscriptOutOfRange(f"server subscript {s} of '{a.ident}' outside 0..{n - 1}", a.pos)
                out[f.sym] = ServerRef(ref.binding, ref.prefix + subs)
        return out

    # -- channels ---------------------------------------------------------

    def claim(self, ch: Channel, side: str, ctx: Ctx) -> Iterator[Any]:
        end = getattr(ch, side)
        if end is None or end.proc != ctx.proc:
            end = yield NewEnd(ctx.proc)
            setattr(ch, side, end)
            if side == "in_end":
                yield Notify(("chan", id(ch)))
        else:
            yield Own(end)
        return end

    def chan_hint(self, ch: Channel) -> Any:
        return lambda: self.machine.descendants(ch.declarer)

    def output(self, node: ast.Output, env: Env, ctx: Ctx) -> Iterator[Any]:
        ch = self.channel(node.chan, env)
        words: list[int] = []
        for item in node.items:
            words += self.words(item, env)
        end = yield from self.claim(ch, "out_end", ctx)
        while ch.in_end is None:
            yield Wait(("chan", id(ch)), self.chan_hint(ch), f"waits for a reader on '{node.chan.ident}'")
        yield SetDest(end, ch.in_end)
        yield Send(end, tuple(words))

    def input(self, node: ast.Input, env: Env, ctx: Ctx) -> Iterator[Any]:
        ch = self.channel(node.chan, env)
        end = yield from self.claim(ch, "in_end", ctx)
        words = yield Receive(end, self.chan_hint(ch))
        k = 0
        for target in node.targets:
            store = env[target.sym]
            if isinstance(store, ArrayVar) and not target.subscripts:
                n = len(store.data)
                if k + n > len(words):
                    raise E.RuntimeFault(f"message too short for '{target.ident}'", target.pos)
                store.data[:] = words[k:k + n]
                k += n
            else:
                if k >= len(words):
                    raise E.RuntimeFault(f"message too short for '{target.ident}'", target.pos)
                self.store(target, env, words[k])
                k += 1
        if k != len(words):
            raise E.RuntimeFault(f"message of {len(words)} words, input takes {k}", node.pos)

    # -- servers ----------------------------------------------------------

    def client_end(self, ctx: Ctx) -> Iterator[Any]:
        if ctx.client is None:
            ctx.client = yield NewEnd(ctx.proc)
        return ctx.client

    def connect(self, end: EndId, dest: EndId) -> Iterator[Any]:
        yield SetDest(end, dest)
        attempt = 0
        while (yield Connect(end)) == REJECTED:
            yield Sleep(self.config.backoff_delay(attempt))
            attempt += 1

    def server_call(self, node: ast.ServerCall, env: Env, ctx: Ctx) -> Iterator[Any]:
        ref: ServerRef = env[node.target.sym]
        idx = ref.index([self.eval(s, env) for s in node.target.subscripts], node.target.pos, node.target.ident)
        binding = ref.binding
        dest = binding.element(idx)
        end = yield from self.client_end(ctx)
        values = [self.eval(a, env) for a in node.actuals]
        yield from self.connect(end, dest)
        yield Send(end, (end.pack(),))
        yield Send(end, (node.call_id,))
        for v in values:
            yield Send(end, (v,))
        server_tid = binding.threads[idx] if idx < len(binding.threads) else None
        hint = (lambda: [server_tid]) if server_tid is not None else None
        for actual, param in zip(node.actuals, node.sig.params):
            if param.mode == "var":
                (word,) = yield Receive(end, hint)
                self.store(actual, env, word)
        yield Disconnect(end)
        self.calls += 1

    def capacity(self, node: ast.ServerSpec) -> int:
        if self.config.queue_capacity is not None:
            return self.config.queue_capacity
        clients = footprint(node.body, self.fp)
        return max(1, math.ceil(math.log2(clients))) if clients > 1 else 1

    def server_spec(self, node: ast.ServerSpec, env: Env, ctx: Ctx) -> Iterator[Any]:
        inst: ast.ServerInstance = node.instance
        definition = inst.definition
        formal_env = self.bind(definition.formals, node.args, env)
        base = self.proc_of(inst, ctx)
        procs = [base + i for i in range(inst.extent)]
        local = yield NewEndArray(procs, self.capacity(node))
        binding = ServerBinding(base, local, tuple(node.dims), definition)
        binding.states = [{} for _ in procs]
        self.servers.append(binding)
        entries = []
        for i, proc in enumerate(procs):
            senv = {s: (Cell(v.get()) if isinstance(v, Cell) else v) for s, v in formal_env.items()}
            entries.append((proc, self.server_loop(binding, i, senv, Ctx(proc, ctx.shift + i)),
                            f"server {definition.name}[{i}]"))
        binding.threads = (yield Spawn(entries)) if entries else []
        inner = dict(env)
        inner[node.sym] = ServerRef(binding)
        if node.op == "&":
            u = self.uses[node.body.node_id]
            benv = self.ship(inner, u)
            yield from self.spawn_remote([(node.body, self.proc_of(node.body, ctx), ctx.shift, benv)])
            self.ship_back(inner, benv, u)
        else:
            yield from self.exec(node.body, inner, ctx)
        end = yield from self.client_end(ctx)
        for i in range(inst.extent):
            yield from self.connect(end, binding.element(i))
            yield Send(end, (end.pack(),))
            yield Send(end, (TERMINATE,))
            yield Disconnect(end)
        if binding.threads:
            yield Join(binding.threads)

    def server_loop(self, binding: ServerBinding, index: int, env: Env, ctx: Ctx) -> Iterator[Any]:
        definition = binding.definition
        me = binding.element(index)
        yield Own(me)
        self.declare(definition.decls, env, (yield from self.whoami()))
        if definition.initial is not None:
            yield from self.exec(definition.initial, env, ctx)
        arms = {arm.call_id: arm for arm in definition.arms}
        while True:
            (word,) = yield Receive(me)
            client = EndId.unpack(word)
            (cid,) = yield Receive(me)
            if cid == TERMINATE:
                break
            arm = arms.get(cid)
            if arm is None:
                raise E.UnknownCallId(f"server '{definition.name}' received unknown call id {cid}")
            aenv = dict(env)
            cells = []
            for sym in arm.syms:
                (v,) = yield Receive(me)
                cell = Cell(wrap(v))
                aenv[sym] = cell
                cells.append(cell)
            yield from self.exec(arm.handler, aenv, ctx)
            yield SetDest(me, client)
            for param, cell in zip(arm.params, cells):
                if param.mode == "var":
                    yield Send(me, (cell.get(),))
        if definition.final is not None:
            yield from self.exec(definition.final, env, ctx)
        binding.states[index] = self.snapshot(definition.decls, env)

    def snapshot(self, decls: list[ast.Decl], env: Env) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for d in decls:
            if isinstance(d, ast.VarDecl):
                for sym in d.syms:
                    v = env[sym]
                    out[sym.name] = v.nested() if isinstance(v, ArrayVar) else v.get()
        return out

    # -- entry ------------------------------------------------------------

    def run(self) -> RunResult:
        m = self.machine
        root = self.program.main
        try:
            if self.amap.total > self.config.processors:
                raise E.FootprintExceedsMachine(self.amap.total, self.config.processors, root.pos)
            m.spawn(0, self.thread(root, {}, Ctx(0, 0)), "main")
            m.run()
        except E.SireError as err:
            return RunResult(err.exit_status, m.events, dict(self.variables), err, self.calls, self.servers)
        return RunResult(0, m.events, dict(self.variables), None, self.calls, self.servers)


def execute(program: ast.Program, amap: AllocationMap, uses: dict[int, Uses],
            config: MachineConfig | None = None) -> RunResult:
    """Run an elaborated, allocated program to quiescence."""
    return Runtime(program, amap, uses, config or MachineConfig()).run()
