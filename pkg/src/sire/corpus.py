"""Example programs with independent oracles.

Each case pairs a source text and a machine configuration with a checker
that returns the list of failures (empty when the run is correct). Case
variants are produced by rebinding the ``val`` constants at the top of an
example file, so every file under ``examples/`` stays a runnable program.
"""

from __future__ import annotations

import random
import re
import string
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

from . import protocol
from .machine import MachineConfig
from .pipeline import Compiled, compile_source
from .runtime import RunResult
from .trace import format_trace

Checker = Callable[["CorpusCase", Compiled, RunResult], list[str]]


def example_path(name: str):
    return resources.files("sire") / "examples" / name


def read_example(name: str) -> str:
    return example_path(name).read_text()


def with_constants(source: str, **values: int) -> str:
    """Rebind top-level ``val NAME is ...;`` definitions."""
    for name, value in values.items():
        pattern = re.compile(rf"^val {re.escape(name)} is [^;]*;", re.MULTILINE)
        source, n = pattern.subn(f"val {name} is {value};", source, count=1)
        if n != 1:
            raise KeyError(f"no constant '{name}' in source")
    return source


@dataclass
class CorpusCase:
    name: str
    source: str
    config: MachineConfig = field(default_factory=MachineConfig)
    check: Checker | None = None
    params: dict = field(default_factory=dict)


@dataclass
class Outcome:
    case: CorpusCase
    compiled: Compiled
    result: RunResult
    failures: list[str]

    @property
    def trace(self) -> str:
        return format_trace(self.result.events)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_case(case: CorpusCase, seed: int | None = None) -> Outcome:
    config = case.config
    if seed is not None:
        config = MachineConfig(**{**config.__dict__, "seed": seed})
    compiled = compile_source(case.source)
    result = compiled.run(config)
    failures: list[str] = []
    if result.status != 0:
        failures.append(f"exit status {result.status}: {result.error}")
    else:
        failures += protocol.check_protocol(result.events, result.servers)
        if case.check is not None:
            failures += case.check(case, compiled, result)
    return Outcome(case, compiled, result, failures)


def _expect(failures: list[str], what: str, got, want) -> None:
    if got != want:
        failures.append(f"{what}: got {got!r}, expected {want!r}")


def _binding(result: RunResult, definition: str) -> list:
    return [b for b in result.servers if b.definition.name == definition]


# -- store -----------------------------------------------------------------


def case_store(init: int = 0, writes: bool = True, cells: int = 8) -> CorpusCase:
    src = with_constants(read_example("store.sire"), N=cells, INIT=init, WRITES=int(writes))

    def check(case: CorpusCase, compiled: Compiled, result: RunResult) -> list[str]:
        f: list[str] = []
        want = list(range(cells)) if writes else [init] * cells
        _expect(f, "read-back", result.variables.get("r"), want)
        (store,) = _binding(result, "Store")
        _expect(f, "final store", store.states[0].get("data"), want)
        return f

    return CorpusCase(f"store(init={init}, writes={writes})", src, check=check,
                      params=dict(init=init, writes=writes, cells=cells))


# -- shared memory -----------------------------------------------------------


def case_shared_memory(stores: int = 4, clients: int = 4, per_client: int = 4,
                       spread: int = 1, seed: int = 0) -> CorpusCase:
    space = max(1, clients * per_client)
    src = with_constants(read_example("shared_memory.sire"), N=space, n=stores, m=clients,
                         K=per_client, SPREAD=spread)

    def address(i: int, j: int) -> int:
        return spread * (i + clients * j)

    def check(case: CorpusCase, compiled: Compiled, result: RunResult) -> list[str]:
        f: list[str] = []
        (store,) = _binding(result, "Store")
        (access,) = _binding(result, "Access")
        calls = protocol.call_sessions(result.events, result.servers)
        for s in calls:
            if s.binding is access and not s.local:
                f.append(f"client call to access server {s.server} is not local")
            if s.binding is store and s.local:
                f.append(f"access server call to store {s.server} is local")
        if spread == 0:
            f += serializability_failures(result, store, init=0)
            final = store.states[0]["data"][0]
            writers = [s.actuals[1] for s in calls if s.binding is store and s.call == "write"]
            if clients and per_client:
                if final not in range(clients):
                    f.append(f"address 0 holds {final}, not a client id")
                _expect(f, "address 0 holds last accepted write", final, writers[-1])
            return f
        expected = [0] * space
        for i in range(clients):
            for j in range(per_client):
                expected[address(i, j)] = i + 1000 * j
        for k in range(stores):
            data = store.states[k]["data"]
            for a in range(space):
                if a % stores == k:
                    _expect(f, f"store {k} address {a}", data[a], expected[a])
        for i in range(clients):
            reads = [s.returns[0] for s in calls if s.binding is access and s.element == i and s.call == "read"]
            _expect(f, f"client {i} read-back", reads, [i + 1000 * j for j in range(per_client)])
        return f

    cfg = MachineConfig(seed=seed)
    return CorpusCase(f"shared_memory(n={stores}, m={clients}, K={per_client}, spread={spread})", src, cfg,
                      check, dict(stores=stores, clients=clients, per_client=per_client, spread=spread))


def serializability_failures(result: RunResult, binding, init: int = 0) -> list[str]:
    """Replay every accepted call on a Store element sequentially, in accept order,
    and compare read results and the final state with the run."""
    f: list[str] = []
    sessions = [s for s in protocol.call_sessions(result.events, result.servers) if s.binding is binding]
    for k in range(binding.extent):
        model: dict[int, int] = {}
        size = len(binding.states[k]["data"])
        for s in (x for x in sessions if x.element == k):
            if s.call == "write":
                a, v = s.actuals
                model[a] = v
            elif s.call == "read":
                a, _ = s.actuals
                _expect(f, f"replayed read of {a} at seq {s.accept.seq}", s.returns, [model.get(a, init)])
        replay = [model.get(a, init) for a in range(size)]
        _expect(f, f"replayed final state of element {k}", binding.states[k]["data"], replay)
    return f


# -- distributed memory --------------------------------------------------------


def case_distributed_memory(stores: int = 4, cells: int = 4, layered: bool = True) -> CorpusCase:
    src = with_constants(read_example("distributed_memory.sire"), N=cells, n=stores)
    if not layered:
        src = src.replace("server s is Store(0)[n] |", "server s is Store(0)[n] &")

    def check(case: CorpusCase, compiled: Compiled, result: RunResult) -> list[str]:
        f: list[str] = []
        (store,) = _binding(result, "Store")
        calls = protocol.call_sessions(result.events, result.servers)
        cross = protocol.cross_processor_call_messages(result.events, result.servers)
        if layered and cross:
            f.append(f"{len(cross)} cross-processor call messages, first at seq {cross[0].seq}")
        if not layered and not cross:
            f.append("disjoint placement produced no cross-processor call messages")
        for i in range(stores):
            _expect(f, f"store {i}", store.states[i]["data"], [1000 * i + j for j in range(cells)])
            reads = [s.returns[0] for s in calls if s.element == i and s.call == "read"]
            _expect(f, f"client {i} read-back", reads, [1000 * i + j for j in range(cells)])
        return f

    return CorpusCase(f"distributed_memory(n={stores}, N={cells}, {'|' if layered else '&'})", src,
                      check=check, params=dict(stores=stores, cells=cells, layered=layered))


# -- Cannon ---------------------------------------------------------------------


Matrix = list[list[int]]


def random_matrix(size: int, rng: random.Random, lo: int = -9, hi: int = 9) -> Matrix:
    return [[rng.randint(lo, hi) for _ in range(size)] for _ in range(size)]


def identity(size: int) -> Matrix:
    return [[int(i == j) for j in range(size)] for i in range(size)]


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Sequential triple-loop oracle."""
    n = len(a)
    c = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            acc = 0
            for k in range(n):
                acc += a[i][k] * b[k][j]
            c[i][j] = acc
    return c


def _load(server: str, m: Matrix, n: int, d: int) -> str:
    lines = []
    for y in range(n):
        for x in range(n):
            for i in range(d):
                for j in range(d):
                    lines.append(f"{server}[{y}][{x}].write({i * d + j}, {m[y * d + i][x * d + j]})")
    return "{ " + " ;\n  ".join(lines) + "\n}"


def cannon_source(n: int, d: int, a: Matrix, b: Matrix) -> str:
    tmpl = string.Template(example_path("cannon.tmpl").read_text())
    return tmpl.substitute(n=n, d=d, loada=_load("a", a, n, d), loadb=_load("b", b, n, d))


def cannon_inputs(n: int, d: int, seed: int) -> tuple[Matrix, Matrix]:
    rng = random.Random(seed)
    return random_matrix(n * d, rng), random_matrix(n * d, rng)


def case_cannon(n: int = 2, d: int = 1, seed: int = 0, a: Matrix | None = None,
                b: Matrix | None = None, label: str | None = None) -> CorpusCase:
    if a is None or b is None:
        ra, rb = cannon_inputs(n, d, seed)
        a = ra if a is None else a
        b = rb if b is None else b
    want = matmul(a, b)

    def check(case: CorpusCase, compiled: Compiled, result: RunResult) -> list[str]:
        f: list[str] = []
        _expect(f, "C", result.variables.get("C"), want)
        return f

    name = f"cannon(n={n}, d={d}, {label or f'seed={seed}'})"
    return CorpusCase(name, cannon_source(n, d, a, b), check=check,
                      params=dict(n=n, d=d, seed=seed, a=a, b=b, want=want))


# -- task farm -------------------------------------------------------------------


def case_task_farm(items: int = 32, workers: int = 4) -> CorpusCase:
    per_worker = -(-items // workers)
    src = with_constants(read_example("task_farm.sire"), W=items, K=workers, T=per_worker)

    def check(case: CorpusCase, compiled: Compiled, result: RunResult) -> list[str]:
        f: list[str] = []
        _expect(f, "results", sorted(result.variables.get("sq", [])), sorted(i * i for i in range(items)))
        per = result.variables.get("per", [])
        _expect(f, "items completed", sum(per), items)
        if items >= workers and any(c < 1 for c in per):
            f.append(f"some worker completed no item: {per}")
        return f

    return CorpusCase(f"task_farm(W={items}, K={workers})", src, check=check,
                      params=dict(items=items, workers=workers))


def case_alloc_example() -> CorpusCase:
    return CorpusCase("alloc_example", read_example("alloc_example.sire"))


def all_cases() -> list[CorpusCase]:
    cases = [
        case_store(),
        case_store(init=0, writes=False),
        case_store(init=5, writes=False),
        case_shared_memory(),
        case_shared_memory(clients=1, per_client=0),
        case_shared_memory(per_client=1, spread=0),
        case_distributed_memory(),
        case_distributed_memory(stores=1),
        case_distributed_memory(layered=False),
        case_task_farm(),
        case_task_farm(workers=1),
        case_task_farm(items=0),
        case_alloc_example(),
    ]
    cases += [case_cannon(n, d, seed=0) for n, d in [(2, 1), (2, 2), (3, 1), (3, 2)]]
    cases.append(case_cannon(2, 2, a=identity(4), b=cannon_inputs(2, 2, 1)[1], label="A=I"))
    ones = [[1] * 4 for _ in range(4)]
    cases.append(case_cannon(2, 2, a=ones, b=ones, label="ones"))
    return cases
