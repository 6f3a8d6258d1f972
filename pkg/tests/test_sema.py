from __future__ import annotations

import pytest

from sire import errors as E
from sire import sema
from sire.frontend import ast, parse_source
from sire.pipeline import compile_source

STORE = """
server Store(val init)
  interface(call read(val i, var v), call write(val i, val v)) to
{ var data[4];
  initial { seq i = 0 for 4 do data[i] := init }
  accept
  { read ? (val i, var v) v := data[i]
    write ? (val i, val v) data[i] := v }
  final {}
}
"""

PROCS = "proc P(val i) is skip\nproc Q(val i) is skip\n"


def resolved(src):
    return sema.resolve(parse_source(src))


def nodes(tree, cls):
    return [n for n in ast.walk(tree.main) if isinstance(n, cls)]


def static(src):
    tree, _ = resolved(src)
    return sema.check_static(tree)


# -- resolution -------------------------------------------------------------------


def test_write_resolves_to_second_call_id():
    tree, _ = resolved(STORE + "server s is Store(0) & seq i = 0 for 4 do s.write(i, i)")
    (call,) = nodes(tree, ast.ServerCall)
    assert call.call_id == 1 and call.sig.name == "write"
    assert call.target.sym.definition.name == "Store"


def test_subscripted_server_resolves():
    tree, _ = resolved(STORE + "{ var v; server s is Store(0)[3] & s[0].read(0, v) }")
    (call,) = nodes(tree, ast.ServerCall)
    assert call.call_id == 0
    assert call.target.subscripts == [ast.IntLit(0)]
    assert call.target.sym.kind == "server" and call.target.sym.rank == 1


def test_call_on_var_is_not_a_server():
    with pytest.raises(E.NotAServer):
        resolved(STORE + "{ var x, v; x.read(0, v) }")


def test_inner_scope_shadows():
    tree, table = resolved("{ var x; { var x; x := 1 } ; x := 2 }")
    inner, outer = nodes(tree, ast.Assign)
    assert inner.target.sym is not outer.target.sym
    assert table.lookup("x") is None  # locals are not global


@pytest.mark.parametrize("src, exc", [
    ("x := 1", E.UndefinedName),
    ("{ var x, x; skip }", E.DuplicateName),
    ("R()", E.UndefinedName),
    (PROCS + "P(1, 2)", E.ArityMismatch),
    (STORE + "server s is Store(0) & s.erase(0)", E.UnknownCall),
    (STORE + "server s is Store(0) & s.write(0)", E.ArityMismatch),
    (STORE + "server s is Store(0) & s.read(0, 1)", E.ModeMismatch),
    (STORE + "{ var v; server s is Store(0)[2] & s.read(0, v) }", E.TypeMismatch),
    (STORE + "server s is Store(0, 1) & skip", E.ArityMismatch),
    ("server s is Nope(0) & skip", E.UndefinedName),
    (PROCS + "server s is P(0) & skip", E.NotAServer),
    ("val K is 3;\nK := 1", E.ModeMismatch),
    ("{ var a[2]; a := 1 }", E.TypeMismatch),
    ("{ chan c; var x; x := c }", E.TypeMismatch),
    ("server B(var x) interface(call f()) to { accept { f ? () skip } }\nskip", E.ModeMismatch),
    ("server B() interface(call f(), call g()) to { accept { f ? () skip } }\nskip", E.UnknownCall),
    ("server B() interface(call f(val a)) to { accept { f ? (var a) skip } }\nskip", E.ModeMismatch),
    ("server B() interface(call f(val a, val a)) to { accept { f ? (val a, val a) skip } }\nskip",
     E.DuplicateName),
])
def test_resolution_errors(src, exc):
    with pytest.raises(exc) as info:
        resolved(src)
    assert info.value.pos is not None
    assert info.value.exit_status == 1


def test_resolution_is_deterministic():
    src = STORE + "{ var r[4]; server s is Store(1)[2] & par i = 0 for 2 do s[i].read(i, r[i]) }"
    a, b = resolved(src), resolved(src)
    assert [(s.name, s.kind, s.uid) for s in a[1].symbols] == [(s.name, s.kind, s.uid) for s in b[1].symbols]
    assert a[0] == b[0]


# -- static extents -----------------------------------------------------------------


def test_replicator_extent():
    tree, extents = static(PROCS + "par i = 0 for 4 do P(i)")
    (rep,) = nodes(tree, ast.ParRep)
    assert rep.extent == 4
    assert 4 in [x.value for x in extents]


def test_server_array_extent_is_folded():
    tree, extents = static(STORE + "server s is Store(0)[2 * 3] & skip")
    (spec,) = nodes(tree, ast.ServerSpec)
    assert spec.instance.extent == 6 and list(spec.dims) == [6]
    assert any(x.value == 6 and x.origin is not None for x in extents)


def test_extent_from_constants_and_proc_parameters():
    tree, _ = static("val N is 2 + 1;\nproc F(val k) is par i = 0 for k * N do skip\nF(2)")
    (rep,) = nodes(tree, ast.ParRep)
    assert rep.extent == 6


@pytest.mark.parametrize("src", [
    "{ var n; n := 3 ; par i = 0 for n do skip }",
    "{ var a[2]; { var b[a[0]]; skip } }",
    "seq j = 0 for 2 do { chan[j] c; skip }",
])
def test_non_constant_extents_rejected(src):
    with pytest.raises(E.NonConstantExtent):
        compile_source(src)


def test_self_recursion_detected():
    with pytest.raises(E.RecursionDetected) as info:
        compile_source("proc f() is { f() }\nf()")
    assert info.value.cycle == ["f"]


def test_mutual_recursion_detected():
    with pytest.raises(E.RecursionDetected) as info:
        compile_source("proc f() is g()\nproc g() is f()\nskip")
    assert sorted(info.value.cycle) == ["f", "g"]


def test_server_must_fit_one_processor():
    with pytest.raises(E.ServerFootprintError):
        compile_source("server B() interface(call f()) to { accept { f ? () { skip & skip } } }\n"
                       "server s is B() & s.f()")


# -- parallel usage ------------------------------------------------------------------


def test_disjoint_parallel_writes_ok():
    compile_source("{ var x, y; { x := 1 } | { y := 2 } }")


@pytest.mark.parametrize("sep", ["|", "&"])
def test_same_target_conflicts(sep):
    with pytest.raises(E.ParallelWriteConflict) as info:
        compile_source(f"{{ var x; {{ x := 1 }} {sep} {{ x := 2 }} }}")
    assert info.value.name == "x"


def test_write_read_conflict():
    with pytest.raises(E.ParallelWriteConflict):
        compile_source("{ var x, y; { x := 1 } | { y := x } }")


def test_replicated_write_conflict():
    with pytest.raises(E.ParallelWriteConflict):
        compile_source("{ var a[4]; par i = 0 for 4 do a[i] := i }")


def test_replicated_locals_are_fine():
    compile_source("par i = 0 for 4 do { var t; t := i * i }")


def test_single_iteration_replicator_may_write():
    compile_source("{ var x; par i = 0 for 1 do x := i }")


def test_clients_of_one_server_share_it():
    compile_source(STORE + "server s is Store(0) & { s.write(0, 1) & s.write(1, 2) & s.write(2, 3) }")


def test_reads_in_parallel_are_fine():
    compile_source("{ var x, y, z; x := 1 ; { { y := x } | { z := x } } }")
