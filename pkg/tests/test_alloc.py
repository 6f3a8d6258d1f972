from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from sire.alloc import allocate, footprint
from sire.corpus import read_example
from sire.frontend import ast
from sire.pipeline import compile_source

GOLDEN = Path(__file__).parent / "golden" / "alloc_example.tsv"
LEAF = "proc P(val i) is skip\nproc Q(val i) is skip\nproc R() is skip\n"


def compiled(src):
    return compile_source(src)


def nodes(c, cls):
    return [n for n in ast.walk(c.program.main) if isinstance(n, cls)]


def test_distributed_leaves():
    c = compiled(LEAF + "P(0) & Q(0) & R()")
    assert c.footprint == 3
    assert [c.alloc.base(x) for x in c.program.main.children] == [0, 1, 2]


@pytest.mark.parametrize("n", [1, 3, 5])
def test_layered_arrays(n):
    c = compiled(LEAF + f"par i = 0 for {n} do P(i) | par i = 0 for {n} do Q(i)")
    assert c.footprint == n
    p, q = nodes(c, ast.ParRep)
    assert c.alloc.base(p) == c.alloc.base(q) == 0


@pytest.mark.parametrize("m, n", [(2, 3), (4, 1)])
def test_distributed_arrays_are_disjoint(m, n):
    c = compiled(LEAF + f"par i = 0 for {m} do P(i) & par i = 0 for {n} do Q(i)")
    p, q = nodes(c, ast.ParRep)
    k = c.alloc.base(p)
    assert c.alloc.base(q) == k + m
    assert c.footprint == m + n


def test_single_leaf():
    c = compiled("skip")
    assert c.alloc.placements == {0: c.alloc[0]} and (c.alloc[0].base, c.alloc[0].width) == (0, 1)
    assert c.alloc.format() == "0\t0\t1\t1:1\n"


def test_footprint_rules():
    c = compiled(LEAF + """
    { P(0) ; { P(0) & Q(0) } ;
      par i = 0 for 3 do { P(i) & Q(i) } ;
      par | i = 0 for 3 do { P(i) & Q(i) } ;
      seq i = 0 for 3 do { P(i) & Q(i) & R() } }""")
    seq = c.program.main.body
    assert [footprint(x) for x in seq.children] == [1, 2, 6, 2, 3]
    assert footprint(seq) == 6


def test_server_spec_footprints():
    src = read_example("store.sire")
    amp = compiled(src)
    (spec,) = nodes(amp, ast.ServerSpec)
    assert spec.op == "&" and amp.alloc.width(spec) == 1 + footprint(spec.body)
    layered = compiled(read_example("distributed_memory.sire"))
    (spec,) = nodes(layered, ast.ServerSpec)
    assert layered.alloc.width(spec) == max(spec.instance.extent, footprint(spec.body))
    assert layered.alloc.base(spec.instance) == layered.alloc.base(spec.body)


def test_allocation_example_shape():
    c = compiled(read_example("alloc_example.sire"))
    specs = {s.name: s for s in nodes(c, ast.ServerSpec)}
    a, b, cc = specs["a"], specs["b"], specs["c"]
    amap = c.alloc
    assert (amap.base(a.instance), amap.width(a.instance)) == (0, 2)
    assert (amap.base(a.body), amap.width(a.body)) == (2, 2)
    for s in (b, cc):
        assert (amap.base(s), amap.width(s)) == (2, 2)
        assert (amap.base(s.instance), amap.width(s.instance)) == (2, 2)
    calls = {p.name: p for p in nodes(c, ast.ProcCall)}
    for name in "PQR":
        assert (amap.base(calls[name]), amap.width(calls[name])) == (2, 1)
    for name in "XY":
        assert (amap.base(calls[name]), amap.width(calls[name])) == (2, 2)
    assert c.footprint == 4


def test_allocation_example_golden():
    assert compiled(read_example("alloc_example.sire")).alloc.format() == GOLDEN.read_text()


def test_allocation_is_pure():
    src = read_example("alloc_example.sire")
    assert compiled(src).alloc.format() == compiled(src).alloc.format()


# -- invariants over generated trees ----------------------------------------------


def trees(depth):
    leaf = st.sampled_from(["skip", "P(1)", "x := 1"])
    if depth == 0:
        return leaf
    sub = trees(depth - 1)
    return st.one_of(
        leaf,
        st.builds(lambda op, xs: "{ " + f" {op} ".join(xs) + " }", st.sampled_from([";", "|", "&"]),
                  st.lists(sub, min_size=1, max_size=3)),
        st.builds(lambda kind, n, b: f"par {kind}i = 0 for {n} do {b}", st.sampled_from(["", "| "]),
                  st.integers(1, 3), sub),
        st.builds(lambda n, b: f"seq i = 0 for {n} do {b}", st.integers(0, 3), sub),
        st.builds(lambda n, op, b: f"server s is S()[{n}] {op} {b}", st.integers(1, 3),
                  st.sampled_from(["&", "|"]), sub),
    )


HEADER = ("proc P(val i) is skip\n"
          "server S() interface(call f()) to { accept { f ? () skip } }\n")


def within(child, parent):
    return parent.base <= child.base and child.base + child.width <= parent.base + parent.width


@given(trees(3))
def test_allocation_invariants(body):
    # `x` is local to each copy so the parallel-usage rule never fires
    c = compiled(HEADER + "{ var x; " + body.replace("x := 1", "{ var x; x := 1 }") + " }")
    amap = c.alloc
    for node in ast.walk(c.program.main):
        here = amap[node.node_id]
        assert here.width == footprint(node)
        kids = ast.child_processes(node)
        if isinstance(node, ast.DistPar):
            b = here.base
            for k in kids:
                assert amap.base(k) == b
                b += amap.width(k)
            assert b == here.base + here.width
        elif isinstance(node, ast.ServerSpec):
            inst = amap[node.instance.node_id]
            body_p = amap[node.body.node_id]
            if node.op == "&":
                assert (inst.base, body_p.base) == (here.base, here.base + inst.width)
            else:
                assert inst.base == body_p.base == here.base
            assert within(inst, here) and within(body_p, here)
        else:
            for k in kids:
                assert amap.base(k) == here.base
                assert within(amap[k.node_id], here)
