"""Pretty-printer producing source that re-parses to an equal tree."""

from __future__ import annotations

from . import ast

_PREC = {"+": 1, "-": 1, "*": 2, "rem": 2}
INDENT = "  "


def expr(e: ast.Expr) -> str:
    return _expr(e)


def _prec(e: ast.Expr) -> int:
    if isinstance(e, ast.BinOp):
        return _PREC[e.op]
    if isinstance(e, ast.Neg):
        return 3
    return 4


def _expr(e: ast.Expr) -> str:
    if isinstance(e, ast.IntLit):
        return str(e.value) if e.value >= 0 else f"(-{-e.value})"
    if isinstance(e, ast.Name):
        return e.ident + "".join(f"[{_expr(s)}]" for s in e.subscripts)
    if isinstance(e, ast.Neg):
        inner = _expr(e.operand)
        if _prec(e.operand) < 3 or inner.startswith("-"):
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, ast.BinOp):
        p = _PREC[e.op]
        left, right = _expr(e.left), _expr(e.right)
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


def _exprs(items: list[ast.Expr]) -> str:
    return ", ".join(_expr(i) for i in items)


def _dims(dims: list[ast.Expr]) -> str:
    return "".join(f"[{_expr(d)}]" for d in dims)


def decl(d: ast.Decl) -> str:
    if isinstance(d, ast.VarDecl):
        return "var " + ", ".join(n + _dims(ds) for n, ds in zip(d.names, d.dims))
    return "chan" + _dims(d.dims) + " " + ", ".join(d.names)


def _open_ended(node: ast.Process) -> bool:
    """True when the printed term would swallow a following separator."""
    if isinstance(node, ast.ServerSpec):
        return True
    if isinstance(node, (ast.SeqRep, ast.ParRep)):
        return _open_ended(node.body)
    return False


def _term(node: ast.Process, depth: int) -> list[str]:
    """Lines for ``node`` in a position that accepts only a single term."""
    if isinstance(node, (ast.Seq, ast.LocalPar, ast.DistPar)):
        return _braced(_process(node, depth + 1), depth)
    return _process(node, depth)


def _braced(inner: list[str], depth: int) -> list[str]:
    pad = INDENT * depth
    return [pad + "{"] + inner + [pad + "}"]


def _process(node: ast.Process, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(node, ast.Skip):
        return [pad + "skip"]
    if isinstance(node, ast.Assign):
        return [f"{pad}{_expr(node.target)} := {_expr(node.value)}"]
    if isinstance(node, ast.Output):
        return [f"{pad}{_expr(node.chan)} ! {_exprs(node.items)}"]
    if isinstance(node, ast.Input):
        return [f"{pad}{_expr(node.chan)} ? {_exprs(node.targets)}"]
    if isinstance(node, ast.ProcCall):
        return [f"{pad}{node.name}({_exprs(node.actuals)})"]
    if isinstance(node, ast.ServerCall):
        return [f"{pad}{_expr(node.target)}.{node.call}({_exprs(node.actuals)})"]
    if isinstance(node, (ast.Seq, ast.LocalPar, ast.DistPar)):
        sep = ast.SEPARATOR[type(node)]
        lines: list[str] = []
        last = len(node.children) - 1
        for k, child in enumerate(node.children):
            if isinstance(child, (ast.Seq, ast.LocalPar, ast.DistPar)) or (k < last and _open_ended(child)):
                part = _braced(_process(child, depth + 1), depth)
            else:
                part = _process(child, depth)
            if k < last:
                part[-1] += " " + sep
            lines.extend(part)
        return lines
    if isinstance(node, ast.SeqRep):
        head = f"{pad}seq {node.index} = {_expr(node.base)} for {_expr(node.count)} do"
        return [head] + _term(node.body, depth + 1)
    if isinstance(node, ast.ParRep):
        marker = "" if node.distributed else " |"
        head = f"{pad}par{marker} {node.index} = {_expr(node.base)} for {_expr(node.count)} do"
        return [head] + _term(node.body, depth + 1)
    if isinstance(node, ast.ServerSpec):
        head = (f"{pad}server {node.name} is {node.definition}({_exprs(node.args)})"
                f"{_dims(node.extents)} {node.op}")
        return [head] + _process(node.body, depth)
    if isinstance(node, ast.Block):
        inner = [INDENT * (depth + 1) + decl(d) + ";" for d in node.decls]
        if node.body is not None:
            inner += _process(node.body, depth + 1)
        return _braced(inner, depth)
    raise TypeError(f"not a process: {node!r}")


def process(node: ast.Process) -> str:
    return "\n".join(_process(node, 0))


def _formal(f: ast.Formal) -> str:
    if f.mode == "server":
        return f"server {f.server_def}{_dims(f.dims)} {f.name}"
    if f.mode == "var":
        return f"var {f.name}{_dims(f.dims)}"
    return f"{f.mode} {f.name}"


def _params(params: list[ast.Param]) -> str:
    return ", ".join(f"{p.mode} {p.name}" for p in params)


def definition(d: ast.Definition) -> str:
    if isinstance(d, ast.ConstDef):
        return f"val {d.name} is {_expr(d.value)};"
    if isinstance(d, ast.ProcDef):
        head = f"proc {d.name}({', '.join(_formal(f) for f in d.formals)}) is"
        return "\n".join([head] + _term_or_list(d.body, 1))
    lines = [f"server {d.name}({', '.join(_formal(f) for f in d.formals)})"]
    sigs = [f"call {s.name}({_params(s.params)})" for s in d.interface]
    lines.append(INDENT + "interface(" + (",\n" + INDENT * 5).join(sigs) + ") to")
    lines.append("{")
    lines += [INDENT + decl(x) + ";" for x in d.decls]
    if d.initial is not None:
        lines.append(INDENT + "initial")
        lines += _term(d.initial, 2)
    lines.append(INDENT + "accept")
    lines.append(INDENT + "{")
    for arm in d.arms:
        lines.append(INDENT * 2 + f"{arm.call} ? ({_params(arm.params)})")
        lines += _process(arm.handler, 3)
    lines.append(INDENT + "}")
    if d.final is not None:
        lines.append(INDENT + "final")
        lines += _term(d.final, 2)
    lines.append("}")
    return "\n".join(lines)


def _term_or_list(node: ast.Process, depth: int) -> list[str]:
    return _process(node, depth)


def program(p: ast.Program) -> str:
    parts = [definition(d) for d in p.definitions]
    parts.append(process(p.main))
    return "\n\n".join(parts) + "\n"
