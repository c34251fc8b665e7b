"""Canonical text form of expressions and model files.

``parse_expr(pretty(e)) == e`` for every tree the parser can produce, and
``parse_model(pretty_model(mf)) == mf``.
"""

from __future__ import annotations

from . import ast

_BINARY_PREC = {
    "<": 1, "<=": 1, ">": 1, ">=": 1, "==": 1, "!=": 1,
    "+": 2, "-": 2,
    "*": 3, "/": 3,
}
_UNARY = 4
_POWER = 5
_POSTFIX = 6
_ATOM = 7


def format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def _prec(e) -> int:
    if isinstance(e, ast.Cond):
        return 0
    if isinstance(e, ast.Binary):
        return _POWER if e.op == "^" else _BINARY_PREC[e.op]
    if isinstance(e, ast.Unary):
        return _UNARY
    if isinstance(e, ast.Index):
        return _POSTFIX
    return _ATOM


def pretty(e, min_prec: int = 0) -> str:
    if isinstance(e, ast.Num):
        text = format_number(e.value)
        return f"({text})" if e.value < 0 else text
    if isinstance(e, ast.Str):
        return _quote(e.value)
    if isinstance(e, ast.Name):
        return e.id
    if isinstance(e, ast.Call):
        return f"{e.func}({', '.join(pretty(a) for a in e.args)})"
    if isinstance(e, ast.Vector):
        return "[" + ", ".join(pretty(a) for a in e.items) + "]"

    p = _prec(e)
    if isinstance(e, ast.Cond):
        text = f"if {pretty(e.test)} then {pretty(e.then)} else {pretty(e.orelse)}"
    elif isinstance(e, ast.Unary):
        text = "-" + pretty(e.operand, _UNARY)
    elif isinstance(e, ast.Index):
        text = f"{pretty(e.target, _POSTFIX)}[{pretty(e.index)}]"
    elif e.op == "^":
        text = f"{pretty(e.left, _POSTFIX)}^{pretty(e.right, _UNARY)}"
    else:
        text = f"{pretty(e.left, p)} {e.op} {pretty(e.right, p + 1)}"
    return f"({text})" if p < min_prec else text


def _name_list(names) -> str:
    return "{" + ", ".join(_quote(n) for n in names) + "}"


def pretty_model(mf: ast.ModelFile) -> str:
    out = []
    if mf.consts:
        out.append("const {")
        out.extend(f"  {k} = {pretty(v)}" for k, v in mf.consts.items())
        out.append("}")
    if mf.nodes:
        out.append("model {")
        for decl in mf.nodes.values():
            fields = []
            if decl.parents is not None:
                fields.append(f"parents = {_name_list(decl.parents)}")
            if decl.density is not None:
                fields.append(f"density = {pretty(decl.density)}")
            if decl.init_val is not None:
                fields.append(f"init_val = {pretty(decl.init_val)}")
            if decl.dim is not None:
                fields.append(f"dim = {decl.dim}")
            out.append(f"  {decl.name} {{ {'; '.join(fields)} }}")
        out.append("}")
    for b in mf.data_bindings.values():
        col = _quote(b.column) if isinstance(b.column, str) else str(b.column)
        out.append(f"data {_quote(b.node)} from {_quote(b.path)} column {col}")
    for r in mf.replications:
        count = f", {r.count}" if r.count is not None else ""
        out.append(f"repeat_block({_name_list(r.block_nodes)}{count})")
    for blk in mf.blocks:
        out.append(f"block {_name_list(blk)}")
    if mf.functional is not None:
        out.append(f"functional = {pretty(mf.functional)}")
    if mf.params:
        out.append("para {")
        out.extend(f"  {k} = {pretty(v)}" for k, v in mf.params.items())
        out.append("}")
    return "\n".join(out) + ("\n" if out else "")
