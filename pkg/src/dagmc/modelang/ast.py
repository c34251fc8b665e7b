"""Syntax tree for expressions and model files.

Source positions are carried for diagnostics but excluded from equality, so
two trees compare equal iff they are structurally identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

Pos = Optional[tuple]


def _pos():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Num:
    value: float
    pos: Pos = _pos()


@dataclass(frozen=True)
class Str:
    value: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Name:
    id: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Cond:
    test: "Expr"
    then: "Expr"
    orelse: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class Vector:
    items: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class Index:
    target: "Expr"
    index: "Expr"
    pos: Pos = _pos()


Expr = Union[Num, Str, Name, Unary, Binary, Cond, Call, Vector, Index]

COMPARISONS = ("<", "<=", ">", ">=", "==", "!=")
ARITHMETIC = ("+", "-", "*", "/", "^")


def names_in(expr) -> set:
    """Identifiers referenced by ``expr`` (function names excluded)."""
    out = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Name):
            out.add(e.id)
        elif isinstance(e, Unary):
            stack.append(e.operand)
        elif isinstance(e, Binary):
            stack.extend((e.left, e.right))
        elif isinstance(e, Cond):
            stack.extend((e.test, e.then, e.orelse))
        elif isinstance(e, Call):
            stack.extend(e.args)
        elif isinstance(e, Vector):
            stack.extend(e.items)
        elif isinstance(e, Index):
            stack.extend((e.target, e.index))
    return out


@dataclass(frozen=True)
class NodeDecl:
    """One entry of a ``model { ... }`` section.

    ``density`` is a :class:`Str` naming a built-in (applied to the node
    value and its parents in order) or an arbitrary expression returning a
    log-density.
    """

    name: str
    parents: Optional[tuple] = None
    density: Optional[Expr] = None
    init_val: Optional[Expr] = None
    dim: Optional[int] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class DataBinding:
    node: str
    path: str
    column: Union[int, str] = 1
    base_dir: Optional[str] = field(default=None, compare=False, repr=False)
    pos: Pos = _pos()


@dataclass(frozen=True)
class ReplicateDirective:
    block_nodes: tuple
    count: Optional[int] = None
    pos: Pos = _pos()


@dataclass
class ModelFile:
    consts: dict = field(default_factory=dict)
    nodes: dict = field(default_factory=dict)
    data_bindings: dict = field(default_factory=dict)
    replications: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    functional: Optional[Expr] = None
    params: dict = field(default_factory=dict)
    source: Optional[str] = field(default=None, compare=False)

    @property
    def scaling_rule(self):
        return self.params.get("scaling_adapt")

    def is_empty(self) -> bool:
        return not (self.consts or self.nodes or self.data_bindings or self.replications
                    or self.blocks or self.functional is not None or self.params)
