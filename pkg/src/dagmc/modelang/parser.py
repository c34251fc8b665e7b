"""Recursive-descent parser for expressions and model files.

Operator precedence, loosest first::

    if c then a else b
    < <= > >= == !=
    + -
    * /
    unary -
    ^            (right associative)
    postfix [i]  (1-based component access)
"""

from __future__ import annotations

import os

from ..errors import DuplicateName, ModelSyntaxError, UnknownSection
from . import ast
from .lexer import Token, tokenize

PARAM_KEYS = frozenset({
    "niter", "nburn", "algorithm", "strategy", "proposal", "dof", "dr", "mix",
    "eta", "eta_gamma", "scaling_eta", "scaling_eta_gamma", "target_alpha",
    "theta0", "thin", "seed", "outfile", "scaling_adapt", "counting",
})

NODE_FIELDS = ("parents", "density", "init_val", "dim")
RESERVED = frozenset({"if", "then", "else"})
SECTIONS = ("const", "model", "data", "repeat_block", "block", "functional", "para")


class Parser:
    def __init__(self, text: str, source=None, base_dir=None):
        self.source = source
        self.base_dir = base_dir
        self.tokens = tokenize(text, source)
        self.i = 0

    # -- token helpers -------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def error(self, message, tok=None, cls=ModelSyntaxError):
        tok = tok or self.tok
        if tok.kind == "EOF":
            message = f"{message} at end of input"
        return cls(message, tok.line, tok.col, self.source)

    def at_op(self, *ops) -> bool:
        return self.tok.kind == "OP" and self.tok.value in ops

    def at_ident(self, *names) -> bool:
        return self.tok.kind == "IDENT" and (not names or self.tok.value in names)

    def expect_op(self, op) -> Token:
        if not self.at_op(op):
            raise self.error(f"expected {op!r}, found {self._describe()}")
        return self.advance()

    def expect_ident(self, what="identifier") -> Token:
        if self.tok.kind != "IDENT" or self.tok.value in RESERVED:
            raise self.error(f"expected {what}, found {self._describe()}")
        return self.advance()

    def expect_ident_or_str(self, what="name") -> Token:
        if self.tok.kind == "STR":
            return self.advance()
        return self.expect_ident(what)

    def skip_separators(self):
        while self.at_op(",", ";"):
            self.advance()

    def _describe(self) -> str:
        t = self.tok
        if t.kind == "EOF":
            return "end of input"
        if t.kind == "STR":
            return f"string {t.value!r}"
        return repr(t.value) if t.kind != "NUM" else f"number {t.value!r}"

    @staticmethod
    def _pos(tok):
        return (tok.line, tok.col)

    # -- expressions ---------------------------------------------------

    def parse_expression_only(self):
        e = self.expr()
        if self.tok.kind != "EOF":
            raise self.error(f"unexpected {self._describe()}")
        return e

    def expr(self):
        if self.at_ident("if"):
            start = self.advance()
            test = self.expr()
            if not self.at_ident("then"):
                raise self.error(f"expected 'then', found {self._describe()}")
            self.advance()
            then = self.expr()
            if not self.at_ident("else"):
                raise self.error(f"expected 'else', found {self._describe()}")
            self.advance()
            orelse = self.expr()
            return ast.Cond(test, then, orelse, pos=self._pos(start))
        return self.comparison()

    def comparison(self):
        left = self.additive()
        while self.at_op(*ast.COMPARISONS):
            op = self.advance()
            right = self.additive()
            left = ast.Binary(op.value, left, right, pos=self._pos(op))
        return left

    def additive(self):
        left = self.term()
        while self.at_op("+", "-"):
            op = self.advance()
            right = self.term()
            left = ast.Binary(op.value, left, right, pos=self._pos(op))
        return left

    def term(self):
        left = self.unary()
        while self.at_op("*", "/"):
            op = self.advance()
            right = self.unary()
            left = ast.Binary(op.value, left, right, pos=self._pos(op))
        return left

    def unary(self):
        if self.at_op("-"):
            op = self.advance()
            return ast.Unary("-", self.unary(), pos=self._pos(op))
        return self.power()

    def power(self):
        base = self.postfix()
        if self.at_op("^"):
            op = self.advance()
            exponent = self.unary()
            return ast.Binary("^", base, exponent, pos=self._pos(op))
        return base

    def postfix(self):
        e = self.primary()
        while self.at_op("["):
            op = self.advance()
            idx = self.expr()
            self.expect_op("]")
            e = ast.Index(e, idx, pos=self._pos(op))
        return e

    def primary(self):
        t = self.tok
        if t.kind == "NUM":
            self.advance()
            return ast.Num(t.value, pos=self._pos(t))
        if t.kind == "STR":
            self.advance()
            return ast.Str(t.value, pos=self._pos(t))
        if t.kind == "IDENT" and t.value not in RESERVED:
            self.advance()
            if self.at_op("("):
                self.advance()
                args = self._expr_list(")")
                return ast.Call(t.value, tuple(args), pos=self._pos(t))
            return ast.Name(t.value, pos=self._pos(t))
        if self.at_op("("):
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        if self.at_op("["):
            self.advance()
            items = self._expr_list("]")
            return ast.Vector(tuple(items), pos=self._pos(t))
        raise self.error(f"unexpected {self._describe()}")

    def _expr_list(self, close):
        items = []
        if self.at_op(close):
            self.advance()
            return items
        while True:
            items.append(self.expr())
            if self.at_op(","):
                self.advance()
                continue
            self.expect_op(close)
            return items

    # -- model files ---------------------------------------------------

    def parse_file(self) -> ast.ModelFile:
        mf = ast.ModelFile(source=self.source)
        while self.tok.kind != "EOF":
            if self.at_op(";"):
                self.advance()
                continue
            if not self.at_ident():
                raise self.error(f"expected a section, found {self._describe()}")
            head = self.tok
            if head.value not in SECTIONS:
                raise self.error(f"unknown section {head.value!r}", cls=UnknownSection)
            self.advance()
            getattr(self, "_section_" + head.value)(mf, head)
        return mf

    def _check_fresh(self, mf, name, tok):
        if name in mf.consts or name in mf.nodes:
            raise self.error(f"duplicate name {name!r}", tok, cls=DuplicateName)

    def _section_const(self, mf, head):
        self.expect_op("{")
        self.skip_separators()
        while not self.at_op("}"):
            name = self.expect_ident("constant name")
            self._check_fresh(mf, name.value, name)
            self.expect_op("=")
            mf.consts[name.value] = self.expr()
            self.skip_separators()
        self.advance()

    def _section_model(self, mf, head):
        self.expect_op("{")
        self.skip_separators()
        while not self.at_op("}"):
            decl = self._node_decl()
            if decl.name in mf.nodes or decl.name in mf.consts:
                raise DuplicateName(f"duplicate name {decl.name!r}", *decl.pos, self.source)
            mf.nodes[decl.name] = decl
            self.skip_separators()
        self.advance()

    def _node_decl(self):
        name = self.expect_ident("node name")
        if self.at_op("="):
            self.advance()
        self.expect_op("{")
        fields = {}
        self.skip_separators()
        while not self.at_op("}"):
            key = self.expect_ident("node field")
            if key.value not in NODE_FIELDS:
                raise self.error(f"unknown node field {key.value!r}; expected one of {', '.join(NODE_FIELDS)}", key)
            if key.value in fields:
                raise self.error(f"field {key.value!r} given twice", key)
            self.expect_op("=")
            if key.value == "parents":
                fields["parents"] = tuple(self._name_list())
            elif key.value == "dim":
                fields["dim"] = self._positive_int("dim")
            else:
                fields[key.value] = self.expr()
            self.skip_separators()
        self.advance()
        return ast.NodeDecl(name.value, pos=self._pos(name), **fields)

    def _name_list(self):
        if self.at_op("{"):
            close = "}"
        elif self.at_op("["):
            close = "]"
        else:
            raise self.error(f"expected a name list, found {self._describe()}")
        self.advance()
        names = []
        while not self.at_op(close):
            names.append(self.expect_ident_or_str().value)
            if not self.at_op(close):
                self.expect_op(",")
        self.advance()
        return names

    def _positive_int(self, what):
        t = self.tok
        if t.kind != "NUM" or t.value != int(t.value) or t.value < 1:
            raise self.error(f"{what} must be a positive integer, found {self._describe()}")
        self.advance()
        return int(t.value)

    def _section_data(self, mf, head):
        node = self.expect_ident_or_str("node name")
        if not self.at_ident("from"):
            raise self.error(f"expected 'from', found {self._describe()}")
        self.advance()
        if self.tok.kind != "STR":
            raise self.error(f"expected a file path string, found {self._describe()}")
        path = self.advance().value
        column = 1
        if self.at_ident("column"):
            self.advance()
            column = self.advance().value if self.tok.kind == "STR" else self._positive_int("column")
        mf.data_bindings[node.value] = ast.DataBinding(node.value, path, column, self.base_dir, pos=self._pos(head))

    def _section_repeat_block(self, mf, head):
        self.expect_op("(")
        names = self._name_list()
        count = None
        if self.at_op(","):
            self.advance()
            count = self._positive_int("repeat count")
        self.expect_op(")")
        if not names:
            raise self.error("repeat_block needs at least one node", head)
        mf.replications.append(ast.ReplicateDirective(tuple(names), count, pos=self._pos(head)))

    def _section_block(self, mf, head):
        names = self._name_list()
        if not names:
            raise self.error("empty block", head)
        mf.blocks.append(tuple(names))

    def _section_functional(self, mf, head):
        self.expect_op("=")
        mf.functional = self.expr()

    def _section_para(self, mf, head):
        if self.at_op("."):
            self.advance()
            self._param(mf)
            return
        self.expect_op("{")
        self.skip_separators()
        while not self.at_op("}"):
            self._param(mf)
            self.skip_separators()
        self.advance()

    def _param(self, mf):
        key = self.expect_ident("parameter name")
        if key.value not in PARAM_KEYS:
            raise self.error(f"unknown parameter {key.value!r}", key)
        self.expect_op("=")
        mf.params[key.value] = self.expr()


def parse_expr(text: str):
    """Parse a single expression; raises :class:`ModelSyntaxError` with a position."""
    return Parser(text).parse_expression_only()


def parse_model(text: str, source=None) -> ast.ModelFile:
    """Parse model-file text.

    ``source`` is a path used in diagnostics and as the base directory for
    relative ``data`` paths.
    """
    base_dir = os.path.dirname(os.path.abspath(source)) if source else None
    return Parser(text, source, base_dir).parse_file()


def parse_model_file(path) -> ast.ModelFile:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_model(text, source=str(path))
