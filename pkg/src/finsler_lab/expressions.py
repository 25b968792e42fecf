"""Tiny infix expression language for scenario files.

Grammar (precedence low to high: ``+ -`` < ``* /`` < unary ``-`` < ``^``)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" exponent)?          # right associative
    exponent := "-" exponent | power
    atom   := NUMBER | VAR | FUNC "(" expr ")" | "(" expr ")"

Variables are ``x``, ``y``, ``z``; functions are ``sqrt``, ``sin``, ``cos``,
``exp``, ``ln``. The printer emits text that reparses to the identical tree,
and ``diff`` produces symbolic derivatives used for every metric/field
derivative in the scenario pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EvalError, ParseError

VARIABLES = ("x", "y", "z")
FUNCTIONS = ("sqrt", "sin", "cos", "exp", "ln")

_MATH = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos, "exp": math.exp, "ln": math.log}

# printer/parser precedence levels
_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


class Expr:
    """Base class; concrete nodes are Const, Var, Neg, binary ops and calls."""

    precedence = _PREC_ATOM

    def __str__(self):
        return _print(self)

    def diff(self, var):
        return _diff(self, var)

    def evaluate(self, coords):
        """Evaluate at a coordinate sequence (x, y, z order)."""
        env = {name: float(c) for name, c in zip(VARIABLES, coords)}
        try:
            val = _eval(self, env)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvalError(f"cannot evaluate '{self}' at {tuple(coords)}: {exc}") from exc
        if not math.isfinite(val):
            raise EvalError(f"non-finite value for '{self}' at {tuple(coords)}")
        return val

    def variables(self):
        out = set()
        _collect_vars(self, out)
        return out


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr
    precedence = _PREC_NEG


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr
    precedence = _PREC_ADD


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr
    precedence = _PREC_ADD


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr
    precedence = _PREC_MUL


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr
    precedence = _PREC_MUL


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr
    precedence = _PREC_POW


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


# ---------------------------------------------------------------------------
# tokenizer / parser


@dataclass
class _Token:
    kind: str  # number | name | op
    text: str
    line: int
    column: int


def _tokenize(text):
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            start = i
            while i < n and (text[i].isdigit() or text[i] == "."):
                i += 1
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j].isdigit():
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
            tok = text[start:i]
            try:
                float(tok)
            except ValueError:
                raise ParseError(f"malformed number '{tok}'", line, col) from None
            tokens.append(_Token("number", tok, line, col))
            col += i - start
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            tokens.append(_Token("name", text[start:i], line, col))
            col += i - start
            continue
        if ch in "+-*/^()":
            tokens.append(_Token("op", ch, line, col))
            i += 1
            col += 1
            continue
        if ch == "×":  # accept unicode times/divide as aliases
            tokens.append(_Token("op", "*", line, col))
            i += 1
            col += 1
            continue
        if ch == "÷":
            tokens.append(_Token("op", "/", line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character '{ch}'", line, col)
    return tokens


class _Parser:
    def __init__(self, tokens, text):
        self.tokens = tokens
        self.pos = 0
        self.text = text

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is not None:
            self.pos += 1
        return tok

    def fail(self, message):
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            line = last.line if last else 1
            col = last.column + len(last.text) if last else 1
            raise ParseError(message + " (unexpected end of input)", line, col)
        raise ParseError(message + f", got '{tok.text}'", tok.line, tok.column)

    def expect(self, text):
        tok = self.peek()
        if tok is None or tok.text != text:
            self.fail(f"expected '{text}'")
        return self.next()

    def parse(self):
        node = self.expr()
        if self.peek() is not None:
            self.fail("trailing input after expression")
        return node

    def expr(self):
        node = self.term()
        while (tok := self.peek()) is not None and tok.text in "+-":
            self.next()
            rhs = self.term()
            node = Add(node, rhs) if tok.text == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while (tok := self.peek()) is not None and tok.text in "*/":
            self.next()
            rhs = self.unary()
            node = Mul(node, rhs) if tok.text == "*" else Div(node, rhs)
        return node

    def unary(self):
        tok = self.peek()
        if tok is not None and tok.text == "-":
            self.next()
            inner = self.unary()
            # fold a literal negation so printing round-trips structurally
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Neg(inner)
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok is not None and tok.text == "^":
            self.next()
            return Pow(base, self.exponent())
        return base

    def exponent(self):
        tok = self.peek()
        if tok is not None and tok.text == "-":
            self.next()
            inner = self.exponent()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Neg(inner)
        return self.power()

    def atom(self):
        tok = self.peek()
        if tok is None:
            self.fail("expected a value")
        if tok.kind == "number":
            self.next()
            return Const(float(tok.text))
        if tok.kind == "name":
            self.next()
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            raise ParseError(f"unknown identifier '{tok.text}'", tok.line, tok.column)
        if tok.text == "(":
            self.next()
            node = self.expr()
            self.expect(")")
            return node
        self.fail("expected a number, variable or '('")


def parse_expression(text):
    """Parse source text into an expression tree."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty expression", 1, 1)
    return _Parser(tokens, text).parse()


# ---------------------------------------------------------------------------
# printer


def _paren(node):
    return f"({_print(node)})"


def _print(node):
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({_print(node.arg)})"
    if isinstance(node, Neg):
        inner = _paren(node.arg) if node.arg.precedence < _PREC_NEG else _print(node.arg)
        return f"-{inner}"
    if isinstance(node, (Add, Sub)):
        op = "+" if isinstance(node, Add) else "-"
        left = _paren(node.left) if node.left.precedence < _PREC_ADD else _print(node.left)
        # a same-precedence right operand needs parens, otherwise
        # left-associative reparsing regroups the tree
        right = (
            _paren(node.right)
            if node.right.precedence <= _PREC_ADD
            else _print(node.right)
        )
        return f"{left} {op} {right}"
    if isinstance(node, (Mul, Div)):
        op = "*" if isinstance(node, Mul) else "/"
        left = _paren(node.left) if node.left.precedence < _PREC_MUL else _print(node.left)
        right = (
            _paren(node.right)
            if node.right.precedence <= _PREC_MUL
            else _print(node.right)
        )
        return f"{left} {op} {right}"
    if isinstance(node, Pow):
        base_atomic = isinstance(node.base, (Var, Call)) or (
            isinstance(node.base, Const) and node.base.value >= 0
        )
        base = _print(node.base) if base_atomic else _paren(node.base)
        # the exponent may be a power chain (right-assoc), a unary minus,
        # or an atom; anything weaker needs parens
        expo_ok = node.exponent.precedence >= _PREC_NEG
        expo = _print(node.exponent) if expo_ok else _paren(node.exponent)
        return f"{base}^{expo}"
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# evaluation


def _eval(node, env):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        if node.name not in env:
            raise EvalError(f"variable '{node.name}' undefined in this chart")
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, Add):
        return _eval(node.left, env) + _eval(node.right, env)
    if isinstance(node, Sub):
        return _eval(node.left, env) - _eval(node.right, env)
    if isinstance(node, Mul):
        return _eval(node.left, env) * _eval(node.right, env)
    if isinstance(node, Div):
        return _eval(node.left, env) / _eval(node.right, env)
    if isinstance(node, Pow):
        return _eval(node.base, env) ** _eval(node.exponent, env)
    if isinstance(node, Call):
        return _MATH[node.func](_eval(node.arg, env))
    raise TypeError(f"unknown node {node!r}")


def _collect_vars(node, out):
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Neg):
        _collect_vars(node.arg, out)
    elif isinstance(node, (Add, Sub, Mul, Div)):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, Pow):
        _collect_vars(node.base, out)
        _collect_vars(node.exponent, out)
    elif isinstance(node, Call):
        _collect_vars(node.arg, out)


# ---------------------------------------------------------------------------
# smart constructors used by diff (light constant folding only)


def _is_const(node, value=None):
    return isinstance(node, Const) and (value is None or node.value == value)


def _add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def _sub(a, b):
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_const(a, 0.0):
        return _neg(b)
    return Sub(a, b)


def _neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


def _div(a, b):
    if _is_const(a, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    return Div(a, b)


def _pow(a, b):
    if _is_const(b, 1.0):
        return a
    if _is_const(b, 0.0):
        return Const(1.0)
    if isinstance(a, Const) and isinstance(b, Const):
        try:
            return Const(a.value**b.value)
        except (ValueError, OverflowError, ZeroDivisionError):
            return Pow(a, b)
    return Pow(a, b)


def _diff(node, var):
    if isinstance(node, Const):
        return Const(0.0)
    if isinstance(node, Var):
        return Const(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        return _neg(_diff(node.arg, var))
    if isinstance(node, Add):
        return _add(_diff(node.left, var), _diff(node.right, var))
    if isinstance(node, Sub):
        return _sub(_diff(node.left, var), _diff(node.right, var))
    if isinstance(node, Mul):
        return _add(
            _mul(_diff(node.left, var), node.right),
            _mul(node.left, _diff(node.right, var)),
        )
    if isinstance(node, Div):
        num = _sub(
            _mul(_diff(node.left, var), node.right),
            _mul(node.left, _diff(node.right, var)),
        )
        return _div(num, _pow(node.right, Const(2.0)))
    if isinstance(node, Pow):
        db = _diff(node.base, var)
        de = _diff(node.exponent, var)
        if _is_const(de, 0.0):
            # d(u^c) = c * u^(c-1) * u'
            c = node.exponent
            lowered = _pow(node.base, _sub(c, Const(1.0)))
            return _mul(_mul(c, lowered), db)
        # general case via u^v * (v' ln u + v u' / u)
        term = _add(
            _mul(de, Call("ln", node.base)),
            _mul(node.exponent, _div(db, node.base)),
        )
        return _mul(node, term)
    if isinstance(node, Call):
        inner = _diff(node.arg, var)
        if node.func == "sqrt":
            return _div(inner, _mul(Const(2.0), node))
        if node.func == "sin":
            return _mul(Call("cos", node.arg), inner)
        if node.func == "cos":
            return _neg(_mul(Call("sin", node.arg), inner))
        if node.func == "exp":
            return _mul(node, inner)
        if node.func == "ln":
            return _div(inner, node.arg)
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# compilation to plain Python for hot loops


def _codegen(node):
    if isinstance(node, Const):
        return f"({node.value!r})"
    if isinstance(node, Var):
        return f"_c{VARIABLES.index(node.name)}"
    if isinstance(node, Neg):
        return f"(-{_codegen(node.arg)})"
    if isinstance(node, Add):
        return f"({_codegen(node.left)} + {_codegen(node.right)})"
    if isinstance(node, Sub):
        return f"({_codegen(node.left)} - {_codegen(node.right)})"
    if isinstance(node, Mul):
        return f"({_codegen(node.left)} * {_codegen(node.right)})"
    if isinstance(node, Div):
        return f"({_codegen(node.left)} / {_codegen(node.right)})"
    if isinstance(node, Pow):
        return f"({_codegen(node.base)} ** {_codegen(node.exponent)})"
    if isinstance(node, Call):
        return f"_{node.func}({_codegen(node.arg)})"
    raise TypeError(f"unknown node {node!r}")


def compile_expression(node, dim):
    """Compile a tree to a fast ``f(coords) -> float`` callable.

    The compiled form is used inside integrator loops; the tree-walking
    ``evaluate`` stays available as the slow reference implementation.
    """
    used = node.variables()
    allowed = set(VARIABLES[:dim])
    extra = used - allowed
    if extra:
        raise EvalError(f"expression uses {sorted(extra)} outside dimension {dim}")
    args = ", ".join(f"_c{i}" for i in range(dim))
    source = f"def _expr_fn({args}):\n    return {_codegen(node)}\n"
    namespace = {f"_{name}": fn for name, fn in _MATH.items()}
    exec(source, namespace)  # noqa: S102 - generated from our own AST only
    raw = namespace["_expr_fn"]
    text = str(node)

    def wrapped(coords):
        try:
            # plain floats: numpy scalars turn 0/0 into nan-plus-warning
            # instead of raising, and are slower in the integrator loops
            val = raw(*(float(c) for c in coords))
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvalError(f"cannot evaluate '{text}' at {tuple(coords)}: {exc}") from exc
        if not math.isfinite(val):
            raise EvalError(f"non-finite value for '{text}' at {tuple(coords)}")
        return val

    return wrapped
