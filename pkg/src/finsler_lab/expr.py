"""Expression trees over phase-space coordinates x1..xn, y1..yn.

Nodes are hash-consed: building the same expression twice returns the same
object, so identity comparison is structural comparison and derivative
subtrees are shared between every expression that uses them.  Only constant
folding and 0/1 identities are applied on construction.

Grammar accepted by :func:`parse` (highest precedence first)::

    atom    := number | x<i> | y<i> | func '(' expr ')' | '(' expr ')'
    power   := atom ('^' unary)?          exponent must fold to a constant
    unary   := '-' unary | power
    term    := unary (('*' | '/') unary)*
    expr    := term (('+' | '-') term)*

with ``func`` one of sqrt, exp, log, sin, cos.
"""
from __future__ import annotations

import math
import re
import threading
import weakref
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Expr", "ParseError", "DomainError",
    "const", "x", "y", "var", "sqrt", "exp", "log", "sin", "cos",
    "parse", "to_string", "diff", "evaluate", "evaluate_many", "ZERO", "ONE",
]

FUNCTIONS = ("sqrt", "exp", "log", "sin", "cos")
_BINARY = ("add", "sub", "mul", "div")

_INTERN: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()
_INTERN_LOCK = threading.Lock()


class ParseError(ValueError):
    """Rejected expression text.  ``offset`` is a 0-based character offset."""

    def __init__(self, offset: int, expected: str, text: str):
        self.offset = offset
        self.expected = expected
        lo = max(0, offset - 15)
        self.excerpt = text[lo:offset + 15]
        caret = " " * (offset - lo) + "^"
        super().__init__(f"at offset {offset}: expected {expected}\n  {self.excerpt}\n  {caret}")


class DomainError(ArithmeticError):
    """Raised when evaluation leaves the domain of log, sqrt, ^ or division."""

    def __init__(self, message: str, expr: "Expr"):
        self.expr = expr
        super().__init__(f"{message} in subexpression {to_string(expr, limit=200)}")


class Expr:
    __slots__ = ("op", "args", "value", "mask", "_d", "__weakref__")

    op: str
    args: tuple
    value: object
    mask: int

    def __new__(cls, op: str, args: tuple = (), value: object = None):
        key = (op, value, tuple(id(a) for a in args))
        node = _INTERN.get(key)
        if node is not None:
            return node
        node = object.__new__(cls)
        node.op = op
        node.args = args
        node.value = value
        node._d = {}
        if op == "var":
            kind, idx = value
            node.mask = 1 << _var_bit(kind, idx)
        else:
            m = 0
            for a in args:
                m |= a.mask
            node.mask = m
        with _INTERN_LOCK:
            # another thread may have interned the same node meanwhile
            return _INTERN.setdefault(key, node)

    # construction sugar
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, other):
        if isinstance(other, Expr):
            if other.op != "const":
                raise TypeError("exponent must be a constant")
            other = other.value
        return power(self, float(other))

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Expr({to_string(self, limit=120)!r})"

    def __str__(self):
        return to_string(self)

    def __reduce__(self):
        return (parse_dimensionless, (to_string(self),))

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    def is_zero(self) -> bool:
        return self.op == "const" and self.value == 0.0

    def depends_on(self, kind: str, idx: int) -> bool:
        return bool(self.mask >> _var_bit(kind, idx) & 1)

    def max_index(self) -> int:
        """Largest variable index referenced (0 for constants)."""
        m, bit = self.mask, 0
        while m:
            m >>= 1
            bit += 1
        return (bit + 1) // 2


def _var_bit(kind: str, idx: int) -> int:
    return 2 * (idx - 1) + (0 if kind == "x" else 1)


def _coerce(v) -> Expr:
    if isinstance(v, Expr):
        return v
    return const(float(v))


def const(v: float) -> Expr:
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"non-finite constant {v}")
    if v == 0.0:
        v = 0.0  # collapse -0.0
    return Expr("const", (), v)


ZERO = const(0.0)
ONE = const(1.0)


def var(kind: str, idx: int) -> Expr:
    if kind not in ("x", "y") or idx < 1:
        raise ValueError(f"bad variable {kind}{idx}")
    return Expr("var", (), (kind, int(idx)))


def x(i: int) -> Expr:
    return var("x", i)


def y(i: int) -> Expr:
    return var("y", i)


def add(a: Expr, b: Expr) -> Expr:
    if a.is_const and b.is_const:
        return const(a.value + b.value)
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    return Expr("add", (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if a.is_const and b.is_const:
        return const(a.value - b.value)
    if b.is_zero():
        return a
    if a.is_zero():
        return neg(b)
    return Expr("sub", (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if a.is_const and b.is_const:
        return const(a.value * b.value)
    if a.is_zero() or b.is_zero():
        return ZERO
    if a is ONE:
        return b
    if b is ONE:
        return a
    return Expr("mul", (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if b.is_const and b.value == 0.0:
        return Expr("div", (a, b))  # left for evaluation to report
    if a.is_const and b.is_const:
        return const(a.value / b.value)
    if a.is_zero():
        return ZERO
    if b is ONE:
        return a
    return Expr("div", (a, b))


def neg(a: Expr) -> Expr:
    if a.is_const:
        return const(-a.value)
    if a.op == "neg":
        return a.args[0]
    return Expr("neg", (a,))


def power(a: Expr, c: float) -> Expr:
    c = float(c)
    if c == 0.0:
        return ONE
    if c == 1.0:
        return a
    if a.is_const:
        try:
            v = a.value ** c
        except ZeroDivisionError:
            v = None
        if isinstance(v, float) and math.isfinite(v):
            return const(v)
    return Expr("pow", (a,), c)


_FOLD = {"sqrt": math.sqrt, "exp": math.exp, "log": math.log, "sin": math.sin, "cos": math.cos}


def _func(name: str, a: Expr) -> Expr:
    if a.is_const:
        try:
            return const(_FOLD[name](a.value))
        except (ValueError, OverflowError):
            pass
    return Expr(name, (a,))


def sqrt(a) -> Expr:
    return _func("sqrt", _coerce(a))


def exp(a) -> Expr:
    return _func("exp", _coerce(a))


def log(a) -> Expr:
    return _func("log", _coerce(a))


def sin(a) -> Expr:
    return _func("sin", _coerce(a))


def cos(a) -> Expr:
    return _func("cos", _coerce(a))


def total(terms: Iterable[Expr]) -> Expr:
    out = ZERO
    for t in terms:
        out = add(out, t)
    return out


# ---------------------------------------------------------------------------
# differentiation

def _postorder(roots: Sequence[Expr], keep=lambda n: True) -> list[Expr]:
    """Children-first ordering of the DAG below ``roots`` (iterative)."""
    order: list[Expr] = []
    seen: set[int] = set()
    for root in roots:
        if id(root) in seen or not keep(root):
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for a in node.args:
                if id(a) not in seen and keep(a):
                    stack.append((a, False))
    return order


def diff(e: Expr, kind: str, idx: int | None = None) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``kind``+``idx``.

    ``kind`` may also be a variable name such as ``"y2"`` or a variable Expr.
    """
    if isinstance(kind, Expr):
        kind, idx = kind.value
    elif idx is None:
        kind, idx = kind[0], int(kind[1:])
    bit = 1 << _var_bit(kind, idx)
    key = (kind, idx)
    if not e.mask & bit:
        return ZERO
    cached = e._d.get(key)
    if cached is not None:
        return cached
    for node in _postorder([e], keep=lambda n: n.mask & bit and key not in n._d):
        node._d[key] = _diff_node(node, key)
    return e._d[key]


def _diff_node(node: Expr, key) -> Expr:
    op = node.op
    if op == "var":
        return ONE if node.value == key else ZERO
    if op == "const":
        return ZERO
    a = node.args[0]
    da = a._d.get(key, ZERO)
    if op in _BINARY:
        b = node.args[1]
        db = b._d.get(key, ZERO)
        if op == "add":
            return add(da, db)
        if op == "sub":
            return sub(da, db)
        if op == "mul":
            return add(mul(da, b), mul(a, db))
        # quotient rule, split so a constant numerator stays cheap
        return sub(div(da, b), div(mul(a, db), mul(b, b)))
    if op == "neg":
        return neg(da)
    if op == "pow":
        c = node.value
        return mul(mul(const(c), power(a, c - 1.0)), da)
    if op == "sqrt":
        return div(da, mul(const(2.0), node))
    if op == "exp":
        return mul(node, da)
    if op == "log":
        return div(da, a)
    if op == "sin":
        return mul(cos(a), da)
    if op == "cos":
        return neg(mul(sin(a), da))
    raise AssertionError(op)


def grad_y(e: Expr, n: int) -> list[Expr]:
    return [diff(e, "y", i) for i in range(1, n + 1)]


def grad_x(e: Expr, n: int) -> list[Expr]:
    return [diff(e, "x", i) for i in range(1, n + 1)]


# ---------------------------------------------------------------------------
# printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYM = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


class _Truncated(Exception):
    pass


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 else s


def to_string(e: Expr, limit: int | None = None) -> str:
    """Infix rendering that :func:`parse` reads back to the same tree."""
    parts: list[str] = []
    budget = [limit if limit is not None else -1]

    def emit(s: str):
        parts.append(s)
        if budget[0] >= 0:
            budget[0] -= len(s)
            if budget[0] < 0:
                raise _Truncated

    def walk(node: Expr, parent_prec: int, right_side: bool):
        op = node.op
        if op == "const":
            emit(_fmt_number(node.value))
        elif op == "var":
            emit(f"{node.value[0]}{node.value[1]}")
        elif op in FUNCTIONS:
            emit(op + "(")
            walk(node.args[0], 0, False)
            emit(")")
        else:
            prec = _PREC[op]
            wrap = prec < parent_prec or (right_side and prec == parent_prec and op in _BINARY)
            if wrap:
                emit("(")
            if op == "neg":
                emit("-")
                walk(node.args[0], prec + 1, False)
            elif op == "pow":
                walk(node.args[0], prec + 1, False)
                emit("^" + _fmt_number(node.value))
            else:
                walk(node.args[0], prec, False)
                emit(f" {_SYM[op]} ")
                walk(node.args[1], prec, True)
            if wrap:
                emit(")")

    try:
        walk(e, 0, False)
    except _Truncated:
        return "".join(parts)[:limit] + "..."
    return "".join(parts)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, text: str, dim: int | None):
        self.text = text
        self.dim = dim
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                rest = text[pos:]
                if rest.strip():
                    off = pos + len(rest) - len(rest.lstrip())
                    raise ParseError(off, "a number, variable, function or operator", text)
                break
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str, what: str):
        tok = self.take()
        if tok[1] != value or tok[0] == "end":
            raise ParseError(tok[2], what, self.text)

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            raise ParseError(0, "an expression", self.text)
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(tok[2], "an operator or end of input", self.text)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self) -> Expr:
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            at = self.peek()[2]
            ex = self.unary()
            if not ex.is_const:
                raise ParseError(at, "a constant exponent", self.text)
            return power(base, ex.value)
        return base

    def atom(self) -> Expr:
        kind, val, at = self.take()
        if kind == "num":
            return const(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(", f"'(' after {val}")
                arg = self.expr()
                self.expect(")", "')'")
                return _func(val, arg)
            m = re.fullmatch(r"([xy])(\d+)", val)
            if m is None:
                raise ParseError(at, "a variable x<i>/y<i> or one of " + ", ".join(FUNCTIONS), self.text)
            idx = int(m.group(2))
            if idx == 0 or (self.dim is not None and idx > self.dim):
                raise ParseError(at, f"a variable index in 1..{self.dim}", self.text)
            return var(m.group(1), idx)
        if val == "(" and kind == "op":
            e = self.expr()
            self.expect(")", "')'")
            return e
        raise ParseError(at, "a number, variable, function or '('", self.text)


def parse(text: str, dim: int) -> Expr:
    """Parse infix ``text`` over variables x1..x<dim>, y1..y<dim>."""
    if dim < 1:
        raise ValueError("dim must be positive")
    return _Parser(text, dim).parse()


def parse_dimensionless(text: str) -> Expr:
    return _Parser(text, None).parse()


# ---------------------------------------------------------------------------
# evaluation

def _checked_sqrt(v, node):
    if np.any(v < 0):
        raise DomainError("sqrt of negative value", node)
    return np.sqrt(v)


def _checked_log(v, node):
    if np.any(v <= 0):
        raise DomainError("log of nonpositive value", node)
    return np.log(v)


def _checked_div(a, b, node):
    if np.any(b == 0):
        raise DomainError("division by zero", node)
    return a / b


def _checked_pow(a, node):
    c = node.value
    if not float(c).is_integer() and np.any(a < 0):
        raise DomainError("fractional power of negative value", node)
    if c < 0 and np.any(a == 0):
        raise DomainError("negative power of zero", node)
    if c == 2.0:
        return a * a
    return np.power(a, c)


def _checked_exp(v, node):
    with np.errstate(over="raise"):
        try:
            return np.exp(v)
        except FloatingPointError:
            raise DomainError("exp overflow", node) from None


class _Tape:
    """Straight-line program for a tuple of roots, one slot per DAG node."""

    def __init__(self, roots: tuple[Expr, ...]):
        order = _postorder(list(roots))
        slot = {id(n): k for k, n in enumerate(order)}
        self.size = len(order)
        self.consts = [(slot[id(n)], n.value) for n in order if n.op == "const"]
        self.vars = [(slot[id(n)], n.value) for n in order if n.op == "var"]
        self.steps = [
            (n.op, slot[id(n)], tuple(slot[id(a)] for a in n.args), n)
            for n in order if n.op not in ("const", "var")
        ]
        self.outputs = [slot[id(r)] for r in roots]
        self.const_out = [r.is_const for r in roots]

    def run(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        vals: list = [None] * self.size
        for k, v in self.consts:
            vals[k] = v
        for k, (kind, idx) in self.vars:
            src = X if kind == "x" else Y
            if idx > src.shape[1]:
                raise IndexError(f"variable {kind}{idx} outside dimension {src.shape[1]}")
            vals[k] = src[:, idx - 1]
        with np.errstate(all="ignore"):
            for op, k, args, node in self.steps:
                a = vals[args[0]]
                if op == "add":
                    vals[k] = a + vals[args[1]]
                elif op == "mul":
                    vals[k] = a * vals[args[1]]
                elif op == "sub":
                    vals[k] = a - vals[args[1]]
                elif op == "div":
                    vals[k] = _checked_div(a, vals[args[1]], node)
                elif op == "neg":
                    vals[k] = -a
                elif op == "pow":
                    vals[k] = _checked_pow(a, node)
                elif op == "sqrt":
                    vals[k] = _checked_sqrt(a, node)
                elif op == "log":
                    vals[k] = _checked_log(a, node)
                elif op == "exp":
                    vals[k] = _checked_exp(a, node)
                elif op == "sin":
                    vals[k] = np.sin(a)
                else:
                    vals[k] = np.cos(a)
        m = X.shape[0]
        out = np.empty((len(self.outputs), m))
        for row, k in enumerate(self.outputs):
            out[row] = vals[k]
        return out


@lru_cache(maxsize=1024)
def _tape(roots: tuple[Expr, ...]) -> _Tape:
    return _Tape(roots)


def evaluate_many(exprs: Sequence[Expr], X, Y) -> np.ndarray:
    """Evaluate several expressions on a batch of points.

    ``X`` and ``Y`` have shape ``(m, n)`` (or ``(n,)`` for one point).  Returns
    an array of shape ``(len(exprs), m)``.  Shared subexpressions are computed
    once.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    return _tape(tuple(exprs)).run(X, Y)


def evaluate(e: Expr, point) -> float:
    """Value of ``e`` at a single phase point (anything with ``.x`` and ``.y``)."""
    return float(evaluate_many((e,), point.x, point.y)[0, 0])
