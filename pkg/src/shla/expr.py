"""Exact scalar expressions over chart coordinates and parameters.

Nodes are interned, so structurally equal expressions are the same object.
That keeps repeated differentiation cheap: derivatives are cached per node
and evaluation walks a DAG instead of a tree.
"""
from __future__ import annotations

import math
import re
import weakref
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Expr", "ParseError", "UnboundSymbolError", "EvalError",
    "parse", "diff", "evaluate", "evaluate_many", "free_symbols",
    "num", "sym", "sin", "cos", "exp", "PI", "ZERO", "ONE", "as_expr",
    "substitute", "central_difference",
]


class ParseError(ValueError):
    def __init__(self, msg, offset):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset


class UnboundSymbolError(KeyError):
    def __init__(self, names):
        self.names = sorted(names)
        super().__init__("unbound symbol(s): " + ", ".join(self.names))

    def __str__(self):
        return self.args[0]


class EvalError(ArithmeticError):
    pass


_TABLE: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()

# precedence used by the printer
_P_ADD, _P_MUL, _P_NEG, _P_POW, _P_ATOM = 1, 2, 3, 4, 5


class Expr:
    __slots__ = ("op", "args", "_free", "_d", "__weakref__")

    def __new__(cls, op, args):
        key = (op,) + tuple(id(a) if isinstance(a, Expr) else (type(a).__name__, a) for a in args)
        hit = _TABLE.get(key)
        if hit is not None:
            return hit
        self = object.__new__(cls)
        self.op = op
        self.args = tuple(args)
        if op == "sym":
            self._free = frozenset(args)
        else:
            fs = [a._free for a in args if isinstance(a, Expr)]
            self._free = frozenset().union(*fs) if fs else frozenset()
        self._d = {}
        _TABLE[key] = self
        return self

    # immutability: nothing to set after construction
    def __setattr__(self, name, value):
        if hasattr(self, "_d") and name != "_d":
            raise AttributeError("Expr is immutable")
        object.__setattr__(self, name, value)

    def __reduce__(self):
        return (parse, (str(self),))

    # arithmetic sugar
    def __add__(self, o): return add(self, as_expr(o))
    def __radd__(self, o): return add(as_expr(o), self)
    def __sub__(self, o): return sub(self, as_expr(o))
    def __rsub__(self, o): return sub(as_expr(o), self)
    def __mul__(self, o): return mul(self, as_expr(o))
    def __rmul__(self, o): return mul(as_expr(o), self)
    def __truediv__(self, o): return div(self, as_expr(o))
    def __rtruediv__(self, o): return div(as_expr(o), self)
    def __neg__(self): return neg(self)
    def __pos__(self): return self

    def __pow__(self, n):
        if isinstance(n, Expr):
            if n.op != "num" or n.args[0].denominator != 1:
                raise ValueError("only integer powers are supported")
            n = n.args[0]
        if int(n) != n:
            raise ValueError("only integer powers are supported")
        return power(self, int(n))

    def __str__(self):
        return _fmt(self)

    def __repr__(self):
        return f"Expr({_fmt(self)!r})"

    @property
    def is_zero(self):
        return self.op == "num" and self.args[0] == 0

    @property
    def is_one(self):
        return self.op == "num" and self.args[0] == 1

    @property
    def free(self) -> frozenset:
        return self._free

    def diff(self, x):
        return diff(self, x)

    def __call__(self, **env):
        return evaluate(self, env)


# ---------------------------------------------------------------- builders

def num(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, float):
        v = Fraction(v).limit_denominator(10**12) if v != int(v) else Fraction(int(v))
    return Expr("num", (Fraction(v),))


def sym(name: str) -> Expr:
    return Expr("sym", (name,))


ZERO = num(0)
ONE = num(1)
PI = Expr("pi", ())


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, Rational)):
        return num(v)
    if isinstance(v, float):
        return num(v)
    if isinstance(v, str):
        return parse(v)
    raise TypeError(f"cannot make an expression from {type(v).__name__}")


def _isnum(e):
    return e.op == "num"


def add(a, b):
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    if _isnum(a) and _isnum(b):
        return num(a.args[0] + b.args[0])
    if b.op == "neg":
        return sub(a, b.args[0])
    return Expr("add", (a, b))


def sub(a, b):
    if b.is_zero:
        return a
    if a.is_zero:
        return neg(b)
    if _isnum(a) and _isnum(b):
        return num(a.args[0] - b.args[0])
    if a is b:
        return ZERO
    return Expr("sub", (a, b))


def neg(a):
    if _isnum(a):
        return num(-a.args[0])
    if a.op == "neg":
        return a.args[0]
    return Expr("neg", (a,))


def mul(a, b):
    if a.is_zero or b.is_zero:
        return ZERO
    if a.is_one:
        return b
    if b.is_one:
        return a
    if _isnum(a) and _isnum(b):
        return num(a.args[0] * b.args[0])
    if _isnum(a) and a.args[0] == -1:
        return neg(b)
    if _isnum(b) and b.args[0] == -1:
        return neg(a)
    return Expr("mul", (a, b))


def div(a, b):
    if _isnum(b) and b.args[0] == 0:
        raise EvalError(f"division by zero in ({a})/({b})")
    if b.is_one:
        return a
    if a.is_zero:
        return ZERO
    if _isnum(a) and _isnum(b):
        return num(a.args[0] / b.args[0])
    return Expr("div", (a, b))


def power(a, n: int):
    if n == 0:
        return ONE
    if n == 1:
        return a
    if _isnum(a) and (a.args[0] != 0 or n > 0):
        return num(a.args[0] ** n)
    return Expr("pow", (a, n))


def _fn(name, a):
    if a.is_zero:
        return ZERO if name == "sin" else ONE
    return Expr(name, (a,))


def sin(a):
    return _fn("sin", as_expr(a))


def cos(a):
    return _fn("cos", as_expr(a))


def exp(a):
    return _fn("exp", as_expr(a))


_FUNCS = {"sin": sin, "cos": cos, "exp": exp}


# ---------------------------------------------------------------- calculus

def _postorder(roots):
    """Nodes of the DAG under `roots`, children before parents."""
    seen = set()
    out = []
    for root in roots:
        if id(root) in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, done = stack.pop()
            if done:
                out.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for c in node.args:
                if isinstance(c, Expr) and id(c) not in seen:
                    stack.append((c, False))
    return out


def diff(e, x: str) -> Expr:
    """Exact partial derivative of e with respect to the symbol x."""
    e = as_expr(e)
    if x not in e._free:
        return ZERO
    hit = e._d.get(x)
    if hit is not None:
        return hit
    for node in _postorder([e]):
        if x in node._d:
            continue
        if x not in node._free:
            node._d[x] = ZERO
            continue
        op, a = node.op, node.args
        if op == "sym":
            d = ONE
        elif op == "add":
            d = add(a[0]._d[x], a[1]._d[x])
        elif op == "sub":
            d = sub(a[0]._d[x], a[1]._d[x])
        elif op == "neg":
            d = neg(a[0]._d[x])
        elif op == "mul":
            d = add(mul(a[0]._d[x], a[1]), mul(a[0], a[1]._d[x]))
        elif op == "div":
            da, db = a[0]._d[x], a[1]._d[x]
            d = sub(div(da, a[1]), div(mul(a[0], db), power(a[1], 2)))
        elif op == "pow":
            d = mul(mul(num(a[1]), power(a[0], a[1] - 1)), a[0]._d[x])
        elif op == "sin":
            d = mul(cos(a[0]), a[0]._d[x])
        elif op == "cos":
            d = neg(mul(sin(a[0]), a[0]._d[x]))
        elif op == "exp":
            d = mul(node, a[0]._d[x])
        else:  # pragma: no cover
            raise AssertionError(op)
        node._d[x] = d
    return e._d[x]


def free_symbols(e) -> frozenset:
    return as_expr(e)._free


def substitute(e, mapping: Mapping[str, object]) -> Expr:
    """Replace symbols by expressions (or numbers)."""
    e = as_expr(e)
    mp = {k: as_expr(v) for k, v in mapping.items()}
    if not (e._free & mp.keys()):
        return e
    memo = {}
    for node in _postorder([e]):
        if not (node._free & mp.keys()):
            memo[id(node)] = node
            continue
        op, a = node.op, node.args
        if op == "sym":
            r = mp[a[0]]
        elif op == "pow":
            r = power(memo[id(a[0])], a[1])
        elif op in _FUNCS:
            r = _FUNCS[op](memo[id(a[0])])
        else:
            ch = [memo[id(c)] for c in a]
            r = {"add": add, "sub": sub, "mul": mul, "div": div, "neg": neg}[op](*ch)
        memo[id(node)] = r
    return memo[id(e)]


def evaluate_many(exprs: Iterable, env: Mapping[str, object], params: Mapping | None = None):
    """Evaluate several expressions sharing one memo table.

    Values in `env` may be floats or numpy arrays (broadcast together).
    """
    exprs = [as_expr(e) for e in exprs]
    scope = {}
    if params:
        scope.update({k: float(v) for k, v in params.items()})
    scope.update(env)
    need = frozenset().union(*[e._free for e in exprs]) if exprs else frozenset()
    missing = need - scope.keys()
    if missing:
        raise UnboundSymbolError(missing)
    memo = {}
    with np.errstate(all="ignore"):
        for node in _postorder(exprs):
            op, a = node.op, node.args
            if op == "num":
                v = float(a[0])
            elif op == "pi":
                v = math.pi
            elif op == "sym":
                v = scope[a[0]]
                if not isinstance(v, np.ndarray):
                    v = float(v)
            else:
                x = memo[id(a[0])]
                if op == "add":
                    v = x + memo[id(a[1])]
                elif op == "sub":
                    v = x - memo[id(a[1])]
                elif op == "mul":
                    v = x * memo[id(a[1])]
                elif op == "neg":
                    v = -x
                elif op == "div":
                    y = memo[id(a[1])]
                    if np.any(np.asarray(y) == 0):
                        raise EvalError(f"division by zero in subtree ({a[1]})")
                    v = x / y
                elif op == "pow":
                    if a[1] < 0 and np.any(np.asarray(x) == 0):
                        raise EvalError(f"division by zero in subtree ({node})")
                    v = x ** a[1] if a[1] >= 0 else 1.0 / x ** (-a[1])
                elif op == "sin":
                    v = np.sin(x)
                elif op == "cos":
                    v = np.cos(x)
                elif op == "exp":
                    v = np.exp(x)
                else:  # pragma: no cover
                    raise AssertionError(op)
            memo[id(node)] = v
    return [memo[id(e)] for e in exprs]


def evaluate(e, env: Mapping[str, object], params: Mapping | None = None):
    """Evaluate e at a point (or array of points); see evaluate_many."""
    return evaluate_many([e], env, params)[0]


def central_difference(e, x: str, env: Mapping[str, float], h: float = 1e-5, params=None):
    lo, hi = dict(env), dict(env)
    lo[x] = env[x] - h
    hi[x] = env[x] + h
    return (evaluate(e, hi, params) - evaluate(e, lo, params)) / (2 * h)


# ---------------------------------------------------------------- printing

def _prec(e):
    op = e.op
    if op == "num":
        v = e.args[0]
        if v.denominator != 1:
            return _P_MUL
        return _P_NEG if v < 0 else _P_ATOM
    if op in ("add", "sub"):
        return _P_ADD
    if op in ("mul", "div"):
        return _P_MUL
    if op == "neg":
        return _P_NEG
    if op == "pow":
        return _P_POW
    return _P_ATOM


def _fmt(e):
    memo = {}
    for node in _postorder([e]):
        op, a = node.op, node.args
        if op == "num":
            v = a[0]
            s = str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
        elif op == "pi":
            s = "pi"
        elif op == "sym":
            s = a[0]
        elif op in _FUNCS:
            s = f"{op}({memo[id(a[0])]})"
        elif op == "neg":
            c = a[0]
            inner = memo[id(c)]
            s = "-" + (inner if _prec(c) > _P_NEG else f"({inner})")
        elif op == "pow":
            c = a[0]
            inner = memo[id(c)]
            base = inner if _prec(c) == _P_ATOM else f"({inner})"
            s = f"{base}^{a[1]}"
        else:
            p = _prec(node)
            l, r = a
            ls, rs = memo[id(l)], memo[id(r)]
            if _prec(l) < p:
                ls = f"({ls})"
            # left associative: the right operand needs parentheses at equal precedence
            if _prec(r) <= p:
                rs = f"({rs})"
            sep = {"add": " + ", "sub": " - ", "mul": "*", "div": "/"}[op]
            if op in ("add", "sub") and rs.startswith("-"):
                # a + -b reads better as a - b; same value, parses back stably
                sep, rs = (" - " if op == "add" else " + "), rs[1:]
            s = ls + sep + rs
        memo[id(node)] = s
    return memo[id(e)]


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text):
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = pos
            while start < n and text[start].isspace():
                start += 1
            raise ParseError(f"unexpected character {text[start]!r}", len(text[:start].encode()))
        kind = m.lastgroup
        start = m.start(kind)
        val = m.group(kind)
        if val == "**":
            val = "^"
        toks.append((kind, val, len(text[:start].encode())))
        pos = m.end()
    toks.append(("eof", None, len(text.encode())))
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, val):
        t = self.take()
        if t[1] != val:
            what = "end of input" if t[0] == "eof" else repr(t[1])
            raise ParseError(f"expected {val!r}, found {what}", t[2])
        return t

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            right = self.term()
            left = add(left, right) if op == "+" else sub(left, right)
        return left

    def term(self):
        left = self.unary()
        while self.peek()[1] in ("*", "/"):
            op, _, off = self.take()[1], None, self.toks[self.i - 1][2]
            right = self.unary()
            if op == "*":
                left = mul(left, right)
            else:
                if right.is_zero:
                    raise ParseError("division by the constant zero", off)
                left = div(left, right)
        return left

    def unary(self):
        t = self.peek()
        if t[1] == "-":
            self.take()
            return neg(self.unary())
        if t[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            off = self.take()[2]
            e = self.unary()
            if e.op != "num" or e.args[0].denominator != 1:
                raise ParseError("exponent must be an integer constant", off)
            base = power(base, int(e.args[0]))
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return num(Fraction(val))
        if kind == "id":
            if self.peek()[1] == "(":
                if val not in _FUNCS:
                    raise ParseError(f"unknown function {val!r}", off)
                self.take()
                arg = self.expr()
                self.expect(")")
                return _FUNCS[val](arg)
            if val == "pi":
                return PI
            return sym(val)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if kind == "eof" else repr(val)
        raise ParseError(f"unexpected {what}", off)


def parse(text: str) -> Expr:
    """Parse the infix grammar documented in docs/grammar.md."""
    if isinstance(text, Expr):
        return text
    p = _Parser(str(text))
    e = p.expr()
    kind, val, off = p.peek()
    if kind != "eof":
        raise ParseError(f"unexpected {val!r}", off)
    return e
