"""Smooth maps defined by expression strings, with exact derivatives.

Grammar:

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' int)?
    base   := number | 'x'<index> | func '(' expr ')' | '(' expr ')' | '-' base
    func   := sin | cos | exp | log | sqrt

Note that '^' binds the parsed base, so "-x1^2" is (-x1)^2 under this grammar.
Derivatives are propagated forward as second-order jets (value, gradient,
Hessian), which is forward-over-forward differentiation flattened into dense
blocks; exact for the grammar, and cheap at small n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EvalDomainError, ExprSyntaxError
from .numerics import as_vector

_FUNCS = ("sin", "cos", "exp", "log", "sqrt")


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class BinOp:
    op: str  # '+', '-', '*', '/'
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    child: object


@dataclass(frozen=True)
class IntPow:
    child: object
    power: int


@dataclass(frozen=True)
class Func:
    name: str
    child: object


# -- tokenizer / parser --------------------------------------------------------


def _tokenize(text):
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^()":
            toks.append((ch, ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            try:
                val = float(text[i:j])
            except ValueError:
                raise ExprSyntaxError(f"bad number {text[i:j]!r}", i)
            toks.append(("num", val, i))
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("name", text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    toks.append(("end", None, n))
    return toks


class _Parser:
    def __init__(self, toks, n_vars):
        self.toks = toks
        self.pos = 0
        self.n_vars = n_vars

    def peek(self):
        return self.toks[self.pos]

    def take(self, kind=None):
        tok = self.toks[self.pos]
        if kind is not None and tok[0] != kind:
            raise ExprSyntaxError(f"expected {kind!r}, found {tok[1]!r}", tok[2])
        self.pos += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"trailing input {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.base()
        if self.peek()[0] == "^":
            self.take()
            sign = 1
            if self.peek()[0] == "-":
                self.take()
                sign = -1
            tok = self.take("num")
            if float(tok[1]) != int(tok[1]):
                raise ExprSyntaxError("exponent must be an integer", tok[2])
            node = IntPow(node, sign * int(tok[1]))
        return node

    def base(self):
        tok = self.peek()
        if tok[0] == "-":
            self.take()
            return Neg(self.base())
        if tok[0] == "num":
            self.take()
            return Const(float(tok[1]))
        if tok[0] == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if tok[0] == "name":
            name = tok[1]
            if name in _FUNCS:
                self.take()
                self.take("(")
                node = self.expr()
                self.take(")")
                return Func(name, node)
            if name.startswith("x") and name[1:].isdigit():
                self.take()
                idx = int(name[1:])
                if not 1 <= idx <= self.n_vars:
                    raise ExprSyntaxError(f"variable x{idx} out of range 1..{self.n_vars}", tok[2])
                return Var(idx)
            raise ExprSyntaxError(f"unknown name {name!r}", tok[2])
        raise ExprSyntaxError(f"unexpected token {tok[1]!r}", tok[2])


def parse_expr(text: str, n: int):
    """Parse expression text over variables x1..xn into an AST."""
    return _Parser(_tokenize(text), n).parse()


def format_expr(node) -> str:
    """Fully parenthesized text form; parse(format(ast)) reproduces the ast."""
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        # The child is always parenthesized: '-x1^2' would re-associate the
        # power onto the negated base under this grammar.
        return f"(-({format_expr(node.child)}))"
    if isinstance(node, BinOp):
        return f"({format_expr(node.left)} {node.op} {format_expr(node.right)})"
    if isinstance(node, IntPow):
        return f"{_pow_base(node.child)}^{node.power}"
    if isinstance(node, Func):
        return f"{node.name}({format_expr(node.child)})"
    raise TypeError(f"not an expression node: {node!r}")


def _pow_base(node) -> str:
    if isinstance(node, (Var,)):
        return format_expr(node)
    return f"({format_expr(node)})"


def substitute_linear(node, M):
    """Replace each variable x_i by the linear form sum_j M[i-1, j] * x_j."""
    M = np.atleast_2d(np.asarray(M, dtype=float))

    def repl(i):
        terms = None
        for j in range(M.shape[1]):
            coef = M[i - 1, j]
            if coef == 0.0:
                continue
            t = BinOp("*", Const(coef), Var(j + 1))
            terms = t if terms is None else BinOp("+", terms, t)
        return terms if terms is not None else Const(0.0)

    def walk(nd):
        if isinstance(nd, Const):
            return nd
        if isinstance(nd, Var):
            return repl(nd.index)
        if isinstance(nd, Neg):
            return Neg(walk(nd.child))
        if isinstance(nd, BinOp):
            return BinOp(nd.op, walk(nd.left), walk(nd.right))
        if isinstance(nd, IntPow):
            return IntPow(walk(nd.child), nd.power)
        if isinstance(nd, Func):
            return Func(nd.name, walk(nd.child))
        raise TypeError(nd)

    return walk(node)


# -- second-order jets ----------------------------------------------------------


class Jet2:
    """Value, gradient and Hessian propagated together."""

    __slots__ = ("v", "g", "H")

    def __init__(self, v, g, H):
        self.v = float(v)
        self.g = g
        self.H = H

    @staticmethod
    def const(v, n):
        return Jet2(v, np.zeros(n), np.zeros((n, n)))

    @staticmethod
    def var(i, x, n):
        g = np.zeros(n)
        g[i] = 1.0
        return Jet2(x[i], g, np.zeros((n, n)))

    def _chain(self, f0, f1, f2):
        outer = np.outer(self.g, self.g)
        return Jet2(f0, f1 * self.g, f1 * self.H + f2 * outer)

    def __add__(self, o):
        return Jet2(self.v + o.v, self.g + o.g, self.H + o.H)

    def __sub__(self, o):
        return Jet2(self.v - o.v, self.g - o.g, self.H - o.H)

    def __neg__(self):
        return Jet2(-self.v, -self.g, -self.H)

    def __mul__(self, o):
        cross = np.outer(self.g, o.g)
        return Jet2(self.v * o.v,
                    self.v * o.g + o.v * self.g,
                    self.v * o.H + o.v * self.H + cross + cross.T)

    def reciprocal(self):
        if self.v == 0.0:
            raise EvalDomainError("division by zero")
        iv = 1.0 / self.v
        return self._chain(iv, -iv * iv, 2.0 * iv ** 3)

    def __truediv__(self, o):
        return self * o.reciprocal()

    def intpow(self, p):
        if p == 0:
            return Jet2.const(1.0, self.g.shape[0])
        if p < 0:
            return self.intpow(-p).reciprocal()
        f1 = p * self.v ** (p - 1)
        f2 = p * (p - 1) * self.v ** (p - 2) if p >= 2 else 0.0
        return self._chain(self.v ** p, f1, f2)

    def apply(self, name):
        v = self.v
        if name == "sin":
            return self._chain(math.sin(v), math.cos(v), -math.sin(v))
        if name == "cos":
            return self._chain(math.cos(v), -math.sin(v), -math.cos(v))
        if name == "exp":
            ev = math.exp(v)
            return self._chain(ev, ev, ev)
        if name == "log":
            if v <= 0.0:
                raise EvalDomainError("log of a nonpositive value")
            return self._chain(math.log(v), 1.0 / v, -1.0 / (v * v))
        if name == "sqrt":
            if v < 0.0:
                raise EvalDomainError("sqrt of a negative value")
            if v == 0.0:
                raise EvalDomainError("sqrt not differentiable at zero")
            s = math.sqrt(v)
            return self._chain(s, 0.5 / s, -0.25 / (s * v))
        raise ValueError(f"unknown function {name}")


def eval_jet(node, x) -> Jet2:
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if isinstance(node, Const):
        return Jet2.const(node.value, n)
    if isinstance(node, Var):
        return Jet2.var(node.index - 1, x, n)
    if isinstance(node, Neg):
        return -eval_jet(node.child, x)
    if isinstance(node, BinOp):
        a = eval_jet(node.left, x)
        b = eval_jet(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, IntPow):
        base = eval_jet(node.child, x)
        if node.power < 0 and base.v == 0.0:
            raise EvalDomainError("zero raised to a negative power")
        return base.intpow(node.power)
    if isinstance(node, Func):
        return eval_jet(node.child, x).apply(node.name)
    raise TypeError(f"not an expression node: {node!r}")


def eval_value(node, x) -> float:
    return eval_jet(node, x).v


# -- smooth maps ------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothMap:
    """c : R^n -> R^m assembled from m expression components."""

    n: int
    m: int
    components: tuple
    texts: tuple = ()

    def __post_init__(self):
        if len(self.components) != self.m:
            raise ValueError("component count does not match m")

    @staticmethod
    def from_strings(exprs, n) -> "SmoothMap":
        comps = tuple(parse_expr(s, n) for s in exprs)
        return SmoothMap(n, len(comps), comps, tuple(exprs))

    def value(self, x) -> np.ndarray:
        x = as_vector(x, self.n, "x")
        out = np.empty(self.m)
        for i, comp in enumerate(self.components):
            try:
                out[i] = eval_value(comp, x)
            except EvalDomainError as err:
                raise EvalDomainError(str(err), component=i) from None
        return out

    def jacobian(self, x) -> np.ndarray:
        return self.evaluate(x)[1]

    def weighted_hessian(self, x, y) -> np.ndarray:
        return self.evaluate(x, y)[2]

    def evaluate(self, x, y=None):
        """(value, jacobian, weighted hessian sum_i y_i Hess c_i) at x.

        The weighted Hessian entry is None when y is absent.
        """
        x = as_vector(x, self.n, "x")
        val = np.empty(self.m)
        jac = np.empty((self.m, self.n))
        if y is not None:
            y = as_vector(y, self.m, "y")
        wh = np.zeros((self.n, self.n)) if y is not None else None
        for i, comp in enumerate(self.components):
            try:
                jet = eval_jet(comp, x)
            except EvalDomainError as err:
                raise EvalDomainError(str(err), component=i) from None
            val[i] = jet.v
            jac[i] = jet.g
            if wh is not None:
                wh += y[i] * jet.H
        if wh is not None:
            wh = 0.5 * (wh + wh.T)
        return val, jac, wh

    def rotated(self, M) -> "SmoothMap":
        """The map x -> c(Mx), by substituting linear forms into each component."""
        comps = tuple(substitute_linear(cmp, M) for cmp in self.components)
        return SmoothMap(self.n, self.m, comps)


def evaluate_map(c: SmoothMap, x, y=None):
    return c.evaluate(x, y)


def fd_jacobian(c: SmoothMap, x, step=1e-5) -> np.ndarray:
    """Central finite differences of the map values."""
    x = as_vector(x, c.n, "x")
    J = np.empty((c.m, c.n))
    for j in range(c.n):
        dx = np.zeros(c.n)
        dx[j] = step
        J[:, j] = (c.value(x + dx) - c.value(x - dx)) / (2 * step)
    return J


def fd_weighted_hessian(c: SmoothMap, x, y, step=1e-5) -> np.ndarray:
    """Central finite differences of the weighted gradient x -> Jac(x)^T y."""
    x = as_vector(x, c.n, "x")
    y = as_vector(y, c.m, "y")
    H = np.empty((c.n, c.n))
    for j in range(c.n):
        dx = np.zeros(c.n)
        dx[j] = step
        gp = c.jacobian(x + dx).T @ y
        gm = c.jacobian(x - dx).T @ y
        H[:, j] = (gp - gm) / (2 * step)
    return 0.5 * (H + H.T)
