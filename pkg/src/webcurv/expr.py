"""First integrals as text: tokenizer, recursive-descent parser, printer,
plain evaluation and jet evaluation.

Grammar (``^`` binds tighter than unary minus)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := ('-' | '+') unary | power
    power    := atom ('^' exponent)?
    exponent := ('-' | '+')* power          # must fold to an integer
    atom     := NUMBER | 'x' | 'y' | FUNC '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

from . import jets as J
from .errors import DomainError, ExprSyntaxError, NearZeroDivisor, WebFileError

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class Add:
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Sub:
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Mul:
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Div:
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Constant, Var, Neg, Add, Sub, Mul, Div, Pow, Call]

_BINARY = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


# -- tokenizer -----------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


@dataclass
class _Token:
    kind: str
    text: str
    pos: int  # 1-based


def tokenize(text):
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[i]!r}", i + 1,
                                  "number, variable, function or operator", text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), i + 1))
        i = m.end()
    tokens.append(_Token("eof", "", len(text) + 1))
    return tokens


# -- parser --------------------------------------------------------------------

class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected, tok=None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {found}", tok.pos, expected, self.text)

    def expect(self, text):
        if self.tok.text != text or self.tok.kind == "eof":
            self.fail(repr(text))
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.tok.kind != "eof":
            self.fail("operator or end of input")
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            operand = self.unary()
            return Neg(operand) if op == "-" else operand
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            start = self.tok
            exponent = _fold_integer(self.exponent())
            if exponent is None:
                raise ExprSyntaxError("exponent must be an integer constant", start.pos,
                                      "integer exponent", self.text)
            return Pow(base, exponent)
        return base

    def exponent(self):
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            operand = self.exponent()
            return Neg(operand) if op == "-" else operand
        return self.power()

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Constant(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if tok.text in ("x", "y"):
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            raise ExprSyntaxError(f"unknown name {tok.text!r}", tok.pos,
                                  "x, y or one of " + ", ".join(FUNCTIONS), self.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail("number, variable, function call or '('")


def _fold_integer(node):
    """Value of a constant integer-valued subtree, else None."""
    try:
        value = evaluate(node, math.nan, math.nan)
    except (ArithmeticError, ValueError, OverflowError):
        return None
    if not math.isfinite(value) or value != int(value):
        return None
    return int(value)


def parse(text: str) -> Expression:
    """Parse ``text`` into an expression tree."""
    return _Parser(text).parse()


# -- printer -----------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def to_text(e: Expression) -> str:
    """Render with the minimum parentheses needed for :func:`parse` to give ``e`` back."""
    if isinstance(e, Constant):
        s = repr(float(e.value))
        return f"({s})" if e.value < 0 or s in ("inf", "nan") else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.operand)
        if _prec(e.operand) < _PREC[Neg]:
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, Pow):
        base = to_text(e.base)
        if _prec(e.base) <= _PREC[Pow]:
            base = f"({base})"
        exp = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        return f"{base}^{exp}"
    op = _BINARY[type(e)]
    p = _PREC[type(e)]
    left = to_text(e.left)
    if _prec(e.left) < p:
        left = f"({left})"
    right = to_text(e.right)
    # left associativity: an equal-precedence right operand needs parentheses
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {op} {right}"


def _prec(e):
    return _PREC.get(type(e), 5)


# -- evaluation ----------------------------------------------------------------

_FLOAT_FUNCS = {"exp": math.exp, "log": math.log, "sin": math.sin,
                "cos": math.cos, "sqrt": math.sqrt}


def evaluate(e: Expression, x: float, y: float) -> float:
    """Plain floating-point evaluation (no jets involved)."""
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Var):
        return x if e.name == "x" else y
    if isinstance(e, Neg):
        return -evaluate(e.operand, x, y)
    if isinstance(e, Add):
        return evaluate(e.left, x, y) + evaluate(e.right, x, y)
    if isinstance(e, Sub):
        return evaluate(e.left, x, y) - evaluate(e.right, x, y)
    if isinstance(e, Mul):
        return evaluate(e.left, x, y) * evaluate(e.right, x, y)
    if isinstance(e, Div):
        return evaluate(e.left, x, y) / evaluate(e.right, x, y)
    if isinstance(e, Pow):
        return evaluate(e.base, x, y) ** e.exponent
    if isinstance(e, Call):
        return _FLOAT_FUNCS[e.func](evaluate(e.arg, x, y))
    raise TypeError(f"not an expression node: {e!r}")


def eval_jet(e: Expression, point, order: int) -> J.Jet:
    """Order-``order`` Taylor jet of ``e`` at ``point``."""
    point = (float(point[0]), float(point[1]))
    return _jet(e, point, order)


def _jet(e, point, order):
    if isinstance(e, Constant):
        return J.Jet.constant(e.value, point, order)
    if isinstance(e, Var):
        return J.jet_var(point, e.name, order)
    if isinstance(e, Neg):
        return -_jet(e.operand, point, order)
    if isinstance(e, (Add, Sub, Mul)):
        a = _jet(e.left, point, order)
        b = _jet(e.right, point, order)
        if isinstance(e, Add):
            return a + b
        return a - b if isinstance(e, Sub) else a * b
    if isinstance(e, Div):
        a = _jet(e.left, point, order)
        b = _jet(e.right, point, order)
        try:
            return J.jet_div(a, b)
        except NearZeroDivisor as exc:
            raise NearZeroDivisor(exc.value, to_text(e.right)) from None
    if isinstance(e, Pow):
        a = _jet(e.base, point, order)
        try:
            return J.jet_pow(a, e.exponent)
        except NearZeroDivisor as exc:
            raise NearZeroDivisor(exc.value, to_text(e)) from None
    if isinstance(e, Call):
        a = _jet(e.arg, point, order)
        v = a.value
        if e.func == "log" and v <= 0.0:
            raise DomainError(f"log of non-positive value {v!r}", to_text(e))
        if e.func == "sqrt" and (v < 0.0 or (v == 0.0 and order > 0)):
            raise DomainError(f"sqrt of value {v!r} (not differentiable)", to_text(e))
        return {"exp": J.jet_exp, "log": J.jet_log, "sin": J.jet_sin,
                "cos": J.jet_cos, "sqrt": J.jet_sqrt}[e.func](a)
    raise TypeError(f"not an expression node: {e!r}")


# -- webs ----------------------------------------------------------------------

@dataclass(frozen=True)
class WebDefinition:
    """Ordered first integrals ``f_1..f_d``; the order is significant."""

    integrals: tuple
    labels: tuple = field(default=())

    def __post_init__(self):
        integrals = tuple(parse(e) if isinstance(e, str) else e for e in self.integrals)
        object.__setattr__(self, "integrals", integrals)
        if len(integrals) < 3:
            raise ValueError(f"a web needs at least 3 integrals, got {len(integrals)}")
        labels = tuple(self.labels) or tuple(f"f{i + 1}" for i in range(len(integrals)))
        if len(labels) != len(integrals):
            raise ValueError("one label per integral required")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_hash", hash((integrals, labels)))

    def __hash__(self):
        # expression trees are deep; hash them once
        return self._hash

    @property
    def d(self):
        return len(self.integrals)

    @classmethod
    def from_strings(cls, *texts, labels=()):
        return cls(tuple(parse(t) for t in texts), tuple(labels))

    def jets(self, point, order):
        return [eval_jet(e, point, order) for e in self.integrals]

    def is_normalized(self):
        """True when the last integral is literally ``y``."""
        return self.integrals[-1] == Var("y")

    def texts(self):
        return [to_text(e) for e in self.integrals]


def parse_web(text: str, path=None) -> WebDefinition:
    """Parse the web file format: ``<label> = <expression>`` per line."""
    labels, integrals = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            label, _, body = line.partition("=")
            label = label.strip()
            if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", label):
                raise WebFileError(f"invalid label {label!r}", lineno, path)
        else:
            label, body = f"f{len(integrals) + 1}", line
        try:
            integrals.append(parse(body.strip()))
        except ExprSyntaxError as exc:
            raise WebFileError(str(exc), lineno, path) from exc
        labels.append(label)
    if len(integrals) < 3:
        raise WebFileError(f"a web needs at least 3 integrals, found {len(integrals)}",
                           None, path)
    return WebDefinition(tuple(integrals), tuple(labels))


def load_web(path) -> WebDefinition:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise WebFileError(str(exc), None, path) from exc
    return parse_web(text, path)


# -- transversality --------------------------------------------------------------

#: relative threshold on |det| / (|grad f_i| |grad f_j|)
EPS_TRANS = 1e-9
EPS_GRAD = 1e-12


@dataclass(frozen=True)
class PairVerdict:
    i: int  # 1-based
    j: int
    det: float
    degenerate: bool
    reason: str  # "transverse", "parallel" or "vanishing-gradient"


def check_transversality(web: Union[WebDefinition, Sequence[Expression]], point,
                         eps=EPS_TRANS) -> list:
    """Jacobian determinant verdict for every pair ``i < j`` of integrals."""
    integrals = web.integrals if isinstance(web, WebDefinition) else tuple(web)
    grads = []
    for e in integrals:
        jet = eval_jet(e, point, 1)
        grads.append((jet.coeffs[1, 0], jet.coeffs[0, 1]))
    norms = [math.hypot(*g) for g in grads]
    scale = max(1.0, max(norms))
    verdicts = []
    for i in range(len(grads)):
        for j in range(i + 1, len(grads)):
            (ax, ay), (bx, by) = grads[i], grads[j]
            det = ax * by - ay * bx
            if min(norms[i], norms[j]) <= EPS_GRAD * scale:
                verdicts.append(PairVerdict(i + 1, j + 1, det, True, "vanishing-gradient"))
            elif abs(det) <= eps * norms[i] * norms[j]:
                verdicts.append(PairVerdict(i + 1, j + 1, det, True, "parallel"))
            else:
                verdicts.append(PairVerdict(i + 1, j + 1, det, False, "transverse"))
    return verdicts
