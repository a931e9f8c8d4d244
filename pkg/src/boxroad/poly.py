"""Sparse multivariate polynomials over the reals.

A polynomial in ``n`` variables is a map from exponent tuples to float
coefficients. Values are immutable; every operation returns a new object.
"""
from __future__ import annotations

import math
import re
from itertools import combinations_with_replacement
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

Exponent = tuple[int, ...]


class ParseError(ValueError):
    """Raised for malformed expressions; carries the 0-based character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class Polynomial:
    __slots__ = ("n", "_terms", "_arrays")

    def __init__(self, n: int, terms: Mapping[Exponent, float] | None = None):
        if n < 0:
            raise ValueError("dimension must be non-negative")
        clean: dict[Exponent, float] = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != n:
                raise ValueError(f"exponent {exp} has length {len(exp)}, expected {n}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            c = float(c)
            if c != 0.0:
                clean[exp] = clean.get(exp, 0.0) + c
                if clean[exp] == 0.0:
                    del clean[exp]
        self.n = n
        self._terms = dict(sorted(clean.items()))
        self._arrays = None

    # construction helpers
    @classmethod
    def constant(cls, n: int, value: float) -> "Polynomial":
        return cls(n, {(0,) * n: value})

    @classmethod
    def variable(cls, n: int, i: int) -> "Polynomial":
        if not 0 <= i < n:
            raise IndexError(f"variable index {i} out of range for n={n}")
        exp = [0] * n
        exp[i] = 1
        return cls(n, {tuple(exp): 1.0})

    @classmethod
    def monomial(cls, exp: Sequence[int], coef: float = 1.0) -> "Polynomial":
        return cls(len(exp), {tuple(exp): coef})

    def __getstate__(self):
        return (self.n, self._terms)

    def __setstate__(self, state):
        self.n, self._terms = state
        self._arrays = None

    @property
    def terms(self) -> Mapping[Exponent, float]:
        return MappingProxyType(self._terms)

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Exponent matrix (T x n) and coefficient vector (T,), sorted by exponent."""
        if self._arrays is None:
            if self._terms:
                exps = np.array(list(self._terms), dtype=np.int64).reshape(-1, self.n)
                coefs = np.array(list(self._terms.values()), dtype=float)
            else:
                exps = np.zeros((0, self.n), dtype=np.int64)
                coefs = np.zeros(0)
            self._arrays = (exps, coefs)
        return self._arrays

    # arithmetic
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.n != self.n:
                raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
            return other
        if isinstance(other, (int, float, np.integer, np.floating)):
            return Polynomial.constant(self.n, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, 0.0) + c
        return Polynomial(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Exponent, float] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return Polynomial(self.n, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.constant(self.n, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def scale(self, factor: float) -> "Polynomial":
        return Polynomial(self.n, {e: c * factor for e, c in self._terms.items()})

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, tuple(self._terms.items())))

    def allclose(self, other: "Polynomial", tol: float = 1e-12) -> bool:
        diff = self - other
        scale = max(1.0, self.max_abs_coefficient(), other.max_abs_coefficient())
        return diff.max_abs_coefficient() <= tol * scale

    def __repr__(self):
        return f"Polynomial({self.n}, {self.to_string()!r})"

    def to_string(self, names: Sequence[str] | None = None) -> str:
        if not self._terms:
            return "0"
        names = list(names) if names else [f"x{i + 1}" for i in range(self.n)]
        parts = []
        for exp in sorted(self._terms, key=lambda e: (-sum(e), tuple(-x for x in e))):
            c = self._terms[exp]
            factors = [n if k == 1 else f"{n}^{k}" for n, k in zip(names, exp) if k]
            mag = abs(c)
            if not factors:
                body = repr(mag)
            elif mag == 1.0:
                body = "*".join(factors)
            else:
                body = repr(mag) + "*" + "*".join(factors)
            parts.append(("-" if c < 0 else "+", body))
        text = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    # calculus and evaluation
    def partial_derivative(self, i: int) -> "Polynomial":
        """Derivative with respect to variable ``i`` (0-based)."""
        if not 0 <= i < self.n:
            raise IndexError(f"variable index {i} out of range for n={self.n}")
        out = {}
        for e, c in self._terms.items():
            if e[i]:
                d = list(e)
                d[i] -= 1
                out[tuple(d)] = c * e[i]
        return Polynomial(self.n, out)

    def gradient(self) -> list["Polynomial"]:
        return [self.partial_derivative(i) for i in range(self.n)]

    def __call__(self, x: Sequence[float]) -> float:
        return self.evaluate(x)

    def evaluate(self, x: Sequence[float]) -> float:
        """Monomial-sum evaluation in sorted exponent order."""
        if len(x) != self.n:
            raise ValueError(f"point has {len(x)} coordinates, expected {self.n}")
        xs = [float(v) for v in x]
        total = 0.0
        for e, c in self._terms.items():
            term = c
            for xi, k in zip(xs, e):
                if k:
                    term *= xi ** k
            total += term
        return total

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorised evaluation at an (N, n) array of points."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.n:
            raise ValueError(f"points must have shape (N, {self.n})")
        exps, coefs = self.arrays()
        if not len(coefs):
            return np.zeros(len(pts))
        mons = np.ones((len(pts), len(coefs)))
        for j in range(self.n):
            col = exps[:, j]
            if col.any():
                mons *= pts[:, j : j + 1] ** col[None, :]
        return mons @ coefs

    def term_magnitude(self, points: np.ndarray) -> np.ndarray:
        """Sum of |c_a x^a| at each point: the natural floating-point scale of a value."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        exps, coefs = self.arrays()
        if not len(coefs):
            return np.zeros(len(pts))
        mons = np.ones((len(pts), len(coefs)))
        for j in range(self.n):
            col = exps[:, j]
            if col.any():
                mons *= np.abs(pts[:, j : j + 1]) ** col[None, :]
        return mons @ np.abs(coefs)

    # substitutions
    def substitute(self, i: int, value: float) -> "Polynomial":
        """Fix variable ``i`` to ``value``; the result lives in n - 1 variables."""
        if not 0 <= i < self.n:
            raise IndexError(f"variable index {i} out of range for n={self.n}")
        out: dict[Exponent, float] = {}
        for e, c in self._terms.items():
            rest = e[:i] + e[i + 1 :]
            out[rest] = out.get(rest, 0.0) + c * float(value) ** e[i]
        return Polynomial(self.n - 1, out)

    def compose_affine(self, center: Sequence[float], scale: Sequence[float]) -> "Polynomial":
        """Return q(t) = p(center + scale * t), computed through a dense coefficient tensor."""
        if len(center) != self.n or len(scale) != self.n:
            raise ValueError("center/scale length must equal dimension")
        if not self._terms:
            return Polynomial(self.n)
        deg = max(max(e) for e in self._terms)
        # powers[j][k] = coefficients of (c_j + s_j t)^k in t
        powers = []
        for c, s in zip(center, scale):
            table = np.zeros((deg + 1, deg + 1))
            for k in range(deg + 1):
                for r in range(k + 1):
                    table[k, r] = math.comb(k, r) * float(c) ** (k - r) * float(s) ** r
            powers.append(table)
        dense = np.zeros((deg + 1,) * self.n)
        for e, coef in self._terms.items():
            block = np.array(coef)
            for j, k in enumerate(e):
                block = np.multiply.outer(block, powers[j][k, : k + 1])
            dense[tuple(slice(0, k + 1) for k in e)] += block
        nz = np.argwhere(dense != 0.0)
        return Polynomial(self.n, {tuple(int(v) for v in idx): dense[tuple(idx)] for idx in nz})

    def embed(self, n_total: int, positions: Sequence[int]) -> "Polynomial":
        """Re-index into ``n_total`` variables, mapping variable k to ``positions[k]``."""
        out = {}
        for e, c in self._terms.items():
            full = [0] * n_total
            for k, p in enumerate(positions):
                full[p] = e[k]
            out[tuple(full)] = c
        return Polynomial(n_total, out)


def monomial_basis(n: int, d: int) -> list[Exponent]:
    """All exponent vectors of total degree <= d, graded then lexicographic (x1 first).

    Index 0 is always the zero vector. The length is C(n + d, d).
    """
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    out: list[Exponent] = []
    for deg in range(d + 1):
        level = []
        for combo in combinations_with_replacement(range(n), deg):
            exp = [0] * n
            for v in combo:
                exp[v] += 1
            level.append(tuple(exp))
        level.sort(reverse=True)
        out.extend(level)
    return out


def sum_of_squares_combine(fs: Sequence[Polynomial]) -> Polynomial:
    if not fs:
        raise ValueError("need at least one polynomial")
    n = fs[0].n
    total = Polynomial(n)
    for f in fs:
        if f.n != n:
            raise ValueError(f"dimension mismatch: {f.n} vs {n}")
        total = total + f * f
    return total


# expression parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.text = text
        self.names = {name: i for i, name in enumerate(names)}
        self.n = len(names)
        self.tokens = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Polynomial:
        result = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return result

    def expr(self) -> Polynomial:
        sign = 1.0
        if self.peek()[1] in "+-" and self.peek()[0] == "op":
            sign = -1.0 if self.take()[1] == "-" else 1.0
        value = self.term()
        if sign < 0:
            value = -value
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> Polynomial:
        value = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            value = value * self.factor()
        return value

    def factor(self) -> Polynomial:
        value = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, text, pos = self.take()
            if kind != "num" or not text.isdigit():
                raise ParseError(f"exponent must be a non-negative integer, found {text or 'end of input'!r}", pos)
            value = value ** int(text)
        return value

    def base(self) -> Polynomial:
        kind, text, pos = self.take()
        if kind == "num":
            return Polynomial.constant(self.n, float(text))
        if kind == "name":
            if text not in self.names:
                raise ParseError(f"unknown variable {text!r}", pos)
            return Polynomial.variable(self.n, self.names[text])
        if kind == "op" and text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"expected number, variable or '(', found {found}", pos)


def parse_expression(text: str, names: Sequence[str]) -> Polynomial:
    """Parse ``text`` over the ordered variable ``names`` into an expanded polynomial.

    Grammar: expr := [sign] term (('+'|'-') term)*; term := factor ('*' factor)*;
    factor := base ('^' uint)?; base := number | var | '(' expr ')'.
    Implicit multiplication is rejected.
    """
    if len(set(names)) != len(names):
        raise ValueError("variable names must be distinct")
    return _Parser(text, list(names)).parse()


def parse_many(texts: Iterable[str], names: Sequence[str]) -> list[Polynomial]:
    return [parse_expression(t, names) for t in texts]
