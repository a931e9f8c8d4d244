"""Boxes and polynomial systems shared by the enclosure, relaxation and oracle code."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .poly import Polynomial


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by lower and upper corners."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower and upper corners must have the same positive length")
        for j, (a, b) in enumerate(zip(lo, hi)):
            if not (a <= b):
                raise ValueError(f"interval {j} is inverted: [{a}, {b}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_intervals(cls, intervals: Sequence[Sequence[float]]) -> "Box":
        return cls(tuple(iv[0] for iv in intervals), tuple(iv[1] for iv in intervals))

    @classmethod
    def cube(cls, n: int, lo: float, hi: float) -> "Box":
        return cls((lo,) * n, (hi,) * n)

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.lo, self.hi))

    @property
    def widths(self) -> np.ndarray:
        return np.array(self.hi) - np.array(self.lo)

    @property
    def longest_side(self) -> float:
        return float(self.widths.max())

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.array(self.lo) + np.array(self.hi))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    def contains(self, p: Sequence[float], inflation: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= np.array(self.lo) - inflation) and np.all(p <= np.array(self.hi) + inflation))

    def contains_box(self, other: "Box", tol: float = 0.0) -> bool:
        return all(a - tol <= c and d <= b + tol for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def with_interval(self, j: int, lo: float, hi: float) -> "Box":
        new_lo = list(self.lo)
        new_hi = list(self.hi)
        new_lo[j], new_hi[j] = lo, hi
        return Box(tuple(new_lo), tuple(new_hi))

    def drop(self, j: int) -> "Box":
        return Box(self.lo[:j] + self.lo[j + 1 :], self.hi[:j] + self.hi[j + 1 :])

    def insert(self, j: int, lo: float, hi: float) -> "Box":
        return Box(self.lo[:j] + (lo,) + self.lo[j:], self.hi[:j] + (hi,) + self.hi[j:])

    def key(self) -> tuple:
        return tuple(self.lo) + tuple(self.hi)

    def to_list(self) -> list[list[float]]:
        return [[a, b] for a, b in zip(self.lo, self.hi)]


@dataclass(frozen=True)
class SemialgebraicSystem:
    """Equalities h_j = 0 and inequalities f_j >= 0 in n variables."""

    n: int
    equalities: tuple[Polynomial, ...] = ()
    inequalities: tuple[Polynomial, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "equalities", tuple(self.equalities))
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        for p in self.equalities + self.inequalities:
            if p.n != self.n:
                raise ValueError(f"polynomial in {p.n} variables does not match system dimension {self.n}")

    @property
    def k(self) -> int:
        return len(self.equalities)

    @property
    def m(self) -> int:
        return len(self.inequalities)

    @property
    def degree(self) -> int:
        return max((p.degree for p in self.equalities + self.inequalities), default=0)

    def residual(self, x: Sequence[float]) -> float:
        return max((abs(h.evaluate(x)) for h in self.equalities), default=0.0)

    def is_feasible(self, x: Sequence[float], eq_tol: float = 1e-8, ineq_tol: float = 1e-9) -> bool:
        return self.residual(x) <= eq_tol and all(f.evaluate(x) >= -ineq_tol for f in self.inequalities)

    def substitute(self, i: int, value: float) -> "SemialgebraicSystem":
        return SemialgebraicSystem(
            self.n - 1,
            tuple(h.substitute(i, value) for h in self.equalities),
            tuple(f.substitute(i, value) for f in self.inequalities),
        )

    def with_equalities(self, extra: Sequence[Polynomial]) -> "SemialgebraicSystem":
        return SemialgebraicSystem(self.n, self.equalities + tuple(extra), self.inequalities)
