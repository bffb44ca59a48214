"""Exact linear combinations and rational linear algebra."""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Hashable, Iterable, Sequence


class LinComb(dict):
    """Finite linear combination ``key -> coefficient`` in normal form.

    Zero coefficients are never stored, so dict equality is equality of
    vectors. Arithmetic returns new objects; ``add_term`` mutates in place and
    is meant for accumulation loops.
    """

    __slots__ = ()

    @classmethod
    def basis(cls, key: Hashable, coeff=1) -> LinComb:
        out = cls()
        out.add_term(key, coeff)
        return out

    def add_term(self, key, coeff) -> None:
        if not coeff:
            return
        c = self.get(key, 0) + coeff
        if c:
            self[key] = c
        else:
            del self[key]

    def iadd(self, other: LinComb, scale=1) -> LinComb:
        for k, c in other.items():
            self.add_term(k, c * scale)
        return self

    def __add__(self, other: LinComb) -> LinComb:
        return type(self)(self).iadd(other)

    def __sub__(self, other: LinComb) -> LinComb:
        return type(self)(self).iadd(other, -1)

    def __neg__(self) -> LinComb:
        return type(self)({k: -c for k, c in self.items()})

    def scale(self, s) -> LinComb:
        if not s:
            return type(self)()
        return type(self)({k: c * s for k, c in self.items()})

    def __mul__(self, s):
        if isinstance(s, (int, Fraction)):
            return self.scale(s)
        return NotImplemented

    __rmul__ = __mul__

    def map_keys(self, fn: Callable) -> LinComb:
        out = type(self)()
        for k, c in self.items():
            out.add_term(fn(k), c)
        return out

    def coefficient(self, key):
        return self.get(key, 0)

    def __repr__(self):
        return f"{type(self).__name__}({dict.__repr__(self)})"


def linear_extension(fn: Callable[[Hashable], LinComb], x: LinComb, out: LinComb | None = None) -> LinComb:
    """Apply a basis-level map linearly to ``x``."""
    out = LinComb() if out is None else out
    for k, c in x.items():
        out.iadd(fn(k), c)
    return out


def frac(x) -> Fraction:
    """Parse ints, Fractions and ``"p/q"`` strings into a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("refusing to convert a float to an exact rational")
    return Fraction(x)


# --------------------------------------------------------- dense rationals

def identity(n: int) -> list[list[Fraction]]:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def rank(rows: Sequence[Sequence[Fraction]]) -> int:
    """Rank via Gaussian elimination over the rationals."""
    m = [list(map(Fraction, r)) for r in rows]
    if not m:
        return 0
    ncols = len(m[0])
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][col]
        for i in range(r + 1, len(m)):
            if m[i][col]:
                f = m[i][col] / p
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        r += 1
        if r == len(m):
            break
    return r


def inverse(a: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    """Gauss-Jordan inverse of a square rational matrix."""
    n = len(a)
    x = [list(map(Fraction, row)) + e for row, e in zip(a, identity(n))]
    for col in range(n):
        piv = next((i for i in range(col, n) if x[i][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("matrix is singular")
        x[col], x[piv] = x[piv], x[col]
        p = x[col][col]
        x[col] = [v / p for v in x[col]]
        for i in range(n):
            if i != col and x[i][col]:
                f = x[i][col]
                x[i] = [a_ - f * b for a_, b in zip(x[i], x[col])]
    return [row[n:] for row in x]


def matmul(a: Sequence[Sequence[Fraction]], b: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    bt = list(zip(*b))
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt] for row in a]


def independent_extension(
    current: list[list[Fraction]], candidates: Iterable[tuple[Hashable, list[Fraction]]], target_rank: int
) -> tuple[list[Hashable], list[list[Fraction]]]:
    """Greedily pick candidate vectors that raise the rank of ``current``.

    Keeps an echelon form incrementally so each candidate costs one reduction.
    Returns the chosen labels and the echelon rows (useful for diagnostics).
    """
    echelon: list[tuple[int, list[Fraction]]] = []

    def reduce(v: list[Fraction]) -> list[Fraction]:
        v = list(v)
        for piv, row in echelon:
            if v[piv]:
                f = v[piv] / row[piv]
                v = [a - f * b for a, b in zip(v, row)]
        return v

    def push(v: list[Fraction]) -> bool:
        v = reduce(v)
        piv = next((i for i, a in enumerate(v) if a != 0), None)
        if piv is None:
            return False
        echelon.append((piv, v))
        return True

    for v in current:
        push(v)
    chosen = []
    for label, v in candidates:
        if len(echelon) >= target_rank:
            break
        if push(v):
            chosen.append(label)
    return chosen, [row for _, row in echelon]
