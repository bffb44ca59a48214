"""Decorated rooted trees and forests.

Trees carry node decorations in ``{0, ..., d}`` and are kept in canonical form:
children are sorted under a recursive total order, so structural equality is
plain tuple equality of the sort keys. Forests are sorted tuples of trees,
which gives multiset semantics with a hashable normal form.

Text encoding: ``tree := dec "[" tree* "]"``, e.g. ``1[0[] 1[]]``.
"""

from __future__ import annotations

import re
from functools import lru_cache, total_ordering
from typing import Iterable, Iterator

DEFAULT_D = 1
ENUMERATION_CAP = 200_000


class TreeParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class DecorationError(ValueError):
    pass


class ResourceLimitError(RuntimeError):
    pass


@total_ordering
class Tree:
    """Canonical decorated rooted tree.

    ``key`` is ``(size, decoration, child keys)``; comparing keys gives the
    canonical order (node count first, then root decoration, then children
    lexicographically).
    """

    __slots__ = ("dec", "children", "size", "zeros", "key", "_hash")

    def __init__(self, dec: int, children: Iterable[Tree] = ()):
        if dec < 0:
            raise DecorationError(f"negative decoration {dec}")
        kids = tuple(sorted(children))
        self.dec = dec
        self.children = kids
        self.size = 1 + sum(c.size for c in kids)
        self.zeros = (dec == 0) + sum(c.zeros for c in kids)
        self.key = (self.size, dec, tuple(c.key for c in kids))
        self._hash = hash(self.key)

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return self._hash == other._hash and self.key == other.key

    def __lt__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return self.key < other.key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Tree({encode(self)!r})"

    def __setattr__(self, name, value):
        if hasattr(self, "_hash"):
            raise AttributeError("Tree is immutable")
        object.__setattr__(self, name, value)

    @property
    def max_dec(self) -> int:
        return max([self.dec] + [c.max_dec for c in self.children])

    def nodes(self) -> Iterator[Tree]:
        """Pre-order traversal over subtrees rooted at each node."""
        yield self
        for c in self.children:
            yield from c.nodes()


class Forest(tuple):
    """Multiset of trees, stored as a sorted tuple. The empty forest is the unit."""

    __slots__ = ()

    def __new__(cls, trees: Iterable[Tree] = ()):
        return super().__new__(cls, sorted(trees))

    @property
    def size(self) -> int:
        return sum(t.size for t in self)

    @property
    def zeros(self) -> int:
        return sum(t.zeros for t in self)

    def __mul__(self, other: Forest) -> Forest:
        # forest product: multiset union
        return Forest(tuple.__add__(self, other))

    def __repr__(self):
        return f"Forest({encode_forest(self)!r})"


EMPTY = Forest()


def canonical_order(a: Tree, b: Tree) -> int:
    """Three-way comparison under the canonical order: -1, 0 or 1."""
    return (a.key > b.key) - (a.key < b.key)


def node(dec: int) -> Tree:
    return Tree(dec)


def b_plus(f: Iterable[Tree], i: int) -> Tree:
    """Graft the trees of ``f`` onto a new root decorated ``i``."""
    return Tree(i, f)


def b_minus(t: Tree) -> tuple[Forest, int]:
    """Inverse of :func:`b_plus`: the children forest and the root decoration."""
    return Forest(t.children), t.dec


def forest_of(*trees: Tree) -> Forest:
    return Forest(trees)


def canonicalize(t: Tree) -> Tree:
    return Tree(t.dec, (canonicalize(c) for c in t.children))


# ---------------------------------------------------------------- text codec

def encode(t: Tree) -> str:
    return f"{t.dec}[{' '.join(encode(c) for c in t.children)}]"


def encode_forest(f: Iterable[Tree]) -> str:
    return " ".join(encode(t) for t in f)


_WS = re.compile(r"\s*")
_INT = re.compile(r"\d+")


class _Parser:
    def __init__(self, text: str, d: int | None):
        self.text = text
        self.pos = 0
        self.d = d

    def skip(self):
        self.pos = _WS.match(self.text, self.pos).end()

    def tree(self) -> Tree:
        self.skip()
        m = _INT.match(self.text, self.pos)
        if m is None:
            raise TreeParseError("expected decoration", self.pos)
        dec = int(m.group())
        if self.d is not None and dec > self.d:
            raise DecorationError(f"decoration {dec} out of range [0, {self.d}] at byte offset {self.pos}")
        self.pos = m.end()
        self.skip()
        if self.text[self.pos:self.pos + 1] != "[":
            raise TreeParseError("expected '['", self.pos)
        self.pos += 1
        children = []
        while True:
            self.skip()
            if self.pos >= len(self.text):
                raise TreeParseError("unterminated '['", self.pos)
            if self.text[self.pos] == "]":
                self.pos += 1
                break
            children.append(self.tree())
        return Tree(dec, children)


def decode(text: str, d: int | None = None) -> Tree:
    """Parse one tree; whitespace-insensitive. ``d`` bounds the decorations."""
    p = _Parser(text, d)
    t = p.tree()
    p.skip()
    if p.pos != len(text):
        raise TreeParseError("trailing input", p.pos)
    return t


def decode_forest(text: str, d: int | None = None) -> Forest:
    """Parse a whitespace-separated sequence of trees (possibly empty)."""
    p = _Parser(text, d)
    trees = []
    p.skip()
    while p.pos < len(text):
        trees.append(p.tree())
        p.skip()
    return Forest(trees)


# ------------------------------------------------------------- enumeration

@lru_cache(maxsize=None)
def trees_of_size(n: int, d: int) -> tuple[Tree, ...]:
    if n < 1:
        return ()
    out = [Tree(i, f) for f in forests_of_size(n - 1, d) for i in range(d + 1)]
    return tuple(sorted(out))


@lru_cache(maxsize=None)
def forests_of_size(n: int, d: int) -> tuple[Forest, ...]:
    """All forests with exactly ``n`` nodes, in sorted order."""
    if n == 0:
        return (EMPTY,)
    pool = [t for k in range(1, n + 1) for t in trees_of_size(k, d)]
    out: list[Forest] = []

    def rec(start: int, remaining: int, acc: list[Tree]):
        if remaining == 0:
            out.append(Forest(acc))
            return
        for j in range(start, len(pool)):
            t = pool[j]
            if t.size > remaining:
                # pool is sorted by size first
                break
            acc.append(t)
            rec(j, remaining - t.size, acc)
            acc.pop()

    rec(0, n, [])
    return tuple(sorted(out))


def enumerate_trees(n_max: int, d: int = DEFAULT_D, cap: int = ENUMERATION_CAP) -> list[Tree]:
    """All canonical trees with at most ``n_max`` nodes, in canonical order."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    out: list[Tree] = []
    for n in range(1, n_max + 1):
        out.extend(trees_of_size(n, d))
        if len(out) > cap:
            raise ResourceLimitError(f"tree count exceeds cap {cap}")
    return out


def enumerate_forests(n_max: int, d: int = DEFAULT_D, cap: int = ENUMERATION_CAP) -> list[Forest]:
    """All forests with at most ``n_max`` nodes, including the empty forest."""
    out: list[Forest] = []
    for n in range(0, n_max + 1):
        out.extend(forests_of_size(n, d))
        if len(out) > cap:
            raise ResourceLimitError(f"forest count exceeds cap {cap}")
    return out
