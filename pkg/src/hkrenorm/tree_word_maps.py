"""Hairer-Kelly map and arborification, forests -> words.

With the trunk on the left of the coproduct, the recursion that yields a Hopf
morphism into the shuffle algebra with deconcatenation reads

    psi(t) = sum_{D t} P(trunk) . psi(pruned),

i.e. the trunk becomes the first letter and the pruned forest is mapped by
psi (shuffle of its trees) and appended. ``P`` is the augmentation projector
(Hairer-Kelly) or the projector onto single-node trees (arborification).
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

from .forest_hopf import _ck_tree, as_comb
from .linalg import LinComb
from .trees import Forest, Tree
from .word_hopf import EPS, WordComb, _shuffle_words


def _hk(t: Tree, keep_letter: Callable[[Tree], bool], memo: Callable[[Tree], tuple]) -> tuple:
    out = WordComb()
    for (trunk, pruned), c in _ck_tree(t):
        if not trunk:
            continue
        letter = trunk[0]
        if len(trunk) != 1:
            raise AssertionError("BCK trunk is never a product forest")
        if not keep_letter(letter):
            continue
        for w, e in _forest_image(pruned, memo).items():
            out.add_term((letter,) + w, c * e)
    return tuple(out.items())


def _forest_image(f: Forest, memo: Callable[[Tree], tuple]) -> WordComb:
    acc = WordComb.basis(EPS, 1)
    for t in f:
        nxt = WordComb()
        for u, c in acc.items():
            for v, e in memo(t):
                for w, m in _shuffle_words(u, v):
                    nxt.add_term(w, c * e * m)
        acc = nxt
    return acc


@lru_cache(maxsize=None)
def _psi_tree(t: Tree) -> tuple:
    return _hk(t, lambda a: True, _psi_tree)


@lru_cache(maxsize=None)
def _arb_tree(t: Tree) -> tuple:
    return _hk(t, lambda a: a.size == 1, _arb_tree)


def psi_tree(t: Tree) -> WordComb:
    return WordComb(_psi_tree(t))


def psi(x) -> WordComb:
    """Hairer-Kelly map, extended multiplicatively (shuffle) and linearly."""
    out = WordComb()
    for f, c in as_comb(x).items():
        out.iadd(_forest_image(f, _psi_tree), c)
    return out


def psi_lower(t: Tree) -> WordComb:
    """``psi(t)`` minus the one-letter word ``t``."""
    out = psi_tree(t)
    out.add_term((t,), -1)
    return out


def arborify(x) -> WordComb:
    out = WordComb()
    for f, c in as_comb(x).items():
        out.iadd(_forest_image(f, _arb_tree), c)
    return out


def words_map(x: LinComb, fn: Callable[[tuple], WordComb]) -> LinComb:
    out = LinComb()
    for w, c in x.items():
        out.iadd(fn(w), c)
    return out
