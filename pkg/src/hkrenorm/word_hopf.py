"""Shuffle Hopf algebra T(A) over an alphabet of trees.

Words are plain tuples of letters (letters are :class:`~hkrenorm.trees.Tree`
in the Hairer-Kelly setting). ``WordComb`` is a :class:`LinComb` keyed by
words. Truncation is by a grade function on words, by default the total node
count of the letters.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from .linalg import LinComb
from .trees import Tree, decode, encode

Word = tuple
WordComb = LinComb
EPS: Word = ()

ADMISSIBILITY_TOL = 1e-12


def wc(*items) -> WordComb:
    """WordComb from words or ``(coeff, word)`` pairs; a bare letter is a one-letter word."""
    out = WordComb()
    for it in items:
        if isinstance(it, tuple) and len(it) == 2 and not isinstance(it[0], Tree) and isinstance(it[1], (tuple, Tree)):
            c, w = it
        else:
            c, w = 1, it
        if isinstance(w, Tree):
            w = (w,)
        out.add_term(tuple(w), Fraction(c))
    return out


def node_grade(w: Word) -> int:
    return sum(a.size for a in w)


# ------------------------------------------------------------ shuffle etc.

@lru_cache(maxsize=None)
def _shuffle_words(u: Word, v: Word) -> tuple:
    if not u:
        return ((v, 1),)
    if not v:
        return ((u, 1),)
    acc = LinComb()
    for w, c in _shuffle_words(u[1:], v):
        acc.add_term((u[0],) + w, c)
    for w, c in _shuffle_words(u, v[1:]):
        acc.add_term((v[0],) + w, c)
    return tuple(acc.items())


def shuffle_words(u: Word, v: Word) -> WordComb:
    return WordComb(_shuffle_words(tuple(u), tuple(v)))


def shuffle(a: WordComb, b: WordComb) -> WordComb:
    out = WordComb()
    for u, c in a.items():
        for v, e in b.items():
            for w, m in _shuffle_words(u, v):
                out.add_term(w, c * e * m)
    return out


def concat(a: WordComb, b: WordComb, max_grade: int | None = None, grade: Callable[[Word], int] = node_grade) -> WordComb:
    out = WordComb()
    for u, c in a.items():
        for v, e in b.items():
            w = u + v
            if max_grade is not None and grade(w) > max_grade:
                continue
            out.add_term(w, c * e)
    return out


def deconcat_word(w: Word) -> LinComb:
    """``sum_k w[:k] (x) w[k:]`` as a LinComb keyed by word pairs."""
    w = tuple(w)
    out = LinComb()
    for k in range(len(w) + 1):
        out.add_term((w[:k], w[k:]), 1)
    return out


def deconcat(x: WordComb) -> LinComb:
    out = LinComb()
    for w, c in x.items():
        out.iadd(deconcat_word(w), c)
    return out


def tensor_shuffle(a: LinComb, b: LinComb) -> LinComb:
    out = LinComb()
    for (u1, u2), c in a.items():
        for (v1, v2), e in b.items():
            for w1, m1 in _shuffle_words(u1, v1):
                for w2, m2 in _shuffle_words(u2, v2):
                    out.add_term((w1, w2), c * e * m1 * m2)
    return out


def pair(functional: Mapping[Word, object], x: WordComb):
    return sum((c * functional.get(w, 0) for w, c in x.items()), 0)


# ------------------------------------------------------- exp / log (concat)

class PreconditionError(ValueError):
    pass


def concat_exp(x: WordComb, max_grade: int, grade: Callable[[Word], int] = node_grade) -> WordComb:
    """Truncated concatenation exponential; needs a zero constant term."""
    if x.get(EPS, 0):
        raise PreconditionError("exp needs zero coefficient on the empty word")
    out = WordComb.basis(EPS, Fraction(1))
    power = WordComb.basis(EPS, Fraction(1))
    k = 1
    while True:
        power = concat(power, x, max_grade, grade).scale(Fraction(1, k))
        if not power:
            return out
        out.iadd(power)
        k += 1


def concat_log(x: WordComb, max_grade: int, grade: Callable[[Word], int] = node_grade) -> WordComb:
    """Truncated concatenation logarithm; needs constant term 1."""
    if x.get(EPS, 0) != 1:
        raise PreconditionError("log needs coefficient 1 on the empty word")
    y = WordComb(x)
    y.add_term(EPS, -1)
    out = WordComb()
    power = WordComb.basis(EPS, Fraction(1))
    k = 1
    while True:
        power = concat(power, y, max_grade, grade)
        if not power:
            return out
        out.iadd(power, Fraction((-1) ** (k + 1), k))
        k += 1


def deshuffle_word(w: Word) -> LinComb:
    """Unshuffle coproduct: split the positions of ``w`` into two subsequences."""
    out = LinComb()
    n = len(w)
    for mask in range(2 ** n):
        left = tuple(w[k] for k in range(n) if mask >> k & 1)
        right = tuple(w[k] for k in range(n) if not mask >> k & 1)
        out.add_term((left, right), 1)
    return out


def deshuffle(x: WordComb) -> LinComb:
    out = LinComb()
    for w, c in x.items():
        out.iadd(deshuffle_word(w), c)
    return out


def is_grouplike(x: WordComb, max_grade: int, grade: Callable[[Word], int] = node_grade) -> bool:
    """``delta(x) == x (x) x`` for the unshuffle coproduct, up to total grade ``max_grade``.

    Equivalent to the coefficient functional of ``x`` being shuffle-multiplicative.
    """
    lhs = LinComb({k: c for k, c in deshuffle(x).items() if grade(k[0]) + grade(k[1]) <= max_grade})
    rhs = LinComb()
    for u, c in x.items():
        for v, e in x.items():
            if grade(u) + grade(v) <= max_grade:
                rhs.add_term((u, v), c * e)
    return lhs == rhs


def is_shuffle_multiplicative(x: WordComb, max_grade: int, grade: Callable[[Word], int] = node_grade) -> bool:
    """Coefficient functional of ``x`` satisfies ``<x, u sh v> = <x,u><x,v>``."""
    if x.get(EPS, 0) != 1:
        return False
    letters = sorted({a for w in x for a in w}, key=lambda a: getattr(a, "key", a))
    words = list(words_up_to(letters, max_grade, grade))
    for i, u in enumerate(words):
        for v in words[i:]:
            if grade(u) + grade(v) > max_grade:
                continue
            if pair(x, shuffle_words(u, v)) != x.get(u, 0) * x.get(v, 0):
                return False
    return True


def is_primitive(x: WordComb, max_grade: int, grade: Callable[[Word], int] = node_grade) -> bool:
    """``delta(x) = x (x) eps + eps (x) x`` for the unshuffle coproduct (Lie elements)."""
    lhs = LinComb({k: c for k, c in deshuffle(x).items() if grade(k[0]) + grade(k[1]) <= max_grade})
    rhs = LinComb()
    for w, c in x.items():
        rhs.add_term((w, EPS), c)
        rhs.add_term((EPS, w), c)
    return lhs == rhs


def words_up_to(letters: Sequence, max_grade: int, grade: Callable[[Word], int] = node_grade) -> Iterable[Word]:
    """All words over ``letters`` with grade at most ``max_grade``, shortlex by letter order."""
    layer: list[Word] = [EPS]
    yield EPS
    while layer:
        nxt = []
        for w in layer:
            for a in letters:
                v = w + (a,)
                if grade(v) <= max_grade:
                    nxt.append(v)
        yield from nxt
        layer = nxt


# -------------------------------------------------------- weights, alphabet

def tree_weight(t: Tree, gamma: float) -> float:
    """Hoelder exponent attached to a tree: ``g|t|`` or ``(1-g)|t|_0 + g|t|``."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if t.zeros == 0:
        return gamma * t.size
    return (1 - gamma) * t.zeros + gamma * t.size


class UnknownLetterError(KeyError):
    pass


class WeightedAlphabet:
    """Ordered letters with positive exponents ``gamma_a``.

    Letters with exponent >= 1 are accepted (trees carrying 0-decorations have
    exponent >= 1); they are treated as regular directions by
    :func:`lv_admissible`.
    """

    def __init__(self, letters: Iterable[Hashable], gamma: Mapping[Hashable, float]):
        self.letters = list(letters)
        self.gamma = {a: gamma[a] for a in self.letters}
        if any(g <= 0 for g in self.gamma.values()):
            raise ValueError("letter exponents must be positive")
        self.gamma_hat = min(self.gamma.values()) if self.letters else 1.0
        self.index = {a: i for i, a in enumerate(self.letters)}

    @classmethod
    def of_trees(cls, trees: Iterable[Tree], gamma: float) -> WeightedAlphabet:
        trees = list(trees)
        return cls(trees, {t: tree_weight(t, gamma) for t in trees})

    def __contains__(self, a) -> bool:
        return a in self.index

    def __len__(self):
        return len(self.letters)


def weight(v: Word, alphabet: WeightedAlphabet) -> float:
    """``omega(v) = (1/gamma_hat) * sum_a n_a(v) gamma_a``."""
    total = 0.0
    for a in v:
        if a not in alphabet:
            raise UnknownLetterError(a)
        total += alphabet.gamma[a]
    return total / alphabet.gamma_hat


def weight_exact(v: Word, gamma: Mapping[Hashable, Fraction]) -> Fraction:
    """Rational variant of :func:`weight` for exactly specified exponents."""
    ghat = min(gamma.values())
    return sum((Fraction(gamma[a]) for a in v), Fraction(0)) / ghat


def lv_admissible(alphabet: WeightedAlphabet, n_omega: float) -> bool:
    """True iff no combination ``sum n_a gamma_a`` (with ``omega <= n_omega``) equals 1.

    Only rough letters (exponent < 1) are scanned.
    """
    rough = sorted(g for g in alphabet.gamma.values() if g < 1)
    budget = n_omega * alphabet.gamma_hat + ADMISSIBILITY_TOL
    budget = min(budget, 1 + ADMISSIBILITY_TOL)

    def scan(start: int, total: float) -> bool:
        if abs(total - 1) <= ADMISSIBILITY_TOL:
            return False
        for j in range(start, len(rough)):
            nt = total + rough[j]
            if nt > budget:
                break
            if not scan(j, nt):
                return False
        return True

    return scan(0, 0.0)


# ---------------------------------------------------------------- JSON I/O

def word_to_json(w: Word) -> list[str]:
    return [encode(a) for a in w]


def word_from_json(data: Sequence[str], d: int | None = None) -> Word:
    return tuple(decode(s, d) for s in data)


def wordcomb_to_json(x: WordComb) -> list[dict]:
    out = []
    for w in sorted(x, key=lambda w: (len(w), [a.key for a in w])):
        c = Fraction(x[w])
        out.append({"word": word_to_json(w), "num": str(c.numerator), "den": str(c.denominator)})
    return out


def wordcomb_from_json(data: Sequence[dict], d: int | None = None) -> WordComb:
    out = WordComb()
    for item in data:
        out.add_term(word_from_json(item["word"], d), Fraction(int(item["num"]), int(item["den"])))
    return out


def dumps(x: WordComb) -> str:
    return json.dumps(wordcomb_to_json(x))


def shuffle_count(m: int, n: int) -> int:
    return math.comb(m + n, m)
