"""Dual product, free generators of the truncated dual, and the induced isomorphism.

The forest basis is treated as orthonormal, so a dual element is a
``DualComb`` keyed by forests and ``f* . g* = sum_h <D h, f (x) g> h*``.
Generators are picked greedily by degree, tree duals first, to complete the
span of products of smaller generators. Expanding a character in the
resulting monomial basis turns it into a word-indexed path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import forest_hopf as fh
from .branched_rp import AnisotropicRP, BranchedRP, WordSpace, _max_abs, apply_renorm
from .linalg import LinComb, identity, independent_extension, inverse, matmul, rank
from .renorm import RenormMatrix
from .report import CheckReport
from .trees import EMPTY, Forest, Tree, encode, encode_forest, enumerate_forests, forests_of_size
from .word_hopf import EPS, WeightedAlphabet, WordComb, concat, tree_weight

DualComb = LinComb


class BasisMismatchError(ValueError):
    pass


@lru_cache(maxsize=None)
def _structure(N: int, d: int) -> dict:
    """``(f, g) -> [(h, <D h, f (x) g>)]`` for all forests ``|h| <= N``."""
    table: dict = {}
    for h in enumerate_forests(N, d):
        for (f, g), c in fh.coproduct_forest(h).items():
            table.setdefault((f, g), []).append((h, c))
    return table


def star_product(a: DualComb, b: DualComb, N: int, d: int) -> DualComb:
    table = _structure(N, d)
    out = DualComb()
    for f, c in a.items():
        for g, e in b.items():
            for h, m in table.get((f, g), ()):
                out.add_term(h, c * e * m)
    return out


def dual_unit() -> DualComb:
    return DualComb.basis(EMPTY, Fraction(1))


class GeneratorLabel:
    """Letter standing for a generator that is not a single tree dual."""

    __slots__ = ("index", "size", "key")

    def __init__(self, index: int, size: int):
        self.index = index
        self.size = size
        self.key = (size, -1, (index,))

    def __hash__(self):
        return hash(("gen", self.index))

    def __eq__(self, other):
        return isinstance(other, GeneratorLabel) and other.index == self.index

    def __repr__(self):
        return f"g{self.index}"


def _letter_code(a) -> str:
    return encode(a) if isinstance(a, Tree) else repr(a)


@dataclass
class GeneratorBasis:
    N: int
    d: int
    generators: list            # DualComb per generator
    letters: list               # Tree (single tree dual) or GeneratorLabel
    degrees: list
    monomials: dict             # degree -> list of words (tuples of letters)
    forests: dict               # degree -> list of forests
    forward: dict               # degree -> matrix: rows forests, columns monomials
    backward: dict              # degree -> inverse of forward
    flagged: bool = False
    audit: dict = field(default_factory=dict)

    def space(self) -> WordSpace:
        return WordSpace(self.letters, self.N)

    def to_json(self) -> dict:
        def mat(m):
            return [[str(x) for x in row] for row in m]

        return {
            "N": self.N, "d": self.d, "flagged": self.flagged,
            "generators": [
                {"letter": _letter_code(a), "degree": k, "dual": fh.comb_to_json(g)}
                for a, k, g in zip(self.letters, self.degrees, self.generators)
            ],
            "degrees": {
                str(n): {
                    "forests": [encode_forest(f) for f in self.forests[n]],
                    "monomials": [[_letter_code(a) for a in w] for w in self.monomials[n]],
                    "forward": mat(self.forward[n]), "backward": mat(self.backward[n]),
                }
                for n in sorted(self.forward)
            },
            "audit": self.audit,
        }


def _compositions(n: int, parts: Sequence[int]) -> list[tuple]:
    """Index words ``(i1..ik)`` over generators whose degrees sum to ``n``."""
    out = []

    def rec(rem: int, acc: tuple):
        if rem == 0:
            out.append(acc)
            return
        for i, k in enumerate(parts):
            if k <= rem:
                rec(rem - k, acc + (i,))

    rec(n, ())
    return out


def compute_basis(N: int, d: int) -> GeneratorBasis:
    gens: list[DualComb] = []
    degs: list[int] = []
    letters: list = []
    monomials, forests_by, forward, backward = {}, {}, {}, {}
    flagged = False
    audit = {}
    mono_cache: dict[tuple, DualComb] = {(): dual_unit()}

    def mono(word: tuple) -> DualComb:
        if word not in mono_cache:
            mono_cache[word] = star_product(mono(word[:-1]), gens[word[-1]], N, d)
        return mono_cache[word]

    for n in range(1, N + 1):
        basis_f = list(forests_of_size(n, d))
        idx = {f: i for i, f in enumerate(basis_f)}

        def vec(x: DualComb) -> list[Fraction]:
            v = [Fraction(0)] * len(basis_f)
            for f, c in x.items():
                if f.size != n:
                    raise AssertionError("star product must preserve degree")
                v[idx[f]] = Fraction(c)
            return v

        products = [w for w in _compositions(n, degs) if len(w) >= 2]
        current = [vec(mono(w)) for w in products]
        tree_cands = [(f, vec(DualComb.basis(f, 1))) for f in basis_f if len(f) == 1]
        chosen, _ = independent_extension(current, tree_cands, len(basis_f))
        new = [DualComb.basis(f, Fraction(1)) for f in chosen]
        new_letters = [f[0] for f in chosen]
        if rank(current) + len(chosen) < len(basis_f):
            flagged = True
            others = [(f, vec(DualComb.basis(f, 1))) for f in basis_f if len(f) > 1]
            picked = [v for f, v in tree_cands if f in chosen]
            extra, _ = independent_extension(current + picked, others, len(basis_f))
            for f in extra:
                new.append(DualComb.basis(f, Fraction(1)))
                new_letters.append(GeneratorLabel(len(gens) + len(new) - 1, n))
        for g, a in zip(new, new_letters):
            gens.append(g)
            degs.append(n)
            letters.append(a)
        words = _compositions(n, degs)
        cols = [vec(mono(w)) for w in words]
        fwd = [list(r) for r in zip(*cols)] if cols else []
        r = rank(fwd)
        audit[str(n)] = {"forests": len(basis_f), "monomials": len(words), "rank": r}
        if not (len(words) == len(basis_f) == r):
            flagged = True
        monomials[n] = [tuple(letters[i] for i in w) for w in words]
        forests_by[n] = basis_f
        forward[n] = fwd
        backward[n] = inverse(fwd) if r == len(words) == len(basis_f) else None
    audit["total_monomials"] = 1 + sum(v["monomials"] for k, v in audit.items() if k.isdigit())
    audit["total_forests"] = len(enumerate_forests(N, d))
    return GeneratorBasis(N, d, gens, letters, degs, monomials, forests_by, forward, backward, flagged, audit)


def check_basis_audit(B: GeneratorBasis) -> CheckReport:
    """Monomials of each degree are as many as forests, independent, and the stored matrices are inverse."""
    bad = []
    for n in range(1, B.N + 1):
        fwd, bwd = B.forward[n], B.backward[n]
        nf, nm = len(B.forests[n]), len(B.monomials[n])
        if nf != nm or rank(fwd) != nf:
            bad.append({"degree": n, "reason": "monomials are not a basis"})
        elif bwd is None or matmul(fwd, bwd) != identity(nf) or matmul(bwd, fwd) != identity(nf):
            bad.append({"degree": n, "reason": "change-of-basis matrices are not inverse"})
    total = 1 + sum(len(B.monomials[n]) for n in range(1, B.N + 1))
    ok = not bad and total == B.audit["total_forests"]
    return CheckReport(
        "basis_rank_audit", ok,
        detail={"flagged": B.flagged, "total_monomials": total, "total_forests": B.audit["total_forests"]},
        counterexample=bad or None,
    )


def expand(x: DualComb, B: GeneratorBasis) -> WordComb:
    """Write a dual element as a combination of generator monomials (as words)."""
    out = WordComb()
    c0 = x.get(EMPTY, 0)
    if c0:
        out.add_term(EPS, c0)
    for n in range(1, B.N + 1):
        coords = [x.get(f, 0) for f in B.forests[n]]
        if not any(coords):
            continue
        for w, row in zip(B.monomials[n], B.backward[n]):
            out.add_term(w, sum((a * b for a, b in zip(row, coords)), Fraction(0)))
    return out


def unexpand(y: WordComb, B: GeneratorBasis) -> DualComb:
    out = DualComb()
    for w, c in y.items():
        if not w:
            out.add_term(EMPTY, c)
            continue
        n = sum(a.size for a in w)
        j = B.monomials[n].index(w)
        for f, row in zip(B.forests[n], B.forward[n]):
            out.add_term(f, row[j] * c)
    return out


def _forest_arrays(X: BranchedRP, B: GeneratorBasis) -> dict:
    return {f: X.forest_array(f) for n in B.forests for f in B.forests[n]}


def iso_psi(X: BranchedRP, B: GeneratorBasis) -> AnisotropicRP:
    """Expand every ``X_st`` in the monomial basis; monomial coefficients become word values."""
    if X.N < B.N or X.d != B.d:
        raise BasisMismatchError("basis and path truncations differ")
    space = B.space()
    fld = X.field
    vals = [None] * len(space)
    vals[0] = fld.ones((X.n, X.n))
    farr = _forest_arrays(X, B)
    for n in range(1, B.N + 1):
        for w, row in zip(B.monomials[n], B.backward[n]):
            acc = fld.zeros((X.n, X.n))
            for f, c in zip(B.forests[n], row):
                if c:
                    acc = acc + fld.scalar(c) * farr[f]
            vals[space.index[w]] = acc
    alphabet = WeightedAlphabet(space.letters, {a: tree_weight(a, X.gamma) if isinstance(a, Tree) else a.size * X.gamma for a in space.letters})
    return AnisotropicRP(space, alphabet, X.D, fld, vals)


def iso_psi_inverse(Y: AnisotropicRP, B: GeneratorBasis, like: BranchedRP) -> BranchedRP:
    """Forward change of basis: recover tree values from word values."""
    fld = like.field
    vals = {}
    for t in like.trees:
        if t.size > B.N:
            raise BasisMismatchError("path has trees beyond the basis truncation")
        f = Forest((t,))
        n = t.size
        i = B.forests[n].index(f)
        acc = fld.zeros((like.n, like.n))
        for w, c in zip(B.monomials[n], B.forward[n][i]):
            if c:
                acc = acc + fld.scalar(c) * Y.word(w)
        vals[t] = acc
    return like.with_values(vals)


# ----------------------------------------------------------- induced map

class TildeMap:
    """Concatenation-multiplicative word map with generator images ``Psi(M* g)``."""

    def __init__(self, images: Mapping, N: int):
        self.images = {a: WordComb(v) for a, v in images.items()}
        self.N = N

    def word(self, w: tuple) -> WordComb:
        acc = WordComb.basis(EPS, Fraction(1))
        for a in w:
            acc = concat(acc, self.images[a], self.N)
        return acc

    def __call__(self, x: WordComb) -> WordComb:
        out = WordComb()
        for w, c in x.items():
            out.iadd(self.word(w), c)
        return out

    def dropped(self, letter, word) -> TildeMap:
        """Copy with one term removed from one generator image (mutation testing)."""
        imgs = {a: WordComb(v) for a, v in self.images.items()}
        del imgs[letter][word]
        return TildeMap(imgs, self.N)


def adjoint_on_dual(M: RenormMatrix, x: DualComb, N: int) -> DualComb:
    """``M* x`` truncated to forests of size ``<= N``."""
    Ms = M.adjoint()
    out = DualComb()
    for f, c in x.items():
        for g, e in Ms.columns[f].items():
            if g.size <= N:
                out.add_term(g, c * e)
    return out


def tilde_map(M: RenormMatrix, B: GeneratorBasis) -> TildeMap:
    images = {}
    for a, g in zip(B.letters, B.generators):
        images[a] = expand(adjoint_on_dual(M, g, B.N), B)
    return TildeMap(images, B.N)


def check_commute_iso(M: RenormMatrix, X: BranchedRP, B: GeneratorBasis, tilde: TildeMap | None = None) -> CheckReport:
    """Max deviation of ``Psi(M* X)`` from ``tildeM* Psi(X)`` over grid pairs and words."""
    tilde = tilde_map(M, B) if tilde is None else tilde
    lhs = iso_psi(apply_renorm(M, X), B)
    Y = iso_psi(X, B)
    space = Y.space
    fld = X.field
    rhs = [fld.zeros((X.n, X.n)) for _ in space.words]
    for k, u in enumerate(space.words):
        for w, c in tilde.word(u).items():
            rhs[space.index[w]] = rhs[space.index[w]] + fld.scalar(c) * Y.values[k]
    iu = np.triu_indices(X.n)
    worst = 0.0
    witness = None
    for k, w in enumerate(space.words):
        m = _max_abs((lhs.values[k] - rhs[k])[iu])
        if m > worst:
            worst = m
            witness = {"word": [_letter_code(a) for a in w]}
    ok = worst <= fld.tol
    return CheckReport("commute_iso", ok, detail={"max_deviation": worst}, counterexample=None if ok else witness)


def basis_dumps(B: GeneratorBasis) -> str:
    return json.dumps(B.to_json(), sort_keys=True)
