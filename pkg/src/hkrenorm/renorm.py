"""Renormalisation maps on the forest Hopf algebra.

A map ``M`` is materialised as an exact matrix over the forest basis of
``H_N``: ``columns[f] = M f``. Two constructions are provided, BPHZ maps
``M_v = (v (x) id) D^-`` and local-products maps ``M_R`` built from a rule
table ``R``. Checks return :class:`CheckReport` objects and never raise on a
failing identity.
"""

from __future__ import annotations

import json
import random
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping

from . import forest_hopf as fh
from .forest_hopf import ForestComb, TensorComb, TruncationError, fc
from .report import CheckReport
from .tree_word_maps import psi
from .trees import EMPTY, Forest, Tree, decode, encode, encode_forest, enumerate_forests, enumerate_trees
from .word_hopf import WordComb, concat, tree_weight

WEIGHT_TOL = Fraction(0)


class RuleError(ValueError):
    pass


class UnacceptedMapError(ValueError):
    pass


# ------------------------------------------------------------------ matrix

class RenormMatrix:
    """Linear map on ``H_N`` given by its columns on the forest basis."""

    def __init__(self, N: int, d: int, columns: Mapping[Forest, ForestComb], name: str = "M"):
        self.N = N
        self.d = d
        self.name = name
        self.columns = {f: ForestComb(c) for f, c in columns.items()}
        self._accepted: dict = {}

    @classmethod
    def from_tree_map(cls, N: int, d: int, fn: Callable[[Tree], ForestComb], name: str = "M") -> RenormMatrix:
        """Multiplicative extension of a map given on trees."""
        cols: dict[Forest, ForestComb] = {}
        for f in enumerate_forests(N, d):
            if not f:
                cols[f] = fc(EMPTY)
            elif len(f) == 1:
                cols[f] = fn(f[0])
            else:
                cols[f] = fh.forest_product(cols[Forest(f[:1])], cols[Forest(f[1:])])
        return cls(N, d, cols, name)

    @classmethod
    def identity(cls, N: int, d: int) -> RenormMatrix:
        return cls(N, d, {f: fc(f) for f in enumerate_forests(N, d)}, "id")

    def __call__(self, x) -> ForestComb:
        x = fh.as_comb(x)
        out = ForestComb()
        for f, c in x.items():
            if f not in self.columns:
                raise TruncationError(f"forest {encode_forest(f)!r} outside H_{self.N}")
            out.iadd(self.columns[f], c)
        return out

    def entry(self, row: Forest, col: Forest) -> Fraction:
        return self.columns.get(col, {}).get(row, Fraction(0))

    def adjoint(self) -> RenormMatrix:
        cols: dict[Forest, ForestComb] = {f: ForestComb() for f in self.columns}
        for g, col in self.columns.items():
            for f, c in col.items():
                cols.setdefault(f, ForestComb()).add_term(g, c)
        return RenormMatrix(self.N, self.d, cols, f"{self.name}*")

    def perturbed(self, col: Forest, row: Forest, delta) -> RenormMatrix:
        cols = dict(self.columns)
        c = ForestComb(cols[col])
        c.add_term(row, Fraction(delta))
        cols[col] = c
        return RenormMatrix(self.N, self.d, cols, f"{self.name}~")

    def __eq__(self, other):
        if not isinstance(other, RenormMatrix):
            return NotImplemented
        return self.N == other.N and self.columns == other.columns

    def tree_image(self, t: Tree) -> ForestComb:
        return self.columns[Forest((t,))]

    def to_json(self) -> dict:
        return {
            "N": self.N, "d": self.d, "name": self.name,
            "columns": [
                {"forest": [encode(t) for t in f], "image": fh.comb_to_json(self.columns[f])}
                for f in sorted(self.columns)
            ],
        }

    def accepted(self, gamma) -> bool:
        key = Fraction(gamma) if not isinstance(gamma, float) else gamma
        if key not in self._accepted:
            ok = check_cointeraction(self, self.N).passed and check_analytic_condition(self, gamma).passed
            self._accepted[key] = ok
        return self._accepted[key]

    def __repr__(self):
        return f"RenormMatrix({self.name}, N={self.N}, {len(self.columns)} columns)"


def translation_coeffs(M: RenormMatrix, t: Tree) -> list[tuple[Tree, Fraction]]:
    """Nonzero ``C(t, t1) = <M t1, t>`` over trees ``t1``."""
    target = Forest((t,))
    out = []
    for f in sorted(M.columns):
        if len(f) == 1:
            c = M.columns[f].get(target, 0)
            if c:
                out.append((f[0], c))
    return out


# ---------------------------------------------------------------- BPHZ

class BphzCharacter:
    """Character ``v`` on forests, given on 0-free trees and vanishing on trees with a 0."""

    def __init__(self, values: Mapping[Tree, object]):
        vals = {}
        for t, c in values.items():
            c = Fraction(c)
            if t.zeros and c:
                raise RuleError(f"BPHZ character must vanish on {encode(t)} (contains decoration 0)")
            if c:
                vals[t] = c
        self.values = vals

    def __call__(self, f) -> Fraction:
        if isinstance(f, Tree):
            f = Forest((f,))
        out = Fraction(1)
        for t in f:
            out *= self.values.get(t, Fraction(0))
            if not out:
                break
        return out

    @classmethod
    def random(cls, N: int, d: int, rng: random.Random) -> BphzCharacter:
        vals = {}
        for t in enumerate_trees(N, d):
            if not t.zeros:
                vals[t] = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
        return cls(vals)

    def to_json(self) -> dict:
        return {encode(t): str(c) for t, c in sorted(self.values.items())}

    @classmethod
    def from_json(cls, data: Mapping[str, str], d: int | None = None) -> BphzCharacter:
        return cls({decode(k, d): Fraction(v) for k, v in data.items()})


def bphz_map(v: BphzCharacter, N: int, d: int) -> RenormMatrix:
    """``M_v = (v (x) id) D^-`` on ``H_N``."""

    def image(t: Tree) -> ForestComb:
        out = ForestComb()
        for (ext, contracted), c in fh.extraction_tree(t).items():
            val = v(ext)
            if val:
                out.add_term(contracted, c * val)
        return out

    return RenormMatrix.from_tree_map(N, d, image, "M_v")


# --------------------------------------------------------- local products

class LocalRule:
    """Finite table ``t -> R t`` on trees; trees not listed map to themselves."""

    def __init__(self, table: Mapping[Tree, ForestComb], gamma, mode: str = "strict"):
        self.table = {t: ForestComb(c) for t, c in table.items()}
        self.gamma = gamma
        self.mode = mode
        self.validate()

    def image(self, t: Tree) -> ForestComb:
        return self.table.get(t) or fc(t)

    def validate(self) -> None:
        """Structural condition: ``R t = t + sum l_i t_i`` with smaller, more regular ``t_i``."""
        for t, img in self.table.items():
            if img.get(Forest((t,)), 0) != 1:
                raise RuleError(f"R({encode(t)}) must contain {encode(t)} with coefficient 1")
            wt = tree_weight(t, self.gamma)
            for f in img:
                if len(f) != 1:
                    raise RuleError(f"R({encode(t)}) contains the non-tree forest {encode_forest(f)!r}")
                s = f[0]
                if s == t:
                    continue
                if self.mode == "strict":
                    smaller = s.size < t.size
                else:
                    smaller = s.size < t.size or (s.size == t.size and s.zeros > t.zeros)
                if not smaller:
                    raise RuleError(f"R({encode(t)}) term {encode(s)} does not reduce the tree")
                if tree_weight(s, self.gamma) < wt - WEIGHT_TOL:
                    raise RuleError(f"R({encode(t)}) term {encode(s)} is less regular")

    def extend(self, x) -> ForestComb:
        """``R`` extended by ``R 1 = 1`` and multiplicatively to forests."""
        out = ForestComb()
        for f, c in fh.as_comb(x).items():
            acc = fc(EMPTY)
            for t in f:
                acc = fh.forest_product(acc, self.image(t))
            out.iadd(acc, c)
        return out

    def to_json(self) -> dict:
        return {encode(t): fh.comb_to_json(c) for t, c in sorted(self.table.items())}

    @classmethod
    def from_json(cls, data: Mapping[str, list], gamma, mode: str = "strict", d: int | None = None) -> LocalRule:
        return cls({decode(k, d): fh.comb_from_json(v, d) for k, v in data.items()}, gamma, mode)


def local_map(R: LocalRule, N: int, d: int) -> tuple[RenormMatrix, RenormMatrix]:
    """``(M, M°)`` from ``M 1 = 1``, multiplicativity, ``M° B+_i(f) = B+_i(M f)``, ``M = M° R`` on trees."""

    @lru_cache(maxsize=None)
    def m_tree(t: Tree) -> tuple:
        out = ForestComb()
        for f, c in R.image(t).items():
            out.iadd(ForestComb(mcirc_tree(f[0])), c)
        return tuple(out.items())

    @lru_cache(maxsize=None)
    def mcirc_tree(t: Tree) -> tuple:
        out = ForestComb()
        for g, c in m_forest(Forest(t.children)).items():
            out.add_term(Forest((Tree(t.dec, g),)), c)
        return tuple(out.items())

    def m_forest(f: Forest) -> ForestComb:
        acc = fc(EMPTY)
        for t in f:
            acc = fh.forest_product(acc, ForestComb(m_tree(t)))
        return acc

    M = RenormMatrix.from_tree_map(N, d, lambda t: ForestComb(m_tree(t)), "M_R")
    Mc = RenormMatrix.from_tree_map(N, d, lambda t: ForestComb(mcirc_tree(t)), "M°_R")
    return M, Mc


def root_extraction_rule(v: BphzCharacter, N: int, d: int, gamma) -> LocalRule:
    """Local rule reproducing ``M_v``: extract subtrees through the root only."""
    table = {}
    for t in enumerate_trees(N, d):
        img = fc(t)
        for (sigma, others, hanging), m in fh._ext_root(t):
            if others:
                continue
            val = v(sigma)
            if val:
                img.add_term(Forest((Tree(0, hanging),)), m * val)
        if img != fc(t):
            table[t] = img
    return LocalRule(table, gamma, mode="loose")


# --------------------------------------------------------------- checks

def _apply_left_right(x: TensorComb, left, right) -> TensorComb:
    return fh.tensor_map(x, left, right)


def check_cointeraction(
    M: RenormMatrix, n_max: int, Mcirc: RenormMatrix | None = None, d: int | None = None
) -> CheckReport:
    """``(M (x) M) D = D M`` on trees ``|t| <= n_max``; with ``Mcirc`` also the local-map identities."""
    d = M.d if d is None else d
    identities = [("(M x M) D = D M", M, M, M)]
    if Mcirc is not None:
        identities += [("D M = (M x M°) D", M, M, Mcirc), ("D M° = (M° x M°) D", Mcirc, Mcirc, Mcirc)]
    results = {}
    failures = {}
    for label, target, left, right in identities:
        ok = True
        for t in enumerate_trees(n_max, d):
            lhs = fh.coproduct_ck(target(fc(t)))
            rhs = _apply_left_right(fh.coproduct_tree(t), left, right)
            if lhs != rhs:
                ok = False
                failures[label] = {"identity": label, "tree": encode(t), "difference": fh.tensor_to_json(lhs - rhs)}
                break
        results[label] = ok
    detail = {"n_max": n_max, "identities": results}
    if failures:
        detail["failures"] = failures
    return CheckReport(
        f"cointeraction[{M.name}]", all(results.values()),
        detail=detail, counterexample=next(iter(failures.values()), None),
    )


def check_multiplicative(M: RenormMatrix) -> CheckReport:
    for f, col in M.columns.items():
        if not f:
            if col != fc(EMPTY):
                return CheckReport("multiplicative", False, counterexample={"forest": "", "reason": "M1 != 1"})
            continue
        expect = fc(EMPTY)
        for t in f:
            expect = fh.forest_product(expect, M.columns[Forest((t,))])
        if col != expect:
            return CheckReport("multiplicative", False, counterexample={"forest": encode_forest(f)})
    return CheckReport("multiplicative", True)


def check_analytic_condition(M: RenormMatrix, gamma, n_max: int | None = None) -> CheckReport:
    """Every tree maps to trees that are no larger and at least as regular."""
    n_max = M.N if n_max is None else n_max
    witnesses = []
    for t in enumerate_trees(n_max, M.d):
        wt = tree_weight(t, gamma)
        for f, c in M.tree_image(t).items():
            if len(f) != 1:
                witnesses.append({"tree": encode(t), "term": encode_forest(f), "reason": "not a tree"})
                continue
            s = f[0]
            if s.size > t.size:
                witnesses.append({"tree": encode(t), "term": encode(s), "reason": "node count grows"})
            elif tree_weight(s, gamma) < wt - WEIGHT_TOL:
                witnesses.append({"tree": encode(t), "term": encode(s), "reason": "less regular"})
    return CheckReport(
        f"analytic[{M.name}]", not witnesses, detail={"gamma": str(gamma)},
        counterexample=witnesses[:10] or None,
    )


def check_admissible(R: LocalRule, n_max: int, d: int) -> CheckReport:
    """Test ``(R (x) id) D = D R`` under both slot readings; records which (if any) holds."""
    readings = {"R on left slot": (R.extend, None), "R on right slot": (None, R.extend)}
    results = {}
    witness = {}
    for label, (left, right) in readings.items():
        ok = True
        for t in enumerate_trees(n_max, d):
            lhs = fh.tensor_map(fh.coproduct_tree(t), left, right)
            rhs = fh.coproduct_ck(R.image(t))
            if lhs != rhs:
                ok = False
                witness[label] = {"tree": encode(t), "difference": fh.tensor_to_json(rhs - lhs)}
                break
        results[label] = ok
    return CheckReport("admissible", any(results.values()), detail={"readings": results}, counterexample=witness or None)


# ------------------------------------------------------- word-level map

class BarMap:
    """Concatenation-multiplicative map on words with ``letter t -> M t``."""

    def __init__(self, M: RenormMatrix):
        self.M = M
        self.letters: dict[Tree, WordComb] = {}
        for f, col in M.columns.items():
            if len(f) != 1:
                continue
            img = WordComb()
            for g, c in col.items():
                if len(g) != 1:
                    raise UnacceptedMapError(
                        f"M({encode(f[0])}) contains the non-tree forest {encode_forest(g)!r}"
                    )
                img.add_term((g[0],), c)
            self.letters[f[0]] = img

    def word(self, w: tuple) -> WordComb:
        acc = WordComb.basis((), Fraction(1))
        for a in w:
            acc = concat(acc, self.letters[a])
        return acc

    def __call__(self, x: WordComb) -> WordComb:
        out = WordComb()
        for w, c in x.items():
            out.iadd(self.word(w), c)
        return out


def bar_map(M: RenormMatrix, gamma=None) -> BarMap:
    if gamma is not None and not M.accepted(gamma):
        raise UnacceptedMapError(f"{M.name} fails cointeraction or the analytic condition")
    return BarMap(M)


def check_hk_square(M: RenormMatrix, n_max: int) -> CheckReport:
    """``psi(M t) = Mbar psi(t)`` exactly on trees ``|t| <= n_max``."""
    Mbar = BarMap(M)
    for t in enumerate_trees(n_max, M.d):
        lhs = psi(M(fc(t)))
        rhs = Mbar(psi(fc(t)))
        if lhs != rhs:
            return CheckReport(f"hk_square[{M.name}]", False, counterexample={"tree": encode(t)})
    return CheckReport(f"hk_square[{M.name}]", True, detail={"n_max": n_max})


def load_character_file(path: str, d: int | None = None) -> BphzCharacter:
    with open(path) as fh_:
        return BphzCharacter.from_json(json.load(fh_), d)


def load_rule_file(path: str, gamma, mode: str = "strict", d: int | None = None) -> LocalRule:
    with open(path) as fh_:
        return LocalRule.from_json(json.load(fh_), gamma, mode, d)


def compose(A: RenormMatrix, B: RenormMatrix) -> RenormMatrix:
    """``A o B``; renormalising by ``A`` then by ``B`` equals renormalising by ``A o B``."""
    return RenormMatrix(A.N, A.d, {f: A(col) for f, col in B.columns.items()}, f"{A.name}.{B.name}")
