"""The Butcher-Connes-Kreimer Hopf algebra of decorated forests.

Conventions
-----------
* Coproduct: ``D(t) = 1 (x) t + (B+_i (x) id) D(t_1 ... t_n)``. The factor that
  contains the root (the trunk) sits on the LEFT, the pruned branches on the
  right.
* Extraction/contraction: ``D^-(t) = sum F (x) t/F`` over families ``F`` of
  node-disjoint subtrees (connected node sets, single nodes allowed). Each
  extracted subtree is contracted to one node decorated 0. Extracted forest on
  the left, contracted tree on the right.

Everything at the ``LinComb`` level is exact (``Fraction`` coefficients) and
never truncated; characters live on a truncated basis.
"""

from __future__ import annotations

import json
import random
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, product
from typing import Callable, Iterable, Mapping

from .linalg import LinComb
from .report import CheckReport
from .trees import EMPTY, Forest, Tree, decode, encode, encode_forest, enumerate_forests, enumerate_trees

ForestComb = LinComb
TensorComb = LinComb


def fc(*items) -> ForestComb:
    """Build a ForestComb from trees, forests, or ``(coeff, tree|forest)`` pairs."""
    out = ForestComb()
    for it in items:
        if isinstance(it, tuple) and not isinstance(it, Forest):
            c, x = it
        else:
            c, x = 1, it
        out.add_term(Forest((x,)) if isinstance(x, Tree) else x, Fraction(c))
    return out


ONE = fc(EMPTY)


def as_comb(x) -> ForestComb:
    if isinstance(x, LinComb):
        return x
    return fc(x)


# ------------------------------------------------------------------ product

def forest_product(a: ForestComb, b: ForestComb) -> ForestComb:
    out = ForestComb()
    for f, c in a.items():
        for g, e in b.items():
            out.add_term(f * g, c * e)
    return out


def tensor_product(a: TensorComb, b: TensorComb) -> TensorComb:
    """Slotwise forest product of two tensors of equal arity."""
    out = TensorComb()
    for k1, c1 in a.items():
        for k2, c2 in b.items():
            out.add_term(tuple(x * y for x, y in zip(k1, k2)), c1 * c2)
    return out


def tensor_map(x: TensorComb, *maps: Callable[[Forest], ForestComb]) -> TensorComb:
    """Apply one linear map per slot (``None`` leaves the slot alone)."""
    out = TensorComb()
    for key, c in x.items():
        parts = [fn(f) if fn is not None else ForestComb.basis(f) for f, fn in zip(key, maps)]
        for combo in product(*(p.items() for p in parts)):
            coeff = c
            for _, e in combo:
                coeff *= e
            out.add_term(tuple(k for k, _ in combo), coeff)
    return out


# ---------------------------------------------------------- BCK coproduct

@lru_cache(maxsize=None)
def _ck_tree(t: Tree) -> tuple:
    acc = _ck_forest(Forest(t.children))
    out = TensorComb()
    out.add_term((EMPTY, Forest((t,))), 1)
    for (left, right), c in acc.items():
        out.add_term((Forest((Tree(t.dec, left),)), right), c)
    return tuple(out.items())


@lru_cache(maxsize=None)
def _ck_forest(f: Forest) -> TensorComb:
    out = TensorComb.basis((EMPTY, EMPTY))
    for t in f:
        out = tensor_product(out, TensorComb(_ck_tree(t)))
    return out


def coproduct_tree(t: Tree) -> TensorComb:
    return TensorComb(_ck_tree(t))


def coproduct_forest(f: Forest) -> TensorComb:
    return TensorComb(_ck_forest(f))


def coproduct_ck(x) -> TensorComb:
    """BCK coproduct, extended multiplicatively and linearly."""
    out = TensorComb()
    for f, c in as_comb(x).items():
        out.iadd(_ck_forest(f), c)
    return out


# admissible-cut oracle ----------------------------------------------------

def _label(t: Tree) -> tuple[list[int], list[int]]:
    """Flatten to (decorations, parent index) with node 0 the root."""
    decs: list[int] = []
    parents: list[int] = []

    def walk(s: Tree, parent: int):
        idx = len(decs)
        decs.append(s.dec)
        parents.append(parent)
        for c in s.children:
            walk(c, idx)

    walk(t, -1)
    return decs, parents


def _build(decs: Mapping[int, int], parents: Mapping[int, int], root: int) -> Tree:
    kids: dict[int, list[int]] = {}
    for v, p in parents.items():
        if v != root and v in decs and p in decs:
            kids.setdefault(p, []).append(v)

    def mk(v: int) -> Tree:
        return Tree(decs[v], [mk(c) for c in kids.get(v, [])])

    return mk(root)


def coproduct_by_cuts(t: Tree) -> TensorComb:
    """Independent oracle: enumerate admissible edge cuts directly."""
    decs, parents = _label(t)
    n = len(decs)
    edges = list(range(1, n))  # edge identified by its child node

    def ancestors(v: int) -> set[int]:
        out = set()
        while parents[v] != -1:
            v = parents[v]
            out.add(v)
        return out

    anc = [ancestors(v) for v in range(n)]
    out = TensorComb()
    out.add_term((EMPTY, Forest((t,))), 1)
    for r in range(0, n):
        for cut in combinations(edges, r):
            if any(a in anc[b] for a in cut for b in cut if a != b):
                continue
            below = {v for v in range(n) if v in cut or anc[v] & set(cut)}
            trunk_nodes = {v: decs[v] for v in range(n) if v not in below}
            pruned = []
            for c in cut:
                sub = {v: decs[v] for v in range(n) if v == c or c in anc[v]}
                pruned.append(_build(sub, dict(enumerate(parents)), c))
            trunk = _build(trunk_nodes, dict(enumerate(parents)), 0)
            out.add_term((Forest((trunk,)), Forest(pruned)), 1)
    return out


# ---------------------------------------------------------------- antipode

@lru_cache(maxsize=None)
def _antipode_tree(t: Tree) -> tuple:
    out = ForestComb()
    for (trunk, pruned), c in _ck_tree(t):
        if trunk == Forest((t,)):
            continue
        # m(A (x) id) D t = 0 for |t| >= 1
        out.iadd(forest_product(antipode(ForestComb.basis(trunk)), ForestComb.basis(pruned)), -c)
    return tuple(out.items())


def _antipode_forest(f: Forest) -> ForestComb:
    out = ONE
    for t in f:
        out = forest_product(out, ForestComb(_antipode_tree(t)))
    return out


def antipode(x) -> ForestComb:
    out = ForestComb()
    for f, c in as_comb(x).items():
        out.iadd(_antipode_forest(f), c)
    return out


def mult(x: TensorComb) -> ForestComb:
    out = ForestComb()
    for (a, b), c in x.items():
        out.add_term(a * b, c)
    return out


def counit(x) -> Fraction:
    return as_comb(x).get(EMPTY, Fraction(0))


# ------------------------------------------------------------- characters

class TruncationError(ValueError):
    pass


class Character:
    """Multiplicative functional on the truncated forest algebra H_N.

    Stored by its values on trees (the free commutative generators); the value
    on a forest is the product, so multiplicativity holds by construction.
    """

    __slots__ = ("N", "tree_values")

    def __init__(self, N: int, tree_values: Mapping[Tree, object]):
        self.N = N
        self.tree_values = dict(tree_values)

    def __call__(self, f) -> object:
        if isinstance(f, Tree):
            f = Forest((f,))
        if f.size > self.N:
            raise TruncationError(f"forest of size {f.size} beyond truncation {self.N}")
        v = 1
        for t in f:
            v = v * self.tree_values.get(t, 0)
        return v

    def pair(self, x: ForestComb):
        return sum((c * self(f) for f, c in x.items() if f.size <= self.N), 0)

    @classmethod
    def counit(cls, N: int) -> Character:
        return cls(N, {})

    @classmethod
    def random(cls, N: int, d: int, rng: random.Random, denominators: int = 7) -> Character:
        vals = {t: Fraction(rng.randint(-9, 9), rng.randint(1, denominators)) for t in enumerate_trees(N, d)}
        return cls(N, vals)

    def __eq__(self, other):
        if not isinstance(other, Character) or other.N != self.N:
            return NotImplemented
        keys = set(self.tree_values) | set(other.tree_values)
        return all(self.tree_values.get(k, 0) == other.tree_values.get(k, 0) for k in keys)

    def __repr__(self):
        return f"Character(N={self.N}, {len(self.tree_values)} tree values)"


def convolve(X: Character, Y: Character) -> Character:
    """``(X * Y)(f) = (X (x) Y)(D f)``."""
    if X.N != Y.N:
        raise TruncationError(f"truncation mismatch {X.N} != {Y.N}")
    trees = set(X.tree_values) | set(Y.tree_values)
    vals = {}
    for t in trees:
        vals[t] = sum((c * X(a) * Y(b) for (a, b), c in _ck_tree(t)), 0)
    return Character(X.N, vals)


def compose_linear(X: Character, fn: Callable[[Tree], ForestComb], trees: Iterable[Tree]) -> Character:
    """Character ``X o fn`` for an algebra morphism ``fn`` given on trees."""
    return Character(X.N, {t: X.pair(fn(t)) for t in trees})


def inverse(X: Character, d: int) -> Character:
    return compose_linear(X, lambda t: antipode(fc(t)), enumerate_trees(X.N, d))


# ------------------------------------------------------ extraction coproduct

@lru_cache(maxsize=None)
def _ext_root(t: Tree) -> tuple:
    """Extractions whose family contains a subtree through the root.

    Yields ``((sigma, other_extracted, hanging), multiplicity)`` where ``sigma``
    is the root subtree, ``other_extracted`` the rest of the family and
    ``hanging`` the already-contracted branches attached to ``sigma``.
    """
    options_per_child = []
    for c in t.children:
        opts = []
        for (F, T), m in _ext_tree(c):
            opts.append(((), F, (T,), m))
        for (sig, F, H), m in _ext_root(c):
            opts.append(((sig,), F, H, m))
        options_per_child.append(opts)
    acc = LinComb()
    for combo in product(*options_per_child):
        kids: list[Tree] = []
        ext: list[Tree] = []
        hang: list[Tree] = []
        m = 1
        for k, F, H, mm in combo:
            kids.extend(k)
            ext.extend(F)
            hang.extend(H)
            m *= mm
        acc.add_term((Tree(t.dec, kids), Forest(ext), Forest(hang)), m)
    return tuple(acc.items())


@lru_cache(maxsize=None)
def _ext_tree(t: Tree) -> tuple:
    acc = LinComb()
    # root not extracted
    per_child = [_ext_tree(c) for c in t.children]
    for combo in product(*per_child):
        ext: list[Tree] = []
        kids: list[Tree] = []
        m = 1
        for (F, T), mm in combo:
            ext.extend(F)
            kids.append(T)
            m *= mm
        acc.add_term((Forest(ext), Tree(t.dec, kids)), m)
    # root inside an extracted subtree, contracted to a 0-node
    for (sig, F, H), m in _ext_root(t):
        acc.add_term((Forest((sig,)) * F, Tree(0, H)), m)
    return tuple(acc.items())


def extraction_tree(t: Tree) -> TensorComb:
    out = TensorComb()
    for (F, T), m in _ext_tree(t):
        out.add_term((F, Forest((T,))), Fraction(m))
    return out


def extraction_forest(f: Forest) -> TensorComb:
    out = TensorComb.basis((EMPTY, EMPTY))
    for t in f:
        out = tensor_product(out, extraction_tree(t))
    return out


def coproduct_extraction(x) -> TensorComb:
    out = TensorComb()
    for f, c in as_comb(x).items():
        out.iadd(extraction_forest(f), c)
    return out


def extraction_by_enumeration(t: Tree) -> TensorComb:
    """Independent oracle for D^- on a tree: brute force over node sets."""
    decs, parents = _label(t)
    n = len(decs)
    nodes = range(n)
    connected = []
    for r in range(1, n + 1):
        for S in combinations(nodes, r):
            s = set(S)
            tops = [v for v in S if parents[v] not in s]
            if len(tops) == 1:
                connected.append((frozenset(S), tops[0]))
    out = TensorComb()

    def families(start: int, used: frozenset, acc: list):
        yield list(acc)
        for j in range(start, len(connected)):
            S, top = connected[j]
            if S & used:
                continue
            acc.append((S, top))
            yield from families(j + 1, used | S, acc)
            acc.pop()

    par = dict(enumerate(parents))
    for fam in families(0, frozenset(), []):
        extracted = [_build({v: decs[v] for v in S}, par, top) for S, top in fam]
        block = {}
        for k, (S, top) in enumerate(fam):
            for v in S:
                block[v] = ("b", k)
        rep = {v: block.get(v, ("v", v)) for v in nodes}
        qdecs = {}
        qpar = {}
        for v in nodes:
            r_ = rep[v]
            qdecs[r_] = 0 if r_[0] == "b" else decs[v]
            p = parents[v]
            if p != -1 and rep[p] != r_:
                qpar[r_] = rep[p]
        root = rep[0]
        qpar.setdefault(root, None)
        contracted = _build(qdecs, qpar, root)
        out.add_term((Forest(extracted), Forest((contracted,))), 1)
    return out


def check_cointeract_13_2_4(
    n_max: int, d: int = 1, extraction: Callable[[Forest], TensorComb] | None = None
) -> CheckReport:
    """Exact check of ``M^(13)(2)(4) (D^- (x) D^-) D = (id (x) D) D^-`` on trees."""
    ext = extraction or extraction_forest

    def ext_comb(f: Forest) -> TensorComb:
        return ext(f)

    for t in enumerate_trees(n_max, d):
        lhs = TensorComb()
        for (a, b), c in coproduct_tree(t).items():
            for (a1, a2), c1 in ext_comb(a).items():
                for (b1, b2), c2 in ext_comb(b).items():
                    lhs.add_term((a1 * b1, a2, b2), c * c1 * c2)
        rhs = TensorComb()
        for (e, r), c in ext_comb(Forest((t,))).items():
            for (r1, r2), c2 in coproduct_forest(r).items():
                rhs.add_term((e, r1, r2), c * c2)
        if lhs != rhs:
            return CheckReport(
                "cointeract_13_2_4", False,
                counterexample={"tree": encode(t), "lhs": tensor_to_json(lhs), "rhs": tensor_to_json(rhs)},
            )
    return CheckReport("cointeract_13_2_4", True, detail={"n_max": n_max, "d": d})


# ---------------------------------------------------------------------- JSON

def _ratio(c) -> tuple[str, str]:
    c = Fraction(c)
    return str(c.numerator), str(c.denominator)


def comb_to_json(x: ForestComb) -> list[dict]:
    out = []
    for f in sorted(x):
        num, den = _ratio(x[f])
        out.append({"forest": [encode(t) for t in f], "num": num, "den": den})
    return out


def comb_from_json(data: list[dict], d: int | None = None) -> ForestComb:
    out = ForestComb()
    for item in data:
        f = Forest(decode(s, d) for s in item["forest"])
        out.add_term(f, Fraction(int(item["num"]), int(item["den"])))
    return out


def tensor_to_json(x: TensorComb) -> list[dict]:
    out = []
    for key in sorted(x):
        num, den = _ratio(x[key])
        out.append({"tensor": [[encode(t) for t in f] for f in key], "num": num, "den": den})
    return out


def dumps(x: ForestComb) -> str:
    return json.dumps(comb_to_json(x))


def loads(s: str) -> ForestComb:
    return comb_from_json(json.loads(s))



# -------------------------------------------------------------- axiom checks

def check_coassociativity(n_max: int, d: int = 1, coproduct: Callable[[Forest], TensorComb] | None = None) -> CheckReport:
    """``(D (x) id) D = (id (x) D) D`` on all forests ``|f| <= n_max``."""
    cop = coproduct or coproduct_forest
    for f in enumerate_forests(n_max, d):
        lhs = TensorComb()
        rhs = TensorComb()
        for (a, b), c in cop(f).items():
            for (a1, a2), e in cop(a).items():
                lhs.add_term((a1, a2, b), c * e)
            for (b1, b2), e in cop(b).items():
                rhs.add_term((a, b1, b2), c * e)
        if lhs != rhs:
            return CheckReport("coassociativity", False, counterexample={"forest": encode_forest(f)})
    return CheckReport("coassociativity", True, detail={"n_max": n_max})


def check_antipode(n_max: int, d: int = 1, coproduct: Callable[[Forest], TensorComb] | None = None) -> CheckReport:
    """``m (A (x) id) D = eps 1 = m (id (x) A) D`` on all forests ``|f| <= n_max``."""
    cop = coproduct or coproduct_forest
    for f in enumerate_forests(n_max, d):
        unit = ForestComb.basis(EMPTY, Fraction(1)) if not f else ForestComb()
        left = mult(tensor_map(cop(f), antipode, None))
        right = mult(tensor_map(cop(f), None, antipode))
        if left != unit or right != unit:
            return CheckReport("antipode", False, counterexample={"forest": encode_forest(f)})
    return CheckReport("antipode", True, detail={"n_max": n_max})


def check_coproduct_multiplicative(n_max: int, d: int = 1, coproduct: Callable[[Forest], TensorComb] | None = None) -> CheckReport:
    """``D(f g) = D(f) D(g)`` for forest pairs with ``|f| + |g| <= n_max``."""
    cop = coproduct or coproduct_forest
    forests = enumerate_forests(n_max, d)
    for i, f in enumerate(forests):
        for g in forests[i:]:
            if f.size + g.size > n_max:
                continue
            if cop(f * g) != tensor_product(cop(f), cop(g)):
                return CheckReport(
                    "coproduct_multiplicative", False,
                    counterexample={"f": encode_forest(f), "g": encode_forest(g)},
                )
    return CheckReport("coproduct_multiplicative", True, detail={"n_max": n_max})


def check_cut_oracle(n_max: int, d: int = 1, coproduct: Callable[[Tree], TensorComb] | None = None) -> CheckReport:
    """Admissible-cut enumeration agrees with the B+ recursion on trees."""
    cop = coproduct or coproduct_tree
    for t in enumerate_trees(n_max, d):
        if cop(t) != coproduct_by_cuts(t):
            return CheckReport("cut_oracle", False, counterexample={"tree": encode(t)})
    return CheckReport("cut_oracle", True, detail={"n_max": n_max})


def check_extraction_oracle(n_max: int, d: int = 1) -> CheckReport:
    for t in enumerate_trees(n_max, d):
        if extraction_tree(t) != extraction_by_enumeration(t):
            return CheckReport("extraction_oracle", False, counterexample={"tree": encode(t)})
    return CheckReport("extraction_oracle", True, detail={"n_max": n_max})
