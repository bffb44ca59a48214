"""Branched and anisotropic rough paths sampled on a dyadic grid.

Values are stored per basis element as ``n x n`` arrays indexed by grid
indices ``(s, t)``; only ``s <= t`` is meaningful. Two scalar fields share one
code path: ``exact`` (``gmpy2.mpq`` in object arrays) and ``float``
(``float64``).

Convention: the coproduct puts the trunk on the left, so Chen reads
``X_st(t) = sum X_su(trunk) X_ut(pruned)`` and the canonical lift integrates
children from ``u`` to ``t``:
``<X_st, B+_i(t1..tk)> = int_s^t prod_j <X_ut, tj> dx^i_u``.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import gmpy2
import numpy as np
from numpy.polynomial import polynomial as npoly

from . import forest_hopf as fh
from .forest_hopf import ForestComb, _ck_tree
from .report import CheckReport
from .trees import Forest, Tree, decode, encode, enumerate_trees
from .word_hopf import WeightedAlphabet, Word, WordComb, _shuffle_words, node_grade, tree_weight, words_up_to

FLOAT_TOL = 1e-10
DEFECT_CAP = 50


class GridMismatchError(ValueError):
    pass


class DriverError(ValueError):
    pass


# ---------------------------------------------------------------- scalars

class Field:
    """Scalar field for grid arrays: ``exact`` (mpq) or ``float``."""

    def __init__(self, mode: str):
        if mode not in ("exact", "float"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.exact = mode == "exact"
        self.tol = 0 if self.exact else FLOAT_TOL

    def scalar(self, x):
        if self.exact:
            if isinstance(x, float):
                x = Fraction(x)
            return gmpy2.mpq(x)
        return float(x)

    def zeros(self, shape):
        if self.exact:
            return np.full(shape, gmpy2.mpq(0), dtype=object)
        return np.zeros(shape)

    def ones(self, shape):
        if self.exact:
            return np.full(shape, gmpy2.mpq(1), dtype=object)
        return np.ones(shape)

    def array(self, values: Iterable):
        vals = [self.scalar(v) for v in values]
        return np.array(vals, dtype=object) if self.exact else np.array(vals, dtype=float)

    def fmt(self, x) -> str:
        return str(gmpy2.mpq(x)) if self.exact else repr(float(x))

    def parse(self, s: str):
        return gmpy2.mpq(s) if self.exact else float(s)

    def __eq__(self, other):
        return isinstance(other, Field) and other.mode == self.mode

    def __repr__(self):
        return f"Field({self.mode!r})"


def to_float(x) -> float:
    return float(x)


def _max_abs(a) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a)))


# ----------------------------------------------------------------- drivers

@dataclass
class DriverPath:
    """Driver components on the grid ``k / 2^D``; component 0 is time.

    ``polys[i]`` holds ascending rational coefficients of a global polynomial;
    ``increments[i]`` holds per-cell increments of a piecewise-linear path.
    """

    D: int
    d: int
    kind: str
    polys: dict = field(default_factory=dict)
    increments: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.D < 1:
            raise DriverError("grid depth must be at least 1")
        if self.kind not in ("polynomial", "piecewise_linear"):
            raise DriverError(f"unsupported driver class {self.kind!r}")

    @property
    def n(self) -> int:
        return 2 ** self.D + 1

    @property
    def h(self) -> Fraction:
        return Fraction(1, 2 ** self.D)

    @classmethod
    def polynomial(cls, D: int, coeffs: Mapping[int, Sequence]) -> DriverPath:
        polys = {0: (Fraction(0), Fraction(1))}
        d = 0
        for i, c in coeffs.items():
            if i == 0:
                raise DriverError("component 0 is reserved for time")
            polys[i] = tuple(Fraction(x) for x in c)
            d = max(d, i)
        for i in range(1, d + 1):
            polys.setdefault(i, (Fraction(0),))
        return cls(D, d, "polynomial", polys=polys)

    @classmethod
    def random_walk(cls, D: int, d: int, seed: int, scale: float = 1.0) -> DriverPath:
        rng = random.Random(seed)
        m = 2 ** D
        sd = scale * math.sqrt(1.0 / m)
        inc = {0: tuple(Fraction(1, m) for _ in range(m))}
        for i in range(1, d + 1):
            inc[i] = tuple(Fraction(rng.gauss(0.0, sd)) for _ in range(m))
        return cls(D, d, "piecewise_linear", increments=inc, seed=seed)

    @classmethod
    def constant(cls, D: int, d: int) -> DriverPath:
        inc = {i: tuple(Fraction(0) for _ in range(2 ** D)) for i in range(d + 1)}
        return cls(D, d, "piecewise_linear", increments=inc)

    def grid_values(self, i: int) -> list[Fraction]:
        if self.kind == "polynomial":
            c = np.array(self.polys[i], dtype=object)
            return [Fraction(npoly.polyval(Fraction(k, 2 ** self.D), c)) for k in range(self.n)]
        out = [Fraction(0)]
        for delta in self.increments[i]:
            out.append(out[-1] + delta)
        return out

    def cell_derivative(self, i: int, j: int) -> np.ndarray:
        """Coefficients of ``x_i'(t_j + theta)`` in the local variable ``theta``."""
        if self.kind == "piecewise_linear":
            return np.array([self.increments[i][j] / self.h], dtype=object)
        c = self.polys[i]
        der = [Fraction(k) * c[k] for k in range(1, len(c))] or [Fraction(0)]
        a = j * self.h
        # Taylor shift of the derivative to the cell's left end
        shifted = [Fraction(0)] * len(der)
        for k, ck in enumerate(der):
            for m in range(k + 1):
                shifted[m] += ck * math.comb(k, m) * a ** (k - m)
        return np.array(shifted, dtype=object)

    def to_json(self) -> dict:
        if self.kind == "polynomial":
            return {"kind": self.kind, "D": self.D, "polys": {str(i): [str(x) for x in c] for i, c in self.polys.items()}}
        return {"kind": self.kind, "D": self.D, "d": self.d, "seed": self.seed}


def _cell_values(trees: Sequence[Tree], driver: DriverPath, j: int) -> dict[Tree, Fraction]:
    h = driver.h
    deriv = {i: driver.cell_derivative(i, j) for i in range(driver.d + 1)}
    polys: dict[Tree, np.ndarray] = {}
    out = {}
    for t in trees:
        integrand = deriv[t.dec]
        for c in t.children:
            integrand = npoly.polymul(integrand, polys[c])
        anti = npoly.polyint(integrand)
        top = npoly.polyval(h, anti)
        p = -anti
        p[0] += top
        polys[t] = p
        out[t] = Fraction(p[0])
    return out


# ---------------------------------------------------------- branched RP

def _chen_terms(t: Tree) -> list[tuple]:
    """``(coeff, trunk or None, pruned trees)`` for each term of the coproduct."""
    out = []
    for (trunk, pruned), c in _ck_tree(t):
        out.append((c, trunk[0] if trunk else None, tuple(pruned)))
    return out


class BranchedRP:
    """Grid branched rough path: ``values[tree][s, t]`` for ``s <= t``."""

    def __init__(self, N: int, d: int, gamma, D: int, fld: Field, values: Mapping[Tree, np.ndarray]):
        self.N = N
        self.d = d
        self.gamma = gamma
        self.D = D
        self.field = fld
        self.trees = enumerate_trees(N, d)
        self.values = dict(values)
        missing = [t for t in self.trees if t not in self.values]
        if missing:
            raise ValueError(f"missing values for {encode(missing[0])}")

    @property
    def n(self) -> int:
        return 2 ** self.D + 1

    def times(self) -> list[Fraction]:
        return [Fraction(k, 2 ** self.D) for k in range(self.n)]

    # ---- evaluation
    def forest_array(self, f: Forest) -> np.ndarray:
        if not f:
            return self.field.ones((self.n, self.n))
        out = self.values[f[0]]
        for t in f[1:]:
            out = out * self.values[t]
        return out

    def comb_array(self, x: ForestComb) -> np.ndarray:
        out = self.field.zeros((self.n, self.n))
        for f, c in x.items():
            out = out + self.field.scalar(c) * self.forest_array(f)
        return out

    def value(self, s: int, t: int, f) -> object:
        """``<X_st, f>``; for ``s > t`` via the antipode, ``X_ts = X_st o A``."""
        if isinstance(f, Tree):
            f = Forest((f,))
        if s <= t:
            out = self.field.scalar(1)
            for tr in f:
                out = out * self.values[tr][s, t]
            return out
        total = self.field.scalar(0)
        for g, c in fh.antipode(fh.fc(f)).items():
            total = total + self.field.scalar(c) * self.value(t, s, g)
        return total

    def character(self, s: int, t: int) -> fh.Character:
        vals = {}
        for tr in self.trees:
            v = self.value(s, t, tr)
            vals[tr] = Fraction(v) if self.field.exact else float(v)
        return fh.Character(self.N, vals)

    def with_values(self, values: Mapping[Tree, np.ndarray]) -> BranchedRP:
        return BranchedRP(self.N, self.d, self.gamma, self.D, self.field, values)

    def perturbed(self, tree: Tree, s: int, t: int, delta) -> BranchedRP:
        vals = dict(self.values)
        arr = vals[tree].copy()
        arr[s, t] = arr[s, t] + self.field.scalar(delta)
        vals[tree] = arr
        return self.with_values(vals)

    def same_grid(self, other) -> bool:
        return self.D == other.D and self.field == other.field

    # ---- JSON
    def to_json(self) -> dict:
        entries = []
        for tr in self.trees:
            arr = self.values[tr]
            for s in range(self.n):
                for t in range(s, self.n):
                    entries.append({
                        "s": str(Fraction(s, 2 ** self.D)), "t": str(Fraction(t, 2 ** self.D)),
                        "basis": encode(tr), "value": self.field.fmt(arr[s, t]),
                    })
        return {
            "grid_depth": self.D, "truncation": self.N, "gamma": str(self.gamma),
            "d": self.d, "mode": self.field.mode, "entries": entries,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> BranchedRP:
        D, N, d = int(data["grid_depth"]), int(data["truncation"]), int(data["d"])
        fld = Field(data.get("mode", "float"))
        n = 2 ** D + 1
        vals = {t: fld.zeros((n, n)) for t in enumerate_trees(N, d)}
        for e in data["entries"]:
            s = int(Fraction(e["s"]) * 2 ** D)
            t = int(Fraction(e["t"]) * 2 ** D)
            vals[decode(e["basis"], d)][s, t] = fld.parse(e["value"])
        gamma = data["gamma"]
        return cls(N, d, Fraction(gamma) if "/" in gamma or "." in gamma else gamma, D, fld, vals)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def canonical_lift(x: DriverPath, N: int, gamma, mode: str = "exact") -> BranchedRP:
    """Iterated-integral lift, exact per cell and chained by Chen's rule."""
    fld = Field(mode)
    trees = enumerate_trees(N, x.d)
    n = x.n
    cells = [_cell_values(trees, x, j) for j in range(n - 1)]
    cell_arr = {t: fld.array(c[t] for c in cells) for t in trees}
    vals = {t: fld.zeros((n, n)) for t in trees}
    terms = {t: _chen_terms(t) for t in trees}
    for col in range(1, n):
        j = col - 1
        for t in trees:
            acc = fld.zeros(col)
            for c, trunk, pruned in terms[t]:
                w = fld.scalar(c)
                for p in pruned:
                    w = w * cell_arr[p][j]
                if not w:
                    continue
                if trunk is None:
                    acc = acc + w
                else:
                    acc = acc + w * vals[trunk][:col, j]
            vals[t][:col, col] = acc
    return BranchedRP(N, x.d, gamma, x.D, fld, vals)


def check_chen(X: BranchedRP, triples: str = "all", tol=None) -> CheckReport:
    """Max defect of ``X_su * X_ut = X_st`` over grid triples and trees.

    ``adjacent`` checks ``u = t - 1`` only, which is equivalent by
    associativity of the convolution product.
    """
    tol = X.field.tol if tol is None else tol
    n = X.n
    worst = 0.0
    bad: list[tuple] = []
    for t in X.trees:
        terms = _chen_terms(t)
        arr = X.values[t]
        us = range(1, n - 1)
        for u in us:
            if triples == "adjacent":
                cols = np.array([u + 1]) if u + 1 < n else np.array([], dtype=int)
            else:
                cols = np.arange(u + 1, n)
            if not len(cols):
                continue
            lhs = None
            for c, trunk, pruned in terms:
                left = X.field.ones(u) if trunk is None else X.values[trunk][:u, u]
                right = X.field.scalar(c) * X.field.ones(len(cols))
                for p in pruned:
                    right = right * X.values[p][u, cols]
                term = np.outer(left, right)
                lhs = term if lhs is None else lhs + term
            defect = np.abs(lhs - arr[:u][:, cols])
            m = _max_abs(defect)
            worst = max(worst, m)
            if m > tol and len(bad) < DEFECT_CAP:
                for s, k in zip(*np.nonzero(defect > tol)):
                    if len(bad) >= DEFECT_CAP:
                        break
                    bad.append((int(s), u, int(cols[k]), encode(t)))
    return CheckReport(
        "chen", worst <= tol,
        detail={"max_defect": worst, "triples": triples, "mode": X.field.mode, "tol": tol},
        counterexample=[{"s": s, "u": u, "t": t, "tree": e} for s, u, t, e in bad] or None,
    )


def check_character(X: BranchedRP) -> CheckReport:
    """``value(f g) = value(f) value(g)`` through the public evaluation API."""
    rng = random.Random(0)
    forests = [f for f in fh.enumerate_forests(X.N, X.d) if len(f) >= 2]
    pairs = [(rng.randrange(X.n), rng.randrange(X.n)) for _ in range(20)]
    for f in forests:
        for s, t in pairs:
            s, t = min(s, t), max(s, t)
            prod = X.field.scalar(1)
            for tr in f:
                prod = prod * X.value(s, t, tr)
            if abs(prod - X.value(s, t, f)) > X.field.tol:
                return CheckReport("character", False, counterexample={"forest": [encode(x) for x in f], "s": s, "t": t})
    return CheckReport("character", True, detail={"forests": len(forests)})


def holder_report(X: BranchedRP, gamma=None) -> dict[str, float]:
    """``sup |<X_st, t>| / |t - s|^w(t)`` over grid pairs, per tree."""
    gamma = X.gamma if gamma is None else gamma
    n = X.n
    s_idx, t_idx = np.triu_indices(n, k=1)
    dt = (t_idx - s_idx) / (n - 1)
    out = {}
    for tr in X.trees:
        w = float(tree_weight(tr, gamma))
        vals = np.abs(X.values[tr][s_idx, t_idx].astype(float))
        out[encode(tr)] = float(np.max(vals / dt ** w))
    return out


def apply_renorm(M, X: BranchedRP, gamma=None) -> BranchedRP:
    """``<Xhat_st, f> = <X_st, M f>`` for a RenormMatrix ``M``."""
    from .renorm import UnacceptedMapError

    if gamma is not None and not M.accepted(gamma):
        raise UnacceptedMapError(f"{M.name} is not an accepted renormalisation map")
    if M.N < X.N:
        raise ValueError("renormalisation matrix truncated below the path")
    vals = {}
    for tr in X.trees:
        vals[tr] = X.comb_array(M.tree_image(tr))
    return X.with_values(vals)


def max_difference(a: BranchedRP, b: BranchedRP) -> float:
    if not a.same_grid(b):
        raise GridMismatchError("paths live on different grids")
    iu = np.triu_indices(a.n)
    return max(_max_abs((a.values[t] - b.values[t])[iu]) for t in a.trees)


# -------------------------------------------------------- anisotropic RP

class WordSpace:
    """Words over ordered tree letters with node grade ``<= N``, plus product tables."""

    def __init__(self, letters: Sequence[Tree], N: int):
        self.letters = list(letters)
        self.N = N
        self.words: list[Word] = list(words_up_to(self.letters, N, node_grade))
        self.index = {w: i for i, w in enumerate(self.words)}
        # every (prefix, suffix) split of every word, including empty parts
        self.splits = [
            [(self.index[w[:k]], self.index[w[k:]]) for k in range(len(w) + 1)]
            for w in self.words
        ]

    def __len__(self):
        return len(self.words)

    def __contains__(self, w) -> bool:
        return w in self.index

    def comb_coeffs(self, x: WordComb) -> list[tuple[int, Fraction]]:
        return [(self.index[w], c) for w, c in x.items()]


def _concat_cells(a: list, b: list, space: WordSpace, fld: Field, ncells: int) -> list:
    """Truncated concatenation of two families of group-algebra elements (one per cell)."""
    out = [fld.zeros(ncells) for _ in space.words]
    for k, sp in enumerate(space.splits):
        acc = out[k]
        for i, j in sp:
            if a[i] is None or b[j] is None:
                continue
            acc = acc + a[i] * b[j]
        out[k] = acc
    return out


def _exp_cells(x: list, space: WordSpace, fld: Field, ncells: int) -> list:
    out = [fld.zeros(ncells) for _ in space.words]
    out[0] = fld.ones(ncells)
    power = [None] * len(space)
    power[0] = fld.ones(ncells)
    for k in range(1, space.N + 1):
        power = _concat_cells(power, x, space, fld, ncells)
        inv = fld.scalar(Fraction(1, math.factorial(k)))
        out = [o + inv * p for o, p in zip(out, power)]
    return out


def _log_cells(g: list, space: WordSpace, fld: Field, ncells: int) -> list:
    y = list(g)
    y[0] = fld.zeros(ncells)
    out = [fld.zeros(ncells) for _ in space.words]
    power = [None] * len(space)
    power[0] = fld.ones(ncells)
    for k in range(1, space.N + 1):
        power = _concat_cells(power, y, space, fld, ncells)
        coef = fld.scalar(Fraction((-1) ** (k + 1), k))
        out = [o + coef * p for o, p in zip(out, power)]
    return out


class AnisotropicRP:
    """Grid anisotropic rough path over tree letters: ``values[i][s, t]`` for word ``i``."""

    def __init__(self, space: WordSpace, alphabet: WeightedAlphabet, D: int, fld: Field, values: list):
        self.space = space
        self.alphabet = alphabet
        self.D = D
        self.field = fld
        self.values = values

    @property
    def n(self) -> int:
        return 2 ** self.D + 1

    @property
    def N(self) -> int:
        return self.space.N

    def word(self, w: Word) -> np.ndarray:
        return self.values[self.space.index[tuple(w)]]

    def comb_array(self, x: WordComb) -> np.ndarray:
        out = self.field.zeros((self.n, self.n))
        for w, c in x.items():
            out = out + self.field.scalar(c) * self.word(w)
        return out

    def cell_elements(self) -> list:
        j = np.arange(self.n - 1)
        return [v[j, j + 1] for v in self.values]

    def letter_path(self, a: Tree) -> np.ndarray:
        return self.word((a,))[0, :]


def chain_cells(cells: list, space: WordSpace, fld: Field, n: int, fixed: Mapping[int, np.ndarray] | None = None) -> list:
    """All pair values from elementary-interval elements by ordered products.

    Words listed in ``fixed`` take the given arrays verbatim.
    """
    fixed = fixed or {}
    vals = [fixed[k] if k in fixed else fld.zeros((n, n)) for k in range(len(space))]
    vals[0] = fld.ones((n, n))
    todo = [k for k in range(1, len(space)) if k not in fixed]
    for col in range(1, n):
        j = col - 1
        for k in todo:
            acc = fld.zeros(col)
            for i, jj in space.splits[k]:
                acc = acc + vals[i][:col, j] * cells[jj][j]
            vals[k][:col, col] = acc
    return vals


def check_chen_words(Y: AnisotropicRP, triples: str = "all", tol=None) -> CheckReport:
    tol = Y.field.tol if tol is None else tol
    n = Y.n
    worst = 0.0
    bad = []
    for k, w in enumerate(Y.space.words):
        if not w:
            continue
        for u in range(1, n - 1):
            cols = np.array([u + 1]) if triples == "adjacent" else np.arange(u + 1, n)
            lhs = None
            for i, j in Y.space.splits[k]:
                term = np.outer(Y.values[i][:u, u], Y.values[j][u, cols])
                lhs = term if lhs is None else lhs + term
            m = _max_abs(lhs - Y.values[k][:u][:, cols])
            worst = max(worst, m)
            if m > tol and len(bad) < DEFECT_CAP:
                bad.append({"u": u, "word": [encode(a) for a in w]})
    return CheckReport(
        "chen_words", worst <= tol, detail={"max_defect": worst, "triples": triples, "tol": tol},
        counterexample=bad or None,
    )


def check_shuffle_character(Y: AnisotropicRP, tol=None) -> CheckReport:
    """``<Y, u sh v> = <Y, u><Y, v>`` on all grid pairs and word pairs within the truncation."""
    tol = Y.field.tol if tol is None else tol
    iu = np.triu_indices(Y.n)
    words = Y.space.words
    worst = 0.0
    witness = None
    for a, u in enumerate(words):
        if not u:
            continue
        for v in words[a:]:
            if not v or node_grade(u) + node_grade(v) > Y.N:
                continue
            lhs = Y.field.zeros(len(iu[0]))
            for w, c in _shuffle_words(u, v):
                lhs = lhs + Y.field.scalar(c) * Y.word(w)[iu]
            m = _max_abs(lhs - Y.word(u)[iu] * Y.word(v)[iu])
            if m > worst:
                worst = m
                if m > tol:
                    witness = {"u": [encode(x) for x in u], "v": [encode(x) for x in v]}
    return CheckReport("shuffle_character", worst <= tol, detail={"max_defect": worst}, counterexample=witness)


def holder_report_words(Y: AnisotropicRP) -> dict[str, float]:
    """Quotients at exponent ``gamma_hat * omega(v) = sum of letter exponents``."""
    n = Y.n
    s_idx, t_idx = np.triu_indices(n, k=1)
    dt = (t_idx - s_idx) / (n - 1)
    out = {}
    for k, w in enumerate(Y.space.words):
        if not w:
            continue
        e = float(sum(Y.alphabet.gamma[a] for a in w))
        vals = np.abs(Y.values[k][s_idx, t_idx].astype(float))
        out[" ".join(encode(a) for a in w)] = float(np.max(vals / dt ** e))
    return out
