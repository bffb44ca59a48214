"""Grid Lyons-Victoir extension, branched -> anisotropic transfer, and the g-action.

The free choice in the extension is fixed as follows: on each elementary
interval, take the log of the prior group element, set the coefficients of
the new letters to the prescribed increments, leave every other new
coordinate at zero and exponentiate. Pairs ``(s, t)`` are then ordered
products of interval elements, so Chen holds by construction and prior word
values are copied verbatim.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .branched_rp import (
    AnisotropicRP, BranchedRP, Field, GridMismatchError, WordSpace, _exp_cells, _log_cells, _max_abs,
    apply_renorm, chain_cells,
)
from .renorm import BarMap, RenormMatrix, compose
from .report import CheckReport
from .tree_word_maps import psi_lower, psi_tree
from .trees import Tree, encode
from .word_hopf import WeightedAlphabet, lv_admissible, tree_weight


class InadmissibleAlphabetError(ValueError):
    pass


class AdditivityError(ValueError):
    pass


class PriorChenError(ValueError):
    pass


def _prefix_path(cell_increments, fld: Field) -> np.ndarray:
    out = fld.zeros(len(cell_increments) + 1)
    out[1:] = np.cumsum(cell_increments)
    return out


def _adjacent_defect(R: np.ndarray) -> float:
    """Max of ``|R[s,t] - R[s,t-1] - R[t-1,t]|`` over ``s < t - 1``."""
    worst = 0.0
    for col in range(2, R.shape[0]):
        d = R[: col - 1, col] - R[: col - 1, col - 1] - R[col - 1, col]
        worst = max(worst, _max_abs(d))
    return worst


# -------------------------------------------------------------- extension

def lv_extend(
    prescribed: Mapping[Tree, np.ndarray],
    prior: AnisotropicRP | None,
    alphabet: WeightedAlphabet,
    N: int,
    D: int,
    fld: Field,
    check_prior: bool = True,
) -> AnisotropicRP:
    """Extend ``prior`` by new letters whose paths (grid values) are ``prescribed``."""
    n_omega = math.floor(1 / alphabet.gamma_hat + 1e-12)
    if not lv_admissible(alphabet, n_omega):
        raise InadmissibleAlphabetError("some weight combination sums to exactly 1")
    n = 2 ** D + 1
    old = [] if prior is None else list(prior.space.letters)
    if prior is not None:
        if prior.D != D or prior.field != fld:
            raise GridMismatchError("prior lives on another grid")
        if check_prior:
            rep = check_chen_adjacent(prior)
            if not rep.passed:
                raise PriorChenError(f"prior Chen defect {rep.detail['max_defect']}")
    for a in prescribed:
        if a in old:
            raise ValueError(f"letter {encode(a)} already present in the prior")
        if a not in alphabet:
            raise ValueError(f"letter {encode(a)} not in the alphabet")
    letters = [a for a in alphabet.letters if a in prescribed or a in old]
    space = WordSpace(letters, N)
    ncells = n - 1

    logs = [fld.zeros(ncells) for _ in space.words]
    fixed_cells: dict[int, np.ndarray] = {}
    fixed_vals: dict[int, np.ndarray] = {}
    if prior is not None:
        pcells = prior.cell_elements()
        plog = _log_cells(pcells, prior.space, fld, ncells)
        for i, w in enumerate(prior.space.words):
            k = space.index[w]
            logs[k] = plog[i]
            fixed_cells[k] = pcells[i]
            fixed_vals[k] = prior.values[i]
    for a, path in prescribed.items():
        path = np.asarray(path)
        logs[space.index[(a,)]] = path[1:] - path[:-1]
    logs[0] = fld.zeros(ncells)
    cells = _exp_cells(logs, space, fld, ncells)
    for k, v in fixed_cells.items():
        cells[k] = v
    vals = chain_cells(cells, space, fld, n, fixed_vals)
    return AnisotropicRP(space, alphabet, D, fld, vals)


def check_chen_adjacent(Y: AnisotropicRP) -> CheckReport:
    from .branched_rp import check_chen_words

    return check_chen_words(Y, "adjacent")


# ---------------------------------------------------------------- staging

def _staged(
    X: BranchedRP, path_for: Callable[[Tree, AnisotropicRP | None], np.ndarray]
) -> AnisotropicRP:
    alphabet = WeightedAlphabet.of_trees(X.trees, X.gamma)
    Y = None
    for k in range(1, X.N + 1):
        new = [t for t in X.trees if t.size == k]
        paths = {t: path_for(t, Y) for t in new}
        Y = lv_extend(paths, Y, alphabet, X.N, X.D, X.field, check_prior=False)
    return Y


def _lower_values(tau: Tree, Y: AnisotropicRP | None, X: BranchedRP) -> np.ndarray:
    if Y is None:
        return X.field.zeros((X.n, X.n))
    return Y.comb_array(psi_lower(tau))


def _remainder_path(R: np.ndarray, X: BranchedRP, what: str, tau: Tree) -> np.ndarray:
    defect = _adjacent_defect(R)
    if defect > X.field.tol:
        raise AdditivityError(f"{what} for {encode(tau)} is not additive (defect {defect})")
    j = np.arange(X.n - 1)
    return _prefix_path(R[j, j + 1], X.field)


def branched_to_anisotropic(X: BranchedRP) -> AnisotropicRP:
    """Stagewise transfer: new letters of size ``k`` carry the remainder paths."""

    def path_for(tau, Y):
        R = X.values[tau] - _lower_values(tau, Y, X)
        return _remainder_path(R, X, "remainder", tau)

    return _staged(X, path_for)


def read_back(Y: AnisotropicRP, like: BranchedRP) -> BranchedRP:
    """Branched path ``<Y, psi(t)>``."""
    return like.with_values({t: Y.comb_array(psi_tree(t)) for t in like.trees})


def check_transfer_identity(X: BranchedRP, Y: AnisotropicRP) -> CheckReport:
    iu = np.triu_indices(X.n)
    worst = 0.0
    witness = None
    for t in X.trees:
        m = _max_abs((X.values[t] - Y.comb_array(psi_tree(t)))[iu])
        if m > worst:
            worst = m
            witness = {"tree": encode(t)}
    ok = worst <= X.field.tol
    return CheckReport("transfer_identity", ok, detail={"max_defect": worst}, counterexample=None if ok else witness)


# ---------------------------------------------------------------- g family

@dataclass
class GFamily:
    """Grid paths ``g^t`` with ``g^t_0 = 0``, one per tree."""

    paths: dict
    D: int
    field: Field

    @classmethod
    def zero(cls, trees: Sequence[Tree], D: int, fld: Field) -> GFamily:
        return cls({t: fld.zeros(2 ** D + 1) for t in trees}, D, fld)

    def increments(self, t: Tree) -> np.ndarray:
        g = self.paths[t]
        return g[None, :] - g[:, None]

    def __add__(self, other: GFamily) -> GFamily:
        if self.D != other.D:
            raise GridMismatchError("g families on different grids")
        return GFamily({t: self.paths[t] + other.paths[t] for t in self.paths}, self.D, self.field)

    def max_difference(self, other: GFamily) -> float:
        return max(_max_abs(self.paths[t] - other.paths[t]) for t in self.paths)

    def holder_report(self, gamma) -> dict[str, float]:
        n = 2 ** self.D + 1
        s_idx, t_idx = np.triu_indices(n, k=1)
        dt = (t_idx - s_idx) / (n - 1)
        out = {}
        for t, g in self.paths.items():
            w = float(tree_weight(t, gamma))
            inc = np.abs((g[t_idx] - g[s_idx]).astype(float))
            out[encode(t)] = float(np.max(inc / dt ** w))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["tree", "t", "g_value"])
        n = 2 ** self.D + 1
        for tree in sorted(self.paths):
            g = self.paths[tree]
            for k in range(n):
                wr.writerow([encode(tree), f"{k}/{n - 1}", self.field.fmt(g[k])])
        return buf.getvalue()


def g_action(g: GFamily, X: BranchedRP, Xbar: AnisotropicRP | None = None) -> BranchedRP:
    """``<gX_st, t> = <gXbar_st, psi(t)>``; ``gXbar`` uses letter paths ``x^t + g^t``."""
    if g.D != X.D:
        raise GridMismatchError("g and X live on different grids")
    Xbar = branched_to_anisotropic(X) if Xbar is None else Xbar

    def path_for(tau, Y):
        return Xbar.letter_path(tau) + g.paths[tau]

    gY = _staged(X, path_for)
    out = read_back(gY, X)
    out.anisotropic = gY
    return out


def g_from_renorm_recursive(M: RenormMatrix, X: BranchedRP, Xbar: AnisotropicRP | None = None) -> GFamily:
    """Tree by tree: ``dg = <X, M t> - <Xbar, t> - <gXbar, psi_lower(t)>``."""
    Xbar = branched_to_anisotropic(X) if Xbar is None else Xbar
    Xhat = apply_renorm(M, X)
    g: dict[Tree, np.ndarray] = {}

    def path_for(tau, Y):
        inc = Xhat.values[tau] - Xbar.word((tau,)) - _lower_values(tau, Y, X)
        g[tau] = _remainder_path(inc, X, "g increment", tau)
        return Xbar.letter_path(tau) + g[tau]

    _staged(X, path_for)
    return GFamily(g, X.D, X.field)


def g_from_renorm_explicit(M: RenormMatrix, X: BranchedRP, Xbar: AnisotropicRP | None = None) -> GFamily:
    """``g_t - g_s = <bar(M*X)_st, t> - <Xbar_st, t>`` with ``bar(M*X)`` the transfer of ``M*X``."""
    Xbar = branched_to_anisotropic(X) if Xbar is None else Xbar
    Ybar = branched_to_anisotropic(apply_renorm(M, X))
    return GFamily({t: Ybar.letter_path(t) - Xbar.letter_path(t) for t in X.trees}, X.D, X.field)


def compare_g(a: GFamily, b: GFamily, tol=None) -> CheckReport:
    tol = a.field.tol if tol is None else tol
    m = a.max_difference(b)
    return CheckReport("g_formulas_agree", m <= tol, detail={"max_difference": m, "tol": tol})


def check_composite_additivity(M1: RenormMatrix, M2: RenormMatrix, X: BranchedRP) -> CheckReport:
    """``g(M1 o M2, X) = g(M1, X) + g(M2, M1* X)`` on the grid."""
    g1 = g_from_renorm_recursive(M1, X)
    g2 = g_from_renorm_recursive(M2, apply_renorm(M1, X))
    g12 = g_from_renorm_recursive(compose(M1, M2), X)
    m = g12.max_difference(g1 + g2)
    return CheckReport("composite_additivity", m <= X.field.tol, detail={"max_difference": m})


def check_action_additivity(g1: GFamily, g2: GFamily, X: BranchedRP, tol=None) -> CheckReport:
    """``g2(g1 X) = (g1 + g2) X`` entrywise."""
    from .branched_rp import max_difference

    tol = X.field.tol if tol is None else tol
    lhs = g_action(g2, g_action(g1, X))
    rhs = g_action(g1 + g2, X)
    m = max_difference(lhs, rhs)
    return CheckReport("action_additivity", m <= tol, detail={"max_difference": m, "tol": tol})


def compare_bar_adjoint(M: RenormMatrix, X: BranchedRP, g: GFamily, Xbar: AnisotropicRP | None = None) -> dict:
    """Exploratory: compare ``g`` with ``<Mbar* Xbar, t> - <Xbar, t>``; reported, never asserted."""
    Xbar = branched_to_anisotropic(X) if Xbar is None else Xbar
    Mbar = BarMap(M)
    per_tree = {}
    for t in X.trees:
        cand = Xbar.comb_array(Mbar.word((t,))) - Xbar.word((t,))
        per_tree[encode(t)] = _max_abs(cand[0, :] - g.paths[t])
    worst = max(per_tree.values())
    return {"max_deviation": worst, "coincide": worst <= X.field.tol, "per_tree": per_tree}
