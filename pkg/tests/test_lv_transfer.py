import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hkrenorm.branched_rp import (
    AnisotropicRP, DriverPath, Field, apply_renorm, canonical_lift, check_chen_words, check_shuffle_character,
    max_difference,
)
from hkrenorm.lv_transfer import (
    AdditivityError, GFamily, InadmissibleAlphabetError, PriorChenError, branched_to_anisotropic,
    check_action_additivity, check_composite_additivity, check_transfer_identity, compare_bar_adjoint, compare_g,
    g_action, g_from_renorm_explicit, g_from_renorm_recursive, lv_extend, read_back,
)
from hkrenorm.renorm import BphzCharacter, RenormMatrix, bphz_map
from hkrenorm.trees import decode, node
from hkrenorm.word_hopf import WeightedAlphabet

GAMMA = Fraction(3, 10)
EXACT = Field("exact")
a, b = node(1), decode("1[1[]]")
POLY = {1: (0, Fraction(1, 2), -1, Fraction(2, 3))}


def path(values):
    return EXACT.array([Fraction(0)] + list(values))


def random_path(rng, n=8):
    acc, out = Fraction(0), []
    for _ in range(n):
        acc += Fraction(rng.randint(-6, 6), rng.randint(1, 5))
        out.append(acc)
    return path(out)


ALPHA = WeightedAlphabet.of_trees([a, b], GAMMA)


@pytest.fixture(scope="module")
def X():
    return canonical_lift(DriverPath.polynomial(3, POLY), 3, GAMMA)


@pytest.fixture(scope="module")
def Xbar(X):
    return branched_to_anisotropic(X)


def test_single_letter_level_one():
    p = random_path(random.Random(1))
    Y = lv_extend({a: p}, None, ALPHA, 3, 3, EXACT)
    for s in range(9):
        for t in range(s, 9):
            assert Y.word((a,))[s, t] == p[t] - p[s]
    assert check_chen_words(Y).passed


@given(st.integers(0, 10_000))
def test_two_letters_shuffle_identity(seed):
    rng = random.Random(seed)
    alpha = WeightedAlphabet.of_trees([a, node(0)], GAMMA)
    Y = lv_extend({a: random_path(rng), node(0): random_path(rng)}, None, alpha, 2, 3, EXACT)
    iu = np.triu_indices(9)
    lhs = Y.word((a, node(0))) + Y.word((node(0), a))
    assert (lhs[iu] == (Y.word((a,)) * Y.word((node(0),)))[iu]).all()
    assert check_shuffle_character(Y).passed


def test_extension_preserves_prior_bit_exactly():
    rng = random.Random(4)
    prior = lv_extend({a: random_path(rng)}, None, ALPHA, 3, 3, EXACT)
    Y = lv_extend({b: random_path(rng)}, prior, ALPHA, 3, 3, EXACT)
    for w in prior.space.words:
        assert Y.word(w) is not None
        assert (Y.word(w) == prior.word(w)).all()
    assert check_chen_words(Y).passed and check_shuffle_character(Y).passed


def test_float_prior_preserved_to_the_last_bit():
    fld = Field("float")
    rng = np.random.default_rng(0)
    pa = np.concatenate([[0.0], np.cumsum(rng.normal(size=8))])
    pb = np.concatenate([[0.0], np.cumsum(rng.normal(size=8))])
    prior = lv_extend({a: pa}, None, ALPHA, 3, 3, fld)
    Y = lv_extend({b: pb}, prior, ALPHA, 3, 3, fld)
    for w in prior.space.words:
        assert np.array_equal(Y.word(w), prior.word(w))


def test_inadmissible_alphabet_rejected():
    quarter = WeightedAlphabet.of_trees([a], Fraction(1, 4))
    with pytest.raises(InadmissibleAlphabetError):
        lv_extend({a: random_path(random.Random(0))}, None, quarter, 4, 3, EXACT)


def test_prior_chen_defect_rejected():
    rng = random.Random(2)
    prior = lv_extend({a: random_path(rng)}, None, ALPHA, 3, 3, EXACT)
    vals = [v.copy() for v in prior.values]
    k = prior.space.index[(a, a)]
    vals[k][0, 2] += 1
    broken = AnisotropicRP(prior.space, prior.alphabet, prior.D, prior.field, vals)
    with pytest.raises(PriorChenError):
        lv_extend({b: random_path(rng)}, broken, ALPHA, 3, 3, EXACT)


def test_transfer_identity_exact(X, Xbar):
    assert check_transfer_identity(X, Xbar).passed
    assert (Xbar.word((a,)) == X.values[a]).all()
    tau = decode("1[0[]]")
    iu = np.triu_indices(9)
    assert ((Xbar.word((tau,)) + Xbar.word((a, node(0))))[iu] == X.values[tau][iu]).all()
    assert check_chen_words(Xbar).passed and check_shuffle_character(Xbar).passed


def test_transfer_is_deterministic(X, Xbar):
    again = branched_to_anisotropic(X)
    for k in range(len(Xbar.values)):
        assert (again.values[k] == Xbar.values[k]).all()


def test_transfer_rejects_broken_chen(X):
    with pytest.raises(AdditivityError):
        branched_to_anisotropic(X.perturbed(b, 0, 2, 1))


def test_read_back_reproduces_path(X, Xbar):
    assert max_difference(read_back(Xbar, X), X) == 0


def test_zero_g_is_trivial(X, Xbar):
    g0 = GFamily.zero(X.trees, X.D, EXACT)
    assert max_difference(g_action(g0, X, Xbar), X) == 0
    gi = g_from_renorm_recursive(RenormMatrix.identity(3, 1), X, Xbar)
    ge = g_from_renorm_explicit(RenormMatrix.identity(3, 1), X, Xbar)
    assert gi.max_difference(g0) == 0 and ge.max_difference(g0) == 0


def test_level_one_g_action(X, Xbar):
    g = GFamily.zero(X.trees, X.D, EXACT)
    g.paths[a] = path([Fraction(k * k, 7) for k in range(1, 9)])
    gX = g_action(g, X, Xbar)
    iu = np.triu_indices(9)
    assert (gX.values[a][iu] == (X.values[a] + g.increments(a))[iu]).all()
    assert (gX.values[node(0)] == X.values[node(0)]).all()


def test_level_one_g_from_bphz(X, Xbar):
    c = Fraction(5, 3)
    M = bphz_map(BphzCharacter({a: c}), 3, 1)
    g = g_from_renorm_recursive(M, X, Xbar)
    assert (g.paths[a] == c * X.values[node(0)][0, :]).all()
    assert (g_from_renorm_explicit(M, X, Xbar).paths[a] == g.paths[a]).all()


@pytest.mark.parametrize("seed", [0, 1])
def test_explicit_equals_recursive_and_realizes_renormalisation(X, Xbar, seed):
    M = bphz_map(BphzCharacter.random(3, 1, random.Random(seed)), 3, 1)
    g = g_from_renorm_recursive(M, X, Xbar)
    assert compare_g(g_from_renorm_explicit(M, X, Xbar), g).passed
    assert max_difference(g_action(g, X, Xbar), apply_renorm(M, X)) == 0


def test_composite_and_action_additivity(X):
    M1 = bphz_map(BphzCharacter.random(3, 1, random.Random(3)), 3, 1)
    M2 = bphz_map(BphzCharacter.random(3, 1, random.Random(4)), 3, 1)
    assert check_composite_additivity(M1, M2, X).passed
    g1 = g_from_renorm_recursive(M1, X)
    g2 = g_from_renorm_recursive(M2, X)
    assert check_action_additivity(g1, g2, X).passed


def test_bar_adjoint_comparison_is_reported_only(X, Xbar):
    M = bphz_map(BphzCharacter({a: 2}), 3, 1)
    g = g_from_renorm_recursive(M, X, Xbar)
    rep = compare_bar_adjoint(M, X, g, Xbar)
    assert set(rep) == {"max_deviation", "coincide", "per_tree"}
    assert len(rep["per_tree"]) == len(X.trees)


def test_g_csv(X, Xbar):
    M = bphz_map(BphzCharacter({a: 2}), 3, 1)
    csv_text = g_from_renorm_recursive(M, X, Xbar).to_csv()
    lines = csv_text.splitlines()
    assert lines[0] == "tree,t,g_value"
    assert len(lines) == 1 + len(X.trees) * 9
    assert "1[],1/8,1/4" in lines
