import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from hkrenorm.branched_rp import DriverPath, canonical_lift, check_chen_words, check_shuffle_character, max_difference
from hkrenorm.chapoton_foissy import (
    BasisMismatchError, DualComb, basis_dumps, check_basis_audit, check_commute_iso, compute_basis, dual_unit,
    expand, iso_psi, iso_psi_inverse, star_product, tilde_map, unexpand,
)
from hkrenorm.forest_hopf import coproduct_forest
from hkrenorm.renorm import BphzCharacter, RenormMatrix, bphz_map
from hkrenorm.trees import Forest, decode, enumerate_forests, node
from hkrenorm.word_hopf import concat, wc

GAMMA = Fraction(3, 10)
a, b = node(0), node(1)
DUALS = [f for f in enumerate_forests(2, 1)]


def D(*ts):
    return DualComb.basis(Forest(ts), Fraction(1))


@pytest.fixture(scope="module")
def B():
    return compute_basis(3, 1)


@pytest.fixture(scope="module")
def X():
    return canonical_lift(DriverPath.polynomial(2, {1: (0, Fraction(1, 2), -1, Fraction(2, 3))}), 3, GAMMA)


def test_unit():
    x = D(b) + D(decode("1[0[]]"))
    assert star_product(dual_unit(), x, 3, 1) == x
    assert star_product(x, dual_unit(), 3, 1) == x


def test_node_products_match_coproduct_pairings():
    for i, j in [(b, b), (b, a), (a, b)]:
        out = star_product(D(i), D(j), 3, 1)
        for h, c in out.items():
            assert c == coproduct_forest(h).get((Forest((i,)), Forest((j,))), 0)
    assert star_product(D(b), D(b), 3, 1) == 2 * D(b, b) + D(decode("1[1[]]"))
    assert star_product(D(b), D(a), 3, 1) == D(a, b) + D(decode("1[0[]]"))


@given(st.sampled_from(DUALS), st.sampled_from(DUALS), st.sampled_from(DUALS))
def test_star_associative(f, g, h):
    x, y, z = (DualComb.basis(k, Fraction(1)) for k in (f, g, h))
    assert star_product(star_product(x, y, 3, 1), z, 3, 1) == star_product(x, star_product(y, z, 3, 1), 3, 1)


def test_basis_generators_and_audit(B):
    assert B.letters[:2] == [a, b]
    assert not B.flagged
    assert all(isinstance(x, type(a)) for x in B.letters)
    assert B.degrees == sorted(B.degrees)
    assert [B.audit[k]["monomials"] for k in ("1", "2", "3")] == [2, 7, 26]
    assert B.audit["total_monomials"] == B.audit["total_forests"] == 36
    assert check_basis_audit(B).passed


def test_basis_is_deterministic(B):
    assert basis_dumps(compute_basis(3, 1)) == basis_dumps(B)
    data = json.loads(basis_dumps(B))
    assert len(data["generators"]) == 11


def test_audit_detects_corrupted_matrix(B):
    import copy

    bad = copy.deepcopy(B)
    bad.backward[2][0][0] += 1
    assert not check_basis_audit(bad).passed


@given(st.sampled_from(enumerate_forests(3, 1)))
def test_expand_unexpand_round_trip(f):
    x = DualComb.basis(f, Fraction(3, 2))
    B3 = compute_basis(3, 1)
    assert unexpand(expand(x, B3), B3) == x


def test_iso_level_one_and_round_trip(B, X):
    Y = iso_psi(X, B)
    assert (Y.word((b,)) == X.values[b]).all()
    assert check_chen_words(Y).passed
    assert check_shuffle_character(Y).passed
    assert max_difference(iso_psi_inverse(Y, B, X), X) == 0


def test_iso_rejects_mismatched_truncation(B):
    small = canonical_lift(DriverPath.polynomial(2, {1: (0, 1)}), 2, Fraction(2, 5))
    with pytest.raises(BasisMismatchError):
        iso_psi(small, B)


def test_tilde_identity(B):
    T = tilde_map(RenormMatrix.identity(3, 1), B)
    for x in B.letters:
        assert T.images[x] == wc(x)


def test_tilde_bphz_on_nodes_frozen(B):
    c = Fraction(5, 2)
    T = tilde_map(bphz_map(BphzCharacter({b: c}), 3, 1), B)
    assert T.images[b] == wc(b)
    assert T.images[a] == wc(a, (c, b))


@given(st.lists(st.sampled_from([a, b, decode("1[1[]]"), decode("0[1[]]")]), max_size=3).map(tuple),
       st.lists(st.sampled_from([a, b]), max_size=1).map(tuple))
def test_tilde_is_multiplicative(u, v):
    B3 = compute_basis(3, 1)
    T = tilde_map(bphz_map(BphzCharacter({b: 2, decode("1[1[]]"): -1}), 3, 1), B3)
    assert T.word(u + v) == concat(T.word(u), T.word(v), 3)


@pytest.mark.parametrize("seed", [0, 1])
def test_commute_iso_exact(B, X, seed):
    M = bphz_map(BphzCharacter.random(3, 1, random.Random(seed)), 3, 1)
    rep = check_commute_iso(M, X, B)
    assert rep.passed and rep.detail["max_deviation"] == 0
    assert check_commute_iso(RenormMatrix.identity(3, 1), X, B).passed


def test_commute_iso_detects_dropped_term(B, X):
    M = bphz_map(BphzCharacter({b: 3}), 3, 1)
    T = tilde_map(M, B).dropped(a, (b,))
    rep = check_commute_iso(M, X, B, tilde=T)
    assert not rep.passed and rep.detail["max_deviation"] > 0
