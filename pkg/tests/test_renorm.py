import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from hkrenorm import forest_hopf as fh
from hkrenorm.forest_hopf import TruncationError, fc
from hkrenorm.renorm import (
    BarMap, BphzCharacter, LocalRule, RenormMatrix, RuleError, UnacceptedMapError, bar_map, bphz_map,
    check_admissible, check_analytic_condition, check_cointeraction, check_hk_square, check_multiplicative,
    compose, load_character_file, load_rule_file, local_map, root_extraction_rule, translation_coeffs,
)
from hkrenorm.trees import EMPTY, Forest, b_plus, decode, enumerate_trees, node
from hkrenorm.word_hopf import wc

GAMMA = Fraction(3, 10)
a, b = node(0), node(1)
bb = decode("1[1[]]")


def F(*ts):
    return Forest(ts)


def character(seed, N=3):
    return BphzCharacter.random(N, 1, random.Random(seed))


def test_bphz_character_rejects_zero_decorations():
    with pytest.raises(RuleError):
        BphzCharacter({decode("1[0[]]"): 1})
    v = BphzCharacter({b: 2})
    assert v(F()) == 1 and v(F(b, b)) == 4 and v(a) == 0


def test_bphz_on_unit_and_nodes():
    v = BphzCharacter({b: Fraction(5, 2)})
    M = bphz_map(v, 3, 1)
    assert M(fc(EMPTY)) == fc(EMPTY)
    assert M.tree_image(b) == fc(b, (Fraction(5, 2), a))
    assert M.tree_image(a) == fc(a)


def test_bphz_on_two_node_tree_frozen():
    v = BphzCharacter({b: 2, bb: Fraction(-1, 2)})
    M = bphz_map(v, 3, 1)
    expected = fc(bb, (2, decode("0[1[]]")), (2, decode("1[0[]]")), (4, decode("0[0[]]")), (Fraction(-1, 2), a))
    assert M.tree_image(bb) == expected
    assert M.tree_image(decode("1[0[]]")) == fc(decode("1[0[]]"), (2, decode("0[0[]]")))


def test_identity_properties():
    I = RenormMatrix.identity(3, 1)
    assert I.adjoint() == I
    assert check_cointeraction(I, 3).passed
    assert check_analytic_condition(I, GAMMA).passed
    M, Mc = local_map(LocalRule({}, GAMMA), 3, 1)
    assert M == I and Mc == I


def test_matrix_rejects_forests_beyond_truncation():
    with pytest.raises(TruncationError):
        RenormMatrix.identity(2, 1)(fc(decode("1[1[1[]]]")))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_bphz_is_accepted(seed):
    M = bphz_map(character(seed, 4), 4, 1)
    assert check_multiplicative(M).passed
    assert check_cointeraction(M, 4).passed
    assert check_analytic_condition(M, Fraction(6, 25)).passed
    assert M.accepted(Fraction(6, 25))


def test_bphz_analytic_at_three_tenths():
    assert check_analytic_condition(bphz_map(character(7), 3, 1), GAMMA).passed


def test_perturbed_matrix_fails_cointeraction_with_location():
    M = bphz_map(character(3), 3, 1).perturbed(F(bb), F(b), 1)
    rep = check_cointeraction(M, 3)
    assert not rep.passed
    # the perturbed column is invisible on 1[1[]] itself (degree-2 flexibility); the first
    # witness is the smallest tree that contains it
    assert rep.counterexample["tree"] == "0[1[1[]]]"
    assert rep.counterexample["difference"]


def test_analytic_condition_rejects_growth():
    grow = b_plus([a], 0)
    M = RenormMatrix.from_tree_map(2, 1, lambda t: fc(grow) if t == a else fc(t))
    rep = check_analytic_condition(M, GAMMA)
    assert not rep.passed
    assert rep.counterexample[0]["reason"] == "node count grows"


def test_analytic_condition_rejects_rougher_terms():
    M = RenormMatrix.from_tree_map(2, 1, lambda t: fc(t, b) if t == a else fc(t))
    assert check_analytic_condition(M, GAMMA).counterexample[0]["reason"] == "less regular"


def test_adjoint_and_translation_coefficients():
    v = BphzCharacter({b: Fraction(-3, 4)})
    M = bphz_map(v, 3, 1)
    assert M.adjoint().adjoint() == M
    assert M.adjoint().entry(F(b), F(a)) == Fraction(-3, 4)
    assert (b, Fraction(-3, 4)) in translation_coeffs(M, a)
    assert translation_coeffs(RenormMatrix.identity(2, 1), a) == [(a, 1)]


def test_bar_map_on_two_letter_word():
    v = BphzCharacter({b: 2})
    Mbar = bar_map(bphz_map(v, 3, 1), GAMMA)
    assert Mbar(wc(())) == wc(())
    assert Mbar.word((b, b)) == wc((b, b), (2, (a, b)), (2, (b, a)), (4, (a, a)))


def test_bar_map_refuses_non_tree_images():
    M = RenormMatrix.from_tree_map(2, 1, lambda t: fc(t, F(b, b)) if t == bb else fc(t))
    with pytest.raises(UnacceptedMapError):
        BarMap(M)


@pytest.mark.parametrize("seed", [0, 5])
def test_hk_square_for_bphz(seed):
    assert check_hk_square(bphz_map(character(seed), 3, 1), 3).passed


def test_local_map_example_single_node_correction():
    R = LocalRule({bb: fc(bb, (3, a))}, GAMMA)
    M, Mc = local_map(R, 3, 1)
    assert M.tree_image(bb) == fc(bb, (3, a))
    assert Mc.tree_image(bb) == fc(bb)
    assert M.tree_image(b) == fc(b)


def test_local_rule_load_time_validation():
    with pytest.raises(RuleError):
        LocalRule({b: fc(b, b_plus([a], 0))}, GAMMA)
    with pytest.raises(RuleError):
        LocalRule({bb: fc((2, bb))}, GAMMA)
    with pytest.raises(RuleError):
        LocalRule({bb: fc(bb, F(a, a))}, GAMMA)
    with pytest.raises(RuleError):
        LocalRule({decode("1[0[]]"): fc(decode("1[0[]]"), b)}, GAMMA)
    same_size = decode("0[1[]]")
    with pytest.raises(RuleError):
        LocalRule({bb: fc(bb, same_size)}, GAMMA)
    LocalRule({bb: fc(bb, same_size)}, GAMMA, mode="loose")


def test_admissibility_readings_recorded_by_oracle():
    assert check_admissible(LocalRule({}, GAMMA), 3, 1).detail["readings"] == {
        "R on left slot": True, "R on right slot": True,
    }
    rep = check_admissible(LocalRule({bb: fc(bb, (3, a))}, GAMMA), 3, 1)
    assert rep.detail["readings"] == {"R on left slot": False, "R on right slot": False}
    assert rep.counterexample["R on left slot"]["tree"] == "1[1[]]"


def test_local_identities_force_trivial_rule():
    """A nontrivial correction breaks the three-way identities; found on the smallest tree above it."""
    R = LocalRule({bb: fc(bb, (3, a))}, GAMMA)
    M, Mc = local_map(R, 3, 1)
    rep = check_cointeraction(M, 3, Mc)
    assert not rep.passed
    assert rep.detail["identities"] == {
        "(M x M) D = D M": False, "D M = (M x M°) D": False, "D M° = (M° x M°) D": False,
    }


def test_top_degree_single_node_corrections_cointeract():
    top = decode("1[1[1[]]]")
    M, Mc = local_map(LocalRule({top: fc(top, (Fraction(5, 2), a))}, GAMMA), 3, 1)
    rep = check_cointeraction(M, 3, Mc)
    assert rep.detail["identities"]["(M x M) D = D M"]
    assert rep.detail["identities"]["D M° = (M° x M°) D"]
    assert not rep.detail["identities"]["D M = (M x M°) D"]


@given(st.integers(0, 10_000))
def test_root_extraction_rule_reproduces_bphz(seed):
    v = character(seed)
    M, _ = local_map(root_extraction_rule(v, 3, 1, GAMMA), 3, 1)
    assert M == bphz_map(v, 3, 1)


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_composition_of_bphz_maps_stays_accepted(s1, s2):
    A, B = bphz_map(character(s1), 3, 1), bphz_map(character(s2), 3, 1)
    C = compose(A, B)
    assert check_multiplicative(C).passed
    assert check_cointeraction(C, 3).passed
    for t in enumerate_trees(3, 1):
        assert C(fc(t)) == A(B(fc(t)))


def test_loaders(tmp_path):
    cpath = tmp_path / "v.json"
    cpath.write_text(json.dumps({"1[]": "2", "1[1[]]": "-1/3"}))
    v = load_character_file(str(cpath), 1)
    assert v(bb) == Fraction(-1, 3)
    assert BphzCharacter.from_json(v.to_json()).values == v.values
    rpath = tmp_path / "r.json"
    rpath.write_text(json.dumps({"1[1[]]": fh.comb_to_json(fc(bb, (3, a)))}))
    R = load_rule_file(str(rpath), GAMMA, d=1)
    assert R.image(bb) == fc(bb, (3, a))
    assert LocalRule.from_json(R.to_json(), GAMMA).table == R.table


def test_matrix_json_is_deterministic():
    M = bphz_map(character(1), 3, 1)
    assert json.dumps(M.to_json()) == json.dumps(bphz_map(character(1), 3, 1).to_json())
