import json
import random
from fractions import Fraction

import numpy as np
import numpy.polynomial.polynomial as npoly
import pytest
from hypothesis import given, strategies as st

from hkrenorm import forest_hopf as fh
from hkrenorm.branched_rp import (
    BranchedRP, DriverError, DriverPath, Field, GridMismatchError, apply_renorm, canonical_lift, check_chen,
    check_character, holder_report, max_difference,
)
from hkrenorm.renorm import BphzCharacter, RenormMatrix, UnacceptedMapError, bphz_map
from hkrenorm.trees import Forest, decode, enumerate_trees, node

GAMMA = Fraction(3, 10)
POLY = {1: (0, Fraction(1, 2), -1, Fraction(2, 3))}


def tree_factorial(t):
    out = t.size
    for c in t.children:
        out *= tree_factorial(c)
    return out


def global_integral(t, coeffs, end):
    """``<X_.end, t>`` as a polynomial in the lower limit: children are integrated over [u, end]."""
    integrand = npoly.polyder(np.array(coeffs[t.dec], dtype=object))
    for c in t.children:
        integrand = npoly.polymul(integrand, global_integral(c, coeffs, end))
    anti = npoly.polyint(integrand)
    p = -anti
    p[0] += npoly.polyval(end, anti)
    return p


@pytest.fixture(scope="module")
def poly_lift():
    return canonical_lift(DriverPath.polynomial(3, POLY), 3, GAMMA)


def test_first_level_is_increment(poly_lift):
    x = DriverPath.polynomial(3, POLY).grid_values(1)
    X = poly_lift
    for s in range(X.n):
        for t in range(s, X.n):
            assert X.values[node(1)][s, t] == x[t] - x[s]
            assert X.values[node(0)][s, t] == Fraction(t - s, 8)


def test_linear_drivers_give_tree_factorials():
    X = canonical_lift(DriverPath.polynomial(3, {1: (0, 1)}), 4, Fraction(6, 25))
    assert X.values[decode("1[0[]]")][1, 5] == Fraction(1, 2) * Fraction(4, 8) ** 2
    for t in X.trees:
        for s, u in [(0, 8), (2, 7), (3, 3)]:
            assert X.values[t][s, u] == Fraction(u - s, 8) ** t.size / tree_factorial(t)


def test_matches_global_iterated_integrals(poly_lift):
    coeffs = {0: (Fraction(0), Fraction(1)), 1: tuple(Fraction(c) for c in POLY[1])}
    for t in poly_lift.trees:
        for s, u in [(0, 8), (1, 6), (3, 4)]:
            p = global_integral(t, coeffs, Fraction(u, 8))
            assert poly_lift.values[t][s, u] == npoly.polyval(Fraction(s, 8), p)


def test_diagonal_is_counit(poly_lift):
    for t in poly_lift.trees:
        assert not any(poly_lift.values[t][k, k] for k in range(poly_lift.n))


def test_chen_exact_and_character(poly_lift):
    rep = check_chen(poly_lift)
    assert rep.passed and rep.detail["max_defect"] == 0
    assert check_chen(poly_lift, "adjacent").passed
    assert check_character(poly_lift).passed


def test_chen_float_random_walk():
    X = canonical_lift(DriverPath.random_walk(4, 1, seed=11), 4, Fraction(6, 25), mode="float")
    rep = check_chen(X)
    assert rep.passed and rep.detail["max_defect"] <= 1e-10


def test_exact_and_float_modes_agree():
    drv = DriverPath.polynomial(3, POLY)
    a = canonical_lift(drv, 3, GAMMA)
    b = canonical_lift(drv, 3, GAMMA, mode="float")
    for t in a.trees:
        assert np.allclose(a.values[t].astype(float), b.values[t], atol=1e-12)


@given(st.sampled_from(enumerate_trees(3, 1)), st.integers(0, 8), st.integers(0, 8))
def test_perturbation_defects_are_localized(t, s, u):
    s, u = min(s, u), max(s, u)
    if s == u:
        u = s + 1 if s < 8 else s
        s = u - 1
    X = canonical_lift(DriverPath.polynomial(3, POLY), 3, GAMMA)
    rep = check_chen(X.perturbed(t, s, u, Fraction(1, 3)))
    assert not rep.passed
    for tr in rep.counterexample:
        pairs = {(tr["s"], tr["u"]), (tr["u"], tr["t"]), (tr["s"], tr["t"])}
        assert (s, u) in pairs


def test_holder_constant_and_linear():
    Z = canonical_lift(DriverPath.constant(3, 1), 3, GAMMA)
    rep = holder_report(Z)
    assert rep["1[]"] == 0 and rep["1[1[]]"] == 0
    L = canonical_lift(DriverPath.polynomial(4, {1: (0, 1)}), 3, GAMMA)
    assert holder_report(L)["1[]"] == pytest.approx(1.0)


def test_holder_sanity_band_between_depths():
    r5 = holder_report(canonical_lift(DriverPath.random_walk(5, 1, 11), 4, Fraction(6, 25), "float"))
    r6 = holder_report(canonical_lift(DriverPath.random_walk(6, 1, 11), 4, Fraction(6, 25), "float"))
    for k in r5:
        if r5[k] > 0:
            assert 0.1 < r6[k] / r5[k] < 10


def test_renorm_identity_and_bphz_node(poly_lift):
    assert max_difference(apply_renorm(RenormMatrix.identity(3, 1), poly_lift), poly_lift) == 0
    c = Fraction(-7, 3)
    Xh = apply_renorm(bphz_map(BphzCharacter({node(1): c}), 3, 1), poly_lift, GAMMA)
    assert (Xh.values[node(1)] == poly_lift.values[node(1)] + c * poly_lift.values[node(0)]).all()
    assert check_chen(Xh).passed


def test_apply_renorm_refuses_unaccepted(poly_lift):
    bad = bphz_map(BphzCharacter({node(1): 1}), 3, 1).perturbed(Forest((decode("1[1[]]"),)), Forest((node(1),)), 1)
    with pytest.raises(UnacceptedMapError):
        apply_renorm(bad, poly_lift, GAMMA)


@given(st.integers(0, 1000), st.integers(1, 7))
def test_renorm_commutes_with_convolution(seed, u):
    X = canonical_lift(DriverPath.polynomial(3, POLY), 3, GAMMA)
    M = bphz_map(BphzCharacter.random(3, 1, random.Random(seed)), 3, 1)
    trees = enumerate_trees(3, 1)

    def mstar(Z):
        return fh.compose_linear(Z, lambda t: M(fh.fc(t)), trees)

    lhs = mstar(fh.convolve(X.character(0, u), X.character(u, 8)))
    rhs = fh.convolve(mstar(X.character(0, u)), mstar(X.character(u, 8)))
    assert lhs == rhs


def test_reverse_pairs_via_antipode(poly_lift):
    fwd, back = poly_lift.character(2, 6), poly_lift.character(6, 2)
    assert back == fh.inverse(fwd, 1)
    assert fh.convolve(fwd, back) == fh.Character.counit(3)


def test_json_round_trip(poly_lift):
    data = json.loads(poly_lift.dumps())
    assert {"grid_depth", "truncation", "gamma", "entries"} <= set(data)
    assert data["entries"][0]["s"] == "0"
    again = BranchedRP.from_json(data)
    assert max_difference(again, poly_lift) == 0
    assert again.dumps() == poly_lift.dumps()


def test_lift_is_deterministic():
    a = canonical_lift(DriverPath.random_walk(3, 1, 4), 3, GAMMA)
    b = canonical_lift(DriverPath.random_walk(3, 1, 4), 3, GAMMA)
    assert a.dumps() == b.dumps()


def test_grid_and_driver_errors(poly_lift):
    with pytest.raises(DriverError):
        DriverPath.polynomial(0, POLY)
    with pytest.raises(DriverError):
        DriverPath.polynomial(3, {0: (1,)})
    with pytest.raises(DriverError):
        DriverPath(3, 1, "spline")
    other = canonical_lift(DriverPath.polynomial(2, POLY), 3, GAMMA)
    with pytest.raises(GridMismatchError):
        max_difference(poly_lift, other)
    with pytest.raises(ValueError):
        Field("interval")
