"""End-to-end acceptance suite at the default scale (d=1, N=4, gamma=6/25, D=6; N=3 for the iso route).

Every criterion prints one PASS/FAIL line with its tolerance before asserting.
"""

import pytest

from hkrenorm.suites import CRITERIA, SuiteConfig

CFG = SuiteConfig()
TOLERANCE = {
    1: "exact", 2: "exact", 3: "exact", 4: "exact", 5: "exact / 1e-10 float", 6: "exact / 1e-10 float",
    7: "1e-10 float", 8: "exact", 9: "every mutation must be detected",
}
TITLES = {
    1: "hopf_axioms", 2: "extraction_cointeraction", 3: "renormalisation_family", 4: "hk_square",
    5: "branched_to_anisotropic_transfer", 6: "g_formulas_agree", 7: "action_additivity",
    8: "isomorphism_route", 9: "mutation_sensitivity",
}


def _run(k, capsys):
    rep = CRITERIA[k](CFG)
    with capsys.disabled():
        print(f"\ncriterion {k} ({TITLES[k]}, tol {TOLERANCE[k]}): {rep.line()}")
    return rep


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6, 7, 8, 9], ids=[f"criterion_{k}_{TITLES[k]}" for k in range(1, 10)])
def test_acceptance(k, capsys):
    rep = _run(k, capsys)
    assert rep.passed, rep.to_json()
