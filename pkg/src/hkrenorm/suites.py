"""Acceptance suites shared by ``verify all`` and the test-suite.

Each criterion returns one :class:`CheckReport` whose ``detail['checks']``
lists the sub-checks that make it up. Expensive objects (lifts, transfers,
bases) are cached per configuration.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from . import forest_hopf as fh
from .branched_rp import (
    BranchedRP, DriverPath, canonical_lift, check_chen, check_chen_words, check_shuffle_character,
    max_difference,
)
from .chapoton_foissy import check_basis_audit, check_commute_iso, compute_basis, iso_psi, iso_psi_inverse, tilde_map
from .lv_transfer import (
    AdditivityError, GFamily, branched_to_anisotropic, check_action_additivity, check_composite_additivity,
    check_transfer_identity, compare_bar_adjoint, compare_g, g_from_renorm_explicit, g_from_renorm_recursive,
)
from .renorm import (
    BphzCharacter, LocalRule, RenormMatrix, bphz_map, check_analytic_condition, check_cointeraction,
    check_hk_square, check_multiplicative, local_map, root_extraction_rule,
)
from .report import CheckReport
from .trees import Forest, decode, node

POLY_DRIVERS = (
    {1: ("0", "1/2", "-1", "2/3")},
    {1: ("0", "-2", "3/2")},
)


@dataclass(frozen=True)
class SuiteConfig:
    d: int = 1
    N: int = 4
    gamma: Fraction = Fraction(6, 25)
    D: int = 6
    seed: int = 0
    N_iso: int = 3
    gamma_iso: Fraction = Fraction(3, 10)
    walk_seeds: tuple = (11, 12)
    n_characters: int = 3

    def __post_init__(self):
        for n, g in ((self.N, self.gamma), (self.N_iso, self.gamma_iso)):
            if not (g * n <= 1 < g * (n + 1)):
                raise ValueError(f"truncation {n} is not the largest N with gamma*N <= 1 for gamma={g}")


def _summary(name: str, checks: list[CheckReport], **detail) -> CheckReport:
    failed = [c.name for c in checks if not c.passed]
    return CheckReport(
        name, not failed,
        detail={**detail, "subchecks": len(checks), "failed": ",".join(failed) or "none",
                "checks": [c.to_dict() for c in checks]},
        counterexample=next((c.counterexample for c in checks if not c.passed), None),
    )


def _rename(rep: CheckReport, name: str) -> CheckReport:
    return CheckReport(name, rep.passed, rep.detail, rep.counterexample)


# -------------------------------------------------------------- fixtures

@lru_cache(maxsize=None)
def characters(cfg: SuiteConfig, N: int | None = None) -> tuple:
    N = cfg.N if N is None else N
    return tuple(BphzCharacter.random(N, cfg.d, random.Random(cfg.seed * 1000 + k)) for k in range(cfg.n_characters))


def rule_top_degree(cfg: SuiteConfig) -> LocalRule:
    """Single-node corrections on two trees of top degree."""
    chain = decode("1[1[1[1[]]]]")
    bush = decode("1[1[] 1[] 1[]]")
    zero = Forest((node(0),))
    table = {
        chain: fh.fc(Forest((chain,)), (Fraction(5, 2), zero)),
        bush: fh.fc(Forest((bush,)), (Fraction(-1), zero)),
    }
    return LocalRule(table, cfg.gamma)


HAND_CHARACTER = {"1[]": "2", "1[1[]]": "-1/2", "1[1[1[]]]": "1/3"}


def rule_root_extraction(cfg: SuiteConfig) -> LocalRule:
    """Root-subtree extraction rule for a fixed hand-written character."""
    v = BphzCharacter.from_json(HAND_CHARACTER, cfg.d)
    return root_extraction_rule(v, cfg.N, cfg.d, cfg.gamma)


@lru_cache(maxsize=None)
def renorm_family(cfg: SuiteConfig) -> tuple:
    """``(label, M, Mcirc or None)`` for the BPHZ characters and the hand-written rules."""
    out = []
    for k, v in enumerate(characters(cfg)):
        out.append((f"bphz[{k}]", bphz_map(v, cfg.N, cfg.d), None))
    for label, rule in (("local[top]", rule_top_degree(cfg)), ("local[root]", rule_root_extraction(cfg))):
        M, Mc = local_map(rule, cfg.N, cfg.d)
        M.name, Mc.name = label, label + "°"
        out.append((label, M, Mc))
    return tuple(out)


def poly_driver(cfg: SuiteConfig, k: int, D: int | None = None) -> DriverPath:
    return DriverPath.polynomial(cfg.D if D is None else D, {i: [Fraction(x) for x in c] for i, c in POLY_DRIVERS[k].items()})


@lru_cache(maxsize=None)
def lift_poly(cfg: SuiteConfig, k: int, N: int | None = None, gamma=None) -> BranchedRP:
    return canonical_lift(poly_driver(cfg, k), cfg.N if N is None else N, cfg.gamma if gamma is None else gamma, "exact")


@lru_cache(maxsize=None)
def lift_walk(cfg: SuiteConfig, seed: int) -> BranchedRP:
    return canonical_lift(DriverPath.random_walk(cfg.D, cfg.d, seed), cfg.N, float(cfg.gamma), "float")


@lru_cache(maxsize=None)
def transfer(X: BranchedRP):
    return branched_to_anisotropic(X)


def random_g(X: BranchedRP, seed: int, scale: float = 0.1) -> GFamily:
    rng = np.random.default_rng(seed)
    paths = {}
    for t in X.trees:
        inc = rng.normal(0.0, scale / 2 ** (X.D / 2), X.n - 1)
        paths[t] = np.concatenate([[0.0], np.cumsum(inc)])
    return GFamily(paths, X.D, X.field)


# -------------------------------------------------------------- criteria

def criterion_1(cfg: SuiteConfig) -> CheckReport:
    n = cfg.N
    checks = [
        fh.check_coassociativity(n, cfg.d), fh.check_antipode(n, cfg.d),
        fh.check_coproduct_multiplicative(n, cfg.d), fh.check_cut_oracle(n, cfg.d),
    ]
    return _summary("criterion_1 hopf_axioms", checks, n_max=n, tol="exact")


def criterion_2(cfg: SuiteConfig) -> CheckReport:
    checks = [fh.check_extraction_oracle(cfg.N, cfg.d), fh.check_cointeract_13_2_4(3, cfg.d)]
    return _summary("criterion_2 extraction_cointeraction", checks, n_max=3, tol="exact")


def criterion_3(cfg: SuiteConfig) -> CheckReport:
    checks = []
    for label, M, Mc in renorm_family(cfg):
        checks.append(_rename(check_multiplicative(M), f"multiplicative[{label}]"))
        checks.append(_rename(check_cointeraction(M, cfg.N), f"cointeraction[{label}]"))
        checks.append(_rename(check_analytic_condition(M, cfg.gamma), f"analytic[{label}]"))
        if Mc is not None:
            full = check_cointeraction(M, cfg.N, Mc)
            for ident, ok in full.detail["identities"].items():
                if ident.startswith("(M x M)"):
                    continue
                checks.append(CheckReport(
                    f"local_identity[{label}: {ident}]", ok,
                    counterexample=None if ok else full.detail["failures"][ident],
                ))
    return _summary("criterion_3 renormalisation_family", checks, n_max=cfg.N, tol="exact")


def criterion_4(cfg: SuiteConfig) -> CheckReport:
    checks = []
    for label, M, _ in renorm_family(cfg):
        if M.accepted(cfg.gamma):
            checks.append(_rename(check_hk_square(M, 3), f"hk_square[{label}]"))
    return _summary("criterion_4 hairer_kelly_square", checks, n_max=3, tol="exact")


def criterion_5(cfg: SuiteConfig) -> CheckReport:
    checks = []
    X0 = lift_poly(cfg, 0)
    checks.append(_rename(check_chen(X0, "all"), "lift_chen_all_triples[poly0]"))
    for k in range(len(POLY_DRIVERS)):
        X = lift_poly(cfg, k)
        Xb = transfer(X)
        checks.append(_rename(check_transfer_identity(X, Xb), f"transfer[poly{k}]"))
        checks.append(_rename(check_chen_words(Xb, "adjacent"), f"lv_chen[poly{k}]"))
        checks.append(_rename(check_shuffle_character(Xb), f"lv_shuffle[poly{k}]"))
    for s in cfg.walk_seeds:
        X = lift_walk(cfg, s)
        Xb = transfer(X)
        checks.append(_rename(check_transfer_identity(X, Xb), f"transfer[walk{s}]"))
        checks.append(_rename(check_chen_words(Xb, "all"), f"lv_chen[walk{s}]"))
        checks.append(_rename(check_shuffle_character(Xb), f"lv_shuffle[walk{s}]"))
    return _summary("criterion_5 transfer", checks, n_max=cfg.N, tol="exact (poly) / 1e-10 (walk)")


def _level_one(M_label: str, v: BphzCharacter, X: BranchedRP, g: GFamily) -> CheckReport:
    """``g^{t}`` increment equals ``v(t) <X, 0[]>`` for single nodes ``t``."""
    z = node(0)
    worst = 0.0
    for t in X.trees:
        if t.size != 1 or t.dec == 0:
            continue
        expect = X.field.scalar(v(t)) * X.values[z][0, :]
        worst = max(worst, float(np.max(np.abs(g.paths[t] - expect))))
    return CheckReport(f"level_one[{M_label}]", worst <= X.field.tol, detail={"max_difference": worst})


def criterion_6(cfg: SuiteConfig) -> CheckReport:
    checks = []
    exploratory = {}
    family = renorm_family(cfg)
    chars = characters(cfg)
    cases = [(lift_poly(cfg, 0), "poly0", family), (lift_poly(cfg, 1), "poly1", family[:1])]
    cases += [(lift_walk(cfg, s), f"walk{s}", family) for s in cfg.walk_seeds]
    for X, xl, maps in cases:
        Xb = transfer(X)
        for label, M, _ in maps:
            rec = g_from_renorm_recursive(M, X, Xb)
            exp = g_from_renorm_explicit(M, X, Xb)
            checks.append(_rename(compare_g(exp, rec), f"explicit_vs_recursive[{label},{xl}]"))
            if label.startswith("bphz"):
                v = chars[int(label[5:-1])]
                checks.append(_level_one(f"{label},{xl}", v, X, rec))
            exploratory[f"{label},{xl}"] = compare_bar_adjoint(M, X, rec, Xb)["max_deviation"]
    rep = _summary("criterion_6 g_formulas", checks, tol="exact (poly) / 1e-10 (walk)")
    rep.detail["exploratory_bar_adjoint_max_deviation"] = max(exploratory.values())
    return rep


def criterion_7(cfg: SuiteConfig) -> CheckReport:
    checks = []
    family = renorm_family(cfg)
    for s in cfg.walk_seeds:
        X = lift_walk(cfg, s)
        checks.append(_rename(check_action_additivity(random_g(X, s), random_g(X, s + 100), X), f"action_additivity[walk{s}]"))
        checks.append(_rename(check_composite_additivity(family[0][1], family[1][1], X), f"composite_additivity[walk{s}]"))
    return _summary("criterion_7 action_additivity", checks, tol=1e-10)


@lru_cache(maxsize=None)
def iso_basis(cfg: SuiteConfig):
    return compute_basis(cfg.N_iso, cfg.d)


def criterion_8(cfg: SuiteConfig) -> CheckReport:
    B = iso_basis(cfg)
    checks = [check_basis_audit(B)]
    X = lift_poly(cfg, 0, cfg.N_iso, cfg.gamma_iso)
    Y = iso_psi(X, B)
    checks.append(_rename(check_chen_words(Y, "all"), "iso_chen"))
    checks.append(_rename(check_shuffle_character(Y), "iso_shuffle"))
    rt = max_difference(iso_psi_inverse(Y, B, X), X)
    checks.append(CheckReport("iso_round_trip", rt == 0, detail={"max_difference": rt}))
    maps = [("identity", RenormMatrix.identity(cfg.N_iso, cfg.d))]
    maps += [(f"bphz[{k}]", bphz_map(v, cfg.N_iso, cfg.d)) for k, v in enumerate(characters(cfg, cfg.N_iso))]
    for label, M in maps:
        checks.append(_rename(check_commute_iso(M, X, B), f"commute_iso[{label}]"))
    return _summary("criterion_8 isomorphism", checks, N=cfg.N_iso, tol="exact", flagged=B.flagged)


# ------------------------------------------------------------- mutations

def _detected(fn: Callable[[], CheckReport], name: str) -> CheckReport:
    """A mutation is detected if the check fails with a counterexample or raises a domain error."""
    try:
        rep = fn()
    except (AdditivityError, ArithmeticError, ValueError) as exc:
        return CheckReport(f"mutation[{name}]", True, detail={"raised": type(exc).__name__})
    ok = (not rep.passed) and rep.counterexample is not None
    return CheckReport(f"mutation[{name}]", ok, detail={"check_failed": not rep.passed},
                       counterexample=None if ok else "mutation went unnoticed")


def criterion_9(cfg: SuiteConfig) -> CheckReport:
    checks = []
    target = decode("1[1[]]")

    def bad_coproduct(f):
        out = fh.coproduct_forest(f)
        if f == Forest((target,)):
            out = fh.TensorComb(out)
            out.add_term((Forest((node(1),)), Forest((node(1),))), 1)
        return out

    checks.append(_detected(lambda: fh.check_coassociativity(cfg.N, cfg.d, bad_coproduct), "1:coproduct"))
    checks.append(_detected(
        lambda: fh.check_cut_oracle(cfg.N, cfg.d, lambda t: bad_coproduct(Forest((t,)))), "1:cut_oracle"))

    def bad_extraction(f):
        out = fh.extraction_forest(f)
        if f == Forest((target,)):
            out = fh.TensorComb(out)
            out.add_term((Forest((node(1),)), Forest((decode("0[1[]]"),))), 1)
        return out

    checks.append(_detected(lambda: fh.check_cointeract_13_2_4(3, cfg.d, bad_extraction), "2:extraction"))

    label, M, _ = renorm_family(cfg)[0]
    col = Forest((decode("1[1[]]"),))
    Mbad = M.perturbed(col, Forest((node(0),)), 1)
    checks.append(_detected(lambda: check_cointeraction(Mbad, cfg.N), "3:renorm_entry"))
    checks.append(_detected(lambda: check_hk_square(M.perturbed(col, Forest((decode("0[0[]]"),)), 1), 3), "4:renorm_entry"))

    X = lift_poly(cfg, 0)
    Xbad = X.perturbed(target, 3, 9, Fraction(1, 7))
    chen = check_chen(Xbad, "all")
    localized = chen.counterexample is not None and all(
        (c["s"], c["u"]) == (3, 9) or (c["u"], c["t"]) == (3, 9) or (c["s"], c["t"]) == (3, 9)
        for c in chen.counterexample
    )
    checks.append(CheckReport("mutation[5:chen_localized]", (not chen.passed) and localized,
                              detail={"defects": len(chen.counterexample or [])}))
    checks.append(_detected(lambda: check_transfer_identity(Xbad, branched_to_anisotropic(Xbad)), "5:path_entry"))
    Xb = transfer(X)
    Xb_bad_vals = list(Xb.values)
    k = Xb.space.index[(target,)]
    Xb_bad_vals[k] = Xb_bad_vals[k].copy()
    Xb_bad_vals[k][2, 5] += 1
    from .branched_rp import AnisotropicRP

    Xb_bad = AnisotropicRP(Xb.space, Xb.alphabet, Xb.D, Xb.field, Xb_bad_vals)
    checks.append(_detected(lambda: check_transfer_identity(X, Xb_bad), "5:anisotropic_entry"))

    W = lift_walk(cfg, cfg.walk_seeds[0])
    Wb = transfer(W)
    g_rec = g_from_renorm_recursive(M, W, Wb)
    g_bad = GFamily(dict(g_rec.paths), g_rec.D, g_rec.field)
    g_bad.paths[target] = g_bad.paths[target].copy()
    g_bad.paths[target][10] += 1e-6
    checks.append(_detected(lambda: _with_counterexample(compare_g(g_rec, g_bad)), "6:g_entry"))

    g1, g2 = random_g(W, 1), random_g(W, 2)
    g2_bad = GFamily(dict(g2.paths), g2.D, g2.field)
    g2_bad.paths[target] = g2_bad.paths[target].copy()
    g2_bad.paths[target][7:] += 1e-6

    def action_mut():
        from .lv_transfer import g_action

        lhs = g_action(g2, g_action(g1, W))
        rhs = g_action(g1 + g2_bad, W)
        m = max_difference(lhs, rhs)
        return CheckReport("action_additivity", m <= 1e-10, detail={"max_difference": m},
                           counterexample={"tree": "1[1[]]"} if m > 1e-10 else None)

    checks.append(_detected(action_mut, "7:g_entry"))

    B = iso_basis(cfg)
    Xi = lift_poly(cfg, 0, cfg.N_iso, cfg.gamma_iso)
    Mi = bphz_map(characters(cfg, cfg.N_iso)[0], cfg.N_iso, cfg.d)
    T = tilde_map(Mi, B)
    letter = next(a for a in B.letters if len(T.images[a]) > 1)
    word = next(w for w in sorted(T.images[letter], key=len) if w != (letter,))
    checks.append(_detected(lambda: check_commute_iso(Mi, Xi, B, T.dropped(letter, word)), "8:tilde_term"))
    from dataclasses import replace

    bwd = {n: [list(r) for r in m] for n, m in B.backward.items()}
    bwd[2][0][1] += 1
    checks.append(_detected(lambda: check_basis_audit(replace(B, backward=bwd)), "8:basis_entry"))
    return _summary("criterion_9 mutation_sensitivity", checks, mutations=len(checks))


def _with_counterexample(rep: CheckReport) -> CheckReport:
    if not rep.passed and rep.counterexample is None:
        rep.counterexample = {"max_difference": rep.detail.get("max_difference")}
    return rep


CRITERIA: dict[int, Callable[[SuiteConfig], CheckReport]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9,
}


def run_all(cfg: SuiteConfig | None = None, only: list[int] | None = None, echo: Callable[[str], None] | None = None) -> list[CheckReport]:
    cfg = cfg or SuiteConfig()
    out = []
    for k, fn in CRITERIA.items():
        if only and k not in only:
            continue
        rep = fn(cfg)
        if echo:
            echo(rep.line())
        out.append(rep)
    return out
