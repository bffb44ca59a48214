"""Command-line interface: ``hkrenorm <group> <action> [options]``.

Results go to stdout as JSON (sorted keys). When an output directory is set
(``--out`` or the ``HKRENORM_OUTPUT_DIR`` environment variable) the same
payload is also written there. Exit codes: 0 success, 1 failed check,
2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import forest_hopf as fh
from .branched_rp import BranchedRP, DriverPath, apply_renorm, canonical_lift, check_chen, holder_report
from .chapoton_foissy import basis_dumps, check_basis_audit, check_commute_iso, compute_basis, iso_psi
from .lv_transfer import (
    branched_to_anisotropic, check_transfer_identity, compare_bar_adjoint, compare_g, g_from_renorm_explicit,
    g_from_renorm_recursive,
)
from .renorm import (
    RenormMatrix, bphz_map, check_analytic_condition, check_cointeraction, check_multiplicative,
    load_character_file, load_rule_file, local_map,
)
from .report import CheckReport
from .tree_word_maps import arborify, psi
from .trees import TreeParseError, decode, decode_forest, encode, enumerate_trees
from .word_hopf import WeightedAlphabet, lv_admissible, shuffle_words, tree_weight, weight, wordcomb_to_json

OUTPUT_ENV = "HKRENORM_OUTPUT_DIR"


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    d: int = 1
    N: int = 4
    gamma: Fraction = Fraction(6, 25)
    grid_depth: int = 6
    mode: str = "exact"
    seed: int = 0
    character: str | None = None
    rule: str | None = None
    rule_mode: str = "strict"
    out: str | None = None

    def __post_init__(self):
        if not (self.gamma * self.N <= 1 < self.gamma * (self.N + 1)):
            raise UsageError(f"N={self.N} must be the largest integer with gamma*N <= 1 (gamma={self.gamma})")
        if self.mode not in ("exact", "float"):
            raise UsageError("mode must be exact or float")

    @classmethod
    def from_args(cls, a: argparse.Namespace) -> RunConfig:
        return cls(
            d=a.d, N=a.N, gamma=Fraction(a.gamma), grid_depth=a.depth, mode=a.mode, seed=a.seed,
            character=a.character, rule=a.rule, rule_mode=a.rule_mode, out=a.out or os.environ.get(OUTPUT_ENV),
        )

    def require_admissible(self):
        alphabet = WeightedAlphabet.of_trees(enumerate_trees(self.N, self.d), self.gamma)
        if not lv_admissible(alphabet, self.N):
            raise UsageError("alphabet weights are not admissible for the extension")


# ----------------------------------------------------------------- helpers

def _emit(cfg: RunConfig, name: str, payload, suffix: str = "json") -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, sort_keys=True, indent=1, default=str)
    if cfg.out:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out) / f"{name}.{suffix}").write_text(text + ("" if text.endswith("\n") else "\n"))
    sys.stdout.write(text + ("" if text.endswith("\n") else "\n"))


def _report_exit(cfg: RunConfig, name: str, reports: list[CheckReport]) -> int:
    _emit(cfg, name, {"passed": all(r.passed for r in reports), "reports": [r.to_dict() for r in reports]})
    return 0 if all(r.passed for r in reports) else 1


def _comb_arg(text: str, d: int):
    """A tree or a forest (space separated trees) as a ForestComb."""
    return fh.fc(decode_forest(text, d))


def _word_arg(text: str, d: int) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(decode(s, d) for s in text.split(","))


def _renorm(cfg: RunConfig) -> RenormMatrix:
    if cfg.character and cfg.rule:
        raise UsageError("give either --character or --rule, not both")
    if cfg.character:
        return bphz_map(load_character_file(cfg.character, cfg.d), cfg.N, cfg.d)
    if cfg.rule:
        M, _ = local_map(load_rule_file(cfg.rule, cfg.gamma, cfg.rule_mode, cfg.d), cfg.N, cfg.d)
        return M
    raise UsageError("a renormalisation map needs --character or --rule")


def _driver(cfg: RunConfig, a: argparse.Namespace) -> DriverPath:
    if a.driver == "walk":
        return DriverPath.random_walk(cfg.grid_depth, cfg.d, cfg.seed)
    if a.driver == "constant":
        return DriverPath.constant(cfg.grid_depth, cfg.d)
    coeffs = {}
    for spec in a.coeffs or ["1:0,1/2,-1,2/3"]:
        comp, _, cs = spec.partition(":")
        coeffs[int(comp)] = [Fraction(c) for c in cs.split(",")]
    return DriverPath.polynomial(cfg.grid_depth, coeffs)


def _load_path(a: argparse.Namespace, cfg: RunConfig) -> BranchedRP:
    if a.path:
        return BranchedRP.from_json(json.loads(Path(a.path).read_text()))
    return canonical_lift(_driver(cfg, a), cfg.N, cfg.gamma, cfg.mode)


# ---------------------------------------------------------------- commands

def cmd_trees(cfg: RunConfig, a) -> int:
    if a.action == "enumerate":
        n = a.n if a.n is not None else cfg.N
        trees = enumerate_trees(n, cfg.d)
        _emit(cfg, "trees", {"count": len(trees), "trees": [encode(t) for t in trees]})
    else:
        t = decode(a.text, cfg.d)
        _emit(cfg, "tree", {"canonical": encode(t), "size": t.size, "zeros": t.zeros,
                            "weight": str(tree_weight(t, cfg.gamma))})
    return 0


def cmd_hopf(cfg: RunConfig, a) -> int:
    if a.action == "convolve":
        X = fh.Character(cfg.N, {decode(k, cfg.d): Fraction(v) for k, v in json.loads(Path(a.x).read_text()).items()})
        Y = fh.Character(cfg.N, {decode(k, cfg.d): Fraction(v) for k, v in json.loads(Path(a.y).read_text()).items()})
        Z = fh.convolve(X, Y)
        _emit(cfg, "convolve", {encode(t): str(Z(t)) for t in enumerate_trees(cfg.N, cfg.d)})
        return 0
    x = _comb_arg(a.text, cfg.d)
    if a.action == "coproduct":
        _emit(cfg, "coproduct", fh.tensor_to_json(fh.coproduct_ck(x)))
    elif a.action == "antipode":
        _emit(cfg, "antipode", fh.comb_to_json(fh.antipode(x)))
    else:
        _emit(cfg, "extract", fh.tensor_to_json(fh.coproduct_extraction(x)))
    return 0


def cmd_words(cfg: RunConfig, a) -> int:
    u = _word_arg(a.u, cfg.d)
    if a.action == "shuffle":
        _emit(cfg, "shuffle", wordcomb_to_json(shuffle_words(u, _word_arg(a.v or "", cfg.d))))
    else:
        alphabet = WeightedAlphabet.of_trees(enumerate_trees(cfg.N, cfg.d), cfg.gamma)
        _emit(cfg, "weight", {"word": [encode(t) for t in u], "omega": str(weight(u, alphabet))})
    return 0


def cmd_maps(cfg: RunConfig, a) -> int:
    x = _comb_arg(a.text, cfg.d)
    fn = psi if a.action == "psi" else arborify
    _emit(cfg, a.action, wordcomb_to_json(fn(x)))
    return 0


def cmd_renorm(cfg: RunConfig, a) -> int:
    M = _renorm(cfg)
    if a.action == "build":
        _emit(cfg, "renorm", M.to_json())
        return 0
    if a.action == "check":
        reps = [check_multiplicative(M), check_cointeraction(M, cfg.N), check_analytic_condition(M, cfg.gamma)]
        return _report_exit(cfg, "renorm-check", reps)
    if not M.accepted(cfg.gamma):
        raise UsageError("renormalisation map fails cointeraction or the analytic condition")
    X = _load_path(a, cfg)
    _emit(cfg, "renormalised-path", apply_renorm(M, X).to_json())
    return 0


def cmd_rp(cfg: RunConfig, a) -> int:
    X = _load_path(a, cfg)
    if a.action == "lift":
        _emit(cfg, "path", X.to_json())
        return 0
    if a.action == "chen":
        return _report_exit(cfg, "chen", [check_chen(X, a.triples)])
    _emit(cfg, "holder", holder_report(X, cfg.gamma))
    return 0


def cmd_transfer(cfg: RunConfig, a) -> int:
    cfg.require_admissible()
    X = _load_path(a, cfg)
    Xb = branched_to_anisotropic(X)
    if a.action == "run":
        return _report_exit(cfg, "transfer", [check_transfer_identity(X, Xb)])
    M = _renorm(cfg)
    if not M.accepted(cfg.gamma):
        raise UsageError("renormalisation map fails cointeraction or the analytic condition")
    out = {}
    gs = {}
    if a.formula in ("recursive", "both"):
        gs["recursive"] = g_from_renorm_recursive(M, X, Xb)
    if a.formula in ("explicit", "both"):
        gs["explicit"] = g_from_renorm_explicit(M, X, Xb)
    first = next(iter(gs.values()))
    reports = []
    if len(gs) == 2:
        reports.append(compare_g(gs["explicit"], gs["recursive"]))
    out["exploratory_bar_adjoint"] = compare_bar_adjoint(M, X, first, Xb)
    out["reports"] = [r.to_dict() for r in reports]
    out["passed"] = all(r.passed for r in reports)
    _emit(cfg, "g-table", first.to_csv(), suffix="csv")
    _emit(cfg, "g-report", out)
    return 0 if out["passed"] else 1


def cmd_iso(cfg: RunConfig, a) -> int:
    B = compute_basis(cfg.N, cfg.d)
    if a.action == "basis":
        rep = check_basis_audit(B)
        _emit(cfg, "basis", basis_dumps(B))
        return 0 if rep.passed else 1
    X = _load_path(a, cfg)
    if a.action == "transfer":
        Y = iso_psi(X, B)
        vals = {" ".join(encode(t) for t in w) or "()": Y.field.fmt(Y.values[k][0, -1]) for k, w in enumerate(Y.space.words)}
        _emit(cfg, "iso-transfer", {"s": "0", "t": "1", "values": vals})
        return 0
    M = _renorm(cfg) if (cfg.character or cfg.rule) else RenormMatrix.identity(cfg.N, cfg.d)
    return _report_exit(cfg, "commute-iso", [check_commute_iso(M, X, B)])


def cmd_verify(cfg: RunConfig, a) -> int:
    from .suites import SuiteConfig, run_all

    scfg = SuiteConfig(d=cfg.d, N=cfg.N, gamma=cfg.gamma, D=cfg.grid_depth, seed=cfg.seed)
    only = a.criteria or None
    reps = run_all(scfg, only, echo=lambda line: print(line, file=sys.stderr))
    return _report_exit(cfg, "verify", reps)


COMMANDS = {
    "trees": cmd_trees, "hopf": cmd_hopf, "words": cmd_words, "maps": cmd_maps, "renorm": cmd_renorm,
    "rp": cmd_rp, "transfer": cmd_transfer, "iso": cmd_iso, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--d", type=int, default=1, help="largest decoration")
    common.add_argument("--N", type=int, default=None, help="truncation (default 4, or 3 for iso)")
    common.add_argument("--gamma", default=None, help="regularity (default 0.24, or 0.3 for iso)")
    common.add_argument("--depth", type=int, default=6, help="dyadic grid depth D")
    common.add_argument("--mode", choices=["exact", "float"], default="exact")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--character", help="BPHZ character JSON {tree: rational}")
    common.add_argument("--rule", help="local rule JSON {tree: ForestComb}")
    common.add_argument("--rule-mode", choices=["strict", "loose"], default="strict")
    common.add_argument("--out", help=f"output directory (env {OUTPUT_ENV})")

    path_opts = argparse.ArgumentParser(add_help=False)
    path_opts.add_argument("--path", help="rough path JSON; lifted from --driver if omitted")
    path_opts.add_argument("--driver", choices=["poly", "walk", "constant"], default="poly")
    path_opts.add_argument("--coeffs", action="append", help="component:c0,c1,... (ascending, rational)")

    p = argparse.ArgumentParser(prog="hkrenorm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="group", required=True)

    g = sub.add_parser("trees", parents=[common])
    g.add_argument("action", choices=["enumerate", "encode"])
    g.add_argument("text", nargs="?", default="")
    g.add_argument("--n", type=int, default=None)

    g = sub.add_parser("hopf", parents=[common])
    g.add_argument("action", choices=["coproduct", "antipode", "convolve", "extract"])
    g.add_argument("text", nargs="?", default="")
    g.add_argument("--x")
    g.add_argument("--y")

    g = sub.add_parser("words", parents=[common])
    g.add_argument("action", choices=["shuffle", "weight"])
    g.add_argument("u", help="comma-separated tree letters")
    g.add_argument("v", nargs="?")

    g = sub.add_parser("maps", parents=[common])
    g.add_argument("action", choices=["psi", "arborify"])
    g.add_argument("text")

    g = sub.add_parser("renorm", parents=[common, path_opts])
    g.add_argument("action", choices=["build", "check", "apply"])

    g = sub.add_parser("rp", parents=[common, path_opts])
    g.add_argument("action", choices=["lift", "chen", "holder"])
    g.add_argument("--triples", choices=["all", "adjacent"], default="all")

    g = sub.add_parser("transfer", parents=[common, path_opts])
    g.add_argument("action", choices=["run", "g-table"])
    g.add_argument("--formula", choices=["recursive", "explicit", "both"], default="both")

    g = sub.add_parser("iso", parents=[common, path_opts])
    g.add_argument("action", choices=["basis", "transfer", "check"])

    g = sub.add_parser("verify", parents=[common])
    g.add_argument("action", choices=["all"])
    g.add_argument("--criteria", type=int, nargs="*", help="subset of criteria 1-9")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    iso = a.group == "iso"
    if a.N is None:
        a.N = 3 if iso else 4
    if a.gamma is None:
        a.gamma = "3/10" if iso else "6/25"
    try:
        cfg = RunConfig.from_args(a)
        return COMMANDS[a.group](cfg, a)
    except BrokenPipeError:
        # downstream closed the pipe (e.g. ``| head``); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except (UsageError, TreeParseError, ValueError, KeyError, FileNotFoundError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
