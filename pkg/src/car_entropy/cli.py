"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 invalid spec or state, 3 a
mathematical invariant was violated.

Subcommands take ``key=value`` parameters, e.g.::

    car-entropy gen tracial n=3 I=1,2 J=2,3 --out tracial.state
    car-entropy gen prop4 spec.txt --out mix.state
    car-entropy ssa mix.state I=1,2 J=2,3 --witness
    car-entropy expect mix.state N=1,2 --out reduced.state
    car-entropy verify all n=4 samples=50 seed=0
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from car_entropy.car_core import InvalidStateError, ModeSet, StateDensity, max_modes
from car_entropy.entropy import FAITHFUL_FLOOR, SSA_TOL, regularize, ssa_report
from car_entropy.fileio import (
    SpecFormatError,
    format_operator,
    format_state,
    parse_int_list,
    read_family_spec,
    read_operator,
    read_state,
)
from car_entropy.states import (
    MonomialSpecError,
    build_mixture_state,
    build_monomial_state,
    odd_cross_witness,
    product_extension,
    random_even_state,
    random_faithful_state,
    tracial_state,
    validate_state,
)
from car_entropy.subalgebra import RegionPair, conditional_expectation
from car_entropy.verify import run_suite

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_VIOLATION = 0, 1, 2, 3
FAMILIES = ("prop4", "prop5", "random", "tracial", "product")
SUITE_NAMES = ("core", "expect", "entropy", "families", "all")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    n: int | None = None
    I: list[int] | None = None
    J: list[int] | None = None
    tol_spec: float = SSA_TOL
    tol_res: float = 1e-6
    floor: float = FAITHFUL_FLOOR
    seed: int = 0

    def regions(self) -> RegionPair:
        if self.n is None or self.I is None or self.J is None:
            raise UsageError("need n=, I= and J=")
        if self.n > max_modes():
            raise UsageError(f"n={self.n} exceeds the cap of {max_modes()} modes")
        try:
            return RegionPair.from_lists(self.I, self.J, self.n)
        except ValueError as exc:
            raise UsageError(str(exc)) from None


def _split_params(tokens: list[str]) -> tuple[list[str], dict[str, str]]:
    positional, params = [], {}
    for tok in tokens:
        if "=" in tok:
            key, _, value = tok.partition("=")
            params[key] = value
        else:
            positional.append(tok)
    return positional, params


def _config(args, params: dict[str, str]) -> RunConfig:
    cfg = RunConfig(tol_spec=args.tol_spec, tol_res=args.tol_res, floor=args.floor)
    try:
        if "n" in params:
            cfg.n = int(params.pop("n"))
        if "I" in params:
            cfg.I = parse_int_list(params.pop("I"))
        if "J" in params:
            cfg.J = parse_int_list(params.pop("J"))
        if "seed" in params:
            cfg.seed = int(params.pop("seed"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _emit(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _print_report(D: StateDensity, regions: RegionPair, cfg: RunConfig) -> int:
    rep = ssa_report(D, regions, floor=cfg.floor)
    sys.stdout.write(rep.to_text())
    if rep.residual is None:
        print(f"equality={rep.NOT_EVALUATED}")
    else:
        print(f"equality={'true' if rep.residual <= cfg.tol_res else 'false'}")
    if rep.gap > cfg.tol_spec:
        print(f"error: SSA violated (gap {rep.gap:.3e} > {cfg.tol_spec:g})", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    positional, params = _split_params(args.params)
    cfg = _config(args, params)
    family = args.family
    if family in ("prop4", "prop5"):
        if len(positional) != 1:
            raise UsageError(f"gen {family} needs exactly one spec file")
        spec = read_family_spec(positional[0])
        if spec.kind != family:
            raise SpecFormatError(f"spec file describes a {spec.kind} family, not {family}")
        regions = spec.regions
        if family == "prop4":
            D = build_mixture_state(spec.mixture)
        else:
            res = build_monomial_state(spec.terms, regions)
            print(f"hermitian_delta={res.raw_hermitian_delta:.6e}")
            print("effective_alpha=" + ",".join(f"{a:.12e}" for a in res.effective_alphas))
            if not res.valid:
                print(f"error: invalid state: {res.reason}", file=sys.stderr)
                return EXIT_INVALID
            print(f"commutator_I_J={res.commutator_i_j:.6e}")
            print(f"commutator_D_int={res.commutator_d_int:.6e}")
            print(f"product_identity={res.product_identity:.6e}")
            D = res.state
    else:
        if positional:
            raise UsageError(f"gen {family} takes key=value parameters only")
        regions = cfg.regions()
        union = regions.union
        if family == "tracial":
            D = tracial_state(union)
        elif family == "random":
            floor = float(params.pop("floor")) if "floor" in params else None
            D = random_faithful_state(union, cfg.seed, floor)
        else:
            rng = np.random.default_rng(cfg.seed)
            parts = [regions.I_minus_J, regions.intersection, regions.J_minus_I]
            D = product_extension([random_even_state(R, rng) for R in parts if len(R)])
    if params:
        raise UsageError(f"unknown parameters: {', '.join(sorted(params))}")
    out = args.out or f"{family}.state"
    _emit(out, format_state(D))
    sys.stdout.write(validate_state(D.op, D.region, floor=cfg.floor).to_text())
    return _print_report(D, regions, cfg)


def cmd_ssa(args) -> int:
    positional, params = _split_params(args.params)
    cfg = _config(args, params)
    if len(positional) != 1 or params:
        raise UsageError("usage: ssa <state file> I=<list> J=<list>")
    D = read_state(positional[0])
    if cfg.n is None:
        cfg.n = D.n
    regions = cfg.regions()
    if regions.ambient != D.n or D.region != regions.union:
        raise SpecFormatError(f"state lives on {{{D.region}}}, but I u J = {{{regions.union}}}")
    if args.regularize is not None:
        D = regularize(D, args.regularize)
        print(f"regularized={args.regularize:g}")
    code = _print_report(D, regions, cfg)
    if args.witness:
        w = odd_cross_witness(D, regions)
        print(f"witness={'true' if w.found else 'false'}")
        for term in w.terms:
            print(f"witness_term={term}")
    return code


def cmd_expect(args) -> int:
    positional, params = _split_params(args.params)
    if len(positional) != 1 or "N" not in params:
        raise UsageError("usage: expect <state file> N=<list> [--out PATH]")
    X, M = read_operator(positional[0])
    try:
        N = ModeSet(parse_int_list(params.pop("N")), X.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if params:
        raise UsageError(f"unknown parameters: {', '.join(sorted(params))}")
    if not N <= M:
        raise SpecFormatError(f"N={{{N}}} is not contained in the region M={{{M}}}")
    _emit(args.out, format_operator(conditional_expectation(M, N, X), N))
    return EXIT_OK


def cmd_verify(args) -> int:
    positional, params = _split_params(args.params)
    if positional:
        raise UsageError("verify takes key=value parameters only")
    try:
        n_max = int(params.pop("n", 4))
        samples = int(params.pop("samples", 50))
        seed = int(params.pop("seed", 0))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if params:
        raise UsageError(f"unknown parameters: {', '.join(sorted(params))}")
    if not 1 <= n_max <= max_modes():
        raise UsageError(f"n must lie in [1, {max_modes()}]")
    results = run_suite(args.suite, n_max=n_max, samples=samples, seed=seed)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"summary: {len(results) - failed}/{len(results)} properties passed")
    return EXIT_OK if failed == 0 else EXIT_VIOLATION


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-spec", type=float, default=SSA_TOL, help="SSA gap tolerance")
    common.add_argument("--tol-res", type=float, default=1e-6, help="equality residual tolerance")
    common.add_argument("--floor", type=float, default=FAITHFUL_FLOOR, help="faithfulness floor")

    parser = _Parser(prog="car-entropy", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", parents=[common], help="generate a state file")
    gen.add_argument("family", choices=FAMILIES)
    gen.add_argument("params", nargs="*", help="spec file and/or key=value parameters")
    gen.add_argument("--out", help="output state file (default: <family>.state, '-' for stdout)")
    gen.set_defaults(func=cmd_gen)

    ssa = sub.add_parser("ssa", parents=[common], help="strong subadditivity report")
    ssa.add_argument("params", nargs="*", help="state file and I=, J= lists")
    ssa.add_argument("--regularize", type=float, metavar="EPS")
    ssa.add_argument("--witness", action="store_true", help="also run the odd-cross witness")
    ssa.set_defaults(func=cmd_ssa)

    exp = sub.add_parser("expect", parents=[common], help="apply a conditional expectation")
    exp.add_argument("params", nargs="*", help="state file and N= list")
    exp.add_argument("--out", help="output state file (default: stdout)")
    exp.set_defaults(func=cmd_expect)

    ver = sub.add_parser("verify", parents=[common], help="run property suites")
    ver.add_argument("suite", choices=SUITE_NAMES)
    ver.add_argument("params", nargs="*", help="n=, samples=, seed=")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"car-entropy: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpecFormatError, MonomialSpecError, InvalidStateError) as exc:
        print(f"car-entropy: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"car-entropy: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"car-entropy: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
