"""Command line front end: ``kpcalc verify|flow|star``.

Exit status: 0 when every check passed, 1 when a check failed, 2 for usage
or input errors.  Options may also come from KPCALC_Q, KPCALC_KAPPA,
KPCALC_DEPTH, KPCALC_LAMBDA_ORDER, KPCALC_SEED and KPCALC_OUTPUT; an explicit
flag wins over the environment.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import correspond, psdo, qpsdo, starcalc
from .coeffring import XLaurent
from .exactnum import format_rational
from .suites import SUITES, RunConfig, run_suite

ENV_PREFIX = "KPCALC_"
DEFAULTS = {"q": "3/2", "kappa": "1/2", "depth": "6", "lambda_order": "8", "seed": "0", "output": "text"}


class UsageError(Exception):
    pass


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--q", help="deformation parameter, exact rational (default 3/2)")
    p.add_argument("--kappa", help="Moyal / symbol weight, exact rational (default 1/2)")
    p.add_argument("--depth", help="truncation depth, 1..10 (default 6)")
    p.add_argument("--lambda-order", dest="lambda_order", help="sine-bracket order, even, <= 12 (default 8)")
    p.add_argument("--seed", help="seed for randomized suites (default 0)")
    p.add_argument("--output", choices=("text", "json"), help="report format (default text)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kpcalc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", help="one of: " + ", ".join(SUITES + ("all",)))
    _add_config_flags(v)

    f = sub.add_parser("flow", help="print flow right-hand sides coefficient by coefficient")
    f.add_argument("kind", choices=("kp", "qkp", "moyal", "dkp"))
    f.add_argument("n", help="flow index, 1..3")
    f.add_argument("--lax", help="JSON file with a D_q series for the qkp flow (default: sample operator)")
    _add_config_flags(f)

    s = sub.add_parser("star", help="evaluate a star product of two phase-space symbols")
    s.add_argument("product", choices=sorted(starcalc.PRODUCTS))
    s.add_argument("lhs")
    s.add_argument("rhs")
    _add_config_flags(s)
    return parser


def resolve_config(args, env=None) -> RunConfig:
    env = os.environ if env is None else env
    raw = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            raw[key] = flag
        else:
            raw[key] = env.get(ENV_PREFIX + key.upper(), default)
    try:
        return RunConfig(
            q=raw["q"],
            kappa=raw["kappa"],
            depth=int(raw["depth"]),
            lambda_order=int(raw["lambda_order"]),
            seed=int(raw["seed"]),
            output=raw["output"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# verify


def cmd_verify(suite: str, cfg: RunConfig) -> tuple[int, str]:
    if suite not in SUITES and suite != "all":
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}")
    checks = run_suite(suite, cfg)
    passed = all(c.passed for c in checks)
    header = {
        "suite": suite,
        "q": format_rational(cfg.q),
        "kappa": format_rational(cfg.kappa),
        "depth": cfg.depth,
        "lambda_order": cfg.lambda_order,
        "seed": cfg.seed,
    }
    if cfg.output == "json":
        body = json.dumps({"config": header, "passed": passed, "checks": [c.as_dict() for c in checks]},
                          indent=2, sort_keys=True)
    else:
        lines = ["verify " + " ".join(f"{k}={v}" for k, v in header.items())]
        for c in checks:
            lines.append(f"{'PASS' if c.passed else 'FAIL'}  {c.suite}/{c.name}: {c.detail}  [{c.anchor}]")
        n_fail = sum(not c.passed for c in checks)
        lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed")
        body = "\n".join(lines)
    return (0 if passed else 1), body


# ---------------------------------------------------------------------------
# flow


def _sample_qlax(depth: int, q) -> qpsdo.QOperatorSeries:
    """D_q + sum_{i>=1} x^i D_q^-i, a fixed operator for displaying q-KP flows."""
    coeffs = {i: XLaurent.monomial(i) for i in range(1, depth - 1)}
    return qpsdo.q_lax(coeffs, q, depth=depth)


def cmd_flow(kind: str, n: int, cfg: RunConfig, lax_file: str | None = None) -> tuple[int, str]:
    if not 1 <= n <= 3:
        raise UsageError(f"flow index {n} out of range 1..3")
    lines = []
    if kind == "kp":
        L = psdo.lax_kp(cfg.depth, kappa=1)
        flow = psdo.kp_flow_rhs(L, n)
        lines.append(f"KP flow {n}: L = xi + sum u[i] xi^(1-i), kappa = 1, depth {cfg.depth}")
        for p in flow.powers():
            lines.append(f"d_t{n} u[{1 - p}] = {flow.coeffs[p]}")
    elif kind in ("moyal", "dkp"):
        kappa = cfg.kappa if kind == "moyal" else Fraction(0)
        Lam = correspond.moyal_lax(cfg.depth - 2, kappa)
        flow = correspond.moyal_flow_series(Lam, n)
        name = "Moyal KP" if kind == "moyal" else "dKP"
        lines.append(f"{name} flow {n}: Lambda = lambda + sum u[i] lambda^(1-i), "
                     f"kappa = {format_rational(kappa)}, depth {cfg.depth}")
        for p in flow.powers():
            lines.append(f"d_t{n} u[{1 - p}] = {flow.coeffs[p]}")
    else:
        if lax_file:
            L = psdo.series_from_json(_load_json(lax_file))
            if not isinstance(L, qpsdo.QOperatorSeries):
                raise UsageError(f"{lax_file}: expected a series with symbol 'Dq'")
        else:
            L = _sample_qlax(cfg.depth, cfg.q)
        flow = qpsdo.qkp_flow_rhs(L, n)
        lines.append(f"q-KP flow {n}: L = {L}, q = {format_rational(L.q.q)}")
        for p in flow.powers():
            lines.append(f"d_t{n} a[{-p}] = {flow.coeffs[p]}")
        if flow.lo is not None:
            lines.append(f"(window ends at Dq^{flow.lo})")
    if cfg.output == "json":
        return 0, json.dumps({"kind": kind, "n": n, "lines": lines[1:], "title": lines[0]}, indent=2)
    return 0, "\n".join(lines)


# ---------------------------------------------------------------------------
# star


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _load_symbol(path: str) -> starcalc.PhaseSymbol:
    try:
        return starcalc.PhaseSymbol.from_json(_load_json(path))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_star(product: str, lhs: str, rhs: str, cfg: RunConfig, text: bool = False) -> tuple[int, str]:
    """JSON output unless ``text`` is requested explicitly."""
    f, g = _load_symbol(lhs), _load_symbol(rhs)
    try:
        out = starcalc.star_product(product, f, g, cfg.q, cfg.kappa)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if text:
        return 0, str(out)
    return 0, json.dumps(out.to_json(), indent=2)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    try:
        cfg = resolve_config(args)
        if args.command == "verify":
            code, text = cmd_verify(args.suite, cfg)
        elif args.command == "flow":
            try:
                n = int(args.n)
            except ValueError:
                raise UsageError(f"flow index {args.n!r} is not an integer") from None
            code, text = cmd_flow(args.kind, n, cfg, args.lax)
        else:
            explicit = args.output or os.environ.get(ENV_PREFIX + "OUTPUT")
            code, text = cmd_star(args.product, args.lhs, args.rhs, cfg, text=explicit == "text")
    except UsageError as exc:
        print(f"kpcalc: error: {exc}", file=sys.stderr)
        return 2
    print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
