"""Seeded verification suites shared by the command line and the tests."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from . import correspond, psdo, qpsdo, starcalc
from .coeffring import TimesPoly, XLaurent, kp_hirota_residual, schur_partition
from .exactnum import (
    QValue,
    binomial_identity_grid,
    format_rational,
    parse_rational,
    qexp_coeffs,
    qexp_log_coeffs,
    qexp_recip_coeffs,
    series_mul,
)
from .psdo import OperatorSeries
from .qpsdo import QOperatorSeries

SUITES = ("adjoint", "assoc", "correspondence", "dickey", "flows", "hirota", "jacobi", "leibniz",
          "n24", "q-dickey", "qexp")


@dataclass(frozen=True)
class RunConfig:
    q: Fraction = Fraction(3, 2)
    kappa: Fraction = Fraction(1, 2)
    depth: int = 6
    lambda_order: int = 8
    seed: int = 0
    output: str = "text"

    def __post_init__(self):
        object.__setattr__(self, "q", QValue.parse(self.q).q)
        object.__setattr__(self, "kappa", parse_rational(self.kappa))
        if not 1 <= self.depth <= psdo.MAX_DEPTH:
            raise ValueError(f"depth must lie in 1..{psdo.MAX_DEPTH}")
        if self.lambda_order <= 0 or self.lambda_order % 2 or self.lambda_order > 12:
            raise ValueError("lambda-order must be a positive even integer <= 12")
        if self.output not in ("text", "json"):
            raise ValueError("output must be 'text' or 'json'")


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    detail: str
    anchor: str

    def as_dict(self) -> dict:
        return {"suite": self.suite, "check": self.name, "passed": self.passed, "detail": self.detail,
                "anchor": self.anchor}


# ---------------------------------------------------------------------------
# samplers


def _frac(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(-5, 5), rng.randint(1, 4))


def random_laurent(rng: random.Random, max_deg: int = 3, min_deg: int = 0) -> XLaurent:
    return XLaurent({k: _frac(rng) for k in range(min_deg, max_deg + 1) if rng.random() < 0.7})


def random_operator(rng: random.Random, kappa, max_order: int = 3, depth: int = 6, max_deg: int = 3,
                    exact: bool = False, min_order: int = 0) -> OperatorSeries:
    top = rng.randint(min_order, max_order)
    terms = {i: random_laurent(rng, max_deg) for i in range(top - depth + 1, top + 1)}
    terms[top] = terms[top] + XLaurent.const(1)
    return OperatorSeries.from_terms(terms, depth=None if exact else depth, top=top, kappa=kappa,
                                     domain=XLaurent)


def random_q_operator(rng: random.Random, q, max_order: int = 2, depth: int = 4, max_deg: int = 3,
                      min_deg: int = 0, exact: bool = False, min_order: int = 0) -> QOperatorSeries:
    top = rng.randint(min_order, max_order)
    terms = {i: random_laurent(rng, max_deg, min_deg) for i in range(top - depth + 1, top + 1)}
    terms[top] = terms[top] + XLaurent.const(1)
    return QOperatorSeries.from_terms(terms, q, depth=None if exact else depth, top=top)


def random_monomial(rng: random.Random, radius: int = 3) -> starcalc.PhaseSymbol:
    return starcalc.PhaseSymbol.mono(rng.randint(-radius, radius), rng.randint(-radius, radius), _frac(rng) or 1)


def random_dressing(rng: random.Random, q, depth: int) -> QOperatorSeries:
    """S = 1 + sum w_k D_q^-k with polynomial w_k free of constant terms."""
    terms = {0: XLaurent.const(1)}
    for k in range(1, depth):
        terms[-k] = XLaurent({d: _frac(rng) for d in range(1, 3) if rng.random() < 0.8})
    return QOperatorSeries(terms, 0, 1 - depth, XLaurent, q)


# ---------------------------------------------------------------------------
# individual checks


def apply_classical(A: OperatorSeries, f: XLaurent) -> XLaurent:
    """Action of an exact differential operator sum a_i (kappa d)^i."""
    out = XLaurent()
    for i, a in A.coeffs.items():
        if i < 0:
            raise ValueError("only differential operators act on functions")
        g = f
        for _ in range(i):
            g = g.ddx()
        out = out + a * g * A.kappa**i
    return out


def q_composition_law(q, exps=(-2, -1, 1, 2), kmax: int = 6, depth: int = 8) -> list[tuple]:
    """Failures of D_q^m o (D_q^n o x^k) == D_q^(m+n) o x^k modulo tail."""
    failures = []
    for m in exps:
        for n in exps:
            for k in range(kmax + 1):
                f = XLaurent.monomial(k)
                inner = qpsdo.q_leibniz_expand(n, f, q, depth)
                lhs = qpsdo.compose_q(QOperatorSeries.monomial(m, q), inner)
                rhs = qpsdo.q_leibniz_expand(m + n, f, q, depth)
                if not lhs.eq_mod_tail(rhs):
                    failures.append((m, n, k))
    return failures


def q_leibniz_pointwise(q, nmax: int = 3, bdeg: int = 3, fdeg: int = 4) -> list[tuple]:
    """Failures of (D_q^n o b) f == D_q^n (b f) on basis monomials."""
    failures = []
    for n in range(nmax + 1):
        for bd in range(bdeg + 1):
            b = XLaurent.monomial(bd)
            op = qpsdo.q_leibniz_expand(n, b, q, n + 1)
            for fd in range(fdeg + 1):
                f = XLaurent.monomial(fd)
                want = b * f
                for _ in range(n):
                    want = want.dq(q)
                if op.apply(f) != want:
                    failures.append((n, bd, fd))
    return failures


def tau_relation_failures(q, lo: int = -3, hi: int = 6) -> list[int]:
    """D_q tau f == q tau D_q f on x^lo..x^hi."""
    q = QValue.parse(q).q
    return [k for k in range(lo, hi + 1)
            if XLaurent.monomial(k).tau_scale(q, 1).dq(q) != XLaurent.monomial(k).dq(q).tau_scale(q, 1) * q]


def classical_leibniz_pointwise(kappa, nmax: int = 4, bdeg: int = 3, fdeg: int = 4) -> list[tuple]:
    failures = []
    for n in range(nmax + 1):
        for bd in range(bdeg + 1):
            b = XLaurent.monomial(bd)
            op = psdo.compose(OperatorSeries.monomial(n, kappa=kappa),
                              OperatorSeries({0: b}, 0, None, XLaurent, kappa))
            for fd in range(fdeg + 1):
                f = XLaurent.monomial(fd)
                want = b * f
                for _ in range(n):
                    want = want.ddx()
                if apply_classical(op, f) != want * Fraction(kappa) ** n:
                    failures.append((n, bd, fd))
    return failures


def adjoint_failures(rng, kappa, q, pairs: int = 50) -> tuple[int, int]:
    bad_c = bad_q = 0
    for _ in range(pairs):
        A = random_operator(rng, kappa, 3, 6, 3, min_order=-1)
        B = random_operator(rng, kappa, 3, 6, 3, min_order=-1)
        if not psdo.adjoint(psdo.compose(A, B)).eq_mod_tail(psdo.compose(psdo.adjoint(B), psdo.adjoint(A))):
            bad_c += 1
        P = random_q_operator(rng, q, 2, 4, 3, min_order=-1)
        Q = random_q_operator(rng, q, 2, 4, 3, min_order=-1)
        lhs = qpsdo.adjoint_q(qpsdo.compose_q(P, Q))
        rhs = qpsdo.compose_q(qpsdo.adjoint_q(Q), qpsdo.adjoint_q(P))
        if not lhs.eq_mod_tail(rhs):
            bad_q += 1
    return bad_c, bad_q


def classical_dickey_failures(rng, pairs: int = 25, kappa=1) -> int:
    bad = 0
    for _ in range(pairs):
        P = random_operator(rng, kappa, 2, 4, 3, exact=True)
        Q = random_operator(rng, kappa, 2, 4, 3, exact=True)
        if not psdo.dickey_lemma_check(P, Q):
            bad += 1
    return bad


def q_dickey_failures(rng, q, pairs: int = 25, N: int = 8) -> tuple[int, int]:
    """Returns (failures, smallest safe x-degree seen)."""
    bad, safe = 0, None
    for _ in range(pairs):
        P = random_q_operator(rng, q, 2, 4, 3, min_deg=-1, exact=True)
        Q = random_q_operator(rng, q, 2, 4, 3, exact=True)
        r = qpsdo.q_dickey_paths(P, Q, N)
        ok = r["eigen"] == r["operator"] and r["series"] == r["operator"].truncate_degree(r["safe_degree"])
        bad += not ok
        safe = r["safe_degree"] if safe is None else min(safe, r["safe_degree"])
    return bad, safe


def classical_assoc_failures(rng, kappa, triples: int = 100) -> int:
    bad = 0
    for _ in range(triples):
        A, B, C = (random_operator(rng, kappa, 3, 6, 3, min_order=-1) for _ in range(3))
        if not psdo.compose(psdo.compose(A, B), C).eq_mod_tail(psdo.compose(A, psdo.compose(B, C))):
            bad += 1
    return bad


def q_assoc_failures(rng, q, triples: int = 30) -> int:
    bad = 0
    for _ in range(triples):
        A, B, C = (random_q_operator(rng, q, 2, 4, 2, min_order=-1) for _ in range(3))
        lhs = qpsdo.compose_q(qpsdo.compose_q(A, B), C)
        if not lhs.eq_mod_tail(qpsdo.compose_q(A, qpsdo.compose_q(B, C))):
            bad += 1
    return bad


def star_assoc_failures(rng, star: Callable, triples: int, sampler: Callable) -> int:
    return sum(not starcalc.associativity_check(star, sampler(rng), sampler(rng), sampler(rng))
               for _ in range(triples))


def moyal_jacobi_failures(rng, kappa, triples: int = 20) -> int:
    def br(a, b):
        return starcalc.moyal_bracket(a, b, kappa)

    return sum(not starcalc.jacobi_check(br, *(starcalc.random_symbol(rng, 3) for _ in range(3)))
               for _ in range(triples))


def sine_jacobi_failures(rng, S: int, triples: int = 10) -> int:
    def sample():
        return starcalc.TorusElement({(rng.randint(-2, 2), rng.randint(-2, 2)): _frac(rng) or 1
                                      for _ in range(rng.randint(1, 2))})

    def br(a, b):
        return starcalc.sine_bracket(a, b, S)

    return sum(not starcalc.jacobi_check(br, sample(), sample(), sample()) for _ in range(triples))


def qexp_agreement(q, order: int = 12) -> tuple[bool, bool]:
    a = qexp_coeffs(order, q)
    same = a == qexp_log_coeffs(order, q)
    prod = series_mul(a, qexp_recip_coeffs(order, q), order)
    return same, prod == [Fraction(1)] + [Fraction(0)] * order


def hirota_taus() -> dict[str, TimesPoly]:
    return {
        "tau=1": TimesPoly.const(3, 1),
        "tau=t1": TimesPoly.var(3, 1),
        "tau=s(2,1)": schur_partition((2, 1), 3),
        "tau=s(3)": schur_partition((3,), 3),
        "tau=s(1,1,1)": schur_partition((1, 1, 1), 3),
        "tau=s(2,2)": schur_partition((2, 2), 3),
    }


def dressing_round_trip(rng, q, depth: int = 5) -> tuple[bool, bool]:
    S0 = random_dressing(rng, q, depth)
    L = qpsdo.dress(S0)
    S = qpsdo.dressing_solve(L, depth)
    residual = qpsdo.dressing_residual(L, S).is_zero_mod_tail()
    Sinv = qpsdo.inverse_q(S)
    back = qpsdo.compose_q(qpsdo.compose_q(Sinv, L), S)
    round_trip = back.eq_mod_tail(QOperatorSeries.monomial(1, q))
    return residual, round_trip


# ---------------------------------------------------------------------------
# suites


def _mk(suite):
    def mk(name, passed, detail, anchor):
        return Check(suite, name, bool(passed), detail, anchor)

    return mk


def _q_values(cfg: RunConfig) -> list[Fraction]:
    return sorted({cfg.q, Fraction(2)})


def suite_leibniz(cfg: RunConfig, rng) -> list[Check]:
    mk = _mk("leibniz")
    out = []
    for q in _q_values(cfg):
        f = q_composition_law(q)
        out.append(mk(f"q-composition-law q={format_rational(q)}", not f,
                      f"m,n in {{-2,-1,1,2}}, x^0..x^6: {len(f)} failures", "q-Leibniz composition law"))
        f = q_leibniz_pointwise(q)
        out.append(mk(f"q-leibniz-pointwise q={format_rational(q)}", not f,
                      f"n<=3 on basis monomials: {len(f)} failures", "q-Leibniz rule"))
        f = tau_relation_failures(q)
        out.append(mk(f"tau-relation q={format_rational(q)}", not f, f"x^-3..x^6: {len(f)} failures",
                      "D_q tau = q tau D_q"))
    f = classical_leibniz_pointwise(cfg.kappa)
    out.append(mk(f"leibniz-pointwise kappa={format_rational(cfg.kappa)}", not f,
                  f"n<=4 on basis monomials: {len(f)} failures", "Leibniz rule for symbols"))
    return out


def suite_adjoint(cfg: RunConfig, rng) -> list[Check]:
    mk = _mk("adjoint")
    bc, bq = adjoint_failures(rng, cfg.kappa, cfg.q, 50)
    return [
        mk("classical-anti-homomorphism", bc == 0, f"50 random pairs: {bc} failures", "(PQ)* = Q* P*"),
        mk("q-anti-homomorphism", bq == 0, f"50 random pairs: {bq} failures", "(PQ)* = Q* P* over D_q"),
    ]


def suite_dickey(cfg: RunConfig, rng) -> list[Check]:
    mk = _mk("dickey")
    out = []
    for kappa in sorted({Fraction(1), cfg.kappa}):
        bad = classical_dickey_failures(rng, 25, kappa)
        out.append(mk(f"classical-dickey kappa={format_rational(kappa)}", bad == 0,
                      f"25 random pairs: {bad} failures", "residue pairing lemma"))
    return out


def suite_q_dickey(cfg: RunConfig, rng) -> list[Check]:
    mk = _mk("q-dickey")
    bad, safe = q_dickey_failures(rng, cfg.q, 25)
    out = [mk("q-dickey three-path", bad == 0,
              f"25 random pairs: {bad} failures, safe x-degree >= {safe}", "q-analogue of the residue pairing lemma")]
    eig = [k for k in range(-2, 4) if not qpsdo.eigenrelation_check(k, cfg.q, 10)]
    out.append(mk("eigenrelation", not eig, f"k in -2..3: {len(eig)} failures", "D_q^k exp_q(xz) = z^k exp_q(xz)"))
    return out


def suite_assoc(cfg: RunConfig, rng) -> list[Check]:
    mk = _mk("assoc")
    out = []
    for kappa in sorted({Fraction(1), cfg.kappa}):
        bad = classical_assoc_failures(rng, kappa, 100)
        out.append(mk(f"symbol-product kappa={format_rational(kappa)}", bad == 0,
                      f"100 random triples: {bad} failures", "associativity of symbol composition"))
    bad = q_assoc_failures(rng, cfg.q, 30)
    out.append(mk("q-symbol-product", bad == 0, f"30 random triples: {bad} failures", "associativity of compose_q"))
    q = cfg.q
    bad = star_assoc_failures(rng, lambda a, b: starcalc.qplane_star(a, b, q), 50, random_monomial)
    out.append(mk("qplane-star", bad == 0, f"50 monomial triples: {bad} failures", "q-plane star associativity"))
    for name, fn in (("qstandard-star", starcalc.qstandard_star), ("qantistandard-star", starcalc.qantistandard_star)):
        bad = star_assoc_failures(rng, lambda a, b, fn=fn: fn(a, b, q), 30, random_monomial)
        out.append(mk(name, bad == 0, f"30 monomial triples: {bad} failures", "ordered q-star associativity"))
    q2 = q * q
    bad = star_assoc_failures(rng, lambda a, b: starcalc.qweyl_star(a, b, q2), 30, random_monomial)
    out.append(mk("qweyl-star", bad == 0, f"30 monomial triples at q={format_rational(q2)}: {bad} failures",
                  "q-Weyl star associativity"))
    k = cfg.kappa
    bad = star_assoc_failures(rng, lambda a, b: starcalc.moyal_star(a, b, k), 20,
                              lambda r: starcalc.random_symbol(r, 3))
    out.append(mk("moyal-star", bad == 0, f"20 polynomial triples: {bad} failures", "Moyal star associativity"))
    bad = len(binomial_identity_grid(-3, 3, 3))
    out.append(mk("monomial-binomial-identity", bad == 0, f"{bad} failures", "binomial identity behind associativity"))
    return out


def suite_jacobi(cfg: RunConfig, rng) -> list[Check]:
    mk = _mk("jacobi")
    bad = moyal_jacobi_failures(rng, cfg.kappa, 20)
    out = [mk("moyal-bracket", bad == 0, f"20 triples of degree <= 3: {bad} failures", "Moyal bracket Jacobi")]
    S = cfg.lambda_order // 2
    bad = sine_jacobi_failures(rng, S, 10)
    out.append(mk("sine-bracket", bad == 0, f"10 torus triples to lambda^{cfg.lambda_order}: {bad} failures",
                  "sine bracket Jacobi"))
    k = cfg.kappa
    bad = sum(not starcalc.jacobi_check(lambda a, b: starcalc.circ_commutator(a, b, k),
                                        *(starcalc.random_symbol(rng, 3) for _ in range(3)))
              for _ in range(10))
    out.append(mk("circ-commutator", bad == 0, f"10 triples: {bad} failures", "commutator bracket of symbol composition"))
    bad = 0
    for _ in range(20):
        f, g = starcalc.random_symbol(rng, 3), starcalc.random_symbol(rng, 3)
        bad += not starcalc.classical_limit_check(f, g)
    out.append(mk("classical-limit", bad == 0, f"20 pairs: {bad} failures", "kappa -> 0 gives the Poisson bracket"))
    return out


def suite_n24(cfg: RunConfig, rng) -> list[Check]:
    f = binomial_identity_grid(-4, 4, 4)
    return [_mk("n24")("binomial-identity-grid", not f, f"n,r in [-4,4], gamma,mu in [0,4]: {len(f)} failures",
                       "binomial identity for monomial associativity")]


def suite_qexp(cfg: RunConfig, rng) -> list[Check]:
    mk = _mk("qexp")
    out = []
    for q in _q_values(cfg):
        same, inv = qexp_agreement(q, 12)
        out.append(mk(f"product-vs-exponential-form q={format_rational(q)}", same, "order 12",
                      "exp_q as an exponential of a log series"))
        out.append(mk(f"reciprocal q={format_rational(q)}", inv, "order 12", "exp_q(y) exp_{1/q}(-y) = 1"))
    return out


def suite_flows(cfg: RunConfig, rng) -> list[Check]:
    mk = _mk("flows")
    out = []
    try:
        ok = psdo.flow_commutativity_check(None, 2, 3, cfg.depth)
        detail = f"depth {cfg.depth}, computable coefficients"
    except psdo.WindowError as exc:
        ok, detail = False, f"error: {exc}"
    out.append(mk("kp-commute-2-3", ok, detail, "commuting KP flows"))
    ok = correspond.moyal_flow_commutativity_check(2, 3, 0, 5)
    out.append(mk("dkp-commute-2-3", ok, "lambda^-1..lambda^-5", "commuting dKP flows"))
    for m, n in ((1, 2), (2, 3), (1, 3)):
        ok = correspond.zero_curvature_check(m, n, cfg.kappa, 5)
        out.append(mk(f"zero-curvature-{m}-{n}", ok, f"kappa={format_rational(cfg.kappa)}", "zero-curvature form"))
    residual, round_trip = dressing_round_trip(rng, cfg.q, 5)
    out.append(mk("dressing-residual", residual, "depth 5", "dressing operator"))
    out.append(mk("dressing-round-trip", round_trip, "depth 5", "dressing operator"))
    S = random_dressing(rng, cfg.q, 7)
    bad = []
    for n in range(2):
        for alpha in ((0, 0, 0), (1, 0, 0), (0, 1, 0)):
            res, safe = qpsdo.bilinear_residual_report(S, n, alpha, 8)
            if not res.is_zero() or safe < 0:
                bad.append((n, alpha))
    out.append(mk("q-bilinear-residual", not bad, f"n<=1, |alpha|<=1, depth 7: {len(bad)} failures",
                  "q-bilinear identity"))
    return out


def suite_correspondence(cfg: RunConfig, rng) -> list[Check]:
    mk = _mk("correspondence")
    out = []
    depth = min(cfg.depth, 4)
    for m in (1, 2, 3):
        rep = correspond.flow_correspondence_check(m, depth)
        bad = ", ".join(str(r["index"]) for r in rep.mismatches())
        out.append(mk(f"sato-moyal-flow-{m}", rep.passed,
                      f"depth {depth}: {len(rep.rows)} coefficients" + (f", mismatch at {bad}" if bad else ""),
                      "Sato to Moyal coefficient map"))
    v = correspond.SatoCoeffs.generic(6)
    ok = correspond.moyal_to_sato(correspond.sato_to_moyal(v)) == v
    out.append(mk("map-round-trip", ok, "6 coefficients", "Sato to Moyal coefficient map"))
    return out


def suite_hirota(cfg: RunConfig, rng) -> list[Check]:
    mk = _mk("hirota")
    return [mk(name, kp_hirota_residual(tau).is_zero(), "residual of the KP bilinear equation",
               "Hirota form of KP") for name, tau in hirota_taus().items()]


SUITE_FUNCS: dict[str, Callable[[RunConfig, random.Random], list[Check]]] = {
    "adjoint": suite_adjoint,
    "assoc": suite_assoc,
    "correspondence": suite_correspondence,
    "dickey": suite_dickey,
    "flows": suite_flows,
    "hirota": suite_hirota,
    "jacobi": suite_jacobi,
    "leibniz": suite_leibniz,
    "n24": suite_n24,
    "q-dickey": suite_q_dickey,
    "qexp": suite_qexp,
}


def run_suite(name: str, cfg: RunConfig) -> list[Check]:
    """Run one suite (or ``all``) with a per-suite seeded generator; result sorted by suite and check."""
    names = sorted(SUITE_FUNCS) if name == "all" else [name]
    out: list[Check] = []
    for n in names:
        if n not in SUITE_FUNCS:
            raise KeyError(n)
        rng = random.Random(f"{cfg.seed}:{n}")
        try:
            out.extend(SUITE_FUNCS[n](cfg, rng))
        except Exception as exc:  # a crash is reported as a failed check, never hidden
            out.append(Check(n, "suite-error", False, f"{type(exc).__name__}: {exc}", "suite execution"))
    return sorted(out, key=lambda c: (c.suite, c.name))
