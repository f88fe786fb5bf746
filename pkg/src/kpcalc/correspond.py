"""Sato and Moyal formulations of KP, and the checks that tie them together.

Index convention: the Sato operator is L = d + v_0 d^-1 + v_1 d^-2 + ...,
which is the psdo Lax operator with v_n = u_{n+2}.  Differential polynomials
are written in those psdo generators: ``u[i,k]`` is the k-th x-derivative of
the coefficient of d^(1-i).  The Moyal symbol is
Lambda = lambda + u_0 lambda^-1 + u_1 lambda^-2 + ...
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Mapping, Sequence

from .coeffring import DerivationTable, DPoly, MissingGenerator, XLaurent
from .exactnum import format_rational, parse_rational
from .psdo import (
    DEFAULT_DEPTH,
    SeriesBase,
    WindowError,
    _max_lo,
    flow_table,
    kp_flow_rhs,
    lax_kp,
    product_floor,
)
from .qpsdo import QOperatorSeries, power_q, q_lax, qkp_flow_rhs
from .starcalc import PhaseSymbol, poisson_dkp, qplane_star


@dataclass(frozen=True)
class SatoCoeffs:
    """v_0, v_1, ... of L = d + sum v_n d^(-n-1)."""

    v: tuple[DPoly, ...]

    @classmethod
    def generic(cls, count: int) -> "SatoCoeffs":
        return cls(tuple(DPoly.gen(n + 2, 0) for n in range(count)))


@dataclass(frozen=True)
class MoyalCoeffs:
    """u_0, u_1, ... of Lambda = lambda + sum u_n lambda^(-n-1)."""

    u: tuple[DPoly, ...]

    @classmethod
    def generic(cls, count: int) -> "MoyalCoeffs":
        return cls(tuple(DPoly.gen(n + 2, 0) for n in range(count)))


def sato_to_moyal(v: SatoCoeffs) -> MoyalCoeffs:
    """u_n = sum_j 2^-j C(n,j) d_x^j v_{n-j}, the kappa = 1/2 map."""
    out = []
    for n in range(len(v.v)):
        total = DPoly()
        for j in range(n + 1):
            total = total + v.v[n - j].ddx_n(j) * Fraction(comb(n, j), 2**j)
        out.append(total)
    return MoyalCoeffs(tuple(out))


def moyal_to_sato(u: MoyalCoeffs) -> SatoCoeffs:
    """Inverse map by forward substitution (the map is unit lower triangular)."""
    v: list[DPoly] = []
    for n in range(len(u.u)):
        total = u.u[n]
        for j in range(1, n + 1):
            total = total - v[n - j].ddx_n(j) * Fraction(comb(n, j), 2**j)
        v.append(total)
    return SatoCoeffs(tuple(v))


# ---------------------------------------------------------------------------
# Moyal symbols with differential-polynomial coefficients


def _falling(n: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= n - i
    return out


class MoyalSeries(SeriesBase):
    """Truncated sum a_i(x) lambda^i multiplied with the Moyal star at weight kappa."""

    symbol = "lambda"
    __slots__ = ("kappa",)

    def __init__(self, coeffs, top=None, lo=None, domain=DPoly, kappa="1/2"):
        super().__init__(coeffs, top, lo, domain)
        self.kappa = parse_rational(kappa)

    def _like(self, coeffs, top, lo):
        return MoyalSeries(coeffs, top, lo, self.domain, self.kappa)

    def _check_compatible(self, other):
        super()._check_compatible(other)
        if self.kappa != other.kappa:
            raise TypeError(f"kappa mismatch: {self.kappa} vs {other.kappa}")

    def _key(self):
        return super()._key() + (self.kappa,)

    @classmethod
    def identity(cls, kappa, domain=DPoly) -> "MoyalSeries":
        return cls({0: domain.const(1)}, 0, None, domain, kappa)


def _bidiff_series(A: MoyalSeries, B: MoyalSeries, orders, weight, lo) -> dict[int, DPoly]:
    """sum over s in orders of weight(s) sum_j (-1)^j C(s,j) (dx^j dl^(s-j) A)(dx^(s-j) dl^j B)."""
    out: dict[int, DPoly] = {}
    adiff: dict[int, list] = {i: [a] for i, a in A.coeffs.items()}
    bdiff: dict[int, list] = {k: [b] for k, b in B.coeffs.items()}

    def nth(cache, key, n):
        lst = cache[key]
        while len(lst) <= n:
            lst.append(lst[-1].ddx())
        return lst[n]

    for s in orders:
        w = weight(s)
        if not w:
            continue
        for i in A.coeffs:
            for k in B.coeffs:
                p = i + k - s
                if lo is not None and p < lo:
                    continue
                for j in range(s + 1):
                    c = _falling(i, s - j) * _falling(k, j)
                    if not c:
                        continue
                    da = nth(adiff, i, j)
                    db = nth(bdiff, k, s - j)
                    if da.is_zero() or db.is_zero():
                        continue
                    term = da * db * (w * (-1) ** j * comb(s, j) * c)
                    out[p] = out[p] + term if p in out else term
    return out


def _max_order(A: MoyalSeries, B: MoyalSeries, lo: int | None) -> int:
    if lo is not None:
        return A.top + B.top - lo
    # both exact with non-negative powers: d_lambda kills everything past the degrees
    return A.top + B.top


def moyal_product(A: MoyalSeries, B: MoyalSeries, floor: int | None = None) -> MoyalSeries:
    A._check_compatible(B)
    finite = all(i >= 0 for i in A.coeffs) and all(i >= 0 for i in B.coeffs)
    lo = product_floor(A, B, floor, finite=finite)
    kappa = A.kappa
    top = A.top + B.top
    out = _bidiff_series(A, B, range(_max_order(A, B, lo) + 1), lambda s: kappa**s / factorial(s), lo)
    if lo is not None and lo > top + 1:
        lo = top + 1
    return MoyalSeries(out, top, lo, A.domain, kappa)


def moyal_bracket_series(A: MoyalSeries, B: MoyalSeries, floor: int | None = None) -> MoyalSeries:
    """(A*B - B*A)/(2 kappa) as the odd-order sum; kappa = 0 gives the Poisson bracket."""
    A._check_compatible(B)
    finite = all(i >= 0 for i in A.coeffs) and all(i >= 0 for i in B.coeffs)
    lo = product_floor(A, B, floor, commutator_gain=True, finite=finite)
    kappa = A.kappa
    top = A.top + B.top - 1
    orders = range(1, _max_order(A, B, lo) + 1, 2)
    out = _bidiff_series(A, B, orders, lambda s: kappa ** (s - 1) / factorial(s), lo)
    if lo is not None and lo > top + 1:
        lo = top + 1
    return MoyalSeries(out, top, lo, A.domain, kappa)


def star_power(A: MoyalSeries, n: int) -> MoyalSeries:
    out = MoyalSeries.identity(A.kappa, A.domain)
    for _ in range(n):
        out = moyal_product(out, A)
    return out


def moyal_lax(coeffs: MoyalCoeffs | int, kappa="1/2") -> MoyalSeries:
    """Lambda = lambda + sum u_n lambda^(-n-1) on the window its coefficients fill."""
    if isinstance(coeffs, int):
        coeffs = MoyalCoeffs.generic(coeffs)
    terms = {1: DPoly.const(1)}
    for n, c in enumerate(coeffs.u):
        terms[-n - 1] = c
    return MoyalSeries(terms, 1, -len(coeffs.u), DPoly, kappa)


def moyal_flow_series(Lam: MoyalSeries, m: int) -> MoyalSeries:
    """{(Lambda^{*m})_+, Lambda}_kappa; no non-negative powers survive."""
    if not 1 <= m <= 3:
        raise ValueError("Moyal flows are provided for m in 1..3")
    B = star_power(Lam, m).plus_part()
    flow = moyal_bracket_series(B, Lam)
    for i in flow.coeffs:
        if i >= 0:
            raise ArithmeticError(f"Moyal flow {m} produced a non-negative power {i}")
    lo = flow.lo
    if lo is not None and lo > 0:
        lo = 0
    return MoyalSeries(flow.coeffs, -1, lo, flow.domain, flow.kappa)


def moyal_kp_flow_rhs(Lam: MoyalCoeffs, m: int, kappa="1/2") -> dict[int, DPoly]:
    """d_m u_n for every n the window determines."""
    flow = moyal_flow_series(moyal_lax(Lam, kappa), m)
    out = {}
    n = 0
    while flow.in_window(-n - 1) and n < len(Lam.u):
        out[n] = flow.coeff(-n - 1)
        n += 1
    return out


def _moyal_table(Lam: MoyalSeries, m: int) -> DerivationTable:
    """d_m u[i,0] for the generic Lambda, as a derivation table over the generators."""
    flow = moyal_flow_series(Lam, m)
    base = {}
    i = 2
    while flow.in_window(-(i - 1)):
        base[i] = flow.coeff(-(i - 1))
        i += 1
    return DerivationTable(base)


def dkp_flow_rhs(lam: PhaseSymbol, n: int) -> PhaseSymbol:
    """{(lambda^n)_+, lambda} with the pointwise power and the Poisson bracket."""
    if not 1 <= n <= 3:
        raise ValueError("dKP flows are provided for n in 1..3")
    power = PhaseSymbol.const(1)
    for _ in range(n):
        power = power * lam
    return poisson_dkp(power.p_part(0), lam)


def dkp_flow_series(depth: int, n: int) -> MoyalSeries:
    """The same flow on the generic symbol, as the kappa = 0 Moyal flow."""
    return moyal_flow_series(moyal_lax(depth - 2, kappa=0), n)


def _commutator_coeffs(Lam: MoyalSeries, m: int, n: int) -> dict[int, DPoly]:
    fm, fn = moyal_flow_series(Lam, m), moyal_flow_series(Lam, n)
    tm, tn = _moyal_table(Lam, m), _moyal_table(Lam, n)
    lo = _max_lo(fm.lo, fn.lo)
    out = {}
    p = -1
    while lo is None or p >= lo:
        try:
            out[p] = fn.coeff(p).apply_derivation(tm) - fm.coeff(p).apply_derivation(tn)
        except MissingGenerator:
            break
        p -= 1
    return out


def moyal_flow_commutativity_check(m: int, n: int, kappa="0", depth: int = 5) -> bool:
    """[d_m, d_n] Lambda = 0 on the coefficients of lambda^-1 .. lambda^-depth.

    The stored window is widened until all of those coefficients are
    computable; kappa = 0 is the dKP case.
    """
    if m == n:
        return True
    wanted = set(range(-depth, 0))
    for size in range(depth + 2, 3 * depth + m + n + 4):
        coeffs = _commutator_coeffs(moyal_lax(size - 2, kappa), m, n)
        if wanted <= set(coeffs):
            return all(coeffs[p].is_zero() for p in wanted)
    raise WindowError(f"could not reach lambda^-{depth} in [d_{m}, d_{n}]Lambda")


def zero_curvature_terms(m: int, n: int, kappa="1/2", depth: int = 5) -> MoyalSeries:
    """d_m B_n - d_n B_m + {B_n, B_m}_kappa with B_k = (Lambda^{*k})_+.

    The time derivatives of the B's come from substituting the flows of the
    generic Lambda; the window is widened until every needed flow exists.
    """
    if not (1 <= m <= 3 and 1 <= n <= 3):
        raise ValueError("zero curvature is checked for m, n in 1..3")
    size = depth + max(m, n) + 1
    Lam = moyal_lax(size - 2, kappa)
    Bm = star_power(Lam, m).plus_part()
    Bn = star_power(Lam, n).plus_part()
    tm, tn = _moyal_table(Lam, m), _moyal_table(Lam, n)
    try:
        dm_Bn = {i: c.apply_derivation(tm) for i, c in Bn.coeffs.items()}
        dn_Bm = {i: c.apply_derivation(tn) for i, c in Bm.coeffs.items()}
    except MissingGenerator as exc:
        raise WindowError(f"window too shallow for the flows in B: {exc}") from None
    lhs = MoyalSeries(dm_Bn, max(Bn.top, 0), None, DPoly, kappa) - MoyalSeries(dn_Bm, max(Bm.top, 0), None, DPoly, kappa)
    return lhs + moyal_bracket_series(Bn, Bm)


def zero_curvature_check(m: int, n: int, kappa="1/2", depth: int = 5) -> bool:
    return zero_curvature_terms(m, n, kappa, depth).is_zero_mod_tail()


# ---------------------------------------------------------------------------
# reports


@dataclass
class Report:
    title: str
    rows: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["equal"] for r in self.rows)

    def mismatches(self) -> list[dict]:
        return [r for r in self.rows if not r["equal"]]

    def to_json(self) -> str:
        return json.dumps(self.rows, indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [self.title]
        w = max([len(str(r["lhs"])) for r in self.rows] + [3])
        lines.append(f"{'index':>5}  {'lhs':<{w}}  {'rhs'}  equal")
        for r in self.rows:
            lines.append(f"{r['index']:>5}  {str(r['lhs']):<{w}}  {r['rhs']}  {'yes' if r['equal'] else 'NO'}")
        return "\n".join(lines)


def flow_correspondence_check(m: int, depth: int = 4) -> Report:
    """Compare the m-th Sato flow pushed through sato_to_moyal with the Moyal flow at kappa = 1/2.

    lhs: d_m u_n by the chain rule from the Sato flow; rhs: the Moyal flow
    coefficient of lambda^(-n-1).  Both are differential polynomials in the
    Sato generators.
    """
    if not 1 <= m <= 3:
        raise ValueError("flow_correspondence_check takes m in 1..3")
    size = m + depth + 1
    L = lax_kp(size, kappa=1)
    table = flow_table(L, m)
    v = SatoCoeffs.generic(size - 2)
    u = sato_to_moyal(v)
    rhs = moyal_kp_flow_rhs(u, m, kappa=Fraction(1, 2))
    rows = []
    for n in range(depth):
        try:
            lhs = u.u[n].apply_derivation(table)
        except MissingGenerator as exc:
            raise WindowError(f"Sato flow window too shallow at index {n}: {exc}") from None
        if n not in rhs:
            raise WindowError(f"Moyal flow window too shallow at index {n}")
        rows.append({"index": n, "lhs": str(lhs), "rhs": str(rhs[n]), "equal": lhs == rhs[n]})
    return Report(f"flow {m}: d_{m} u_n via Sato flow vs Moyal flow (kappa=1/2)", rows)


def qlax_compare(q, depth: int = 4, coeffs: Mapping[int, XLaurent] | None = None) -> Report:
    """Second flows of L = D_q + a_0 + sum a_i D_q^-i and of lambda = p + a_0 + sum a_i p^-i.

    lhs: [L^2_+, L] in the q-operator algebra; rhs: lambda^2_+ * lambda - lambda * lambda^2_+
    with the q-plane star.  Rows are indexed by the power of D_q (resp. p).  The
    ``restricted`` flag records whether a_0, a_1 and the coefficients of
    L^2_+ are x-independent, the only case where agreement is expected.
    """
    # coefficients not supplied are zero; the window is sized so that rows
    # 0 .. 1-depth of the flow are determined
    size = depth + 3
    coeffs = {i: c for i, c in (coeffs or {}).items() if i <= size - 2}
    L = q_lax(coeffs, q, depth=size)
    lhs = qkp_flow_rhs(L, 2)
    lam = PhaseSymbol.mono(0, 1)
    for i, a in coeffs.items():
        lam = lam + PhaseSymbol.from_xlaurent(a, -i)
    lam2 = qplane_star(lam, lam, q).p_part(0)
    rhs = qplane_star(lam2, lam, q) - qplane_star(lam, lam2, q)
    L2p = power_q(L, 2).plus_part()
    restricted = all(coeffs.get(i, XLaurent()).is_constant() for i in (0, 1)) and all(
        L2p.coeff(i).is_constant() for i in (0, 1)
    )
    rows = []
    k = 0
    while lhs.in_window(k):
        left = lhs.coeff(k)
        right = XLaurent(rhs.coeff_of_p(k))
        rows.append({"index": k, "lhs": str(left), "rhs": str(right), "equal": left == right,
                     "restricted": restricted})
        k -= 1
    return Report(f"q-Lax comparison at q={format_rational(parse_rational(q))}, depth {depth}", rows)
