"""Pseudodifferential symbol algebra with an explicit truncation window.

A series stores the coefficients of xi^i for ``lo <= i <= top``; powers
below ``lo`` are unknown (the tail).  ``lo is None`` marks an exact series
whose omitted powers are genuinely zero, such as a differential operator
obtained from a plus-projection.

Every product fixes its output window before computing anything: a power is
kept only when no tail term of either operand can reach it.  Equality is
always checked on the common window ("modulo tail"), so identities such as
associativity hold exactly rather than approximately.
"""

from __future__ import annotations

import threading
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .coeffring import DerivationTable, DPoly, MissingGenerator, XLaurent
from .exactnum import binom_generalized, format_rational, parse_rational

#: window used when a product of two exact series would be infinite
DEFAULT_DEPTH = 6
MAX_DEPTH = 10

Coeff = XLaurent | DPoly


class WindowError(ValueError):
    """A requested power lies in the unknown tail of a series."""


class SeriesBase:
    """Window bookkeeping shared by the classical and q-deformed algebras."""

    symbol = "xi"
    __slots__ = ("coeffs", "top", "lo", "domain", "_hash")

    def __init__(self, coeffs: Mapping[int, Coeff], top: int | None = None, lo: int | None = None,
                 domain: type | None = None):
        coeffs = {int(i): c for i, c in coeffs.items()}
        if domain is None:
            domain = type(next(iter(coeffs.values()))) if coeffs else XLaurent
        for c in coeffs.values():
            if not isinstance(c, domain):
                raise TypeError(f"coefficient domains differ: {type(c).__name__} vs {domain.__name__}")
        if top is None:
            nonzero = [i for i, c in coeffs.items() if not c.is_zero()]
            top = max(nonzero) if nonzero else 0
        if lo is not None and lo > top + 1:
            raise ValueError(f"empty window: lo={lo} > top+1={top + 1}")
        clean = {}
        for i, c in coeffs.items():
            if c.is_zero():
                continue
            if i > top or (lo is not None and i < lo):
                raise ValueError(f"power {i} lies outside the window [{lo}, {top}]")
            clean[i] = c
        self.coeffs = clean
        self.top = top
        self.lo = lo
        self.domain = domain
        self._hash = None

    # -- construction helpers
    def _like(self, coeffs, top, lo):
        raise NotImplementedError

    def zero_coeff(self) -> Coeff:
        return self.domain()

    def one_coeff(self) -> Coeff:
        return self.domain.const(1)

    @property
    def depth(self) -> int | None:
        return None if self.lo is None else self.top - self.lo + 1

    @property
    def exact(self) -> bool:
        return self.lo is None

    def in_window(self, i: int) -> bool:
        return self.lo is None or i >= self.lo

    def coeff(self, i: int) -> Coeff:
        if not self.in_window(i):
            raise WindowError(f"power {i} of {self.symbol} is below the window floor {self.lo}")
        return self.coeffs.get(i, self.zero_coeff())

    def leading_is_constant(self) -> bool:
        return self.coeffs.get(self.top, self.zero_coeff()).is_constant()

    def powers(self) -> list[int]:
        return sorted(self.coeffs, reverse=True)

    def _check_compatible(self, other):
        if type(self) is not type(other):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if self.domain is not other.domain:
            raise TypeError(f"coefficient domain mismatch: {self.domain.__name__} vs {other.domain.__name__}")

    # -- linear structure
    def __add__(self, other):
        self._check_compatible(other)
        lo = _max_lo(self.lo, other.lo)
        top = max(self.top, other.top)
        out = {}
        for src in (self, other):
            for i, c in src.coeffs.items():
                if lo is None or i >= lo:
                    out[i] = out[i] + c if i in out else c
        return self._like(out, top, lo)

    def __neg__(self):
        return self._like({i: -c for i, c in self.coeffs.items()}, self.top, self.lo)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, r) -> "SeriesBase":
        r = parse_rational(r)
        return self._like({i: c * r for i, c in self.coeffs.items()}, self.top, self.lo)

    def mul_coeff(self, f: Coeff) -> "SeriesBase":
        """Left multiplication by a coefficient function."""
        return self._like({i: f * c for i, c in self.coeffs.items()}, self.top, self.lo)

    def truncate(self, lo: int) -> "SeriesBase":
        """Forget everything below ``lo``."""
        new_lo = lo if self.lo is None else max(lo, self.lo)
        return self._like({i: c for i, c in self.coeffs.items() if i >= new_lo}, self.top, new_lo)

    def with_top(self, top: int) -> "SeriesBase":
        """Re-declare the top power; dropped powers must be zero."""
        for i in self.coeffs:
            if i > top:
                raise ValueError(f"power {i} is nonzero, cannot lower top to {top}")
        lo = self.lo
        if lo is not None and lo > top + 1:
            raise ValueError("window would become empty")
        return self._like(dict(self.coeffs), top, lo)

    # -- projections
    def plus_part(self):
        if self.lo is not None and self.lo > 0:
            raise WindowError("plus part needs the window to reach power 0")
        return self._like({i: c for i, c in self.coeffs.items() if i >= 0}, max(self.top, 0), None)

    def minus_part(self):
        out = {i: c for i, c in self.coeffs.items() if i < 0}
        lo = self.lo
        top = -1
        if lo is not None and lo > top + 1:
            lo = top + 1
        return self._like(out, top, lo)

    def residue(self) -> Coeff:
        return self.coeff(-1)

    # -- comparison
    def eq_mod_tail(self, other) -> bool:
        self._check_compatible(other)
        lo = _max_lo(self.lo, other.lo)
        keys = set(self.coeffs) | set(other.coeffs)
        for i in keys:
            if lo is not None and i < lo:
                continue
            if self.coeffs.get(i, self.zero_coeff()) != other.coeffs.get(i, other.zero_coeff()):
                return False
        return True

    def is_zero_mod_tail(self) -> bool:
        return all(self.lo is not None and i < self.lo for i in self.coeffs) or not self.coeffs

    def _key(self):
        return (type(self), self.top, self.lo, self.domain, frozenset(self.coeffs.items()))

    def __eq__(self, other):
        return isinstance(other, SeriesBase) and self._key() == other._key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._key())
        return self._hash

    def __str__(self):
        parts = []
        for i in self.powers():
            c = self.coeffs[i]
            sym = "" if i == 0 else (self.symbol if i == 1 else f"{self.symbol}^{i}")
            cs = str(c)
            if not sym:
                parts.append(f"({cs})")
            else:
                parts.append(f"({cs})*{sym}")
        body = " + ".join(parts) if parts else "0"
        if self.lo is not None:
            body += f" + O({self.symbol}^{self.lo - 1})"
        return body


def _max_lo(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


def product_floor(a: SeriesBase, b: SeriesBase, floor: int | None, *, commutator_gain: bool = False,
                  default_depth: int = DEFAULT_DEPTH, finite: bool = False) -> int | None:
    """Lowest power of a*b that no tail term can reach.

    With ``commutator_gain`` the bracket of a tail with a factor whose leading
    coefficient is x-independent loses its top power, so one more power is
    reliable.  ``finite`` says the product of the exact parts terminates.
    """
    cands = []
    if a.lo is not None:
        cands.append(a.lo + b.top - (1 if commutator_gain and b.leading_is_constant() else 0))
    if b.lo is not None:
        cands.append(a.top + b.lo - (1 if commutator_gain and a.leading_is_constant() else 0))
    if cands:
        lo = max(cands)
        return lo if floor is None else max(lo, floor)
    if finite and floor is None:
        return None
    if floor is not None:
        return floor
    return a.top + b.top - default_depth + 1


class OperatorSeries(SeriesBase):
    """Truncated symbol sum a_i(x) xi^i composed with weight kappa."""

    symbol = "xi"
    __slots__ = ("kappa",)

    def __init__(self, coeffs, top=None, lo=None, domain=None, kappa=1):
        super().__init__(coeffs, top, lo, domain)
        self.kappa = parse_rational(kappa)

    @classmethod
    def from_terms(cls, terms: Mapping[int, Coeff], depth: int | None = None, top: int | None = None,
                   kappa=1, domain=None) -> "OperatorSeries":
        if top is None:
            nonzero = [i for i, c in terms.items() if not c.is_zero()]
            top = max(nonzero) if nonzero else 0
        lo = None if depth is None else top - depth + 1
        return cls(dict(terms), top, lo, domain, kappa)

    @classmethod
    def identity(cls, domain=XLaurent, kappa=1) -> "OperatorSeries":
        return cls({0: domain.const(1)}, 0, None, domain, kappa)

    @classmethod
    def monomial(cls, i: int, coeff: Coeff | None = None, depth: int | None = None, kappa=1,
                 domain=XLaurent) -> "OperatorSeries":
        if coeff is None:
            coeff = domain.const(1)
        return cls.from_terms({i: coeff}, depth=depth, top=i, kappa=kappa, domain=type(coeff))

    def _like(self, coeffs, top, lo):
        return OperatorSeries(coeffs, top, lo, self.domain, self.kappa)

    def _check_compatible(self, other):
        super()._check_compatible(other)
        if self.kappa != other.kappa:
            raise TypeError(f"kappa mismatch: {self.kappa} vs {other.kappa}")

    def _key(self):
        return super()._key() + (self.kappa,)

    def __mul__(self, other):
        return compose(self, other)


def compose(A: OperatorSeries, B: OperatorSeries, floor: int | None = None, *,
            _gain: bool = False) -> OperatorSeries:
    """Symbol product sum_k kappa^k/k! d_xi^k A * d_x^k B."""
    A._check_compatible(B)
    finite = all(i >= 0 for i in A.coeffs)
    lo = product_floor(A, B, floor, commutator_gain=_gain, finite=finite)
    kappa = A.kappa
    top = A.top + B.top
    out: dict[int, Coeff] = {}
    derivs: dict[int, list[Coeff]] = {j: [b] for j, b in B.coeffs.items()}
    for i, a in A.coeffs.items():
        for j in B.coeffs:
            dj = derivs[j]
            k = 0
            while True:
                p = i + j - k
                if lo is not None and p < lo:
                    break
                if lo is None and i >= 0 and k > i:
                    break
                while len(dj) <= k:
                    dj.append(dj[-1].ddx())
                bk = dj[k]
                if bk.is_zero():
                    break
                w = binom_generalized(i, k) * kappa**k
                if w:
                    term = a * bk * w
                    out[p] = out[p] + term if p in out else term
                k += 1
    if lo is not None and lo > top + 1:
        lo = top + 1
    return OperatorSeries(out, top, lo, A.domain, kappa)


def commutator(A: OperatorSeries, B: OperatorSeries, floor: int | None = None) -> OperatorSeries:
    """A o B - B o A on the window that survives the cancellation of leading terms."""
    return compose(A, B, floor, _gain=True) - compose(B, A, floor, _gain=True)


def adjoint(A: OperatorSeries, floor: int | None = None) -> OperatorSeries:
    """Formal adjoint with x* = x, xi* = -xi, written back coefficient-left."""
    if A.lo is None and floor is None and any(i < 0 for i in A.coeffs):
        floor = A.top - DEFAULT_DEPTH + 1
    lo = A.lo if floor is None else _max_lo(A.lo, floor)
    kappa = A.kappa
    out: dict[int, Coeff] = {}
    for i, a in A.coeffs.items():
        sign = -1 if i % 2 else 1
        d = a
        k = 0
        while True:
            p = i - k
            if lo is not None and p < lo:
                break
            if lo is None and k > i:
                break
            if d.is_zero():
                break
            w = binom_generalized(i, k) * kappa**k * sign
            if w:
                out[p] = out[p] + d * w if p in out else d * w
            d = d.ddx()
            k += 1
    return OperatorSeries(out, A.top, lo, A.domain, kappa)


def res_partial(A: OperatorSeries) -> Coeff:
    """Coefficient of xi^-1."""
    return A.residue()


def plus_part(A):
    return A.plus_part()


def minus_part(A):
    return A.minus_part()


def power(A: OperatorSeries, n: int, floor: int | None = None) -> OperatorSeries:
    if n < 0:
        raise ValueError("power needs n >= 0")
    out = OperatorSeries.identity(A.domain, A.kappa)
    for _ in range(n):
        out = compose(out, A, floor)
    return out


def inverse(A: OperatorSeries) -> OperatorSeries:
    """Inverse of a series 1 + (negative powers) by geometric expansion."""
    if A.top != 0 or A.coeffs.get(0) != A.one_coeff():
        raise ValueError("inverse needs a series of the form 1 + lower powers")
    N = A - OperatorSeries.identity(A.domain, A.kappa)
    lo = A.lo if A.lo is not None else -DEFAULT_DEPTH + 1
    out = OperatorSeries.identity(A.domain, A.kappa)
    term = out
    for _ in range(-lo + 1):
        term = -compose(term, N, lo)
        out = out + term
    return out.truncate(lo)


# ---------------------------------------------------------------------------
# KP hierarchy


def lax_kp(depth: int = DEFAULT_DEPTH, kappa=1) -> OperatorSeries:
    """L = xi + sum_{n>=1} u_{n+1} xi^-n on a window of ``depth`` powers."""
    if depth < 2:
        raise ValueError("a Lax operator window needs depth >= 2")
    terms: dict[int, DPoly] = {1: DPoly.const(1)}
    for n in range(1, depth - 1):
        terms[-n] = DPoly.gen(n + 1, 0)
    return OperatorSeries.from_terms(terms, depth=depth, top=1, kappa=kappa, domain=DPoly)


_flow_lock = threading.Lock()
_flow_cache: dict[tuple, OperatorSeries] = {}

MAX_FLOW = 4


def kp_flow_rhs(L: OperatorSeries, n: int) -> OperatorSeries:
    """[(L^n)_+, L]; the result has no non-negative powers."""
    if n < 1 or n > MAX_FLOW:
        raise ValueError(f"flow index must lie in 1..{MAX_FLOW}")
    key = (L, n)
    with _flow_lock:
        hit = _flow_cache.get(key)
    if hit is not None:
        return hit
    B = power(L, n).plus_part()
    flow = commutator(B, L)
    for i in flow.coeffs:
        if i >= 0:
            raise ArithmeticError(f"flow {n} produced a non-negative power {i}")
    top = -1
    lo = flow.lo
    if lo is not None and lo > top + 1:
        lo = top + 1
    flow = OperatorSeries(flow.coeffs, top, lo, flow.domain, flow.kappa)
    with _flow_lock:
        _flow_cache[key] = flow
    return flow


def flow_table(L: OperatorSeries, n: int) -> DerivationTable:
    """Time derivatives u_i -> coefficient of xi^{-(i-1)} in the n-th flow."""
    flow = kp_flow_rhs(L, n)
    base = {}
    for i in range(2, L.top - (flow.lo if flow.lo is not None else -MAX_DEPTH) + 1):
        p = -(i - 1)
        if flow.in_window(p):
            base[i] = flow.coeff(p)
    return DerivationTable(base)


def flow_commutator_coeffs(L: OperatorSeries, m: int, n: int) -> dict[int, DPoly]:
    """Coefficients of d_m(flow_n L) - d_n(flow_m L) that are computable.

    Powers whose evaluation needs a time derivative outside the stored
    window are left out; the caller decides whether that is acceptable.
    """
    fm, fn = kp_flow_rhs(L, m), kp_flow_rhs(L, n)
    tm, tn = flow_table(L, m), flow_table(L, n)
    lo = _max_lo(fm.lo, fn.lo)
    out = {}
    p = -1
    while lo is None or p >= lo:
        try:
            val = fn.coeff(p).apply_derivation(tm) - fm.coeff(p).apply_derivation(tn)
        except MissingGenerator:
            break
        out[p] = val
        p -= 1
        if lo is None and p < -MAX_DEPTH:
            break
    return out


def flow_commutativity_check(L: OperatorSeries | None, m: int, n: int, depth: int = DEFAULT_DEPTH) -> bool:
    """True iff [d_m, d_n] L vanishes on every computable coefficient."""
    if L is None:
        L = lax_kp(depth)
    if L.domain is not DPoly:
        raise TypeError("flow commutativity is checked over differential polynomials")
    if m == n:
        return True
    coeffs = flow_commutator_coeffs(L, m, n)
    if not coeffs:
        raise WindowError(f"depth {L.depth} leaves no coefficient of [d_{m}, d_{n}]L computable")
    return all(c.is_zero() for c in coeffs.values())


# ---------------------------------------------------------------------------
# Dickey lemma


def symbol_residue(P: SeriesBase, Q: SeriesBase, sign_q: int = -1, twist: Callable | None = None) -> Coeff:
    """res over the spectral variable of P(x, s) Q(x, sign*s)."""
    total = P.zero_coeff()
    for i, p in P.coeffs.items():
        j = -1 - i
        if not Q.in_window(j):
            raise WindowError(f"spectral residue needs power {j} of the second factor")
        qj = Q.coeffs.get(j)
        if qj is None:
            continue
        total = total + p * qj * (sign_q**j if j >= 0 else Fraction(1, sign_q ** (-j)))
    # powers of P below its window could pair with high powers of Q
    if P.lo is not None and Q.top >= -P.lo:
        raise WindowError("spectral residue reaches into the tail of the first factor")
    return total


def dickey_lemma_check(P: OperatorSeries, Q: OperatorSeries) -> bool:
    """res_s P(x,s) Q(x,-s) == res(P o Q*) for exact Laurent-coefficient P, Q."""
    if P.domain is not XLaurent or Q.domain is not XLaurent:
        raise TypeError("the Dickey check works over Laurent polynomial coefficients")
    lhs = symbol_residue(P, Q, -1)
    Qstar = adjoint(Q, floor=-1 - P.top)
    rhs = res_partial(compose(P, Qstar, floor=-1))
    return lhs == rhs


# ---------------------------------------------------------------------------
# JSON


def coeff_from_text(text: str, domain: type | None = None) -> Coeff:
    if domain is None:
        domain = DPoly if "u[" in text else XLaurent
    return domain.parse(text)


def series_to_json(A: SeriesBase) -> dict:
    out = {"symbol": A.symbol}
    if isinstance(A, OperatorSeries):
        out["kappa"] = format_rational(A.kappa)
    q = getattr(A, "q", None)
    if q is not None:
        out["q"] = format_rational(q.q)
    out["top"] = A.top
    out["depth"] = A.depth
    out["domain"] = A.domain.__name__
    out["coeffs"] = {str(i): str(A.coeffs[i]) for i in A.powers()}
    return out


def series_from_json(data: Mapping) -> SeriesBase:
    domain = {"XLaurent": XLaurent, "DPoly": DPoly}.get(data.get("domain", ""))
    coeffs = {int(k): coeff_from_text(v, domain) for k, v in data.get("coeffs", {}).items()}
    if domain is None:
        domain = type(next(iter(coeffs.values()))) if coeffs else XLaurent
    top = int(data["top"])
    depth = data.get("depth")
    lo = None if depth is None else top - int(depth) + 1
    symbol = data.get("symbol", "xi")
    if symbol == "Dq":
        from .qpsdo import QOperatorSeries

        return QOperatorSeries(coeffs, top, lo, domain, q=data["q"])
    if symbol != "xi":
        raise ValueError(f"unknown series symbol {symbol!r}")
    return OperatorSeries(coeffs, top, lo, domain, kappa=data.get("kappa", "1"))
