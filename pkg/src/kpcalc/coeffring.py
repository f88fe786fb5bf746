"""Coefficient rings for operator series.

* :class:`XLaurent` -- exact Laurent polynomials in x (q-calculus lives here).
* :class:`DPoly` -- differential polynomials in generators ``u[i,k]``, the
  k-th x-derivative of the i-th unknown function.
* :class:`TimesPoly` -- polynomials in the KP times t_1..t_N, with Hirota
  bilinear derivatives and Schur polynomials.
"""

from __future__ import annotations

import re
from fractions import Fraction
from itertools import permutations, product
from math import comb
from typing import Iterable, Mapping

from .exactnum import as_q, format_rational, parse_rational, qint


def _fmt_coeff_term(c: Fraction, body: str) -> str:
    if not body:
        return format_rational(c)
    if c == 1:
        return body
    if c == -1:
        return "-" + body
    return f"{format_rational(c)}*{body}"


def _join_terms(parts: list[str]) -> str:
    if not parts:
        return "0"
    out = parts[0]
    for p in parts[1:]:
        out += " - " + p[1:] if p.startswith("-") else " + " + p
    return out


class MissingGenerator(KeyError):
    """A derivation table has no entry for a generator that occurs."""


# ---------------------------------------------------------------------------
# Laurent polynomials in x


class XLaurent:
    """Finite Laurent polynomial sum c_n x^n with rational c_n."""

    __slots__ = ("terms", "_hash")

    #: exponents outside +-MAX_DEGREE are treated as a configuration error
    MAX_DEGREE = 256

    def __init__(self, terms: Mapping[int, Fraction] | None = None):
        clean = {}
        if terms:
            for n, c in terms.items():
                c = Fraction(c)
                if c:
                    if abs(n) > self.MAX_DEGREE:
                        raise ValueError(f"x-exponent {n} outside the configured degree window")
                    clean[int(n)] = c
        self.terms = clean
        self._hash = None

    @classmethod
    def const(cls, c) -> "XLaurent":
        return cls({0: parse_rational(c)})

    @classmethod
    def monomial(cls, n: int, c=1) -> "XLaurent":
        return cls({n: parse_rational(c)})

    @classmethod
    def zero(cls) -> "XLaurent":
        return cls()

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(n == 0 for n in self.terms)

    def min_degree(self) -> int | None:
        return min(self.terms) if self.terms else None

    def max_degree(self) -> int | None:
        return max(self.terms) if self.terms else None

    def coeff(self, n: int) -> Fraction:
        return self.terms.get(n, Fraction(0))

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = XLaurent.const(other)
        return isinstance(other, XLaurent) and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = XLaurent.const(other)
        if not isinstance(other, XLaurent):
            return NotImplemented
        out = dict(self.terms)
        for n, c in other.terms.items():
            out[n] = out.get(n, 0) + c
        return XLaurent(out)

    __radd__ = __add__

    def __neg__(self):
        return XLaurent({n: -c for n, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Fraction(other)
            return XLaurent({n: c * other for n, c in self.terms.items()})
        if not isinstance(other, XLaurent):
            return NotImplemented
        out: dict[int, Fraction] = {}
        for n, c in self.terms.items():
            for m, d in other.terms.items():
                out[n + m] = out.get(n + m, 0) + c * d
        return XLaurent(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers of a Laurent polynomial are not Laurent in general")
        out = XLaurent.const(1)
        for _ in range(k):
            out = out * self
        return out

    def ddx(self) -> "XLaurent":
        return XLaurent({n - 1: n * c for n, c in self.terms.items() if n})

    def dq(self, q) -> "XLaurent":
        """Jackson derivative: x^n -> (n)_q x^(n-1)."""
        q = as_q(q)
        return XLaurent({n - 1: qint(n, q) * c for n, c in self.terms.items()})

    def scale_x(self, factor) -> "XLaurent":
        """f(x) -> f(factor * x)."""
        factor = parse_rational(factor)
        return XLaurent({n: c * factor**n for n, c in self.terms.items()})

    def tau_scale(self, q, k: int = 1) -> "XLaurent":
        """f(x) -> f(q^k x)."""
        return self.scale_x(as_q(q) ** k)

    def dq_inverse_monomial(self, q) -> "XLaurent":
        """Right inverse of dq on monomials: x^n -> x^(n+1)/(n+1)_q."""
        q = as_q(q)
        if -1 in self.terms:
            raise ValueError("x^-1 has no Laurent q-antiderivative")
        return XLaurent({n + 1: c / qint(n + 1, q) for n, c in self.terms.items()})

    def antiderivative(self) -> "XLaurent":
        if -1 in self.terms:
            raise ValueError("x^-1 has no Laurent antiderivative")
        return XLaurent({n + 1: c / (n + 1) for n, c in self.terms.items()})

    def evaluate(self, x) -> Fraction:
        x = parse_rational(x)
        return sum((c * x**n for n, c in self.terms.items()), Fraction(0))

    def truncate_degree(self, max_degree: int) -> "XLaurent":
        return XLaurent({n: c for n, c in self.terms.items() if n <= max_degree})

    def __str__(self):
        parts = []
        for n in sorted(self.terms, reverse=True):
            body = "" if n == 0 else ("x" if n == 1 else f"x^{n}")
            parts.append(_fmt_coeff_term(self.terms[n], body))
        return _join_terms(parts)

    def __repr__(self):
        return f"XLaurent({self})"

    @classmethod
    def parse(cls, text: str) -> "XLaurent":
        out = cls()
        for coeff, factors in _parse_terms(text):
            n = 0
            for name, e in factors:
                if name != "x":
                    raise ValueError(f"unexpected factor {name!r} in a Laurent polynomial")
                n += e
            out = out + cls.monomial(n, coeff)
        return out


# ---------------------------------------------------------------------------
# differential polynomials


def _mono_str(mono: tuple) -> str:
    parts = []
    i = 0
    while i < len(mono):
        g = mono[i]
        e = 1
        while i + e < len(mono) and mono[i + e] == g:
            e += 1
        name = f"u[{g[0]},{g[1]}]"
        parts.append(name if e == 1 else f"{name}^{e}")
        i += e
    return "*".join(parts)


class DPoly:
    """Polynomial in generators u[i,k] = d^k u_i / dx^k over the rationals.

    A monomial is a sorted tuple of (i, k) pairs, repeated for powers.
    """

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping[tuple, Fraction] | None = None):
        clean = {}
        if terms:
            for mono, c in terms.items():
                c = Fraction(c)
                if c:
                    clean[mono] = c
        self.terms = clean
        self._hash = None

    @classmethod
    def const(cls, c) -> "DPoly":
        return cls({(): parse_rational(c)})

    @classmethod
    def zero(cls) -> "DPoly":
        return cls()

    @classmethod
    def gen(cls, i: int, k: int = 0) -> "DPoly":
        if i < 2 or k < 0:
            raise ValueError(f"generator u[{i},{k}] needs i >= 2, k >= 0")
        return cls({((i, k),): Fraction(1)})

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(m == () for m in self.terms)

    def generators(self) -> set[tuple[int, int]]:
        return {g for m in self.terms for g in m}

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DPoly.const(other)
        return isinstance(other, DPoly) and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DPoly.const(other)
        if not isinstance(other, DPoly):
            return NotImplemented
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return DPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return DPoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Fraction(other)
            return DPoly({m: c * other for m, c in self.terms.items()})
        if not isinstance(other, DPoly):
            return NotImplemented
        out: dict[tuple, Fraction] = {}
        for m, c in self.terms.items():
            for n, d in other.terms.items():
                key = tuple(sorted(m + n))
                out[key] = out.get(key, 0) + c * d
        return DPoly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = DPoly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def ddx(self) -> "DPoly":
        """Total x-derivative: u[i,k] -> u[i,k+1], extended as a derivation."""
        out: dict[tuple, Fraction] = {}
        for m, c in self.terms.items():
            for pos, (i, k) in enumerate(m):
                if pos and m[pos - 1] == (i, k):
                    continue  # repeated factor handled with multiplicity below
                e = m.count((i, k))
                rest = list(m)
                rest.remove((i, k))
                key = tuple(sorted(rest + [(i, k + 1)]))
                out[key] = out.get(key, 0) + c * e
        return DPoly(out)

    def ddx_n(self, n: int) -> "DPoly":
        out = self
        for _ in range(n):
            out = out.ddx()
        return out

    def apply_derivation(self, table: "DerivationTable") -> "DPoly":
        """Apply the derivation u[i,0] -> table[i], u[i,k] -> d^k/dx^k table[i]."""
        out = DPoly()
        for m, c in self.terms.items():
            for pos, g in enumerate(m):
                if pos and m[pos - 1] == g:
                    continue
                e = m.count(g)
                rest = list(m)
                rest.remove(g)
                out = out + DPoly({tuple(rest): c * e}) * table.image(*g)
        return out

    def substitute(self, images: Mapping[int, "DPoly"]) -> "DPoly":
        """Replace u[i,k] by d^k/dx^k images[i] (generators not listed stay put)."""
        cache: dict[tuple[int, int], DPoly] = {}

        def img(g):
            if g not in cache:
                i, k = g
                cache[g] = images[i].ddx_n(k) if i in images else DPoly({(g,): 1})
            return cache[g]

        out = DPoly()
        for m, c in self.terms.items():
            term = DPoly.const(c)
            for g in m:
                term = term * img(g)
            out = out + term
        return out

    def __str__(self):
        parts = []
        for m in sorted(self.terms, key=lambda m: (len(m), m)):
            parts.append(_fmt_coeff_term(self.terms[m], _mono_str(m)))
        return _join_terms(parts)

    def __repr__(self):
        return f"DPoly({self})"

    @classmethod
    def parse(cls, text: str) -> "DPoly":
        out = cls()
        for coeff, factors in _parse_terms(text):
            term = cls.const(coeff)
            for name, e in factors:
                m = re.fullmatch(r"u\[(\d+),(\d+)\]", name)
                if m is None:
                    raise ValueError(f"unexpected factor {name!r} in a differential polynomial")
                term = term * cls.gen(int(m.group(1)), int(m.group(2))) ** e
            out = out + term
        return out


class DerivationTable:
    """Images of the base generators u[i,0] under a time derivation.

    Derivative images u[i,k] -> d^k/dx^k image are built lazily and cached.
    Generators without an entry raise :class:`MissingGenerator` instead of
    being silently treated as constants.
    """

    def __init__(self, base: Mapping[int, DPoly]):
        self.base = dict(base)
        self._cache: dict[tuple[int, int], DPoly] = {}

    def image(self, i: int, k: int) -> DPoly:
        key = (i, k)
        if key not in self._cache:
            if i not in self.base:
                raise MissingGenerator(f"no time derivative available for u[{i},{k}]")
            self._cache[key] = self.base[i].ddx_n(k) if k else self.base[i]
        return self._cache[key]


def ddx(f):
    """x-derivative of an XLaurent or DPoly."""
    return f.ddx()


def dq(f: XLaurent, q) -> XLaurent:
    return f.dq(q)


def tau_scale(f: XLaurent, q, k: int) -> XLaurent:
    return f.tau_scale(q, k)


def dq_inverse_monomial(f: XLaurent, q) -> XLaurent:
    return f.dq_inverse_monomial(q)


# ---------------------------------------------------------------------------
# term parser shared by the canonical renderings

_FACTOR_RE = re.compile(r"(x|u\[\d+,\d+\]|t\d+)(?:\^(-?\d+))?$")


def _parse_terms(text: str):
    """Yield (coefficient, [(factor, exponent), ...]) for a canonical rendering."""
    s = text.replace(" ", "")
    if s in ("", "0"):
        return
    # split on + and - that start a new term (not exponents like x^-2)
    pieces = re.split(r"(?<=[^\^\*/])(?=[+-])", s)
    for piece in pieces:
        sign = Fraction(1)
        if piece[0] in "+-":
            if piece[0] == "-":
                sign = Fraction(-1)
            piece = piece[1:]
        coeff = sign
        factors = []
        for tok in piece.split("*"):
            if re.fullmatch(r"\d+(/\d+)?", tok):
                coeff *= parse_rational(tok)
                continue
            m = _FACTOR_RE.match(tok)
            if m is None:
                raise ValueError(f"cannot parse term {tok!r} in {text!r}")
            factors.append((m.group(1), int(m.group(2)) if m.group(2) else 1))
        yield coeff, factors


# ---------------------------------------------------------------------------
# polynomials in KP times


class TimesPoly:
    """Polynomial in t_1..t_N with rational coefficients."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[tuple, Fraction] | None = None):
        if n < 1:
            raise ValueError("a times polynomial needs at least one variable")
        self.n = n
        clean = {}
        if terms:
            for e, c in terms.items():
                c = Fraction(c)
                if len(e) != n or any(x < 0 for x in e):
                    raise ValueError(f"bad exponent {e} for arity {n}")
                if c:
                    clean[tuple(e)] = c
        self.terms = clean

    @classmethod
    def const(cls, n: int, c=1) -> "TimesPoly":
        return cls(n, {(0,) * n: parse_rational(c)})

    @classmethod
    def var(cls, n: int, j: int) -> "TimesPoly":
        """t_j (1-based)."""
        if not 1 <= j <= n:
            raise ValueError(f"t{j} outside arity {n}")
        e = [0] * n
        e[j - 1] = 1
        return cls(n, {tuple(e): Fraction(1)})

    def _coerce(self, other):
        if isinstance(other, (int, Fraction)):
            return TimesPoly.const(self.n, other)
        if isinstance(other, TimesPoly):
            if other.n != self.n:
                raise ValueError("arity mismatch between times polynomials")
            return other
        return None

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        other = self._coerce(other)
        return other is not None and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return TimesPoly(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return TimesPoly(self.n, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return TimesPoly(self.n, {e: c * other for e, c in self.terms.items()})
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out: dict[tuple, Fraction] = {}
        for e, c in self.terms.items():
            for f, d in other.terms.items():
                key = tuple(a + b for a, b in zip(e, f))
                out[key] = out.get(key, 0) + c * d
        return TimesPoly(self.n, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = TimesPoly.const(self.n)
        for _ in range(k):
            out = out * self
        return out

    def diff(self, j: int, times: int = 1) -> "TimesPoly":
        """(d/dt_j)^times, j 1-based."""
        out = {}
        for e, c in self.terms.items():
            ej = e[j - 1]
            if ej < times:
                continue
            f = list(e)
            f[j - 1] = ej - times
            k = 1
            for s in range(times):
                k *= ej - s
            out[tuple(f)] = c * k
        return TimesPoly(self.n, out)

    def diff_multi(self, multi) -> "TimesPoly":
        out = self
        for j, m in enumerate(multi, start=1):
            if m:
                out = out.diff(j, m)
        return out

    def shift(self, shifts) -> "TimesPoly":
        """p(t + c) for a rational shift vector c (padded with zeros)."""
        shifts = [parse_rational(c) for c in shifts][: self.n]
        shifts += [Fraction(0)] * (self.n - len(shifts))
        out = TimesPoly(self.n)
        for e, c in self.terms.items():
            term = TimesPoly.const(self.n, c)
            for j, ej in enumerate(e, start=1):
                if ej:
                    term = term * (TimesPoly.var(self.n, j) + shifts[j - 1]) ** ej
            out = out + term
        return out

    def evaluate(self, point) -> Fraction:
        point = [parse_rational(v) for v in point]
        total = Fraction(0)
        for e, c in self.terms.items():
            term = c
            for v, ej in zip(point, e):
                term *= v**ej
            total += term
        return total

    def __str__(self):
        parts = []
        for e in sorted(self.terms, key=lambda e: (sum(e), e), reverse=True):
            body = "*".join(
                f"t{j}" if ej == 1 else f"t{j}^{ej}" for j, ej in enumerate(e, start=1) if ej
            )
            parts.append(_fmt_coeff_term(self.terms[e], body))
        return _join_terms(parts)

    def __repr__(self):
        return f"TimesPoly({self})"

    @classmethod
    def parse(cls, text: str, n: int) -> "TimesPoly":
        out = cls(n)
        for coeff, factors in _parse_terms(text):
            term = cls.const(n, coeff)
            for name, e in factors:
                if not name.startswith("t"):
                    raise ValueError(f"unexpected factor {name!r} in a times polynomial")
                term = term * cls.var(n, int(name[1:])) ** e
            out = out + term
        return out


#: default number of KP times for Hirota computations
HIROTA_ARITY = 3
MAX_HIROTA_ARITY = 6


def hirota_apply(a: TimesPoly, b: TimesPoly, multi) -> TimesPoly:
    """Hirota bilinear derivative D^multi a.b.

    Uses the expansion D^m a.b = sum_k C(m,k) (-1)^(m-k) d^k a d^(m-k) b,
    one factor per time variable.
    """
    multi = tuple(multi)
    if len(multi) != a.n or a.n != b.n:
        raise ValueError("multi-index arity must match the time variables")
    out = TimesPoly(a.n)
    for ks in product(*(range(m + 1) for m in multi)):
        sign = 1
        weight = 1
        for m, k in zip(multi, ks):
            weight *= comb(m, k)
            if (m - k) % 2:
                sign = -sign
        rest = tuple(m - k for m, k in zip(multi, ks))
        out = out + (a.diff_multi(ks) * b.diff_multi(rest)) * (sign * weight)
    return out


def schur_p(j: int, n: int = HIROTA_ARITY) -> TimesPoly:
    """Elementary Schur polynomial: exp(sum t_k z^k) = sum p_j z^j."""
    if j < 0:
        return TimesPoly(n)
    return _schur_table(n, j)[j]


def _schur_table(n: int, upto: int) -> list[TimesPoly]:
    p = [TimesPoly.const(n)]
    for m in range(1, upto + 1):
        acc = TimesPoly(n)
        for k in range(1, min(m, n) + 1):
            acc = acc + TimesPoly.var(n, k) * p[m - k] * k
        p.append(acc * Fraction(1, m))
    return p


def schur_partition(partition, n: int = HIROTA_ARITY) -> TimesPoly:
    """Schur polynomial of a partition through the Jacobi-Trudi determinant."""
    lam = [x for x in partition if x > 0]
    size = len(lam)
    if size == 0:
        return TimesPoly.const(n)
    entries = [[schur_p(lam[i] - i + j, n) for j in range(size)] for i in range(size)]
    out = TimesPoly(n)
    for perm in permutations(range(size)):
        inv = sum(1 for a in range(size) for b in range(a + 1, size) if perm[a] > perm[b])
        term = TimesPoly.const(n, -1 if inv % 2 else 1)
        for i in range(size):
            term = term * entries[i][perm[i]]
        out = out + term
    return out


def kp_hirota_residual(tau: TimesPoly) -> TimesPoly:
    """(D1^4 + 3 D2^2 - 4 D1 D3) tau.tau."""
    if tau.n < 3:
        raise ValueError("the KP bilinear equation needs at least three times")
    pad = (0,) * (tau.n - 3)
    return (
        hirota_apply(tau, tau, (4, 0, 0) + pad)
        + hirota_apply(tau, tau, (0, 2, 0) + pad) * 3
        - hirota_apply(tau, tau, (1, 0, 1) + pad) * 4
    )


def q_shift_vector(x, q, length: int) -> list[Fraction]:
    """[x]_q = (x, (1-q)^2 x^2 / 2(1-q^2), (1-q)^3 x^3 / 3(1-q^3), ...)."""
    x = parse_rational(x)
    q = as_q(q)
    return [(1 - q) ** k * x**k / (k * (1 - q**k)) for k in range(1, length + 1)]


def qtau_shift(tau: TimesPoly, x, q) -> TimesPoly:
    """tau(t + [x]_q), the shift truncated at the arity of tau."""
    return tau.shift(q_shift_vector(x, q, tau.n))
