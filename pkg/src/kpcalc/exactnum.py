"""Exact rational arithmetic and q-combinatorics.

Every coefficient in the package is a :class:`fractions.Fraction`; the
deformation parameter q is a concrete rational wrapped in :class:`QValue`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Union

Rational = Fraction
RationalLike = Union[int, Fraction, str]

#: deepest series order any q-quantity is required to support
MAX_DEPTH = 32

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


def parse_rational(text: RationalLike) -> Fraction:
    """Parse ``"p/r"`` or an integer into a Fraction.

    Decimal notation is refused on purpose: ``0.1`` has no exact meaning
    that the user can be assumed to intend.
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    m = _RATIONAL_RE.match(str(text))
    if m is None:
        if "." in str(text) or "e" in str(text).lower():
            raise ValueError(
                f"decimal value {text!r} rejected; give q and kappa in exact rational form such as '3/2'"
            )
        raise ValueError(f"cannot parse {text!r} as a rational number 'p/r'")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) else 1
    if den == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Fraction(num, den)


def format_rational(r: Fraction) -> str:
    return str(r.numerator) if r.denominator == 1 else f"{r.numerator}/{r.denominator}"


@dataclass(frozen=True)
class QValue:
    """A valid deformation parameter: rational, not 0, not 1, not -1.

    q = -1 is excluded because (k)_q vanishes for every even k.
    """

    q: Fraction

    def __post_init__(self):
        q = parse_rational(self.q)
        object.__setattr__(self, "q", q)
        if q == 0 or q == 1:
            raise ValueError(f"q must differ from 0 and 1, got {q}")
        # (k)_q = 0 iff q^k = 1; over the rationals that means q = -1
        if q == -1:
            raise ValueError("q = -1 makes (k)_q vanish for even k")

    @classmethod
    def parse(cls, text: RationalLike) -> "QValue":
        return cls(parse_rational(text))

    def inverse(self) -> "QValue":
        return QValue(1 / self.q)

    def __str__(self):
        return format_rational(self.q)


def as_q(q) -> Fraction:
    if isinstance(q, QValue):
        return q.q
    return QValue(parse_rational(q)).q


def qint(n: int, q) -> Fraction:
    """(n)_q = (q^n - 1)/(q - 1), for any integer n."""
    q = as_q(q)
    return (q**n - 1) / (q - 1)


def qfactorial(k: int, q) -> Fraction:
    if k < 0:
        raise ValueError("qfactorial needs k >= 0")
    return _qfactorial(k, as_q(q))


@lru_cache(maxsize=4096)
def _qfactorial(k: int, q: Fraction) -> Fraction:
    out = Fraction(1)
    for i in range(1, k + 1):
        out *= qint(i, q)
    return out


def qbinom_bracket(m: int, k: int, q) -> Fraction:
    """Falling-product q-binomial (m)_q (m-1)_q ... (m-k+1)_q / (k)_q!.

    Valid for negative m, which the negative-order q-Leibniz rule needs.
    """
    if k < 0:
        raise ValueError("qbinom_bracket needs k >= 0")
    return _qbinom_bracket(m, k, as_q(q))


@lru_cache(maxsize=65536)
def _qbinom_bracket(m: int, k: int, q: Fraction) -> Fraction:
    num = Fraction(1)
    for i in range(k):
        num *= qint(m - i, q)
    return num / _qfactorial(k, q)


def qpochhammer(a, q, k: int) -> Fraction:
    """(a;q)_k = prod_{s<k} (1 - a q^s)."""
    if k < 0:
        raise ValueError("qpochhammer needs k >= 0")
    a = parse_rational(a)
    q = parse_rational(q.q if isinstance(q, QValue) else q)
    out = Fraction(1)
    for s in range(k):
        out *= 1 - a * q**s
    return out


def qbinom_gauss(n: int, k: int, q) -> Fraction:
    """Gaussian binomial (q;q)_n / ((q;q)_k (q;q)_{n-k})."""
    if n < 0 or k < 0:
        raise ValueError("qbinom_gauss needs n, k >= 0")
    if k > n:
        raise ValueError(f"qbinom_gauss needs k <= n, got n={n}, k={k}")
    q = as_q(q)
    return qpochhammer(q, q, n) / (qpochhammer(q, q, k) * qpochhammer(q, q, n - k))


def binom_generalized(n: int, k: int) -> Fraction:
    """n(n-1)...(n-k+1)/k!, valid for negative n."""
    if k < 0:
        raise ValueError("binom_generalized needs k >= 0")
    if n >= 0:
        return Fraction(comb(n, k))
    num = 1
    for i in range(k):
        num *= n - i
    return Fraction(num, factorial(k))


def check_binomial_identity(n: int, r: int, gamma: int, mu: int) -> bool:
    """Associativity identity behind the symbol product on monomials:

        C(n, g) C(n+r-g, mu) == sum_{a+b = g+mu} C(b, g) C(n, b) C(r, a)
    """
    if gamma < 0 or mu < 0:
        raise ValueError("gamma and mu must be non-negative")
    lhs = binom_generalized(n, gamma) * binom_generalized(n + r - gamma, mu)
    total = gamma + mu
    rhs = sum(
        binom_generalized(beta, gamma) * binom_generalized(n, beta) * binom_generalized(r, total - beta)
        for beta in range(total + 1)
    )
    return lhs == rhs


def binomial_identity_grid(lo: int = -4, hi: int = 4, kmax: int = 4) -> list[tuple[int, int, int, int]]:
    """Return the failing points of the identity over an exhaustive grid."""
    failures = []
    for n in range(lo, hi + 1):
        for r in range(lo, hi + 1):
            for g in range(kmax + 1):
                for mu in range(kmax + 1):
                    if not check_binomial_identity(n, r, g, mu):
                        failures.append((n, r, g, mu))
    return failures


def qexp_coeffs(N: int, q) -> list[Fraction]:
    """Coefficients of exp_q(y) = sum (1-q)^k y^k / (q;q)_k up to y^N."""
    q = as_q(q)
    _check_order(N)
    return [(1 - q) ** k / qpochhammer(q, q, k) for k in range(N + 1)]


def qexp_recip_coeffs(N: int, q) -> list[Fraction]:
    """Coefficients of exp_{1/q}(-y) up to y^N."""
    q = as_q(q)
    p = 1 / q
    return [(-1) ** k * c for k, c in enumerate(qexp_coeffs(N, p))]


def qexp_log_coeffs(N: int, q) -> list[Fraction]:
    """exp_q through its exponential form exp(sum (1-q)^k y^k / (k (1-q^k)))."""
    q = as_q(q)
    _check_order(N)
    f = [Fraction(0)] + [(1 - q) ** k / (k * (1 - q**k)) for k in range(1, N + 1)]
    return series_exp(f)


def series_exp(f: list[Fraction]) -> list[Fraction]:
    """exp of a truncated power series with f[0] == 0, via n g_n = sum k f_k g_{n-k}."""
    if f and f[0] != 0:
        raise ValueError("series_exp needs a vanishing constant term")
    N = len(f) - 1
    g = [Fraction(1)] + [Fraction(0)] * N
    for n in range(1, N + 1):
        g[n] = sum((k * f[k] * g[n - k] for k in range(1, n + 1)), Fraction(0)) / n
    return g


def series_mul(a: list[Fraction], b: list[Fraction], N: int) -> list[Fraction]:
    out = [Fraction(0)] * (N + 1)
    for i, ai in enumerate(a[: N + 1]):
        if ai == 0:
            continue
        for j, bj in enumerate(b[: N + 1 - i]):
            out[i + j] += ai * bj
    return out


def _check_order(N: int):
    if N < 0:
        raise ValueError("series order must be non-negative")
    if N > MAX_DEPTH:
        raise ValueError(f"series order {N} exceeds the configured maximum {MAX_DEPTH}")


# -- one-variable integer polynomials, used for the symbolic Gaussian binomial


class _Poly:
    """Dense integer polynomial in q, coefficients lowest degree first."""

    __slots__ = ("c",)

    def __init__(self, c):
        c = list(c)
        while c and c[-1] == 0:
            c.pop()
        self.c = c

    def __add__(self, other):
        n = max(len(self.c), len(other.c))
        a = self.c + [0] * (n - len(self.c))
        b = other.c + [0] * (n - len(other.c))
        return _Poly(x + y for x, y in zip(a, b))

    def shift(self, k: int) -> "_Poly":
        return _Poly([0] * k + self.c)

    def __call__(self, x):
        out = Fraction(0)
        for coeff in reversed(self.c):
            out = out * x + coeff
        return out


@lru_cache(maxsize=None)
def gauss_binomial_poly(n: int, k: int) -> tuple[int, ...]:
    """Coefficient list of the Gaussian binomial as a polynomial in q.

    Built from the q-Pascal rule [n,k] = [n-1,k-1] + q^k [n-1,k].
    """
    if k < 0 or k > n:
        return ()
    if k == 0 or k == n:
        return (1,)
    left = _Poly(gauss_binomial_poly(n - 1, k - 1))
    right = _Poly(gauss_binomial_poly(n - 1, k)).shift(k)
    return tuple((left + right).c)


def eval_poly(coeffs, x) -> Fraction:
    return _Poly(coeffs)(parse_rational(x))
