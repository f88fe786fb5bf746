"""Star products and brackets on phase-space symbols f(x, p).

Symbols are finite sums of Laurent monomials x^m p^n with rational
coefficients.  Exponentials of Euler-type operators (the q-deformed
products) act on monomials as integer powers of q and are applied that way,
never by truncating a series in log q.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, factorial, isqrt
from typing import Callable, Iterable, Mapping

from .exactnum import QValue, format_rational, parse_rational, qint

Mono = tuple[int, int]


def _falling(n: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= n - i
    return out


class PhaseSymbol:
    """sum c_{m,n} x^m p^n with finitely many terms."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Mono, Fraction] | None = None):
        clean = {}
        for (m, n), c in (terms or {}).items():
            c = Fraction(c)
            if c:
                clean[(int(m), int(n))] = c
        self.terms = clean

    @classmethod
    def const(cls, c) -> "PhaseSymbol":
        return cls({(0, 0): parse_rational(c)})

    @classmethod
    def mono(cls, m: int, n: int, c=1) -> "PhaseSymbol":
        return cls({(m, n): parse_rational(c)})

    @classmethod
    def from_xlaurent(cls, f, n: int = 0) -> "PhaseSymbol":
        """Fold a coefficient f(x) into x-exponents at p-degree n."""
        return cls({(m, n): c for m, c in f.terms.items()})

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other):
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return PhaseSymbol(out)

    def __neg__(self):
        return PhaseSymbol({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, r) -> "PhaseSymbol":
        r = Fraction(r)
        return PhaseSymbol({k: c * r for k, c in self.terms.items()})

    def __mul__(self, other):
        """Commutative pointwise product."""
        if not isinstance(other, PhaseSymbol):
            return self.scale(other)
        out: dict[Mono, Fraction] = {}
        for (m, n), c in self.terms.items():
            for (a, b), d in other.terms.items():
                k = (m + a, n + b)
                out[k] = out.get(k, 0) + c * d
        return PhaseSymbol(out)

    __rmul__ = scale

    def __eq__(self, other):
        return isinstance(other, PhaseSymbol) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def ddx(self, k: int = 1) -> "PhaseSymbol":
        return PhaseSymbol({(m - k, n): c * _falling(m, k) for (m, n), c in self.terms.items()})

    def ddp(self, k: int = 1) -> "PhaseSymbol":
        return PhaseSymbol({(m, n - k): c * _falling(n, k) for (m, n), c in self.terms.items()})

    def x_degree(self) -> int:
        return max((m for m, _ in self.terms), default=0)

    def min_x(self) -> int:
        return min((m for m, _ in self.terms), default=0)

    def p_part(self, lo: int) -> "PhaseSymbol":
        """Terms with p-exponent >= lo."""
        return PhaseSymbol({k: c for k, c in self.terms.items() if k[1] >= lo})

    def coeff_of_p(self, n: int) -> dict[int, Fraction]:
        return {m: c for (m, k), c in self.terms.items() if k == n}

    def scale_vars(self, sx=1, sp=1) -> "PhaseSymbol":
        """f(sx x, sp p)."""
        sx, sp = Fraction(sx), Fraction(sp)
        return PhaseSymbol({(m, n): c * sx**m * sp**n for (m, n), c in self.terms.items()})

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for (m, n) in sorted(self.terms, key=lambda k: (-k[1], -k[0])):
            c = self.terms[(m, n)]
            factors = []
            if m:
                factors.append("x" if m == 1 else f"x^{m}")
            if n:
                factors.append("p" if n == 1 else f"p^{n}")
            mono = "*".join(factors)
            mag = abs(c)
            if not mono:
                body = format_rational(mag)
            elif mag == 1:
                body = mono
            else:
                body = f"{format_rational(mag)}*{mono}"
            parts.append(("-" if c < 0 else "+", body))
        s = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            s += f" {sign} {body}"
        return s

    __repr__ = __str__

    def to_json(self) -> dict:
        return {"terms": [{"x": m, "p": n, "c": format_rational(self.terms[(m, n)])}
                          for (m, n) in sorted(self.terms)]}

    @classmethod
    def from_json(cls, data: Mapping) -> "PhaseSymbol":
        if not isinstance(data, Mapping) or "terms" not in data:
            raise ValueError("phase symbol JSON needs a 'terms' list")
        out: dict[Mono, Fraction] = {}
        for i, t in enumerate(data["terms"]):
            try:
                k = (int(t["x"]), int(t["p"]))
                c = parse_rational(t["c"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"terms[{i}]: {exc}") from exc
            out[k] = out.get(k, 0) + c
        return cls(out)


# ---------------------------------------------------------------------------
# kappa-products and brackets


def _bidiff(f: PhaseSymbol, g: PhaseSymbol, s: int, sign: int) -> PhaseSymbol:
    """sum_j sign^j C(s,j) (dx^j dp^(s-j) f)(dx^(s-j) dp^j g)."""
    out = PhaseSymbol()
    for j in range(s + 1):
        a = f.ddx(j).ddp(s - j)
        if a.is_zero():
            continue
        b = g.ddx(s - j).ddp(j)
        if b.is_zero():
            continue
        out = out + (a * b).scale(sign**j * comb(s, j))
    return out


def _order_bound(f: PhaseSymbol, g: PhaseSymbol, max_order: int | None) -> int:
    if f.min_x() >= 0 and g.min_x() >= 0:
        # each term spends j x-derivatives on f and s-j on g
        bound = f.x_degree() + g.x_degree()
        return bound if max_order is None else min(bound, max_order)
    if max_order is None:
        raise ValueError("negative x-powers: the derivative sum does not terminate; give max_order")
    return max_order


def moyal_star(f: PhaseSymbol, g: PhaseSymbol, kappa, max_order: int | None = None) -> PhaseSymbol:
    """f*g = sum_s kappa^s/s! sum_j (-1)^j C(s,j) (dx^j dp^(s-j) f)(dx^(s-j) dp^j g)."""
    kappa = parse_rational(kappa)
    out = PhaseSymbol()
    for s in range(_order_bound(f, g, max_order) + 1):
        w = kappa**s / factorial(s)
        if w:
            out = out + _bidiff(f, g, s, -1).scale(w)
    return out


def moyal_bracket(f: PhaseSymbol, g: PhaseSymbol, kappa, max_order: int | None = None) -> PhaseSymbol:
    """(f*g - g*f)/(2 kappa), written as the odd-order sum so that kappa = 0 is allowed:

        sum_s kappa^(2s)/(2s+1)! sum_j (-1)^j C(2s+1,j) (dx^j dp^(2s+1-j) f)(dx^(2s+1-j) dp^j g)
    """
    kappa = parse_rational(kappa)
    out = PhaseSymbol()
    top = _order_bound(f, g, max_order)
    for s in range(0, top // 2 + 1):
        order = 2 * s + 1
        if order > top:
            break
        w = kappa ** (2 * s) / factorial(order)
        if w:
            out = out + _bidiff(f, g, order, -1).scale(w)
    return out


def poisson_dkp(f: PhaseSymbol, g: PhaseSymbol) -> PhaseSymbol:
    """{f, g} = dp f dx g - dx f dp g."""
    return f.ddp() * g.ddx() - f.ddx() * g.ddp()


def circ_star(f: PhaseSymbol, g: PhaseSymbol, kappa, max_order: int | None = None) -> PhaseSymbol:
    """Symbol composition: sum kappa^n/n! dp^n f dx^n g (p plays the role of xi)."""
    kappa = parse_rational(kappa)
    if g.min_x() >= 0:
        top = g.x_degree() if max_order is None else min(g.x_degree(), max_order)
    elif max_order is None:
        raise ValueError("negative x-powers in the right factor: give max_order")
    else:
        top = max_order
    out = PhaseSymbol()
    for n in range(top + 1):
        out = out + (f.ddp(n) * g.ddx(n)).scale(kappa**n / factorial(n))
    return out


def circ_commutator(f: PhaseSymbol, g: PhaseSymbol, kappa) -> PhaseSymbol:
    """(1/kappa)(f o g - g o f), the commutator bracket of symbol composition."""
    kappa = parse_rational(kappa)
    if kappa == 0:
        raise ValueError("the commutator bracket divides by kappa")
    return (circ_star(f, g, kappa) - circ_star(g, f, kappa)).scale(1 / kappa)


def bracket_prime_kappa(f: PhaseSymbol, g: PhaseSymbol, kappa, max_order: int | None = None) -> PhaseSymbol:
    """sum kappa^(2n+1)/(2n+1)! [dp^(2n+1) f dx^(2n+1) g - dp^(2n+1) g dx^(2n+1) f]."""
    kappa = parse_rational(kappa)
    top = _order_bound(f, g, max_order)
    out = PhaseSymbol()
    for order in range(1, top + 1, 2):
        term = f.ddp(order) * g.ddx(order) - g.ddp(order) * f.ddx(order)
        out = out + term.scale(kappa**order / factorial(order))
    return out


def bracket_order_table(f: PhaseSymbol, g: PhaseSymbol) -> list[dict]:
    """kappa^k coefficients of the primed bracket and of f o g - g o f, side by side.

    The two are not claimed equal; the table records where they differ.
    """
    top = max(1, f.x_degree() + g.x_degree())
    rows = []
    for k in range(1, top + 1):
        circ_k = (f.ddp(k) * g.ddx(k) - g.ddp(k) * f.ddx(k)).scale(Fraction(1, factorial(k)))
        prime_k = circ_k if k % 2 else PhaseSymbol()
        rows.append({
            "order": k,
            "prime": str(prime_k),
            "circ": str(circ_k),
            "difference": str(circ_k - prime_k),
        })
    return rows


# ---------------------------------------------------------------------------
# q-deformed products: exact monomial phase factors


def _pair_product(f: PhaseSymbol, g: PhaseSymbol, phase: Callable[[int, int, int, int], Fraction]) -> PhaseSymbol:
    out: dict[Mono, Fraction] = {}
    for (m, n), c in f.terms.items():
        for (a, b), d in g.terms.items():
            k = (m + a, n + b)
            out[k] = out.get(k, 0) + c * d * phase(m, n, a, b)
    return PhaseSymbol(out)


def _phase_q(q) -> Fraction:
    """Phase-factor products accept q = 1 (the commutative limit); only q = 0 is excluded."""
    q = parse_rational(q.q if isinstance(q, QValue) else q)
    if q == 0:
        raise ValueError("q must be nonzero")
    return q


def qplane_star(f: PhaseSymbol, g: PhaseSymbol, q) -> PhaseSymbol:
    """x^m p^n * x^a p^b = q^(-na) x^(m+a) p^(n+b), the ordering with xp = q px."""
    q = _phase_q(q)
    return _pair_product(f, g, lambda m, n, a, b: q ** (-n * a))


def qstandard_star(f: PhaseSymbol, g: PhaseSymbol, q) -> PhaseSymbol:
    """exp(log q * <-dp p x ->dx): phase q^(na)."""
    q = _phase_q(q)
    return _pair_product(f, g, lambda m, n, a, b: q ** (n * a))


def qantistandard_star(f: PhaseSymbol, g: PhaseSymbol, q) -> PhaseSymbol:
    """exp(-log q * <-dx x p ->dp): phase q^(-mb)."""
    q = _phase_q(q)
    return _pair_product(f, g, lambda m, n, a, b: q ** (-m * b))


def rational_sqrt(r: Fraction) -> Fraction | None:
    if r < 0:
        return None
    a, b = isqrt(r.numerator), isqrt(r.denominator)
    if a * a == r.numerator and b * b == r.denominator:
        return Fraction(a, b)
    return None


def qweyl_star(f: PhaseSymbol, g: PhaseSymbol, q) -> PhaseSymbol:
    """exp(-(log q)/2 [<-dx x p ->dp - <-dp p x ->dx]): phase q^((na - mb)/2).

    Half-integer powers of q are only rational when q is a rational square;
    any product that needs one with a non-square q raises ValueError.
    """
    q = _phase_q(q)
    root = rational_sqrt(q)

    def phase(m, n, a, b):
        e = n * a - m * b
        if e % 2 == 0:
            return q ** (e // 2)
        if root is None:
            raise ValueError(
                f"q-Weyl phase q^({e}/2) is irrational for q = {format_rational(q)}; use a square q such as 4 or 9/4"
            )
        return root**e

    return _pair_product(f, g, phase)


PRODUCTS = {
    "moyal": lambda f, g, q, kappa: moyal_star(f, g, kappa),
    "circ": lambda f, g, q, kappa: circ_star(f, g, kappa),
    "qplane": lambda f, g, q, kappa: qplane_star(f, g, q),
    "qweyl": lambda f, g, q, kappa: qweyl_star(f, g, q),
    "qstandard": lambda f, g, q, kappa: qstandard_star(f, g, q),
    "qantistandard": lambda f, g, q, kappa: qantistandard_star(f, g, q),
}


def star_product(name: str, f: PhaseSymbol, g: PhaseSymbol, q="3/2", kappa="1/2") -> PhaseSymbol:
    try:
        fn = PRODUCTS[name]
    except KeyError:
        raise ValueError(f"unknown product {name!r}; choose from {', '.join(sorted(PRODUCTS))}") from None
    return fn(f, g, q, kappa)


# ---------------------------------------------------------------------------
# torus algebra and the sine bracket


class TorusElement:
    """sum c_{mn} z^m zeta^n with finite support."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Mono, Fraction] | None = None):
        self.terms = {(int(m), int(n)): Fraction(c) for (m, n), c in (terms or {}).items() if c}

    @classmethod
    def mono(cls, m: int, n: int, c=1) -> "TorusElement":
        return cls({(m, n): parse_rational(c)})

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other):
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return TorusElement(out)

    def __neg__(self):
        return TorusElement({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, r) -> "TorusElement":
        return TorusElement({k: c * Fraction(r) for k, c in self.terms.items()})

    def __eq__(self, other):
        return isinstance(other, TorusElement) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __str__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"{format_rational(c)}*z^{m}*zeta^{n}" for (m, n), c in sorted(self.terms.items()))

    __repr__ = __str__

    def to_json(self) -> dict:
        return {"terms": [{"z": m, "zeta": n, "c": format_rational(c)} for (m, n), c in sorted(self.terms.items())]}

    @classmethod
    def from_json(cls, data: Mapping) -> "TorusElement":
        out: dict[Mono, Fraction] = {}
        for i, t in enumerate(data["terms"]):
            try:
                k = (int(t["z"]), int(t["zeta"]))
                c = parse_rational(t["c"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"terms[{i}]: {exc}") from exc
            out[k] = out.get(k, 0) + c
        return cls(out)


class FormalLambdaSeries:
    """sum_{k <= order} lambda^k A_k with torus coefficients; order = 2S."""

    __slots__ = ("coeffs", "order")

    def __init__(self, coeffs: Mapping[int, TorusElement], order: int):
        self.order = order
        self.coeffs = {k: v for k, v in coeffs.items() if 0 <= k <= order and not v.is_zero()}

    @classmethod
    def const(cls, a: TorusElement, order: int) -> "FormalLambdaSeries":
        return cls({0: a}, order)

    def coeff(self, k: int) -> TorusElement:
        return self.coeffs.get(k, TorusElement())

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other):
        order = min(self.order, other.order)
        keys = set(self.coeffs) | set(other.coeffs)
        return FormalLambdaSeries({k: self.coeff(k) + other.coeff(k) for k in keys}, order)

    def __neg__(self):
        return FormalLambdaSeries({k: -v for k, v in self.coeffs.items()}, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __eq__(self, other):
        return isinstance(other, FormalLambdaSeries) and self.order == other.order and self.coeffs == other.coeffs

    def __str__(self):
        if not self.coeffs:
            return f"O(lambda^{self.order + 1})"
        return " + ".join(f"lambda^{k}*({v})" for k, v in sorted(self.coeffs.items())) + f" + O(lambda^{self.order + 1})"


def sine_series(omega: int, order: int) -> dict[int, Fraction]:
    """(1/lambda) sin(lambda omega) = sum_k (-1)^k omega^(2k+1) lambda^(2k)/(2k+1)!, k <= order/2."""
    return {2 * k: Fraction((-1) ** k * omega ** (2 * k + 1), factorial(2 * k + 1)) for k in range(order // 2 + 1)}


def _sine_torus(a: TorusElement, b: TorusElement, order: int) -> FormalLambdaSeries:
    out: dict[int, TorusElement] = {}
    for (m, n), c in a.terms.items():
        for (pp, qq), d in b.terms.items():
            omega = n * pp - m * qq
            if omega == 0:
                continue
            for k, w in sine_series(omega, order).items():
                term = TorusElement({(m + pp, n + qq): c * d * w})
                out[k] = out[k] + term if k in out else term
    return FormalLambdaSeries(out, order)


def sine_bracket(a, b, S: int = 4) -> FormalLambdaSeries:
    """Bilinear sine bracket truncated at lambda-order 2S; accepts torus elements or lambda-series."""
    order = 2 * S
    A = a if isinstance(a, FormalLambdaSeries) else FormalLambdaSeries.const(a, order)
    B = b if isinstance(b, FormalLambdaSeries) else FormalLambdaSeries.const(b, order)
    order = min(order, A.order, B.order)
    out = FormalLambdaSeries({}, order)
    for i, ai in A.coeffs.items():
        for j, bj in B.coeffs.items():
            if i + j > order:
                continue
            inner = _sine_torus(ai, bj, order - i - j)
            out = out + FormalLambdaSeries({k + i + j: v for k, v in inner.coeffs.items()}, order)
    return out


def torus_poisson(a: TorusElement, b: TorusElement) -> TorusElement:
    """lambda^0 part of the sine bracket: (n p' - m q') z^(m+p') zeta^(n+q')."""
    return sine_bracket(a, b, 0).coeff(0)


# ---------------------------------------------------------------------------
# checkers


def associativity_check(star: Callable[[PhaseSymbol, PhaseSymbol], PhaseSymbol],
                        f: PhaseSymbol, g: PhaseSymbol, h: PhaseSymbol) -> bool:
    return star(star(f, g), h) == star(f, star(g, h))


def jacobi_check(bracket: Callable, f, g, h) -> bool:
    """The cyclic sum [[f,g],h] + [[g,h],f] + [[h,f],g] vanishes."""
    total = bracket(bracket(f, g), h) + bracket(bracket(g, h), f) + bracket(bracket(h, f), g)
    return total.is_zero()


def classical_limit_check(f: PhaseSymbol, g: PhaseSymbol) -> bool:
    """The kappa^0 part of the Moyal bracket is the Poisson bracket."""
    return moyal_bracket(f, g, 0) == poisson_dkp(f, g)


def kappa_coefficients(f: PhaseSymbol, g: PhaseSymbol) -> dict[int, PhaseSymbol]:
    """Coefficients of kappa^(2s) in the Moyal bracket, by direct order extraction."""
    top = f.x_degree() + g.x_degree()
    return {2 * s: _bidiff(f, g, 2 * s + 1, -1).scale(Fraction(1, factorial(2 * s + 1)))
            for s in range(top // 2 + 1)}


def qplane_dp(f: PhaseSymbol, q) -> PhaseSymbol:
    """D_p on x-left ordered symbols: p^-1 * (f(x, qp) - f(x, p))/(q - 1), reordered by the q-plane star."""
    q = QValue.parse(q.q if isinstance(q, QValue) else q).q
    diff = (f.scale_vars(sp=q) - f).scale(1 / (q - 1))
    return qplane_star(PhaseSymbol.mono(0, -1), diff, q)


def qplane_dx(f: PhaseSymbol, q) -> PhaseSymbol:
    """D_x on x-left ordered symbols: x^-1 * (f(qx, p) - f(x, p))/(q - 1)."""
    q = QValue.parse(q.q if isinstance(q, QValue) else q).q
    diff = (f.scale_vars(sx=q) - f).scale(1 / (q - 1))
    return qplane_star(PhaseSymbol.mono(-1, 0), diff, q)


def qplane_compat_check(q, radius: int = 3) -> bool:
    """D_x p = q^-1 p D_x and D_p x = q x D_p on every x^m p^n with |m|, |n| <= radius."""
    q = QValue.parse(q.q if isinstance(q, QValue) else q).q
    x, p = PhaseSymbol.mono(1, 0), PhaseSymbol.mono(0, 1)
    for m in range(-radius, radius + 1):
        for n in range(-radius, radius + 1):
            g = PhaseSymbol.mono(m, n)
            if qplane_dx(qplane_star(p, g, q), q) != qplane_star(p, qplane_dx(g, q), q).scale(1 / q):
                return False
            if qplane_dp(qplane_star(x, g, q), q) != qplane_star(x, qplane_dp(g, q), q).scale(q):
                return False
    return True


def qplane_monomial_derivatives(m: int, n: int, q) -> tuple[PhaseSymbol, PhaseSymbol]:
    """Closed forms D_x(x^m p^n) = (m)_q x^(m-1) p^n and D_p(x^m p^n) = q^m (n)_q x^m p^(n-1)."""
    q = QValue.parse(q.q if isinstance(q, QValue) else q).q
    return (PhaseSymbol.mono(m - 1, n, qint(m, q)), PhaseSymbol.mono(m, n - 1, q**m * qint(n, q)))


def random_symbol(rng, max_deg: int = 3, max_terms: int = 4, p_range: tuple[int, int] = (0, 3),
                  x_range: tuple[int, int] | None = None) -> PhaseSymbol:
    xr = x_range or (0, max_deg)
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        k = (rng.randint(*xr), rng.randint(*p_range))
        terms[k] = Fraction(rng.randint(-4, 4) or 1, rng.randint(1, 3))
    return PhaseSymbol(terms)


def symbols_from(items: Iterable[tuple[int, int, str]]) -> PhaseSymbol:
    return PhaseSymbol({(m, n): parse_rational(c) for m, n, c in items})
