"""q-deformed pseudodifferential operators sum a_i(x) D_q^i.

Coefficients are Laurent polynomials in x, the only domain on which both the
Jackson derivative D_q and the scaling tau: f(x) -> f(qx) are computable.
Normal ordering uses the q-Leibniz rule

    D_q^n o b = sum_k [n, k]_q tau^(n-k)(D_q^k b) D_q^(n-k),

valid for every integer n.  Adjoints live in the mirrored algebra with
parameter 1/q, where D_q* = -(1/q) D_{1/q}.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

from .coeffring import XLaurent
from .exactnum import QValue, parse_rational, qbinom_bracket, qexp_coeffs, qexp_recip_coeffs
from .psdo import DEFAULT_DEPTH, SeriesBase, WindowError, _max_lo, product_floor


def _qv(q) -> QValue:
    return q if isinstance(q, QValue) else QValue.parse(q)


class QOperatorSeries(SeriesBase):
    symbol = "Dq"
    __slots__ = ("q",)

    def __init__(self, coeffs, top=None, lo=None, domain=XLaurent, q="2"):
        if domain is not XLaurent:
            raise TypeError("q-operators need Laurent polynomial coefficients")
        super().__init__(coeffs, top, lo, XLaurent)
        self.q = _qv(q)

    @classmethod
    def from_terms(cls, terms: Mapping[int, XLaurent], q, depth: int | None = None,
                   top: int | None = None) -> "QOperatorSeries":
        if top is None:
            nonzero = [i for i, c in terms.items() if not c.is_zero()]
            top = max(nonzero) if nonzero else 0
        lo = None if depth is None else top - depth + 1
        return cls(dict(terms), top, lo, XLaurent, q)

    @classmethod
    def identity(cls, q) -> "QOperatorSeries":
        return cls({0: XLaurent.const(1)}, 0, None, XLaurent, q)

    @classmethod
    def monomial(cls, i: int, q, coeff: XLaurent | None = None, depth: int | None = None):
        if coeff is None:
            coeff = XLaurent.const(1)
        return cls.from_terms({i: coeff}, q, depth=depth, top=i)

    def _like(self, coeffs, top, lo):
        return QOperatorSeries(coeffs, top, lo, XLaurent, self.q)

    def _check_compatible(self, other):
        super()._check_compatible(other)
        if self.q != other.q:
            raise TypeError(f"q mismatch: {self.q} vs {other.q}")

    def _key(self):
        return super()._key() + (self.q,)

    def __mul__(self, other):
        return compose_q(self, other)

    def apply(self, f: XLaurent) -> XLaurent:
        """Act on a Laurent polynomial; negative powers use the monomial q-antiderivative."""
        if self.lo is not None:
            raise WindowError("only exact operators act on functions")
        out = XLaurent()
        for i, a in self.coeffs.items():
            g = f
            if i >= 0:
                for _ in range(i):
                    g = g.dq(self.q)
            else:
                for _ in range(-i):
                    g = g.dq_inverse_monomial(self.q)
            out = out + a * g
        return out


def compose_q(A: QOperatorSeries, B: QOperatorSeries, floor: int | None = None) -> QOperatorSeries:
    """Normal-ordered product, bilinear extension of the q-Leibniz rule."""
    A._check_compatible(B)
    q = A.q
    finite = all(i >= 0 for i in A.coeffs)
    lo = product_floor(A, B, floor, finite=finite)
    top = A.top + B.top
    out: dict[int, XLaurent] = {}
    derivs: dict[int, list[XLaurent]] = {j: [b] for j, b in B.coeffs.items()}
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
                    dj.append(dj[-1].dq(q))
                bk = dj[k]
                if bk.is_zero():
                    break
                w = qbinom_bracket(i, k, q)
                if w:
                    term = a * bk.tau_scale(q, i - k) * w
                    out[p] = out[p] + term if p in out else term
                k += 1
    if lo is not None and lo > top + 1:
        lo = top + 1
    return QOperatorSeries(out, top, lo, XLaurent, q)


def q_leibniz_expand(n: int, b: XLaurent, q, depth: int = DEFAULT_DEPTH) -> QOperatorSeries:
    """Normal form of D_q^n o b on ``depth`` powers below n (exact when n >= 0)."""
    left = QOperatorSeries.monomial(n, q)
    right = QOperatorSeries({0: b}, 0, None, XLaurent, q)
    floor = None if n >= 0 else n - depth + 1
    out = compose_q(left, right, floor)
    if n >= 0 and depth is not None and n - depth + 1 > min(out.coeffs, default=n):
        return out.truncate(n - depth + 1)
    return out


def commutator_q(A: QOperatorSeries, B: QOperatorSeries, floor: int | None = None) -> QOperatorSeries:
    return compose_q(A, B, floor) - compose_q(B, A, floor)


def adjoint_q(A: QOperatorSeries, floor: int | None = None) -> QOperatorSeries:
    """P* = sum (D_q*)^i a_i with D_q* = -(1/q) D_{1/q}, normal-ordered over 1/q."""
    if A.lo is None and floor is None and any(i < 0 for i in A.coeffs):
        floor = A.top - DEFAULT_DEPTH + 1
    lo = A.lo if floor is None else _max_lo(A.lo, floor)
    q = A.q.q
    p = 1 / q
    out: dict[int, XLaurent] = {}
    cut = False
    for i, a in A.coeffs.items():
        scale = (-p) ** i
        d = a
        k = 0
        while True:
            pw = i - k
            if lo is not None and pw < lo:
                cut = cut or not d.is_zero()
                break
            if lo is None and k > i:
                break
            if d.is_zero():
                break
            w = qbinom_bracket(i, k, p) * scale
            if w:
                term = d.tau_scale(p, i - k) * w
                out[pw] = out[pw] + term if pw in out else term
            d = d.dq(p)
            k += 1
    if A.lo is None and not cut:
        # every expansion terminated: polynomial coefficients give a finite adjoint
        lo = None
    return QOperatorSeries(out, A.top, lo, XLaurent, QValue(p))


def res_dq(A: QOperatorSeries) -> XLaurent:
    return A.residue()


def plus_part_q(A: QOperatorSeries) -> QOperatorSeries:
    return A.plus_part()


def minus_part_q(A: QOperatorSeries) -> QOperatorSeries:
    return A.minus_part()


def power_q(A: QOperatorSeries, n: int, floor: int | None = None) -> QOperatorSeries:
    if n < 0:
        raise ValueError("power_q needs n >= 0")
    out = QOperatorSeries.identity(A.q)
    for _ in range(n):
        out = compose_q(out, A, floor)
    return out


def inverse_q(A: QOperatorSeries, depth: int | None = None) -> QOperatorSeries:
    """Geometric inverse of 1 + (negative powers) within the window."""
    if A.top != 0 or A.coeffs.get(0) != XLaurent.const(1):
        raise ValueError("inverse_q needs a series of the form 1 + lower powers")
    lo = A.lo if A.lo is not None else -(depth or DEFAULT_DEPTH) + 1
    one = QOperatorSeries.identity(A.q)
    N = A - one
    out, term = one, one
    for _ in range(-lo + 1):
        term = -compose_q(term, N, lo)
        out = out + term
    return out.truncate(lo)


def substitute_x_over(A: QOperatorSeries, t=None) -> QOperatorSeries:
    """P|_{x/t}: c_i(x) -> c_i(x/t) t^i on the i-th power (t defaults to the inverse parameter)."""
    t = parse_rational(t) if t is not None else 1 / A.q.q
    out = {i: c.scale_x(1 / t) * t**i for i, c in A.coeffs.items()}
    return QOperatorSeries(out, A.top, A.lo, XLaurent, A.q)


# ---------------------------------------------------------------------------
# q-KP hierarchy


def q_lax(coeffs: Mapping[int, XLaurent], q, depth: int | None = None) -> QOperatorSeries:
    """L = D_q + a_0 + sum a_i D_q^-i from {i: a_i} (i >= 0)."""
    terms = {1: XLaurent.const(1)}
    for i, a in coeffs.items():
        if i < 0:
            raise ValueError("coefficient indices are non-negative")
        terms[-i] = a
    return QOperatorSeries.from_terms(terms, q, depth=depth, top=1)


def qkp_flow_rhs(L: QOperatorSeries, j: int, *, projection_first: bool = True,
                 depth: int = DEFAULT_DEPTH) -> QOperatorSeries:
    """[(L^j)_+, L], or [L, (L^j)_+] with ``projection_first=False``; top power <= 0."""
    if not 1 <= j <= 3:
        raise ValueError("q-KP flows are provided for j in 1..3")
    if L.top != 1 or L.coeffs.get(1) != XLaurent.const(1):
        raise ValueError("L must have leading term D_q")
    floor = None if L.lo is not None else L.top - depth + 1
    Lw = L if L.lo is not None else L.truncate(floor)
    B = power_q(Lw, j).plus_part()
    flow = commutator_q(B, Lw) if projection_first else commutator_q(Lw, B)
    for i, c in flow.coeffs.items():
        if i > 0:
            raise ArithmeticError(f"q-KP flow {j} produced a positive power {i}")
    lo = flow.lo
    if lo is not None and lo > 1:
        lo = 1
    return QOperatorSeries(flow.coeffs, 0, lo, XLaurent, L.q)


def dressing_solve(L: QOperatorSeries, depth: int = DEFAULT_DEPTH) -> QOperatorSeries:
    """Solve L o S = S o D_q for S = 1 + sum_{k<depth} w_k D_q^-k.

    Each step reads one power of the residual and inverts tau - 1 on it;
    w_k carries no constant term (the normalisation of the kernel of tau - 1).
    """
    if L.top != 1 or L.coeffs.get(1) != XLaurent.const(1):
        raise ValueError("dressing needs L = D_q + lower powers")
    q = L.q
    Dq = QOperatorSeries.monomial(1, q)
    S_terms = {0: XLaurent.const(1)}
    floor = 2 - depth
    if L.lo is not None and L.lo > floor:
        raise WindowError(f"L window floor {L.lo} too shallow for a depth-{depth} dressing")
    for k in range(1, depth):
        S = QOperatorSeries(S_terms, 0, None, XLaurent, q)
        p = 1 - k
        R = compose_q(L, S, p) - compose_q(S, Dq, p)
        r = R.coeff(p)
        if r.coeff(0) != 0:
            raise ArithmeticError(
                f"dressing step {k}: residual has a constant term; L is not conjugate to D_q in this window"
            )
        w = XLaurent({n: -c / (q.q**n - 1) for n, c in r.terms.items()})
        S_terms[-k] = w
    return QOperatorSeries(S_terms, 0, 1 - depth, XLaurent, q)


def dressing_residual(L: QOperatorSeries, S: QOperatorSeries) -> QOperatorSeries:
    Dq = QOperatorSeries.monomial(1, L.q)
    return compose_q(L, S) - compose_q(S, Dq)


def dress(S: QOperatorSeries) -> QOperatorSeries:
    """L = S o D_q o S^-1 on the window S supports."""
    Dq = QOperatorSeries.monomial(1, S.q)
    return compose_q(compose_q(S, Dq), inverse_q(S))


# ---------------------------------------------------------------------------
# exponential eigenfunctions and the q-Dickey lemma


def _symbol_residue_twisted(P: QOperatorSeries, Qt: QOperatorSeries) -> XLaurent:
    """res_z P(x,z) Qt(x,-z) -- the eigen-symbol path."""
    total = XLaurent()
    for i, p in P.coeffs.items():
        j = -1 - i
        if not Qt.in_window(j):
            raise WindowError(f"eigen-symbol residue needs power {j} of the adjoint factor")
        c = Qt.coeffs.get(j)
        if c is not None:
            total = total + p * c * (-1) ** abs(j)
    if P.lo is not None and Qt.top >= -P.lo:
        raise WindowError("eigen-symbol residue reaches into the tail of P")
    return total


def _min_exp(A: QOperatorSeries) -> int:
    degs = [c.min_degree() for c in A.coeffs.values() if not c.is_zero()]
    return min([0] + degs)


def series_residue(P: QOperatorSeries, Qt: QOperatorSeries, N: int) -> tuple[XLaurent, int]:
    """res_z of [sum p_i z^i E_q(xz)] [sum c_j (-z)^j E_{1/q}(-xz)] with E truncated at order N.

    The exponentials are multiplied out term by term; nothing assumes they
    cancel.  Returns the residue restricted to x-degrees that neither the
    exponential truncation nor either window can disturb, and that degree.
    A windowed factor must have polynomial coefficients, otherwise its tail
    has no lower bound on x-degree.
    """
    q = P.q.q
    minP, minQ = _min_exp(P), _min_exp(Qt)
    if (P.lo is not None and minP < 0) or (Qt.lo is not None and minQ < 0):
        raise WindowError("series path needs polynomial coefficients on a truncated factor")
    e = qexp_coeffs(N, q)
    f = qexp_recip_coeffs(N, q)
    bound = N
    if Qt.lo is not None:
        bound = min(bound, -Qt.lo - P.top - 1)
    if P.lo is not None:
        bound = min(bound, -P.lo - Qt.top - 1)
    safe = bound + minP + minQ
    # coefficient of (xz)^s in E_q(xz) E_{1/q}(-xz), kept explicit
    conv = [sum((e[k] * f[s - k] for k in range(s + 1)), Fraction(0)) for s in range(N + 1)]
    total = XLaurent()
    for i, p in P.coeffs.items():
        for j, c in Qt.coeffs.items():
            s = -1 - i - j
            if s < 0 or s > N:
                continue
            w = conv[s] * (-1) ** abs(j)
            if w:
                total = total + p * c * XLaurent.monomial(s, w)
    return total.truncate_degree(safe), safe


def eigenrelation_check(k: int, q, N: int = 10) -> bool:
    """D_q^k exp_q(xz) = z^k exp_q(xz) on the series truncated at order N.

    For k >= 0 the Jackson derivative is applied to each (xz)^n/(n)_q!; for
    k < 0 the monomial q-antiderivative is applied, which agrees with
    z^k exp_q(xz) up to the polynomial kernel of D_q^|k| (x-degree < |k|).
    """
    qv = _qv(q)
    e = qexp_coeffs(N, qv)
    # series in z with XLaurent coefficients: {z-power: coeff}
    series = {n: XLaurent.monomial(n, e[n]) for n in range(N + 1)}
    out = {}
    for n, c in series.items():
        g = c
        if k >= 0:
            for _ in range(k):
                g = g.dq(qv)
        else:
            for _ in range(-k):
                g = g.dq_inverse_monomial(qv)
        if not g.is_zero():
            out[n] = g
    for n, c in out.items():
        target_n = n - k
        want = XLaurent.monomial(target_n, e[target_n]) if 0 <= target_n <= N else None
        if want is None:
            if k >= 0:
                return False
            continue
        if c != want:
            return False
    if k >= 0:
        expected = {n + k for n in range(N + 1 - k)}
        return expected <= set(out)
    return True


def q_dickey_paths(P: QOperatorSeries, Q: QOperatorSeries, N: int = 8) -> dict:
    """The three evaluations compared by :func:`q_dickey_check`."""
    if P.lo is not None or Q.lo is not None:
        raise WindowError("the q-Dickey check takes exact operators")
    P._check_compatible(Q)
    Qstar = adjoint_q(Q, floor=-1 - P.top - N - 1)
    Qt = substitute_x_over(Qstar, P.q.q)
    eigen = _symbol_residue_twisted(P, Qt)
    series, safe = series_residue(P, Qt, N)
    operator = res_dq(compose_q(P, Q, floor=-1))
    return {"eigen": eigen, "series": series, "operator": operator, "safe_degree": safe}


def q_dickey_check(P: QOperatorSeries, Q: QOperatorSeries, N: int = 8) -> bool:
    """res_z(P exp_q(xz) . Q*|_{x/q} exp_{1/q}(-xz)) == res_{D_q}(P Q), three ways."""
    r = q_dickey_paths(P, Q, N)
    if r["eigen"] != r["operator"]:
        return False
    return r["series"] == r["operator"].truncate_degree(r["safe_degree"])


# ---------------------------------------------------------------------------
# bilinear identity


class _Expr:
    """Operator expressions in L for time derivatives of wave functions."""

    __slots__ = ("op", "args")

    def __init__(self, op, *args):
        self.op = op
        self.args = args


def _time_derivative(e: _Expr, j: int) -> _Expr:
    op = e.op
    if op in ("one", "zero"):
        return _Expr("zero")
    if op == "pow":
        k = e.args[0]
        B = _Expr("plus", _Expr("pow", j))
        Lk = _Expr("pow", k)
        return _Expr("sub", _Expr("mul", B, Lk), _Expr("mul", Lk, B))
    if op in ("plus", "minus"):
        return _Expr(op, _time_derivative(e.args[0], j))
    if op == "mul":
        a, b = e.args
        return _Expr("add", _Expr("mul", _time_derivative(a, j), b), _Expr("mul", a, _time_derivative(b, j)))
    if op in ("add", "sub"):
        return _Expr(op, _time_derivative(e.args[0], j), _time_derivative(e.args[1], j))
    raise ValueError(op)


def _evaluate(e: _Expr, L: QOperatorSeries, memo: dict) -> QOperatorSeries:
    op = e.op
    if op == "one":
        return QOperatorSeries.identity(L.q)
    if op == "zero":
        return QOperatorSeries({}, 0, None, XLaurent, L.q)
    if op == "pow":
        k = e.args[0]
        if ("pow", k) not in memo:
            memo[("pow", k)] = power_q(L, k)
        return memo[("pow", k)]
    if op == "plus":
        return _evaluate(e.args[0], L, memo).plus_part()
    if op == "minus":
        return _evaluate(e.args[0], L, memo).minus_part()
    if op == "mul":
        return compose_q(_evaluate(e.args[0], L, memo), _evaluate(e.args[1], L, memo))
    if op == "add":
        return _evaluate(e.args[0], L, memo) + _evaluate(e.args[1], L, memo)
    if op == "sub":
        return _evaluate(e.args[0], L, memo) - _evaluate(e.args[1], L, memo)
    raise ValueError(op)


def wave_time_operator(L: QOperatorSeries, alpha: Sequence[int]) -> QOperatorSeries:
    """Differential operator P with d^alpha w_q = P w_q.

    Built from d_j w = (L^j)_+ w and d_j L^k = [(L^j)_+, L^k], which follows
    from the dressing evolution d_j S = -(L^j)_- S.
    """
    expr = _Expr("one")
    for j, a in enumerate(alpha, start=1):
        for _ in range(a):
            Bj = _Expr("plus", _Expr("pow", j))
            expr = _Expr("add", _time_derivative(expr, j), _Expr("mul", expr, Bj))
    P = _evaluate(expr, L, {})
    if P.lo is not None and P.lo > 0:
        raise WindowError("the window of L is too shallow for this multi-index")
    return P.plus_part()


def q_bilinear_residual(S: QOperatorSeries, n: int, alpha: Sequence[int] = (0, 0, 0), N: int = 8) -> XLaurent:
    return bilinear_residual_report(S, n, alpha, N)[0]


def bilinear_residual_report(S: QOperatorSeries, n: int, alpha: Sequence[int] = (0, 0, 0),
                             N: int = 8) -> tuple[XLaurent, int]:
    """res_z(D_q^n d^alpha w_q . w_q*) on the truncated z-series.

    w_q = S exp_q(xz) exp(sum t z^k), w_q* = (S*)^-1|_{x/q} exp_{1/q}(-xz) exp(-sum t z^k);
    times are set to zero after differentiating.  Returns the residual and
    the x-degree up to which the truncations guarantee it.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    alpha = tuple(alpha)
    q = S.q
    if any(alpha):
        L = dress(S)
        Pa = wave_time_operator(L, alpha)
    else:
        Pa = QOperatorSeries.identity(q)
    left = compose_q(compose_q(QOperatorSeries.monomial(n, q), Pa), S)
    Sinv = inverse_q(S)
    Qt = substitute_x_over(adjoint_q(Sinv), q.q)
    return series_residue(left, Qt, N)
