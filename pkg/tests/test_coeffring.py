from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from kpcalc.coeffring import (
    DerivationTable,
    DPoly,
    MissingGenerator,
    TimesPoly,
    XLaurent,
    hirota_apply,
    kp_hirota_residual,
    q_shift_vector,
    qtau_shift,
    schur_p,
    schur_partition,
)

X = sp.Symbol("x")
laurents = st.dictionaries(st.integers(-3, 4), st.fractions(min_value=-9, max_value=9, max_denominator=5),
                           max_size=4).map(XLaurent)


def to_sympy(f: XLaurent):
    return sum((sp.Rational(c.numerator, c.denominator) * X**k for k, c in f.terms.items()), sp.Integer(0))


def from_sympy(expr) -> XLaurent:
    expr = sp.expand(expr)
    out = {}
    for term in sp.Add.make_args(expr):
        if term == 0:
            continue
        c, k = term.as_coeff_exponent(X)
        out[int(k)] = Fraction(str(c))
    return XLaurent(out)


@given(laurents, laurents)
@settings(max_examples=40, deadline=None)
def test_arithmetic_matches_sympy(f, g):
    assert from_sympy(to_sympy(f) * to_sympy(g)) == f * g
    assert from_sympy(to_sympy(f) - to_sympy(g)) == f - g


@given(laurents)
@settings(max_examples=40, deadline=None)
def test_ddx_matches_sympy(f):
    assert from_sympy(sp.diff(to_sympy(f), X)) == f.ddx()


@given(laurents, st.sampled_from([Fraction(2), Fraction(3, 2), Fraction(-1, 3)]))
@settings(max_examples=40, deadline=None)
def test_jackson_derivative_definition(f, q):
    qq = sp.Rational(q.numerator, q.denominator)
    e = to_sympy(f)
    expected = sp.cancel((e.subs(X, qq * X) - e) / ((qq - 1) * X))
    assert from_sympy(expected) == f.dq(q)


def test_tau_scale():
    f = XLaurent.parse("x^2 + 3")
    assert f.tau_scale(2, 1) == XLaurent.parse("4*x^2 + 3")
    assert f.tau_scale(2, -1) == XLaurent.parse("1/4*x^2 + 3")


def test_dq_inverse_monomial():
    q = Fraction(3, 2)
    f = XLaurent.parse("x^3 - 2*x + x^-2")
    assert f.dq_inverse_monomial(q).dq(q) == f
    with pytest.raises((ValueError, ZeroDivisionError)):
        XLaurent.parse("x^-1").dq_inverse_monomial(q)


@given(laurents)
@settings(max_examples=40, deadline=None)
def test_xlaurent_text_round_trip(f):
    assert XLaurent.parse(str(f)) == f


def test_xlaurent_canonical_text():
    assert str(XLaurent({2: Fraction(3, 2), -1: Fraction(-1), 0: Fraction(5)})) == "3/2*x^2 + 5 - x^-1"


def test_dpoly_leibniz_and_text():
    u2, u3 = DPoly.gen(2), DPoly.gen(3)
    f = u2 * u3
    assert f.ddx() == DPoly.gen(2, 1) * u3 + u2 * DPoly.gen(3, 1)
    assert DPoly.parse(str(f.ddx_n(2))) == f.ddx_n(2)
    with pytest.raises(ValueError):
        DPoly.gen(1)


def test_derivation_table_commutes_with_x_derivative():
    table = DerivationTable({2: DPoly.gen(3, 1), 3: DPoly.gen(2) * DPoly.gen(2, 1)})
    f = DPoly.gen(2) * DPoly.gen(3, 1) + DPoly.gen(2, 2)
    assert f.ddx().apply_derivation(table) == f.apply_derivation(table).ddx()


def test_missing_generator_is_reported():
    table = DerivationTable({2: DPoly.gen(3, 1)})
    with pytest.raises(MissingGenerator):
        DPoly.gen(4).apply_derivation(table)


T = sp.symbols("t1:4")


def times_to_sympy(p: TimesPoly):
    return sum(sp.Rational(c.numerator, c.denominator) * sp.prod([t**e for t, e in zip(T, exps)])
               for exps, c in p.terms.items())


def test_schur_polynomials_from_generating_function():
    z = sp.Symbol("z")
    gen = sp.series(sp.exp(sum(t * z ** (k + 1) for k, t in enumerate(T))), z, 0, 6).removeO()
    for j in range(6):
        assert sp.expand(gen.coeff(z, j) - times_to_sympy(schur_p(j))) == 0


def test_hirota_derivative_against_shift_definition():
    a = TimesPoly.parse("t1^3*t2 + t3", 3)
    b = TimesPoly.parse("t1*t2^2 - 2*t1", 3)
    A, B = times_to_sympy(a), times_to_sympy(b)
    for multi in [(2, 0, 0), (1, 1, 0), (0, 2, 1), (4, 0, 0)]:
        # D^multi a.b = prod d_{y_i}^{m_i} a(t+y) b(t-y) at y = 0, one shift variable per time
        ys = sp.symbols("y1:4")
        expr = A.subs({t: t + s for t, s in zip(T, ys)}, simultaneous=True) * \
            B.subs({t: t - s for t, s in zip(T, ys)}, simultaneous=True)
        for s, m in zip(ys, multi):
            expr = sp.diff(expr, s, m)
        expr = expr.subs({s: 0 for s in ys})
        assert sp.expand(expr - times_to_sympy(hirota_apply(a, b, multi))) == 0


def test_kp_hirota_solutions_and_non_solution():
    assert kp_hirota_residual(TimesPoly.const(3)).is_zero()
    assert kp_hirota_residual(TimesPoly.var(3, 1)).is_zero()
    assert kp_hirota_residual(schur_partition((2, 1))).is_zero()
    assert kp_hirota_residual(schur_partition((3,))).is_zero()
    assert not kp_hirota_residual(TimesPoly.parse("t1^2 + t2^2", 3)).is_zero()


def test_q_shift_vector_is_log_of_q_exponential():
    q = Fraction(3, 2)
    vec = q_shift_vector(1, q, 4)
    assert vec[0] == 1
    assert vec[1] == (1 - q) ** 2 / (2 * (1 - q**2))
    tau = TimesPoly.var(3, 2)
    assert qtau_shift(tau, 2, q).evaluate((0, 0, 0)) == q_shift_vector(2, q, 3)[1]
