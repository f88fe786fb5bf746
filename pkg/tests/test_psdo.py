import json
import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from kpcalc import psdo
from kpcalc.coeffring import DPoly, XLaurent
from kpcalc.psdo import OperatorSeries, WindowError, adjoint, commutator, compose, inverse, power
from kpcalc.suites import random_operator

X = sp.Symbol("x")
F = sp.Function("f")(X)


def lx(text):
    return XLaurent.parse(text)


def xs(f: XLaurent):
    return sum((sp.Rational(c.numerator, c.denominator) * X**k for k, c in f.terms.items()), sp.Integer(0))


def apply_sym(A: OperatorSeries, expr):
    """A acting on a sympy expression; xi acts as kappa d/dx."""
    k = sp.Rational(A.kappa.numerator, A.kappa.denominator)
    return sum((xs(a) * k**i * sp.diff(expr, X, i) for i, a in A.coeffs.items()), sp.Integer(0))


def diff_ops(seed, kappa, n=3):
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        top = rng.randint(0, 3)
        terms = {i: XLaurent({d: Fraction(rng.randint(-3, 3), rng.randint(1, 3)) for d in range(3)})
                 for i in range(top + 1)}
        out.append(OperatorSeries.from_terms(terms, top=top, kappa=kappa, domain=XLaurent))
    return out


def test_xi_times_x():
    xi = OperatorSeries.monomial(1, kappa=Fraction(1, 2))
    x = OperatorSeries({0: lx("x")}, 0, None, XLaurent, Fraction(1, 2))
    assert compose(xi, x) == OperatorSeries({1: lx("x"), 0: lx("1/2")}, 1, None, XLaurent, Fraction(1, 2))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([Fraction(1), Fraction(1, 2), Fraction(-2)]))
def test_composition_is_operator_composition(seed, kappa):
    A, B, _ = diff_ops(seed, kappa)
    lhs = apply_sym(compose(A, B), F)
    rhs = apply_sym(A, apply_sym(B, F))
    assert sp.expand(lhs - rhs) == 0


def test_negative_power_is_inverse_of_xi():
    a = lx("x^2 + 3*x - 1")
    A = OperatorSeries({0: a}, 0, None, XLaurent, 1)
    xi, xinv = OperatorSeries.monomial(1), OperatorSeries.monomial(-1, depth=6)
    left = compose(xi, compose(xinv, A))
    assert left.eq_mod_tail(A)
    # xi^-1 o a = a xi^-1 - a' xi^-2 + a'' xi^-3 - ...
    expansion = compose(xinv, A)
    assert expansion.coeff(-1) == a and expansion.coeff(-2) == -a.ddx() and expansion.coeff(-3) == a.ddx().ddx()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_associativity_modulo_tail(seed):
    rng = random.Random(seed)
    A, B, C = (random_operator(rng, Fraction(1, 2), 3, 6, 3, min_order=-1) for _ in range(3))
    assert compose(compose(A, B), C).eq_mod_tail(compose(A, compose(B, C)))


def test_window_rule_and_tail_access():
    A = OperatorSeries.monomial(1, lx("x"), depth=4)  # powers 1..-2
    B = OperatorSeries.monomial(2, lx("1"), depth=3)  # powers 2..0
    P = compose(A, B)
    assert P.top == 3 and P.lo == max(A.lo + B.top, A.top + B.lo)
    with pytest.raises(WindowError):
        P.coeff(P.lo - 1)


def test_commutator_gains_a_power_with_constant_leading_term():
    L = psdo.lax_kp(5)
    B = power(L, 2).plus_part()
    plain = compose(B, L).lo
    assert commutator(B, L).lo == plain - 1


def test_commutator_xi2_x():
    # [xi^2, x] = 2 kappa xi, which is xi at kappa = 1/2
    xi2 = OperatorSeries.monomial(2, kappa=Fraction(1, 2))
    x = OperatorSeries({0: lx("x")}, 0, None, XLaurent, Fraction(1, 2))
    c = commutator(xi2, x)
    assert c.exact and c.coeffs == {1: lx("1")}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_adjoint_is_formal_transpose(seed):
    """int g (A f) dx = int (A* g) f dx up to a total derivative: check with compact test functions."""
    A, _, _ = diff_ops(seed, Fraction(1))
    g = sp.exp(-X**2)
    f = X**2 * sp.exp(-X**2)
    lhs = sp.integrate(sp.expand(g * apply_sym(A, f)), (X, -sp.oo, sp.oo))
    rhs = sp.integrate(sp.expand(apply_sym(adjoint(A), g) * f), (X, -sp.oo, sp.oo))
    assert sp.simplify(lhs - rhs) == 0


def test_adjoint_basics():
    xi = OperatorSeries.monomial(1)
    assert adjoint(xi) == xi.scale(-1)
    a = OperatorSeries({0: lx("x^2")}, 0, None, XLaurent, 1)
    assert adjoint(a) == a
    rng = random.Random(3)
    A = random_operator(rng, 1, 2, 5, 2, min_order=-1)
    assert adjoint(adjoint(A)).eq_mod_tail(A)


def test_inverse_and_power():
    A = OperatorSeries.from_terms({0: lx("1"), -1: lx("x"), -2: lx("x^2 - 1")}, depth=6)
    I = OperatorSeries.identity()
    assert compose(A, inverse(A)).eq_mod_tail(I)
    assert compose(inverse(A), A).eq_mod_tail(I)
    assert power(A, 3).eq_mod_tail(compose(A, compose(A, A)))


def test_projections_and_residue():
    A = OperatorSeries.from_terms({2: lx("1"), 0: lx("x"), -1: lx("3"), -2: lx("x")}, depth=6)
    assert A.plus_part().exact and set(A.plus_part().coeffs) == {2, 0}
    assert A.minus_part().top == -1
    assert psdo.res_partial(A) == lx("3")


def test_kp_flows_by_hand():
    L = psdo.lax_kp(6)
    f1 = psdo.kp_flow_rhs(L, 1)
    for p in f1.powers():
        assert f1.coeffs[p] == L.coeffs[p].ddx()
    f2 = psdo.kp_flow_rhs(L, 2)
    u = DPoly.gen
    assert f2.coeff(-1) == u(2, 2) + u(3, 1) * 2
    assert f2.coeff(-2) == u(3, 2) + u(4, 1) * 2 + u(2, 0) * u(2, 1) * 2


@pytest.mark.parametrize("depth", [6, 7, 9])
def test_flow_commutativity(depth):
    L = psdo.lax_kp(depth)
    coeffs = psdo.flow_commutator_coeffs(L, 2, 3)
    assert len(coeffs) == depth - 5
    assert all(c.is_zero() for c in coeffs.values())


def test_flow_commutativity_needs_a_computable_coefficient():
    with pytest.raises(WindowError):
        psdo.flow_commutativity_check(None, 2, 3, depth=5)


def test_flow_commutativity_detects_a_wrong_flow():
    """A perturbed flow table gives a nonzero commutator (the check can fail)."""
    L = psdo.lax_kp(7)
    good = psdo.flow_table(L, 2)
    bad = psdo.DerivationTable({i: c + DPoly.gen(2, 1) for i, c in good.base.items()})
    f3 = psdo.kp_flow_rhs(L, 3)
    t3 = psdo.flow_table(L, 3)
    f2 = psdo.kp_flow_rhs(L, 2)
    val = f3.coeff(-1).apply_derivation(bad) - f2.coeff(-1).apply_derivation(t3)
    assert not val.is_zero()


def test_dickey_lemma_random_pairs():
    rng = random.Random(5)
    for _ in range(10):
        P = random_operator(rng, 1, 2, 4, 3, exact=True)
        Q = random_operator(rng, 1, 2, 4, 3, exact=True)
        assert psdo.dickey_lemma_check(P, Q)


@pytest.mark.parametrize("seed", range(6))
def test_dickey_lemma_by_exponentials(seed):
    """res_z (P e^{xz})(Q e^{-xz}) equals res(P o Q*).

    With d^i e^{xz} = z^i e^{xz} for every integer i, the left side is the
    plain sum over i + j = -1 of p_i q_j (-1)^j.
    """
    rng = random.Random(seed)
    P = random_operator(rng, 1, 2, 6, 2, min_order=-4)
    Q = random_operator(rng, 1, 2, 4, 3, exact=True)
    expected = XLaurent()
    for j, qj in Q.coeffs.items():
        expected = expected + P.coeff(-1 - j) * qj * Fraction(-1) ** j
    assert psdo.res_partial(compose(P, adjoint(Q), floor=-1)) == expected


def test_json_round_trip():
    L = psdo.lax_kp(5)
    data = json.loads(json.dumps(psdo.series_to_json(L)))
    assert psdo.series_from_json(data) == L
    A = OperatorSeries.from_terms({1: lx("x"), -1: lx("3/2*x^-1")}, depth=4, kappa=Fraction(1, 2))
    assert psdo.series_from_json(psdo.series_to_json(A)) == A


def test_dickey_inverse_xi_example():
    P = OperatorSeries.monomial(-1)
    one = OperatorSeries.identity()
    assert psdo.dickey_lemma_check(P, one)
    assert psdo.res_partial(compose(P, adjoint(one), floor=-1)) == lx("1")


@pytest.mark.parametrize("seed", range(10))
def test_residue_of_commutator_is_total_derivative(seed):
    rng = random.Random(seed)
    A = random_operator(rng, 1, 2, 5, 3, min_order=-1)
    B = random_operator(rng, 1, 2, 5, 3, min_order=-1)
    r = psdo.res_partial(commutator(A, B, floor=-1))
    # a Laurent polynomial is a derivative iff it has no x^-1 term
    assert r.coeff(-1) == 0
    antiderivative = XLaurent({k + 1: c / (k + 1) for k, c in r.terms.items()})
    assert antiderivative.ddx() == r


def test_projections_are_complementary_idempotents():
    rng = random.Random(2)
    A = random_operator(rng, 1, 3, 6, 3)
    plus, minus = A.plus_part(), A.minus_part()
    assert (plus + minus).eq_mod_tail(A)
    assert plus.plus_part() == plus and minus.minus_part().eq_mod_tail(minus)
    assert plus.minus_part().is_zero_mod_tail() and minus.plus_part().is_zero_mod_tail()
