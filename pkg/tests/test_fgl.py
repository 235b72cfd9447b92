"""Formal group law constructions against hand-computed values.

The frozen coefficients below were derived independently: multiplicative
series from binomial expansions, the height-two law's low-degree terms from
solving the functional equation by hand through degree three, and the
p-typical logarithm from the defining recursion p*l_m = sum l_i v_{m-i}^(p^i).
"""

from fractions import Fraction

import pytest

from chromatica.fgl import (
    IntegralityError,
    LawConstructionError,
    assert_p_integral,
    get_law,
    law_for_height,
    lubin_tate_law,
    multiplicative_law,
    p_typical_bp_law,
)
from chromatica.precision import PrecisionProfile
from chromatica.series import ExactDivisionError, TruncatedSeries


def three_var(profile, law, domain):
    x = TruncatedSeries.variable(profile, 3, 0, domain=domain)
    y = TruncatedSeries.variable(profile, 3, 1, domain=domain)
    z = TruncatedSeries.variable(profile, 3, 2, domain=domain)
    return x, y, z


def check_associative(law):
    prof = law.profile
    x, y, z = three_var(prof, law, law.domain)
    xy = law.F.compose([(0, x), (1, y)])
    yz = law.F.compose([(0, y), (1, z)])
    left = law.F.compose([(0, xy), (1, z)])
    right = law.F.compose([(0, x), (1, yz)])
    assert left.terms == right.terms


def check_p_hom(law):
    """[p] is an endomorphism: [p](F(x, y)) = F([p]x, [p]y)."""
    prof = law.profile
    ps = law.p_series()
    x = TruncatedSeries.variable(prof, 2, 0, domain=law.domain)
    y = TruncatedSeries.variable(prof, 2, 1, domain=law.domain)
    px = ps.compose([(0, x)])
    py = ps.compose([(0, y)])
    left = ps.compose([(0, law.F)])
    right = law.F.compose([(0, px), (1, py)])
    assert left.terms == right.terms


class TestMultiplicative:
    def setup_method(self):
        self.prof = PrecisionProfile(2, 8, 0, 0, 12)
        self.law = multiplicative_law(self.prof)

    def test_law_is_x_plus_y_plus_xy(self):
        assert self.law.F.render() == "x + y + x*y"

    def test_p_power_series(self):
        assert self.law.pk_series(1).render() == "2*x + x^2"
        assert self.law.angle_pk_series(1).render() == "2 + x"
        assert self.law.angle_pk_series(2).render() == "2 + 2*x + x^2"

    def test_factorization_is_exact(self):
        for k in (1, 2, 3):
            assert (
                self.law.angle_factorization(k).terms
                == self.law.pk_series(k).terms
            )

    def test_negative_multiplication(self):
        neg = self.law.m_series(-1)
        assert neg.coefficient((1,)) == self.prof.modulus - 1
        assert neg.coefficient((2,)) == 1
        x = TruncatedSeries.variable(self.prof, 1, 0)
        assert self.law.formal_sum(x, neg).is_zero()

    def test_m_series_is_additive(self):
        m3 = self.law.m_series(3)
        m4 = self.law.m_series(4)
        x = TruncatedSeries.variable(self.prof, 1, 0)
        assert self.law.formal_sum(m3, x).terms == m4.terms

    def test_associativity(self):
        check_associative(self.law)

    def test_p_homomorphism(self):
        check_p_hom(self.law)

    def test_rejects_deformation_profile(self):
        with pytest.raises(LawConstructionError):
            multiplicative_law(PrecisionProfile(2, 8, 1, 4, 12))


class TestHeightOne:
    def test_p2_matches_multiplicative(self):
        # f = 2x + x^2 = (1+x)^2 - 1, so the solved law is x + y + xy
        prof = PrecisionProfile(2, 8, 0, 0, 12)
        law = lubin_tate_law(1, prof)
        assert law.structural_series.render() == "2*x + x^2"
        assert law.F.render() == "x + y + x*y"

    def test_p3_law(self):
        prof = PrecisionProfile(3, 6, 0, 0, 9)
        law = lubin_tate_law(1, prof)
        assert law.structural_series.render() == "3*x + x^3"
        assert law.angle_pk_series(1).render() == "3 + x^2"
        # materialization re-checks units, symmetry, and [p] against f
        check_associative(law)
        check_p_hom(law)
        assert (
            law.angle_factorization(2).terms == law.pk_series(2).terms
        )

    def test_law_for_height_dispatch(self):
        prof = PrecisionProfile(2, 8, 0, 0, 12)
        assert law_for_height(1, prof).kind == "multiplicative"
        prof2 = PrecisionProfile(2, 8, 1, 4, 12)
        assert law_for_height(2, prof2).kind == "lubin_tate"


class TestHeightTwo:
    """p = 2, n = 2: the p-series is the formal sum 2x +_F u x^2 +_F x^4.

    Frozen oracles were derived by hand from the logarithm recursion
    lambda_{2^e} (2 - 2^(2^e)) = sum_i lambda_{2^(e-i)} u_i^(2^(e-i)):
    lambda_2 = -u/2, lambda_4 = u^3/28 - 1/14, and solving the fixed point
    [2] = 2 log - sum_e lambda_{2^e} [2]^(2^e) through degree four gives
    [2](x) = 2x + u x^2 + 2 u^2 x^3 + (1 + 4 u^3) x^4 + O(x^5).
    """

    def setup_method(self):
        self.prof = PrecisionProfile(2, 8, 1, 4, 16)
        self.law = lubin_tate_law(2, self.prof)

    def test_p_series_low_terms(self):
        ps = self.law.pk_series(1)
        low = {k: c for k, c in ps.terms.items() if k[0] <= 4}
        assert low == {
            (1, 0): 2,
            (2, 1): 1,
            (3, 2): 2,
            (4, 0): 1,
            (4, 3): 4,
        }

    def test_p_series_reduces_to_frobenius_power(self):
        # modulo (2, u) the whole series collapses to x^4
        ps = self.law.pk_series(1)
        assert {k[0] for k, c in ps.terms.items() if k[1] == 0 and c % 2} == {4}

    def test_structural_series_is_p_series(self):
        assert self.law.structural_series.terms == self.law.pk_series(1).terms

    def test_low_degree_law_terms(self):
        F = self.law.F
        assert F.coefficient((1, 0, 0)) == 1
        assert F.coefficient((0, 1, 0)) == 1
        assert F.coefficient((1, 1, 1)) == 1
        assert F.coefficient((1, 1, 0)) == 0
        # degree three carries the u^2 cells forced by lambda_2 = -u/2
        assert F.coefficient((1, 2, 2)) == 1
        assert F.coefficient((2, 1, 2)) == 1

    def test_angle_series(self):
        a1 = self.law.angle_pk_series(1)
        assert a1.constant_term() == 2
        assert a1.coefficient((1, 1)) == 1
        assert a1.coefficient((2, 2)) == 2
        assert a1.coefficient((3, 3)) == 4
        assert a1.weierstrass_degree() == 3
        a2 = self.law.angle_pk_series(2)
        assert a2.constant_term() == 2
        assert a2.weierstrass_degree() == 12
        assert {k[0] for k, c in a2.terms.items() if k[1] == 0 and c % 2} == {12}

    def test_factorization_is_exact(self):
        assert (
            self.law.angle_factorization(2).terms == self.law.pk_series(2).terms
        )

    def test_pk_matches_composition(self):
        # [4] is solved from its own fixed point; composing [2] with itself
        # must give the same series
        composed = self.law.pk_series(1).compose([(0, self.law.pk_series(1))])
        assert composed.terms == self.law.pk_series(2).terms

    def test_m_series_additivity(self):
        x = TruncatedSeries.variable(self.prof, 1, 0)
        direct = self.law.m_series(3)
        assert direct.coefficient((1, 0)) == 3
        assert (
            self.law.formal_sum(self.law.pk_series(1), x).terms == direct.terms
        )

    def test_truncation_coherence(self):
        # a larger degree bound must extend, never change, the coefficients
        wide = lubin_tate_law(2, PrecisionProfile(2, 8, 1, 4, 40))
        wide_low = {
            k: c for k, c in wide.pk_series(1).terms.items() if k[0] <= 16
        }
        assert wide_low == self.law.pk_series(1).terms

    def test_associativity(self):
        prof = PrecisionProfile(2, 8, 1, 4, 12)
        check_associative(lubin_tate_law(2, prof))

    def test_p_homomorphism(self):
        check_p_hom(self.law)

    def test_negation(self):
        x = TruncatedSeries.variable(self.prof, 1, 0)
        assert self.law.formal_sum(x, self.law.formal_neg()).is_zero()

    def test_coprimality_witness(self):
        p_const = TruncatedSeries.constant(self.prof, 1, 2)
        for j, t in ((1, 0), (2, 0), (2, 1)):
            q = self.law.bezout_witness(j, t)
            lhs = self.law.angle_pk_series(j) - self.law.angle_pk_series(t) * q
            assert lhs.terms == p_const.terms

    def test_p3_height_two(self):
        # [3] = 3x + u x^3 + O(x^4): the x^3 coefficient is the deformation
        # parameter itself, since lambda_3 (3 - 27) = u gives P_3 = -24 lambda_3
        prof = PrecisionProfile(3, 6, 1, 2, 12)
        law = lubin_tate_law(2, prof)
        ps = law.pk_series(1)
        assert ps.coefficient((1, 0)) == 3
        assert ps.coefficient((3, 1)) == 1
        assert {k[0] for k, c in ps.terms.items() if k[1] == 0 and c % 3} == {9}
        assert law.angle_pk_series(1).weierstrass_degree() == 8
        check_associative(law)
        check_p_hom(law)

    def test_profile_guards(self):
        with pytest.raises(LawConstructionError):
            lubin_tate_law(2, PrecisionProfile(2, 8, 0, 0, 16))
        with pytest.raises(LawConstructionError):
            lubin_tate_law(2, PrecisionProfile(2, 8, 1, 0, 16))
        with pytest.raises(LawConstructionError):
            lubin_tate_law(2, PrecisionProfile(2, 8, 1, 4, 3))


class TestPTypical:
    def setup_method(self):
        self.prof = PrecisionProfile(2, 8, 3, 7, 8)
        self.law = p_typical_bp_law(3, self.prof)

    def test_logarithm_coefficients(self):
        log = self.law.log_series
        assert log.coefficient((1, 0, 0, 0)) == 1
        # l_1 = v_1 / 2 and l_2 = v_2/2 + v_1^3/4
        assert log.coefficient((2, 1, 0, 0)) == Fraction(1, 2)
        assert log.coefficient((4, 0, 1, 0)) == Fraction(1, 2)
        assert log.coefficient((4, 3, 0, 0)) == Fraction(1, 4)

    def test_p_series_is_integral(self):
        ps = self.law.p_series()
        assert_p_integral(ps)
        assert ps.coefficient((1, 0, 0, 0)) == 2
        # the x^p coefficient of [p] is v_1 (1 - p^(p-1))
        assert ps.coefficient((2, 1, 0, 0)) == Fraction(-1)

    def test_weight_grading(self):
        # v_i carries weight 2^i - 1; the x^d coefficient of [2] is
        # homogeneous of weight d - 1
        weights = [1, 3, 7]
        for k in self.law.p_series().terms:
            assert sum(e * w for e, w in zip(k[1:], weights)) == k[0] - 1

    def test_log_is_not_integral(self):
        with pytest.raises(IntegralityError):
            assert_p_integral(self.law.log_series)
        target = PrecisionProfile(2, 8, 3, 7, 8)
        with pytest.raises(ExactDivisionError):
            self.law.log_series.to_modular(target)

    def test_modular_reduction_of_p_series(self):
        target = PrecisionProfile(2, 6, 3, 7, 8)
        ps = self.law.p_series().to_modular(target)
        assert ps.coefficient((2, 1, 0, 0)) == target.modulus - 1

    def test_associativity(self):
        check_associative(self.law)

    def test_p_homomorphism(self):
        check_p_hom(self.law)

    def test_negation(self):
        x = TruncatedSeries.variable(self.prof, 1, 0, domain="rat")
        assert self.law.formal_sum(x, self.law.formal_neg()).is_zero()

    def test_factorization_is_exact(self):
        assert (
            self.law.angle_factorization(2).terms == self.law.pk_series(2).terms
        )

    def test_coprimality_witness(self):
        p_const = TruncatedSeries.constant(self.prof, 1, 2, domain="rat")
        for j, t in ((1, 0), (2, 0), (2, 1)):
            q = self.law.bezout_witness(j, t)
            assert_p_integral(q)
            lhs = self.law.angle_pk_series(j) - self.law.angle_pk_series(t) * q
            assert lhs.terms == p_const.terms

    def test_p3_oracle(self):
        prof = PrecisionProfile(3, 6, 1, 7, 8)
        law = p_typical_bp_law(1, prof)
        assert law.log_series.coefficient((3, 1)) == Fraction(1, 3)
        # x^3 coefficient of [3] is v_1 (1 - 3^2)
        assert law.p_series().coefficient((3, 1)) == Fraction(-8)

    def test_generator_count_guard(self):
        with pytest.raises(LawConstructionError):
            p_typical_bp_law(2, PrecisionProfile(2, 8, 2, 7, 8))
        with pytest.raises(LawConstructionError):
            p_typical_bp_law(3, PrecisionProfile(2, 8, 3, 4, 8))


class TestRegistry:
    def test_cache_returns_same_object(self):
        prof = PrecisionProfile(2, 8, 0, 0, 12)
        a = get_law("multiplicative", prof)
        b = get_law("multiplicative", prof)
        assert a is b
        other = get_law("multiplicative", PrecisionProfile(2, 8, 0, 0, 14))
        assert other is not a

    def test_lubin_tate_keyed_by_height(self):
        prof = PrecisionProfile(2, 8, 1, 4, 12)
        a = get_law("lubin_tate", prof, height=2)
        assert a is get_law("lubin_tate", prof, height=2)
        assert a.kind == "lubin_tate"

    def test_unknown_kind(self):
        with pytest.raises(LawConstructionError):
            get_law("additive", PrecisionProfile(2, 8, 0, 0, 12))
