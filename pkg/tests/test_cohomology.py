"""Cohomology presentations, transfers, level rings, and decompositions.

Frozen values below were derived independently before being pinned: the
multiplicative-law anchors by hand from (1+x)^m - 1 over Z/2^8, the
height-two divisor multisets and ranks cross-checked between two pipelines
(transfer-quotient diagonalization vs. the Schur complement onto angle
quotients) and against counting: the level ring of Z/2 at height two has
rank 3 over the 5-dimensional coefficient base, the rank-two elementary
group has 6 = |GL_2(F_2)| level coordinates, and Z/4 has 12.
"""

import random
from collections import Counter

import numpy as np
import pytest

from chromatica.cohomology import (
    BaseRing,
    CohomologyError,
    LawSpec,
    angle_weierstrass,
    cohomology_ring,
    cyclic_decomposition_divisors,
    divisibility_witness,
    drinfeld_presentation,
    level_decomposition_divisors,
    level_ring,
    pk_weierstrass,
    sigma_p_model,
    transfer_quotient,
    weierstrass_rows,
)
from chromatica.cohomology import restriction_matrix, _characters_up_to_order
from chromatica.groups import AbelianPGroup, Character, maximal_subgroup_characters
from chromatica.precision import PrecisionProfile
from chromatica import torsion

MULT = LawSpec("multiplicative")
LT2 = LawSpec("lubin_tate", height=2)


def mult_profile(degree_bound=12):
    return PrecisionProfile(p=2, a=8, degree_bound=degree_bound)


def lt2_profile(degree_bound=12):
    return PrecisionProfile(p=2, a=8, deformation_vars=1, u_degree_bound=4,
                            degree_bound=degree_bound)


def flat(el):
    return el.reshape(-1).tolist()


class TestMultiplicativePresentation:
    def test_relation_is_x_squared_plus_2x(self):
        pres = cohomology_ring(AbelianPGroup(2, (1,)), MULT, mult_profile())
        assert pres.N == 2
        assert pres.relations[0].tolist() == [[0], [2], [1]]

    def test_one_plus_x_squares_to_one(self):
        pres = cohomology_ring(AbelianPGroup(2, (1,)), MULT, mult_profile())
        g = (pres.one() + pres.coordinate(0)) % pres.base.M
        assert np.array_equal(pres.mul(g, g), pres.one())

    def test_chern_of_generator_is_coordinate(self):
        pres = cohomology_ring(AbelianPGroup(2, (1,)), MULT, mult_profile())
        chi = Character(pres.group, [1])
        assert flat(pres.chern(chi)) == [0, 1]

    def test_chern_of_diagonal_character(self):
        # c(chi1 chi2) = x1 + x2 + x1 x2 for the multiplicative law
        pres = cohomology_ring(AbelianPGroup(2, (1, 1)), MULT, mult_profile())
        chi = Character(pres.group, [1, 1])
        assert flat(pres.chern(chi)) == [0, 1, 1, 1]

    def test_chern_of_full_order_vanishes_only_at_zero(self):
        pres = cohomology_ring(AbelianPGroup(2, (1,)), MULT, mult_profile())
        assert not pres.chern(Character(pres.group, [0])).any()
        assert not pres.chern(Character(pres.group, [2])).any()


class TestHeightTwoPresentation:
    def test_shape_and_degrees(self):
        pres = cohomology_ring(AbelianPGroup(2, (1,)), LT2, lt2_profile())
        assert pres.degrees == [4]
        assert pres.base.K == 5
        assert pres.flat_dim == 20

    def test_relation_is_monic_and_distinguished(self):
        pres = cohomology_ring(AbelianPGroup(2, (1,)), LT2, lt2_profile())
        W = pres.relations[0]
        assert W.shape == (5, 5)
        assert W[4].tolist() == [1, 0, 0, 0, 0]
        assert not np.any(W[:4, 0] % 2)

    def test_relation_kills_coordinate(self):
        pres = cohomology_ring(AbelianPGroup(2, (1,)), LT2, lt2_profile())
        val = pres.evaluate_rows(pres.relations[0], pres.coordinate(0),
                                 exact=True)
        assert not val.any()

    def test_ring_axioms_on_random_elements(self):
        pres = cohomology_ring(AbelianPGroup(2, (1, 1)), LT2, lt2_profile())
        rng = np.random.default_rng(7)
        M = pres.base.M
        for _ in range(5):
            f, g, h = (rng.integers(0, M, size=(pres.N, pres.base.K),
                                    dtype=np.int64) for _ in range(3))
            assert np.array_equal(pres.mul(f, g), pres.mul(g, f))
            assert np.array_equal(pres.mul(pres.mul(f, g), h),
                                  pres.mul(f, pres.mul(g, h)))
            assert np.array_equal(pres.mul(f, pres.one()), f)

    def test_formal_sum_is_symmetric_and_unital(self):
        pres = cohomology_ring(AbelianPGroup(2, (1, 1)), LT2, lt2_profile())
        c1 = pres.chern(Character(pres.group, [1, 0]))
        c2 = pres.chern(Character(pres.group, [0, 1]))
        assert np.array_equal(pres.formal_sum(c1, c2), pres.formal_sum(c2, c1))
        assert np.array_equal(pres.formal_sum(c1, pres.zero()), c1)

    def test_chern_is_additive_under_formal_sum(self):
        pres = cohomology_ring(AbelianPGroup(2, (1, 1)), LT2, lt2_profile())
        chi1 = Character(pres.group, [1, 0])
        chi2 = Character(pres.group, [1, 1])
        lhs = pres.chern(chi1 + chi2)
        rhs = pres.formal_sum(pres.chern(chi1), pres.chern(chi2))
        assert np.array_equal(lhs, rhs)

    def test_coordinate_power_ladder_terminates(self):
        pres = cohomology_ring(AbelianPGroup(2, (1, 1)), LT2, lt2_profile())
        powers = pres.power_list(pres.coordinate(0))
        assert len(powers) == 30

    def test_truncated_series_guard(self):
        pres = cohomology_ring(AbelianPGroup(2, (1,)), LT2, lt2_profile())
        short = pres.relations[0][:3]
        with pytest.raises(CohomologyError):
            pres.evaluate_rows(short, pres.coordinate(0))


class TestWeierstrass:
    def test_recovers_planted_distinguished_factor(self):
        base = BaseRing(lt2_profile(degree_bound=63))
        rng = np.random.default_rng(11)
        P, M = 3, base.M
        W0 = rng.integers(0, M, size=(P + 1, base.K), dtype=np.int64)
        W0[P] = base.one_vec()
        W0[:P, 0] = 2 * rng.integers(0, M // 2, size=P, dtype=np.int64)
        unit = rng.integers(0, M, size=(61, base.K), dtype=np.int64)
        unit[0, 0] |= 1
        prod = base.conv_rows(W0, unit)
        assert np.array_equal(weierstrass_rows(prod, base), W0 % M)

    def test_rejects_unit_series(self):
        base = BaseRing(lt2_profile())
        rows = np.zeros((13, base.K), dtype=np.int64)
        rows[0] = base.one_vec()
        with pytest.raises(CohomologyError):
            weierstrass_rows(rows, base)

    def test_rejects_shallow_degree_bound(self):
        base = BaseRing(lt2_profile())
        rows = np.zeros((13, base.K), dtype=np.int64)
        rows[0, 0] = 2
        rows[4] = base.one_vec()
        with pytest.raises(CohomologyError):
            weierstrass_rows(rows, base)

    def test_multiplicative_p_polynomial(self):
        W = pk_weierstrass(MULT, mult_profile(degree_bound=24), 1)
        assert W.tolist() == [[0], [2], [1]]

    def test_angle_zero_is_the_identity_polynomial(self):
        base = BaseRing(lt2_profile())
        W = angle_weierstrass(LT2, lt2_profile(), 0, base)
        assert W.shape == (2, base.K)
        assert W[1].tolist() == [1, 0, 0, 0, 0]
        assert not W[0].any()

    def test_p_polynomial_factors_through_angles(self):
        # the [4]-polynomial is the product of the [2]- and <4>-polynomials
        prof = mult_profile(degree_bound=40)
        base = BaseRing(prof)
        W2 = pk_weierstrass(MULT, prof, 1, base)
        A2 = angle_weierstrass(MULT, prof, 2, base)
        W4 = pk_weierstrass(MULT, prof, 2, base)
        assert np.array_equal(base.conv_rows(W2, A2)[:W4.shape[0]], W4)


class TestTransferAndLevel:
    def test_generator_count_matches_maximal_subgroups(self):
        for exps, count in [((1,), 1), ((1, 1), 3), ((2,), 1)]:
            tq = transfer_quotient(AbelianPGroup(2, exps), LT2, lt2_profile())
            assert len(tq.generators) == count

    def test_cyclic_quotients_are_torsion_free(self):
        for exps, free in [((1,), 15), ((2,), 60)]:
            tq = transfer_quotient(AbelianPGroup(2, exps), LT2, lt2_profile())
            assert tq.torsion_exponent == 0
            assert tq.free_rank == free
            lv = level_ring(AbelianPGroup(2, exps), LT2, lt2_profile())
            assert lv.rank == free and lv.a == 8

    def test_rank_two_quotient_divisors(self):
        tq = transfer_quotient(AbelianPGroup(2, (1, 1)), LT2, lt2_profile())
        assert dict(Counter(tq.divisors)) == {0: 45, 1: 5, 8: 30}
        assert tq.torsion_exponent == 1
        assert tq.free_rank == 30

    def test_mixed_group_quotient_divisors(self):
        tq = transfer_quotient(AbelianPGroup(2, (2, 1)), LT2, lt2_profile())
        assert dict(Counter(tq.divisors)) == {0: 180, 1: 20, 8: 120}
        assert tq.torsion_exponent == 1

    def test_level_precision_drops_by_torsion_exponent(self):
        lv = level_ring(AbelianPGroup(2, (1, 1)), LT2, lt2_profile())
        assert lv.rank == 30
        assert lv.a == 7 and lv.M == 2 ** 7

    def test_level_ring_unit_and_section(self):
        lv = level_ring(AbelianPGroup(2, (1, 1)), LT2, lt2_profile())
        rng = np.random.default_rng(3)
        v = rng.integers(0, lv.M, size=lv.rank, dtype=np.int64)
        assert np.array_equal(lv.mul(lv.one(), v), v % lv.M)
        assert np.array_equal(
            lv.project_element(lv.lift_element(v)), v % lv.M)

    def test_p_polynomial_splits_linearly_over_level(self):
        # the [2]-polynomial factors into (T - c(chi)) over each level ring,
        # one factor per character of order dividing 2, with zero remainder
        # at every step
        cases = [
            ((2,), MULT, mult_profile(), 2, 0),
            ((1,), LT2, lt2_profile(), 1, 2),
            ((1, 1), LT2, lt2_profile(), 1, 0),
        ]
        for exps, spec, prof, m, final_degree in cases:
            g = AbelianPGroup(2, exps)
            pres = cohomology_ring(g, spec, prof)
            lv = level_ring(g, spec, prof)
            W = pk_weierstrass(spec, pres.ring_profile, m, pres.base)
            coeffs = [lv.scale(lv.one(), W[d]) for d in range(W.shape[0])]
            for chi in _characters_up_to_order(g, m):
                wmat = lv.mult_matrix(lv.project_element(pres.chern(chi)))
                quot = [None] * (len(coeffs) - 1)
                carry = coeffs[-1]
                for i in range(len(coeffs) - 2, -1, -1):
                    quot[i] = carry
                    carry = (coeffs[i] + wmat @ carry) % lv.M
                assert not carry.any(), (exps, chi.values)
                coeffs = quot
            assert len(coeffs) - 1 == final_degree


class TestRestriction:
    def test_cyclic_restriction_sends_coordinate_to_coordinate(self):
        g = AbelianPGroup(2, (2,))
        pres = cohomology_ring(g, MULT, mult_profile())
        sub = next(s for s in g.subgroups() if s.order == 2)
        pres_sub = cohomology_ring(sub.as_group(), MULT, mult_profile())
        mat = restriction_matrix(pres, sub, pres_sub)
        img = (mat @ pres.coordinate(0).reshape(-1)) % pres_sub.base.M
        assert img.tolist() == flat(pres_sub.coordinate(0))

    def test_trivial_restriction_kills_coordinate(self):
        g = AbelianPGroup(2, (2,))
        pres = cohomology_ring(g, MULT, mult_profile())
        sub = next(s for s in g.subgroups() if s.order == 1)
        pres_sub = cohomology_ring(sub.as_group(), MULT, mult_profile())
        mat = restriction_matrix(pres, sub, pres_sub)
        assert not ((mat @ pres.coordinate(0).reshape(-1))
                    % pres_sub.base.M).any()

    def test_diagonal_restriction_merges_coordinates(self):
        g = AbelianPGroup(2, (1, 1))
        pres = cohomology_ring(g, MULT, mult_profile())
        sub = next(s for s in g.subgroups()
                   if s.order == 2 and (1, 1) in s.elements)
        pres_sub = cohomology_ring(sub.as_group(), MULT, mult_profile())
        mat = restriction_matrix(pres, sub, pres_sub)
        t = flat(pres_sub.coordinate(0))
        for i in range(2):
            img = (mat @ pres.coordinate(i).reshape(-1)) % pres_sub.base.M
            assert img.tolist() == t

    def test_restriction_is_a_ring_map(self):
        g = AbelianPGroup(2, (2,))
        pres = cohomology_ring(g, LT2, lt2_profile())
        sub = next(s for s in g.subgroups() if s.order == 2)
        pres_sub = cohomology_ring(sub.as_group(), LT2, lt2_profile())
        mat = restriction_matrix(pres, sub, pres_sub)
        Ms = pres_sub.base.M
        rng = np.random.default_rng(23)

        def res(el):
            return ((mat @ el.reshape(-1)) % Ms).reshape(pres_sub.N, -1)

        for _ in range(4):
            f, h = (rng.integers(0, pres.base.M,
                                 size=(pres.N, pres.base.K), dtype=np.int64)
                    for _ in range(2))
            assert np.array_equal(res(pres.mul(f, h)),
                                  pres_sub.mul(res(f), res(h)))
        assert np.array_equal(res(pres.one()), pres_sub.one())


class TestDecompositions:
    def test_rank_two_level_decomposition(self):
        div, pay = level_decomposition_divisors(
            AbelianPGroup(2, (1, 1)), LT2, lt2_profile())
        assert pay["shape"] == [80, 80]
        assert pay["precision"] == 7
        assert dict(Counter(div)) == {0: 35, 1: 40, 2: 5}

    def test_cyclic_pipelines_agree(self):
        # Schur-complement route vs. assembled level projections
        for k in (1, 2):
            cyc, _ = cyclic_decomposition_divisors(k, LT2, lt2_profile())
            lev, pay = level_decomposition_divisors(
                AbelianPGroup(2, (k,)), LT2, lt2_profile())
            assert sorted(cyc) == sorted(lev)
            assert pay["precision"] == 8

    def test_cyclic_exponents(self):
        cyc1, _ = cyclic_decomposition_divisors(1, LT2, lt2_profile())
        cyc2, _ = cyclic_decomposition_divisors(2, LT2, lt2_profile())
        assert dict(Counter(cyc1)) == {0: 15, 1: 5}
        assert dict(Counter(cyc2)) == {0: 60, 1: 15, 2: 5}

    def test_multiplicative_cyclic_column_is_exact(self):
        div, _ = cyclic_decomposition_divisors(
            2, MULT, mult_profile(degree_bound=16))
        mids = [e for e in div if 0 < e < 8]
        assert max(mids) == 2


class TestDrinfeld:
    def test_cyclic_base_case(self):
        rep = drinfeld_presentation(AbelianPGroup(2, (1,)), LT2, lt2_profile())
        assert rep["status"] == "ok"
        assert rep["degree"] == 3
        assert (rep["rank_level_prev"], rep["rank_level_full"]) == (5, 15)
        assert rep["rank_agreement"] and rep["annihilator_zero"]
        assert rep["level_precision"] == [8, 8]

    def test_rank_two_case(self):
        rep = drinfeld_presentation(AbelianPGroup(2, (1, 1)), LT2,
                                    lt2_profile())
        assert rep["status"] == "ok"
        assert rep["degree"] == 2
        assert (rep["rank_level_prev"], rep["rank_level_full"]) == (15, 30)
        assert rep["rank_agreement"] and rep["annihilator_zero"]
        assert rep["level_precision"] == [8, 7]

    def test_mixed_group_case(self):
        rep = drinfeld_presentation(AbelianPGroup(2, (2, 1)), LT2,
                                    lt2_profile())
        assert rep["status"] == "ok"
        assert rep["degree"] == 2
        assert rep["rank_agreement"] and rep["annihilator_zero"]


class TestSigmaAndWitnesses:
    def test_sigma_column_exponent_is_one(self):
        for spec, prof in [(MULT, mult_profile()), (LT2, lt2_profile())]:
            div, pay = sigma_p_model(spec, prof)
            mids = [e for e in div if 0 < e < 8]
            assert mids and max(mids) == 1
        assert pay["invariant_rank"] == 20

    def test_every_maximal_character_divides_p(self):
        g = AbelianPGroup(2, (1, 1))
        tq = transfer_quotient(g, LT2, lt2_profile())
        pres = tq.pres
        for chi in maximal_subgroup_characters(g):
            rep = divisibility_witness(tq, chi)
            assert rep["status"] == "witnessed"
            w = np.array(rep["witness"], dtype=np.int64)
            prod = pres.mul(pres.chern(chi), w)
            # equality holds in the quotient by the transfer ideal
            diff = (prod - pres.scalar(2)).reshape(-1) % pres.base.M
            assert torsion.solve_linear(tq.matrix, diff, 2, 8) is not None

    def test_zero_character_is_rejected(self):
        g = AbelianPGroup(2, (1, 1))
        tq = transfer_quotient(g, LT2, lt2_profile())
        with pytest.raises(CohomologyError):
            divisibility_witness(tq, Character(g, [0, 0]))
