"""Tests for abelian p-group enumeration and characters."""

import numpy as np
import pytest

from chromatica.groups import (
    AbelianPGroup,
    Character,
    GroupError,
    maximal_subgroup_characters,
)


class TestGroups:
    def test_validation(self):
        with pytest.raises(GroupError):
            AbelianPGroup(2, [1, 2])
        with pytest.raises(GroupError):
            AbelianPGroup(2, [0])
        with pytest.raises(GroupError):
            AbelianPGroup(2, [10])  # order 1024 over the cap

    def test_order_and_elements(self):
        A = AbelianPGroup(2, [2, 1])
        assert A.order == 8
        assert len(A.elements()) == 8
        assert A.element_order((1, 0)) == 4
        assert A.element_order((2, 1)) == 2
        assert A.element_order((0, 0)) == 1

    def test_subgroup_counts(self):
        # Frozen subgroup lattice sizes for the desk-scale groups.
        assert len(AbelianPGroup(2, [3]).subgroups()) == 4
        assert len(AbelianPGroup(2, [1, 1]).subgroups()) == 5
        assert len(AbelianPGroup(2, [1, 1, 1]).subgroups()) == 16
        assert len(AbelianPGroup(2, [2, 1]).subgroups()) == 8
        assert len(AbelianPGroup(3, [1, 1]).subgroups()) == 6

    def test_subgroups_are_distinct_and_closed(self):
        A = AbelianPGroup(2, [2, 1])
        subs = A.subgroups()
        assert len({s.elements for s in subs}) == len(subs)
        for s in subs:
            for v in s.elements:
                for w in s.elements:
                    assert A.add(v, w) in s.elements

    def test_maximal_subgroups(self):
        assert len(AbelianPGroup(2, [1, 1, 1]).maximal_subgroups()) == 7
        assert len(AbelianPGroup(2, [2, 1]).maximal_subgroups()) == 3
        assert len(AbelianPGroup(3, [1, 1]).maximal_subgroups()) == 4
        assert len(AbelianPGroup(2, [3]).maximal_subgroups()) == 1

    def test_cyclic_decomposition_of_subgroups(self):
        A = AbelianPGroup(2, [2, 1])
        for s in A.subgroups():
            total = 1
            for k in s.exponents:
                total *= A.p ** k
            assert total == s.order
            # generators really decompose the subgroup
            rebuilt = A.closure(s.generators)
            assert rebuilt == s.elements
        klein = [s for s in A.subgroups()
                 if s.order == 4 and s.exponents == (1, 1)]
        assert len(klein) == 1

    def test_subgroup_coordinates(self):
        A = AbelianPGroup(2, [2, 2])
        for s in A.subgroups():
            H = s.as_group()
            for v in s.elements:
                coords = s.coordinates(v)
                w = (0, 0)
                for c, g in zip(coords, s.generators):
                    w = A.add(w, A.scale(c, g))
                assert w == v
                assert len(coords) == H.rank


class TestCharacters:
    def test_order(self):
        A = AbelianPGroup(2, [2, 1])
        assert Character(A, (0, 0)).order == 1
        assert Character(A, (1, 0)).order == 4
        assert Character(A, (2, 1)).order == 2

    def test_kernel_sizes(self):
        A = AbelianPGroup(2, [1, 1])
        for chi in A.characters():
            expected = A.order if chi.is_zero else A.order // chi.order
            assert len(chi.kernel()) == expected

    def test_addition(self):
        A = AbelianPGroup(3, [1, 1])
        chi = Character(A, (1, 2)) + Character(A, (2, 2))
        assert chi.values == (0, 1)

    def test_restriction_to_diagonal(self):
        A = AbelianPGroup(2, [1, 1])
        diag = next(s for s in A.subgroups()
                    if s.order == 2 and (1, 1) in s.elements)
        chi = Character(A, (1, 0))
        res = chi.restrict(diag)
        assert res.values == (1,)
        zero = Character(A, (1, 1)).restrict(diag)
        assert zero.values == (0,)

    def test_maximal_subgroup_characters(self):
        A = AbelianPGroup(2, [1, 1, 1])
        chis = maximal_subgroup_characters(A)
        assert len(chis) == 7
        assert len({c.kernel() for c in chis}) == 7
        assert all(c.order == 2 for c in chis)
        # lexicographically least pick for each kernel
        for c in chis:
            for other in A.order_p_characters():
                if other.kernel() == c.kernel():
                    assert c.values <= other.values

    def test_cyclic_character_generator(self):
        A = AbelianPGroup(3, [2])
        chis = maximal_subgroup_characters(A)
        assert len(chis) == 1
        assert chis[0].values == (3,)


class TestAutomorphisms:
    def test_random_automorphism_is_bijective(self):
        rng = np.random.default_rng(3)
        for exps in ((1, 1), (2, 1), (1, 1, 1)):
            A = AbelianPGroup(2, exps)
            mat = A.random_automorphism(rng)
            images = {A.apply_matrix(mat, v) for v in A.elements()}
            assert len(images) == A.order
            for v in A.elements():
                for w in A.elements():
                    got = A.apply_matrix(mat, A.add(v, w))
                    expect = A.add(A.apply_matrix(mat, v),
                                   A.apply_matrix(mat, w))
                    assert got == expect
