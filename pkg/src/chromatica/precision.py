"""Truncation profiles for modular coefficient towers.

Every series, law, and presentation carries a PrecisionProfile pinning the
prime p, the coefficient precision a (coefficients live in Z/p^a), the number
of deformation variables u_1..u_r, the total-degree cutoff for those
variables, and the total-degree cutoff for the main series variables.
Mixed-profile arithmetic is a hard error, never a silent coercion.
"""

from __future__ import annotations

import itertools
from functools import lru_cache


def is_prime(m: int) -> bool:
    if m < 2:
        return False
    if m < 4:
        return True
    if m % 2 == 0:
        return False
    d = 3
    while d * d <= m:
        if m % d == 0:
            return False
        d += 2
    return True


@lru_cache(maxsize=None)
def u_monomials(deformation_vars: int, u_degree_bound: int) -> tuple:
    """All deformation-variable exponent tuples within the total-degree bound.

    Sorted by total degree, then lexicographically.  Raising the bound only
    appends monomials, so the list for a smaller bound is a prefix of the
    list for a larger one; the truncation protocol relies on that.
    """
    mons = []
    for total in range(u_degree_bound + 1):
        block = [
            exps
            for exps in itertools.product(range(total + 1), repeat=deformation_vars)
            if sum(exps) == total
        ]
        mons.extend(sorted(block))
    if deformation_vars == 0:
        return ((),)
    return tuple(mons)


@lru_cache(maxsize=None)
def u_pair_table(deformation_vars: int, u_degree_bound: int):
    """Index table for multiplying deformation monomials.

    table[i][j] is the index of monomial i*j in u_monomials, or -1 when the
    product exceeds the degree bound.  Kept as nested tuples so it hashes.
    """
    mons = u_monomials(deformation_vars, u_degree_bound)
    index = {m: i for i, m in enumerate(mons)}
    table = []
    for mi in mons:
        row = []
        for mj in mons:
            prod = tuple(a + b for a, b in zip(mi, mj))
            row.append(index.get(prod, -1))
        table.append(tuple(row))
    return tuple(table)


class PrecisionProfile:
    """Bundle of truncation bounds shared by a family of computations.

    p: prime; a: coefficients live in Z/p^a; deformation_vars: number of
    u-variables; u_degree_bound: largest retained total u-degree;
    degree_bound: largest retained total degree in the main variables.
    """

    __slots__ = ("p", "a", "deformation_vars", "u_degree_bound", "degree_bound")

    def __init__(self, p, a, deformation_vars=0, u_degree_bound=0, degree_bound=16):
        if not is_prime(p):
            raise ValueError("p must be prime, got %r" % (p,))
        if a < 1:
            raise ValueError("coefficient precision a must be >= 1, got %r" % (a,))
        if degree_bound < 2:
            raise ValueError("degree bound must be >= 2, got %r" % (degree_bound,))
        if deformation_vars < 0 or u_degree_bound < 0:
            raise ValueError("deformation bounds must be nonnegative")
        object.__setattr__(self, "p", int(p))
        object.__setattr__(self, "a", int(a))
        object.__setattr__(self, "deformation_vars", int(deformation_vars))
        object.__setattr__(self, "u_degree_bound", int(u_degree_bound))
        object.__setattr__(self, "degree_bound", int(degree_bound))

    def __setattr__(self, name, value):
        raise AttributeError("PrecisionProfile is immutable")

    @property
    def modulus(self) -> int:
        return self.p ** self.a

    @property
    def u_monomial_count(self) -> int:
        return len(u_monomials(self.deformation_vars, self.u_degree_bound))

    def u_monomial_list(self):
        return u_monomials(self.deformation_vars, self.u_degree_bound)

    def escalated(self, da=2, du=2, dd=4) -> "PrecisionProfile":
        """The strictly larger profile used by the stability protocol."""
        return PrecisionProfile(
            self.p,
            self.a + da,
            self.deformation_vars,
            self.u_degree_bound + du,
            self.degree_bound + dd,
        )

    def with_bounds(self, a=None, u_degree_bound=None, degree_bound=None):
        return PrecisionProfile(
            self.p,
            self.a if a is None else a,
            self.deformation_vars,
            self.u_degree_bound if u_degree_bound is None else u_degree_bound,
            self.degree_bound if degree_bound is None else degree_bound,
        )

    def truncates(self, other: "PrecisionProfile") -> bool:
        """True when self is a (weak) lowering of other's bounds."""
        return (
            self.p == other.p
            and self.deformation_vars == other.deformation_vars
            and self.a <= other.a
            and self.u_degree_bound <= other.u_degree_bound
            and self.degree_bound <= other.degree_bound
        )

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "a": self.a,
            "deformation_vars": self.deformation_vars,
            "u_degree_bound": self.u_degree_bound,
            "degree_bound": self.degree_bound,
        }

    def _key(self):
        return (self.p, self.a, self.deformation_vars, self.u_degree_bound, self.degree_bound)

    def __eq__(self, other):
        return isinstance(other, PrecisionProfile) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return (
            "PrecisionProfile(p=%d, a=%d, deformation_vars=%d, "
            "u_degree_bound=%d, degree_bound=%d)" % self._key()
        )
