"""Finite abelian p-groups, their subgroups, and their characters.

Groups are stored by their cyclic exponent vectors (m_1 >= m_2 >= ... >= 1),
meaning A = prod_i Z/p^{m_i}.  Elements are integer tuples reduced mod the
exponents.  Everything here is desk scale: subgroup enumeration walks
staircase generator matrices and dedupes by element set, which is exact and
cheap for |A| up to the enforced cap of 2^9.

Characters are integer vectors (a_1, ..., a_l) with a_i mod p^{m_i}; the
pairing with an element v is sum_i a_i v_i / p^{m_i} in Q/Z, computed here
over the common denominator p^{m_1}.
"""

from itertools import product

ORDER_CAP = 2 ** 9


class GroupError(ValueError):
    pass


class AbelianPGroup:
    """A = prod Z/p^{m_i} with non-increasing exponents."""

    __slots__ = ("p", "exponents", "moduli")

    def __init__(self, p: int, exponents):
        exponents = tuple(int(m) for m in exponents)
        if any(m < 1 for m in exponents):
            raise GroupError("cyclic exponents must be at least 1")
        if list(exponents) != sorted(exponents, reverse=True):
            raise GroupError("cyclic exponents must be non-increasing")
        self.p = p
        self.exponents = exponents
        self.moduli = tuple(p ** m for m in exponents)
        if self.order > ORDER_CAP:
            raise GroupError("group order %d exceeds the desk-scale cap"
                             % self.order)

    @property
    def rank(self) -> int:
        return len(self.exponents)

    @property
    def order(self) -> int:
        total = 1
        for m in self.moduli:
            total *= m
        return total

    def reduce(self, vector):
        return tuple(int(v) % m for v, m in zip(vector, self.moduli))

    def elements(self):
        return [tuple(v) for v in product(*(range(m) for m in self.moduli))]

    def add(self, v, w):
        return tuple((a + b) % m for a, b, m in zip(v, w, self.moduli))

    def scale(self, c, v):
        return tuple(c * a % m for a, m in zip(v, self.moduli))

    def element_order(self, v) -> int:
        order = 1
        for a, m in zip(v, self.moduli):
            a %= m
            part = m // _gcd_power(a, m, self.p)
            order = max(order, part)
        return order

    def closure(self, generators):
        """Subgroup element set generated by the given vectors."""
        seen = {(0,) * self.rank}
        frontier = [self.reduce(g) for g in generators]
        for g in frontier:
            if g not in seen:
                seen.add(g)
        grew = True
        while grew:
            grew = False
            for g in list(seen):
                for h in frontier:
                    s = self.add(g, h)
                    if s not in seen:
                        seen.add(s)
                        grew = True
        return frozenset(seen)

    def subgroups(self):
        """Every subgroup exactly once, as Subgroup objects.

        Candidate generator matrices run over staircase forms (pivot columns
        increasing, pivot entries p^c); closures are deduped by element set,
        so the staircase enumeration only needs to be covering, not
        canonical.
        """
        found = {}
        trivial = self.closure([])
        found[trivial] = Subgroup(self, trivial)
        rows_by_pivot = []
        for j in range(self.rank):
            choices = []
            for c in range(self.exponents[j]):
                head = [0] * j + [self.p ** c]
                tails = product(*(range(self.moduli[t])
                                  for t in range(j + 1, self.rank)))
                choices.extend(tuple(head) + tuple(t) for t in tails)
            rows_by_pivot.append(choices)
        for pivots in product([False, True], repeat=self.rank):
            row_sets = [rows_by_pivot[j] for j in range(self.rank) if pivots[j]]
            if not row_sets:
                continue
            for rows in product(*row_sets):
                elems = self.closure(rows)
                if elems not in found:
                    found[elems] = Subgroup(self, elems)
        return sorted(found.values(), key=lambda s: (s.order, s.sort_key()))

    def maximal_subgroups(self):
        index_p = self.order // self.p
        return [H for H in self.subgroups() if H.order == index_p]

    def characters(self):
        return [Character(self, v) for v in self.elements()]

    def order_p_characters(self):
        """Nonzero characters of order p, in lexicographic value order."""
        out = []
        for vec in self.elements():
            if any(vec) and all(v % (m // self.p) == 0
                                for v, m in zip(vec, self.moduli)):
                out.append(Character(self, vec))
        return out

    def random_automorphism(self, rng):
        """Matrix of a random automorphism (columns = images of generators)."""
        l = self.rank
        while True:
            cols = []
            for j in range(l):
                col = []
                for i in range(l):
                    # entry must respect the order constraint p^{m_j} e_j = 0
                    step = self.p ** max(0, self.exponents[i]
                                         - self.exponents[j])
                    col.append(step * int(rng.integers(0,
                               self.moduli[i] // step)))
                cols.append(col)
            matrix = [[cols[j][i] for j in range(l)] for i in range(l)]
            images = set()
            for v in self.elements():
                images.add(self.apply_matrix(matrix, v))
            if len(images) == self.order:
                return matrix

    def apply_matrix(self, matrix, v):
        out = []
        for i in range(self.rank):
            out.append(sum(matrix[i][j] * v[j] for j in range(self.rank))
                       % self.moduli[i])
        return tuple(out)

    def __repr__(self):
        return "AbelianPGroup(p=%d, exponents=%r)" % (self.p, self.exponents)

    def __eq__(self, other):
        return (isinstance(other, AbelianPGroup)
                and self.p == other.p and self.exponents == other.exponents)

    def __hash__(self):
        return hash((self.p, self.exponents))


def _gcd_power(a, m, p):
    """gcd(a, m) when m is a power of p."""
    if a == 0:
        return m
    g = 1
    while a % p == 0 and g < m:
        a //= p
        g *= p
    return g


class Subgroup:
    """A subgroup given by its element set plus a cyclic decomposition.

    generators are vectors h_1, ..., h_r in the ambient group with orders
    p^{k_1} >= ... >= p^{k_r} and H = <h_1> x ... x <h_r>; they give the
    coordinate system used by restriction maps.
    """

    __slots__ = ("ambient", "elements", "generators", "exponents")

    def __init__(self, ambient: AbelianPGroup, elements):
        self.ambient = ambient
        self.elements = frozenset(elements)
        self.generators, self.exponents = _cyclic_decomposition(
            ambient, self.elements)

    @property
    def order(self) -> int:
        return len(self.elements)

    def as_group(self) -> AbelianPGroup:
        return AbelianPGroup(self.ambient.p, self.exponents)

    def sort_key(self):
        return tuple(sorted(self.elements))

    def coordinates(self, v):
        """Coordinates of v in the chosen cyclic decomposition."""
        amb = self.ambient
        p = amb.p
        ranges = [range(p ** k) for k in self.exponents]
        for combo in product(*ranges):
            w = (0,) * amb.rank
            for c, g in zip(combo, self.generators):
                w = amb.add(w, amb.scale(c, g))
            if w == amb.reduce(v):
                return combo
        raise GroupError("vector is not in the subgroup")

    def __repr__(self):
        return "Subgroup(order=%d, exponents=%r)" % (self.order,
                                                     self.exponents)


def _cyclic_decomposition(group: AbelianPGroup, elements):
    """Generators h_i with H = <h_1> x ... x <h_r>, orders non-increasing.

    Greedy: take an element whose class in H/S has maximal order, then shift
    it by an element of S so that its cyclic span meets S trivially; such a
    shift always exists for abelian p-groups and is found by search at this
    scale.
    """
    zero = (0,) * group.rank
    span = {zero}
    gens, exps = [], []
    elems = sorted(elements)
    while len(span) < len(elements):
        best, best_ord = None, 0
        for h in elems:
            if h in span:
                continue
            t, cur = 0, h
            while cur not in span:
                cur = group.scale(group.p, cur)
                t += 1
            if t > best_ord:
                best, best_ord = h, t
        # Shift by a span element so the cyclic span meets span trivially;
        # the basis theorem guarantees some shift works.
        chosen = None
        target = group.p ** best_ord
        for s in sorted(span):
            cand = tuple((b - si) % m
                         for b, si, m in zip(best, s, group.moduli))
            if group.element_order(cand) != target:
                continue
            cur = cand
            ok = True
            while cur != zero:
                if cur in span:
                    ok = False
                    break
                cur = group.add(cur, cand)
            if ok:
                chosen = cand
                break
        if chosen is None:
            raise GroupError("cyclic decomposition failed")
        gens.append(chosen)
        exps.append(best_ord)
        new_span = set()
        step = zero
        for _ in range(target):
            for s in span:
                new_span.add(group.add(s, step))
            step = group.add(step, chosen)
        span = new_span
    return gens, tuple(exps)


class Character:
    """Character of A as an integer vector (a_1, ..., a_l), a_i mod p^{m_i}."""

    __slots__ = ("group", "values")

    def __init__(self, group: AbelianPGroup, values):
        self.group = group
        self.values = group.reduce(values)

    @property
    def order(self) -> int:
        return self.group.element_order(self.values)

    @property
    def is_zero(self) -> bool:
        return not any(self.values)

    def pairing_numerator(self, v) -> int:
        """Pairing <chi, v> as a numerator over p^{m_1}."""
        g = self.group
        top = g.moduli[0]
        total = 0
        for a, x, m in zip(self.values, v, g.moduli):
            total += a * x * (top // m)
        return total % top

    def kernel(self):
        g = self.group
        return frozenset(v for v in g.elements()
                         if self.pairing_numerator(v) == 0)

    def restrict(self, sub: Subgroup):
        """Restriction along the subgroup's chosen cyclic coordinates."""
        g = self.group
        top = g.moduli[0]
        vals = []
        for h, k in zip(sub.generators, sub.exponents):
            num = self.pairing_numerator(h)
            denom = top // g.p ** k
            if num % denom:
                raise GroupError("restricted character has impossible order")
            vals.append(num // denom)
        return Character(sub.as_group(), vals)

    def __add__(self, other):
        if self.group != other.group:
            raise GroupError("characters live on different groups")
        return Character(self.group,
                         self.group.add(self.values, other.values))

    def __eq__(self, other):
        return (isinstance(other, Character) and self.group == other.group
                and self.values == other.values)

    def __hash__(self):
        return hash((self.group, self.values))

    def __repr__(self):
        return "Character%r" % (self.values,)


def maximal_subgroup_characters(group: AbelianPGroup):
    """One order-p character per maximal subgroup, each the lexicographically
    least choice with that kernel; returned sorted by character values."""
    chosen = {}
    for chi in group.order_p_characters():
        ker = chi.kernel()
        if ker not in chosen:
            chosen[ker] = chi
    return sorted(chosen.values(), key=lambda c: c.values)
