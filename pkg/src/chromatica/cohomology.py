"""Cohomology rings of finite abelian p-groups over a formal group law.

The ring E^0(BA) for A = prod_i Z/p^{m_i} is presented as a finite free
module over the truncated base ring (Z/p^a)[u_1..u_nu]/(deg > bound): one
relation per cyclic factor, namely the Weierstrass polynomial of the
[p^{m_i}]-series in the coordinate x_i.  Elements are integer coordinate
arrays of shape (N, K) where N = prod_i deg(g_i) counts basis monomials
x^alpha and K counts deformation monomials.

On top of the presentations this module builds character Chern classes,
restriction maps, transfer ideals and their quotients, level rings (the
free part of a transfer quotient), a column presentation of the symmetric
group S_p via averaging, and the two decomposition maps whose cokernel
exponents the experiment layer measures.
"""

from __future__ import annotations

from itertools import product as iter_product

import numpy as np

from .precision import PrecisionProfile, u_monomials, u_pair_table
from .series import TruncatedSeries
from .fgl import (
    LUBIN_TATE,
    MULTIPLICATIVE,
    P_TYPICAL,
    FormalGroupLaw,
    deformation_law_on_region,
    get_law,
)
from .groups import AbelianPGroup, Character, Subgroup, maximal_subgroup_characters
from . import torsion


class CohomologyError(RuntimeError):
    """A ring construction or certified division failed."""


# degree cap for materializing two-variable laws; mirrors the solver cap
F_TABLE_DEGREE_LIMIT = 512

# extra x-degree headroom, in multiples of the relation degree, kept when
# preparing Weierstrass polynomials so the certificate is meaningful
PREP_MARGIN = 3


def _ideal_depth(lawspec, profile) -> int:
    """Largest s with m^s nonzero, for the coefficient maximal ideal m.

    m is generated by p and the deformation variables, so the deepest
    surviving product is p^(a-1) times every variable at its cap.
    """
    return profile.a + lawspec.deformation_vars * profile.u_degree_bound


def _exact_matmul(A: np.ndarray, B: np.ndarray, modulus: int) -> np.ndarray:
    """Product of two nonnegative residue matrices, reduced mod ``modulus``.

    Routes through float64 BLAS when every partial sum stays below 2**53,
    which keeps large reductions fast without losing exactness.
    """
    if A.shape[0] == 0 or B.shape[1] == 0 or A.shape[1] == 0:
        return np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
    inner = A.shape[1]
    bound = inner * (modulus - 1) ** 2
    if bound < 2 ** 53:
        out = A.astype(np.float64) @ B.astype(np.float64)
        return out.astype(np.int64) % modulus
    if bound < 2 ** 63:
        return (A @ B) % modulus
    step = max(1, (2 ** 62) // ((modulus - 1) ** 2))
    out = np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
    for lo in range(0, inner, step):
        out += A[:, lo:lo + step] @ B[lo:lo + step] % modulus
        out %= modulus
    return out


class LawSpec:
    """A formal group law family, independent of any precision profile.

    Presentations are rebuilt at several profiles during stability checks,
    so operations carry this light descriptor and instantiate laws on
    demand through the process-wide cache.
    """

    __slots__ = ("kind", "height", "v_count")

    def __init__(self, kind, height=None, v_count=None):
        if kind == MULTIPLICATIVE:
            height, v_count = None, None
        elif kind == LUBIN_TATE:
            if height is None or height < 1:
                raise CohomologyError("Lubin-Tate spec needs a height >= 1")
            v_count = None
        elif kind == P_TYPICAL:
            if v_count is None or v_count < 1:
                raise CohomologyError("p-typical spec needs a positive v_count")
            height = None
        else:
            raise CohomologyError("unknown law kind %r" % (kind,))
        self.kind = kind
        self.height = height
        self.v_count = v_count

    @classmethod
    def multiplicative(cls):
        return cls(MULTIPLICATIVE)

    @classmethod
    def lubin_tate(cls, height):
        return cls(LUBIN_TATE, height=height)

    @classmethod
    def p_typical(cls, v_count):
        return cls(P_TYPICAL, v_count=v_count)

    @classmethod
    def for_height(cls, height):
        """Height 1 uses the exact multiplicative model, like the law layer."""
        if height == 1:
            return cls.multiplicative()
        return cls.lubin_tate(height)

    @property
    def deformation_vars(self) -> int:
        if self.kind == LUBIN_TATE:
            return self.height - 1
        if self.kind == P_TYPICAL:
            return self.v_count
        return 0

    @property
    def formal_height(self) -> int:
        """Growth exponent: the [p^m]-series has Weierstrass degree p^{m*h}."""
        if self.kind == MULTIPLICATIVE:
            return 1
        if self.kind == LUBIN_TATE:
            return self.height
        raise CohomologyError(
            "the p-typical base ring is not local, so [p^m]-series have no "
            "finite Weierstrass degree and no quotient presentation")

    def law(self, profile: PrecisionProfile) -> FormalGroupLaw:
        return get_law(self.kind, profile, height=self.height,
                       v_count=self.v_count)

    def key(self):
        return (self.kind, self.height, self.v_count)

    def as_dict(self):
        out = {"kind": self.kind}
        if self.height is not None:
            out["height"] = self.height
        if self.v_count is not None:
            out["v_count"] = self.v_count
        return out

    def __repr__(self):
        return "LawSpec(%s)" % ", ".join(
            "%s=%r" % (k, v) for k, v in self.as_dict().items())


# -- base-ring kernels ----------------------------------------------------------


class BaseRing:
    """Vectorized arithmetic for the truncated coefficient ring.

    Ring elements are length-K int64 vectors over the deformation-monomial
    basis; polynomials in one main variable are (deg+1, K) row arrays.
    """

    def __init__(self, profile: PrecisionProfile):
        self.profile = profile
        self.p = profile.p
        self.a = profile.a
        self.M = profile.modulus
        self.nu = profile.deformation_vars
        self.ub = profile.u_degree_bound
        # maximal-ideal depth: largest s with (p, u_1, ..)^s nonzero
        self.depth = self.a + self.nu * self.ub
        mons = u_monomials(self.nu, self.ub)
        self.monomials = mons
        self.K = len(mons)
        self.index = {m: i for i, m in enumerate(mons)}
        table = u_pair_table(self.nu, self.ub)
        pi, pj, pk = [], [], []
        for i in range(self.K):
            for j in range(self.K):
                k = table[i][j]
                if k >= 0:
                    pi.append(i)
                    pj.append(j)
                    pk.append(k)
        self._pi = np.array(pi, dtype=np.int64)
        self._pj = np.array(pj, dtype=np.int64)
        self._pk = np.array(pk, dtype=np.int64)

    def zero_vec(self):
        return np.zeros(self.K, dtype=np.int64)

    def one_vec(self):
        v = self.zero_vec()
        v[0] = 1
        return v

    def const_vec(self, c: int):
        v = self.zero_vec()
        v[0] = c % self.M
        return v

    def is_unit(self, vec) -> bool:
        return int(vec[0]) % self.p != 0

    def mul_vec(self, x, y):
        out = np.zeros(self.K, dtype=np.int64)
        np.add.at(out, self._pk, x[self._pi] * y[self._pj] % self.M)
        return out % self.M

    def inv_vec(self, c):
        if not self.is_unit(c):
            raise CohomologyError("cannot invert a non-unit coefficient")
        v = self.zero_vec()
        v[0] = pow(int(c[0]), -1, self.M)
        # lift the scalar inverse through the nilpotent part
        for _ in range(self.depth + 2):
            err = self.mul_vec(c, v)
            err[0] = (err[0] - 1) % self.M
            if not err.any():
                return v
            v = (v - self.mul_vec(v, err)) % self.M
        raise CohomologyError("unit inversion did not stabilize")

    def block(self, c):
        """K x K matrix of multiplication by the coefficient vector c."""
        out = np.zeros((self.K, self.K), dtype=np.int64)
        np.add.at(out, (self._pk, self._pj), c[self._pi])
        return out % self.M

    def block_stack(self, rows):
        """Multiplication blocks for every row of a (..., K) array."""
        rows = np.asarray(rows, dtype=np.int64) % self.M
        out = np.zeros(rows.shape[:-1] + (self.K, self.K), dtype=np.int64)
        np.add.at(out, (Ellipsis, self._pk, self._pj), rows[..., self._pi])
        return out

    def conv_rows(self, A, B):
        """Polynomial product of two coefficient-row arrays."""
        A = np.asarray(A, dtype=np.int64) % self.M
        B = np.asarray(B, dtype=np.int64) % self.M
        la, lb = A.shape[0], B.shape[0]
        if la == 0 or lb == 0:
            return np.zeros((0, self.K), dtype=np.int64)
        depth = min(la, lb)
        if depth * (self.M - 1) ** 2 >= 2 ** 63:
            raise CohomologyError("convolution would overflow the integer carrier")
        out = np.zeros((la + lb - 1, self.K), dtype=np.int64)
        for i, j, k in zip(self._pi, self._pj, self._pk):
            out[:, k] += np.convolve(A[:, i], B[:, j])
            out[:, k] %= self.M
        return out

    def divmod_monic(self, rows, W):
        """Synthetic division by a monic polynomial, exact over the ring.

        W is a (P+1, K) row array whose leading row is the constant 1.
        Returns (Q, R) with rows = Q*W + R and deg R < P.
        """
        W = np.asarray(W, dtype=np.int64) % self.M
        P = W.shape[0] - 1
        if not np.array_equal(W[P], self.one_vec()):
            raise CohomologyError("divisor is not monic")
        R = np.asarray(rows, dtype=np.int64).copy() % self.M
        n = R.shape[0]
        if n - 1 < P:
            return np.zeros((0, self.K), dtype=np.int64), R
        Q = np.zeros((n - P, self.K), dtype=np.int64)
        WB = self.block_stack(W[:P]) if P else None
        for t in range(n - 1, P - 1, -1):
            q = R[t]
            if not q.any():
                continue
            Q[t - P] = q
            if P:
                R[t - P:t] = (R[t - P:t] - WB @ q) % self.M
            R[t] = 0
        return Q, R[:P]

    def rem_monic(self, rows, W):
        return self.divmod_monic(rows, W)[1]

    def mulmod(self, A, B, W):
        return self.rem_monic(self.conv_rows(A, B), W)


def series_rows(series: TruncatedSeries, base: BaseRing, upto: int):
    """Dense (upto+1, K) coefficient rows of a one-variable series."""
    rows = np.zeros((upto + 1, base.K), dtype=np.int64)
    for key, c in series.terms.items():
        d = key[0]
        if d <= upto:
            rows[d, base.index[key[1:]]] = c % base.M
    return rows


def weierstrass_rows(rows, base: BaseRing, expect_degree=None):
    """Monic distinguished divisor of a series, certified by exact division.

    The candidate starts at x^P, where P is the first coefficient that is a
    unit, and is corrected through divide-and-update passes: each pass
    divides the series by the candidate and absorbs the remainder, scaled
    by an inverse of the quotient mod the candidate, into the low part.
    Terminates only when the remainder vanishes identically and the
    quotient is a unit, so a returned polynomial is always a certificate.
    """
    M, p = base.M, base.p
    rows = np.asarray(rows, dtype=np.int64) % M
    units = np.nonzero(rows[:, 0] % p)[0]
    if units.size == 0:
        raise CohomologyError(
            "series has no unit coefficient at this precision; "
            "Weierstrass degree undetectable")
    P = int(units[0])
    if P == 0:
        raise CohomologyError("series is a unit; no distinguished divisor")
    if expect_degree is not None and P != expect_degree:
        raise CohomologyError(
            "Weierstrass degree %d does not match the expected %d"
            % (P, expect_degree))
    D = rows.shape[0] - 1
    if D < (base.depth + 2) * P:
        raise CohomologyError(
            "degree bound %d too small to certify a degree-%d preparation"
            % (D, P))
    W = np.zeros((P + 1, base.K), dtype=np.int64)
    W[P] = base.one_vec()
    V = None
    converged = False
    # the inverse defect contracts (m, x)-adically and that ideal has
    # nilpotence index about depth * P, so allow log2 of that plus slack
    passes = base.depth + (P * (base.depth + 1)).bit_length() + 4
    for _ in range(passes):
        Q, R = base.divmod_monic(rows, W)
        if not R.any():
            converged = True
            break
        Qm = base.rem_monic(Q, W)
        if V is None:
            if not base.is_unit(Qm[0]):
                raise CohomologyError("quotient is not a unit at degree zero")
            V = np.zeros((P, base.K), dtype=np.int64)
            V[0] = base.inv_vec(Qm[0])
        # one refinement of V toward the inverse of Q mod W
        T = (-base.mulmod(Qm, V, W)) % M
        T[0] = (T[0] + 2 * base.one_vec()) % M
        V = base.mulmod(V, T, W)
        delta = base.mulmod(V, R, W)
        W[:P] = (W[:P] + delta) % M
    if not converged:
        raise CohomologyError("Weierstrass iteration did not converge")
    Q, R = base.divmod_monic(rows, W)
    if R.any() or not base.is_unit(Q[0]):
        raise CohomologyError("preparation certificate failed")
    if np.any(W[:P, 0] % p):
        raise CohomologyError("prepared polynomial is not distinguished")
    return W


# -- cached relation polynomials --------------------------------------------------

_PREP_CACHE: dict = {}


def _profile_key(profile: PrecisionProfile):
    return (profile.p, profile.a, profile.deformation_vars,
            profile.u_degree_bound, profile.degree_bound)


def pk_weierstrass(lawspec: LawSpec, profile: PrecisionProfile, m: int,
                   base: BaseRing = None):
    """Weierstrass polynomial of the [p^m]-series, as coefficient rows."""
    key = (lawspec.key(), _profile_key(profile), m)
    got = _PREP_CACHE.get(key)
    if got is not None:
        return got
    if base is None:
        base = BaseRing(profile)
    expected = profile.p ** (m * lawspec.formal_height)
    law = lawspec.law(profile)
    # Preparation only consumes rows up to a fixed multiple of the target
    # degree, so trim the series before the division loop.
    upto = min(profile.degree_bound,
               (_ideal_depth(lawspec, profile) + PREP_MARGIN) * expected)
    rows = series_rows(law.pk_series(m), base, upto)
    W = weierstrass_rows(rows, base, expect_degree=expected)
    _PREP_CACHE[key] = W
    return W


def angle_weierstrass(lawspec: LawSpec, profile: PrecisionProfile, j: int,
                      base: BaseRing = None):
    """Weierstrass polynomial of the <p^j>-series via exact monic division.

    The [p^j]-preparation factors exactly as the [p^{j-1}]-preparation
    times the <p^j>-preparation; the division is performed and its zero
    remainder asserted, so a non-factoring configuration cannot pass
    silently.
    """
    if base is None:
        base = BaseRing(profile)
    if j == 0:
        W = np.zeros((2, base.K), dtype=np.int64)
        W[1] = base.one_vec()
        return W
    W_full = pk_weierstrass(lawspec, profile, j, base)
    W_prev = pk_weierstrass(lawspec, profile, j - 1, base)
    Q, R = base.divmod_monic(W_full, W_prev)
    if R.any():
        raise CohomologyError(
            "[p^%d]-preparation is not divisible by the [p^%d] one" % (j, j - 1))
    return Q


# -- quotient ring presentations ---------------------------------------------------


class QuotientRingPresentation:
    """E^0(BA) as a finite free module with explicit multiplication.

    The internal law is rebuilt with enough x-degree headroom to certify
    every relation and to evaluate one-variable series at any nilpotent
    element; the profile handed in by the caller is echoed unchanged in
    reports.
    """

    def __init__(self, group: AbelianPGroup, lawspec: LawSpec,
                 profile: PrecisionProfile):
        if profile.deformation_vars != lawspec.deformation_vars:
            raise CohomologyError(
                "profile carries %d deformation variables, law needs %d"
                % (profile.deformation_vars, lawspec.deformation_vars))
        if group.p != profile.p:
            raise CohomologyError("group prime and profile prime differ")
        self.group = group
        self.lawspec = lawspec
        self.profile = profile
        self.base = BaseRing(profile)
        h = lawspec.formal_height
        p = profile.p
        self.degrees = [p ** (m * h) for m in group.exponents]
        self.N = 1
        for d in self.degrees:
            self.N *= d
        total = sum(self.degrees)
        # past this power every product of maximal-ideal elements vanishes
        depth = _ideal_depth(lawspec, profile)
        self.nilpotence_bound = (
            (depth + 1) * total
            + sum(d - 1 for d in self.degrees) + 1) if self.degrees else 1
        need = profile.degree_bound
        if self.degrees:
            need = max(need,
                       (depth + PREP_MARGIN) * max(self.degrees),
                       self.nilpotence_bound)
        self.ring_profile = profile.with_bounds(degree_bound=need)
        self.law = lawspec.law(self.ring_profile)
        self.relations = [
            pk_weierstrass(lawspec, self.ring_profile, m, self.base)
            for m in group.exponents
        ]
        for W, d in zip(self.relations, self.degrees):
            if W.shape[0] - 1 != d:
                raise CohomologyError("relation degree drifted from p^{m h}")
        # single-step reducers: x_i^{d_i} rewritten over lower powers
        self.reducers = [
            self.base.block_stack((-W[:d]) % self.base.M)
            for W, d in zip(self.relations, self.degrees)
        ]
        strides = [0] * len(self.degrees)
        acc = 1
        for i in range(len(self.degrees) - 1, -1, -1):
            strides[i] = acc
            acc *= self.degrees[i]
        self.strides = strides
        self._pre = [self.N // (self.strides[i] * self.degrees[i])
                     for i in range(len(self.degrees))]
        self._post = strides
        # ladder plan: each basis index is one coordinate shift away from a
        # previously visited index
        plan = np.zeros((self.N, 2), dtype=np.int64)
        for idx in range(1, self.N):
            rem = idx
            var = -1
            for i, (s, d) in enumerate(zip(self.strides, self.degrees)):
                if (idx // s) % d:
                    var = i
            plan[idx] = (var, idx - self.strides[var])
        self._ladder = plan
        self._ftable = None
        self._angle_rows = None

    # -- element plumbing ---------------------------------------------------

    @property
    def flat_dim(self) -> int:
        return self.N * self.base.K

    def zero(self):
        return np.zeros((self.N, self.base.K), dtype=np.int64)

    def one(self):
        el = self.zero()
        el[0, 0] = 1
        return el

    def scalar(self, c: int):
        el = self.zero()
        el[0, 0] = c % self.base.M
        return el

    def coordinate(self, i: int):
        # relation degrees are p^{m h} >= 2, so x_i is always a basis monomial
        el = self.zero()
        el[self.strides[i], 0] = 1
        return el

    def vec_scale(self, el, c):
        """Multiply an element by a base-ring coefficient vector."""
        return el @ self.base.block(c).T % self.base.M

    def _shift(self, el, i):
        """Multiply by the coordinate x_i, reducing the overflow degree."""
        d = self.degrees[i]
        K = self.base.K
        v = el.reshape(self._pre[i], d, self._post[i], K)
        out = np.zeros_like(v)
        out[:, 1:] = v[:, :d - 1]
        top = v[:, d - 1]
        if top.any():
            out += np.einsum("jkl,xyl->xjyk", self.reducers[i], top)
        return (out % self.base.M).reshape(self.N, K)

    def mult_tensor(self, el):
        """(N, N, K) tensor of multiplication by el, target index first."""
        cols = np.zeros((self.N, self.N, self.base.K), dtype=np.int64)
        cols[0] = el % self.base.M
        for idx in range(1, self.N):
            var, prev = self._ladder[idx]
            cols[idx] = self._shift(cols[prev], var)
        return cols.transpose(1, 0, 2)

    def mult_matrix(self, el):
        """Flat (NK, NK) matrix of multiplication by el."""
        return torsion.flatten_module_map(self.mult_tensor(el), self.profile)

    def mul(self, f, g):
        out = (self.mult_matrix(g) @ f.reshape(-1)) % self.base.M
        return out.reshape(self.N, self.base.K)

    def power_list(self, el, matrix=None):
        """[el^0, el^1, ...] up to the last nonzero power."""
        if matrix is None:
            matrix = self.mult_matrix(el)
        powers = [self.one()]
        cur = self.one().reshape(-1)
        for _ in range(self.nilpotence_bound + 1):
            cur = (matrix @ cur) % self.base.M
            if not cur.any():
                return powers
            powers.append(cur.reshape(self.N, self.base.K))
        raise CohomologyError("power ladder exceeded the nilpotence bound")

    def evaluate_rows(self, rows, el, exact=False):
        """Value of a one-variable series (as rows) at a nilpotent element.

        A truncated series must extend past the last nonzero power of the
        argument; pass exact=True for genuine polynomials, whose missing
        high rows are exactly zero.
        """
        matrix = self.mult_matrix(el)
        powers = self.power_list(el, matrix)
        out = self.zero()
        for d in range(min(len(rows), len(powers))):
            c = rows[d]
            if c.any():
                out = (out + self.vec_scale(powers[d], c)) % self.base.M
        if not exact and len(powers) > len(rows):
            raise CohomologyError(
                "series truncated below the nilpotence degree of the argument")
        return out

    def reduce_univariate_rows(self, rows, i: int):
        """Element given by a series in the single coordinate x_i."""
        R = self.base.rem_monic(rows, self.relations[i])
        el = self.zero()
        s = self.strides[i]
        for j in range(R.shape[0]):
            el[j * s] = R[j]
        return el

    # -- the formal sum and Chern classes ------------------------------------

    def angle_rows(self):
        """Coefficient rows of the <p>-series at the internal degree bound."""
        if self._angle_rows is None:
            rows = series_rows(self.law.pk_series(1), self.base,
                               self.ring_profile.degree_bound)
            if rows[0].any():
                raise CohomologyError("[p]-series has a constant term")
            self._angle_rows = rows[1:]
        return self._angle_rows

    def _f_table(self, t1: int, t2: int):
        """Coefficients of the two-variable law on the [0,t1] x [0,t2] cell box.

        Returns a dense (t1+1, t2+1, K) array; cached and regrown on demand.
        """
        cached = self._ftable
        if cached is not None and cached.shape[0] > t1 and cached.shape[1] > t2:
            return cached
        want1 = max(t1, cached.shape[0] - 1 if cached is not None else 0)
        want2 = max(t2, cached.shape[1] - 1 if cached is not None else 0)
        K = self.base.K
        # exact coefficients only exist up to the total degree of the solve,
        # so the span must cover the far corner of the rectangle
        span = want1 + want2
        if self.lawspec.kind == LUBIN_TATE and self.lawspec.height >= 2:
            if span > F_TABLE_DEGREE_LIMIT:
                raise CohomologyError(
                    "two-variable law cells out of reach: degree %d exceeds %d"
                    % (span, F_TABLE_DEGREE_LIMIT))
            prof = self.profile.with_bounds(degree_bound=span)
            region = np.zeros((span + 1, span + 1), dtype=bool)
            region[:want1 + 1, :want2 + 1] = True
            F = deformation_law_on_region(prof, self.lawspec.height, region)
        elif (self.lawspec.kind == MULTIPLICATIVE
              or self.law.profile.degree_bound >= span):
            F = self.law.F
        else:
            deep = self.profile.with_bounds(degree_bound=span)
            F = self.lawspec.law(deep).F
        table = np.zeros((want1 + 1, want2 + 1, K), dtype=np.int64)
        for key, c in F.terms.items():
            i, j = key[0], key[1]
            if i <= want1 and j <= want2:
                table[i, j, self.base.index[key[2:]]] = c % self.base.M
        self._ftable = table
        return table

    def formal_sum(self, e1, e2):
        """F(e1, e2) for nilpotent elements with no constant slot."""
        if not e1.any():
            return e2 % self.base.M
        if not e2.any():
            return e1 % self.base.M
        if e1[0].any() or e2[0].any():
            raise CohomologyError("formal sum needs arguments without 1-slot")
        P1 = self.power_list(e1)
        m2 = self.mult_matrix(e2)
        P2 = self.power_list(e2, m2)
        t1, t2 = len(P1) - 1, len(P2) - 1
        table = self._f_table(t1, t2)
        P1A = np.stack(P1)  # (t1+1, N, K)
        # A[j] = sum_i F_{i,j} * e1^i, accumulated pairwise over monomials
        A = np.zeros((t2 + 1, self.N, self.base.K), dtype=np.int64)
        for pi, pj, pk in zip(self.base._pi, self.base._pj, self.base._pk):
            C = table[:t1 + 1, :t2 + 1, pi]
            if not C.any():
                continue
            A[:, :, pk] += np.einsum("ij,in->jn", C, P1A[:, :, pj])
            A[:, :, pk] %= self.base.M
        # Horner in e2 keeps every step a flat matrix-vector product
        acc = A[t2].reshape(-1)
        for j in range(t2 - 1, -1, -1):
            acc = (m2 @ acc + A[j].reshape(-1)) % self.base.M
        return acc.reshape(self.N, self.base.K)

    def chern(self, chi: Character):
        """First Chern class of a character, reduced into the presentation."""
        if chi.group != self.group:
            raise CohomologyError("character belongs to a different group")
        out = None
        for i, c in enumerate(chi.values):
            c = c % (self.group.p ** self.group.exponents[i])
            if c == 0:
                continue
            rows = series_rows(self.law.m_series(c), self.base,
                               self.ring_profile.degree_bound)
            comp = self.reduce_univariate_rows(rows, i)
            out = comp if out is None else self.formal_sum(out, comp)
        return self.zero() if out is None else out

    # -- serialization --------------------------------------------------------

    def canonical_payload(self):
        return {
            "group": list(self.group.exponents),
            "p": self.group.p,
            "law": self.lawspec.as_dict(),
            "profile": self.profile.as_dict(),
            "degrees": list(self.degrees),
            "relations": [W.tolist() for W in self.relations],
        }


_PRESENTATION_CACHE: dict = {}


def cohomology_ring(group: AbelianPGroup, lawspec: LawSpec,
                    profile: PrecisionProfile) -> QuotientRingPresentation:
    key = (group.p, group.exponents, lawspec.key(), _profile_key(profile))
    got = _PRESENTATION_CACHE.get(key)
    if got is None:
        got = QuotientRingPresentation(group, lawspec, profile)
        _PRESENTATION_CACHE[key] = got
    return got


# -- transfer ideals and their quotients ---------------------------------------------


def transfer_ideal_generators(pres: QuotientRingPresentation):
    """One ideal generator per maximal subgroup: <p> at the Chern class of
    the least order-p character cutting out that subgroup."""
    chis = maximal_subgroup_characters(pres.group)
    rows = pres.angle_rows()
    gens = []
    for chi in chis:
        w = pres.chern(chi)
        gens.append(pres.evaluate_rows(rows, w))
    return chis, gens


class TransferQuotient:
    """R = E^0(BA)/I with its diagonalized presentation at one profile.

    exponents[i] is the divisor exponent of row i after the change of
    basis L; rows with exponent >= a survive as a free summand (the level
    ring), rows with 0 < e < a generate the p-power-torsion ideal T.
    """

    def __init__(self, pres: QuotientRingPresentation):
        self.pres = pres
        self.chis, self.generators = transfer_ideal_generators(pres)
        n = pres.flat_dim
        if self.generators:
            self.matrix = np.hstack([pres.mult_matrix(g)
                                     for g in self.generators])
            exps, L, R = torsion.smith_diagonalize(
                self.matrix, pres.profile.p, pres.profile.a, transforms=True)
            exps = list(exps) + [pres.profile.a] * (n - len(exps))
        else:
            self.matrix = np.zeros((n, 0), dtype=np.int64)
            exps = [pres.profile.a] * n
            L = np.eye(n, dtype=np.int64)
        self.exponents = exps
        self.L = L

    @property
    def divisors(self):
        return sorted(self.exponents)

    @property
    def free_rank(self) -> int:
        a = self.pres.profile.a
        return sum(1 for e in self.exponents if e >= a)

    @property
    def torsion_exponent(self) -> int:
        a = self.pres.profile.a
        sub = [e for e in self.exponents if 0 < e < a]
        return max(sub) if sub else 0

    def canonical_payload(self):
        out = self.pres.canonical_payload()
        out["transfer_generators"] = [g.tolist() for g in self.generators]
        out["transfer_characters"] = [list(c.values) for c in self.chis]
        out["divisors"] = self.divisors
        return out


_TRANSFER_CACHE: dict = {}


def transfer_quotient(group: AbelianPGroup, lawspec: LawSpec,
                      profile: PrecisionProfile) -> TransferQuotient:
    key = (group.p, group.exponents, lawspec.key(), _profile_key(profile))
    got = _TRANSFER_CACHE.get(key)
    if got is None:
        got = TransferQuotient(cohomology_ring(group, lawspec, profile))
        _TRANSFER_CACHE[key] = got
    return got


def transfer_quotient_report(group: AbelianPGroup, lawspec: LawSpec,
                             profile: PrecisionProfile,
                             escalated: PrecisionProfile):
    """TransferQuotient at the base profile plus a stability report."""
    tq = transfer_quotient(group, lawspec, profile)
    tq_esc = transfer_quotient(group, lawspec, escalated)
    report = torsion.exponent_report(tq.divisors, tq_esc.divisors,
                                     profile, escalated)
    return tq, report


# -- level rings -----------------------------------------------------------------


class LevelRing:
    """The free part of a transfer quotient, with section and retraction.

    project maps flat ambient coordinates onto level coordinates; lift is a
    section landing back in the ambient presentation.  Multiplication is
    lift, multiply, project.  The quotient is an honest ring quotient only
    after dropping the coefficient precision by the torsion exponent e: the
    kernel of project mod p^(a-e) equals the ideal T + p^(a-e) R, so the
    result is the level ring with coefficients in Z/p^(a-e).
    """

    def __init__(self, tq: TransferQuotient):
        pres = tq.pres
        self.pres = pres
        self.tq = tq
        p, a = pres.profile.p, pres.profile.a
        # The diagonalized torsion rows span the torsion submodule, but a
        # torsion class is only pinned down modulo p^(a-e) multiples of the
        # free directions, so the span need not be an ideal at precision a.
        # The set it does pin down exactly is T + p^(a-e) R, which is an
        # ideal, and quotienting by it is reduction to precision a - e.
        self.a = a - tq.torsion_exponent
        if self.a < 2:
            raise CohomologyError(
                "torsion exponent %d leaves no working precision below a=%d"
                % (tq.torsion_exponent, a))
        self.M = p ** self.a
        exps = np.array(tq.exponents, dtype=np.int64)
        free = np.nonzero(exps >= a)[0]
        self.rank = int(free.size)
        self.project = tq.L[free] % self.M
        Linv = torsion.invert_unimodular(tq.L, p, a)
        self.lift = Linv[:, free] % pres.base.M
        check = self.project @ self.lift % self.M
        if not np.array_equal(check, np.eye(self.rank, dtype=np.int64)):
            raise CohomologyError("level projection lost its section")

    def project_element(self, el):
        return (self.project @ el.reshape(-1)) % self.M

    def lift_element(self, vec):
        out = (self.lift @ np.asarray(vec, dtype=np.int64)) % self.pres.base.M
        return out.reshape(self.pres.N, self.pres.base.K)

    def one(self):
        return self.project_element(self.pres.one())

    def mul(self, v, w):
        prod = self.pres.mul(self.lift_element(v), self.lift_element(w))
        return self.project_element(prod)

    def scale(self, v, c):
        scaled = self.pres.vec_scale(self.lift_element(v), c)
        return self.project_element(scaled)

    def mult_matrix(self, v):
        inner = self.pres.mult_matrix(self.lift_element(v))
        return (self.project @ inner % self.pres.base.M) @ self.lift % self.M


_LEVEL_CACHE: dict = {}


def level_ring(group: AbelianPGroup, lawspec: LawSpec,
               profile: PrecisionProfile) -> LevelRing:
    key = (group.p, group.exponents, lawspec.key(), _profile_key(profile))
    got = _LEVEL_CACHE.get(key)
    if got is None:
        got = LevelRing(transfer_quotient(group, lawspec, profile))
        _LEVEL_CACHE[key] = got
    return got


# -- restriction maps ---------------------------------------------------------------


def restriction_tensor(pres: QuotientRingPresentation, sub: Subgroup,
                       pres_sub: QuotientRingPresentation):
    """(N_H, N_A, K) tensor of the ring map E^0(BA) -> E^0(BH).

    Coordinates go to Chern classes of the restricted coordinate
    characters; monomials follow multiplicatively via one shift ladder.
    """
    group = pres.group
    images = []
    for i in range(group.rank):
        values = [0] * group.rank
        values[i] = 1
        chi = Character(group, values)
        images.append(pres_sub.chern(chi.restrict(sub)))
    mats = [pres_sub.mult_matrix(img) for img in images]
    K = pres_sub.base.K
    cols = np.zeros((pres.N, pres_sub.N, K), dtype=np.int64)
    cols[0] = pres_sub.one()
    flat = cols.reshape(pres.N, -1)
    for idx in range(1, pres.N):
        var, prev = pres._ladder[idx]
        flat[idx] = (mats[var] @ flat[prev]) % pres_sub.base.M
    return cols.transpose(1, 0, 2)


def restriction_matrix(pres, sub, pres_sub):
    return torsion.flatten_module_map(
        restriction_tensor(pres, sub, pres_sub), pres.profile)


# -- decomposition maps ---------------------------------------------------------------


def level_decomposition(group: AbelianPGroup, lawspec: LawSpec,
                        profile: PrecisionProfile):
    """Stacked map from E^0(BA) to the product of all level rings.

    Returns (matrix, payload): one row block per subgroup in deterministic
    order, each the level projection composed with restriction.
    """
    pres = cohomology_ring(group, lawspec, profile)
    blocks = []
    payload = {"source": pres.canonical_payload(), "blocks": []}
    precision = profile.a
    for sub in group.subgroups():
        H = sub.as_group()
        lv = level_ring(H, lawspec, profile)
        res = restriction_matrix(pres, sub, lv.pres)
        blocks.append((lv.project @ res) % lv.M)
        precision = min(precision, lv.a)
        payload["blocks"].append({
            "subgroup": [list(g) for g in sub.generators],
            "exponents": list(sub.exponents),
            "level_rank": lv.rank,
            "level_precision": lv.a,
        })
    # summands live at different honest precisions; the stacked map is only
    # meaningful at the coarsest of them
    matrix = np.vstack([b % profile.p ** precision for b in blocks])
    payload["shape"] = list(matrix.shape)
    payload["precision"] = precision
    return matrix, payload


def level_decomposition_divisors(group, lawspec, profile):
    matrix, payload = level_decomposition(group, lawspec, profile)
    if max(matrix.shape) > torsion.DIMENSION_CAP:
        raise CohomologyError("flattened decomposition exceeds the size cap")
    divisors = torsion.cokernel_divisors(matrix, profile.p,
                                         payload["precision"])
    return list(divisors), payload


def cyclic_decomposition_divisors(k: int, lawspec: LawSpec,
                                  profile: PrecisionProfile):
    """Cokernel divisors of E^0(B Z/p^k) -> prod_j E^0[x]/<p^j>-relation.

    Row blocks are ordered with the top level first; reduction of x^i by
    the top-level relation is the identity in degrees below its degree, so
    the leading square block is literally the identity and the cokernel
    splits off zero divisors, leaving a Schur complement of the size of
    the lower levels only.
    """
    p = profile.p
    base = BaseRing(profile)
    h = lawspec.formal_height
    N = p ** (k * h)
    margin = (_ideal_depth(lawspec, profile) + PREP_MARGIN) * N
    ring_profile = profile.with_bounds(
        degree_bound=max(profile.degree_bound, margin))
    angles = [angle_weierstrass(lawspec, ring_profile, j, base)
              for j in range(k + 1)]
    if max(N * base.K, 1) > torsion.DIMENSION_CAP:
        raise CohomologyError("flattened decomposition exceeds the size cap")
    M = base.M

    def reduction_rows(W):
        # coordinates of x^i mod W for all i < N, walked one shift at a time
        q = W.shape[0] - 1
        top_block = base.block_stack((-W[:q]) % M)  # (q, K, K)
        out = np.zeros((N, q, base.K), dtype=np.int64)
        cur = np.zeros((q, base.K), dtype=np.int64)
        cur[0, 0] = 1
        out[0] = cur
        for i in range(1, N):
            nxt = np.zeros_like(cur)
            nxt[1:] = cur[:q - 1]
            top = cur[q - 1]
            if top.any():
                nxt = (nxt + np.einsum("jkl,l->jk", top_block, top)) % M
            cur = nxt
            out[i] = cur
        return out

    flats = []
    for j in range(k, -1, -1):
        tensor = reduction_rows(angles[j]).transpose(1, 0, 2)
        flats.append(torsion.flatten_module_map(tensor, profile))
    top_flat = flats[0]
    r = top_flat.shape[0]
    if not np.array_equal(top_flat[:, :r],
                          np.eye(r, dtype=np.int64)):
        raise CohomologyError("top level block is not the identity")
    T = top_flat[:, r:]
    lower = np.vstack(flats[1:]) if len(flats) > 1 else np.zeros(
        (0, top_flat.shape[1]), dtype=np.int64)
    Lb = lower[:, :r]
    H = lower[:, r:]
    core = (H - _exact_matmul(Lb, T, M)) % M
    divisors = [0] * r + list(torsion.cokernel_divisors(core, p, profile.a))
    payload = {
        "p": p,
        "k": k,
        "law": lawspec.as_dict(),
        "profile": profile.as_dict(),
        "levels": [W.tolist() for W in angles],
    }
    return divisors, payload


# -- Drinfeld-style presentations ------------------------------------------------


def _characters_up_to_order(group: AbelianPGroup, bound_exp: int):
    """All characters of order dividing p^{bound_exp}, lexicographically."""
    p = group.p
    chis = []
    ranges = []
    for m in group.exponents:
        step = p ** max(0, m - bound_exp)
        ranges.append(range(0, p ** m, step))
    for values in iter_product(*ranges):
        chis.append(Character(group, list(values)))
    return chis


def drinfeld_presentation(group: AbelianPGroup, lawspec: LawSpec,
                          profile: PrecisionProfile):
    """Present the level ring of A = A' x Z/p^m over the level ring of A'.

    The [p^m]-preparation over the base is divided, inside the level ring
    of A', by (z - w) for the Chern class w of every character of A' of
    order dividing p^m; every remainder must vanish.  The monic quotient g
    presents level(A) as a free module of rank deg(g) over level(A'), which
    is checked on ranks and on g annihilating the last coordinate.
    """
    if group.rank < 1:
        raise CohomologyError("need at least one cyclic factor")
    m_last = group.exponents[-1]
    sub_exponents = group.exponents[:-1]
    prime = group.p
    group_prev = AbelianPGroup(prime, sub_exponents)
    lv_prev = level_ring(group_prev, lawspec, profile)
    lv_full = level_ring(group, lawspec, profile)
    pres_prev = lv_prev.pres
    pres_full = lv_full.pres

    chis = _characters_up_to_order(group_prev, m_last)
    weights = [lv_prev.project_element(pres_prev.chern(chi)) for chi in chis]

    ring_profile = pres_full.ring_profile
    W = pk_weierstrass(lawspec, ring_profile, m_last, pres_full.base)
    P = W.shape[0] - 1
    one_prev = lv_prev.one()
    coeffs = [lv_prev.scale(one_prev, W[d]) for d in range(P + 1)]

    remainders_zero = True
    for w in weights:
        wmat = lv_prev.mult_matrix(w)
        deg = len(coeffs) - 1
        quot = [None] * deg
        carry = coeffs[deg]
        for i in range(deg - 1, -1, -1):
            quot[i] = carry
            carry = (coeffs[i] + wmat @ carry) % lv_prev.M
        if carry.any():
            remainders_zero = False
            break
        coeffs = quot

    out = {
        "p": prime,
        "group": list(group.exponents),
        "law": lawspec.as_dict(),
        "profile": profile.as_dict(),
        "characters": [list(c.values) for c in chis],
        "division_exact": bool(remainders_zero),
    }
    if not remainders_zero:
        out.update({"status": "falsified",
                    "detail": "a linear divisor left a nonzero remainder"})
        return out

    degree = len(coeffs) - 1
    rank_product = lv_prev.rank * degree
    rank_agreement = rank_product == lv_full.rank

    # g must annihilate the image of the last coordinate in level(A)
    embed = _embedding_indices(pres_prev, pres_full)
    x_last = pres_full.coordinate(group.rank - 1)
    x_mat = pres_full.mult_matrix(x_last)
    acc = np.zeros(pres_full.flat_dim, dtype=np.int64)
    for d in range(degree, -1, -1):
        acc = (x_mat @ acc) % pres_full.base.M
        coeff_el = _embed_element(
            lv_prev.lift_element(coeffs[d]), embed, pres_full)
        acc = (acc + coeff_el.reshape(-1)) % pres_full.base.M
    # the lift of a level(A') coefficient is defined mod p^(lv_prev.a), so
    # the residual is only meaningful at the coarser of the two precisions
    check_mod = prime ** min(lv_prev.a, lv_full.a)
    residual = lv_full.project_element(
        acc.reshape(pres_full.N, pres_full.base.K)) % check_mod
    annihilated = not residual.any()

    out.update({
        "status": "ok",
        "degree": degree,
        "rank_level_prev": lv_prev.rank,
        "rank_level_full": lv_full.rank,
        "rank_product": rank_product,
        "rank_agreement": bool(rank_agreement),
        "annihilator_zero": bool(annihilated),
        "level_precision": [lv_prev.a, lv_full.a],
        "g": [np.asarray(c).tolist() for c in coeffs],
    })
    return out


def _embedding_indices(pres_prev, pres_full):
    """Basis-index map for x_i -> x_i along the first coordinates."""
    idx = np.zeros(pres_prev.N, dtype=np.int64)
    for alpha in range(pres_prev.N):
        target = 0
        for i in range(pres_prev.group.rank):
            digit = (alpha // pres_prev.strides[i]) % pres_prev.degrees[i]
            target += digit * pres_full.strides[i]
        idx[alpha] = target
    return idx


def _embed_element(el, indices, pres_full):
    out = pres_full.zero()
    out[indices] = el % pres_full.base.M
    return out


# -- the symmetric-group column -------------------------------------------------------


def sigma_p_model(lawspec: LawSpec, profile: PrecisionProfile):
    """Invariant model for the degree-p symmetric group column.

    Builds the averaging idempotent over the unit scalings of E^0(BZ/p),
    cuts out its image S with an explicit section, and presents the
    cokernel of S -> E^0 x S/(averaged <p>-class) for divisor analysis.
    """
    p = profile.p
    group = AbelianPGroup(p, (1,))
    pres = cohomology_ring(group, lawspec, profile)
    M = pres.base.M
    n = pres.flat_dim
    acc = np.zeros((n, n), dtype=np.int64)
    for j in range(1, p):
        rows = series_rows(pres.law.m_series(j), pres.base,
                           pres.ring_profile.degree_bound)
        e_j = pres.reduce_univariate_rows(rows, 0)
        mat = pres.mult_matrix(e_j)
        cols = np.zeros((pres.N, n), dtype=np.int64)
        cols[0] = pres.one().reshape(-1)
        for alpha in range(1, pres.N):
            cols[alpha] = (mat @ cols[alpha - 1]) % M
        tensor = cols.reshape(pres.N, pres.N, pres.base.K).transpose(1, 0, 2)
        acc = (acc + torsion.flatten_module_map(tensor, profile)) % M
    inv = pow(p - 1, -1, M)
    pi = acc * inv % M
    if np.any((pi @ pi - pi) % M):
        raise CohomologyError("averaging operator is not idempotent")
    exps, L, R = torsion.smith_diagonalize(pi, p, profile.a, transforms=True)
    exps = list(exps) + [profile.a] * (n - len(exps))
    a = profile.a
    if any(0 < e < a for e in exps):
        raise CohomologyError("idempotent image is not a free summand")
    r = sum(1 for e in exps if e == 0)
    if sorted(exps[:r]) != [0] * r:
        raise CohomologyError("unit divisors are not leading")
    section = (pi @ R[:, :r]) % M
    retract = L[:r] % M
    if not np.array_equal(retract @ section % M, np.eye(r, dtype=np.int64)):
        raise CohomologyError("section/retraction pair failed")

    angle_el = pres.reduce_univariate_rows(pres.angle_rows(), 0)
    g_flat = (pi @ angle_el.reshape(-1)) % M
    g_el = (section @ (retract @ g_flat % M)) % M
    if np.any((g_el - g_flat) % M):
        raise CohomologyError("averaged class escaped the invariant image")
    m_g = (retract @ pres.mult_matrix(g_flat.reshape(pres.N, pres.base.K))
           % M) @ section % M

    K = pres.base.K
    aug = section[:K, :]
    top = np.hstack([aug, np.zeros((K, r), dtype=np.int64)])
    bottom = np.hstack([np.eye(r, dtype=np.int64), m_g])
    matrix = np.vstack([top, bottom]) % M
    divisors = list(torsion.cokernel_divisors(matrix, p, profile.a))
    payload = {
        "p": p,
        "law": lawspec.as_dict(),
        "profile": profile.as_dict(),
        "invariant_rank": r,
        "matrix_shape": list(matrix.shape),
    }
    return divisors, payload


# -- divisibility witnesses ------------------------------------------------------------


def divisibility_witness(tq: TransferQuotient, chi: Character):
    """Solve chern(chi) * w = p in the transfer quotient and verify it."""
    if chi.is_zero:
        raise CohomologyError("the zero character admits no witness")
    pres = tq.pres
    M = pres.base.M
    phi = pres.chern(chi)
    m_phi = pres.mult_matrix(phi)
    system = np.hstack([m_phi, tq.matrix]) if tq.matrix.size else m_phi
    rhs = (pres.one() * pres.profile.p % M).reshape(-1)
    sol = torsion.solve_linear(system, rhs, pres.profile.p, pres.profile.a)
    if sol is None:
        return {"status": "falsified",
                "character": list(chi.values),
                "detail": "p is not in the ideal generated by the class"}
    w = sol[:pres.flat_dim].reshape(pres.N, pres.base.K) % M
    residual = (system @ sol - rhs) % M
    if residual.any():
        raise CohomologyError("solver returned a non-solution")
    return {"status": "witnessed",
            "character": list(chi.values),
            "witness": w.tolist()}
