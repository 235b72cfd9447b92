"""Linear algebra over the chain ring Z/p^a.

The coefficient rings used elsewhere in this package are free Z/p^a-modules
on a finite list of deformation monomials.  Module maps between them flatten
to integer matrices over Z/p^a, and every torsion question we ask reduces to
a Smith-style diagonalization of such a matrix by unimodular row and column
operations.  Z/p^a is a chain ring, so the diagonal entries are powers of p
and the exponent multiset is a complete invariant of the map up to unit
equivalence.

Precision is finite in two directions (p-adic accuracy a, deformation degree
bound), so a single computation can be polluted by truncation artifacts.  The
stability protocol implemented here recomputes every divisor profile at a
strictly larger profile and only trusts the part of the answer that both
computations agree on.  Divisors of exponent >= a are reported as free at
precision and never folded into a torsion exponent.
"""

from collections import Counter

import numpy as np

from .precision import PrecisionProfile, u_pair_table


class TorsionError(ValueError):
    """Raised for precondition failures and dimension-cap refusals."""


def _chain_modulus_guard(p: int, a: int):
    # Row operations multiply two residues before reducing, keep that in int64.
    if 2 * a * p.bit_length() > 62:
        raise TorsionError(
            "modulus p^a too wide for int64 elimination (p=%d, a=%d)" % (p, a)
        )


def p_valuation(value: int, p: int, a: int) -> int:
    """Valuation of a residue mod p^a, with a standing in for infinity."""
    value %= p ** a
    if value == 0:
        return a
    v = 0
    while value % p == 0:
        value //= p
        v += 1
    return v


def _valuation_table(block, p, a):
    """Vectorized entrywise p-valuation, a for zero entries."""
    v = np.zeros(block.shape, dtype=np.int64)
    rem = block.copy()
    zero = rem == 0
    v[zero] = a
    live = ~zero
    while live.any():
        div = live & (rem % p == 0)
        if not div.any():
            break
        v[div] += 1
        rem[div] //= p
        live = div
    return v


def smith_diagonalize(mat, p: int, a: int, transforms: bool = False):
    """Diagonalize a matrix over Z/p^a by unimodular row/column operations.

    Returns (exponents, L, R) where exponents is the non-decreasing list of
    diagonal p-valuations (capped at a) and, when transforms is requested,
    L @ mat @ R == diag(p^e) mod p^a with L, R unimodular.  Pivots are chosen
    with minimal p-valuation, ties broken in row-major order, which makes the
    reduction deterministic.
    """
    _chain_modulus_guard(p, a)
    M = p ** a
    A = np.asarray(mat, dtype=np.int64) % M
    if A.ndim != 2:
        raise TorsionError("expected a 2-dimensional matrix")
    n, m = A.shape
    L = np.eye(n, dtype=np.int64) if transforms else None
    R = np.eye(m, dtype=np.int64) if transforms else None
    exponents = []
    for t in range(min(n, m)):
        block = A[t:, t:]
        units = block % p != 0
        if units.any():
            flat = int(np.argmax(units))
            v = 0
        else:
            vals = _valuation_table(block, p, a)
            flat = int(np.argmin(vals))
            v = int(vals.flat[flat])
        bi, bj = divmod(flat, m - t)
        pi, pj = t + bi, t + bj
        if v >= a:
            # Everything left is zero at this precision.
            exponents.extend([a] * (min(n, m) - t))
            break
        if pi != t:
            A[[t, pi]] = A[[pi, t]]
            if transforms:
                L[[t, pi]] = L[[pi, t]]
        if pj != t:
            A[:, [t, pj]] = A[:, [pj, t]]
            if transforms:
                R[:, [t, pj]] = R[:, [pj, t]]
        unit = int(A[t, t]) // p ** v
        inv = pow(unit, -1, M)
        A[t, t:] = A[t, t:] * inv % M
        if transforms:
            L[t] = L[t] * inv % M
        pivot = p ** v
        # Column below the pivot, then the pivot row; minimality of v makes
        # every quotient an exact integer division of representatives.
        q = A[t + 1:, t] // pivot
        if q.size and q.any():
            A[t + 1:, t:] = (A[t + 1:, t:] - q[:, None] * A[t, t:]) % M
            if transforms:
                L[t + 1:] = (L[t + 1:] - q[:, None] * L[t]) % M
        qr = A[t, t + 1:] // pivot
        if qr.size and qr.any():
            A[t, t + 1:] = (A[t, t + 1:] - qr * pivot) % M
            if transforms:
                R[:, t + 1:] = (R[:, t + 1:] - R[:, [t]] * qr[None, :]) % M
        exponents.append(v)
    return exponents, L, R


def elementary_divisors(mat, p: int, a: int):
    """Sorted multiset of column divisor exponents, one per source generator.

    Diagonal exponents are capped at a; columns beyond the row count (which
    can never carry a pivot) count as exponent a.
    """
    A = np.asarray(mat, dtype=np.int64)
    exps, _, _ = smith_diagonalize(A, p, a)
    extra = A.shape[1] - min(A.shape)
    return sorted(exps + [a] * extra)


def cokernel_divisors(mat, p: int, a: int):
    """Divisor exponents of coker(mat) as a Z/p^a-module, one per target row.

    Rows not covered by a pivot contribute free summands, reported as a.
    """
    A = np.asarray(mat, dtype=np.int64)
    exps, _, _ = smith_diagonalize(A, p, a)
    extra = A.shape[0] - min(A.shape)
    return sorted(exps + [a] * extra)


def invert_unimodular(mat, p: int, a: int) -> np.ndarray:
    """Inverse of a unimodular matrix over Z/p^a.

    Gauss-Jordan elimination; a missing unit pivot means the matrix was not
    unimodular and raises.
    """
    _chain_modulus_guard(p, a)
    M = p ** a
    A = np.asarray(mat, dtype=np.int64) % M
    n, m = A.shape
    if n != m:
        raise TorsionError("only square matrices can be unimodular")
    A = A.copy()
    out = np.eye(n, dtype=np.int64)
    for t in range(n):
        units = np.nonzero(A[t:, t] % p)[0]
        if units.size == 0:
            raise TorsionError("matrix is not unimodular")
        piv = t + int(units[0])
        if piv != t:
            A[[t, piv]] = A[[piv, t]]
            out[[t, piv]] = out[[piv, t]]
        inv = pow(int(A[t, t]), -1, M)
        A[t] = A[t] * inv % M
        out[t] = out[t] * inv % M
        q = A[:, t].copy()
        q[t] = 0
        if q.any():
            A -= q[:, None] * A[t][None, :]
            A %= M
            out -= q[:, None] * out[t][None, :]
            out %= M
    return out


def schur_complement_unit_block(mat, r: int, p: int, a: int) -> np.ndarray:
    """Split off a leading identity block and return the Schur complement.

    For a matrix [[I_r, T], [L, H]] the cokernel is unchanged (up to a free
    unit summand with divisor exponent 0) by replacing the matrix with
    H - L @ T.  The leading r x r block must literally be the identity;
    this is the cheap structural reduction for maps that restrict to the
    identity on an initial segment of the bases.
    """
    _chain_modulus_guard(p, a)
    M = p ** a
    A = np.asarray(mat, dtype=np.int64) % M
    n, m = A.shape
    if r > min(n, m):
        raise TorsionError("identity block exceeds the matrix")
    eye = np.eye(r, dtype=np.int64)
    if (A[:r, :r] != eye).any():
        raise TorsionError("leading block is not the identity")
    if A[:r, r:].size == 0 or A[r:, :r].size == 0:
        return A[r:, r:]
    out = A[r:, r:].copy()
    # Chunk the inner dimension so accumulated products stay inside int64.
    room = 62 - 2 * a * p.bit_length()
    step = max(1, min(r, 1 << max(room, 0)))
    for lo in range(0, r, step):
        hi = min(lo + step, r)
        out = (out - A[r:, lo:hi] @ A[lo:hi, r:]) % M
    return out


def solve_linear(mat, rhs, p: int, a: int):
    """One solution of mat @ x == rhs over Z/p^a, or None if there is none."""
    M = p ** a
    A = np.asarray(mat, dtype=np.int64) % M
    b = np.asarray(rhs, dtype=np.int64) % M
    n, m = A.shape
    exps, L, R = smith_diagonalize(A, p, a, transforms=True)
    c = L @ b % M
    w = np.zeros(m, dtype=np.int64)
    for i in range(n):
        ci = int(c[i])
        v = exps[i] if i < len(exps) else a
        if v >= a:
            if ci % M:
                return None
            continue
        if ci % p ** v:
            return None
        w[i] = ci // p ** v
    x = R @ w % M
    if ((A @ x - b) % M).any():
        return None
    return x


# ---------------------------------------------------------------------------
# Flattening module maps over the deformation ring down to Z/p^a.

def u_multiplication_block(coeffs, profile: PrecisionProfile):
    """K x K matrix of multiplication by a ring element on the monomial basis.

    coeffs is the length-K coefficient vector of the element over the
    deformation monomials; column gamma holds the coefficients of
    element * u^gamma with monomials above the degree bound truncated away.
    """
    K = profile.u_monomial_count
    table = u_pair_table(profile.deformation_vars, profile.u_degree_bound)
    M = profile.modulus
    block = np.zeros((K, K), dtype=np.int64)
    for alpha in range(K):
        c = int(coeffs[alpha]) % M
        if not c:
            continue
        row = table[alpha]
        for gamma in range(K):
            delta = row[gamma]
            if delta >= 0:
                block[delta, gamma] = (block[delta, gamma] + c) % M
    return block


def flatten_module_map(tensor, profile: PrecisionProfile):
    """Flatten an (n, m, K) tensor of ring entries to an (nK, mK) matrix.

    Entry (i, j) acts on the length-K coefficient vector of a basis element,
    so the flat matrix is the block matrix of u_multiplication_block values.
    """
    tensor = np.asarray(tensor, dtype=np.int64)
    n, m, K = tensor.shape
    if K != profile.u_monomial_count:
        raise TorsionError("entry width %d does not match the profile" % K)
    table = u_pair_table(profile.deformation_vars, profile.u_degree_bound)
    M = profile.modulus
    blocks = np.zeros((n, K, m, K), dtype=np.int64)
    for alpha in range(K):
        row = table[alpha]
        for gamma in range(K):
            delta = row[gamma]
            if delta >= 0:
                blocks[:, delta, :, gamma] += tensor[:, :, alpha]
    return blocks.reshape(n * K, m * K) % M


# ---------------------------------------------------------------------------
# Exponent reports and the stability protocol.

class ExponentReport:
    """Divisor profile of a cokernel together with its stability evidence.

    divisors   sorted exponents at the base profile, capped at its a
    exponent   largest sub-a exponent agreeing at both profiles, 0 if none
    free_rank  count of base divisors at or above a (free at precision)
    stable     whether the sub-a divisor multisets match exactly
    profiles   the two (profile, divisors) pairs backing the report
    """

    __slots__ = ("divisors", "exponent", "free_rank", "stable", "profiles")

    def __init__(self, divisors, exponent, free_rank, stable, profiles):
        self.divisors = divisors
        self.exponent = exponent
        self.free_rank = free_rank
        self.stable = stable
        self.profiles = profiles

    def as_dict(self):
        return {
            "divisors": list(self.divisors),
            "exponent": self.exponent,
            "free_rank": self.free_rank,
            "stable": self.stable,
            "profiles": [dict(entry) for entry in self.profiles],
        }

    def __repr__(self):
        return "ExponentReport(exponent=%d, stable=%s, divisors=%r)" % (
            self.exponent, self.stable, self.divisors)


def exponent_report(base_divisors, esc_divisors,
                    base_profile: PrecisionProfile,
                    esc_profile: PrecisionProfile) -> ExponentReport:
    """Merge two divisor computations into a stability-checked report."""
    a = base_profile.a
    base_sub = sorted(d for d in base_divisors if d < a)
    esc_sub = sorted(d for d in esc_divisors if d < a)
    stable = base_sub == esc_sub
    common = Counter(base_sub) & Counter(esc_sub)
    exponent = max(common.elements(), default=0)
    free_rank = sum(1 for d in base_divisors if d >= a)
    profiles = [
        {"profile": base_profile.as_dict(), "divisors": sorted(base_divisors)},
        {"profile": esc_profile.as_dict(), "divisors": sorted(esc_divisors)},
    ]
    return ExponentReport(sorted(base_divisors), exponent, free_rank,
                          stable, profiles)


DIMENSION_CAP = 8192


def _check_escalation(base: PrecisionProfile, esc: PrecisionProfile):
    if not (esc.a > base.a and esc.u_degree_bound > base.u_degree_bound):
        raise TorsionError(
            "escalated profile must strictly increase a and the u bound")


def cokernel_exponent(matrix_at, profile: PrecisionProfile,
                      escalated: PrecisionProfile = None,
                      cap: int = DIMENSION_CAP) -> ExponentReport:
    """Stability-checked torsion exponent of coker(f).

    matrix_at is a callable producing the flat Z/p^a matrix of f at a given
    profile (flattening is profile-dependent).  The divisor profile is
    computed at the base and at a strictly larger escalated profile; only
    the agreeing sub-a part contributes to the reported exponent.
    """
    if escalated is None:
        escalated = profile.escalated()
    _check_escalation(profile, escalated)
    divisors = []
    for prof in (profile, escalated):
        A = np.asarray(matrix_at(prof), dtype=np.int64)
        if max(A.shape) > cap:
            raise TorsionError(
                "matrix dimension %d exceeds cap %d, refusing the elimination"
                % (max(A.shape), cap))
        divisors.append(cokernel_divisors(A, prof.p, prof.a))
    return exponent_report(divisors[0], divisors[1], profile, escalated)


def diagonal_exponent_check(matrix_at, profile: PrecisionProfile,
                            escalated: PrecisionProfile = None,
                            cap: int = DIMENSION_CAP) -> bool:
    """Check e(coker f) == e(coker (f followed by the diagonal into M x M)).

    f must be injective at working precision: at least as many rows as
    columns, with every column carrying a divisor below a.
    """
    A = np.asarray(matrix_at(profile), dtype=np.int64)
    n, m = A.shape
    if n < m:
        raise TorsionError("wide matrices are never injective")
    col_divs = elementary_divisors(A, profile.p, profile.a)
    if any(d >= profile.a for d in col_divs):
        raise TorsionError("map is not injective at working precision")

    def stacked(prof):
        B = np.asarray(matrix_at(prof), dtype=np.int64)
        return np.vstack([B, B])

    rep = cokernel_exponent(matrix_at, profile, escalated, cap)
    rep_diag = cokernel_exponent(stacked, profile, escalated, cap)
    return rep.exponent == rep_diag.exponent


def divisibility_pullback(mat, x, s_op, l: int, k: int, p: int, a: int):
    """Pull a target element back through f given two divisibility witnesses.

    Hypotheses (checked, precondition failures raise): p^l * x and s^k * x
    both lie in the image of f, where s_op is the matrix of multiplication
    by a base element s outside (p) acting on the target.  The conclusion
    under test is that x itself lies in the image; the returned dict carries
    status "witness" with a verified preimage, or status "refusal" when the
    linear solve finds none at this precision.  Interpreting a refusal
    (falsification versus truncation artifact) is the caller's job and
    should be based on profile stability.
    """
    M = p ** a
    A = np.asarray(mat, dtype=np.int64) % M
    xv = np.asarray(x, dtype=np.int64) % M
    S = np.asarray(s_op, dtype=np.int64) % M
    px = xv * pow(p, l, M) % M
    sx = xv.copy()
    for _ in range(k):
        sx = S @ sx % M
    pre_p = solve_linear(A, px, p, a)
    if pre_p is None:
        raise TorsionError("p^l x has no preimage, hypothesis fails")
    pre_s = solve_linear(A, sx, p, a)
    if pre_s is None:
        raise TorsionError("s^k x has no preimage, hypothesis fails")
    witness = solve_linear(A, xv, p, a)
    if witness is None:
        return {"status": "refusal", "witness": None,
                "hypothesis_preimages": [pre_p.tolist(), pre_s.tolist()]}
    if ((A @ witness - xv) % M).any():
        raise TorsionError("solver returned an invalid witness")
    return {"status": "witness", "witness": witness.tolist(),
            "hypothesis_preimages": [pre_p.tolist(), pre_s.tolist()]}


def random_unimodular(size: int, p: int, a: int, rng) -> np.ndarray:
    """Random unimodular matrix over Z/p^a built from elementary operations."""
    M = p ** a
    U = np.eye(size, dtype=np.int64)
    for _ in range(3 * size):
        i, j = rng.integers(0, size, size=2)
        if i == j:
            scale = int(rng.integers(1, M))
            while scale % p == 0:
                scale = int(rng.integers(1, M))
            U[i] = U[i] * scale % M
        else:
            U[i] = (U[i] + int(rng.integers(0, M)) * U[j]) % M
    return U
