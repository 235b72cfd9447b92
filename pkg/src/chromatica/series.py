"""Truncated multivariate power series over Z/p^a and over Q.

A TruncatedSeries stores a dict mapping exponent tuples to coefficients.
The exponent tuple concatenates the main-variable exponents (nvars of them)
with the deformation-variable exponents (profile.deformation_vars of them).
Terms beyond the profile's degree bounds are dropped at every operation, so
all identities asserted downstream are identities of truncated series.

Coefficients live either in Z/p^a (domain "mod", least nonnegative residues)
or in Q (domain "rat", fractions.Fraction).  The rational domain exists for
the p-typical constructions whose denominators are prime to p.

Univariate modular multiplication dispatches to a dense numpy convolution
path when coefficient sizes make int64 accumulation safe; the dict path is
the reference implementation and both are cross-checked in the test suite.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .precision import PrecisionProfile, u_pair_table

MOD = "mod"
RAT = "rat"

# int64 accumulation safety margin for the dense paths
_INT64_GATE = 2 ** 62
_DENSE_CELL_CAP = 2_000_000


class ProfileMismatchError(ValueError):
    """Arithmetic attempted between series with different profiles."""


class CompositionError(ValueError):
    """Substituted series violates a composition precondition."""


class ExactDivisionError(ArithmeticError):
    """Exact division failed; obstruction names the first bad exponent."""

    def __init__(self, message, obstruction=None):
        super().__init__(message)
        self.obstruction = obstruction


class NotAUnitError(ArithmeticError):
    """Inversion attempted on a series whose constant term is not a unit."""


class WeierstrassError(ArithmeticError):
    """Weierstrass preparation could not locate or certify a unit pivot."""


def _check_same(a: "TruncatedSeries", b: "TruncatedSeries"):
    if a.profile != b.profile:
        raise ProfileMismatchError(
            "profiles differ: %r vs %r" % (a.profile, b.profile)
        )
    if a.domain != b.domain:
        raise ProfileMismatchError("domains differ: %s vs %s" % (a.domain, b.domain))
    if a.nvars != b.nvars:
        raise ProfileMismatchError(
            "variable counts differ: %d vs %d" % (a.nvars, b.nvars)
        )


def p_valuation(c: int, p: int, a: int) -> int:
    """p-adic valuation of a residue mod p^a, with val(0) = a."""
    if c % (p ** a) == 0:
        return a
    v = 0
    while c % p == 0:
        c //= p
        v += 1
    return v


def _modinv(c: int, p: int, a: int) -> int:
    m = p ** a
    c %= m
    if c % p == 0:
        raise NotAUnitError("%d is not a unit mod %d^%d" % (c, p, a))
    return pow(c, -1, m)


class TruncatedSeries:
    """Immutable-by-convention truncated series; see module docstring."""

    __slots__ = ("profile", "domain", "nvars", "terms")

    def __init__(self, profile: PrecisionProfile, nvars: int, terms=None, domain=MOD):
        if nvars < 0:
            raise ValueError("nvars must be nonnegative")
        if domain not in (MOD, RAT):
            raise ValueError("unknown domain %r" % (domain,))
        self.profile = profile
        self.domain = domain
        self.nvars = int(nvars)
        self.terms = {}
        if terms:
            self._accumulate(terms)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, profile, nvars, domain=MOD):
        return cls(profile, nvars, None, domain)

    @classmethod
    def constant(cls, profile, nvars, value, domain=MOD):
        key = (0,) * (nvars + profile.deformation_vars)
        return cls(profile, nvars, {key: value}, domain)

    @classmethod
    def variable(cls, profile, nvars, index, domain=MOD):
        if not 0 <= index < nvars:
            raise ValueError("variable index %d out of range" % (index,))
        key = tuple(1 if i == index else 0 for i in range(nvars)) + (0,) * profile.deformation_vars
        return cls(profile, nvars, {key: 1}, domain)

    @classmethod
    def deformation_variable(cls, profile, nvars, index, domain=MOD):
        if not 0 <= index < profile.deformation_vars:
            raise ValueError("deformation index %d out of range" % (index,))
        if profile.u_degree_bound < 1:
            return cls.zero(profile, nvars, domain)
        key = (0,) * nvars + tuple(
            1 if i == index else 0 for i in range(profile.deformation_vars)
        )
        return cls(profile, nvars, {key: 1}, domain)

    def copy(self):
        out = TruncatedSeries(self.profile, self.nvars, None, self.domain)
        out.terms = dict(self.terms)
        return out

    # -- internal term plumbing ----------------------------------------------

    def _key_len(self):
        return self.nvars + self.profile.deformation_vars

    def _in_bounds(self, key) -> bool:
        nv = self.nvars
        return (
            sum(key[:nv]) <= self.profile.degree_bound
            and sum(key[nv:]) <= self.profile.u_degree_bound
        )

    def _reduce_coeff(self, c):
        if self.domain == MOD:
            return int(c) % self.profile.modulus
        if not isinstance(c, Fraction):
            c = Fraction(c)
        return c

    def _accumulate(self, items):
        """Add raw (key, coeff) pairs into self.terms with truncation."""
        klen = self._key_len()
        terms = self.terms
        if isinstance(items, dict):
            items = items.items()
        for key, c in items:
            key = tuple(int(e) for e in key)
            if len(key) != klen:
                raise ValueError(
                    "exponent tuple %r has length %d, expected %d" % (key, len(key), klen)
                )
            if any(e < 0 for e in key):
                raise ValueError("negative exponent in %r" % (key,))
            if not self._in_bounds(key):
                continue
            c = self._reduce_coeff(c)
            cur = terms.get(key)
            if cur is None:
                if c:
                    terms[key] = c
            else:
                cur = self._reduce_coeff(cur + c)
                if cur:
                    terms[key] = cur
                else:
                    del terms[key]

    # -- inspection ------------------------------------------------------------

    def coefficient(self, key):
        key = tuple(int(e) for e in key)
        if len(key) != self._key_len():
            raise ValueError("bad exponent tuple length")
        zero = 0 if self.domain == MOD else Fraction(0)
        return self.terms.get(key, zero)

    def constant_term(self):
        return self.coefficient((0,) * self._key_len())

    def has_constant_term(self) -> bool:
        return ((0,) * self._key_len()) in self.terms

    def is_zero(self) -> bool:
        return not self.terms

    def main_degree(self) -> int:
        """Largest total main-variable degree present, -1 for the zero series."""
        nv = self.nvars
        if not self.terms:
            return -1
        return max(sum(k[:nv]) for k in self.terms)

    def main_order(self) -> int:
        """Smallest total main-variable degree present, -1 for the zero series."""
        nv = self.nvars
        if not self.terms:
            return -1
        return min(sum(k[:nv]) for k in self.terms)

    # -- ring operations -------------------------------------------------------

    def __add__(self, other):
        _check_same(self, other)
        out = self.copy()
        out._accumulate(other.terms)
        return out

    def __sub__(self, other):
        _check_same(self, other)
        out = self.copy()
        if self.domain == MOD:
            m = self.profile.modulus
            out._accumulate((k, m - c) for k, c in other.terms.items())
        else:
            out._accumulate((k, -c) for k, c in other.terms.items())
        return out

    def __neg__(self):
        out = TruncatedSeries(self.profile, self.nvars, None, self.domain)
        if self.domain == MOD:
            m = self.profile.modulus
            out.terms = {k: (m - c) % m for k, c in self.terms.items()}
        else:
            out.terms = {k: -c for k, c in self.terms.items()}
        return out

    def scale(self, c):
        out = TruncatedSeries(self.profile, self.nvars, None, self.domain)
        if self.domain == MOD:
            c = int(c) % self.profile.modulus
            if c == 0:
                return out
            m = self.profile.modulus
            for k, v in self.terms.items():
                w = (v * c) % m
                if w:
                    out.terms[k] = w
        else:
            c = Fraction(c)
            if c == 0:
                return out
            out.terms = {k: v * c for k, v in self.terms.items()}
        return out

    def shifted_scale(self, c, shift_key):
        """self * c * monomial(shift_key), truncated."""
        out = TruncatedSeries(self.profile, self.nvars, None, self.domain)
        shift_key = tuple(int(e) for e in shift_key)
        if len(shift_key) != self._key_len():
            raise ValueError("bad shift tuple length")
        out._accumulate(
            (tuple(a + b for a, b in zip(k, shift_key)), v * c)
            for k, v in self.terms.items()
        )
        return out

    def __mul__(self, other):
        _check_same(self, other)
        if self.domain == MOD and self._dense_ok(other):
            return self._mul_dense(other)
        return self._mul_dict(other)

    def _mul_dict(self, other):
        a, b = self.terms, other.terms
        if len(a) > len(b):
            a, b = b, a
        out = TruncatedSeries(self.profile, self.nvars, None, self.domain)
        nv = self.nvars
        D = self.profile.degree_bound
        ub = self.profile.u_degree_bound
        terms = {}
        mod = self.profile.modulus if self.domain == MOD else None
        for ka, ca in a.items():
            da = sum(ka[:nv])
            ua = sum(ka[nv:])
            for kb, cb in b.items():
                if da + sum(kb[:nv]) > D:
                    continue
                if ua + sum(kb[nv:]) > ub:
                    continue
                key = tuple(x + y for x, y in zip(ka, kb))
                cur = terms.get(key)
                if cur is None:
                    terms[key] = ca * cb
                else:
                    terms[key] = cur + ca * cb
        if mod is None:
            out.terms = {k: v for k, v in terms.items() if v}
        else:
            out.terms = {k: v % mod for k, v in terms.items()}
            out.terms = {k: v for k, v in out.terms.items() if v}
        return out

    # -- dense modular path ----------------------------------------------------

    def _dense_ok(self, other) -> bool:
        prof = self.profile
        if self.nvars == 0 or self.nvars > 3:
            return False
        cells = (prof.degree_bound + 1) ** self.nvars * prof.u_monomial_count
        if cells > _DENSE_CELL_CAP:
            return False
        nnz = min(len(self.terms), len(other.terms))
        return (prof.modulus - 1) ** 2 * (nnz + 1) < _INT64_GATE

    def _to_dense(self):
        prof = self.profile
        nv = self.nvars
        K = prof.u_monomial_count
        shape = (prof.degree_bound + 1,) * nv + (K,)
        arr = np.zeros(shape, dtype=np.int64)
        uindex = {m: i for i, m in enumerate(prof.u_monomial_list())}
        for k, c in self.terms.items():
            arr[k[:nv] + (uindex[k[nv:]],)] = c
        return arr

    @classmethod
    def _from_dense(cls, profile, nvars, arr, mask_and_mod=True):
        out = cls(profile, nvars, None, MOD)
        if mask_and_mod:
            arr = np.mod(arr, profile.modulus)
            mask = _degree_mask(nvars, profile.degree_bound)
            if mask is not None:
                arr = arr * ~mask[..., None]
        mons = profile.u_monomial_list()
        idx = np.nonzero(arr)
        terms = out.terms
        for flat in zip(*idx):
            key = tuple(int(e) for e in flat[:nvars]) + mons[int(flat[nvars])]
            terms[key] = int(arr[flat])
        return out

    def _mul_dense(self, other):
        prof = self.profile
        nv = self.nvars
        sparse, dense = (self, other) if len(self.terms) <= len(other.terms) else (other, self)
        darr = dense._to_dense()
        D = prof.degree_bound
        K = prof.u_monomial_count
        uindex = {m: i for i, m in enumerate(prof.u_monomial_list())}
        pair = u_pair_table(prof.deformation_vars, prof.u_degree_bound)
        out = np.zeros(darr.shape, dtype=np.int64)
        shifted_cache = {}
        for k, c in sparse.terms.items():
            alpha = k[:nv]
            bi = uindex[k[nv:]]
            sh = shifted_cache.get(bi)
            if sh is None:
                if all(pair[bi][m] == m for m in range(K)):
                    sh = darr
                else:
                    sh = np.zeros(darr.shape, dtype=np.int64)
                    for m in range(K):
                        t = pair[bi][m]
                        if t >= 0:
                            sh[..., t] = darr[..., m]
                shifted_cache[bi] = sh
            dst = tuple(slice(a, D + 1) for a in alpha) + (slice(None),)
            src = tuple(slice(0, D + 1 - a) for a in alpha) + (slice(None),)
            out[dst] += c * sh[src]
        return TruncatedSeries._from_dense(prof, nv, out)

    # -- truncation and domain movement -----------------------------------------

    def truncate_to(self, profile: PrecisionProfile):
        """Reduce self into the (weakly smaller) target profile."""
        if not profile.truncates(self.profile):
            raise ProfileMismatchError(
                "target profile %r does not truncate %r" % (profile, self.profile)
            )
        out = TruncatedSeries(profile, self.nvars, None, self.domain)
        out._accumulate(self.terms)
        return out

    def to_modular(self, profile: PrecisionProfile):
        """Reduce a rational series with p-integral coefficients mod p^a."""
        if self.domain != RAT:
            raise ValueError("to_modular applies to rational-domain series")
        if (
            profile.p != self.profile.p
            or profile.deformation_vars != self.profile.deformation_vars
        ):
            raise ProfileMismatchError("incompatible target profile")
        m = profile.modulus
        out = TruncatedSeries(profile, self.nvars, None, MOD)
        items = []
        for k, c in self.terms.items():
            if c.denominator % profile.p == 0:
                raise ExactDivisionError(
                    "coefficient %s at %r is not p-integral" % (c, k), obstruction=k
                )
            items.append((k, c.numerator * pow(c.denominator, -1, m)))
        out._accumulate(items)
        return out

    # -- composition -------------------------------------------------------------

    def compose(self, assignments):
        """Substitute series for main variables.

        assignments: iterable of (index, TruncatedSeries).  Every substituted
        series must share the profile and domain, have a common variable
        count, and have zero constant term.  Unassigned variables are kept as
        themselves, which requires the target variable count to match.
        """
        amap = {}
        for idx, g in assignments:
            idx = int(idx)
            if not 0 <= idx < self.nvars:
                raise CompositionError("assignment to missing variable %d" % (idx,))
            if idx in amap:
                raise CompositionError("duplicate assignment to variable %d" % (idx,))
            amap[idx] = g
        if not amap:
            return self.copy()
        nvars_out = None
        for g in amap.values():
            if g.profile != self.profile or g.domain != self.domain:
                raise ProfileMismatchError("substituted series profile mismatch")
            if nvars_out is None:
                nvars_out = g.nvars
            elif g.nvars != nvars_out:
                raise CompositionError("substituted series disagree on variable count")
            if g.has_constant_term():
                raise CompositionError("substituted series has nonzero constant term")
        if len(amap) < self.nvars and nvars_out != self.nvars:
            raise CompositionError(
                "partial assignment requires matching variable counts"
            )

        prof = self.profile
        nu = prof.deformation_vars
        nv = self.nvars
        D = prof.degree_bound
        ub = prof.u_degree_bound
        mod = prof.modulus if self.domain == MOD else None

        # classify arguments: monomials substitute by exponent arithmetic,
        # everything else goes through cached power ladders
        mono = {}
        general = {}
        for i, g in amap.items():
            if len(g.terms) == 0:
                mono[i] = None
            elif len(g.terms) == 1:
                (gk, gc), = g.terms.items()
                mono[i] = (gk, gc)
            else:
                general[i] = g

        powers = {i: [None, g] for i, g in general.items()}

        def power(i, e):
            ladder = powers[i]
            while len(ladder) <= e:
                ladder.append(ladder[-1] * ladder[1])
            return ladder[e]

        product_cache = {}
        out = TruncatedSeries(prof, nvars_out, None, self.domain)
        acc = []
        for key, c in self.terms.items():
            shift = [0] * nvars_out
            ushift = list(key[nv:])
            scalar = c
            dead = False
            gexps = []
            for i in range(nv):
                e = key[i]
                if e == 0:
                    continue
                if i in general:
                    gexps.append((i, e))
                    continue
                if i in mono:
                    m = mono[i]
                    if m is None:
                        dead = True
                        break
                    gk, gc = m
                    if mod is None:
                        scalar = scalar * gc ** e
                    else:
                        scalar = (scalar * pow(int(gc), e, mod)) % mod
                    for j in range(nvars_out):
                        shift[j] += gk[j] * e
                    for j in range(nu):
                        ushift[j] += gk[nvars_out + j] * e
                else:
                    shift[i] += e
            if dead or (mod is not None and scalar == 0):
                continue
            if sum(shift) > D or sum(ushift) > ub:
                continue
            shift_key = tuple(shift) + tuple(ushift)
            if not gexps:
                acc.append((shift_key, scalar))
                continue
            gkey = tuple(gexps)
            prod = product_cache.get(gkey)
            if prod is None:
                prod = power(gexps[0][0], gexps[0][1])
                for i, e in gexps[1:]:
                    prod = prod * power(i, e)
                product_cache[gkey] = prod
            for pk, pc in prod.terms.items():
                acc.append(
                    (tuple(x + y for x, y in zip(pk, shift_key)), pc * scalar)
                )
        out._accumulate(acc)
        return out

    # -- division and inversion ----------------------------------------------------

    def _graded_key(self, key):
        # graded order: main total degree first, then descending lex, so
        # x precedes y and u1 precedes u2 within a degree block; this is
        # multiplication-compatible, which exact division relies on
        return (sum(key[: self.nvars]), tuple(-e for e in key))

    def exact_divide(self, divisor: "TruncatedSeries"):
        """Quotient q with q * divisor == self identically up to truncation.

        Greedy graded-lex elimination: repeatedly match the least remaining
        term of the dividend against the least term of the divisor.  Raises
        ExactDivisionError carrying the first obstructing exponent vector
        when a monomial or coefficient equation is unsolvable.
        """
        _check_same(self, divisor)
        if divisor.is_zero():
            raise ExactDivisionError("division by the zero series")
        if self.is_zero():
            return TruncatedSeries(self.profile, self.nvars, None, self.domain)
        prof = self.profile
        p, a = prof.p, prof.a
        dkey = min(divisor.terms, key=self._graded_key)
        dc = divisor.terms[dkey]
        if self.domain == MOD:
            dval = p_valuation(dc, p, a)
            dunit_inv = _modinv(dc // (p ** dval), p, a)

        rem = dict(self.terms)
        quot = {}
        last = None
        guard = 0
        limit = (len(self.terms) + 1) * (len(divisor.terms) + 2) * (
            (prof.degree_bound + 1) * (prof.u_degree_bound + 1) + 2
        )
        while rem:
            guard += 1
            if guard > limit:
                raise ExactDivisionError("division failed to terminate", obstruction=last)
            rkey = min(rem, key=self._graded_key)
            if last is not None and self._graded_key(rkey) <= self._graded_key(last):
                raise ExactDivisionError(
                    "remainder order failed to increase", obstruction=rkey
                )
            last = rkey
            if any(r < d for r, d in zip(rkey, dkey)):
                raise ExactDivisionError(
                    "leading monomial %r not divisible by %r" % (rkey, dkey),
                    obstruction=rkey,
                )
            qkey = tuple(r - d for r, d in zip(rkey, dkey))
            rc = rem[rkey]
            if self.domain == MOD:
                if rc % (p ** dval) != 0:
                    raise ExactDivisionError(
                        "coefficient %d at %r not divisible by p^%d"
                        % (rc, rkey, dval),
                        obstruction=rkey,
                    )
                qc = ((rc // (p ** dval)) * dunit_inv) % (p ** (a - dval))
            else:
                qc = rc / dc
            quot[qkey] = qc
            # subtract qc * x^qkey * divisor from the remainder
            mod = prof.modulus if self.domain == MOD else None
            nv = self.nvars
            D = prof.degree_bound
            ub = prof.u_degree_bound
            for k, c in divisor.terms.items():
                key = tuple(x + y for x, y in zip(k, qkey))
                if sum(key[:nv]) > D or sum(key[nv:]) > ub:
                    continue
                cur = rem.get(key, 0)
                if mod is None:
                    cur = cur - c * qc
                else:
                    cur = (cur - c * qc) % mod
                if cur:
                    rem[key] = cur
                else:
                    rem.pop(key, None)
        out = TruncatedSeries(self.profile, self.nvars, None, self.domain)
        out._accumulate(quot)
        return out

    def invert_unit(self):
        """Multiplicative inverse; the constant term must be a unit."""
        prof = self.profile
        c0 = self.constant_term()
        if self.domain == MOD:
            if c0 % prof.p == 0:
                raise NotAUnitError(
                    "constant term %r is not a unit mod %d" % (c0, prof.p)
                )
            y0 = _modinv(c0, prof.p, prof.a)
        else:
            if c0 == 0:
                raise NotAUnitError("constant term is zero")
            y0 = Fraction(1) / c0
        one = TruncatedSeries.constant(prof, self.nvars, 1, self.domain)
        y = TruncatedSeries.constant(prof, self.nvars, y0, self.domain)
        # Newton doubling; the error 1 - self*y has no constant term, so it
        # is nilpotent in the truncated ring and the loop is finite.
        steps = 0
        while True:
            err = one - self * y
            if err.is_zero():
                return y
            y = y + y * err
            steps += 1
            if steps > prof.degree_bound + prof.u_degree_bound + prof.a + 4:
                raise NotAUnitError("inversion failed to converge")

    # -- Weierstrass preparation -----------------------------------------------------

    def weierstrass_degree(self):
        """First main degree whose deformation-free coefficient is a p-unit."""
        if self.nvars != 1:
            raise WeierstrassError("preparation requires a univariate series")
        if self.domain != MOD:
            raise WeierstrassError("preparation requires the modular domain")
        prof = self.profile
        zeros = (0,) * prof.deformation_vars
        for d in range(prof.degree_bound + 1):
            c = self.terms.get((d,) + zeros)
            if c is not None and c % prof.p != 0:
                return d
        return None

    def weierstrass_prepare(self):
        """Factor self = unit * g with g monic of the Weierstrass degree.

        Returns (unit, MonicPolynomial).  Errors advise enlarging the degree
        bound when no unit pivot exists within it.
        """
        d = self.weierstrass_degree()
        if d is None:
            raise WeierstrassError(
                "no coefficient is a unit mod p within degree bound %d; "
                "increase the degree bound or the series is not prepared"
                % (self.profile.degree_bound,)
            )
        prof = self.profile
        nu = prof.deformation_vars
        low = {}
        high = {}
        for k, c in self.terms.items():
            if k[0] < d:
                low[k] = c
            else:
                high[(k[0] - d,) + k[1:]] = c
        L = TruncatedSeries(prof, 1, None, MOD)
        L.terms = low
        H = TruncatedSeries(prof, 1, None, MOD)
        H.terms = high
        Hinv = H.invert_unit()

        def shift_down(s):
            out = TruncatedSeries(prof, 1, None, MOD)
            out.terms = {
                (k[0] - d,) + k[1:]: c for k, c in s.terms.items() if k[0] >= d
            }
            return out

        one = TruncatedSeries.constant(prof, 1, 1)
        q = TruncatedSeries.zero(prof, 1)
        # contraction in the (p, u)-adic filtration; L has all coefficients
        # in (p, u), so the fixpoint is reached within a + u_degree_bound
        # steps and we allow a couple extra before declaring failure
        for _ in range(prof.a + prof.u_degree_bound + 3):
            q_next = Hinv * (one - shift_down(q * L))
            if q_next.terms == q.terms:
                break
            q = q_next
        else:
            raise WeierstrassError("preparation iteration failed to stabilize")

        xd = TruncatedSeries(prof, 1, {(d,) + (0,) * nu: 1})
        r = xd - q * self
        if any(k[0] >= d for k in r.terms):
            raise WeierstrassError("remainder escaped below the pivot degree")
        unit = q.invert_unit()
        coeffs = []
        for j in range(d):
            cj = TruncatedSeries(prof, 1, None, MOD)
            cj.terms = {
                (0,) + k[1:]: (prof.modulus - c) % prof.modulus
                for k, c in r.terms.items()
                if k[0] == j
            }
            cj.terms = {k: c for k, c in cj.terms.items() if c}
            coeffs.append(cj)
        g = MonicPolynomial(prof, d, coeffs)
        check = unit * g.as_series()
        if check.terms != self.terms:
            raise WeierstrassError(
                "preparation check failed; the degree bound is too small to "
                "certify the factorization"
            )
        return unit, g

    # -- rendering and comparison ---------------------------------------------------

    def render(self, main_names=None, param_names=None) -> str:
        """Canonical text form: graded then lexicographic term order."""
        prof = self.profile
        nv = self.nvars
        nu = prof.deformation_vars
        if main_names is None:
            main_names = (
                ["x", "y", "z"][:nv] if nv <= 3 else ["x%d" % (i + 1) for i in range(nv)]
            )
        if param_names is None:
            param_names = ["u%d" % (i + 1) for i in range(nu)]
        if not self.terms:
            return "0"
        names = list(main_names) + list(param_names)
        parts = []
        for key in sorted(self.terms, key=self._graded_key):
            c = self.terms[key]
            factors = []
            for name, e in zip(names, key):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append("%s^%d" % (name, e))
            cs = str(c)
            if not factors:
                parts.append(cs)
            elif cs == "1":
                parts.append("*".join(factors))
            elif cs == "-1":
                parts.append("-" + "*".join(factors))
            else:
                parts.append(cs + "*" + "*".join(factors))
        return " + ".join(parts)

    def __eq__(self, other):
        return (
            isinstance(other, TruncatedSeries)
            and self.profile == other.profile
            and self.domain == other.domain
            and self.nvars == other.nvars
            and self.terms == other.terms
        )

    __hash__ = None

    def __repr__(self):
        body = self.render()
        if len(body) > 120:
            body = body[:117] + "..."
        return "<TruncatedSeries %s | %d terms>" % (body, len(self.terms))


_degree_masks = {}


def _degree_mask(nvars, D):
    """Boolean array marking main-exponent cells above the degree bound."""
    if nvars <= 1:
        return None
    key = (nvars, D)
    got = _degree_masks.get(key)
    if got is None:
        grids = np.indices((D + 1,) * nvars).sum(axis=0)
        got = grids > D
        _degree_masks[key] = got
    return got


class MonicPolynomial:
    """Monic univariate polynomial with deformation-ring coefficients.

    coefficients[j] is the coefficient of x^j for j < degree, stored as a
    TruncatedSeries with zero main-variable degree; the leading coefficient
    is implicitly 1.
    """

    __slots__ = ("profile", "degree", "coefficients")

    def __init__(self, profile, degree, coefficients):
        if degree < 0:
            raise ValueError("degree must be nonnegative")
        if len(coefficients) != degree:
            raise ValueError("expected %d lower coefficients" % (degree,))
        for c in coefficients:
            if c.nvars != 1 or c.profile != profile:
                raise ProfileMismatchError("coefficient series profile mismatch")
            if any(k[0] != 0 for k in c.terms):
                raise ValueError("coefficient series must have main degree zero")
        self.profile = profile
        self.degree = degree
        self.coefficients = tuple(coefficients)

    @classmethod
    def from_series(cls, series: "TruncatedSeries"):
        """Interpret a monic polynomial series as a MonicPolynomial."""
        d = series.main_degree()
        prof = series.profile
        nu = prof.deformation_vars
        lead = series.terms.get((d,) + (0,) * nu)
        if lead != 1 or any(k[0] == d and any(k[1:]) for k in series.terms):
            raise WeierstrassError("series is not monic at its top degree")
        coeffs = []
        for j in range(d):
            cj = TruncatedSeries(prof, 1, None, MOD)
            cj.terms = {
                (0,) + k[1:]: c for k, c in series.terms.items() if k[0] == j
            }
            coeffs.append(cj)
        return cls(prof, d, coeffs)

    def as_series(self) -> TruncatedSeries:
        prof = self.profile
        nu = prof.deformation_vars
        out = TruncatedSeries(prof, 1, None, MOD)
        items = []
        for j, cj in enumerate(self.coefficients):
            for k, c in cj.terms.items():
                items.append(((j,) + k[1:], c))
        items.append(((self.degree,) + (0,) * nu, 1))
        out._accumulate(items)
        return out

    def coefficient_array(self) -> np.ndarray:
        """Lower coefficients as an int64 array of shape (degree, K)."""
        prof = self.profile
        K = prof.u_monomial_count
        uindex = {m: i for i, m in enumerate(prof.u_monomial_list())}
        arr = np.zeros((self.degree, K), dtype=np.int64)
        for j, cj in enumerate(self.coefficients):
            for k, c in cj.terms.items():
                arr[j, uindex[k[1:]]] = c
        return arr

    def reduce(self, series: TruncatedSeries) -> TruncatedSeries:
        """Remainder of a univariate series modulo this monic polynomial."""
        if series.nvars != 1 or series.profile != self.profile:
            raise ProfileMismatchError("reduce expects a matching univariate series")
        if self.degree == 0:
            return TruncatedSeries.zero(self.profile, 1, series.domain)
        prof = self.profile
        mod = prof.modulus
        ub = prof.u_degree_bound
        # bucket coefficients by main degree, then fold from the top
        maxdeg = series.main_degree()
        if maxdeg < self.degree:
            return series.copy()
        buckets = [dict() for _ in range(maxdeg + 1)]
        for k, c in series.terms.items():
            buckets[k[0]][k[1:]] = c
        lower = [
            {k[1:]: c for k, c in cj.terms.items()} for cj in self.coefficients
        ]
        for e in range(maxdeg, self.degree - 1, -1):
            top = buckets[e]
            if not top:
                continue
            base = e - self.degree
            for j, lj in enumerate(lower):
                if not lj:
                    continue
                dest = buckets[base + j]
                for ua, ca in top.items():
                    for ubk, cb in lj.items():
                        uk = tuple(x + y for x, y in zip(ua, ubk))
                        if sum(uk) > ub:
                            continue
                        dest[uk] = (dest.get(uk, 0) - ca * cb) % mod
            buckets[e] = {}
        out = TruncatedSeries(prof, 1, None, series.domain)
        items = []
        for e in range(self.degree):
            for uk, c in buckets[e].items():
                items.append(((e,) + uk, c))
        out._accumulate(items)
        return out

    def __eq__(self, other):
        return (
            isinstance(other, MonicPolynomial)
            and self.profile == other.profile
            and self.degree == other.degree
            and all(a.terms == b.terms for a, b in zip(self.coefficients, other.coefficients))
        )

    __hash__ = None

    def __repr__(self):
        return "<MonicPolynomial degree %d>" % (self.degree,)
