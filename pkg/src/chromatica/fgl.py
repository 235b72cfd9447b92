"""Formal group laws over truncated coefficient rings.

Three constructions are provided.

* multiplicative: F(x, y) = x + y + xy over Z/p^a, the exact height-one
  model, with closed forms for every multiplication series.
* lubin_tate: height-n deformation laws over Z/p^a[u_1..u_{n-1}].  Height 1
  uses the classical coordinate in which [p](x) is the polynomial
  f(x) = px + x^p exactly; F is solved degree by degree from
  f(F(x, y)) = F(f(x), f(y)).  For height >= 2 no coordinate makes [p] a
  polynomial, so the law is presented in the normal-form coordinate where
  the p-series is the formal sum

      [p](x) = px +_F u_1 x^p +_F ... +_F u_{n-1} x^{p^(n-1)} +_F x^{p^n}.

  Writing log(x) = sum_e lambda_{p^e} x^{p^e} for its logarithm, every
  series the pipelines need solves an integral fixed point against log,
  which is evaluated degree by degree in scaled fixed-precision arithmetic;
  see the normal-form section below.
* p_typical: the p-typical law over Q[v_1..v_V] built from the Hazewinkel
  logarithm.  Coefficients are exact fractions; p-integrality is asserted
  wherever a series is claimed to be integral.

The height-1 degree-by-degree solver loses one p-digit of precision per
degree, so it runs at scratch precision a + D and truncates to a at the
end.  The normal-form solvers lose a bounded number of digits independent
of the degree and run at a fixed scratch precision.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, gcd

import numpy as np

from .precision import PrecisionProfile, u_pair_table
from .series import (
    MOD,
    RAT,
    CompositionError,
    TruncatedSeries,
)

MULTIPLICATIVE = "multiplicative"
LUBIN_TATE = "lubin_tate"
P_TYPICAL = "p_typical"

# Composition-based checks on a freshly built law are skipped above this
# degree bound; they are O(D^2) series multiplications and the identities
# they verify are degree-stable, so checking small profiles covers them.
_CHECK_DEGREE_LIMIT = 64

# The two-variable law is only materialized on profiles small enough for
# direct composition work; multiplication series and ring evaluations never
# need F at large degree bounds.
_F_DEGREE_LIMIT = 512


class IntegralityError(ArithmeticError):
    """A series expected to be p-integral has a p in a denominator."""


class LawConstructionError(ValueError):
    """Profile or parameters unsuitable for the requested law."""


def _binomial(m: int, e: int) -> int:
    """C(m, e) for any integer m and e >= 0."""
    if e < 0:
        raise ValueError("negative lower index")
    if m >= 0:
        return comb(m, e) if e <= m else 0
    # C(m, e) = (-1)^e C(-m + e - 1, e)
    return (-1) ** e * comb(-m + e - 1, e)


def assert_p_integral(series: TruncatedSeries, context: str = "series"):
    if series.domain != RAT:
        return
    p = series.profile.p
    for k, c in series.terms.items():
        if c.denominator % p == 0:
            raise IntegralityError(
                "%s has non-p-integral coefficient %s at %r" % (context, c, k)
            )


class FormalGroupLaw:
    """A formal group law together with caches for derived series.

    The multiplication-series caches are write once per key: entries are
    computed at most once and never replaced, so concurrent readers always
    observe a completed value.
    """

    __slots__ = (
        "kind",
        "profile",
        "domain",
        "height",
        "v_count",
        "_struct",
        "_log",
        "_exp",
        "_F",
        "_pseries",
        "_angle",
        "_mseries",
        "_neg",
    )

    def __init__(self, kind, profile, domain, height=None, v_count=None):
        self.kind = kind
        self.profile = profile
        self.domain = domain
        self.height = height
        self.v_count = v_count
        self._struct = None
        self._log = None
        self._exp = None
        self._F = None
        self._pseries = {}
        self._angle = {}
        self._mseries = {}
        self._neg = None

    # -- basic series builders -------------------------------------------------

    def _x(self, nvars=1, i=0):
        return TruncatedSeries.variable(self.profile, nvars, i, domain=self.domain)

    def _const(self, c, nvars=1):
        return TruncatedSeries.constant(self.profile, nvars, c, domain=self.domain)

    @property
    def structural_series(self) -> TruncatedSeries:
        """The series whose compositions generate the p-power series.

        For height 1 this is the defining polynomial f(x) = px + x^p; for
        height >= 2, where no polynomial coordinate exists, it is the
        p-series itself.
        """
        if self.kind != LUBIN_TATE:
            raise LawConstructionError("only Lubin-Tate laws carry a structural series")
        if self._struct is not None:
            return self._struct
        return self.pk_series(1)

    @property
    def log_series(self) -> TruncatedSeries:
        if self.kind != P_TYPICAL:
            raise LawConstructionError("only p-typical laws carry a logarithm")
        return self._log

    @property
    def exp_series(self) -> TruncatedSeries:
        if self.kind != P_TYPICAL:
            raise LawConstructionError("only p-typical laws carry an exponential")
        return self._exp

    # -- the two-variable law ----------------------------------------------------

    @property
    def F(self) -> TruncatedSeries:
        """The two-variable law, materialized on first access."""
        if self._F is None:
            if self.kind == MULTIPLICATIVE:
                F = self._multiplicative_F()
            elif self.kind == P_TYPICAL:
                F = self._p_typical_F()
            elif self.height >= 2:
                if self.profile.degree_bound > _F_DEGREE_LIMIT:
                    raise LawConstructionError(
                        "two-variable law not materialized above degree bound %d; "
                        "multiplication series and ring evaluations do not need it"
                        % (_F_DEGREE_LIMIT,)
                    )
                terms = _nf_f_terms(self.profile, self.height, None)
                F = TruncatedSeries(self.profile, 2, terms, MOD)
            else:
                F = _solve_deformation_law(self.profile, self._struct)
            self._check_law_axioms(F)
            self._F = F
        return self._F

    def _multiplicative_F(self):
        prof = self.profile
        nu = prof.deformation_vars
        terms = {
            (1, 0) + (0,) * nu: 1,
            (0, 1) + (0,) * nu: 1,
            (1, 1) + (0,) * nu: 1,
        }
        return TruncatedSeries(prof, 2, terms, self.domain)

    def _p_typical_F(self):
        x = self._x(2, 0)
        y = self._x(2, 1)
        lx = self._log.compose([(0, x)])
        ly = self._log.compose([(0, y)])
        F = self._exp.compose([(0, lx + ly)])
        assert_p_integral(F, "p-typical F")
        return F

    def _check_law_axioms(self, F):
        nu = self.profile.deformation_vars
        zu = (0,) * nu
        seen_x = False
        seen_y = False
        for k, c in F.terms.items():
            if k[1] == 0:
                if k[0] == 1 and k[2:] == zu and c == 1:
                    seen_x = True
                else:
                    raise LawConstructionError("unit axiom F(x, 0) = x failed")
            elif k[0] == 0:
                if k[1] == 1 and k[2:] == zu and c == 1:
                    seen_y = True
                else:
                    raise LawConstructionError("unit axiom F(0, y) = y failed")
        if not (seen_x and seen_y):
            raise LawConstructionError("unit axiom lost a linear term")
        swapped = {}
        for k, c in F.terms.items():
            swapped[(k[1], k[0]) + k[2:]] = c
        if swapped != F.terms:
            raise LawConstructionError("law is not commutative")
        if (
            self.kind == LUBIN_TATE
            and self.profile.degree_bound <= _CHECK_DEGREE_LIMIT
        ):
            # [p] computed through the freshly solved F must reproduce the
            # p-series obtained without F
            r = self._x(1, 0)
            xv = self._x(1, 0)
            for _ in range(self.profile.p - 1):
                r = F.compose([(0, r), (1, xv)])
            if r.terms != self.pk_series(1).terms:
                raise LawConstructionError(
                    "[p] recomputed from F disagrees with the p-series"
                )

    # -- multiplication series ------------------------------------------------------

    def p_series(self) -> TruncatedSeries:
        return self.pk_series(1)

    def pk_series(self, k: int) -> TruncatedSeries:
        """[p^k](x), cached; [p^0](x) = x."""
        if k < 0:
            raise ValueError("k must be nonnegative")
        got = self._pseries.get(k)
        if got is not None:
            return got
        if k == 0:
            out = self._x(1, 0)
        elif self.kind == MULTIPLICATIVE:
            out = self._ladder_series(self.profile.p ** k)
        elif self.kind == P_TYPICAL:
            out = self._exp_of_multiple(self.profile.p ** k)
        elif self.height >= 2:
            out = self.m_series(self.profile.p ** k)
        else:
            out = self._struct if k == 1 else self._struct.compose(
                [(0, self.pk_series(k - 1))]
            )
        self._pseries.setdefault(k, out)
        return self._pseries[k]

    def angle_pk_series(self, k: int) -> TruncatedSeries:
        """<p^k>(x): the cofactor with [p^k] = x * prod_{1<=j<=k} <p^j>.

        <p^0>(x) = x by convention; <p^k> = <p> composed with [p^(k-1)].
        """
        if k < 0:
            raise ValueError("k must be nonnegative")
        got = self._angle.get(k)
        if got is not None:
            return got
        if k == 0:
            out = self._x(1, 0)
        elif k == 1:
            out = self.pk_series(1).exact_divide(self._x(1, 0))
        else:
            out = self.angle_pk_series(1).compose([(0, self.pk_series(k - 1))])
        self._angle.setdefault(k, out)
        return self._angle[k]

    def _ladder_series(self, m: int) -> TruncatedSeries:
        """(1 + x)^m - 1 for the multiplicative law, any integer m."""
        prof = self.profile
        D = prof.degree_bound
        nu = prof.deformation_vars
        terms = {}
        for e in range(1, D + 1):
            c = _binomial(m, e)
            if m >= 0 and e > m:
                break
            terms[(e,) + (0,) * nu] = c
        return TruncatedSeries(prof, 1, terms, self.domain)

    def _exp_of_multiple(self, m: int) -> TruncatedSeries:
        out = self._exp.compose([(0, self._log.scale(m))])
        return out

    def m_series(self, m: int) -> TruncatedSeries:
        """[m](x) for any integer m."""
        got = self._mseries.get(m)
        if got is not None:
            return got
        if self.kind == MULTIPLICATIVE:
            out = self._ladder_series(m)
        elif self.kind == P_TYPICAL:
            out = self._exp_of_multiple(m)
        elif m == 0:
            out = TruncatedSeries.zero(self.profile, 1, self.domain)
        elif m == 1:
            out = self._x(1, 0)
        elif self.height >= 2:
            out = _nf_m_series(self.profile, self.height, m)
        elif m < 0:
            out = self.formal_neg().compose([(0, self.m_series(-m))])
        elif m % self.profile.p == 0:
            out = self.m_series(m // self.profile.p).compose([(0, self._struct)])
        else:
            out = self.F.compose([(0, self.m_series(m - 1)), (1, self._x(1, 0))])
        self._mseries.setdefault(m, out)
        return self._mseries[m]

    def formal_sum(self, s: TruncatedSeries, t: TruncatedSeries) -> TruncatedSeries:
        """F(s, t) for constant-free series s, t in the same variables."""
        if s.has_constant_term() or t.has_constant_term():
            raise CompositionError("formal_sum requires constant-free series")
        return self.F.compose([(0, s), (1, t)])

    def formal_neg(self) -> TruncatedSeries:
        """The inverse series i(x) with F(x, i(x)) = 0."""
        if self._neg is not None:
            return self._neg
        prof = self.profile
        if self.kind == MULTIPLICATIVE:
            out = self._ladder_series(-1)
        elif self.kind == P_TYPICAL:
            out = self._exp_of_multiple(-1)
        elif self.height >= 2:
            out = self.m_series(-1)
            if prof.degree_bound <= _CHECK_DEGREE_LIMIT:
                invol = out.compose([(0, out)])
                if invol.terms != self._x(1, 0).terms:
                    raise LawConstructionError(
                        "formal negation failed the involution check"
                    )
        else:
            F = self.F
            x = self._x(1, 0)
            iota = -x
            for d in range(2, prof.degree_bound + 1):
                r = F.compose([(0, x), (1, iota)])
                corr = {k: c for k, c in r.terms.items() if k[0] == d}
                if corr:
                    iota = iota - TruncatedSeries(prof, 1, corr, self.domain)
            out = iota
            check = F.compose([(0, x), (1, out)])
            if not check.is_zero():
                raise LawConstructionError("formal negation failed to cancel")
        self._neg = out
        return out

    # -- factorization and coprimality ------------------------------------------------

    def angle_factorization(self, k: int) -> TruncatedSeries:
        """x * prod_{1 <= j <= k} <p^j>(x); equals [p^k] when everything fits."""
        out = self._x(1, 0)
        for j in range(1, k + 1):
            out = out * self.angle_pk_series(j)
        return out

    def bezout_witness(self, j: int, t: int) -> TruncatedSeries:
        """The witness q with p = <p^j>(x) - <p^t>(x) * q(x), for t < j.

        q = f([p^(j-1)]) / <p^t> where f(x) = <p>(x) - p.  The division is
        exact; the returned witness is verified against the identity and,
        in the rational domain, checked for p-integrality.
        """
        if not 0 <= t < j:
            raise ValueError("need 0 <= t < j")
        f_aug = self.angle_pk_series(1) - self._const(self.profile.p)
        numerator = f_aug.compose([(0, self.pk_series(j - 1))])
        q = numerator.exact_divide(self.angle_pk_series(t))
        lhs = self.angle_pk_series(j) - self.angle_pk_series(t) * q
        if lhs.terms != self._const(self.profile.p).terms:
            raise ArithmeticError(
                "coprimality identity failed at (j, t) = (%d, %d)" % (j, t)
            )
        assert_p_integral(q, "coprimality witness")
        return q

    def __repr__(self):
        extra = ""
        if self.kind == LUBIN_TATE:
            extra = " height=%d" % (self.height,)
        if self.kind == P_TYPICAL:
            extra = " v_count=%d" % (self.v_count,)
        return "<FormalGroupLaw %s p=%d%s>" % (self.kind, self.profile.p, extra)


# -- constructors ------------------------------------------------------------------


def multiplicative_law(profile: PrecisionProfile) -> FormalGroupLaw:
    if profile.deformation_vars != 0:
        raise LawConstructionError(
            "the multiplicative law takes no deformation variables"
        )
    return FormalGroupLaw(MULTIPLICATIVE, profile, MOD)


def lubin_tate_law(height: int, profile: PrecisionProfile) -> FormalGroupLaw:
    """The height-n deformation law over Z/p^a[u_1..u_{n-1}]."""
    if height < 1:
        raise LawConstructionError("height must be at least 1")
    if profile.deformation_vars != height - 1:
        raise LawConstructionError(
            "height %d needs exactly %d deformation variables, profile has %d"
            % (height, height - 1, profile.deformation_vars)
        )
    if profile.degree_bound < profile.p ** height:
        raise LawConstructionError(
            "degree bound %d cannot hold the monic term x^%d"
            % (profile.degree_bound, profile.p ** height)
        )
    if height >= 2 and profile.u_degree_bound < 1:
        raise LawConstructionError(
            "height >= 2 needs u_degree_bound >= 1 to hold the deformation terms"
        )
    law = FormalGroupLaw(LUBIN_TATE, profile, MOD, height=height)
    if height == 1:
        terms = {
            (1,): profile.p,
            (profile.p,): 1,
        }
        law._struct = TruncatedSeries(profile, 1, terms, MOD)
    return law


def p_typical_bp_law(v_count: int, profile: PrecisionProfile) -> FormalGroupLaw:
    """The p-typical law over Q[v_1..v_V] from the Hazewinkel logarithm.

    Requires enough v-generators to determine every logarithm coefficient
    within the degree bound, and a deformation-degree bound big enough that
    the weight grading (v_i has weight p^i - 1, the x-coefficient at degree
    d has weight d - 1) never truncates a coefficient polynomial.
    """
    p = profile.p
    D = profile.degree_bound
    if v_count < 1:
        raise LawConstructionError("need at least one v-generator")
    if profile.deformation_vars != v_count:
        raise LawConstructionError(
            "profile must carry exactly v_count deformation variables"
        )
    max_m = 0
    while p ** (max_m + 1) <= D:
        max_m += 1
    if v_count < max_m:
        raise LawConstructionError(
            "v_count %d too small: logarithm needs v_1..v_%d at degree bound %d"
            % (v_count, max_m, D)
        )
    if profile.u_degree_bound < D - 1:
        raise LawConstructionError(
            "deformation degree bound %d below D - 1 = %d would truncate "
            "weighted coefficients" % (profile.u_degree_bound, D - 1)
        )
    law = FormalGroupLaw(P_TYPICAL, profile, RAT, v_count=v_count)

    # Hazewinkel recursion p*l_m = sum_{0<=i<m} l_i v_{m-i}^(p^i), l_0 = 1.
    # l_m is a polynomial in the v's with coefficients in Z[1/p].
    nu = v_count
    ell = [{(0,) * nu: Fraction(1)}]
    for m in range(1, max_m + 1):
        acc = {}
        for i in range(0, m):
            vexp = tuple((p ** i if t == m - i - 1 else 0) for t in range(nu))
            for k, c in ell[i].items():
                key = tuple(a + b for a, b in zip(k, vexp))
                acc[key] = acc.get(key, Fraction(0)) + c
        ell.append({k: c / p for k, c in acc.items()})

    log_terms = {}
    for m, poly in enumerate(ell):
        for vk, c in poly.items():
            log_terms[(p ** m,) + vk] = c
    log = TruncatedSeries(profile, 1, log_terms, RAT)

    # exp is the compositional inverse, solved degree by degree against a
    # power ladder of the (sparse) logarithm
    lpow = [None, log]

    def logpow(m):
        while len(lpow) <= m:
            lpow.append(lpow[-1] * log)
        return lpow[m]

    exp_coeffs = {1: {(0,) * nu: Fraction(1)}}
    for d in range(2, D + 1):
        acc = {}
        for m in range(1, d):
            em = exp_coeffs.get(m)
            if em is None:
                continue
            lm = logpow(m)
            for k, c in lm.terms.items():
                if k[0] != d:
                    continue
                for ek, ec in em.items():
                    key = tuple(a + b for a, b in zip(k[1:], ek))
                    acc[key] = acc.get(key, Fraction(0)) - c * ec
        acc = {k: c for k, c in acc.items() if c}
        if acc:
            exp_coeffs[d] = acc
    exp_terms = {}
    for d, poly in exp_coeffs.items():
        for vk, c in poly.items():
            exp_terms[(d,) + vk] = c
    exp = TruncatedSeries(profile, 1, exp_terms, RAT)

    x = TruncatedSeries.variable(profile, 1, 0, domain=RAT)
    if log.compose([(0, exp)]).terms != x.terms:
        raise LawConstructionError("logarithm reversion failed: log(exp(t)) != t")
    if exp.compose([(0, log)]).terms != x.terms:
        raise LawConstructionError("logarithm reversion failed: exp(log(x)) != x")

    law._log = log
    law._exp = exp
    assert_p_integral(law.pk_series(1), "[p] for the p-typical law")
    return law


def law_for_height(height: int, profile: PrecisionProfile) -> FormalGroupLaw:
    """Height 1 uses the exact multiplicative model, higher heights the
    deformation law."""
    if height == 1:
        return multiplicative_law(profile)
    return lubin_tate_law(height, profile)


_LAW_CACHE: dict = {}


def get_law(kind, profile, height=None, v_count=None) -> FormalGroupLaw:
    """Process-wide law cache; construction is deterministic, so sharing
    cached instances cannot change any result."""
    key = (kind, profile, height, v_count)
    got = _LAW_CACHE.get(key)
    if got is None:
        if kind == MULTIPLICATIVE:
            got = multiplicative_law(profile)
        elif kind == LUBIN_TATE:
            got = lubin_tate_law(height, profile)
        elif kind == P_TYPICAL:
            got = p_typical_bp_law(v_count, profile)
        else:
            raise LawConstructionError("unknown law kind %r" % (kind,))
        _LAW_CACHE.setdefault(key, got)
    return _LAW_CACHE[key]


# -- the height-1 degree-by-degree solver --------------------------------------------


def _solve_deformation_law(profile: PrecisionProfile, f: TruncatedSeries):
    """Solve f(F(x, y)) = F(f(x), f(y)) for F degree by degree.

    Each homogeneous correction E_d satisfies (p - p^d) E_d = defect_d, so
    one p-digit is lost per degree; the solve therefore runs at scratch
    precision a + D and truncates at the end.  Only height 1 admits a
    polynomial f, so only height 1 uses this solver.
    """
    p = profile.p
    D = profile.degree_bound
    nu = profile.deformation_vars
    scratch = PrecisionProfile(p, profile.a + D, nu, profile.u_degree_bound, D)
    M = scratch.modulus

    def embed_univar(s, target_index):
        # place a univariate series into the 2-variable scratch ring
        terms = {}
        for k, c in s.terms.items():
            main = (k[0], 0) if target_index == 0 else (0, k[0])
            terms[main + k[1:]] = c
        return TruncatedSeries(scratch, 2, terms, MOD)

    f_sc = TruncatedSeries(scratch, 1, dict(f.terms), MOD)
    fx = embed_univar(f_sc, 0)
    fy = embed_univar(f_sc, 1)

    x2 = TruncatedSeries.variable(scratch, 2, 0)
    y2 = TruncatedSeries.variable(scratch, 2, 1)
    F = x2 + y2
    A = fx + fy  # F(f(x), f(y)) for the current F

    pn = f.main_degree()
    one2 = TruncatedSeries.constant(scratch, 2, 1)
    pows = [one2, F]
    for _ in range(2, pn + 1):
        pows.append(pows[-1] * F)

    f_by_degree = {}
    for k, c in f_sc.terms.items():
        f_by_degree.setdefault(k[0], []).append((k[1:], c))

    def eval_f_at_pows(power_list):
        out = TruncatedSeries.zero(scratch, 2)
        for e, parts in f_by_degree.items():
            for uk, c in parts:
                out = out + power_list[e].shifted_scale(c, (0, 0) + uk)
        return out

    B = eval_f_at_pows(pows)

    for d in range(2, D + 1):
        defect = {
            k: c
            for k, c in (A - B).terms.items()
            if k[0] + k[1] == d and c % M != 0
        }
        if defect:
            # the degree-d correction E satisfies (p - p^d) E = -defect,
            # i.e. E = defect / (p (1 - p^(d-1)))
            inv = pow(1 - pow(p, d - 1, M), -1, M)
            eterms = {}
            for k, c in defect.items():
                if c % p != 0:
                    raise LawConstructionError(
                        "defect at degree %d is not divisible by p" % (d,)
                    )
                eterms[k] = ((c // p) * inv) % M
            E = TruncatedSeries(scratch, 2, eterms, MOD)
            F = F + E
            A = A + E.compose([(0, fx), (1, fy)])
            epows = [one2, E]
            maxm = D // d
            newpows = [one2]
            for jdx in range(1, pn + 1):
                s = pows[jdx]
                for m in range(1, min(jdx, maxm) + 1):
                    while len(epows) <= m:
                        epows.append(epows[-1] * E)
                    s = s + (pows[jdx - m] * epows[m]).scale(comb(jdx, m))
                newpows.append(s)
            pows = newpows
            B = eval_f_at_pows(pows)

    if not (A - B).is_zero():
        raise LawConstructionError(
            "solver left a defect: the functional equation is not satisfied"
        )
    out = TruncatedSeries(profile, 2, None, MOD)
    out._accumulate(F.terms)
    return out


# -- normal form for heights >= 2 -----------------------------------------------------
#
# Comparing coefficients in p*log(x) = sum_{0<=i<=n} log(u_i x^{p^i}) with
# u_0 = p and u_n = 1 characterizes the logarithm of the normal-form law:
#
#     lambda_1 = 1,
#     lambda_{p^e} (p - p^{p^e})
#         = sum_{1 <= i <= min(e, n)} lambda_{p^(e-i)} u_i^{p^(e-i)},
#
# so v_p(lambda_{p^e}) = -e exactly.  Series are produced from integral
# fixed points against the logarithm:
#
#     [m](x) = m log(x) - sum_{e>=1} lambda_{p^e} [m](x)^{p^e}
#     F(x,y) = log(x) + log(y) - sum_{e>=1} lambda_{p^e} F(x,y)^{p^e}
#
# The right-hand side at total degree d only involves coefficients of
# degree < d, because the unknown has order 1 and p^e >= p >= 2, so both
# equations are solved by one ascending pass over the degrees.
#
# Arithmetic runs on p^S-scaled mantissas with S = max{e : p^e <= D}, the
# deepest denominator that can appear, modulo p^B with B = a + S + 4.
# Assembling degree d produces sigma = p^S * (coefficient), the division by
# p^S is checked to be exact (this is the integrality of the law), and the
# quotient is exact modulo p^(B - S) = p^(a + 4): the only digits ever lost
# are the one-time S digits of the scaling, because an error of size p^t
# injected into the unknown returns through lambda_{p^e} * d(P^{p^e}) with
# valuation >= t - e + e = t.  Denominators 1/(1 - p^t) are replaced by
# modular inverses, which agree with the true values to working precision.
#
# Powers P^{p^e} are maintained as a ladder of product nodes whose
# coefficients are extracted degree by degree: the degree-d coefficient of
# node = left * right is a convolution over strictly smaller degrees, which
# numpy evaluates as dot products over the stored coefficient rows.  A
# residual grading cuts the work: u_i carries weight p^i - 1 and x weight 1,
# every stored series is homogeneous modulo g = gcd(p - 1, p^n - 1), so
# degrees off a node's phase class are identically zero and are skipped.


class _FrontierNode:
    """Coefficient rows of a product of previously solved series.

    arr[g, d] holds the u-monomial-g coefficient at main degree d, modulo
    p^B.  When dot products of two full-width rows could overflow int64,
    base-p^we limb copies of the rows are kept alongside and the dots run
    against the limbs.
    """

    __slots__ = ("arr", "limbs", "order", "phase", "left", "right")

    def __init__(self, K, D, order, phase, left, right, nlimbs):
        self.arr = np.zeros((K, D + 1), dtype=np.int64)
        self.limbs = (
            [np.zeros((K, D + 1), dtype=np.int64) for _ in range(nlimbs)]
            if nlimbs
            else None
        )
        self.order = order
        self.phase = phase
        self.left = left
        self.right = right


def _nf_scale_params(p: int, a: int, D: int):
    e_max = 0
    while p ** (e_max + 1) <= D:
        e_max += 1
    return e_max, a + e_max + 4


def _nf_lambda_mantissas(profile: PrecisionProfile, height: int, e_max: int, B_lam: int):
    """Dense mantissa rows lam[e][g] for lambda_{p^e} * p^e_max.

    Row e is exact modulo p^(B_lam - e); callers reduce to their working
    modulus.  Raises when the recursion ever asks for a non-integral step,
    which would falsify the valuation bound v_p(lambda_{p^e}) = -e.
    """
    p = profile.p
    nu = profile.deformation_vars
    ub = profile.u_degree_bound
    mod = p ** B_lam
    index = {k: i for i, k in enumerate(profile.u_monomial_list())}
    by_key = [{(0,) * nu: (p ** e_max) % mod}]
    for e in range(1, e_max + 1):
        acc = {}
        for i in range(1, min(e, height) + 1):
            if i == height:
                shift = (0,) * nu
            else:
                shift = tuple(
                    p ** (e - i) if t == i - 1 else 0 for t in range(nu)
                )
            for k, c in by_key[e - i].items():
                nk = tuple(x + y for x, y in zip(k, shift))
                if sum(nk) > ub:
                    continue
                acc[nk] = (acc.get(nk, 0) + c) % mod
        t = p ** e - 1
        unit_inv = 1 if t >= B_lam else pow(1 - pow(p, t, mod), -1, mod)
        cur = {}
        for k, c in acc.items():
            if c % p:
                raise LawConstructionError(
                    "logarithm recursion lost integrality at level %d" % (e,)
                )
            cur[k] = ((c // p) * unit_inv) % mod
        by_key.append(cur)
    dense = []
    for e in range(e_max + 1):
        row = [0] * len(index)
        for k, c in by_key[e].items():
            row[index[k]] = c
        dense.append(row)
    return dense


def _u_pair_plan(profile: PrecisionProfile):
    """plan[g] lists the index pairs (al, be) with monomial al * be = g."""
    table = u_pair_table(profile.deformation_vars, profile.u_degree_bound)
    K = profile.u_monomial_count
    plan = [[] for _ in range(K)]
    for al in range(K):
        row = table[al]
        for be in range(K):
            g = row[be]
            if g >= 0:
                plan[g].append((al, be))
    return plan


def _limb_layout(p: int, B: int, D: int):
    """Choose a limb width so row dots cannot overflow int64.

    Returns (nlimbs, pwe).  nlimbs = 0 means full-width rows are safe.
    """
    bits = (p ** B).bit_length()
    lenbits = (D + 1).bit_length()
    if 2 * bits + lenbits <= 62:
        return 0, 1
    gap = 62 - bits - lenbits
    we = 1
    while (p ** (we + 1)).bit_length() <= gap:
        we += 1
    if (p ** we).bit_length() > gap:
        raise LawConstructionError(
            "coefficient modulus too wide for the dot kernel at p=%d, B=%d" % (p, B)
        )
    return -(-B // we), p ** we


def _conv_at(left, right, d, g0, plan, K, pwe, M):
    """The K coefficients of (left * right) at main degree d, or None."""
    oa = left.order
    hi = d - right.order
    start = oa + ((left.phase - oa) % g0)
    if start > hi:
        return None
    L = (hi - start) // g0 + 1
    b0 = d - start - (L - 1) * g0
    arrA = left.arr
    out = [0] * K
    for g in range(K):
        acc = 0
        for (al, be) in plan[g]:
            av = arrA[al, start : start + L * g0 : g0]
            if right.limbs is None:
                bv = right.arr[be, b0 : d - start + 1 : g0][::-1]
                acc += int(np.dot(av, bv))
            else:
                mult = 1
                for lb in right.limbs:
                    bv = lb[be, b0 : d - start + 1 : g0][::-1]
                    acc += int(np.dot(av, bv)) * mult
                    mult *= pwe
        if acc:
            out[g] = acc % M
    return out


def _write_row(node, d, vals, pwe):
    arr = node.arr
    for g, v in enumerate(vals):
        if v:
            arr[g, d] = v
    if node.limbs is not None:
        for g, v in enumerate(vals):
            t = v
            for lb in node.limbs:
                lb[g, d] = t % pwe
                t //= pwe


def _build_chain(K, D, p, e_max, g0, nlimbs):
    """Power-ladder nodes for P^{p^e}, e = 1..e_max, over a root node P."""
    root = _FrontierNode(K, D, 1, 1 % g0, None, None, nlimbs)
    nodes = []
    qnodes = [root]
    for _ in range(1, e_max + 1):
        prev = qnodes[-1]
        cur = prev
        for t in range(2, p + 1):
            nd = _FrontierNode(
                K, D, t * prev.order, (t * prev.phase) % g0, cur, prev, nlimbs
            )
            nodes.append(nd)
            cur = nd
        qnodes.append(cur)
    return root, nodes, qnodes


def _nf_m_series_terms(profile: PrecisionProfile, height: int, m: int) -> dict:
    p = profile.p
    D = profile.degree_bound
    a = profile.a
    K = profile.u_monomial_count
    e_max, B = _nf_scale_params(p, a, D)
    S = e_max
    M = p ** B
    pS = p ** S
    amod = p ** a
    lam = [
        [c % M for c in row]
        for row in _nf_lambda_mantissas(profile, height, e_max, B + e_max)
    ]
    plan = _u_pair_plan(profile)
    g0 = gcd(p - 1, p ** height - 1)
    nlimbs, pwe = _limb_layout(p, B, D)
    root, nodes, qnodes = _build_chain(K, D, p, e_max, g0, nlimbs)
    log_level = {p ** e: e for e in range(e_max + 1)}
    umons = profile.u_monomial_list()
    mM = m % M
    out_terms = {}
    for d in range(1, D + 1):
        for nd in nodes:
            if nd.order > d or (d - nd.phase) % g0:
                continue
            vals = _conv_at(nd.left, nd.right, d, g0, plan, K, pwe, M)
            if vals is not None:
                _write_row(nd, d, vals, pwe)
        if (d - 1) % g0:
            continue
        sigma = [0] * K
        e_log = log_level.get(d)
        if e_log is not None:
            lrow = lam[e_log]
            for g in range(K):
                if lrow[g]:
                    sigma[g] = mM * lrow[g]
        for e in range(1, e_max + 1):
            q = qnodes[e]
            if q.order > d:
                break
            col = q.arr[:, d]
            lrow = lam[e]
            for g in range(K):
                acc = sigma[g]
                for (al, be) in plan[g]:
                    la = lrow[al]
                    qv = col[be]
                    if la and qv:
                        acc -= la * int(qv)
                sigma[g] = acc
        row_vals = [0] * K
        dirty = False
        for g in range(K):
            r = sigma[g] % M
            if r % pS:
                raise LawConstructionError(
                    "fixed-point solve for [%d] lost integrality at degree %d"
                    % (m, d)
                )
            v = r // pS
            if v:
                row_vals[g] = v
                dirty = True
        if dirty:
            _write_row(root, d, row_vals, pwe)
            for g, v in enumerate(row_vals):
                red = v % amod
                if red:
                    out_terms[(d,) + umons[g]] = red
    return out_terms


def _nf_m_series(profile: PrecisionProfile, height: int, m: int) -> TruncatedSeries:
    terms = _nf_m_series_terms(profile, height, m)
    lin = terms.get((1,) + (0,) * profile.deformation_vars, 0)
    if lin != m % profile.modulus:
        raise LawConstructionError(
            "normal-form solve produced linear term %r for [%d]" % (lin, m)
        )
    return TruncatedSeries(profile, 1, terms, MOD)


class _ScatterNode:
    """A power of F accumulated cell by cell over the two-variable box.

    arr[i, j, g] holds the coefficient of x^i y^j (u-monomial g), congruent
    to the true value modulo p^B.  Cells fill by scattering finalized
    coefficients of the factors against the partner's stored cells, so a
    cell at total degree d is complete before frontier d is processed.
    """

    __slots__ = ("arr", "order", "phase", "topo", "deps", "pending")

    def __init__(self, D, K, order, phase, topo):
        self.arr = np.zeros((D + 1, D + 1, K), dtype=np.int64)
        self.order = order
        self.phase = phase
        self.topo = topo
        self.deps = []  # (target, partner, self_product)
        self.pending = 0


def _nf_f_terms(profile: PrecisionProfile, height: int, region) -> dict:
    """Coefficients of the two-variable law on a downward-closed region.

    region is a boolean (D+1, D+1) mask or None for the full triangle
    i + j <= D.  Closure under componentwise decrease makes the quotient
    semantics exact: a product of retained cells that lands outside the
    region is never needed for a retained cell.
    """
    p = profile.p
    D = profile.degree_bound
    a = profile.a
    K = profile.u_monomial_count
    e_max, B = _nf_scale_params(p, a, D)
    S = e_max
    M = p ** B
    pS = p ** S
    amod = p ** a
    lam = [
        [c % M for c in row]
        for row in _nf_lambda_mantissas(profile, height, e_max, B + e_max)
    ]
    table = u_pair_table(profile.deformation_vars, profile.u_degree_bound)
    plan = _u_pair_plan(profile)
    g0 = gcd(p - 1, p ** height - 1)
    deg = np.add.outer(np.arange(D + 1), np.arange(D + 1))
    tri = deg <= D
    if region is None:
        region = tri
    else:
        region = np.asarray(region, dtype=bool) & tri
    if not (region[1, 0] and region[0, 1]):
        raise LawConstructionError("region must contain the linear cells")

    fnode = _ScatterNode(D, K, 1, 1 % g0, 0)
    nodes = [fnode]
    qnodes = [fnode]
    for _ in range(1, e_max + 1):
        prev = qnodes[-1]
        cur = prev
        for t in range(2, p + 1):
            nd = _ScatterNode(D, K, t * prev.order, (t * prev.phase) % g0, len(nodes))
            if cur is prev:
                prev.deps.append((nd, prev, True))
            else:
                cur.deps.append((nd, prev, False))
                prev.deps.append((nd, cur, False))
            nodes.append(nd)
            cur = nd
        qnodes.append(cur)

    # einsum inputs stay below M * (pending + 1); keep the product with M * K
    # inside 62 bits by reducing arrays modulo M once the headroom is spent
    mod_period = (1 << 62) // (M * M * K) - 2
    if mod_period < 1:
        raise LawConstructionError(
            "coefficient modulus too wide for the scatter kernel at p=%d" % (p,)
        )

    def mix_matrix(cvec):
        Mc = np.zeros((K, K), dtype=np.int64)
        for al in range(K):
            row = table[al]
            for be in range(K):
                v = cvec[be]
                g = row[be]
                if v and g >= 0:
                    Mc[al, g] = (Mc[al, g] + v) % M
        return Mc

    def scatter(node, cells, d):
        for (target, partner, self_product) in node.deps:
            cut = d - 1
            if not self_product and partner.topo < node.topo:
                cut = d
            for (i, j, cvec) in cells:
                rr = D + 1 - i
                cc = D + 1 - j
                sub = partner.arr[:rr, :cc]
                msk = (deg[:rr, :cc] <= cut) & region[:rr, :cc]
                src = np.where(msk[:, :, None], sub, 0)
                upd = np.einsum("ija,ab->ijb", src, mix_matrix(cvec)) % M
                if self_product:
                    upd = (upd * 2) % M
                target.arr[i:, j:] += upd
                target.pending += 1
                if target.pending >= mod_period:
                    target.arr %= M
                    target.pending = 0
            if self_product:
                # products of two cells finalized at this same frontier
                wrote = 0
                for x1 in range(len(cells)):
                    i1, j1, c1 = cells[x1]
                    for x2 in range(x1, len(cells)):
                        i2, j2, c2 = cells[x2]
                        ti, tj = i1 + i2, j1 + j2
                        if ti > D or tj > D:
                            continue
                        mult = 2 if x2 > x1 else 1
                        for al in range(K):
                            v1 = c1[al]
                            if not v1:
                                continue
                            row = table[al]
                            for be in range(K):
                                v2 = c2[be]
                                g = row[be]
                                if v2 and g >= 0:
                                    target.arr[ti, tj, g] += (mult * v1 * v2) % M
                                    wrote += 1
                target.pending += wrote
                if target.pending >= mod_period:
                    target.arr %= M
                    target.pending = 0

    log_level = {p ** e: e for e in range(e_max + 1)}
    out_terms = {}
    umons = profile.u_monomial_list()
    for d in range(1, 2 * D + 1):
        if (d - 1) % g0 == 0:
            fcells = []
            for i in range(max(0, d - D), min(d, D) + 1):
                j = d - i
                if not region[i, j]:
                    continue
                sigma = [0] * K
                if j == 0 and i in log_level:
                    lrow = lam[log_level[i]]
                    for g in range(K):
                        sigma[g] += lrow[g]
                if i == 0 and j in log_level:
                    lrow = lam[log_level[j]]
                    for g in range(K):
                        sigma[g] += lrow[g]
                for e in range(1, e_max + 1):
                    q = qnodes[e]
                    if q.order > d:
                        break
                    cell = q.arr[i, j]
                    lrow = lam[e]
                    for g in range(K):
                        acc = sigma[g]
                        for (al, be) in plan[g]:
                            la = lrow[al]
                            qv = cell[be]
                            if la and qv:
                                acc -= la * int(qv)
                        sigma[g] = acc
                vals = [0] * K
                dirty = False
                for g in range(K):
                    r = sigma[g] % M
                    if r % pS:
                        raise LawConstructionError(
                            "two-variable fixed point lost integrality at (%d, %d)"
                            % (i, j)
                        )
                    v = r // pS
                    if v:
                        vals[g] = v
                        dirty = True
                if dirty:
                    fnode.arr[i, j] = vals
                    fcells.append((i, j, vals))
                    for g, v in enumerate(vals):
                        red = v % amod
                        if red:
                            out_terms[(i, j) + umons[g]] = red
        # finalized cells at this frontier feed the power ladder
        for node in nodes:
            if node.order > d or (d - node.phase) % g0:
                continue
            if not node.deps:
                continue
            if node is fnode:
                cells = fcells
            else:
                cells = []
                for i in range(max(0, d - D), min(d, D) + 1):
                    j = d - i
                    if not region[i, j]:
                        continue
                    vec = node.arr[i, j]
                    if vec.any():
                        cells.append((i, j, [int(v) % M for v in vec]))
            if cells:
                scatter(node, cells, d)
    lin_x = out_terms.get((1, 0) + (0,) * profile.deformation_vars)
    lin_y = out_terms.get((0, 1) + (0,) * profile.deformation_vars)
    if lin_x != 1 or lin_y != 1:
        raise LawConstructionError("two-variable fixed point lost the linear terms")
    return out_terms


def deformation_law_on_region(profile: PrecisionProfile, height: int, region):
    """The two-variable law restricted to a downward-closed cell region.

    The ring pipelines only need F-coefficients on the cells where both
    variable powers survive nilpotence, which is far smaller than the full
    degree-D triangle; region is the boolean (D+1, D+1) mask of wanted
    cells and must be closed under componentwise decrease.
    """
    if height < 2:
        raise LawConstructionError("region solves only apply to heights >= 2")
    terms = _nf_f_terms(profile, height, region)
    return TruncatedSeries(profile, 2, terms, MOD)
