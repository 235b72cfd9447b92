"""Top-level acceptance checks, one test per headline guarantee.

Run with -v to get one pass/fail line per criterion.  Each test states its
claim in the docstring and pins its own tolerances and budgets; nothing
here is allowed to loosen when runs get slow, so failures mean the package
no longer delivers the guarantee, not that a knob needs tuning.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from chromatica import torsion
from chromatica.cohomology import LawSpec, drinfeld_presentation
from chromatica.experiments import (
    ExperimentSpec,
    default_profile,
    run_experiment,
    run_grid,
)
from chromatica.fgl import get_law
from chromatica.groups import AbelianPGroup
from chromatica.precision import PrecisionProfile
from chromatica.series import TruncatedSeries


def _axiom_suite(law):
    """Unit, commutativity, associativity, and [p] a homomorphism."""
    prof, dom = law.profile, law.domain
    x1 = TruncatedSeries.variable(prof, 1, 0, domain=dom)
    zero1 = TruncatedSeries.zero(prof, 1, domain=dom)
    assert law.F.compose([(0, x1), (1, zero1)]) == x1, "right unit fails"
    assert law.F.compose([(0, zero1), (1, x1)]) == x1, "left unit fails"

    x2 = TruncatedSeries.variable(prof, 2, 0, domain=dom)
    y2 = TruncatedSeries.variable(prof, 2, 1, domain=dom)
    assert law.F.compose([(0, y2), (1, x2)]) == law.F, "commutativity fails"

    x3, y3, z3 = (TruncatedSeries.variable(prof, 3, i, domain=dom)
                  for i in range(3))
    left = law.formal_sum(law.formal_sum(x3, y3), z3)
    right = law.formal_sum(x3, law.formal_sum(y3, z3))
    assert left == right, "associativity fails"

    f = law.p_series()
    f_of_sum = f.compose([(0, law.F)])
    sum_of_f = law.formal_sum(f.compose([(0, x2)]), f.compose([(0, y2)]))
    assert f_of_sum == sum_of_f, "[p] is not a homomorphism"


def test_criterion_01_formal_group_law_axioms():
    """Every shipped law kind satisfies the group law axioms and the
    p-series is a homomorphism, all at degree bound 16, in under a minute."""
    t0 = time.perf_counter()
    laws = [
        get_law("multiplicative", PrecisionProfile(p=2, a=8, degree_bound=16)),
        get_law("multiplicative", PrecisionProfile(p=3, a=8, degree_bound=16)),
        get_law("lubin_tate",
                PrecisionProfile(p=2, a=8, degree_bound=16), height=1),
        get_law("lubin_tate",
                PrecisionProfile(p=2, a=8, deformation_vars=1,
                                 u_degree_bound=4, degree_bound=16), height=2),
        get_law("lubin_tate",
                PrecisionProfile(p=3, a=8, degree_bound=16), height=1),
        get_law("p_typical",
                PrecisionProfile(p=2, a=8, deformation_vars=4,
                                 u_degree_bound=15, degree_bound=16),
                v_count=4),
    ]
    for law in laws:
        _axiom_suite(law)
    assert time.perf_counter() - t0 < 60.0


def test_criterion_02_p_power_angle_factorization():
    """[p^k](x) equals the product of angle factors x * <p>(x) * ... *
    <p^k>(x) as exact truncated series, for every law kind, p in {2, 3},
    and k up to 3, with zero tolerance."""
    for p in (2, 3):
        D = p ** 3 + 4
        laws = [
            get_law("multiplicative",
                    PrecisionProfile(p=p, a=8, degree_bound=D)),
            get_law("lubin_tate",
                    PrecisionProfile(p=p, a=8, deformation_vars=1,
                                     u_degree_bound=4, degree_bound=12),
                    height=2),
            get_law("p_typical",
                    PrecisionProfile(p=p, a=8, deformation_vars=4,
                                     u_degree_bound=max(D, 12) - 1,
                                     degree_bound=max(D, 12)),
                    v_count=4),
        ]
        for law in laws:
            for k in range(4):
                lhs = law.pk_series(k)
                rhs = law.angle_factorization(k)
                assert lhs.terms == rhs.terms, \
                    "factorization fails at p=%d k=%d for %r" % (p, k, law)


def test_criterion_03_cyclic_decomposition_grid():
    """Cyclic groups Z/p^k for p in {2, 3}, k in {1, 2, 3}, at heights 1
    and 2: the decomposition cokernel exponent is stable, at most k, equal
    to 1 when k is 1, and agrees between the two heights; the whole sweep
    finishes inside ten minutes."""
    t0 = time.perf_counter()
    for p in (2, 3):
        for k in (1, 2, 3):
            rep = run_experiment(
                ExperimentSpec("cyclic_decomposition", p=p, k=k))
            tag = "p=%d k=%d" % (p, k)
            assert rep.verdict == "bound-satisfied", (tag, rep.verdict)
            assert all(h["stable"] for h in rep.heights.values()), tag
            exps = rep.details["exponents"]
            assert set(exps) == {"1", "2"}, tag
            assert all(e <= k for e in exps.values()), (tag, exps)
            if k == 1:
                assert all(e == 1 for e in exps.values()), (tag, exps)
            assert rep.details["height_agreement"], (tag, exps)
    assert time.perf_counter() - t0 < 600.0


def test_criterion_04_transfer_torsion_bounds():
    """Transfer cokernels at height 2: rank-two and rank-three elementary
    abelian 2-groups have stable torsion exponent with 2^e at most 4 and
    16 respectively, while cyclic groups are exactly torsion-free."""
    for group, cap in (((1, 1), 4), ((1, 1, 1), 16)):
        rep = run_experiment(ExperimentSpec("transfer_torsion", p=2,
                                            group=group, heights=(2,)))
        h2 = rep.heights[2]
        assert h2["stable"], group
        assert 2 ** h2["exponent"] <= cap, (group, h2["exponent"])
        assert rep.verdict == "bound-satisfied", (group, rep.verdict)
    for group in ((1,), (2,)):
        rep = run_experiment(ExperimentSpec("transfer_torsion", p=2,
                                            group=group, heights=(2,)))
        h2 = rep.heights[2]
        assert h2["stable"] and h2["exponent"] == 0, (group, h2)


def test_criterion_05_level_decomposition_height_agreement():
    """Level-ring decompositions of (Z/2)^2, Z/4, and Z/2 x Z/4 carry the
    same stable torsion exponent at heights 1 and 2; a stable disagreement
    between heights fails the run."""
    for group in ((1, 1), (2,), (2, 1)):
        rep = run_experiment(ExperimentSpec("level_decomposition", p=2,
                                            group=group))
        assert rep.verdict == "confirmed", (group, rep.verdict, rep.details)
        assert all(h["stable"] for h in rep.heights.values()), group
        exps = rep.details["exponents"]
        assert len(set(exps.values())) == 1, (group, exps)


def test_criterion_06_symmetric_group_model_exponent_one():
    """The p-fold symmetric cover model has stable torsion exponent
    exactly 1 at p in {2, 3} and heights 1 and 2."""
    for p in (2, 3):
        rep = run_experiment(ExperimentSpec("sigma_p", p=p))
        assert rep.verdict == "confirmed", (p, rep.verdict)
        for n, h in rep.heights.items():
            assert h["stable"] and h["exponent"] == 1, (p, n, h)


def test_criterion_07_bp_factorization_and_bezout():
    """p-typical factorization at p = 2 with four generating variables and
    degree bound 20: the angle factorization is exact, every Bezout pair
    0 <= t < j <= 3 certifies p in the ideal of the two angle series, and
    every involved series is p-integral."""
    rep = run_experiment(ExperimentSpec("bp_factorization", p=2, k=3,
                                        v_count=4, degree_bound=20))
    assert rep.verdict == "confirmed", rep.details
    checks = rep.details["checks"]
    for j in range(4):
        assert checks["factorization_k%d" % j], j
    for j in range(1, 4):
        for t in range(j):
            assert checks["bezout_j%d_t%d" % (j, t)], (j, t)
    assert checks["p_integrality"]


def test_criterion_08_divisibility_and_drinfeld():
    """At height 2, every maximal-subgroup character class of (Z/2)^2 and
    (Z/2)^3 has a verified transfer-divisibility witness, and the level
    ring of (Z/p)^2 matches the product decomposition rank for p in
    {2, 3}."""
    for group in ((1, 1), (1, 1, 1)):
        rep = run_experiment(ExperimentSpec("divisibility_check", p=2,
                                            group=group))
        assert rep.verdict == "confirmed", (group, rep.verdict)
        witnesses = rep.heights[2]["witnesses"]
        assert len(witnesses) == 2 ** len(group) - 1
        assert all(w["status"] == "witnessed" for w in witnesses), group
    for p in (2, 3):
        report = drinfeld_presentation(AbelianPGroup(p, (1, 1)),
                                       LawSpec.for_height(2),
                                       default_profile(p, 2, 1))
        assert report["status"] == "ok", (p, report)
        assert report["rank_agreement"], (p, report)
        assert report["division_exact"] and report["annihilator_zero"], p


def test_criterion_09_randomized_torsion_lab():
    """One hundred random injective maps pass the diagonal-embedding
    exponent check, and the two-witness pullback produces a verified
    preimage on every constructed instance (with hypothesis violations
    rejected loudly)."""
    rng = np.random.default_rng(20260815)
    prof = PrecisionProfile(p=2, a=6, degree_bound=4)
    esc = prof.escalated()
    M_esc = esc.modulus

    for trial in range(100):
        m = int(rng.integers(2, 7))
        n = m + int(rng.integers(0, 4))
        U = torsion.random_unimodular(n, prof.p, esc.a, rng)
        V = torsion.random_unimodular(m, prof.p, esc.a, rng)
        D = np.zeros((n, m), dtype=np.int64)
        for i in range(m):
            D[i, i] = prof.p ** int(rng.integers(0, prof.a - 1))
        A = U @ D % M_esc @ V % M_esc

        assert torsion.diagonal_exponent_check(
            lambda pr: A % pr.modulus, prof, esc), "trial %d" % trial

    for trial in range(25):
        m = int(rng.integers(2, 6))
        U = torsion.random_unimodular(m, prof.p, prof.a, rng)
        V = torsion.random_unimodular(m, prof.p, prof.a, rng)
        D = np.diag([prof.p ** int(rng.integers(0, prof.a - 1))
                     for _ in range(m)]).astype(np.int64)
        A = U @ D % prof.modulus @ V % prof.modulus
        w = rng.integers(0, prof.modulus, size=m).astype(np.int64)
        x = A @ w % prof.modulus
        c = 2 * int(rng.integers(1, prof.modulus // 2)) + 1
        s_op = (c * np.eye(m, dtype=np.int64)) % prof.modulus
        out = torsion.divisibility_pullback(
            A, x, s_op, int(rng.integers(0, 4)), int(rng.integers(0, 4)),
            prof.p, prof.a)
        assert out["status"] == "witness", "trial %d" % trial
        got = A @ np.array(out["witness"], dtype=np.int64) % prof.modulus
        assert np.array_equal(got, x), "trial %d" % trial

    with pytest.raises(torsion.TorsionError):
        torsion.divisibility_pullback(
            np.array([[4]], dtype=np.int64), np.array([1], dtype=np.int64),
            np.array([[3]], dtype=np.int64), 1, 1, 2, 6)


def test_criterion_10_grid_reports_are_reproducible(tmp_path):
    """Two full default-grid runs, one in-process and one in a fresh
    interpreter, write byte-identical JSON reports and summaries."""
    from chromatica.cli import default_grid_config

    first = tmp_path / "first"
    run_grid(default_grid_config(), first)

    second = tmp_path / "second"
    proc = subprocess.run(
        [sys.executable, "-m", "chromatica.cli", "grid",
         "--out", str(second)],
        capture_output=True, text=True, timeout=900)
    assert proc.returncode == 0, proc.stderr

    names = sorted(f.name for f in first.iterdir())
    assert names == sorted(f.name for f in second.iterdir())
    assert any(name.endswith(".json") for name in names)
    for name in names:
        a = (first / name).read_bytes()
        b = (second / name).read_bytes()
        assert a == b, "%s differs between runs" % name
