"""Experiment orchestration over (p, group, height, profile) grids.

Each runner measures a torsion exponent or verifies an identity at a base
profile and re-measures at strictly larger profiles; only values that agree
across profiles count as stable.  Verdicts separate inequality claims
(bound-satisfied) from equality or height-agreement claims (confirmed);
instability demotes a run to inconclusive instead of guessing.

Reports serialize to canonical JSON: sorted keys, fixed separators, no
volatile fields (wall time is kept on the object and printed to stderr by
the CLI, never embedded in the payload).
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from collections import Counter
from pathlib import Path

from .cohomology import (
    LawSpec,
    cyclic_decomposition_divisors,
    divisibility_witness,
    drinfeld_presentation,
    level_decomposition_divisors,
    sigma_p_model,
    transfer_quotient,
)
from .groups import AbelianPGroup, maximal_subgroup_characters
from .precision import PrecisionProfile
from .torsion import ExponentReport

EXPERIMENT_IDS = (
    "cyclic_decomposition",
    "level_decomposition",
    "transfer_torsion",
    "sigma_p",
    "bp_factorization",
    "drinfeld_check",
    "divisibility_check",
)

VERDICT_CONFIRMED = "confirmed"
VERDICT_BOUND = "bound-satisfied"
VERDICT_FALSIFIED = "falsified-at-profile"
VERDICT_INCONCLUSIVE = "inconclusive"

DEFAULT_HEIGHTS = (1, 2)
DEFAULT_ESCALATION = (2, 2, 4)


class ExperimentError(ValueError):
    """Invalid experiment parameters or a violated run precondition."""


def default_profile(p: int, n: int, m1: int) -> PrecisionProfile:
    """Shipped profile for height n and largest cyclic exponent m1."""
    return PrecisionProfile(
        p=p,
        a=8,
        deformation_vars=max(n - 1, 0),
        u_degree_bound=4,
        degree_bound=max(p ** (m1 * n) + 4, 2 * p ** n),
    )


def _canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _hash(payload) -> str:
    return hashlib.sha256(_canonical_json(payload).encode("ascii")).hexdigest()


class ExperimentSpec:
    """Validated parameters of one experiment run."""

    __slots__ = ("experiment", "p", "k", "group", "heights", "v_count",
                 "degree_bound", "overrides", "escalation", "seed")

    def __init__(self, experiment, p=None, k=None, group=None, heights=None,
                 v_count=None, degree_bound=None, overrides=None,
                 escalation=DEFAULT_ESCALATION, seed=0):
        if experiment not in EXPERIMENT_IDS:
            raise ExperimentError("unknown experiment %r" % (experiment,))
        self.experiment = experiment
        self.escalation = tuple(int(x) for x in escalation)
        if len(self.escalation) != 3 or any(x < 0 for x in self.escalation):
            raise ExperimentError("escalation must be three nonnegative steps")
        if self.escalation[0] < 1:
            raise ExperimentError("escalation must raise the precision a")
        self.seed = int(seed)
        self.overrides = dict(overrides or {})
        for key in self.overrides:
            if key not in ("a", "u_degree_bound", "degree_bound"):
                raise ExperimentError("unknown profile override %r" % (key,))

        needs_group = experiment in ("level_decomposition", "transfer_torsion",
                                     "drinfeld_check", "divisibility_check")
        if needs_group:
            if group is None:
                raise ExperimentError("%s needs a group" % experiment)
            self.group = tuple(int(m) for m in group)
            if any(m < 1 for m in self.group):
                raise ExperimentError("group exponents must be positive")
            if list(self.group) != sorted(self.group, reverse=True):
                raise ExperimentError("group exponents must be non-increasing")
            if experiment == "drinfeld_check" and not self.group:
                raise ExperimentError("drinfeld_check needs a nontrivial group")
        else:
            if group is not None:
                raise ExperimentError("%s takes no group" % experiment)
            self.group = None

        if experiment in ("cyclic_decomposition", "bp_factorization"):
            if k is None or int(k) < 0:
                raise ExperimentError("%s needs k >= 0" % experiment)
            self.k = int(k)
            if experiment == "cyclic_decomposition" and self.k < 1:
                raise ExperimentError("cyclic decomposition needs k >= 1")
        else:
            if k is not None:
                raise ExperimentError("%s takes no k" % experiment)
            self.k = None

        if p is None or int(p) < 2:
            raise ExperimentError("every experiment needs a prime p")
        self.p = int(p)

        if experiment == "bp_factorization":
            self.v_count = 4 if v_count is None else int(v_count)
            self.degree_bound = (max(self.p ** self.k + 4, 12)
                                 if degree_bound is None else int(degree_bound))
            if self.v_count < 1:
                raise ExperimentError("bp_factorization needs v_count >= 1")
            if self.degree_bound < self.p ** self.k:
                raise ExperimentError(
                    "degree bound %d cannot see [p^%d]" %
                    (self.degree_bound, self.k))
            if heights is not None:
                raise ExperimentError("bp_factorization takes no heights")
            self.heights = ()
        else:
            self.v_count = None
            self.degree_bound = None
            if heights is None:
                # A full level structure needs the group to embed in the
                # torsion of the formal group, so rank-sensitive checks
                # default to height 2 instead of the usual {1, 2} sweep.
                heights = ((2,) if experiment in ("drinfeld_check",
                                                  "divisibility_check")
                           else DEFAULT_HEIGHTS)
            got = tuple(int(n) for n in heights)
            if not got or any(n < 1 for n in got) or len(set(got)) != len(got):
                raise ExperimentError("heights must be distinct and >= 1")
            self.heights = got

    @property
    def largest_exponent(self) -> int:
        if self.k is not None:
            return self.k
        if self.group:
            return self.group[0]
        return 1

    def profile_for(self, n: int) -> PrecisionProfile:
        prof = default_profile(self.p, n, self.largest_exponent)
        if self.overrides:
            prof = PrecisionProfile(
                p=self.p,
                a=self.overrides.get("a", prof.a),
                deformation_vars=prof.deformation_vars,
                u_degree_bound=self.overrides.get("u_degree_bound",
                                                  prof.u_degree_bound),
                degree_bound=self.overrides.get("degree_bound",
                                                prof.degree_bound),
            )
        return prof

    def as_dict(self) -> dict:
        out = {"experiment": self.experiment, "p": self.p,
               "escalation": list(self.escalation), "seed": self.seed}
        if self.k is not None:
            out["k"] = self.k
        if self.group is not None:
            out["group"] = list(self.group)
        if self.heights:
            out["heights"] = list(self.heights)
        if self.v_count is not None:
            out["v_count"] = self.v_count
        if self.degree_bound is not None:
            out["degree_bound"] = self.degree_bound
        if self.overrides:
            out["profile_overrides"] = dict(sorted(self.overrides.items()))
        return out


class ExperimentReport:
    """Spec echo, per-height evidence, verdict, and artifact hashes."""

    __slots__ = ("spec", "heights", "details", "verdict", "artifact_hashes",
                 "wall_time")

    def __init__(self, spec, heights, details, verdict, artifact_hashes,
                 wall_time):
        self.spec = spec
        self.heights = heights
        self.details = details
        self.verdict = verdict
        self.artifact_hashes = artifact_hashes
        self.wall_time = wall_time

    def canonical_dict(self) -> dict:
        return {
            "spec": self.spec.as_dict(),
            "heights": {str(n): rep for n, rep in sorted(self.heights.items())},
            "details": self.details,
            "verdict": self.verdict,
            "artifact_hashes": dict(sorted(self.artifact_hashes.items())),
        }

    def canonical_json(self) -> str:
        return _canonical_json(self.canonical_dict()) + "\n"


def _merge_verdicts(parts, claim_verdict):
    if any(v == VERDICT_FALSIFIED for v in parts):
        return VERDICT_FALSIFIED
    if any(v == VERDICT_INCONCLUSIVE for v in parts):
        return VERDICT_INCONCLUSIVE
    return claim_verdict


def _comparison_profiles(prof: PrecisionProfile, escalation):
    da, du, dd = escalation
    esc = prof.escalated(da, du, dd)
    cmp_prof = prof.with_bounds(a=prof.a + da,
                                degree_bound=prof.degree_bound + dd)
    return cmp_prof, esc


def _stability_report(divisors_at, prof: PrecisionProfile,
                      escalation) -> ExponentReport:
    """Three-profile exponent measurement.

    divisors_at(profile) -> (divisors, free_threshold).  Raising a alone
    keeps the flattened dimension fixed, so those divisor multisets compare
    entry-by-entry; the full escalation also raises the u-degree bound,
    which changes the dimension, so only its measured exponent is compared.
    """
    cmp_prof, esc_prof = _comparison_profiles(prof, escalation)

    def measure(profile):
        divisors, threshold = divisors_at(profile)
        return sorted(int(d) for d in divisors), int(threshold)

    base_div, base_thr = measure(prof)
    cmp_div, cmp_thr = measure(cmp_prof)
    if cmp_prof.u_monomial_count == esc_prof.u_monomial_count:
        esc_div, esc_thr = cmp_div, cmp_thr
    else:
        esc_div, esc_thr = measure(esc_prof)

    thr = min(base_thr, cmp_thr)
    base_sub = sorted(d for d in base_div if d < thr)
    cmp_sub = sorted(d for d in cmp_div if d < thr)
    common = Counter(base_sub) & Counter(cmp_sub)
    exponent = max(common.elements(), default=0)
    esc_exponent = max((d for d in esc_div if d < min(thr, esc_thr)),
                       default=0)
    stable = base_sub == cmp_sub and esc_exponent == exponent
    free_rank = sum(1 for d in base_div if d >= base_thr)
    profiles = [
        {"profile": prof.as_dict(), "divisors": sorted(base_div),
         "free_threshold": base_thr},
        {"profile": cmp_prof.as_dict(), "divisors": sorted(cmp_div),
         "free_threshold": cmp_thr},
        {"profile": esc_prof.as_dict(), "divisors": sorted(esc_div),
         "free_threshold": esc_thr},
    ]
    return ExponentReport(sorted(base_div), exponent, free_rank, stable,
                          profiles)


def _height_loop(spec: ExperimentSpec, divisors_at_factory):
    """Per-height ExponentReports plus hashed base artifacts."""
    heights = {}
    artifacts = {}

    for n in spec.heights:
        prof = spec.profile_for(n)
        lawspec = LawSpec.for_height(n)

        def divisors_at(profile, _lawspec=lawspec, _n=n):
            divisors, threshold, payload = divisors_at_factory(
                _lawspec, profile)
            key = "height_%d/%s" % (_n, "base"
                                    if profile is prof else "profile_%d_%d_%d"
                                    % (profile.a, profile.u_degree_bound,
                                       profile.degree_bound))
            artifacts[key] = _hash(payload)
            return divisors, threshold

        rep = _stability_report(divisors_at, prof, spec.escalation)
        heights[n] = rep.as_dict()
    return heights, artifacts


def run_cyclic_decomposition(spec: ExperimentSpec) -> ExperimentReport:
    t0 = time.perf_counter()

    def factory(lawspec, profile):
        divisors, payload = cyclic_decomposition_divisors(
            spec.k, lawspec, profile)
        return divisors, profile.a, payload

    heights, artifacts = _height_loop(spec, factory)
    exps = {n: rep["exponent"] for n, rep in heights.items()}
    stable = all(rep["stable"] for rep in heights.values())
    in_bound = all(e <= spec.k for e in exps.values())
    base_case = spec.k != 1 or all(e == 1 for e in exps.values())
    details = {
        "bound": spec.k,
        "exponents": {str(n): e for n, e in sorted(exps.items())},
        "height_agreement": len(set(exps.values())) <= 1,
    }
    if not stable:
        verdict = VERDICT_INCONCLUSIVE
    elif not (in_bound and base_case):
        verdict = VERDICT_FALSIFIED
    else:
        verdict = VERDICT_BOUND
    return ExperimentReport(spec, heights, details, verdict, artifacts,
                            time.perf_counter() - t0)


def appendix_torsion_bound(group: AbelianPGroup) -> int:
    """Recursive exponent bound: peel cyclic factors from the right."""
    exps = group.exponents
    bound = 0
    for i in range(1, len(exps)):
        prev = AbelianPGroup(group.p, exps[:i])
        count = sum(1 for chi in prev.characters()
                    if chi.order <= group.p ** exps[i])
        bound += count
    return bound


def run_transfer_torsion(spec: ExperimentSpec) -> ExperimentReport:
    t0 = time.perf_counter()
    group = AbelianPGroup(spec.p, spec.group)
    bound = appendix_torsion_bound(group)

    def factory(lawspec, profile):
        tq = transfer_quotient(group, lawspec, profile)
        return tq.divisors, profile.a, tq.canonical_payload()

    heights, artifacts = _height_loop(spec, factory)
    exps = {n: rep["exponent"] for n, rep in heights.items()}
    stable = all(rep["stable"] for rep in heights.values())
    details = {
        "bound": bound,
        "exponents": {str(n): e for n, e in sorted(exps.items())},
        "height_agreement": len(set(exps.values())) <= 1,
    }
    if not stable:
        verdict = VERDICT_INCONCLUSIVE
    elif any(e > bound for e in exps.values()):
        verdict = VERDICT_FALSIFIED
    else:
        verdict = VERDICT_BOUND
    return ExperimentReport(spec, heights, details, verdict, artifacts,
                            time.perf_counter() - t0)


def run_level_decomposition(spec: ExperimentSpec) -> ExperimentReport:
    t0 = time.perf_counter()
    group = AbelianPGroup(spec.p, spec.group)

    def factory(lawspec, profile):
        divisors, payload = level_decomposition_divisors(
            group, lawspec, profile)
        return divisors, payload["precision"], payload

    heights, artifacts = _height_loop(spec, factory)
    exps = {n: rep["exponent"] for n, rep in heights.items()}
    stable = all(rep["stable"] for rep in heights.values())
    agree = len(set(exps.values())) <= 1
    details = {
        "exponents": {str(n): e for n, e in sorted(exps.items())},
        "height_agreement": agree,
    }
    if not stable:
        verdict = VERDICT_INCONCLUSIVE
    elif not agree:
        verdict = VERDICT_FALSIFIED
    else:
        verdict = VERDICT_CONFIRMED
    return ExperimentReport(spec, heights, details, verdict, artifacts,
                            time.perf_counter() - t0)


def run_sigma_p(spec: ExperimentSpec) -> ExperimentReport:
    t0 = time.perf_counter()

    def factory(lawspec, profile):
        divisors, payload = sigma_p_model(lawspec, profile)
        return divisors, profile.a, payload

    heights, artifacts = _height_loop(spec, factory)
    exps = {n: rep["exponent"] for n, rep in heights.items()}
    stable = all(rep["stable"] for rep in heights.values())
    details = {"exponents": {str(n): e for n, e in sorted(exps.items())}}
    if not stable:
        verdict = VERDICT_INCONCLUSIVE
    elif any(e != 1 for e in exps.values()):
        verdict = VERDICT_FALSIFIED
    else:
        verdict = VERDICT_CONFIRMED
    return ExperimentReport(spec, heights, details, verdict, artifacts,
                            time.perf_counter() - t0)


def run_bp_factorization(spec: ExperimentSpec) -> ExperimentReport:
    from .fgl import IntegralityError, assert_p_integral, get_law

    t0 = time.perf_counter()
    profile = PrecisionProfile(
        p=spec.p, a=8, deformation_vars=spec.v_count,
        u_degree_bound=max(spec.degree_bound - 1, 1),
        degree_bound=spec.degree_bound)
    checks = {}
    try:
        law = get_law("p_typical", profile, v_count=spec.v_count)
        for j in range(spec.k + 1):
            lhs = law.pk_series(j)
            rhs = law.angle_factorization(j)
            checks["factorization_k%d" % j] = lhs.terms == rhs.terms
        for j in range(1, spec.k + 1):
            for t in range(j):
                law.bezout_witness(j, t)
                checks["bezout_j%d_t%d" % (j, t)] = True
        for m in range(1, spec.k + 1):
            assert_p_integral(law.pk_series(m), "[p^%d]" % m)
        for j in range(1, spec.k + 1):
            assert_p_integral(law.angle_pk_series(j), "<p^%d>" % j)
        checks["p_integrality"] = True
        failure = None
    except (IntegralityError, ArithmeticError, ValueError) as err:
        failure = "%s: %s" % (type(err).__name__, err)
    ok = failure is None and all(checks.values())
    details = {
        "profile": profile.as_dict(),
        "checks": {k: v for k, v in sorted(checks.items())},
    }
    if failure is not None:
        details["failure"] = failure
    artifacts = {"checks": _hash(details)}
    verdict = VERDICT_CONFIRMED if ok else VERDICT_FALSIFIED
    return ExperimentReport(spec, {}, details, verdict, artifacts,
                            time.perf_counter() - t0)


def run_drinfeld_check(spec: ExperimentSpec) -> ExperimentReport:
    t0 = time.perf_counter()
    group = AbelianPGroup(spec.p, spec.group)
    heights = {}
    artifacts = {}
    parts = []
    for n in spec.heights:
        prof = spec.profile_for(n)
        lawspec = LawSpec.for_height(n)
        _, esc_prof = _comparison_profiles(prof, spec.escalation)
        base = drinfeld_presentation(group, lawspec, prof)
        esc = drinfeld_presentation(group, lawspec, esc_prof)
        key_fields = ("status", "division_exact", "rank_agreement",
                      "annihilator_zero", "degree")
        base_ok = (base["status"] == "ok" and base["division_exact"]
                   and base["rank_agreement"] and base["annihilator_zero"])
        esc_ok = (esc["status"] == "ok" and esc["division_exact"]
                  and esc["rank_agreement"] and esc["annihilator_zero"])
        agree = all(base.get(f) == esc.get(f) for f in key_fields)
        if not agree:
            parts.append(VERDICT_INCONCLUSIVE)
        elif not base_ok:
            parts.append(VERDICT_FALSIFIED)
        else:
            parts.append(VERDICT_CONFIRMED)
        heights[n] = {"base": base, "escalated_agrees": agree,
                      "ok": bool(base_ok and esc_ok)}
        artifacts["height_%d/base" % n] = _hash(base)
        artifacts["height_%d/escalated" % n] = _hash(esc)
    details = {"group": list(spec.group)}
    verdict = _merge_verdicts(parts, VERDICT_CONFIRMED)
    return ExperimentReport(spec, heights, details, verdict, artifacts,
                            time.perf_counter() - t0)


def run_divisibility_check(spec: ExperimentSpec) -> ExperimentReport:
    t0 = time.perf_counter()
    group = AbelianPGroup(spec.p, spec.group)
    heights = {}
    artifacts = {}
    parts = []
    for n in spec.heights:
        prof = spec.profile_for(n)
        lawspec = LawSpec.for_height(n)
        _, esc_prof = _comparison_profiles(prof, spec.escalation)
        rows = []
        all_ok = True
        agree = True
        for profile, tag in ((prof, "base"), (esc_prof, "escalated")):
            tq = transfer_quotient(group, lawspec, profile)
            statuses = []
            for chi in maximal_subgroup_characters(group):
                rep = divisibility_witness(tq, chi)
                statuses.append({"character": list(chi.values),
                                 "status": rep["status"]})
            rows.append((tag, statuses))
            artifacts["height_%d/%s" % (n, tag)] = _hash(statuses)
        base_status = [r["status"] for r in rows[0][1]]
        esc_status = [r["status"] for r in rows[1][1]]
        agree = base_status == esc_status
        all_ok = all(s == "witnessed" for s in base_status)
        if not agree:
            parts.append(VERDICT_INCONCLUSIVE)
        elif not all_ok:
            parts.append(VERDICT_FALSIFIED)
        else:
            parts.append(VERDICT_CONFIRMED)
        heights[n] = {"witnesses": rows[0][1], "escalated_agrees": agree}
    details = {"group": list(spec.group),
               "classes": len(maximal_subgroup_characters(group))}
    verdict = _merge_verdicts(parts, VERDICT_CONFIRMED)
    return ExperimentReport(spec, heights, details, verdict, artifacts,
                            time.perf_counter() - t0)


_RUNNERS = {
    "cyclic_decomposition": run_cyclic_decomposition,
    "level_decomposition": run_level_decomposition,
    "transfer_torsion": run_transfer_torsion,
    "sigma_p": run_sigma_p,
    "bp_factorization": run_bp_factorization,
    "drinfeld_check": run_drinfeld_check,
    "divisibility_check": run_divisibility_check,
}


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    return _RUNNERS[spec.experiment](spec)


# -- grid driving -----------------------------------------------------------------


def specs_from_config(config: dict):
    """Ordered (name, ExperimentSpec) pairs from a parsed TOML config."""
    jobs = []
    for experiment in EXPERIMENT_IDS:
        entries = config.get(experiment, [])
        if isinstance(entries, dict):
            entries = [entries]
        for idx, entry in enumerate(entries):
            entry = dict(entry)
            name = entry.pop("name", None) or "%s-%02d" % (experiment, idx)
            spec = ExperimentSpec(
                experiment,
                p=entry.pop("p", None),
                k=entry.pop("k", None),
                group=entry.pop("group", None),
                heights=entry.pop("heights", None),
                v_count=entry.pop("v_count", None),
                degree_bound=entry.pop("degree_bound", None),
                overrides=entry.pop("profile", None),
                escalation=entry.pop("escalation", DEFAULT_ESCALATION),
                seed=entry.pop("seed", 0),
            )
            if entry:
                raise ExperimentError(
                    "unknown keys %r in [%s]" % (sorted(entry), experiment))
            jobs.append((name, spec))
    return jobs


def _summary_rows(name: str, report: ExperimentReport):
    spec = report.spec
    group = "x".join(str(m) for m in spec.group) if spec.group else ""
    if spec.experiment == "cyclic_decomposition":
        group = "k%d" % spec.k
    if report.heights:
        for n in sorted(report.heights):
            rep = report.heights[n]
            exponent = rep.get("exponent", "")
            stable = rep.get("stable", rep.get("escalated_agrees", ""))
            yield [spec.experiment, group, spec.p, n, exponent, stable,
                   report.verdict]
    else:
        yield [spec.experiment, group, spec.p, "", "", "", report.verdict]


def run_grid(config: dict, out_dir, log=None):
    """Run every configured job, writing one JSON per job plus summary.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    budget = config.get("budget", {}).get("seconds")
    started = time.perf_counter()
    rows = []
    reports = []
    for name, spec in specs_from_config(config):
        if budget is not None and time.perf_counter() - started > budget:
            raise ExperimentError(
                "time budget of %ss exceeded before job %s" % (budget, name))
        report = run_experiment(spec)
        (out / (name + ".json")).write_text(report.canonical_json())
        rows.extend(_summary_rows(name, report))
        reports.append((name, report))
        if log is not None:
            log.write("%s: %s (%.1fs)\n" %
                      (name, report.verdict, report.wall_time))
            log.flush()
    with (out / "summary.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment", "group", "p", "n", "exponent",
                         "stable", "verdict"])
        writer.writerows(rows)
    return reports
