"""Shared generators for the test suite."""

import random
from fractions import Fraction

from chromatica import PrecisionProfile, TruncatedSeries


def random_key(rng: random.Random, profile: PrecisionProfile, nvars: int):
    while True:
        main = [rng.randrange(0, profile.degree_bound + 1) for _ in range(nvars)]
        if sum(main) <= profile.degree_bound:
            break
    while True:
        upart = [
            rng.randrange(0, profile.u_degree_bound + 1)
            for _ in range(profile.deformation_vars)
        ]
        if sum(upart) <= profile.u_degree_bound:
            break
    return tuple(main) + tuple(upart)


def random_series(
    rng: random.Random,
    profile: PrecisionProfile,
    nvars: int,
    domain: str = "mod",
    nterms: int = 6,
    constant_free: bool = False,
):
    terms = {}
    for _ in range(nterms):
        key = random_key(rng, profile, nvars)
        if constant_free and not any(key[:nvars]):
            continue
        if domain == "mod":
            terms[key] = rng.randrange(0, profile.modulus)
        else:
            terms[key] = Fraction(rng.randrange(-20, 21), rng.choice([1, 2, 3, 5, 7]))
    return TruncatedSeries(profile, nvars, terms, domain)
