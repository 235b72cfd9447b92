"""Measure how far the cyclic-group decomposition is from splitting.

For G = Z/p^k the cohomology ring decomposes rationally into angle-factor
quotients, one per 0 <= j <= k.  Integrally the comparison map has a
finite cokernel; its largest elementary divisor is the torsion exponent
e, and the running conjecture behind these tools is e <= k with equality
patterns stable under precision escalation.
"""

from collections import Counter

from chromatica.cohomology import LawSpec, cyclic_decomposition_divisors
from chromatica.experiments import ExperimentSpec, run_experiment
from chromatica.precision import PrecisionProfile

# One raw measurement first: Z/4 against the height-2 law.
profile = PrecisionProfile(p=2, a=8, deformation_vars=1, u_degree_bound=4,
                           degree_bound=20)
divisors, payload = cyclic_decomposition_divisors(2, LawSpec.for_height(2),
                                                  profile)
print("Z/4, height 2, divisor multiset:", dict(sorted(Counter(divisors).items())))
print("  (a divisor d means a Z/2^d summand; d = 0 summands are hit exactly)")

# The experiment runner wraps the same measurement in a stability protocol:
# it recomputes at two larger profiles and only reports an exponent when
# the sub-threshold divisors agree.
report = run_experiment(ExperimentSpec("cyclic_decomposition", p=2, k=2))
print("\nverdict:", report.verdict)
for n, height_report in sorted(report.heights.items()):
    print("height %d: exponent %d, stable %s" %
          (n, height_report["exponent"], height_report["stable"]))
print("bound e <= k:", report.details["bound"])
print("heights agree:", report.details["height_agreement"])

# The canonical JSON form is byte-stable across runs and machines, which
# is what makes grid outputs diffable.
print("\nreport is %d bytes of canonical JSON" %
      len(report.canonical_json()))
