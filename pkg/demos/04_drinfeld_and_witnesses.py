"""Full level structures and transfer-divisibility witnesses for (Z/2)^2.

Two of the sharper structural checks.  First: the level ring of the full
group splits the p-power Weierstrass polynomial into linear factors, one
per character of the last cyclic summand, and the product of the factors
annihilates the remainder exactly.  Second: for every maximal subgroup, p
divides the transfer of the top Euler class, with an explicit ring
element witnessing the division inside the transfer quotient.
"""

from chromatica.cohomology import (
    LawSpec,
    divisibility_witness,
    drinfeld_presentation,
    transfer_quotient,
)
from chromatica.groups import AbelianPGroup, maximal_subgroup_characters
from chromatica.precision import PrecisionProfile

group = AbelianPGroup(2, (1, 1))
law = LawSpec.for_height(2)
profile = PrecisionProfile(p=2, a=8, deformation_vars=1, u_degree_bound=4,
                           degree_bound=12)

report = drinfeld_presentation(group, law, profile)
print("status:", report["status"])
print("splitting degree:", report["degree"])
print("level ranks: previous %d, full %d, product %d" %
      (report["rank_level_prev"], report["rank_level_full"],
       report["rank_product"]))
print("rank agreement:", report["rank_agreement"])
print("division exact:", report["division_exact"])
print("remainder annihilated:", report["annihilator_zero"])
print("working precisions:", report["level_precision"])

tq = transfer_quotient(group, law, profile)
print("\ndivisibility witnesses:")
for chi in maximal_subgroup_characters(group):
    out = divisibility_witness(tq, chi)
    print("  character %s: %s" % (tuple(chi.values), out["status"]))
