"""Build each law kind and inspect the series that drive everything else.

The multiplicative law is the hand-checkable base case, the Lubin-Tate
family adds deformation parameters, and the p-typical law works over the
rationals with named v-variables.  All of them expose the same interface:
a two-variable sum law F, p-power series, and angle factors.
"""

from chromatica.fgl import get_law
from chromatica.precision import PrecisionProfile

# Multiplicative law at p = 2: F(x, y) = x + y + xy, [2](x) = 2x + x^2.
prof = PrecisionProfile(p=2, a=8, degree_bound=10)
mult = get_law("multiplicative", prof)
print("multiplicative sum law:", mult.F.render(main_names=("x", "y")))
print("multiplicative [2]:    ", mult.p_series().render())
print("multiplicative <2>:    ", mult.angle_pk_series(1).render())

# The defining identity behind every decomposition experiment:
# [p^k](x) = x * <p>(x) * <p^2>(x) * ... * <p^k>(x), exactly.
for k in (1, 2, 3):
    assert mult.pk_series(k) == mult.angle_factorization(k)
print("multiplicative factorization holds through [2^3]")

# Height-2 Lubin-Tate law: one deformation variable u1, truncated at
# degree 10 and u-degree 4.  The p-series starts at p*x and picks up the
# u1 * x^p and x^(p^2) terms that encode the height.
lt_prof = PrecisionProfile(p=2, a=8, deformation_vars=1, u_degree_bound=4,
                           degree_bound=10)
lt2 = get_law("lubin_tate", lt_prof, height=2)
print("\nheight-2 [2]:", lt2.p_series().render())
for k in (1, 2):
    assert lt2.pk_series(k) == lt2.angle_factorization(k)
print("height-2 factorization holds through [2^2]")

# p-typical law over the rationals: log and exp are mutually inverse and
# the v-variables appear one per p-power degree.
bp_prof = PrecisionProfile(p=2, a=8, deformation_vars=3, u_degree_bound=11,
                           degree_bound=12)
bp = get_law("p_typical", bp_prof, v_count=3)
vnames = ["v1", "v2", "v3"]
print("\np-typical log:", bp.log_series().render(param_names=vnames))
print("p-typical [2]:", bp.p_series().render(param_names=vnames))

# Bezout witnesses: for t < j, the angle series <p^j> and <p^t> generate
# an ideal containing p itself; the witness series q certifies it.
q = bp.bezout_witness(2, 1)
print("\nbezout witness for (j, t) = (2, 1):",
      q.render(param_names=vnames)[:70], "...")
