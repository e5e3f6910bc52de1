"""Critical values, power and true-pattern rates for one design.

Design: n = 100 subjects split by genotype at MAF 0.25 under Hardy-Weinberg
proportions, a dominant effect of size 0.5 and unit variance.

    python demos/worked_example.py
"""
import numpy as np

from maxcon.core import default_pg_contrasts
from maxcon.power import critical_values, noncentrality, power_S, power_T, priority_index, r_tp
from maxcon.simulate import hwe_group_sizes, pattern_means

C = default_pg_contrasts()
sizes = np.array(hwe_group_sizes(0.25, 100))
D = 1.0 / sizes
gamma = int(sizes.sum()) - sizes.size

crit = critical_values(0.05, C, D, gamma)
print(f"group sizes      {tuple(int(s) for s in sizes)}, dof {gamma}")
print(f"u (MCM)          {crit.u_alpha:.3f} for every contrast")
for name, t in zip(C.names, crit.thresholds_S):
    print(f"K^-1 v {name:<10}{t:.3f}")
print(f"MMCM favours     {C.names[priority_index(C, D)]}")

mu = pattern_means("dominant", 0.5)
print("lambda_T        ", np.round(noncentrality("T", mu, 1.0, C, D), 3))
bt = power_T(mu, 1.0, C, D, gamma, crit=crit)
bs = power_S(mu, 1.0, C, D, gamma, crit=crit)
print(f"power MCM        {bt.beta:.3f} (+/- {bt.est_error:.1e})")
print(f"power MMCM       {bs.beta:.3f} (+/- {bs.est_error:.1e})")

# reject and pick the dominant contrast
for method in ("T", "S"):
    res = r_tp(method, 1, 0.5, 1.0, C, D, gamma, mc_count=400_000, seed=1, crit=crit)
    print(f"R_TP({method})          {res.estimate:.3f} (se {res.se:.4f})")
