"""Walk through the asymptotic descriptors for the simplest possible case.

Two populations with R = I, M = 50 and N = 25 each. For white data the
deterministic equivalent, second-order mean and variance of the Euclidean
distance are known in closed form (4, 4 and 192 for real data), so the
printed numbers can be checked by hand. The same pair is then evaluated by
contour quadrature, which should agree to many digits.
"""

import numpy as np

from scm_asym import (Ensemble, PopulationSpectrum, deterministic_equivalent, make_member,
                      pair_from_ensemble, second_order_mean, variance)
from scm_asym.model import from_spectrum
from scm_asym.quadrature import cov_numeric, dbar_numeric, mean2_numeric

M, N = 50, 25
I = from_spectrum(PopulationSpectrum([1.0], [M]))

print(f"Identity populations, M={M}, N={N} (c = M/N = {M / N:g})\n")
for varsigma, field in ((1, "real"), (0, "complex")):
    ens = Ensemble((make_member("a", I, M, varsigma, N=N), make_member("b", I, M, varsigma, N=N)), varsigma)
    pair = pair_from_ensemble(ens, "a", "b")
    print(f"{field} data")
    for kind in ("eu", "ss"):
        d, m, s = deterministic_equivalent(pair, kind), second_order_mean(pair, kind), variance(pair, kind)
        print(f"  {kind}: dbar={d:.6f}  mean2={m:.6f}  Sigma={s:.6f}")
    print()

# closed forms vs the generic quadrature engine
ens = Ensemble((make_member("a", I, M, N=N), make_member("b", I, M, N=N)))
pair = pair_from_ensemble(ens, "a", "b")
print("closed form vs quadrature (EU, real):")
for name, closed, quad in (
    ("dbar", deterministic_equivalent(pair, "eu"), dbar_numeric(pair, "eu")),
    ("mean2", second_order_mean(pair, "eu"), mean2_numeric(pair, "eu")),
    ("Sigma", variance(pair, "eu"), cov_numeric(pair, pair, "eu", "eu")),
):
    print(f"  {name:6s} {closed:.12f}  {quad:.12f}  rel diff {abs(closed - quad) / abs(closed):.1e}")

# the finite-M law: mean dbar + mean2/M, std sqrt(Sigma)/M
print(f"\nPredicted distance at M={M}: {4 + 4 / M:.4f} +- {np.sqrt(192) / M:.4f}")
