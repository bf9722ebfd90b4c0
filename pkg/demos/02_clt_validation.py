"""Check the Gaussian approximation against simulated distances.

Two Toeplitz populations (rho = 0.7 and 0.8) at M = 100 are sampled many
times. For each distance we standardize M(d_hat - dbar - mean2/M)/sqrt(Sigma)
and compare to N(0, 1) with a Kolmogorov-Smirnov test and a few QQ points.
Set TRIALS higher for a sharper picture; 2000 keeps the run under a minute.
"""

import numpy as np
from scipy import stats

from scm_asym.descriptors import gaussian_law
from scm_asym.model import Ensemble, make_member, toeplitz_covariance
from scm_asym.montecarlo import ScalarLaw, ks_critical, qq_points, run_trials_multi

M, TRIALS = 100, 2000


def ensemble(N1, N2):
    return Ensemble((make_member("a", toeplitz_covariance(0.7, M), M, N=N1),
                     make_member("b", toeplitz_covariance(0.8, M), M, N=N2)))


for N1, N2, kinds in ((50, 25, ("eu", "kl", "ss")), (200, 400, ("eu", "kl"))):
    ens = ensemble(N1, N2)
    print(f"N = ({N1}, {N2}), {TRIALS} trials")
    trials = run_trials_multi(ens, [("a", "b")], kinds, TRIALS, seed=11)
    for kind in kinds:
        law = gaussian_law(ens, [("a", "b")], kind)
        x = trials[kind].distances[:, 0]
        mu, sd = float(law.mean[0]), float(law.std()[0])
        ks = stats.kstest((x - mu) / sd, "norm").statistic
        qq = qq_points(x, ScalarLaw(mu, sd))
        picks = qq[[TRIALS // 20, TRIALS // 2, TRIALS - TRIALS // 20]]
        print(f"  {kind}: predicted {mu:.5f} +- {sd:.5f}, observed {x.mean():.5f} +- {x.std(ddof=1):.5f}, "
              f"KS {ks:.4f} (1% critical {ks_critical(TRIALS):.4f})")
        print("       QQ at 5%/50%/95%: " + ", ".join(f"({t:.4f}, {e:.4f})" for t, e in picks))
    print()
