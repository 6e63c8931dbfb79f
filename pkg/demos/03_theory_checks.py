"""Monte Carlo checks of the iid missing-sampling model.

1. Each DFT bin of y_d = d (x + q) has mean p X(m) and the same variance
   (p - p^2) E_x + p N delta^2 / 4 in every bin.
2. Holding the threshold fixed, the mean error of a picked bin shrinks by
   1 - lam p per IMAT iteration, so lam = 1/p removes it in one step.
3. A threshold schedule that decays faster than the noise allows lets
   noise bins through; guard_check reports where.
"""
import numpy as np

from dmsparse import analysis, recon
from dmsparse.spectral import ThresholdSchedule

x = np.random.default_rng(0).standard_normal(64)
x /= np.linalg.norm(x)
stats = analysis.validate_theorem1(x, p=0.5, delta=0.1, trials=100_000, seed=7)
print(analysis.format_validation(stats.rows()))

print("\nerror ratio per iteration, p = 0.5:")
frame = analysis.single_bin_frame()
for lam in (0.2, 1.0, 1.5):
    tr = analysis.geometric_error_check(frame, lam, 0.5, trials=100, seed=1)
    print(f"  lam={lam:<4} fitted {tr.ratio:+.3f}  predicted {tr.theory_ratio:+.3f}"
          f"  ({tr.used_pairs} iterations used)")
tr = analysis.geometric_error_check(frame, 2.0, 0.5, trials=100, seed=1)
print(f"  lam=2.0  |e1|/|e0| = {abs(tr.errors[1]) / abs(tr.errors[0]):.4f}")

print("\nguard check, N=960, p=0.5, delta=0.05, gamma=2:")
sigma = np.full(30, recon.coding_sigma(0.5, 960, 0.05))
for alpha in (-0.1, -0.5, -2.0):
    rep = analysis.guard_check(ThresholdSchedule(20.0, alpha), sigma, 2.0)
    where = "never" if rep.ok else f"at k={rep.first_violation}"
    print(f"  alpha={alpha:<5} threshold drops under the noise floor {where}")
