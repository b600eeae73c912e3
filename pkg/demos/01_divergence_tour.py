"""How far apart are two distributions? Four answers to one question.

Slides a unit Gaussian away from a fixed one and prints the closed-form
divergences next to their sample-based estimates, so you can see where the
KDE route starts to pay a tail-truncation tax.

Run: python3 demos/01_divergence_tour.py
"""

import numpy as np

from shiftscope.density import (GaussianDensity, fit_kde, js_divergence,
                                kl_divergence, mmd, renyi_divergence)

rng = np.random.default_rng(0)
reference = GaussianDensity(0.0, 1.0)
sample_ref = rng.normal(0.0, 1.0, 4000)

print(f"{'b':>4} {'KL nats':>9} {'KL kde':>9} {'JS bits':>9} "
      f"{'Renyi2':>9} {'MMD^2':>9}")
for b in (0.0, 0.5, 1.0, 1.5, 2.0):
    moved = GaussianDensity(b, 1.0)
    sample_moved = rng.normal(b, 1.0, 4000)

    kl = kl_divergence(reference, moved).value        # closed form, = b^2/2
    kl_kde = kl_divergence(fit_kde(sample_ref), fit_kde(sample_moved)).value
    js = js_divergence(reference, moved).value
    r2 = renyi_divergence(reference, moved, alpha=2.0).value
    m2 = mmd(sample_ref[:, None], sample_moved[:, None]).unbiased.value

    print(f"{b:>4.1f} {kl:>9.4f} {kl_kde:>9.4f} {js:>9.4f} "
          f"{r2:>9.4f} {m2:>9.4f}")

print()
print("KL is reported in nats, JS and Renyi in bits; JS saturates at 1.0")
print("while KL and Renyi keep growing, which is why the bounded measures")
print("are the ones worth plotting on a dashboard.")
