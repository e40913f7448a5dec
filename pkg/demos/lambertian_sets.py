"""
Lambertian sets and gradient projections
========================================

Each RSS measurement confines a unit to the sublevel set of a quasiconvex
function. This script builds one such set, checks that the true position
lies inside, and follows a few gradient projections with Armijo steps from
a poor starting point.
"""

import numpy as np

from coopvlp.channel import lambertian_gain
from coopvlp.feasibility import (
    Halfspace,
    LambertianConstraint,
    Variant,
    armijo_step,
    g_value,
    gamma_from_power,
    gradient_project,
    project_halfspace,
)

anchor = np.array([1.0, 1.0, 5.0])
nt = np.array([0.0, 0.0, -1.0])
nr = np.array([0.3, -0.1, 1.0]) / np.linalg.norm([0.3, -0.1, 1.0])
truth = np.array([2.0, 4.9, 1.0])

# Received power at the truth, lowered a little as a subtractive error would.
alpha = lambertian_gain(truth - anchor, nt, nr, 1.0, 1.0, 1e-4) - 2e-9
gamma = gamma_from_power(alpha, 1.0, 1.0, 1e-4)

orig = LambertianConstraint(anchor, nt, nr, 1.0, gamma, variant=Variant.ORIGINAL)
expanded = LambertianConstraint(anchor, nt, nr, 1.0, gamma, variant=Variant.CASE1)
print(f"gamma = {gamma:.4e}")
print(f"g at truth: original {g_value(orig, truth):+.3e}, expanded {g_value(expanded, truth):+.3e}")

# The expanded function never exceeds the original on the region in front
# of the PD, so its set contains the original one.
rng = np.random.default_rng(0)
pts = rng.uniform([-4, -4, 0], [6, 6, 4.5], (2000, 3))
pts = [p for p in pts if expanded.in_region(p)]
print("expanded <= original on", len(pts), "points:",
      all(g_value(expanded, p) <= g_value(orig, p) + 1e-15 for p in pts))

# Projections: first onto the PD's halfspace, then relaxed gradient steps.
# Far from the anchor g is flat, so the first step overshoots; the next one
# lands well inside the set and the rest leave it unchanged.
x = np.array([8.0, 8.0, 0.5])
x = project_halfspace(Halfspace(anchor, nr), x)
lam = 1.0
for n in range(8):
    lam = armijo_step([expanded], lam, 1e-3, 0.5, x)
    x = gradient_project(expanded, lam, x)
    print(f"step {n}: lambda {lam:.3f}  g {g_value(expanded, x):+.3e}  x {np.round(x, 3)}")
