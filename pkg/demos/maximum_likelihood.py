"""
Multi-start maximum likelihood
==============================

The likelihood surface is nonconvex, so many local descents are started
from random points in the room. For a single unit with a known height we
can check the result against a brute-force grid.
"""

import numpy as np

from coopvlp.channel import Gaussian, synthesize
from coopvlp.geometry import bundled_scenario, scenario_from_dict
from coopvlp.mle import MlConfig, estimate_ml, ml_objective

room = bundled_scenario("scenario_paper_sec6_2d")
m = synthesize(room, Gaussian(), seed=2)
est = estimate_ml(room, m, MlConfig(num_starts=30, seed=2))
print("best start", est.start_index, "objective", round(est.objective, 3))
print("errors (cm):", np.round(100 * np.linalg.norm(est.positions - room.true_positions, axis=1), 2))

# One unit, four anchors, known height: scan the floor plan.
single = scenario_from_dict({
    "anchors": [{"position": [x, y, 5.0], "orientation": [0, 0, -1], "lambertian_order": 1,
                 "transmit_power": 1.0} for x, y in ((1, 1), (1, 9), (9, 1), (9, 9))],
    "vlc_units": [{"position": [3.0, 6.0, 1.0], "pd_offsets": [[0, 0, 0]],
                   "pd_orientations": [[0.1, -0.05, 1.0]], "pd_areas": [1e-4],
                   "led_offsets": [], "led_orientations": [], "led_orders": [], "led_powers": [],
                   "noise_sigmas": [3e-9]}],
    "connectivity": {"anchor_links": [{"vlc": 1, "pd": 1, "anchors": [1, 2, 3, 4]}], "coop_links": []},
    "dimension": 2, "known_heights": [1.0],
})
m1 = synthesize(single, Gaussian(), seed=0)
grid = np.linspace(0, 10, 101)
best = min((ml_objective(single, m1, [[x, y, 1.0]]), x, y) for x in grid for y in grid)
est1 = estimate_ml(single, m1)
print(f"grid best {best[0]:.3f} at ({best[1]:.1f}, {best[2]:.1f}); "
      f"multi-start {est1.objective:.3f} at {np.round(est1.positions[0, :2], 3)}")
