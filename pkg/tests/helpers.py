"""Random but well-posed rooms for property tests."""

import numpy as np

from coopvlp.geometry import scenario_from_dict


def random_scenario(rng, num_units=3, dimension=2, sigma=3e-9):
    """Ceiling anchors facing down and a ring of cooperating units.

    PD 1 of each unit tilts upward and sees every anchor; PD 2 of unit
    ``j + 1`` faces unit ``j``, whose LED points back at it.
    """
    size = rng.uniform(6.0, 12.0, 2)
    height = rng.uniform(3.0, 5.0)
    corners = [[0.15, 0.15], [0.15, 0.85], [0.85, 0.15], [0.85, 0.85]]
    anchors = [{"position": [c[0] * size[0], c[1] * size[1], height], "orientation": [0, 0, -1],
                "lambertian_order": float(rng.choice([1.0, 2.0])),
                "transmit_power": float(rng.uniform(0.5, 5.0))} for c in corners]
    pos = np.column_stack([rng.uniform(0.2, 0.8, num_units) * size[0],
                           rng.uniform(0.2, 0.8, num_units) * size[1],
                           rng.uniform(0.5, 1.5, num_units)])
    units, coop = [], []
    for j in range(num_units):
        nxt, prv = pos[(j + 1) % num_units], pos[(j - 1) % num_units]
        up = np.append(rng.uniform(-0.2, 0.2, 2), 1.0)
        units.append({
            "position": pos[j].tolist(),
            "pd_offsets": [[0, -0.1, 0], [0, 0.1, 0]],
            "pd_orientations": [up.tolist(), (prv - pos[j]).tolist()],
            "pd_areas": [1e-4, 1e-4],
            "led_offsets": [[0.1, 0, 0]],
            "led_orientations": [(nxt - pos[j]).tolist()],
            "led_orders": [1.0],
            "led_powers": [float(rng.uniform(0.5, 2.0))],
            "noise_sigmas": [sigma, sigma],
        })
        coop.append({"vlc": (j + 1) % num_units + 1, "pd": 2, "source_vlc": j + 1, "leds": [1]})
    return scenario_from_dict({
        "anchors": anchors,
        "vlc_units": units,
        "connectivity": {
            "anchor_links": [{"vlc": j + 1, "pd": 1, "anchors": [1, 2, 3, 4]} for j in range(num_units)],
            "coop_links": coop,
        },
        "dimension": dimension,
        "known_heights": pos[:, 2].tolist() if dimension == 2 else None,
        "room": [[0.0, float(size[0])], [0.0, float(size[1])], [0.0, float(height)]],
    })


def single_unit_2d(power=1.0, position=(3.0, 6.0), height=1.0, sigma=3e-9):
    """One unit, one upward PD, four ceiling anchors; height known."""
    corners = [[1, 1], [1, 9], [9, 1], [9, 9]]
    return scenario_from_dict({
        "anchors": [{"position": [c[0], c[1], 5.0], "orientation": [0, 0, -1],
                     "lambertian_order": 1.0, "transmit_power": power} for c in corners],
        "vlc_units": [{"position": [position[0], position[1], height], "pd_offsets": [[0, 0, 0]],
                       "pd_orientations": [[0.1, -0.05, 1.0]], "pd_areas": [1e-4],
                       "led_offsets": [], "led_orientations": [], "led_orders": [], "led_powers": [],
                       "noise_sigmas": [sigma]}],
        "connectivity": {"anchor_links": [{"vlc": 1, "pd": 1, "anchors": [1, 2, 3, 4]}],
                         "coop_links": []},
        "dimension": 2,
        "known_heights": [height],
        "room": [[0.0, 10.0], [0.0, 10.0], [0.0, 5.0]],
    })


def grid_objective(scenario, measurements, n=101, lo=0.0, hi=10.0):
    """Brute-force ML objective on an ``n x n`` planar grid for one unit."""
    from coopvlp.channel import lambertian_gain

    g = np.linspace(lo, hi, n)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, scenario.known_heights[0])], axis=1)
    unit = scenario.vlc_units[0]
    total = np.zeros(len(pts))
    for m in measurements:
        led = scenario.anchors[m.source.l]
        d = pts + unit.pd_offsets[m.k] - led.position
        a = lambertian_gain(d, led.orientation, unit.pd_orientations[m.k], led.lambertian_order,
                            led.transmit_power, unit.pd_areas[m.k])
        total += (m.value - a) ** 2 / m.sigma**2
    return total, pts
