"""Network geometry for cooperative visible-light positioning.

Positions, orientations and device layouts of the ceiling LEDs (anchors) and
the VLC units, plus the connectivity sets that say which LED reaches which
photodetector. Indices are 0-based in memory and 1-based on disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

__all__ = [
    "ScenarioError",
    "LedAnchor",
    "VlcUnit",
    "Connectivity",
    "Scenario",
    "unit_vector",
    "pd_position",
    "displacement",
    "load_scenario",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "bundled_scenario",
    "with_dimension",
    "with_powers",
    "closest_anchor_start",
]

# Inputs already unit-norm to this precision are stored untouched, so that a
# save/load cycle reproduces every bit.
_UNIT_TOL = 1e-14
DATA_DIR = Path(__file__).parent / "data"


class ScenarioError(ValueError):
    """A scenario violates one of its structural invariants."""


def _frozen(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.flags.writeable = False
    return arr


def unit_vector(v) -> np.ndarray:
    """Return ``v`` scaled to unit Euclidean norm.

    Raises
    ------
    ScenarioError
        If ``v`` is the zero vector (or not finite).
    """
    v = np.asarray(v, dtype=float).reshape(3)
    n = float(np.linalg.norm(v))
    if not np.isfinite(n) or n == 0.0:
        raise ScenarioError(f"orientation {v.tolist()} cannot be normalized")
    if abs(n - 1.0) <= _UNIT_TOL:
        return v.copy()
    return v / n


@dataclass(frozen=True)
class LedAnchor:
    """LED transmitter on the ceiling with known pose."""

    position: np.ndarray
    orientation: np.ndarray
    lambertian_order: float = 1.0
    transmit_power: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(self.position, 3))
        object.__setattr__(self, "orientation", _frozen(unit_vector(self.orientation)))
        if not self.lambertian_order >= 1.0:
            raise ScenarioError(f"lambertian_order must be >= 1, got {self.lambertian_order}")
        if not self.transmit_power > 0.0:
            raise ScenarioError(f"transmit_power must be > 0, got {self.transmit_power}")


@dataclass(frozen=True)
class VlcUnit:
    """Mobile unit carrying photodetectors (PDs) and LEDs.

    ``position`` is the ground-truth centre; every PD/LED sits at a fixed
    offset from it.
    """

    position: np.ndarray
    pd_offsets: np.ndarray
    pd_orientations: np.ndarray
    pd_areas: np.ndarray
    led_offsets: np.ndarray
    led_orientations: np.ndarray
    led_orders: np.ndarray
    led_powers: np.ndarray
    noise_sigmas: np.ndarray

    def __post_init__(self):
        K = len(self.pd_offsets)
        L = len(self.led_offsets)
        object.__setattr__(self, "position", _frozen(self.position, 3))
        object.__setattr__(self, "pd_offsets", _frozen(self.pd_offsets, (K, 3)))
        object.__setattr__(self, "led_offsets", _frozen(self.led_offsets, (L, 3)))
        for name, n in (("pd_orientations", K), ("pd_areas", K), ("noise_sigmas", K),
                        ("led_orientations", L), ("led_orders", L), ("led_powers", L)):
            if len(getattr(self, name)) != n:
                raise ScenarioError(f"{name} has length {len(getattr(self, name))}, expected {n}")
        object.__setattr__(
            self, "pd_orientations",
            _frozen([unit_vector(v) for v in self.pd_orientations], (K, 3)))
        object.__setattr__(
            self, "led_orientations",
            _frozen([unit_vector(v) for v in self.led_orientations], (L, 3)))
        for name in ("pd_areas", "led_orders", "led_powers", "noise_sigmas"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if np.any(self.pd_areas <= 0):
            raise ScenarioError("pd_areas must be > 0")
        if np.any(self.noise_sigmas <= 0):
            raise ScenarioError("noise_sigmas must be > 0")
        if np.any(self.led_orders < 1):
            raise ScenarioError("led_orders must be >= 1")
        if np.any(self.led_powers <= 0):
            raise ScenarioError("led_powers must be > 0")

    @property
    def num_pds(self) -> int:
        return len(self.pd_offsets)

    @property
    def num_leds(self) -> int:
        return len(self.led_offsets)


@dataclass(frozen=True)
class Connectivity:
    """Which LEDs reach which PD.

    ``anchor_links[(j, k)]`` is the set of ceiling LEDs seen by PD ``k`` of
    unit ``j``; ``coop_links[(j, k)][i]`` is the set of LEDs of unit ``i``
    seen by the same PD.
    """

    anchor_links: Mapping[tuple[int, int], frozenset[int]] = field(default_factory=dict)
    coop_links: Mapping[tuple[int, int], Mapping[int, frozenset[int]]] = field(default_factory=dict)

    def __post_init__(self):
        anchor = {tuple(key): frozenset(v) for key, v in self.anchor_links.items() if len(v)}
        coop = {}
        for key, per_src in self.coop_links.items():
            inner = {int(i): frozenset(v) for i, v in per_src.items() if len(v)}
            if inner:
                coop[tuple(key)] = inner
        object.__setattr__(self, "anchor_links", anchor)
        object.__setattr__(self, "coop_links", coop)

    def anchors_for(self, j: int, k: int) -> list[int]:
        return sorted(self.anchor_links.get((j, k), ()))

    def coop_for(self, j: int, k: int) -> list[tuple[int, int]]:
        """Sorted ``(i, l)`` pairs of unit LEDs reaching PD ``(j, k)``."""
        per_src = self.coop_links.get((j, k), {})
        return [(i, l) for i in sorted(per_src) for l in sorted(per_src[i])]


@dataclass(frozen=True)
class Scenario:
    anchors: tuple[LedAnchor, ...]
    vlc_units: tuple[VlcUnit, ...]
    connectivity: Connectivity
    dimension: int = 3
    known_heights: tuple[float, ...] | None = None
    room: tuple[tuple[float, float], ...] = ((0.0, 10.0), (0.0, 10.0), (0.0, 5.0))
    notes: str = ""

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(self.anchors))
        object.__setattr__(self, "vlc_units", tuple(self.vlc_units))
        object.__setattr__(self, "room", tuple(tuple(float(v) for v in b) for b in self.room))
        if self.known_heights is not None:
            object.__setattr__(self, "known_heights", tuple(float(h) for h in self.known_heights))
        problems = self.problems()
        if problems:
            raise ScenarioError("; ".join(problems))

    def problems(self) -> list[str]:
        """List invariant violations (empty when the scenario is valid)."""
        out = []
        NL, NV = len(self.anchors), len(self.vlc_units)
        if self.dimension not in (2, 3):
            out.append(f"dimension must be 2 or 3, got {self.dimension}")
        if self.dimension == 2:
            if self.known_heights is None or len(self.known_heights) != NV:
                out.append("dimension 2 requires known_heights with one entry per VLC unit")
        for (j, k), ls in self.connectivity.anchor_links.items():
            if not 0 <= j < NV or not 0 <= k < self.vlc_units[j].num_pds:
                out.append(f"anchor link receiver (vlc {j + 1}, pd {k + 1}) out of range")
                continue
            for l in ls:
                if not 0 <= l < NL:
                    out.append(f"anchor index {l + 1} out of range at (vlc {j + 1}, pd {k + 1})")
        for (j, k), per_src in self.connectivity.coop_links.items():
            if not 0 <= j < NV or not 0 <= k < self.vlc_units[j].num_pds:
                out.append(f"coop link receiver (vlc {j + 1}, pd {k + 1}) out of range")
                continue
            for i, ls in per_src.items():
                if i == j:
                    out.append(f"coop self-link at vlc {j + 1}, pd {k + 1}")
                    continue
                if not 0 <= i < NV:
                    out.append(f"coop source vlc {i + 1} out of range")
                    continue
                for l in ls:
                    if not 0 <= l < self.vlc_units[i].num_leds:
                        out.append(f"led {l + 1} of vlc {i + 1} out of range")
        return out

    @property
    def num_units(self) -> int:
        return len(self.vlc_units)

    @property
    def true_positions(self) -> np.ndarray:
        """Ground-truth unit centres, shape ``(N_V, 3)``."""
        return np.array([u.position for u in self.vlc_units])

    @property
    def free_mask(self) -> np.ndarray:
        """1.0 on coordinates being estimated, 0.0 on known ones."""
        return np.array([1.0, 1.0, 1.0 if self.dimension == 3 else 0.0])

    def lift(self, points) -> np.ndarray:
        """Turn estimates into full 3-D centres.

        Accepts ``(N_V, 3)`` arrays unchanged; ``(N_V, 2)`` arrays get the
        known heights appended.
        """
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] == 3:
            return pts.copy()
        if self.known_heights is None:
            raise ScenarioError("2-D points need known_heights")
        return np.column_stack([pts, np.asarray(self.known_heights)])


def pd_position(scenario: Scenario, j: int, k: int, x_j) -> np.ndarray:
    """Location of PD ``k`` of unit ``j`` when the unit centre is ``x_j``."""
    unit = scenario.vlc_units[j]
    if not 0 <= k < unit.num_pds:
        raise IndexError(f"pd index {k} out of range for vlc {j}")
    return np.asarray(x_j, dtype=float) + unit.pd_offsets[k]


def displacement(from_point, to_point) -> np.ndarray:
    return np.asarray(to_point, dtype=float) - np.asarray(from_point, dtype=float)


# --- (de)serialization -------------------------------------------------------

def _as_list(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def scenario_to_dict(s: Scenario) -> dict:
    anchor_links = [
        {"vlc": j + 1, "pd": k + 1, "anchors": [l + 1 for l in sorted(ls)]}
        for (j, k), ls in sorted(s.connectivity.anchor_links.items())
    ]
    coop_links = [
        {"vlc": j + 1, "pd": k + 1, "source_vlc": i + 1, "leds": [l + 1 for l in sorted(ls)]}
        for (j, k), per_src in sorted(s.connectivity.coop_links.items())
        for i, ls in sorted(per_src.items())
    ]
    return {
        "anchors": [
            {
                "position": _as_list(a.position),
                "orientation": _as_list(a.orientation),
                "lambertian_order": float(a.lambertian_order),
                "transmit_power": float(a.transmit_power),
            }
            for a in s.anchors
        ],
        "vlc_units": [
            {
                "position": _as_list(u.position),
                "pd_offsets": _as_list(u.pd_offsets),
                "pd_orientations": _as_list(u.pd_orientations),
                "pd_areas": _as_list(u.pd_areas),
                "led_offsets": _as_list(u.led_offsets),
                "led_orientations": _as_list(u.led_orientations),
                "led_orders": _as_list(u.led_orders),
                "led_powers": _as_list(u.led_powers),
                "noise_sigmas": _as_list(u.noise_sigmas),
            }
            for u in s.vlc_units
        ],
        "connectivity": {"anchor_links": anchor_links, "coop_links": coop_links},
        "dimension": s.dimension,
        "known_heights": None if s.known_heights is None else list(s.known_heights),
        "room": [list(b) for b in s.room],
        "notes": s.notes,
    }


def _need(d: Mapping, key: str, where: str):
    if key not in d:
        raise ScenarioError(f"{where}: missing field '{key}'")
    return d[key]


def scenario_from_dict(d: Mapping) -> Scenario:
    """Build a scenario from its JSON-compatible form (1-based indices)."""
    anchors = []
    for n, a in enumerate(_need(d, "anchors", "scenario")):
        where = f"anchors[{n}]"
        try:
            anchors.append(LedAnchor(
                position=_need(a, "position", where),
                orientation=_need(a, "orientation", where),
                lambertian_order=float(a.get("lambertian_order", 1.0)),
                transmit_power=float(_need(a, "transmit_power", where)),
            ))
        except ScenarioError as exc:
            raise ScenarioError(f"{where}: {exc}") from None
    units = []
    for n, u in enumerate(_need(d, "vlc_units", "scenario")):
        where = f"vlc_units[{n}]"
        try:
            units.append(VlcUnit(**{
                key: _need(u, key, where)
                for key in ("position", "pd_offsets", "pd_orientations", "pd_areas",
                            "led_offsets", "led_orientations", "led_orders",
                            "led_powers", "noise_sigmas")
            }))
        except ScenarioError as exc:
            raise ScenarioError(f"{where}: {exc}") from None
    conn = _need(d, "connectivity", "scenario")
    anchor_links: dict = {}
    for n, e in enumerate(conn.get("anchor_links", [])):
        where = f"connectivity.anchor_links[{n}]"
        key = (int(_need(e, "vlc", where)) - 1, int(_need(e, "pd", where)) - 1)
        anchor_links.setdefault(key, set()).update(int(l) - 1 for l in _need(e, "anchors", where))
    coop_links: dict = {}
    for n, e in enumerate(conn.get("coop_links", [])):
        where = f"connectivity.coop_links[{n}]"
        key = (int(_need(e, "vlc", where)) - 1, int(_need(e, "pd", where)) - 1)
        src = int(_need(e, "source_vlc", where)) - 1
        coop_links.setdefault(key, {}).setdefault(src, set()).update(
            int(l) - 1 for l in _need(e, "leds", where))
    kwargs = {}
    if "room" in d:
        kwargs["room"] = d["room"]
    return Scenario(
        anchors=anchors,
        vlc_units=units,
        connectivity=Connectivity(anchor_links, coop_links),
        dimension=int(d.get("dimension", 3)),
        known_heights=d.get("known_heights"),
        notes=d.get("notes", ""),
        **kwargs,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(raw)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def bundled_scenario(name: str = "scenario_paper_sec6") -> Scenario:
    """Load one of the scenarios shipped in ``coopvlp/data``.

    ``scenario_paper_sec6`` is the two-unit, four-anchor room in 3-D;
    ``scenario_paper_sec6_2d`` is the same room with known unit heights.
    """
    return load_scenario(DATA_DIR / f"{name}.json")


def with_dimension(scenario: Scenario, dimension: int) -> Scenario:
    """Switch between 3-D and known-height 2-D localization."""
    heights = None
    if dimension == 2:
        heights = tuple(float(u.position[2]) for u in scenario.vlc_units)
    return replace(scenario, dimension=dimension, known_heights=heights)


def with_powers(scenario: Scenario, anchor_power: float | None = None,
                vlc_power: float | None = None) -> Scenario:
    """Copy of ``scenario`` with every anchor and/or unit LED power replaced."""
    anchors = scenario.anchors
    units = scenario.vlc_units
    if anchor_power is not None:
        anchors = tuple(replace(a, transmit_power=float(anchor_power)) for a in anchors)
    if vlc_power is not None:
        units = tuple(replace(u, led_powers=np.full(u.num_leds, float(vlc_power))) for u in units)
    return replace(scenario, anchors=anchors, vlc_units=units)


def closest_anchor_start(scenario: Scenario, j: int) -> np.ndarray:
    """Planar position of the connected anchor nearest to unit ``j``.

    Ties go to the lowest anchor index. The height is the unit's known
    height in 2-D, the floor (lowest room bound) in 3-D.
    """
    linked = sorted({l for (jj, _), ls in scenario.connectivity.anchor_links.items()
                     if jj == j for l in ls})
    if not linked:
        raise ScenarioError(f"vlc {j + 1} has no anchor links")
    truth = scenario.vlc_units[j].position
    dists = [float(np.linalg.norm(scenario.anchors[l].position - truth)) for l in linked]
    best = linked[int(np.argmin(dists))]
    z = scenario.known_heights[j] if scenario.dimension == 2 else scenario.room[2][0]
    xy = scenario.anchors[best].position[:2]
    return np.array([xy[0], xy[1], z])

