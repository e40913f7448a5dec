"""Lambertian line-of-sight channel and RSS measurement synthesis."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .geometry import Scenario

__all__ = [
    "AnchorSource",
    "CoopSource",
    "RssMeasurement",
    "MeasurementSet",
    "Gaussian",
    "ExponentialSubtractive",
    "LinkTable",
    "lambertian_gain",
    "lambertian_gain_grad",
    "lambertian_gain_and_grad",
    "alpha_anchor",
    "alpha_coop",
    "synthesize",
    "link_keys",
]


@dataclass(frozen=True, order=True)
class AnchorSource:
    l: int


@dataclass(frozen=True, order=True)
class CoopSource:
    i: int
    l: int


Source = Union[AnchorSource, CoopSource]


@dataclass(frozen=True)
class Gaussian:
    """Zero-mean Gaussian noise with std ``scale * sigma_jk``."""

    scale: float = 1.0


@dataclass(frozen=True)
class ExponentialSubtractive:
    """Exponential error subtracted from the true power.

    ``mean=None`` uses the receiving PD's ``sigma_jk`` as the mean.
    """

    mean: float | None = None


NoiseModel = Union[Gaussian, ExponentialSubtractive]


@dataclass(frozen=True)
class RssMeasurement:
    j: int
    k: int
    source: Source
    value: float
    sigma: float

    @property
    def key(self) -> tuple[int, int, Source]:
        return (self.j, self.k, self.source)


@dataclass(frozen=True)
class MeasurementSet:
    measurements: tuple[RssMeasurement, ...]
    noise_model: NoiseModel = field(default_factory=Gaussian)
    rng_seed: int | None = None
    dropped: tuple[tuple[int, int, Source], ...] = ()

    def __len__(self):
        return len(self.measurements)

    def __iter__(self):
        return iter(self.measurements)

    def keys(self) -> list[tuple[int, int, Source]]:
        return [m.key for m in self.measurements]

    def values(self) -> np.ndarray:
        return np.array([m.value for m in self.measurements])

    def lookup(self) -> dict:
        return {m.key: m for m in self.measurements}

    def subtract(self, bias: float) -> "MeasurementSet":
        """Shift every value down by a constant (enforces negative error)."""
        if bias == 0:
            return self
        ms = tuple(RssMeasurement(m.j, m.k, m.source, m.value - bias, m.sigma)
                   for m in self.measurements)
        return MeasurementSet(ms, self.noise_model, self.rng_seed, self.dropped)

    def cooperative_only(self, keep: bool) -> "MeasurementSet":
        """Drop cooperative measurements unless ``keep``."""
        if keep:
            return self
        ms = tuple(m for m in self.measurements if isinstance(m.source, AnchorSource))
        return MeasurementSet(ms, self.noise_model, self.rng_seed, self.dropped)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["j", "k", "source_kind", "i", "l", "value", "sigma"])
            for m in self.measurements:
                if isinstance(m.source, AnchorSource):
                    kind, i, l = "anchor", "", m.source.l + 1
                else:
                    kind, i, l = "coop", m.source.i + 1, m.source.l + 1
                w.writerow([m.j + 1, m.k + 1, kind, i, l, repr(m.value), repr(m.sigma)])

    @classmethod
    def from_csv(cls, path) -> "MeasurementSet":
        out = []
        with open(Path(path), newline="") as fh:
            for row in csv.DictReader(fh):
                if row["source_kind"] == "anchor":
                    src: Source = AnchorSource(int(row["l"]) - 1)
                else:
                    src = CoopSource(int(row["i"]) - 1, int(row["l"]) - 1)
                out.append(RssMeasurement(int(row["j"]) - 1, int(row["k"]) - 1, src,
                                          float(row["value"]), float(row["sigma"])))
        return cls(tuple(out))


# --- channel model -----------------------------------------------------------

def lambertian_gain(d, nt, nr, order, power, area) -> np.ndarray:
    """Received power for source-to-PD vectors ``d`` (rows).

    Broadcasts over leading dimensions. Links outside either 90 degree field
    of view (``d.nt < 0`` or ``d.nr > 0``) receive zero.
    """
    d = np.asarray(d, dtype=float)
    ct = np.einsum("...i,...i->...", d, nt)
    cr = np.einsum("...i,...i->...", d, nr)
    r2 = np.einsum("...i,...i->...", d, d)
    ok = (ct >= 0) & (cr <= 0) & (r2 > 0)
    ct = np.where(ok, ct, 0.0)
    r2 = np.where(ok, r2, 1.0)
    pref = (order + 1) / (2 * np.pi) * power * area
    return np.where(ok, -pref * ct**order * cr / r2 ** ((order + 3) / 2), 0.0)


def lambertian_gain_grad(d, nt, nr, order, power, area) -> np.ndarray:
    """Gradient of :func:`lambertian_gain` with respect to ``d``.

    The receiver-position derivative equals this; the source-position
    derivative is its negative. Zero on broken links.
    """
    return lambertian_gain_and_grad(d, nt, nr, order, power, area)[1]


def lambertian_gain_and_grad(d, nt, nr, order, power, area) -> tuple[np.ndarray, np.ndarray]:
    """:func:`lambertian_gain` and its gradient from one pass over ``d``."""
    d = np.asarray(d, dtype=float)
    ct = np.einsum("...i,...i->...", d, nt)
    cr = np.einsum("...i,...i->...", d, nr)
    r2 = np.einsum("...i,...i->...", d, d)
    ok = (ct >= 0) & (cr <= 0) & (r2 > 0)
    ct = np.where(ok, ct, 0.0)
    cr = np.where(ok, cr, 0.0)
    r2 = np.where(ok, r2, 1.0)
    m = np.asarray(order, dtype=float)
    pref = (m + 1) / (2 * np.pi) * power * area / r2 ** ((m + 3) / 2)
    # m * ct**(m-1) instead of m * ct**m / ct keeps ct = 0 finite
    ctm1 = ct ** (m - 1)
    ctm = ctm1 * ct
    gain = np.where(ok, -pref * ctm * cr, 0.0)
    inner = ((m * ctm1 * cr)[..., None] * nt + ctm[..., None] * nr
             - ((m + 3) * ctm * cr / r2)[..., None] * d)
    grad = np.where(ok[..., None], -pref[..., None] * inner, 0.0)
    return gain, grad


def _check_unit(scenario: Scenario, j: int):
    if not 0 <= j < scenario.num_units:
        raise IndexError(f"vlc index {j} out of range")


def alpha_anchor(scenario: Scenario, j: int, k: int, l: int, x_j) -> float:
    """Noise-free power at PD ``k`` of unit ``j`` (centre ``x_j``) from anchor ``l``."""
    _check_unit(scenario, j)
    unit = scenario.vlc_units[j]
    a = scenario.anchors[l]
    if not 0 <= k < unit.num_pds:
        raise IndexError(f"pd index {k} out of range")
    d = np.asarray(x_j, dtype=float) + unit.pd_offsets[k] - a.position
    return float(lambertian_gain(d, a.orientation, unit.pd_orientations[k],
                                 a.lambertian_order, a.transmit_power, unit.pd_areas[k]))


def alpha_coop(scenario: Scenario, j: int, k: int, i: int, l: int, x_j, x_i) -> float:
    """Noise-free power at PD ``k`` of unit ``j`` from LED ``l`` of unit ``i``."""
    _check_unit(scenario, j)
    _check_unit(scenario, i)
    if i == j:
        raise ValueError("cooperative link needs two distinct units")
    rx, tx = scenario.vlc_units[j], scenario.vlc_units[i]
    if not 0 <= k < rx.num_pds or not 0 <= l < tx.num_leds:
        raise IndexError("pd or led index out of range")
    d = (np.asarray(x_j, dtype=float) + rx.pd_offsets[k]
         - np.asarray(x_i, dtype=float) - tx.led_offsets[l])
    return float(lambertian_gain(d, tx.led_orientations[l], rx.pd_orientations[k],
                                 tx.led_orders[l], tx.led_powers[l], rx.pd_areas[k]))


# --- vectorized link table ---------------------------------------------------

def link_keys(scenario: Scenario) -> list[tuple[int, int, Source]]:
    """Every linked (receiver, source) pair in canonical order.

    Ascending unit ``j``, PD ``k``; anchors by ``l`` before cooperative
    sources by ``(i, l)``.
    """
    conn = scenario.connectivity
    keys = []
    for j, unit in enumerate(scenario.vlc_units):
        for k in range(unit.num_pds):
            keys.extend((j, k, AnchorSource(l)) for l in conn.anchors_for(j, k))
            keys.extend((j, k, CoopSource(i, l)) for i, l in conn.coop_for(j, k))
    return keys


class LinkTable:
    """Per-link parameters stacked into arrays for vectorized evaluation."""

    def __init__(self, scenario: Scenario, keys: Iterable[tuple[int, int, Source]] | None = None):
        keys = list(link_keys(scenario) if keys is None else keys)
        self.scenario = scenario
        self.keys = keys
        Q = len(keys)
        self.rx = np.zeros(Q, dtype=int)
        self.pd = np.zeros(Q, dtype=int)
        self.src = np.full(Q, -1, dtype=int)
        self.led = np.zeros(Q, dtype=int)
        self.rx_offset = np.zeros((Q, 3))
        self.src_point = np.zeros((Q, 3))
        self.nt = np.zeros((Q, 3))
        self.nr = np.zeros((Q, 3))
        self.order = np.ones(Q)
        self.power = np.ones(Q)
        self.area = np.ones(Q)
        self.sigma = np.ones(Q)
        for q, (j, k, source) in enumerate(keys):
            unit = scenario.vlc_units[j]
            self.rx[q], self.pd[q] = j, k
            self.rx_offset[q] = unit.pd_offsets[k]
            self.nr[q] = unit.pd_orientations[k]
            self.area[q] = unit.pd_areas[k]
            self.sigma[q] = unit.noise_sigmas[k]
            if isinstance(source, AnchorSource):
                a = scenario.anchors[source.l]
                self.led[q] = source.l
                self.src_point[q] = a.position
                self.nt[q] = a.orientation
                self.order[q] = a.lambertian_order
                self.power[q] = a.transmit_power
            else:
                tx = scenario.vlc_units[source.i]
                self.src[q], self.led[q] = source.i, source.l
                self.src_point[q] = tx.led_offsets[source.l]
                self.nt[q] = tx.led_orientations[source.l]
                self.order[q] = tx.led_orders[source.l]
                self.power[q] = tx.led_powers[source.l]
        self.is_coop = self.src >= 0

    def __len__(self):
        return len(self.keys)

    def displacements(self, X) -> np.ndarray:
        """Source-to-PD vectors for unit centres ``X`` of shape ``(N_V, 3)``."""
        X = np.asarray(X, dtype=float)
        d = X[self.rx] + self.rx_offset - self.src_point
        if self.is_coop.any():
            d[self.is_coop] -= X[self.src[self.is_coop]]
        return d

    def alpha(self, X) -> np.ndarray:
        return lambertian_gain(self.displacements(X), self.nt, self.nr,
                               self.order, self.power, self.area)

    def alpha_grad(self, X) -> np.ndarray:
        """Derivative of each link's power w.r.t. the receiving unit centre."""
        return lambertian_gain_grad(self.displacements(X), self.nt, self.nr,
                                    self.order, self.power, self.area)

    def jacobian(self, X) -> np.ndarray:
        """Full ``(Q, N_V, 3)`` Jacobian of link powers w.r.t. all centres."""
        return self.alpha_and_jacobian(X)[1]

    def alpha_and_jacobian(self, X) -> tuple[np.ndarray, np.ndarray]:
        a, g = lambertian_gain_and_grad(self.displacements(X), self.nt, self.nr,
                                        self.order, self.power, self.area)
        J = np.zeros((len(self), self.scenario.num_units, 3))
        q = np.arange(len(self))
        J[q, self.rx] += g
        c = q[self.is_coop]
        J[c, self.src[c]] -= g[c]
        return a, J


def _noise_rng(seed: int, q: int) -> np.random.Generator:
    # link q (canonical order, counting FOV-broken links) owns child stream q
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(q,))))


def synthesize(scenario: Scenario, noise_model: NoiseModel = Gaussian(), seed: int = 0) -> MeasurementSet:
    """Draw one noisy RSS value for every linked pair at the true positions.

    Each link in canonical order gets its own PCG64 stream spawned from
    ``SeedSequence(seed)`` with ``spawn_key=(q,)``, so a value depends only
    on ``(seed, q)``. Links outside a field of view are left out and listed
    in ``dropped``.
    """
    table = LinkTable(scenario)
    d = table.displacements(scenario.true_positions)
    ct = np.einsum("ij,ij->i", d, table.nt)
    cr = np.einsum("ij,ij->i", d, table.nr)
    alive = (ct >= 0) & (cr < 0)
    alpha = table.alpha(scenario.true_positions)
    out, dropped = [], []
    for q, key in enumerate(table.keys):
        if not alive[q]:
            dropped.append(key)
            continue
        sigma = float(table.sigma[q])
        rng = _noise_rng(seed, q)
        if isinstance(noise_model, Gaussian):
            noise = noise_model.scale * sigma * rng.standard_normal()
        elif isinstance(noise_model, ExponentialSubtractive):
            mean = sigma if noise_model.mean is None else noise_model.mean
            noise = -mean * rng.standard_exponential()
        else:
            raise TypeError(f"unknown noise model {noise_model!r}")
        out.append(RssMeasurement(key[0], key[1], key[2], float(alpha[q] + noise), sigma))
    return MeasurementSet(tuple(out), noise_model, seed, tuple(dropped))
