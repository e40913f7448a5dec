"""Fisher information and Cramer-Rao lower bounds for unit localization."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .channel import AnchorSource, LinkTable, lambertian_gain_grad
from .geometry import Scenario

__all__ = [
    "Mode",
    "FisherMatrix",
    "CrlbReport",
    "LinkBrokenError",
    "UnlocalizableError",
    "grad_alpha_anchor",
    "grad_alpha_coop",
    "fisher_matrix",
    "crlb",
    "write_crlb_csv",
]

CONDITION_CAP = 1e12


class Mode(str, Enum):
    NONCOOPERATIVE = "noncooperative"
    COOPERATIVE = "cooperative"


class LinkBrokenError(ValueError):
    """Gradient requested for a link outside the field of view."""


class UnlocalizableError(np.linalg.LinAlgError):
    """The Fisher information is singular or too ill-conditioned to invert.

    ``null_directions`` holds an orthonormal basis (columns) of the
    directions carrying (numerically) no information.
    """

    def __init__(self, message: str, null_directions: np.ndarray):
        super().__init__(message)
        self.null_directions = null_directions


@dataclass(frozen=True)
class FisherMatrix:
    matrix: np.ndarray
    mode: Mode
    dim: int = 3  # coordinates per unit


@dataclass(frozen=True)
class CrlbReport:
    total: float
    per_unit: np.ndarray
    mode: Mode


def _link_ok(d, nt, nr) -> bool:
    return float(d @ nt) >= 0 and float(d @ nr) <= 0 and float(d @ d) > 0


def grad_alpha_anchor(scenario: Scenario, j: int, k: int, l: int, x_j) -> np.ndarray:
    """Derivative of the anchor-to-PD power w.r.t. the centre of unit ``j``."""
    unit = scenario.vlc_units[j]
    a = scenario.anchors[l]
    d = np.asarray(x_j, dtype=float) + unit.pd_offsets[k] - a.position
    if not _link_ok(d, a.orientation, unit.pd_orientations[k]):
        raise LinkBrokenError(f"anchor {l} -> (vlc {j}, pd {k}) is outside the field of view")
    return lambertian_gain_grad(d, a.orientation, unit.pd_orientations[k],
                                a.lambertian_order, a.transmit_power, unit.pd_areas[k])


def grad_alpha_coop(scenario: Scenario, j: int, k: int, i: int, l: int,
                    x_j, x_i) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of a unit-to-unit power w.r.t. receiver and transmitter centres."""
    if i == j:
        raise ValueError("cooperative link needs two distinct units")
    rx, tx = scenario.vlc_units[j], scenario.vlc_units[i]
    d = (np.asarray(x_j, dtype=float) + rx.pd_offsets[k]
         - np.asarray(x_i, dtype=float) - tx.led_offsets[l])
    nt, nr = tx.led_orientations[l], rx.pd_orientations[k]
    if not _link_ok(d, nt, nr):
        raise LinkBrokenError(f"(vlc {i}, led {l}) -> (vlc {j}, pd {k}) is outside the field of view")
    g = lambertian_gain_grad(d, nt, nr, tx.led_orders[l], tx.led_powers[l], rx.pd_areas[k])
    return g, -g


def fisher_matrix(scenario: Scenario, mode: Mode | str = Mode.COOPERATIVE,
                  positions=None) -> FisherMatrix:
    """Fisher information for all unit centres at the true positions.

    Each active link adds ``grad grad^T / sigma^2``. Non-cooperative mode keeps
    only anchor links. With ``scenario.dimension == 2`` the height columns are
    dropped, giving a ``2 N_V`` square matrix.
    """
    mode = Mode(mode)
    X = scenario.true_positions if positions is None else np.asarray(positions, dtype=float)
    table = LinkTable(scenario)
    if mode is Mode.NONCOOPERATIVE:
        table = LinkTable(scenario, [key for key in table.keys if isinstance(key[2], AnchorSource)])
    dim = scenario.dimension
    J = table.jacobian(X)[:, :, :dim].reshape(len(table), -1)
    w = 1.0 / table.sigma
    Jw = J * w[:, None]
    F = Jw.T @ Jw
    # exact symmetry regardless of BLAS summation order
    F = 0.5 * (F + F.T)
    return FisherMatrix(F, mode, dim)


def crlb(fim: FisherMatrix, condition_cap: float = CONDITION_CAP) -> CrlbReport:
    """Trace of the inverse Fisher information, total and per unit."""
    F = fim.matrix
    evals, evecs = np.linalg.eigh(F)
    top = float(evals[-1]) if len(evals) else 0.0
    if top <= 0 or evals[0] <= top / condition_cap:
        null = evecs[:, evals <= top / condition_cap]
        raise UnlocalizableError(
            f"unlocalizable configuration: Fisher information has {null.shape[1]} "
            f"deficient direction(s) (condition number above {condition_cap:g})", null)
    inv = (evecs / evals) @ evecs.T
    diag = np.diag(inv)
    per_unit = diag.reshape(-1, fim.dim).sum(axis=1)
    return CrlbReport(float(diag.sum()), per_unit, fim.mode)


def write_crlb_csv(path, rows) -> None:
    """Write ``(mode, power, CrlbReport)`` rows as ``mode,power,total_m2,per_unit_*``."""
    rows = list(rows)
    n = max((len(r[2].per_unit) for r in rows), default=0)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "power", "total_m2"] + [f"per_unit_{u + 1}_m2" for u in range(n)])
        for mode, power, rep in rows:
            w.writerow([Mode(mode).value, repr(float(power)), repr(rep.total)]
                       + [repr(float(v)) for v in rep.per_unit])

