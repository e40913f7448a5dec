"""Multi-start maximum-likelihood localization from RSS measurements.

Under independent Gaussian noise the negative log-likelihood of all unit
positions is, up to constants, the weighted sum of squared residuals

    sum_{j,k} h_jk(x) / sigma_jk^2

where ``h_jk`` collects the squared residuals of every measurement taken by
PD ``k`` of unit ``j``. The objective is nonconvex, so local descents are
started from many random points in a box and the best local optimum wins.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .channel import LinkTable, MeasurementSet
from .geometry import Scenario

__all__ = ["MlConfig", "MlEstimate", "MlError", "cost_h", "ml_objective",
           "ml_objective_grad", "estimate_ml"]

log = logging.getLogger(__name__)


class MlError(RuntimeError):
    """Every local descent failed."""


@dataclass(frozen=True)
class MlConfig:
    """Multi-start settings; ``bounds`` holds one ``(low, high)`` per axis."""

    num_starts: int = 100
    bounds: tuple[tuple[float, float], ...] = ((0.0, 10.0), (0.0, 10.0), (0.0, 10.0))
    max_iters: int = 500
    grad_tol: float = 1e-10
    seed: int = 0
    f_tol: float = 1e-12

    def __post_init__(self):
        if self.num_starts < 1:
            raise ValueError("num_starts must be >= 1")
        if len(self.bounds) != 3 or any(not lo < hi for lo, hi in self.bounds):
            raise ValueError("bounds need three non-degenerate (low, high) pairs")
        if self.max_iters < 1 or not self.grad_tol > 0 or not self.f_tol > 0:
            raise ValueError("max_iters must be >= 1 and tolerances > 0")


@dataclass(frozen=True)
class MlEstimate:
    positions: np.ndarray
    objective: float
    start_index: int
    converged: bool


class _Objective:
    """Weighted least squares over a fixed measurement set, in free coordinates."""

    def __init__(self, scenario: Scenario, measurements: MeasurementSet):
        self.scenario = scenario
        self.table = LinkTable(scenario, measurements.keys())
        self.values = measurements.values()
        self.weights = 1.0 / np.array([m.sigma for m in measurements]) ** 2
        self.dim = scenario.dimension
        self.template = scenario.lift(np.zeros((scenario.num_units, 2))) if self.dim == 2 \
            else np.zeros((scenario.num_units, 3))

    def positions(self, theta) -> np.ndarray:
        X = self.template.copy()
        X[:, : self.dim] = np.reshape(theta, (-1, self.dim))
        return X

    def __call__(self, theta):
        X = self.positions(theta)
        a, J = self.table.alpha_and_jacobian(X)
        r = self.values - a
        f = float(np.sum(self.weights * r * r))
        J = J[:, :, : self.dim].reshape(len(r), -1)
        return f, -2.0 * (self.weights * r) @ J


def _as_positions(scenario: Scenario, x) -> np.ndarray:
    X = scenario.lift(x)
    if X.shape != (scenario.num_units, 3):
        raise ValueError(f"need one position per unit, got shape {np.shape(x)}")
    return X


def cost_h(scenario: Scenario, measurements: MeasurementSet, j: int, k: int, x) -> float:
    """Sum of squared residuals of the measurements taken by PD ``k`` of unit ``j``."""
    ms = [m for m in measurements if m.j == j and m.k == k]
    if not ms:
        return 0.0
    X = _as_positions(scenario, x)
    table = LinkTable(scenario, [m.key for m in ms])
    r = np.array([m.value for m in ms]) - table.alpha(X)
    return float(r @ r)


def ml_objective(scenario: Scenario, measurements: MeasurementSet, x) -> float:
    """``sum_jk h_jk(x) / sigma_jk^2`` for positions ``x`` (``(N_V, 3)`` or ``(N_V, 2)``)."""
    X = _as_positions(scenario, x)
    obj = _Objective(scenario, measurements)
    r = obj.values - obj.table.alpha(X)
    return float(np.sum(obj.weights * r * r))


def ml_objective_grad(scenario: Scenario, measurements: MeasurementSet, x) -> np.ndarray:
    """Gradient of :func:`ml_objective` w.r.t. all unit centres, shape ``(N_V, 3)``."""
    X = _as_positions(scenario, x)
    obj = _Objective(scenario, measurements)
    r = obj.values - obj.table.alpha(X)
    return np.einsum("q,qnd->nd", -2.0 * obj.weights * r, obj.table.jacobian(X))


def _start_rng(seed: int, s: int) -> np.random.Generator:
    # start s draws from its own child stream of the master seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(s,))))


def estimate_ml(scenario: Scenario, measurements: MeasurementSet,
                config: MlConfig | None = None) -> MlEstimate:
    """Best of ``num_starts`` box-constrained quasi-Newton descents.

    Starts are uniform in ``config.bounds`` (free coordinates only). Ties in
    the objective go to the lowest start index.
    """
    config = config or MlConfig()
    obj = _Objective(scenario, measurements)
    dim, n = scenario.dimension, scenario.num_units
    lo = np.array([b[0] for b in config.bounds[:dim]] * n)
    hi = np.array([b[1] for b in config.bounds[:dim]] * n)
    box = list(zip(lo, hi))
    best = None
    for s in range(config.num_starts):
        theta0 = _start_rng(config.seed, s).uniform(lo, hi)
        try:
            res = minimize(obj, theta0, jac=True, method="L-BFGS-B", bounds=box,
                           options={"maxiter": config.max_iters, "gtol": config.grad_tol,
                                    "ftol": config.f_tol})
        except (FloatingPointError, ValueError) as exc:
            log.debug("start %d failed: %s", s, exc)
            continue
        if not np.isfinite(res.fun):
            continue
        theta = np.clip(res.x, lo, hi)
        f = obj(theta)[0]
        if best is None or f < best[0]:
            best = (f, s, theta, bool(res.success))
    if best is None:
        raise MlError(f"all {config.num_starts} local descents diverged")
    f, s, theta, ok = best
    return MlEstimate(obj.positions(theta), f, s, ok)
