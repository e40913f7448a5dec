"""Cooperative cyclic (CCGP) and simultaneous (CSGP) gradient projections.

Both solvers sweep the VLC units in ascending order. Each unit first moves
onto the intersection of its anchor halfspaces, then takes relaxed gradient
projections toward its Lambertian sets:

* CCGP averages one projection onto the most violated anchor set and one onto
  the most violated cooperative set, with weights ``(theta_nc, theta_c)``.
* CSGP averages projections onto every set with weights ``kappa``.

Cooperative sets depend on the partner units' latest estimates. Step sizes
follow the Armijo rule and are carried across iterations per unit.
"""

from __future__ import annotations

import csv
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .channel import AnchorSource, MeasurementSet
from .feasibility import (
    DELTA_HALFSPACE,
    EPSILON,
    TOL_FEAS,
    ConstraintBundle,
    Halfspace,
    gamma_from_power,
    project_halfspace_intersection,
)
from .geometry import Scenario, closest_anchor_start

__all__ = [
    "Algorithm",
    "ExecutionMode",
    "StopReason",
    "SolverConfig",
    "SolverTrace",
    "SolverState",
    "UnitConstraints",
    "build_constraints",
    "ccgp_iterate",
    "csgp_iterate",
    "solve",
    "average_residuals",
    "write_trace_csv",
]

log = logging.getLogger(__name__)

PERPENDICULAR = np.array([0.0, 0.0, -1.0])


class Algorithm(str, Enum):
    CCGP = "ccgp"
    CSGP = "csgp"


class ExecutionMode(str, Enum):
    CENTRALIZED = "centralized"
    DISTRIBUTED_SEQUENTIAL = "distributed_sequential"
    DISTRIBUTED_PARALLEL = "distributed_parallel"


class StopReason(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``csgp_weights`` is ``"equal"`` or a mapping ``unit -> {label: kappa}``
    where labels are ``(k, l)`` for anchor sets and ``(k, i, l)`` for
    cooperative sets (0-based). ``init`` is ``"closest_anchor"`` or an
    ``(N_V, 3)`` array. ``bias`` is subtracted from every measurement before
    the sets are built.
    """

    algorithm: Algorithm = Algorithm.CCGP
    lambda0: float = 1.0
    beta: float = 0.001
    xi: float = 0.5
    delta: float = 1e-6
    max_iters: int = 10000
    ccgp_weights: tuple[float, float] = (0.5, 0.5)
    csgp_weights: str | Mapping = "equal"
    mode: ExecutionMode = ExecutionMode.CENTRALIZED
    init: str | np.ndarray = "closest_anchor"
    cooperative: bool = True
    epsilon: float = EPSILON
    bias: float = 0.0
    tol_feas: float = TOL_FEAS
    halfspace_delta: float = DELTA_HALFSPACE

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        object.__setattr__(self, "mode", ExecutionMode(self.mode))
        t_nc, t_c = self.ccgp_weights
        if t_nc < 0 or t_c < 0 or abs(t_nc + t_c - 1) > 1e-12:
            raise ValueError("ccgp weights must be nonnegative and sum to 1")
        if not self.lambda0 > 0 or not 0 < self.beta < 1 or not 0 < self.xi < 1:
            raise ValueError("need lambda0 > 0 and beta, xi in (0, 1)")
        if not self.delta > 0 or self.max_iters < 1:
            raise ValueError("need delta > 0 and max_iters >= 1")
        if not isinstance(self.csgp_weights, str):
            for j, w in self.csgp_weights.items():
                vals = np.array(list(w.values()), dtype=float)
                if (vals < 0).any() or abs(vals.sum() - 1) > 1e-12:
                    raise ValueError(f"kappa weights of unit {j} must be nonnegative and sum to 1")
        elif self.csgp_weights != "equal":
            raise ValueError("csgp_weights must be 'equal' or a mapping")


@dataclass
class UnitConstraints:
    """Everything unit ``j`` needs to update its estimate.

    Anchor sets are fixed. Cooperative sets are stored relative to their
    partner: the source point is ``X[partner] + offset`` for the current
    partner estimate ``X[partner]``.
    """

    unit: int
    noncoop: ConstraintBundle
    halfspaces: list[Halfspace]
    coop_partner: np.ndarray
    coop_offset: np.ndarray
    coop_nr: np.ndarray
    coop_threshold: np.ndarray
    coop_labels: list
    epsilon: float
    mask: np.ndarray
    dropped: list = field(default_factory=list)
    coop: ConstraintBundle | None = None

    def coop_bundle(self, X) -> ConstraintBundle:
        y = np.asarray(X, dtype=float)[self.coop_partner] + self.coop_offset
        return ConstraintBundle(y, self.coop_nr, self.coop_threshold,
                                np.full(len(self.coop_threshold), 3.0),
                                self.epsilon, self.mask, self.coop_labels)

    @property
    def partners(self) -> set[int]:
        return {int(i) for i in self.coop_partner}


def build_constraints(scenario: Scenario, measurements: MeasurementSet, current_estimates,
                      epsilon: float = EPSILON, cooperative: bool = True,
                      bias: float = 0.0) -> list[UnitConstraints]:
    """Per-unit Lambertian sets from RSS measurements.

    Anchor sets use the known-height form when the scenario is 2-D and the
    anchor faces straight down, else the expanded form. Cooperative sets
    always use the expanded form. Measurements giving ``gamma <= 0`` are
    skipped and listed in ``dropped``.
    """
    X = np.asarray(current_estimates, dtype=float)
    meas = measurements.subtract(bias)
    mask = scenario.free_mask
    two_d = scenario.dimension == 2
    per_unit: dict[int, dict] = {j: dict(nc=[], nc_labels=[], hs=[], c=[], c_labels=[], dropped=[])
                                 for j in range(scenario.num_units)}
    for m in meas:
        j, k = m.j, m.k
        rx = scenario.vlc_units[j]
        a, nr, area = rx.pd_offsets[k], rx.pd_orientations[k], rx.pd_areas[k]
        bucket = per_unit[j]
        if isinstance(m.source, AnchorSource):
            led = scenario.anchors[m.source.l]
            y = led.position - a
            bucket["hs"].append(Halfspace(y, nr, mask))
            gamma = gamma_from_power(m.value, led.transmit_power, led.lambertian_order, area)
            if not gamma > 0:
                bucket["dropped"].append(m.key)
                continue
            if two_d and np.allclose(led.orientation, PERPENDICULAR, atol=1e-12):
                h = led.position[2] - (scenario.known_heights[j] + a[2])
                thr, kexp = gamma / h**led.lambertian_order, led.lambertian_order + 3.0
            else:
                thr, kexp = gamma, 3.0
            bucket["nc"].append((y, nr, thr, kexp))
            bucket["nc_labels"].append((k, m.source.l))
        elif cooperative:
            i, l = m.source.i, m.source.l
            tx = scenario.vlc_units[i]
            gamma = gamma_from_power(m.value, tx.led_powers[l], tx.led_orders[l], area)
            if not gamma > 0:
                bucket["dropped"].append(m.key)
                continue
            bucket["c"].append((i, tx.led_offsets[l] - a, nr, gamma))
            bucket["c_labels"].append((k, i, l))

    out = []
    for j in range(scenario.num_units):
        b = per_unit[j]
        if not b["hs"] and not b["c"] and not b["dropped"]:
            raise ValueError(f"unit {j + 1} has no links")
        # sort by label so argmax ties resolve to the lowest (k, i, l)
        nc_order = sorted(range(len(b["nc"])), key=lambda q: b["nc_labels"][q])
        c_order = sorted(range(len(b["c"])), key=lambda q: b["c_labels"][q])
        nc = [b["nc"][q] for q in nc_order]
        c = [b["c"][q] for q in c_order]
        noncoop = ConstraintBundle(
            np.array([t[0] for t in nc]).reshape(-1, 3), np.array([t[1] for t in nc]).reshape(-1, 3),
            [t[2] for t in nc], [t[3] for t in nc], epsilon, mask,
            [b["nc_labels"][q] for q in nc_order])
        uc = UnitConstraints(
            unit=j, noncoop=noncoop, halfspaces=b["hs"],
            coop_partner=np.array([t[0] for t in c], dtype=int),
            coop_offset=np.array([t[1] for t in c]).reshape(-1, 3),
            coop_nr=np.array([t[2] for t in c]).reshape(-1, 3),
            coop_threshold=np.array([t[3] for t in c], dtype=float),
            coop_labels=[b["c_labels"][q] for q in c_order],
            epsilon=epsilon, mask=mask, dropped=b["dropped"])
        uc.coop = uc.coop_bundle(X)
        out.append(uc)
    return out


# --- state and per-unit updates ----------------------------------------------

@dataclass
class SolverState:
    """Iterate ``n`` with per-unit step sizes ``lambdas[j] = (nc, c)``."""

    positions: np.ndarray
    lambdas: np.ndarray
    iteration: int
    constraints: list[UnitConstraints]
    projected: np.ndarray | None = None
    halfspace_failures: int = 0


def _csgp_weights(uc: UnitConstraints, config: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    n_nc, n_c = len(uc.noncoop), len(uc.coop_labels)
    if config.csgp_weights == "equal":
        w = 1.0 / max(n_nc + n_c, 1)
        return np.full(n_nc, w), np.full(n_c, w)
    table = config.csgp_weights.get(uc.unit, {})
    w_nc = np.array([float(table.get(lab, 0.0)) for lab in uc.noncoop.labels])
    w_c = np.array([float(table.get(lab, 0.0)) for lab in uc.coop_labels])
    return w_nc, w_c


def _ccgp_unit(uc: UnitConstraints, x_j, partners, lam, n, config):
    """One CCGP update of a single unit. Returns ``(x_new, x_tilde, lam, ok)``."""
    xt, ok = project_halfspace_intersection(uc.halfspaces, x_j, config.halfspace_delta)
    xt_t = tuple(float(v) for v in xt)
    lam_nc, lam_c = lam
    nc = uc.noncoop
    p_nc = p_c = None
    if len(nc):
        vals = nc.value_list(xt_t)
        r = vals.index(max(vals))
        lam_nc = nc.armijo_row(r, lam_nc, config.beta, config.xi, xt_t)
        p_nc = nc.project_row(r, lam_nc, xt_t)
    if len(uc.coop_labels):
        cb = uc.coop_bundle(partners)
        cand = np.flatnonzero(cb.in_region(xt, 0.0))
        if cand.size:
            vals = cb.value_list(xt_t)
            r = max(cand, key=lambda q: (vals[q], -q))
            lam_c = cb.armijo_row(r, lam_c, config.beta, config.xi, xt_t)
            p_c = cb.project_row(r, lam_c, xt_t)
    t_nc, t_c = config.ccgp_weights
    if p_nc is not None and p_c is not None:
        x_new = t_nc * np.array(p_nc) + t_c * np.array(p_c)
    elif p_nc is not None:
        x_new = np.array(p_nc)
    elif p_c is not None:
        x_new = np.array(p_c)
    else:
        x_new = xt
    return x_new, xt, (lam_nc, lam_c), ok


def _csgp_unit(uc: UnitConstraints, x_j, partners, lam, n, config):
    """One CSGP update of a single unit. Returns ``(x_new, x_tilde, lam, ok)``."""
    xt, ok = project_halfspace_intersection(uc.halfspaces, x_j, config.halfspace_delta)
    lam_j = lam[0]
    nc = uc.noncoop
    has_c = len(uc.coop_labels) > 0
    cb = uc.coop_bundle(partners) if has_c else None
    rows_nc = np.arange(len(nc))
    # coop sets whose value at x_tilde does not exceed their threshold
    rows_c = np.flatnonzero(cb.values(xt) <= cb.threshold) if has_c else np.zeros(0, int)
    lam_j = _armijo_union(nc, rows_nc, cb, rows_c, lam_j, config, xt)
    w_nc, w_c = _csgp_weights(uc, config)
    x_new = np.zeros(3)
    if len(nc):
        x_new = x_new + w_nc @ nc.project(xt, lam_j)
    if has_c:
        x_new = x_new + w_c @ cb.project(xt, lam_j)
    # weights that sum to less than one would pull toward the origin
    total = w_nc.sum() + w_c.sum()
    if total == 0:
        x_new = xt
    return x_new, xt, (lam_j, lam_j), ok


def _armijo_union(nc, rows_nc, cb, rows_c, lam, config, x):
    if cb is None or rows_c.size == 0:
        return nc.armijo(rows_nc, lam, config.beta, config.xi, x)
    if len(nc) == 0:
        return cb.armijo(rows_c, lam, config.beta, config.xi, x)
    joint = ConstraintBundle(
        np.vstack([nc.y, cb.y[rows_c]]), np.vstack([nc.nr, cb.nr[rows_c]]),
        np.concatenate([nc.threshold, cb.threshold[rows_c]]),
        np.concatenate([nc.exponent, cb.exponent[rows_c]]), nc.epsilon, nc.mask)
    return joint.armijo(np.arange(len(joint)), lam, config.beta, config.xi, x)


_UNIT_STEP = {Algorithm.CCGP: _ccgp_unit, Algorithm.CSGP: _csgp_unit}


def _sweep(state: SolverState, config: SolverConfig, step) -> SolverState:
    X = state.positions.copy()
    snapshot = state.positions
    lambdas = state.lambdas.copy()
    proj = np.empty_like(X)
    fails = state.halfspace_failures
    parallel = config.mode is ExecutionMode.DISTRIBUTED_PARALLEL
    for j, uc in enumerate(state.constraints):
        partners = snapshot if parallel else X
        x_new, xt, lam, ok = step(uc, X[j], partners, lambdas[j], state.iteration, config)
        X[j], proj[j], lambdas[j] = x_new, xt, lam
        fails += not ok
    return SolverState(X, lambdas, state.iteration + 1, state.constraints, proj, fails)


def ccgp_iterate(state: SolverState, config: SolverConfig) -> SolverState:
    """One full CCGP sweep over all units."""
    return _sweep(state, config, _ccgp_unit)


def csgp_iterate(state: SolverState, config: SolverConfig) -> SolverState:
    """One full CSGP sweep over all units."""
    return _sweep(state, config, _csgp_unit)


# --- message-passing execution -----------------------------------------------

class _Agent:
    """A unit that only knows its own estimate and what partners broadcast."""

    def __init__(self, uc: UnitConstraints, x0, view0, lam0):
        self.uc = uc
        self.x = np.array(x0, dtype=float)
        self.view = np.array(view0, dtype=float)
        self.lam = np.array(lam0, dtype=float)

    def receive(self, sender: int, position) -> None:
        self.view[sender] = position


def _distributed_sweep(agents: list[_Agent], queue: deque, subscribers, n, config, step):
    proj = np.empty((len(agents), 3))
    fails = 0
    for j, agent in enumerate(agents):
        while queue:
            sender, recipient, pos = queue.popleft()
            agents[recipient].receive(sender, pos)
        x_new, xt, lam, ok = step(agent.uc, agent.x, agent.view, agent.lam, n, config)
        agent.x, agent.lam = x_new, np.array(lam)
        agent.view[j] = x_new
        proj[j] = xt
        fails += not ok
        for r in subscribers[j]:
            queue.append((j, r, x_new.copy()))
    return proj, fails


# --- driver -----------------------------------------------------------------

@dataclass
class SolverTrace:
    """Iterates and diagnostics of one solver run.

    ``iterates`` has shape ``(n + 1, N_V, 3)`` including the start point;
    ``projected`` holds the halfspace-projected points ``x_tilde`` of each
    iteration; ``residual_path[n]`` is ``sum_j |x_j^(n+1) - x_j^(n)|^2``;
    ``step_sizes`` has shape ``(n, N_V, 2)`` with (noncooperative,
    cooperative) step sizes (both equal for CSGP).
    """

    iterates: np.ndarray
    projected: np.ndarray
    residual_path: np.ndarray
    step_sizes: np.ndarray
    stop_reason: StopReason
    dropped: list = field(default_factory=list)
    halfspace_failures: int = 0
    oscillation: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.residual_path)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    def unit_steps(self) -> np.ndarray:
        """``|x_j^(n+1) - x_j^(n)|`` with shape ``(n, N_V)``."""
        return np.linalg.norm(np.diff(self.iterates, axis=0), axis=2)


def _initial_points(scenario: Scenario, config: SolverConfig) -> np.ndarray:
    if isinstance(config.init, str):
        if config.init != "closest_anchor":
            raise ValueError(f"unknown init {config.init!r}")
        return np.array([closest_anchor_start(scenario, j) for j in range(scenario.num_units)])
    X0 = scenario.lift(config.init)
    if X0.shape != (scenario.num_units, 3):
        raise ValueError("explicit init needs one point per unit")
    if scenario.dimension == 2:
        X0[:, 2] = scenario.known_heights
    return X0


def solve(scenario: Scenario, measurements: MeasurementSet, config: SolverConfig | None = None) -> SolverTrace:
    """Run CCGP or CSGP until the stopping rule or ``max_iters``."""
    config = config or SolverConfig()
    X0 = _initial_points(scenario, config)
    ucs = build_constraints(scenario, measurements, X0, config.epsilon,
                            config.cooperative, config.bias)
    step = _UNIT_STEP[config.algorithm]
    lam0 = np.full((scenario.num_units, 2), config.lambda0)
    iterates, projected, residuals, lams = [X0], [], [], []
    reason = StopReason.MAX_ITERS
    fails = 0

    if config.mode is ExecutionMode.DISTRIBUTED_SEQUENTIAL:
        agents = [_Agent(uc, X0[j], X0, lam0[j]) for j, uc in enumerate(ucs)]
        subscribers = [[r for r, uc in enumerate(ucs) if j in uc.partners] for j in range(len(ucs))]
        queue: deque = deque()
        for n in range(config.max_iters):
            proj, f = _distributed_sweep(agents, queue, subscribers, n, config, step)
            X = np.array([a.x for a in agents])
            fails += f
            projected.append(proj)
            lams.append(np.array([a.lam for a in agents]))
            res = float(np.sum((X - iterates[-1]) ** 2))
            iterates.append(X)
            residuals.append(res)
            if res < config.delta:
                reason = StopReason.CONVERGED
                break
    else:
        state = SolverState(X0, lam0, 0, ucs)
        for n in range(config.max_iters):
            state = _sweep(state, config, step)
            projected.append(state.projected)
            lams.append(state.lambdas.copy())
            res = float(np.sum((state.positions - iterates[-1]) ** 2))
            iterates.append(state.positions)
            residuals.append(res)
            if res < config.delta:
                reason = StopReason.CONVERGED
                break
        fails = state.halfspace_failures

    it = np.array(iterates)
    osc = 0.0
    if reason is StopReason.MAX_ITERS:
        tail = it[-min(100, len(it)):]
        osc = float(np.max(np.ptp(tail, axis=0)))
        log.info("%s stopped at max_iters=%d, oscillation amplitude %.3e m",
                 config.algorithm.value, config.max_iters, osc)
    if fails:
        log.warning("halfspace projection hit its iteration cap %d time(s)", fails)
    return SolverTrace(it, np.array(projected), np.array(residuals), np.array(lams), reason,
                       [key for uc in ucs for key in uc.dropped], fails, osc)


def average_residuals(traces: Sequence[SolverTrace]) -> np.ndarray:
    """Average step length per iteration across runs and units.

    ``rho_n = sum_m sum_j |x_j^(n,m) - x_j^(n-1,m)| / (M N_V)``; shorter runs
    contribute zero after they stop.
    """
    if not traces:
        raise ValueError("need at least one trace")
    steps = [t.unit_steps() for t in traces]
    n_v = steps[0].shape[1]
    length = max(s.shape[0] for s in steps)
    total = np.zeros(length)
    for s in steps:
        total[: s.shape[0]] += s.sum(axis=1)
    return total / (len(traces) * n_v)


def write_trace_csv(trace: SolverTrace, path) -> None:
    """Write ``iteration,unit,x,y,z,residual,lambda_nc,lambda_c`` rows.

    Iteration 0 is the start point; ``residual`` is the unit's step length
    into that iterate. Units are 1-based.
    """
    steps = trace.unit_steps()
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "unit", "x", "y", "z", "residual", "lambda_nc", "lambda_c"])
        for n, X in enumerate(trace.iterates):
            for j, p in enumerate(X):
                if n == 0:
                    res, lnc, lc = "", "", ""
                else:
                    res = repr(float(steps[n - 1, j]))
                    lnc, lc = (repr(float(v)) for v in trace.step_sizes[n - 1, j])
                w.writerow([n, j + 1, repr(float(p[0])), repr(float(p[1])), repr(float(p[2])), res, lnc, lc])
