"""Monte Carlo experiments: power sweeps, error curves and residual traces.

An :class:`ExperimentPlan` names a scenario, a transmit-power sweep, a noise
model, the number of runs and the estimators to compare. :func:`run_experiment`
writes plot-ready CSV files plus ``manifest.json``:

``crlb_sweep.csv``
    Bound on the mean squared error, both modes, per sweep value.
``rmse_sweep.csv``
    Root mean squared and mean error per estimator, overall and per unit.
``errors.csv``
    Every run's estimate and error, so the sweep file can be re-aggregated.
``residuals_p<power>.csv``
    Average step length per iteration of the iterative solvers.

Every row depends only on (scenario, plan, seed). Runs take their noise and
start-point streams from ``SeedSequence(seed, spawn_key=(run, stream))``,
so run ``m`` sees the same standard draws at every sweep value.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy

from . import __version__
from .bounds import Mode, UnlocalizableError, CrlbReport, crlb, fisher_matrix, write_crlb_csv
from .channel import ExponentialSubtractive, Gaussian, LinkTable, NoiseModel, synthesize
from .geometry import (DATA_DIR, Scenario, ScenarioError, load_scenario, scenario_from_dict,
                       with_powers)
from .mle import MlConfig, estimate_ml
from .solvers import Algorithm, SolverConfig, solve

__all__ = [
    "PlanError",
    "AlgorithmSpec",
    "ExperimentPlan",
    "ValidationReport",
    "default_sweep",
    "load_plan",
    "bundled_plan_path",
    "resolve_scenario_path",
    "validate_scenario",
    "validate_plan",
    "crlb_sweep",
    "run_experiment",
    "read_errors",
    "aggregate_errors",
]

log = logging.getLogger(__name__)

ALGORITHMS = ("CRLB", "MLE", "CCGP", "CSGP")
ITERATIVE = ("CCGP", "CSGP")
SWEEP_VARIABLES = ("anchor_power", "vlc_power")
NOISE_STREAM, MLE_STREAM = 0, 1


def _among(v: float, values) -> bool:
    # sweep values typed into a plan rarely match a log grid to the last bit
    return any(math.isclose(v, w, rel_tol=1e-9) for w in values)


class PlanError(ValueError):
    """An experiment plan is malformed or violates an invariant."""


def default_sweep() -> tuple[float, ...]:
    """Ten log-spaced powers from 0.1 W to 10 W."""
    return tuple(float(v) for v in np.logspace(-1, 1, 10))


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    cooperative: bool = True

    @property
    def label(self) -> str:
        return f"{self.name.lower()}_{'coop' if self.cooperative else 'noncoop'}"


@dataclass(frozen=True)
class ExperimentPlan:
    """One sweep experiment.

    ``scenario_path`` may be relative to the plan file or the bare name of a
    bundled scenario. ``solver`` and ``mle`` hold keyword overrides for
    :class:`SolverConfig` and :class:`MlConfig`. ``residual_powers`` picks
    the sweep values that get a residual file (all of them by default).
    """

    scenario_path: str
    sweep_variable: str = "anchor_power"
    sweep_values: tuple[float, ...] = field(default_factory=default_sweep)
    noise: Mapping = field(default_factory=lambda: {"model": "gaussian", "scale": 1.0})
    monte_carlo_runs: int = 10
    algorithms: tuple[AlgorithmSpec, ...] = (AlgorithmSpec("CRLB"),)
    seed: int = 0
    output_dir: str = "results"
    solver: Mapping = field(default_factory=dict)
    mle: Mapping = field(default_factory=dict)
    residual_powers: tuple[float, ...] | None = None
    base_dir: str = "."

    def __post_init__(self):
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))
        object.__setattr__(self, "algorithms", tuple(
            a if isinstance(a, AlgorithmSpec) else AlgorithmSpec(**a) for a in self.algorithms))
        if self.residual_powers is not None:
            object.__setattr__(self, "residual_powers",
                               tuple(float(v) for v in self.residual_powers))
        problems = self.problems()
        if problems:
            raise PlanError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.sweep_variable not in SWEEP_VARIABLES:
            out.append(f"sweep.variable must be one of {SWEEP_VARIABLES}, got {self.sweep_variable!r}")
        if not self.sweep_values:
            out.append("sweep.values is empty")
        if any(not (v > 0 and math.isfinite(v)) for v in self.sweep_values):
            out.append("sweep.values must be finite and > 0")
        if int(self.monte_carlo_runs) != self.monte_carlo_runs or self.monte_carlo_runs < 1:
            out.append(f"monte_carlo_runs must be an integer >= 1, got {self.monte_carlo_runs}")
        if not self.algorithms:
            out.append("algorithms is empty")
        for a in self.algorithms:
            if a.name not in ALGORITHMS:
                out.append(f"unknown algorithm {a.name!r} (expected one of {ALGORITHMS})")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            out.append("algorithms lists the same (name, cooperative) pair twice")
        if self.residual_powers is not None:
            missing = [p for p in self.residual_powers if not _among(p, self.sweep_values)]
            if missing:
                out.append(f"residual_powers {missing} are not sweep values")
        try:
            noise_model(self.noise)
        except PlanError as exc:
            out.append(str(exc))
        try:
            self.solver_config(Algorithm.CCGP, True)
            self.mle_config(0)
        except (TypeError, ValueError) as exc:
            out.append(f"solver/mle settings: {exc}")
        return out

    def solver_config(self, algorithm, cooperative: bool) -> SolverConfig:
        kw = dict(self.solver)
        if "ccgp_weights" in kw:
            kw["ccgp_weights"] = tuple(kw["ccgp_weights"])
        return SolverConfig(algorithm=algorithm, cooperative=cooperative, **kw)

    def mle_config(self, seed: int) -> MlConfig:
        kw = dict(self.mle)
        if "bounds" in kw:
            kw["bounds"] = tuple(tuple(float(v) for v in b) for b in kw["bounds"])
        return MlConfig(seed=seed, **kw)

    @property
    def iterative(self) -> tuple[AlgorithmSpec, ...]:
        return tuple(a for a in self.algorithms if a.name in ITERATIVE)

    @property
    def estimators(self) -> tuple[AlgorithmSpec, ...]:
        return tuple(a for a in self.algorithms if a.name != "CRLB")

    def to_dict(self) -> dict:
        return {
            "scenario_path": self.scenario_path,
            "sweep": {"variable": self.sweep_variable, "values": list(self.sweep_values)},
            "noise": dict(self.noise),
            "monte_carlo_runs": int(self.monte_carlo_runs),
            "algorithms": [asdict(a) for a in self.algorithms],
            "seed": int(self.seed),
            "output_dir": self.output_dir,
            "solver": dict(self.solver),
            "mle": dict(self.mle),
            "residual_powers": None if self.residual_powers is None else list(self.residual_powers),
        }


def noise_model(spec: Mapping) -> NoiseModel:
    """Build a noise model from ``{"model": "gaussian", "scale": s}`` or
    ``{"model": "exponential_subtractive", "mean": mu}`` (``mean`` null uses
    each PD's sigma)."""
    kind = str(spec.get("model", "")).lower()
    if kind == "gaussian":
        scale = float(spec.get("scale", 1.0))
        if not scale >= 0:
            raise PlanError("noise.scale must be >= 0")
        return Gaussian(scale)
    if kind in ("exponential_subtractive", "exponential"):
        mean = spec.get("mean")
        if mean is not None and not float(mean) > 0:
            raise PlanError("noise.mean must be > 0 or null")
        return ExponentialSubtractive(None if mean is None else float(mean))
    raise PlanError(f"noise.model must be 'gaussian' or 'exponential_subtractive', got {kind!r}")


def plan_from_dict(d: Mapping, base_dir=".") -> ExperimentPlan:
    if "scenario_path" not in d:
        raise PlanError("plan: missing field 'scenario_path'")
    sweep = d.get("sweep", {})
    known = {"scenario_path", "sweep", "noise", "monte_carlo_runs", "algorithms", "seed",
             "output_dir", "solver", "mle", "residual_powers", "notes"}
    extra = sorted(set(d) - known)
    if extra:
        raise PlanError(f"plan: unknown field(s) {extra}")
    try:
        return ExperimentPlan(
            scenario_path=str(d["scenario_path"]),
            sweep_variable=sweep.get("variable", "anchor_power"),
            sweep_values=sweep.get("values") or default_sweep(),
            noise=d.get("noise", {"model": "gaussian", "scale": 1.0}),
            monte_carlo_runs=d.get("monte_carlo_runs", 10),
            algorithms=d.get("algorithms", [{"name": "CRLB"}]),
            seed=int(d.get("seed", 0)),
            output_dir=str(d.get("output_dir", "results")),
            solver=d.get("solver", {}),
            mle=d.get("mle", {}),
            residual_powers=d.get("residual_powers"),
            base_dir=str(base_dir),
        )
    except TypeError as exc:
        raise PlanError(f"plan: {exc}") from None


def load_plan(path) -> ExperimentPlan:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise PlanError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return plan_from_dict(raw, base_dir=path.parent)


def bundled_plan_path(name: str = "plan_desk") -> Path:
    return DATA_DIR / f"{name}.json"


def resolve_scenario_path(plan: ExperimentPlan) -> Path:
    """Plan-relative path first, then a bundled scenario of that name."""
    p = Path(plan.scenario_path)
    candidates = [p] if p.is_absolute() else [Path(plan.base_dir) / p, p]
    candidates += [DATA_DIR / p.name, DATA_DIR / f"{p.name}.json"]
    for c in candidates:
        if c.is_file():
            return c
    raise ScenarioError(f"scenario {plan.scenario_path!r} not found")


# --- validation ---------------------------------------------------------------

@dataclass
class ValidationReport:
    path: str
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    summary: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def text(self) -> str:
        lines = [f"{self.path}: {'valid' if self.ok else 'INVALID'}"]
        lines += [f"  {s}" for s in self.summary]
        lines += [f"  error: {e}" for e in self.errors]
        lines += [f"  warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def _orientation_problems(raw) -> list[str]:
    # scan every orientation first so that all zero vectors get named at once
    out = []
    if not isinstance(raw, Mapping):
        return out
    for n, a in enumerate(raw.get("anchors", []) or []):
        v = a.get("orientation") if isinstance(a, Mapping) else None
        if v is not None and _is_zero(v):
            out.append(f"anchors[{n}].orientation is the zero vector")
    for n, u in enumerate(raw.get("vlc_units", []) or []):
        if not isinstance(u, Mapping):
            continue
        for key in ("pd_orientations", "led_orientations"):
            for k, v in enumerate(u.get(key, []) or []):
                if _is_zero(v):
                    out.append(f"vlc_units[{n}].{key}[{k}] is the zero vector")
    return out


def _is_zero(v) -> bool:
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        return False
    return arr.shape == (3,) and not np.any(arr)


def _scenario_warnings(s: Scenario) -> list[str]:
    out = []
    table = LinkTable(s)
    d = table.displacements(s.true_positions)
    ct = np.einsum("ij,ij->i", d, table.nt)
    cr = np.einsum("ij,ij->i", d, table.nr)
    for q in np.flatnonzero(~((ct >= 0) & (cr < 0))):
        j, k, src = table.keys[q]
        out.append(f"link {src} -> (vlc {j + 1}, pd {k + 1}) is outside the field of view "
                   "at the true positions")
    linked = {j for (j, _) in s.connectivity.anchor_links}
    for j in range(s.num_units):
        if j not in linked:
            out.append(f"vlc {j + 1} has no anchor links")
    for j, u in enumerate(s.vlc_units):
        for ax, (lo, hi) in enumerate(s.room):
            if not lo <= u.position[ax] <= hi:
                out.append(f"vlc {j + 1} lies outside the room along axis {ax}")
    for mode in Mode:
        try:
            crlb(fisher_matrix(s, mode))
        except UnlocalizableError as exc:
            out.append(f"{mode.value} bound: {exc}")
    return out


def validate_scenario(path) -> ValidationReport:
    """Parse a scenario file and check every structural invariant.

    Errors cover parse failures (with line and column), missing fields,
    zero orientations, nonpositive areas/powers/noise levels, index ranges
    and cooperative self-links. Warnings flag links outside the field of
    view at the true positions and unlocalizable bounds.
    """
    report = ValidationReport(str(path))
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        report.errors.append(f"cannot read file: {exc}")
        return report
    except json.JSONDecodeError as exc:
        report.errors.append(f"parse failure at line {exc.lineno} column {exc.colno}: {exc.msg}")
        return report
    zeros = _orientation_problems(raw)
    report.errors.extend(zeros)
    try:
        s = scenario_from_dict(raw)
    except ScenarioError as exc:
        msg = str(exc)
        if not zeros or "cannot be normalized" not in msg:
            report.errors.append(msg)
        return report
    except (TypeError, ValueError, AttributeError, KeyError) as exc:
        report.errors.append(f"malformed field: {exc}")
        return report
    n_anchor = sum(len(v) for v in s.connectivity.anchor_links.values())
    n_coop = sum(len(ls) for per in s.connectivity.coop_links.values() for ls in per.values())
    report.summary.append(f"{len(s.anchors)} anchors, {s.num_units} VLC units, "
                          f"{n_anchor} anchor links, {n_coop} cooperative links, "
                          f"{s.dimension}-D localization")
    report.warnings.extend(_scenario_warnings(s))
    return report


def validate_plan(path) -> ValidationReport:
    """Check a plan file and the scenario it points to."""
    report = ValidationReport(str(path))
    try:
        plan = load_plan(path)
    except OSError as exc:
        report.errors.append(f"cannot read file: {exc}")
        return report
    except PlanError as exc:
        report.errors.append(str(exc))
        return report
    try:
        sp = resolve_scenario_path(plan)
    except ScenarioError as exc:
        report.errors.append(str(exc))
        return report
    sub = validate_scenario(sp)
    report.errors += [f"scenario: {e}" for e in sub.errors]
    report.warnings += [f"scenario: {w}" for w in sub.warnings]
    report.summary.append(f"{len(plan.sweep_values)} sweep values of {plan.sweep_variable}, "
                          f"M = {plan.monte_carlo_runs}, algorithms "
                          + ", ".join(a.label for a in plan.algorithms))
    report.summary += sub.summary
    return report


# --- experiment ---------------------------------------------------------------

def _child_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _at(scenario: Scenario, variable: str, value: float) -> Scenario:
    if variable == "anchor_power":
        return with_powers(scenario, anchor_power=value)
    return with_powers(scenario, vlc_power=value)


def _crlb_or_inf(s: Scenario, mode: Mode) -> CrlbReport:
    try:
        return crlb(fisher_matrix(s, mode))
    except UnlocalizableError as exc:
        log.warning("%s bound unavailable: %s", mode.value, exc)
        return CrlbReport(math.inf, np.full(s.num_units, math.inf), mode)


def crlb_sweep(scenario: Scenario, variable: str = "anchor_power",
               values: Sequence[float] | None = None) -> list[tuple[Mode, float, CrlbReport]]:
    """Both bounds at each sweep value, noncooperative rows first."""
    values = default_sweep() if values is None else values
    rows = []
    for v in values:
        s = _at(scenario, variable, float(v))
        for mode in (Mode.NONCOOPERATIVE, Mode.COOPERATIVE):
            rows.append((mode, float(v), _crlb_or_inf(s, mode)))
    return rows


@dataclass(frozen=True)
class _RunTask:
    scenario: Scenario
    plan: ExperimentPlan
    value_index: int
    run: int
    keep_steps: bool


def _one_run(task: _RunTask) -> dict:
    """Every estimator on one noise draw."""
    plan, s = task.plan, task.scenario
    noise_seed = _child_seed(plan.seed, task.run, NOISE_STREAM)
    mle_seed = _child_seed(plan.seed, task.run, MLE_STREAM)
    meas = synthesize(s, noise_model(plan.noise), noise_seed)
    dim = s.dimension
    truth = s.true_positions
    out = {"noise_seed": noise_seed, "mle_seed": mle_seed, "results": {}, "steps": {}}
    for spec in plan.estimators:
        if spec.name == "MLE":
            est = estimate_ml(s, meas.cooperative_only(spec.cooperative), plan.mle_config(mle_seed))
            X, iters, reason = est.positions, "", "converged" if est.converged else "not_converged"
        else:
            trace = solve(s, meas, plan.solver_config(spec.name.lower(), spec.cooperative))
            X, iters, reason = trace.final, trace.iterations, trace.stop_reason.value
            if task.keep_steps:
                out["steps"][spec.label] = trace.unit_steps().sum(axis=1)
        err = np.linalg.norm((X - truth)[:, :dim], axis=1)
        out["results"][spec.label] = (X, err, iters, reason)
    return out


def _fmt(v: float) -> str:
    return repr(float(v))


def _power_tag(v: float) -> str:
    return f"{v:g}"


def run_experiment(plan: ExperimentPlan, out_dir=None, threads: int = 1,
                   only_residuals: bool = False) -> dict[str, Path]:
    """Run every sweep value and Monte Carlo draw of ``plan``.

    Returns the written files by name. ``only_residuals`` skips the bound and
    error files and runs just the iterative solvers at ``residual_powers``.
    Runs are spread over ``threads`` worker processes; results are gathered in
    task order so the files do not depend on scheduling.
    """
    out = Path(out_dir if out_dir is not None else Path(plan.base_dir) / plan.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    scen_path = resolve_scenario_path(plan)
    scenario = load_scenario(scen_path)
    M = int(plan.monte_carlo_runs)
    res_powers = plan.sweep_values if plan.residual_powers is None else plan.residual_powers
    values = list(plan.sweep_values)
    if only_residuals:
        values = [v for v in values if _among(v, res_powers)]
        if not plan.iterative:
            raise PlanError("residuals need at least one of CCGP or CSGP in algorithms")
        plan_run = _replace_algorithms(plan, plan.iterative)
    else:
        plan_run = plan
    files: dict[str, Path] = {}

    if not only_residuals:
        files["crlb_sweep.csv"] = out / "crlb_sweep.csv"
        crlb_rows = crlb_sweep(scenario, plan.sweep_variable, values)
        write_crlb_csv(files["crlb_sweep.csv"], crlb_rows)

    tasks = []
    for vi, v in enumerate(values):
        s = _at(scenario, plan.sweep_variable, v)
        keep = bool(plan_run.iterative) and _among(v, res_powers)
        if plan_run.estimators:
            tasks += [_RunTask(s, plan_run, vi, m, keep) for m in range(M)]
    log.info("%d Monte Carlo tasks on %d worker(s)", len(tasks), threads)
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_one_run, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    else:
        results = [_one_run(t) for t in tasks]

    by_value: dict[int, list[dict]] = {}
    for t, r in zip(tasks, results):
        by_value.setdefault(t.value_index, []).append(r)

    n_v = scenario.num_units
    if plan_run.estimators and not only_residuals:
        files["errors.csv"] = out / "errors.csv"
        _write_errors(files["errors.csv"], plan_run, values, by_value, n_v)
        files["rmse_sweep.csv"] = out / "rmse_sweep.csv"
        _write_rmse(files["rmse_sweep.csv"], plan_run, values, by_value,
                    crlb_rows, n_v)

    for vi, v in enumerate(values):
        if not (plan_run.iterative and _among(v, res_powers)):
            continue
        name = f"residuals_p{_power_tag(v)}.csv"
        files[name] = out / name
        _write_residuals(files[name], plan_run, by_value[vi], n_v)

    files["manifest.json"] = out / "manifest.json"
    _write_manifest(files, plan, scen_path, values, M, only_residuals)
    return files


def _replace_algorithms(plan: ExperimentPlan, algorithms) -> ExperimentPlan:
    d = plan.to_dict()
    d["algorithms"] = [asdict(a) for a in algorithms]
    return plan_from_dict(d, plan.base_dir)


def _write_errors(path, plan, values, by_value, n_v) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([plan.sweep_variable, "run", "noise_seed", "algorithm", "cooperative",
                    "unit", "x", "y", "z", "error_m", "iterations", "stop_reason"])
        for vi, v in enumerate(values):
            for m, r in enumerate(by_value.get(vi, [])):
                for spec in plan.estimators:
                    X, err, iters, reason = r["results"][spec.label]
                    for j in range(n_v):
                        w.writerow([_fmt(v), m, r["noise_seed"], spec.name, int(spec.cooperative),
                                    j + 1, _fmt(X[j, 0]), _fmt(X[j, 1]), _fmt(X[j, 2]),
                                    _fmt(err[j]), iters, reason])


def _write_rmse(path, plan, values, by_value, crlb_rows, n_v) -> None:
    bound = {(mode, v): rep for mode, v, rep in crlb_rows}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([plan.sweep_variable, "algorithm", "cooperative", "runs", "rmse_m", "mean_error_m"]
                   + [f"rmse_unit_{j + 1}_m" for j in range(n_v)])
        for vi, v in enumerate(values):
            for spec in plan.algorithms:
                if spec.name == "CRLB":
                    mode = Mode.COOPERATIVE if spec.cooperative else Mode.NONCOOPERATIVE
                    rep = bound[(mode, v)]
                    w.writerow([_fmt(v), "CRLB", int(spec.cooperative), 0,
                                _fmt(math.sqrt(rep.total / n_v)), ""]
                               + [_fmt(math.sqrt(p)) for p in rep.per_unit])
                    continue
                E = np.array([r["results"][spec.label][1] for r in by_value[vi]])
                rmse, mean, per_unit = aggregate_errors(E)
                w.writerow([_fmt(v), spec.name, int(spec.cooperative), len(E),
                            _fmt(rmse), _fmt(mean)] + [_fmt(p) for p in per_unit])


def aggregate_errors(errors) -> tuple[float, float, np.ndarray]:
    """``(rmse, mean error, per-unit rmse)`` of an ``(M, N_V)`` error array."""
    E = np.asarray(errors, dtype=float)
    return (float(np.sqrt(np.mean(E ** 2))), float(np.mean(E)),
            np.sqrt(np.mean(E ** 2, axis=0)))


def read_errors(path) -> list[dict]:
    """Rows of an ``errors.csv`` file with numeric fields converted."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["run"], r["unit"] = int(r["run"]), int(r["unit"])
        r["cooperative"] = bool(int(r["cooperative"]))
        r["error_m"] = float(r["error_m"])
    return rows


def _write_residuals(path, plan, runs, n_v) -> None:
    cols = []
    for spec in plan.iterative:
        per_run = [r["steps"][spec.label] for r in runs]
        length = max(len(s) for s in per_run)
        total = np.zeros(length)
        for s in per_run:
            total[: len(s)] += s
        cols.append(total / (len(per_run) * n_v))
    length = max(len(c) for c in cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration"] + [spec.label for spec in plan.iterative])
        for n in range(length):
            w.writerow([n + 1] + [_fmt(c[n]) if n < len(c) else _fmt(0.0) for c in cols])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(files, plan, scen_path, values, M, only_residuals) -> None:
    manifest = {
        "coopvlp_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "plan": plan.to_dict(),
        "scenario_file": str(scen_path),
        "scenario_sha256": _sha256(Path(scen_path)),
        "verb": "residuals" if only_residuals else "run",
        "sweep_values_run": list(values),
        "seeds": {
            "master": int(plan.seed),
            "derivation": "SeedSequence(master, spawn_key=(run, stream)); stream 0 noise, 1 MLE starts",
            "runs": [{"run": m,
                      "noise_seed": _child_seed(plan.seed, m, NOISE_STREAM),
                      "mle_seed": _child_seed(plan.seed, m, MLE_STREAM)} for m in range(M)],
        },
        "files": {name: _sha256(p) for name, p in sorted(files.items()) if name != "manifest.json"},
    }
    files["manifest.json"].write_text(json.dumps(manifest, indent=2) + "\n")
