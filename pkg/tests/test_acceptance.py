"""Acceptance suite: one test per criterion, each recording a pass/fail line.

The verdict lines are printed in the terminal summary under
"acceptance criteria".
"""

import time

import numpy as np
import pytest

from coopvlp.bounds import Mode, crlb, fisher_matrix, grad_alpha_anchor, grad_alpha_coop
from coopvlp.channel import (
    AnchorSource,
    ExponentialSubtractive,
    Gaussian,
    alpha_anchor,
    alpha_coop,
    link_keys,
    synthesize,
)
from coopvlp.feasibility import LambertianConstraint, Variant, g_value
from coopvlp.geometry import with_powers
from coopvlp.harness import bundled_plan_path, default_sweep, load_plan, run_experiment
from coopvlp.mle import MlConfig, estimate_ml
from coopvlp.solvers import SolverConfig, StopReason, build_constraints, solve
from helpers import grid_objective, random_scenario, single_unit_2d

TOL_FEAS = 1e-6


def _fd(f, x, h=1e-6):
    out = np.zeros(3)
    for d in range(3):
        e = np.zeros(3)
        e[d] = h
        out[d] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_criterion_01_gradients(verdict):
    verdict.start(1, "analytic power gradients vs central differences")
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst, checked = 0.0, 0
    for _ in range(100):
        s = random_scenario(rng, 3, 3)
        X = s.true_positions
        for j, k, src in link_keys(s):
            if isinstance(src, AnchorSource):
                g = grad_alpha_anchor(s, j, k, src.l, X[j])
                fd = _fd(lambda p: alpha_anchor(s, j, k, src.l, p), X[j])
                worst = max(worst, _rel(g, fd))
            else:
                i, l = src.i, src.l
                gj, gi = grad_alpha_coop(s, j, k, i, l, X[j], X[i])
                fdj = _fd(lambda p: alpha_coop(s, j, k, i, l, p, X[i]), X[j])
                fdi = _fd(lambda p: alpha_coop(s, j, k, i, l, X[j], p), X[i])
                worst = max(worst, _rel(gj, fdj), _rel(gi, fdi))
            checked += 1
    dt = time.perf_counter() - t0
    ok = verdict(worst < 1e-5 and dt < 5.0,
                 f"100 configurations, {checked} links, max rel err {worst:.2e}, {dt:.1f} s")
    assert ok


def test_criterion_02_fim_ordering(room3d, verdict):
    verdict.start(2, "cooperative FIM dominates, bound ordered and falling with power")
    worst_eig, order_ok, totals = np.inf, True, {Mode.NONCOOPERATIVE: [], Mode.COOPERATIVE: []}
    for p in default_sweep():
        s = with_powers(room3d, anchor_power=p)
        Jc = fisher_matrix(s, Mode.COOPERATIVE).matrix
        Jn = fisher_matrix(s, Mode.NONCOOPERATIVE).matrix
        D = Jc - Jn
        worst_eig = min(worst_eig, np.linalg.eigvalsh(D).min() / np.linalg.norm(Jc, 2))
        tc, tn = np.trace(np.linalg.inv(Jc)), np.trace(np.linalg.inv(Jn))
        order_ok &= tc <= tn
        totals[Mode.COOPERATIVE].append(tc)
        totals[Mode.NONCOOPERATIVE].append(tn)
    monotone = all(np.all(np.diff(v) < 0) for v in totals.values())
    gap = np.sqrt(totals[Mode.NONCOOPERATIVE][0]) - np.sqrt(totals[Mode.COOPERATIVE][0])
    ok = verdict(worst_eig >= -1e-10 and order_ok and monotone,
                 f"min eig(Jc - Jn)/|Jc| = {worst_eig:.1e}, trace ordered at all 10 powers: {order_ok}, "
                 f"both bounds decreasing: {monotone}, sqrt-bound gap at 0.1 W {gap * 100:.1f} cm")
    assert ok


def test_criterion_03_unit1_gains_more(room3d, verdict):
    verdict.start(3, "cooperation helps unit 1 more than unit 2 at 0.3 W")
    s = with_powers(room3d, anchor_power=0.3)
    nc = crlb(fisher_matrix(s, Mode.NONCOOPERATIVE)).per_unit
    co = crlb(fisher_matrix(s, Mode.COOPERATIVE)).per_unit
    g1, g2 = nc[0] - co[0], nc[1] - co[1]
    ok = verdict(g1 > g2, f"bound reduction unit 1 {g1:.3e} m^2, unit 2 {g2:.3e} m^2")
    assert ok


def test_criterion_04_vlc_power_saturation(room3d, verdict):
    verdict.start(4, "cooperative bound saturates in VLC power")
    s1 = with_powers(room3d, anchor_power=1.0)

    def bound(v):
        return crlb(fisher_matrix(with_powers(s1, vlc_power=v), Mode.COOPERATIVE)).total

    grid = np.logspace(-1, 1, 21)
    vals = np.array([bound(v) for v in grid])
    nonincreasing = bool(np.all(np.diff(vals) <= 0))
    b01, b1, b10 = bound(0.1), bound(1.0), bound(10.0)
    ratio = (b1 - b10) / (b01 - b1)
    ok = verdict(nonincreasing and ratio < 0.1,
                 f"nonincreasing on 21 powers: {nonincreasing}, decrease 1-10 W / decrease 0.1-1 W "
                 f"= {ratio:.3f} (needs < 0.1)")
    assert ok


def _g_generic(X, y, nr, thr, k, eps):
    d = y - X
    u = d @ nr
    r = np.linalg.norm(d, axis=-1)
    return thr - u / (r**k + eps)


def _sample_omega(rng, n, y, nr, radius):
    out = np.empty((0, 3))
    while len(out) < n:
        P = y + rng.uniform(-radius, radius, (2 * n, 3))
        P = P[(y - P) @ nr >= 0]
        out = np.vstack([out, P])
    return out[:n]


def test_criterion_05_quasiconvexity_and_minorant(verdict):
    verdict.start(5, "quasiconvex chords and minorant")
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    violations = {}
    n_trip, batch = 100_000, 1000
    y = np.array([0.0, 0.0, 4.0])
    for variant in (Variant.CASE1, Variant.CASE2):
        bad = 0
        for _ in range(n_trip // batch):
            nr = rng.normal(size=3)
            nr /= np.linalg.norm(nr)
            order = float(rng.choice([1.0, 2.0, 3.0]))
            gamma = rng.uniform(1e-3, 0.1)
            if variant is Variant.CASE1:
                thr, k = gamma, 3.0
            else:
                h = rng.uniform(2.0, 4.5)
                thr, k = gamma / h**order, order + 3.0
            radius = rng.choice([0.5, 3.0])
            A = _sample_omega(rng, batch, y, nr, radius)
            B = _sample_omega(rng, batch, y, nr, radius)
            t = rng.uniform(0, 1, (batch, 1))
            Z = t * A + (1 - t) * B
            ga, gb, gz = (_g_generic(P, y, nr, thr, k, 1e-6) for P in (A, B, Z))
            scale = np.maximum(np.abs(ga), np.abs(gb)) + thr
            bad += int(np.sum(gz > np.maximum(ga, gb) + 1e-14 * scale))
        violations[variant.value] = bad
    # the vectorized oracle agrees with the library evaluation
    nr = np.array([0.3, -0.1, 1.0]) / np.linalg.norm([0.3, -0.1, 1.0])
    c2 = LambertianConstraint(y, [0, 0, -1], nr, 2.0, 0.02, 1e-6, Variant.CASE2, 3.0)
    P = _sample_omega(rng, 500, y, nr, 3.0)
    agree = np.allclose([g_value(c2, p) for p in P], _g_generic(P, y, nr, 0.02 / 9.0, 5.0, 1e-6),
                        rtol=1e-12, atol=1e-15)
    # minorant chain: expanded function below the original on the region
    nt = np.array([0.0, 0.0, -1.0])
    worst_excess, worst_eps_excess, n_min = -np.inf, -np.inf, 0
    while n_min < 10_000:
        nr = rng.normal(size=3)
        nr[2] = abs(nr[2])
        nr /= np.linalg.norm(nr)
        order = float(rng.choice([1.0, 2.0]))
        orig = LambertianConstraint(y, nt, nr, order, 0.02, variant=Variant.ORIGINAL)
        tilde = LambertianConstraint(y, nt, nr, order, 0.02, 1e-300, Variant.CASE1)
        tilde_eps = LambertianConstraint(y, nt, nr, order, 0.02, 1e-6, Variant.CASE1)
        for x in _sample_omega(rng, 100, y, nr, 4.0):
            if x[2] >= y[2]:
                continue
            g = g_value(orig, x)
            worst_excess = max(worst_excess, g_value(tilde, x) - g)
            worst_eps_excess = max(worst_eps_excess, g_value(tilde_eps, x) - g)
            n_min += 1
    dt = time.perf_counter() - t0
    ok = verdict(sum(violations.values()) == 0 and worst_excess <= 1e-15 and agree and dt < 10,
                 f"chord violations {violations} in 1e5 triples each; max(g_tilde - g) "
                 f"{worst_excess:.1e} on {n_min} points (epsilon form {worst_eps_excess:.1e}); "
                 f"{dt:.1f} s")
    assert ok


@pytest.fixture(scope="module")
def consistent_runs(room2d):
    s = with_powers(room2d, anchor_power=1.0)
    out = {}
    t0 = time.perf_counter()
    for alg in ("ccgp", "csgp"):
        cfg = SolverConfig(algorithm=alg, delta=1e-10)
        runs = []
        for seed in range(100):
            m = synthesize(s, ExponentialSubtractive(), seed)
            runs.append((m, solve(s, m, cfg)))
        out[alg] = (cfg, runs)
    return s, out, time.perf_counter() - t0


def _worst_violation(s, m, cfg, X):
    worst = 0.0
    for uc in build_constraints(s, m, X, cfg.epsilon, cfg.cooperative, cfg.bias):
        x = X[uc.unit]
        vals = np.concatenate([uc.noncoop.values(x), uc.coop_bundle(X).values(x)])
        worst = max(worst, float(np.max(vals, initial=0.0)))
    return worst


def test_criterion_06_consistent_convergence(consistent_runs, verdict):
    verdict.start(6, "consistent case converges to a feasible point")
    s, out, dt = consistent_runs
    parts, ok = [], dt < 120
    for alg, (cfg, runs) in out.items():
        conv = sum(tr.stop_reason is StopReason.CONVERGED for _, tr in runs)
        good = sum(tr.stop_reason is StopReason.CONVERGED
                   and _worst_violation(s, m, cfg, tr.final) <= TOL_FEAS for m, tr in runs)
        ok &= good >= 95
        parts.append(f"{alg} {good}/100 (converged {conv})")
    ok = verdict(ok, ", ".join(parts) + f"; needs >= 95 each; {dt:.0f} s")
    assert ok


def test_criterion_07_quasi_fejer(consistent_runs, verdict):
    verdict.start(7, "quasi-Fejer steps toward the truth")
    s, out, _ = consistent_runs
    z = s.true_positions
    parts, total = [], 0
    for alg, (cfg, runs) in out.items():
        steps = bad_runs = bad_steps = cumulative = 0
        for _, tr in runs:
            d2 = np.sum((tr.iterates - z) ** 2, axis=2)
            eps = np.sum((tr.iterates[1:] - tr.projected) ** 2, axis=2)
            tol = 1e-12 + 1e-12 * d2[:-1]
            bad = d2[1:] > d2[:-1] + eps + tol
            # the same inequality chained from the start point
            chained = d2[1:] > d2[0] + np.cumsum(eps, axis=0) + tol
            steps += bad.size
            bad_steps += int(bad.sum())
            bad_runs += bool(bad.any())
            cumulative += int(chained.sum())
        total += bad_steps
        parts.append(f"{alg} {bad_steps} of {steps} unit steps in {bad_runs} runs "
                     f"({cumulative} against the chained slack)")
    ok = verdict(total == 0, "violations beyond slack: " + "; ".join(parts))
    assert ok


def test_criterion_08_high_snr(room2d, tmp_path, verdict):
    verdict.start(8, "errors at 10 W below 10% of errors at 0.1 W")
    from coopvlp.harness import plan_from_dict, read_errors

    plan = plan_from_dict({
        "scenario_path": "scenario_paper_sec6_2d",
        "sweep": {"variable": "anchor_power", "values": [0.1, 10.0]},
        "noise": {"model": "gaussian", "scale": 1.0},
        "monte_carlo_runs": 50,
        "algorithms": [{"name": "CCGP"}, {"name": "CSGP"}, {"name": "MLE"}],
        "seed": 8,
        "solver": {"delta": 1e-10},
        "residual_powers": [],
    })
    t0 = time.perf_counter()
    files = run_experiment(plan, tmp_path)
    dt = time.perf_counter() - t0
    rows = read_errors(files["errors.csv"])
    parts, ok = [], dt < 300
    for alg in ("CCGP", "CSGP", "MLE"):
        mean = {p: np.mean([r["error_m"] for r in rows
                            if r["algorithm"] == alg and float(r["anchor_power"]) == p])
                for p in (0.1, 10.0)}
        ratio = mean[10.0] / mean[0.1]
        ok &= ratio < 0.1
        parts.append(f"{alg} {mean[0.1]:.3f} m -> {mean[10.0] * 1000:.1f} mm (ratio {ratio:.3f})")
    ok = verdict(ok, ", ".join(parts) + f"; M = 50, {dt:.0f} s")
    assert ok


def test_criterion_09_mle_sanity(verdict):
    verdict.start(9, "multi-start ML vs grid oracle and zero-noise recovery")
    s = single_unit_2d()
    wins, worst = 0, -np.inf
    for seed in range(100):
        m = synthesize(s, Gaussian(), seed)
        grid, _ = grid_objective(s, m)
        est = estimate_ml(s, m, MlConfig(seed=seed))
        wins += est.objective <= grid.min()
        worst = max(worst, est.objective - grid.min())
    est0 = estimate_ml(s, synthesize(s, Gaussian(0.0), 0))
    err0 = float(np.linalg.norm(est0.positions - s.true_positions))
    ok = verdict(wins == 100 and err0 < 1e-6,
                 f"{wins}/100 at or below the 101x101 grid minimum (worst margin {worst:.2e}); "
                 f"zero-noise error {err0:.1e} m")
    assert ok


def test_criterion_10_distributed_equivalence(verdict):
    verdict.start(10, "message-passing execution equals centralized, bitwise")
    rng = np.random.default_rng(10)
    same = 0
    for q in range(20):
        s = random_scenario(rng, int(rng.integers(2, 5)), 2 + q % 2)
        m = synthesize(s, Gaussian(), q)
        cfg = dict(algorithm=("ccgp", "csgp")[q % 2 ^ (q // 10)], max_iters=200)
        a = solve(s, m, SolverConfig(**cfg))
        b = solve(s, m, SolverConfig(mode="distributed_sequential", **cfg))
        same += (np.array_equal(a.iterates, b.iterates) and np.array_equal(a.projected, b.projected)
                 and np.array_equal(a.step_sizes, b.step_sizes)
                 and np.array_equal(a.residual_path, b.residual_path)
                 and a.stop_reason is b.stop_reason)
    ok = verdict(same == 20, f"{same}/20 random scenarios identical")
    assert ok


def test_criterion_11_determinism(tmp_path, verdict):
    verdict.start(11, "bundled plan reruns are byte-identical")
    plan = load_plan(bundled_plan_path())
    a = run_experiment(plan, tmp_path / "a")
    b = run_experiment(plan, tmp_path / "b")
    csvs = sorted(n for n in a if n.endswith(".csv"))
    same = [n for n in csvs if a[n].read_bytes() == b[n].read_bytes()]
    ok = verdict(len(same) == len(csvs) and len(csvs) >= 3,
                 f"{len(same)}/{len(csvs)} CSV files identical ({', '.join(csvs)})")
    assert ok
