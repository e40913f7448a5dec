import numpy as np
import pytest
from dataclasses import replace

from coopvlp.channel import (
    AnchorSource,
    Gaussian,
    MeasurementSet,
    RssMeasurement,
    alpha_anchor,
    alpha_coop,
    synthesize,
)
from coopvlp.mle import MlConfig, MlError, cost_h, estimate_ml, ml_objective, ml_objective_grad
from helpers import grid_objective, single_unit_2d


def test_config_validation():
    with pytest.raises(ValueError):
        MlConfig(num_starts=0)
    with pytest.raises(ValueError):
        MlConfig(bounds=((0, 1), (2, 2), (0, 1)))


def test_cost_h_zero_at_truth(room3d):
    m = synthesize(room3d, Gaussian(0.0), 0)
    for j in range(2):
        for k in range(2):
            assert cost_h(room3d, m, j, k, room3d.true_positions) == 0.0


def test_cost_h_single_link():
    s = single_unit_2d()
    x = s.true_positions
    a = alpha_anchor(s, 0, 0, 2, x[0])
    m = MeasurementSet((RssMeasurement(0, 0, AnchorSource(2), a + 4e-9, 3e-9),))
    assert cost_h(s, m, 0, 0, x) == pytest.approx(16e-18, rel=1e-6)


def test_cost_h_resummation(room3d, rng):
    m = synthesize(room3d, Gaussian(), 4)
    for _ in range(10):
        X = room3d.true_positions + rng.normal(0, 0.3, (2, 3))
        for j in range(2):
            for k in range(2):
                total = 0.0
                for r in m:
                    if (r.j, r.k) != (j, k):
                        continue
                    if isinstance(r.source, AnchorSource):
                        a = alpha_anchor(room3d, j, k, r.source.l, X[j])
                    else:
                        a = alpha_coop(room3d, j, k, r.source.i, r.source.l, X[j], X[r.source.i])
                    total += (r.value - a) ** 2
                assert cost_h(room3d, m, j, k, X) == pytest.approx(total, rel=1e-12)


def test_objective_weights_cost_h(room3d, rng):
    m = synthesize(room3d, Gaussian(), 1)
    X = room3d.true_positions + rng.normal(0, 0.2, (2, 3))
    expected = sum(cost_h(room3d, m, j, k, X) / room3d.vlc_units[j].noise_sigmas[k] ** 2
                   for j in range(2) for k in range(2))
    assert ml_objective(room3d, m, X) == pytest.approx(expected, rel=1e-12)


def test_objective_gradient_finite_difference(room3d, rng):
    m = synthesize(room3d, Gaussian(), 2)
    for _ in range(20):
        X = room3d.true_positions + rng.normal(0, 0.3, (2, 3))
        G = ml_objective_grad(room3d, m, X)
        fd = np.zeros_like(X)
        for j in range(2):
            for d in range(3):
                E = np.zeros_like(X)
                E[j, d] = 1e-6
                fd[j, d] = (ml_objective(room3d, m, X + E) - ml_objective(room3d, m, X - E)) / 2e-6
        assert np.linalg.norm(G - fd) < 1e-5 * np.linalg.norm(fd)


def test_sigma_scaling_keeps_argmin():
    s = single_unit_2d()
    m = synthesize(s, Gaussian(), 9)
    c = 7.0
    scaled = MeasurementSet(tuple(replace(r, sigma=r.sigma * c) for r in m))
    base, pts = grid_objective(s, m, n=41)
    other, _ = grid_objective(s, scaled, n=41)
    assert np.allclose(other, base / c**2, rtol=1e-12)
    assert np.argmin(other) == np.argmin(base)
    X = s.true_positions + [[0.3, -0.2, 0.0]]
    assert ml_objective(s, scaled, X) == pytest.approx(ml_objective(s, m, X) / c**2, rel=1e-12)


@pytest.mark.parametrize("name", ["room2d", "room3d"])
def test_zero_noise_recovery(name, request):
    s = request.getfixturevalue(name)
    est = estimate_ml(s, synthesize(s, Gaussian(0.0), 0), MlConfig(num_starts=20))
    assert np.max(np.linalg.norm(est.positions - s.true_positions, axis=1)) < 1e-6


def test_single_unit_zero_noise_recovery():
    s = single_unit_2d()
    est = estimate_ml(s, synthesize(s, Gaussian(0.0), 0), MlConfig(num_starts=10))
    assert np.linalg.norm(est.positions - s.true_positions) < 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_not_worse_than_grid(seed):
    s = single_unit_2d()
    m = synthesize(s, Gaussian(), seed)
    grid, _ = grid_objective(s, m)
    est = estimate_ml(s, m, MlConfig(seed=seed))
    assert est.objective <= grid.min()


def test_deterministic(room2d):
    m = synthesize(room2d, Gaussian(), 3)
    a = estimate_ml(room2d, m, MlConfig(num_starts=8, seed=5))
    b = estimate_ml(room2d, m, MlConfig(num_starts=8, seed=5))
    assert np.array_equal(a.positions, b.positions) and a.objective == b.objective
    assert a.start_index == b.start_index


def test_box_and_objective_reevaluation(room3d):
    m = synthesize(room3d, Gaussian(), 6)
    bounds = ((2.5, 7.0), (0.0, 10.0), (0.0, 0.5))
    est = estimate_ml(room3d, m, MlConfig(num_starts=6, bounds=bounds))
    lo, hi = np.array(bounds).T
    assert np.all((est.positions >= lo) & (est.positions <= hi))
    assert est.objective == pytest.approx(ml_objective(room3d, m, est.positions), rel=1e-12)


def test_not_worse_than_any_start(room2d):
    m = synthesize(room2d, Gaussian(), 8)
    cfg = MlConfig(num_starts=12, seed=21)
    est = estimate_ml(room2d, m, cfg)
    lo = np.array([b[0] for b in cfg.bounds[:2]] * 2)
    hi = np.array([b[1] for b in cfg.bounds[:2]] * 2)
    for s in range(cfg.num_starts):
        # start s uses child stream s of the configured seed
        g = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(s,))))
        theta = g.uniform(lo, hi).reshape(2, 2)
        X0 = np.column_stack([theta, room2d.known_heights])
        assert est.objective <= ml_objective(room2d, m, X0)


def test_all_starts_failing_is_reported(monkeypatch, room2d):
    import coopvlp.mle as mle

    def boom(*args, **kwargs):
        raise FloatingPointError("overflow")

    monkeypatch.setattr(mle, "minimize", boom)
    with pytest.raises(MlError, match="all 3 local descents"):
        estimate_ml(room2d, synthesize(room2d, Gaussian(), 0), MlConfig(num_starts=3))
