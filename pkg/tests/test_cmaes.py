import numpy as np
import pytest

from musclearm.benchmarks import rosenbrock, sphere
from musclearm.cmaes import (
    CmaConfig,
    CmaEs,
    MismatchedPopulation,
    NumericalBreakdown,
    StopRules,
    default_population,
    expected_norm,
    optimize,
)


class QueuedRng:
    """Feeds prescribed standard-normal draws to make y values exact."""

    def __init__(self, arrays):
        self.arrays = list(arrays)

    def standard_normal(self, shape):
        out = np.asarray(self.arrays.pop(0), dtype=float)
        assert out.shape == tuple(shape)
        return out


def test_default_population_matches_paper_at_24():
    assert default_population(24) == 13


def test_config_constraints():
    cfg = CmaConfig(dim=24)
    w = cfg.weights
    assert np.all(np.diff(w) <= 0) and np.all(w > 0)
    assert w.sum() == pytest.approx(1.0)
    assert cfg.lam / 8 <= cfg.mu_w <= cfg.lam / 2  # mu_w ~ lambda / 4
    assert cfg.c_sigma == pytest.approx(4.0 / 24)
    assert cfg.c_c == pytest.approx(4.0 / 28)
    with pytest.raises(ValueError):
        CmaConfig(dim=4, mu=2, weights=np.array([0.3, 0.7]))  # increasing
    with pytest.raises(ValueError):
        CmaConfig(dim=4, mu=2, weights=np.array([0.9, 0.3]))  # sum != 1


def test_expected_norm_close_to_monte_carlo(rng):
    # oracle: mean norm of 20000 standard normal vectors
    for dim in (2, 5, 24):
        draws = rng.standard_normal((20000, dim))
        mc = np.linalg.norm(draws, axis=1).mean()
        assert abs(expected_norm(dim) - mc) / mc < 0.01


def test_ask_tiny_sigma_collapses_to_mean(rng):
    es = CmaEs(np.arange(5.0), 1e-300, rng=rng)
    cands = es.ask()
    assert np.allclose(cands, np.arange(5.0), atol=1e-290)


def test_ask_unit_covariance_sampling_variance():
    es = CmaEs(np.zeros(4), 1.0, config=CmaConfig(dim=4, lam=10000), rng=np.random.default_rng(8))
    cands = es.ask()
    var = cands.var(axis=0)
    assert np.all(var > 0.95) and np.all(var < 1.05)


def test_ask_deterministic_per_seed():
    a = CmaEs(np.zeros(6), 0.5, rng=np.random.default_rng(3))
    b = CmaEs(np.zeros(6), 0.5, rng=np.random.default_rng(3))
    assert np.array_equal(a.ask(), b.ask())


def test_tell_single_parent_moves_mean_to_best():
    cfg = CmaConfig(dim=3, lam=2, mu=1, weights=np.array([1.0]))
    z = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    es = CmaEs(np.zeros(3), 0.5, config=cfg, rng=QueuedRng([z]))
    cands = es.ask()
    es.tell(cands, np.array([5.0, 1.0]))  # second candidate wins
    assert np.allclose(es.state.mean, 0.5 * z[1], atol=1e-15)


def test_tell_weighted_recombination_arithmetic():
    cfg = CmaConfig(dim=4, lam=2, mu=2, weights=np.array([0.7, 0.3]))
    z = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
    es = CmaEs(np.zeros(4), 1.0, config=cfg, rng=QueuedRng([z]))
    cands = es.ask()
    es.tell(cands, np.array([0.1, 0.2]))
    assert np.allclose(es.state.mean, [0.7, 0.3, 0, 0], atol=1e-15)


def test_sigma_moves_with_path_length():
    # long aligned steps inflate sigma, tiny whitened steps deflate it
    cfg = CmaConfig(dim=5, lam=4, mu=1, weights=np.array([1.0]))
    big = np.zeros((4, 5))
    big[0, 0] = 4.0
    es = CmaEs(np.zeros(5), 0.3, config=cfg, rng=QueuedRng([big]))
    es.tell(es.ask(), np.array([0.0, 1.0, 2.0, 3.0]))
    assert es.state.sigma > 0.3

    tiny = np.zeros((4, 5))
    tiny[0, 0] = 1e-3
    es2 = CmaEs(np.zeros(5), 0.3, config=cfg, rng=QueuedRng([tiny]))
    es2.tell(es2.ask(), np.array([0.0, 1.0, 2.0, 3.0]))
    assert es2.state.sigma < 0.3


def test_covariance_stays_exactly_symmetric(rng):
    es = CmaEs(np.zeros(8), 0.5, rng=rng)
    for _ in range(100):
        cands = es.ask()
        es.tell(cands, rng.standard_normal(len(cands)))
        assert np.array_equal(es.state.cov, es.state.cov.T)
        eig = np.linalg.eigvalsh(es.state.cov)
        assert eig.min() > 0


def test_fitness_translation_and_monotone_invariance():
    def states(transform):
        rng = np.random.default_rng(17)
        es = CmaEs(np.full(6, 0.5), 0.4, rng=rng)
        for _ in range(30):
            cands = es.ask()
            f = np.array([sphere(c) for c in cands])
            es.tell(cands, transform(f))
        s = es.state
        return s.mean.copy(), s.sigma, s.cov.copy(), s.path_sigma.copy(), s.path_cov.copy()

    base = states(lambda f: f)
    shifted = states(lambda f: f + 123.456)
    warped = states(lambda f: np.exp(f) + 7.0)  # strictly increasing
    for a, b, c in zip(base, shifted, warped):
        assert np.array_equal(np.asarray(a), np.asarray(b))
        assert np.array_equal(np.asarray(a), np.asarray(c))


def test_path_sigma_stationary_under_random_selection():
    rng = np.random.default_rng(23)
    es = CmaEs(np.zeros(24), 0.3, rng=rng)
    norms = []
    for _ in range(300):
        cands = es.ask()
        es.tell(cands, rng.standard_normal(len(cands)))  # fitness ignores candidates
        norms.append(np.linalg.norm(es.state.path_sigma))
    mean_norm = np.mean(norms[20:])  # drop the burn-in from p=0
    assert abs(mean_norm - expected_norm(24)) / expected_norm(24) < 0.1


def test_tell_validation_errors(rng):
    es = CmaEs(np.zeros(4), 0.5, rng=rng)
    with pytest.raises(MismatchedPopulation):
        es.tell(np.zeros((3, 4)), np.zeros(3))  # tell before ask
    cands = es.ask()
    with pytest.raises(MismatchedPopulation):
        es.tell(cands[:-1], np.zeros(len(cands) - 1))
    with pytest.raises(MismatchedPopulation):
        es.tell(cands + 1.0, np.zeros(len(cands)))
    with pytest.raises(ValueError):
        es.tell(cands, np.full(len(cands), np.nan))


def test_eigenvalue_floor_repair(rng):
    es = CmaEs(np.zeros(3), 0.5, rng=rng)
    bad = np.diag([1.0, 1e-30, 1e-30])
    es.state.cov = bad
    es.ask()
    eig = np.linalg.eigvalsh(es.state.cov)
    assert eig.min() >= 1e-14 * eig.max() * (1 - 1e-12)


def test_numerical_breakdown_on_nonfinite(rng):
    es = CmaEs(np.zeros(3), 0.5, rng=rng)
    es.state.cov = np.full((3, 3), np.nan)
    with pytest.raises(NumericalBreakdown):
        es.ask()


def test_optimize_sphere_and_budget_stop():
    res = optimize(
        sphere, np.ones(5), 0.5,
        stop=StopRules(f_target=1e-10, max_evals=2000),
        rng=np.random.default_rng(0),
    )
    assert res.stop_reason == "f_target"
    assert res.best_f < 1e-10
    assert res.evaluations <= 2000
    assert res.history[-1].sigma > 0

    const = optimize(
        lambda x: 3.25, np.zeros(3), 0.2,
        stop=StopRules(max_evals=300),
        rng=np.random.default_rng(1),
    )
    assert const.stop_reason == "max_evals"
    assert const.best_f == pytest.approx(3.25)


def test_optimize_rosenbrock():
    res = optimize(
        rosenbrock, np.array([-1.0, 1.0]), 0.3,
        stop=StopRules(f_target=1e-6, max_evals=20000),
        rng=np.random.default_rng(5),
    )
    assert res.stop_reason == "f_target"
    assert res.best_f < 1e-6
