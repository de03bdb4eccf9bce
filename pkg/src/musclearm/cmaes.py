"""Evolution strategy with covariance matrix adaptation.

Self-contained (mu/mu_w, lambda) CMA-ES: multivariate normal sampling,
weighted intermediate recombination of the best mu candidates,
cumulative step-size adaptation against the expected path length under
random selection, and a rank-one covariance update from the evolution
path. Selection is purely rank based, so any strictly increasing
transformation of the fitness values leaves the state update identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MismatchedPopulation(ValueError):
    """tell() received candidates or fitnesses not matching the last ask()."""


class NumericalBreakdown(RuntimeError):
    """Covariance factorization failed beyond repair."""


def default_population(dim: int) -> int:
    return 4 + int(3 * np.log(dim))


def default_weights(mu: int):
    w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    return w / w.sum()


def expected_norm(dim: int) -> float:
    """E||N(0, I_n)||, the CSA reference path length."""
    return float(np.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim**2)))


@dataclass
class CmaConfig:
    """Strategy constants; defaults follow the usual dimension scalings."""

    dim: int
    lam: int = 0
    mu: int = 0
    weights: np.ndarray | None = None
    c_sigma: float = 0.0
    d_sigma: float = 1.0
    c_c: float = 0.0
    c_cov: float = 0.0
    chi_n: float = 0.0

    def __post_init__(self):
        n = self.dim
        if n < 1:
            raise ValueError("dim must be >= 1")
        if self.lam <= 0:
            self.lam = default_population(n)
        if self.mu <= 0:
            self.mu = self.lam // 2
        if self.weights is None:
            self.weights = default_weights(self.mu)
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.weights) != self.mu:
            raise ValueError("need one weight per selected candidate")
        if np.any(np.diff(self.weights) > 0) or np.any(self.weights <= 0):
            raise ValueError("weights must be positive and non-increasing")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if self.c_sigma <= 0:
            # 4/n is the intended scaling; cap keeps it a valid smoothing
            # factor in the low dimensions the benchmark functions use
            self.c_sigma = min(1.0, 4.0 / n)
        if self.c_c <= 0:
            self.c_c = 4.0 / (n + 4.0)
        if self.c_cov <= 0:
            self.c_cov = 2.0 / ((n + 1.3) ** 2 + self.mu_w)
        if self.chi_n <= 0:
            self.chi_n = expected_norm(n)

    @property
    def mu_w(self) -> float:
        return float(1.0 / np.sum(self.weights**2))


@dataclass
class EvolutionState:
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    path_sigma: np.ndarray
    path_cov: np.ndarray
    generation: int = 0


@dataclass
class GenerationStat:
    generation: int
    evaluations: int
    best_f: float
    best_ever: float
    sigma: float
    axis_ratio: float
    min_std: float
    max_std: float


@dataclass
class OptimizeResult:
    best_x: np.ndarray
    best_f: float
    evaluations: int
    stop_reason: str
    history: list[GenerationStat] = field(default_factory=list)


class CmaEs:
    """ask/tell optimizer; fitnesses are minimized."""

    def __init__(self, x0, sigma0: float, config: CmaConfig | None = None, rng=None):
        x0 = np.asarray(x0, dtype=float)
        if sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        self.config = config or CmaConfig(dim=len(x0))
        if self.config.dim != len(x0):
            raise ValueError("x0 dimension does not match config")
        n = self.config.dim
        self.state = EvolutionState(
            mean=x0.copy(),
            sigma=float(sigma0),
            cov=np.eye(n),
            path_sigma=np.zeros(n),
            path_cov=np.zeros(n),
        )
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.best_x = x0.copy()
        self.best_f = np.inf
        self.evaluations = 0
        self._pending = None  # (candidates, y, B, D) of the open generation

    # -- sampling -----------------------------------------------------------

    def _factorize(self):
        cov = self.state.cov
        if not np.all(np.isfinite(cov)):
            raise NumericalBreakdown("covariance has non-finite entries")
        try:
            eigval, eigvec = np.linalg.eigh(cov)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("eigendecomposition failed") from exc
        top = eigval.max()
        if not np.isfinite(top) or top <= 0:
            raise NumericalBreakdown("covariance lost positive definiteness")
        floor = 1e-14 * top
        clipped = np.maximum(eigval, floor)
        if np.any(eigval < floor):
            # repair in place so the state invariant (SPD) is restored
            self.state.cov = (eigvec * clipped) @ eigvec.T
        return eigvec, np.sqrt(clipped)

    def ask(self):
        """Sample one population, shape (lambda, dim)."""
        basis, scale = self._factorize()
        z = self.rng.standard_normal((self.config.lam, self.config.dim))
        y = z @ (basis * scale).T
        candidates = self.state.mean + self.state.sigma * y
        self._pending = (candidates, y, basis, scale)
        return candidates

    # -- update -------------------------------------------------------------

    def tell(self, candidates, fitnesses):
        """Rank candidates (ascending fitness) and update the strategy state."""
        if self._pending is None:
            raise MismatchedPopulation("tell() without a preceding ask()")
        pending, y, basis, scale = self._pending
        candidates = np.asarray(candidates, dtype=float)
        fitnesses = np.asarray(fitnesses, dtype=float)
        if candidates.shape != pending.shape or len(fitnesses) != len(candidates):
            raise MismatchedPopulation(
                f"expected {pending.shape[0]} candidates with one fitness each"
            )
        if candidates is not pending and not np.array_equal(candidates, pending):
            raise MismatchedPopulation("candidates are not from the preceding ask()")
        if not np.all(np.isfinite(fitnesses)):
            raise ValueError("fitnesses must be finite")
        self._pending = None

        cfg = self.config
        st = self.state
        order = np.argsort(fitnesses, kind="stable")
        y_w = cfg.weights @ y[order[: cfg.mu]]

        st.mean = st.mean + st.sigma * y_w

        whitened = basis @ ((basis.T @ y_w) / scale)
        c_s = cfg.c_sigma
        st.path_sigma = (1.0 - c_s) * st.path_sigma + np.sqrt(
            1.0 - (1.0 - c_s) ** 2
        ) * np.sqrt(cfg.mu_w) * whitened
        st.sigma = st.sigma * np.exp(
            (c_s / cfg.d_sigma) * (np.linalg.norm(st.path_sigma) / cfg.chi_n - 1.0)
        )

        c_c = cfg.c_c
        st.path_cov = (1.0 - c_c) * st.path_cov + np.sqrt(
            1.0 - (1.0 - c_c) ** 2
        ) * np.sqrt(cfg.mu_w) * y_w
        st.cov = (1.0 - cfg.c_cov) * st.cov + cfg.c_cov * np.outer(
            st.path_cov, st.path_cov
        )
        st.generation += 1

        self.evaluations += len(fitnesses)
        gen_best = int(order[0])
        if fitnesses[gen_best] < self.best_f:
            self.best_f = float(fitnesses[gen_best])
            self.best_x = candidates[gen_best].copy()
        return st

    def stats(self, gen_best_f: float) -> GenerationStat:
        eigval = np.linalg.eigvalsh(self.state.cov)
        eigval = np.maximum(eigval, 0.0)
        stds = self.state.sigma * np.sqrt(np.maximum(np.diag(self.state.cov), 0.0))
        return GenerationStat(
            generation=self.state.generation,
            evaluations=self.evaluations,
            best_f=float(gen_best_f),
            best_ever=float(self.best_f),
            sigma=float(self.state.sigma),
            axis_ratio=float(np.sqrt(eigval.max() / max(eigval.min(), 1e-300))),
            min_std=float(stds.min()),
            max_std=float(stds.max()),
        )


@dataclass
class StopRules:
    f_target: float | None = None
    max_evals: int = 100000
    max_condition: float = 1e14


def optimize(
    objective,
    x0,
    sigma0: float,
    config: CmaConfig | None = None,
    stop: StopRules | None = None,
    rng=None,
) -> OptimizeResult:
    """Minimize a scalar objective with repeated ask/tell.

    Runs until best-ever fitness reaches stop.f_target (when set), the
    evaluation budget is exhausted, or the covariance condition number
    exceeds stop.max_condition.
    """
    stop = stop or StopRules()
    es = CmaEs(x0, sigma0, config=config, rng=rng)
    history: list[GenerationStat] = []
    reason = "max_evals"
    while es.evaluations < stop.max_evals:
        candidates = es.ask()
        fitnesses = np.array([float(objective(c)) for c in candidates])
        es.tell(candidates, fitnesses)
        stat = es.stats(fitnesses.min())
        history.append(stat)
        if stop.f_target is not None and es.best_f <= stop.f_target:
            reason = "f_target"
            break
        if stat.axis_ratio**2 > stop.max_condition:
            reason = "numerical"
            break
    return OptimizeResult(
        best_x=es.best_x,
        best_f=es.best_f,
        evaluations=es.evaluations,
        stop_reason=reason,
        history=history,
    )
