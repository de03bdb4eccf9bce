"""Full-covariance Gaussian mixtures fitted by expectation maximization.

Used to capture the distribution of motor postures around a goal so the
stored abundance can be resampled later. Component count is chosen by
scanning K and keeping the lowest Bayesian Information Criterion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SingularComponent(RuntimeError):
    """A mixture component collapsed and could not be re-seeded."""


def _log_gaussian(data, mean, cov):
    """Row-wise log density of N(mean, cov); cov must be SPD."""
    d = data.shape[1]
    chol = np.linalg.cholesky(cov)
    solved = np.linalg.solve(chol, (data - mean).T)
    maha = np.sum(solved**2, axis=0)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (maha + log_det + d * np.log(2.0 * np.pi))


def _logsumexp(rows):
    top = rows.max(axis=1, keepdims=True)
    return top[:, 0] + np.log(np.exp(rows - top).sum(axis=1))


@dataclass
class GaussianMixture:
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, d)
    covariances: np.ndarray  # (K, d, d)
    log_likelihoods: list = field(default_factory=list)  # EM trace, one per iteration

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component_log_prob(self, data):
        data = np.atleast_2d(data)
        out = np.empty((data.shape[0], self.n_components))
        for k in range(self.n_components):
            out[:, k] = np.log(self.weights[k]) + _log_gaussian(
                data, self.means[k], self.covariances[k]
            )
        return out

    def log_likelihood(self, data) -> float:
        return float(_logsumexp(self.component_log_prob(data)).sum())

    def n_parameters(self) -> int:
        d = self.dim
        k = self.n_components
        return (k - 1) + k * d + k * d * (d + 1) // 2

    def bic(self, data) -> float:
        return -2.0 * self.log_likelihood(data) + self.n_parameters() * np.log(len(data))

    def sample(self, count: int, rng):
        """Draw `count` vectors; component choice then a normal draw."""
        if count == 0:
            return np.zeros((0, self.dim))
        comps = rng.choice(self.n_components, size=count, p=self.weights)
        z = rng.standard_normal((count, self.dim))
        out = np.empty((count, self.dim))
        for k in range(self.n_components):
            sel = comps == k
            if not np.any(sel):
                continue
            chol = np.linalg.cholesky(self.covariances[k])
            out[sel] = self.means[k] + z[sel] @ chol.T
        return out

    def to_doc(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "GaussianMixture":
        return cls(
            weights=np.asarray(doc["weights"], dtype=float),
            means=np.asarray(doc["means"], dtype=float),
            covariances=np.asarray(doc["covariances"], dtype=float),
        )


def _kmeanspp_centers(data, k, rng):
    """k-means++ seeding: spread initial means by squared distance."""
    centers = [data[rng.integers(len(data))]]
    for _ in range(1, k):
        d2 = np.min(
            [np.sum((data - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0:
            centers.append(data[rng.integers(len(data))])
            continue
        centers.append(data[rng.choice(len(data), p=d2 / total)])
    return np.array(centers)


def fit_gmm(
    data,
    k: int,
    rng,
    reg: float = 1e-6,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> GaussianMixture:
    """Fit a k-component full-covariance mixture by EM.

    Regularization reg * I is added to every covariance each M-step. A
    component whose covariance still fails to factor is re-seeded once
    from the data; a second collapse raises SingularComponent.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or len(data) < 2:
        raise ValueError("need a (N, d) data matrix with N >= 2")
    if k < 1:
        raise ValueError("k must be >= 1")
    n, d = data.shape
    eye = reg * np.eye(d)
    global_cov = np.cov(data.T, bias=True).reshape(d, d) + eye

    means = _kmeanspp_centers(data, k, rng)
    d2 = ((data[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    resp = np.zeros((n, k))
    resp[np.arange(n), d2.argmin(axis=1)] = 1.0
    weights = np.full(k, 1.0 / k)
    covs = np.repeat(global_cov[None], k, axis=0)
    mix = GaussianMixture(weights=weights, means=means, covariances=covs)

    reseeded = set()
    history: list[float] = []
    for _ in range(max_iter):
        # M-step from current responsibilities
        bulk = resp.sum(axis=0)
        for k_i in range(k):
            if bulk[k_i] < 1e-12:
                _reseed(mix, k_i, data, global_cov, rng, reseeded)
                continue
            mean = resp[:, k_i] @ data / bulk[k_i]
            centered = data - mean
            cov = (resp[:, k_i] * centered.T) @ centered / bulk[k_i] + eye
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                _reseed(mix, k_i, data, global_cov, rng, reseeded)
                continue
            mix.means[k_i] = mean
            mix.covariances[k_i] = cov
            mix.weights[k_i] = bulk[k_i] / n
        mix.weights = mix.weights / mix.weights.sum()

        # E-step and convergence check
        log_prob = mix.component_log_prob(data)
        norm = _logsumexp(log_prob)
        ll = float(norm.sum())
        resp = np.exp(log_prob - norm[:, None])
        history.append(ll)
        if len(history) >= 2 and abs(history[-1] - history[-2]) < tol:
            break

    mix.log_likelihoods = history
    return mix


def _reseed(mix, k_i, data, global_cov, rng, reseeded):
    if k_i in reseeded:
        raise SingularComponent(f"component {k_i} collapsed twice")
    reseeded.add(k_i)
    mix.means[k_i] = data[rng.integers(len(data))]
    mix.covariances[k_i] = global_cov.copy()
    mix.weights[k_i] = 1.0 / mix.n_components


def select_components(data, k_max: int, rng, **fit_kwargs):
    """Fit K = 1..k_max and keep the mixture with the lowest BIC.

    Returns (k_best, mixture, bics) where bics maps K to its score;
    component counts that fail to fit are skipped.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    best = None
    bics: dict[int, float] = {}
    for k in range(1, k_max + 1):
        try:
            mix = fit_gmm(data, k, rng, **fit_kwargs)
        except (SingularComponent, np.linalg.LinAlgError):
            continue
        score = mix.bic(data)
        bics[k] = float(score)
        if best is None or score < best[1]:
            best = (k, score, mix)
    if best is None:
        raise SingularComponent("no component count produced a valid fit")
    return best[0], best[2], bics
