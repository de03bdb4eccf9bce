"""Local online motor babbling and abundance analysis.

For a queried goal, the learned inverse model only knows one efficient
posture; the motor abundance (all the other postures reaching the same
point) is recovered by running short CMA-ES trials seeded from the
goal's neighborhood. Every evaluated posture that lands within the
collection radius of the goal is kept, the collected sets are captured
as Gaussian mixtures, and resampling those mixtures reproduces the
abundance on demand.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel

from .babble import feedback_reach
from .cmaes import CmaConfig, CmaEs
from .gmm import GaussianMixture, select_components
from .goalspace import GoalGrid
from .invmodel import InverseModel
from .plant import N_MUSCLES, Plant

log = logging.getLogger(__name__)

TAG_GOALBABBLE = "goalbabble"
TAG_FEEDBACK = "feedback"
TAG_CMA = "cma"


class AbundanceConfig(BaseModel):
    """Algorithm constants for motor babbling trials."""

    alpha: float = 0.05
    fb_steps: int = 30
    trials: int = 5
    lam: int = 13
    radius: float = 0.02
    scale: float = 10.0
    f_star: float = 0.03
    max_evals_per_trial: int = 1000
    k_max: int = 10
    n_eval: int = 200
    sigma_fallback: float = 0.05

    @property
    def reach_tolerance(self) -> float:
        """Target distance implied by the fitness scale, f_star / scale."""
        return self.f_star / self.scale


@dataclass
class PostureSet:
    """Tagged (pressure, position) samples gathered around one goal."""

    pressures: np.ndarray  # (N, 24)
    points: np.ndarray  # (N, 3)
    tags: list[str]

    @classmethod
    def empty(cls) -> "PostureSet":
        return cls(np.zeros((0, N_MUSCLES)), np.zeros((0, 3)), [])

    @classmethod
    def from_samples(cls, pressures, points, tag: str) -> "PostureSet":
        pressures = np.asarray(pressures, dtype=float).reshape(-1, N_MUSCLES)
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        return cls(pressures, points, [tag] * len(pressures))

    def __len__(self):
        return len(self.tags)

    def extend(self, other: "PostureSet") -> "PostureSet":
        return PostureSet(
            np.concatenate([self.pressures, other.pressures]),
            np.concatenate([self.points, other.points]),
            self.tags + other.tags,
        )

    def near(self, x_star, radius: float) -> "PostureSet":
        if len(self) == 0:
            return PostureSet.empty()
        keep = np.linalg.norm(self.points - np.asarray(x_star), axis=1) < radius
        return PostureSet(
            self.pressures[keep],
            self.points[keep],
            [t for t, k in zip(self.tags, keep) if k],
        )


def local_samples(positions, pressures, x_star, radius: float) -> PostureSet:
    """Goal-babbling samples within `radius` of the queried goal."""
    return PostureSet.from_samples(pressures, positions, TAG_GOALBABBLE).near(
        x_star, radius
    )


def nearest_goals(grid: GoalGrid, x_star, count: int):
    """The `count` grid goals closest to x_star, nearest first."""
    dist = np.linalg.norm(grid.goals - np.asarray(x_star), axis=1)
    order = np.argsort(dist, kind="stable")
    return grid.goals[order[:count]]


def query_abundance(
    x_star,
    model: InverseModel,
    local: PostureSet,
    plant: Plant,
    config: AbundanceConfig,
    grid: GoalGrid,
    rng,
):
    """Collect motor abundance at x_star with CMA-ES trials (one per
    neighboring goal), bootstrapped from goal-babbling samples.

    Each trial starts the feedback controller at a neighboring goal to
    find a posture near x_star, initializes the mean there and the step
    size from the empirical variance of the local samples, then evolves
    with fitness scale * distance-to-goal until f_star or the budget.
    Every executed posture within the collection radius joins the
    result. Returns (posture set, per-trial info dicts).
    """
    x_star = np.asarray(x_star, dtype=float)
    collected = PostureSet.empty()
    trial_info = []
    for trial, start_goal in enumerate(nearest_goals(grid, x_star, config.trials)):
        best_q, best_err, visited = feedback_reach(
            x_star,
            model,
            plant,
            alpha=config.alpha,
            steps=config.fb_steps,
            start=start_goal,
            radius=config.radius,
        )
        fb_set = (
            PostureSet.from_samples(
                [q for _, q in visited], [x for x, _ in visited], TAG_FEEDBACK
            )
            if visited
            else PostureSet.empty()
        )
        seed_union = local.extend(fb_set)
        if len(seed_union) < 2:
            sigma0 = config.sigma_fallback
            log.warning(
                "trial %d at %s: only %d seed postures, sigma falls back to %.3f",
                trial, np.round(x_star, 3), len(seed_union), sigma0,
            )
        else:
            # RMS per-muscle standard deviation of the seed samples; a raw
            # mean of variances is dimensionally a variance and starts the
            # search far below the observation noise, where selection
            # carries no signal and the step size never adapts
            sigma0 = float(np.sqrt(np.var(seed_union.pressures, axis=0).mean()))
            if sigma0 <= 0.0:
                sigma0 = config.sigma_fallback

        es = CmaEs(best_q, sigma0, config=CmaConfig(dim=N_MUSCLES, lam=config.lam), rng=rng)
        while es.evaluations < config.max_evals_per_trial and es.best_f > config.f_star:
            candidates = es.ask()
            observed, executed = plant.forward_batch(candidates)
            errors = np.linalg.norm(observed - x_star, axis=1)
            hits = errors < config.radius
            if np.any(hits):
                collected = collected.extend(
                    PostureSet.from_samples(executed[hits], observed[hits], TAG_CMA)
                )
            es.tell(candidates, config.scale * errors)
        trial_info.append(
            {
                "trial": trial,
                "start_goal": start_goal.tolist(),
                "fb_best_error": float(best_err),
                "fb_hits": len(fb_set),
                "sigma0": float(sigma0),
                "evaluations": int(es.evaluations),
                "best_f": float(es.best_f),
                "sigma_final": float(es.state.sigma),
                "collected": int(len(collected)),
            }
        )
    return collected, trial_info


def select_goals(grid: GoalGrid, count: int = 10):
    """Indices of `count` goals spread over the grid.

    Farthest-point sampling seeded at the goal nearest the centroid, so
    the selection covers the edges while staying reproducible.
    """
    goals = grid.goals
    if len(goals) <= count:
        return list(range(len(goals)))
    centroid = goals.mean(axis=0)
    chosen = [int(np.argmin(np.linalg.norm(goals - centroid, axis=1)))]
    dist = np.linalg.norm(goals - goals[chosen[0]], axis=1)
    while len(chosen) < count:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(goals - goals[nxt], axis=1))
    return chosen


@dataclass
class SetSummary:
    """Statistics of one posture set after GMM capture and resampling."""

    name: str
    n_source: int
    gmm_used: bool
    n_components: int
    mean_error: float
    std_error: float
    muscle_variance: np.ndarray  # (24,)
    covariance: np.ndarray  # (24, 24)

    @property
    def variance_mean(self) -> float:
        return float(self.muscle_variance.mean())

    @property
    def variance_std(self) -> float:
        return float(self.muscle_variance.std())

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "n_source": self.n_source,
            "gmm_used": self.gmm_used,
            "n_components": self.n_components,
            "mean_error": self.mean_error,
            "std_error": self.std_error,
            "variance_mean": self.variance_mean,
            "variance_std": self.variance_std,
            "muscle_variance": self.muscle_variance.tolist(),
            "covariance": self.covariance.tolist(),
        }


@dataclass
class AbundanceReport:
    x_star: np.ndarray
    baseline: SetSummary
    cma: SetSummary
    largest_change: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "goal": self.x_star.tolist(),
            "baseline": self.baseline.to_doc(),
            "cma": self.cma.to_doc(),
            "largest_change": self.largest_change,
        }


def _summarize_set(name, postures: PostureSet, plant, x_star, config, rng) -> SetSummary:
    min_samples = 2 * N_MUSCLES
    if len(postures) >= min_samples:
        k_best, mix, _ = select_components(postures.pressures, config.k_max, rng)
        samples = mix.sample(config.n_eval, rng)
        gmm_used, n_comp = True, k_best
    else:
        # too few postures for a stable 24-D fit: resample the raw set
        log.warning("set %s has %d postures, reporting raw statistics", name, len(postures))
        idx = rng.integers(len(postures), size=config.n_eval)
        samples = postures.pressures[idx]
        gmm_used, n_comp = False, 0
    observed, executed = plant.forward_batch(samples)
    errors = np.linalg.norm(observed - x_star, axis=1)
    return SetSummary(
        name=name,
        n_source=len(postures),
        gmm_used=gmm_used,
        n_components=n_comp,
        mean_error=float(errors.mean()),
        std_error=float(errors.std()),
        muscle_variance=np.var(executed, axis=0),
        covariance=np.cov(executed.T, bias=True),
    )


def abundance_report(
    baseline: PostureSet,
    cma: PostureSet,
    plant: Plant,
    x_star,
    config: AbundanceConfig,
    rng,
) -> AbundanceReport:
    """Compare goal-babbling baseline against CMA-collected postures.

    Both sets are captured as mixtures, resampled n_eval times, executed
    on forked plants, and summarized. The covariance entry with the
    largest absolute change is singled out for inspection.
    """
    if len(baseline) == 0 or len(cma) == 0:
        raise ValueError("both posture sets must be non-empty")
    x_star = np.asarray(x_star, dtype=float)
    base = _summarize_set("baseline", baseline, plant.fork("report", "baseline"), x_star, config, rng)
    evolved = _summarize_set("cma", cma, plant.fork("report", "cma"), x_star, config, rng)
    delta = np.abs(evolved.covariance - base.covariance)
    i, j = np.unravel_index(int(np.argmax(delta)), delta.shape)
    return AbundanceReport(
        x_star=x_star,
        baseline=base,
        cma=evolved,
        largest_change={
            "muscle_pair": [int(i), int(j)],
            "baseline": float(base.covariance[i, j]),
            "cma": float(evolved.covariance[i, j]),
        },
    )
