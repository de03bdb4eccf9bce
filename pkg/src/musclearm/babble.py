"""Directed online goal babbling.

A session repeatedly picks a random grid goal, walks piecewise linear
targets toward it in fixed task-space steps, executes the perturbed
inverse estimate on the plant, and feeds the observed samples back into
the inverse model with direction/efficiency weights. Between trials the
arm returns to the home posture with a fixed probability, which keeps
exploration anchored in the known region. Exploratory noise is an
affine perturbation of the command whose parameters follow a
variance-preserving Gaussian random walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field

from .goalspace import GoalGrid
from .invmodel import InverseModel
from .plant import N_MUSCLES, N_TASK, Plant
from .seeding import derive_rng


class DegenerateDirection(ValueError):
    """Target and goal coincide; no step direction exists."""


class BabbleConfig(BaseModel):
    """Session parameters; defaults mirror the learning experiment."""

    delta_x: float = 0.02
    delta_q: float = 0.05
    p_home: float = 0.1
    rate_hz: float = 5.0
    total_samples: int = 20000
    eval_every: int = 4000
    noise_sigma: float = 0.015
    noise_sigma_delta: float = 0.0005
    fb_alpha: float = 0.05
    fb_steps: int = 30
    r_proto: float = 0.02
    bandwidth: float = 0.02
    learning_rate: float = 0.1
    anneal_samples: float = 5000.0

    def model_post_init(self, _ctx):
        if self.delta_x <= 0 or self.delta_q <= 0:
            raise ValueError("step lengths must be positive")
        if not 0.0 <= self.p_home <= 1.0:
            raise ValueError("p_home must be a probability")
        if self.noise_sigma <= 0 or self.noise_sigma_delta < 0:
            raise ValueError("need sigma > 0 and sigma_delta >= 0")

    def new_model(self) -> InverseModel:
        return InverseModel(
            r_proto=self.r_proto,
            bandwidth=self.bandwidth,
            learning_rate=self.learning_rate,
            anneal_samples=self.anneal_samples,
        )


# -- exploratory noise ----------------------------------------------------


class NoiseState:
    """Affine command perturbation E(x*) = A x* + b.

    Every entry of A and b starts as N(0, sigma^2) and follows
    e <- sqrt(sigma^2 / (sigma^2 + sigma_delta^2)) * (e + delta), which
    leaves the stationary marginal at N(0, sigma^2).
    """

    def __init__(self, sigma: float, sigma_delta: float, rng):
        self.sigma = float(sigma)
        self.sigma_delta = float(sigma_delta)
        self.A = rng.normal(0.0, sigma, size=(N_MUSCLES, N_TASK))
        self.b = rng.normal(0.0, sigma, size=N_MUSCLES)

    def eval(self, x_star):
        return self.A @ np.asarray(x_star, dtype=float) + self.b

    def step(self, rng):
        shrink = math.sqrt(self.sigma**2 / (self.sigma**2 + self.sigma_delta**2))
        self.A = shrink * (self.A + rng.normal(0.0, self.sigma_delta, size=self.A.shape))
        self.b = shrink * (self.b + rng.normal(0.0, self.sigma_delta, size=self.b.shape))
        return self


# -- kinematic weighting ----------------------------------------------------


@dataclass
class SampleWeight:
    w_dir: float
    w_eff: float

    @property
    def w(self) -> float:
        return self.w_dir * self.w_eff


def direction_weight(intended_delta, actual_delta) -> float:
    """(1 + cos angle) / 2 between intended and actual displacement."""
    a = np.asarray(intended_delta, dtype=float)
    b = np.asarray(actual_delta, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.5  # no angle defined, neutral direction score
    return 0.5 * (1.0 + float(a @ b) / (na * nb))


def efficiency_weight(dx, dq) -> float:
    """Task displacement per unit command displacement, 0 when dq is zero."""
    nq = np.linalg.norm(dq)
    if nq == 0.0:
        return 0.0
    return float(np.linalg.norm(dx) / nq)


def sample_weight(x, x_prev, x_star, x_star_prev, q, q_prev) -> SampleWeight:
    w_dir = direction_weight(
        np.asarray(x_star) - np.asarray(x_star_prev),
        np.asarray(x) - np.asarray(x_prev),
    )
    w_eff = efficiency_weight(np.asarray(x) - np.asarray(x_prev), np.asarray(q) - np.asarray(q_prev))
    return SampleWeight(w_dir=w_dir, w_eff=w_eff)


# -- target interpolation ---------------------------------------------------


def next_target(x_star, goal, delta_x: float):
    """One step of length delta_x from the current target toward the goal."""
    if delta_x <= 0:
        raise ValueError("delta_x must be positive")
    x_star = np.asarray(x_star, dtype=float)
    goal = np.asarray(goal, dtype=float)
    gap = goal - x_star
    dist = np.linalg.norm(gap)
    if dist == 0.0:
        raise DegenerateDirection("target already sits on the goal")
    return x_star + (delta_x / dist) * gap


def home_return(q_star, q_home, delta_q: float):
    """Via-points of step length delta_q from q_star toward q_home.

    Stops once within delta_q of home; the caller executes the home
    posture itself afterwards.
    """
    if delta_q <= 0:
        raise ValueError("delta_q must be positive")
    q = np.asarray(q_star, dtype=float).copy()
    q_home = np.asarray(q_home, dtype=float)
    points = []
    while np.linalg.norm(q_home - q) >= delta_q and len(points) < 10000:
        gap = q_home - q
        q = q + (delta_q / np.linalg.norm(gap)) * gap
        if np.linalg.norm(q_home - q) < 1e-15:
            break  # landed exactly on home, not a via-point
        points.append(q.copy())
    return points


# -- feedback controller ------------------------------------------------------


def feedback_reach(
    x_star,
    model: InverseModel,
    plant: Plant,
    alpha: float,
    steps: int,
    start=None,
    radius: float | None = None,
):
    """Proportional target shifting toward x_star.

    Iterates the shifted query x^ <- x^ + alpha (x* - x), executing the
    model's inverse estimate each step. Returns (best command, best
    error, visited samples); when `radius` is given only visited samples
    within that distance of x_star are reported.
    """
    if alpha <= 0 or steps < 1:
        raise ValueError("need alpha > 0 and steps >= 1")
    x_star = np.asarray(x_star, dtype=float)
    x_hat = np.asarray(start, dtype=float).copy() if start is not None else x_star.copy()
    best_q = None
    best_err = np.inf
    visited = []
    for _ in range(steps):
        x_obs, q_obs = plant.forward(model.predict(x_hat))
        err_vec = x_star - x_obs
        err = float(np.linalg.norm(err_vec))
        if err < best_err:
            best_err = err
            best_q = q_obs
        if radius is None or err < radius:
            visited.append((x_obs, q_obs))
        x_hat = x_hat + alpha * err_vec
    return best_q, best_err, visited


# -- evaluation ----------------------------------------------------------------


HIST_BIN_WIDTH = 0.005  # metres


@dataclass
class ErrorReport:
    provenance: str
    use_feedback: bool
    errors: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.errors.mean())

    @property
    def std(self) -> float:
        return float(self.errors.std())

    def histogram(self):
        top = max(float(self.errors.max()), HIST_BIN_WIDTH)
        edges = np.arange(0.0, top + HIST_BIN_WIDTH, HIST_BIN_WIDTH)
        counts, edges = np.histogram(self.errors, bins=edges)
        return edges, counts

    def to_doc(self) -> dict:
        edges, counts = self.histogram()
        return {
            "provenance": self.provenance,
            "use_feedback": self.use_feedback,
            "goal_count": int(len(self.errors)),
            "mean_error": self.mean,
            "std_error": self.std,
            "errors": self.errors.tolist(),
            "histogram": {"bin_edges": edges.tolist(), "counts": counts.tolist()},
        }


def evaluate(
    model: InverseModel,
    grid: GoalGrid,
    plant: Plant,
    use_feedback: bool = False,
    alpha: float = 0.05,
    steps: int = 30,
) -> ErrorReport:
    """Reaching error of the model over every goal in the grid."""
    if len(grid) == 0:
        raise ValueError("goal grid is empty")
    if use_feedback:
        errors = np.array(
            [
                feedback_reach(goal, model, plant, alpha=alpha, steps=steps)[1]
                for goal in grid.goals
            ]
        )
    else:
        commands = np.array([model.predict(goal) for goal in grid.goals])
        observed, _ = plant.forward_batch(commands)
        errors = np.linalg.norm(grid.goals - observed, axis=1)
    return ErrorReport(provenance=grid.provenance, use_feedback=use_feedback, errors=errors)


# -- the session ----------------------------------------------------------------


@dataclass
class SessionLog:
    """Per-sample trace plus periodic evaluation snapshots."""

    rate_hz: float
    x_star: list = field(default_factory=list)
    x: list = field(default_factory=list)
    q_star: list = field(default_factory=list)
    q: list = field(default_factory=list)
    w: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def append(self, x_star, x, q_star, q, w):
        self.x_star.append(np.asarray(x_star, dtype=float))
        self.x.append(np.asarray(x, dtype=float))
        self.q_star.append(np.asarray(q_star, dtype=float))
        self.q.append(np.asarray(q, dtype=float))
        self.w.append(float(w))

    def __len__(self):
        return len(self.w)

    @property
    def times(self):
        return np.arange(len(self.w)) / self.rate_hz

    def samples(self):
        """(x, q) observation arrays, shapes (N, 3) and (N, 24)."""
        if not self.w:
            return np.zeros((0, N_TASK)), np.zeros((0, N_MUSCLES))
        return np.array(self.x), np.array(self.q)

    def snapshot_doc(self) -> list[dict]:
        return self.snapshots


def run_session(
    config: BabbleConfig,
    plant: Plant,
    grid: GoalGrid,
    rng=None,
    model: InverseModel | None = None,
):
    """Run one directed goal babbling session; returns (model, log).

    The model is bootstrapped with the exact home pair. Evaluation
    snapshots run on forked plants so they never disturb the training
    noise stream, and their samples are not used for learning.
    """
    if len(grid) == 0:
        raise ValueError("goal grid is empty")
    rng = rng if rng is not None else derive_rng(plant.config.seed, "babble")
    model = model if model is not None else config.new_model()
    noise = NoiseState(config.noise_sigma, config.noise_sigma_delta, rng)
    log = SessionLog(rate_hz=config.rate_hz)

    q_home, x_home = plant.q_home, plant.x_home
    if model.n_units == 0:
        model.update(x_home, q_home, 1.0)

    x_prev, q_prev = x_home.copy(), q_home.copy()
    x_star_cur = x_home.copy()
    q_star_cur = q_home.copy()
    samples = 0

    def execute(q_cmd, x_star_t, intended_delta):
        nonlocal samples, x_prev, q_prev, q_star_cur
        x_obs, q_obs = plant.forward(q_cmd)
        w_dir = direction_weight(intended_delta, x_obs - x_prev)
        w_eff = efficiency_weight(x_obs - x_prev, q_obs - q_prev)
        w = w_dir * w_eff
        model.update(x_obs, q_obs, w)
        noise.step(rng)
        log.append(x_star_t, x_obs, q_cmd, q_obs, w)
        x_prev, q_prev = x_obs, q_obs
        q_star_cur = np.asarray(q_cmd, dtype=float)
        samples += 1
        if config.eval_every > 0 and samples % config.eval_every == 0:
            report = evaluate(model, grid, plant.fork("eval", samples))
            log.snapshots.append(
                {
                    "samples": samples,
                    "provenance": report.provenance,
                    "mean_error": report.mean,
                    "std_error": report.std,
                }
            )

    while samples < config.total_samples:
        if rng.random() < config.p_home:
            # home-return leg: interpolate commands back to the rest posture
            for q_cmd in home_return(q_star_cur, q_home, config.delta_q):
                if samples >= config.total_samples:
                    break
                execute(q_cmd, x_home, x_home - x_prev)
            if samples < config.total_samples:
                execute(q_home, x_home, x_home - x_prev)
            x_star_cur = x_home.copy()
            continue
        goal = grid.goals[rng.integers(len(grid))]
        if np.linalg.norm(goal - x_star_cur) == 0.0:
            log.warnings.append(f"goal at sample {samples} coincides with target, skipped")
            continue
        while samples < config.total_samples and np.linalg.norm(goal - x_star_cur) >= config.delta_x:
            x_star_next = next_target(x_star_cur, goal, config.delta_x)
            q_cmd = model.predict(x_star_next) + noise.eval(x_star_next)
            execute(q_cmd, x_star_next, x_star_next - x_star_cur)
            x_star_cur = x_star_next

    return model, log
