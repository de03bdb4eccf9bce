"""Synthetic muscle-driven arm used as the motor plant.

The arm is a kinematic chain of revolute joints with alternating z/y
axes. Joint angles are a clamped linear map of the 24 muscle pressures,
each joint driven by one antagonistic pressure pair plus a few muscles
that couple adjacent joints, so the pressure-to-position map is heavily
redundant. Observed end-effector positions carry seeded Gaussian noise
(default 10 mm along x, 1 mm along y and z, mimicking depth-camera
tracking error).

Motor commands, task points and maps are plain numpy arrays:
pressures shape (24,) in MPa, task points shape (3,) in metres.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .seeding import derive_rng

N_MUSCLES = 24
N_JOINTS = 10
N_TASK = 3
PRESSURE_MIN = 0.0
PRESSURE_MAX = 0.4
HOME_PRESSURE = 0.2


MAJOR_JOINTS = (0, 1, 5)


def default_muscle_map(
    major_gain: float = 1.0,
    minor_gain: float = 0.2,
    coupling_gain: float = 0.25,
    major_joints=MAJOR_JOINTS,
):
    """Build the default 10x24 pressure-to-angle map.

    Muscles 2i and 2i+1 form the antagonistic pair of joint i; muscles
    20..23 each drive two adjacent joints with opposite small
    coefficients, giving actuation routes beyond pairwise antagonism.
    Three high-gain joints span the workspace, the remaining seven add
    low-gain redundancy, which keeps the empirical goal cloud dense
    enough that its boundary is discoverable by babbling.
    """
    m = np.zeros((N_JOINTS, N_MUSCLES))
    for j in range(N_JOINTS):
        gain = major_gain if j in major_joints else minor_gain
        m[j, 2 * j] = gain
        m[j, 2 * j + 1] = -gain
    for k in range(4):
        j = 2 * k + 1
        m[j, 20 + k] = coupling_gain
        m[j + 1, 20 + k] = -coupling_gain
    return m


class PlantConfig(BaseModel):
    """Serializable description of the simulated arm."""

    joint_count: int = N_JOINTS
    link_lengths: list[float] = Field(default_factory=lambda: [0.05] * N_JOINTS)
    muscle_map: list[list[float]] = Field(
        default_factory=lambda: default_muscle_map().tolist()
    )
    joint_limits: list[tuple[float, float]] = Field(
        default_factory=lambda: [(-1.1, 1.1)] * N_JOINTS
    )
    obs_noise_std: tuple[float, float, float] = (0.010, 0.001, 0.001)
    seed: int = 0
    drift_rate: float = 0.0

    @model_validator(mode="after")
    def _check_geometry(self):
        if self.joint_count != N_JOINTS:
            raise ValueError("joint_count is fixed at 10")
        if len(self.link_lengths) != N_JOINTS:
            raise ValueError("need 10 link lengths")
        if any(l <= 0 for l in self.link_lengths):
            raise ValueError("link lengths must be positive")
        m = np.asarray(self.muscle_map, dtype=float)
        if m.shape != (N_JOINTS, N_MUSCLES):
            raise ValueError("muscle_map must be 10x24")
        if np.linalg.matrix_rank(m) != N_JOINTS:
            raise ValueError("muscle_map must have rank 10")
        for j, row in enumerate(m):
            if not (np.any(row > 0) and np.any(row < 0)):
                raise ValueError(f"joint {j} lacks an antagonistic pressure pair")
        if len(self.joint_limits) != N_JOINTS:
            raise ValueError("need 10 joint limit pairs")
        if any(lo >= hi for lo, hi in self.joint_limits):
            raise ValueError("joint limits must satisfy lo < hi")
        if any(s < 0 for s in self.obs_noise_std):
            raise ValueError("obs_noise_std must be nonnegative")
        if self.drift_rate < 0:
            raise ValueError("drift_rate must be nonnegative")
        return self


def clamp_pressure(q):
    """Clamp a pressure command to the actuation range [0, 0.4] MPa."""
    return np.clip(np.asarray(q, dtype=float), PRESSURE_MIN, PRESSURE_MAX)


def _rotate_columns(cols, axis: str, angles):
    """Right-multiply per-row orientation columns by a joint rotation.

    cols is a list of three (B, 3) arrays (the orientation matrix columns).
    Written as elementwise column combinations in a fixed order so results
    are bit-identical regardless of how calls are batched.
    """
    c = np.cos(angles)[:, None]
    s = np.sin(angles)[:, None]
    c0, c1, c2 = cols
    if axis == "z":
        return [c0 * c + c1 * s, c1 * c - c0 * s, c2]
    return [c0 * c - c2 * s, c1, c2 * c + c0 * s]  # y axis


class Plant:
    """Stateful, seedable forward model of the arm.

    A plant owns its observation-noise stream: two plants built from the
    same (config, seed) produce identical outputs for identical call
    sequences. Use :meth:`fork` to derive independently seeded clones for
    evaluation or parallel candidate scoring.
    """

    # joint axes alternate so the workspace is genuinely 3-D
    _axes = ["z" if i % 2 == 0 else "y" for i in range(N_JOINTS)]

    def __init__(self, config: PlantConfig | None = None):
        self.config = config or PlantConfig()
        self._links = np.asarray(self.config.link_lengths, dtype=float)
        self._map = np.asarray(self.config.muscle_map, dtype=float)
        limits = np.asarray(self.config.joint_limits, dtype=float)
        self._theta_lo = limits[:, 0]
        self._theta_hi = limits[:, 1]
        self._noise_std = np.asarray(self.config.obs_noise_std, dtype=float)
        self._rng = derive_rng(self.config.seed, "plant")
        self.call_count = 0

    # -- kinematics ---------------------------------------------------

    def joint_angles(self, q_batch):
        q = clamp_pressure(np.atleast_2d(q_batch))
        # row-wise reduction instead of a matmul: BLAS kernels change with
        # batch size at ULP level, which would break the clone-and-reduce
        # determinism contract
        theta = (q[:, None, :] * self._map[None, :, :]).sum(axis=2)
        return np.clip(theta, self._theta_lo, self._theta_hi)

    def _chain_positions(self, theta):
        """End-effector positions for joint angles, shape (B, 10) -> (B, 3)."""
        b = theta.shape[0]
        cols = [
            np.broadcast_to(e, (b, 3)).copy()
            for e in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))
        ]
        pos = np.zeros((b, 3))
        for i in range(N_JOINTS):
            cols = _rotate_columns(cols, self._axes[i], theta[:, i])
            pos = pos + self._links[i] * cols[0]
        return pos

    def noiseless_positions(self, q_batch):
        """True end-effector positions without observation noise or drift."""
        return self._chain_positions(self.joint_angles(q_batch))

    # -- execution ----------------------------------------------------

    def forward_batch(self, q_batch):
        """Execute commands in row order; returns (positions, clamped commands)."""
        q_star = np.atleast_2d(np.asarray(q_batch, dtype=float))
        q = clamp_pressure(q_star)
        if self.config.drift_rate > 0.0:
            pos = np.empty((q.shape[0], 3))
            for i in range(q.shape[0]):
                self._map = self._map + self.config.drift_rate * self._rng.standard_normal(
                    self._map.shape
                )
                theta = np.clip(q[i] @ self._map.T, self._theta_lo, self._theta_hi)
                pos[i] = self._chain_positions(theta[None])[0]
        else:
            pos = self._chain_positions(self.joint_angles(q))
        noise = self._rng.standard_normal(pos.shape) * self._noise_std
        self.call_count += q.shape[0]
        return pos + noise, q

    def forward(self, q_star):
        """Execute one command; returns (observed position, clamped command)."""
        x, q = self.forward_batch(np.asarray(q_star, dtype=float)[None])
        return x[0], q[0]

    # -- derived quantities --------------------------------------------

    @property
    def q_home(self):
        return np.full(N_MUSCLES, HOME_PRESSURE)

    @property
    def x_home(self):
        return self.noiseless_positions(self.q_home[None])[0]

    @property
    def reach_radius(self) -> float:
        return float(self._links.sum())

    def random_postures(self, count: int, rng=None):
        rng = self._rng if rng is None else rng
        return rng.uniform(PRESSURE_MIN, PRESSURE_MAX, size=(count, N_MUSCLES))

    def control_accuracy(self, repetitions_p: int = 20, repeats_r: int = 20) -> float:
        """Average repeatability error D over random postures.

        Each of P random postures is executed R times; D is the mean over
        postures of the mean Euclidean distance of the repeats to their
        per-posture centroid.
        """
        if repetitions_p < 1 or repeats_r < 2:
            raise ValueError("need P >= 1 and R >= 2")
        postures = self.random_postures(repetitions_p)
        errs = np.empty(repetitions_p)
        for p in range(repetitions_p):
            xs, _ = self.forward_batch(np.repeat(postures[p][None], repeats_r, axis=0))
            centroid = xs.mean(axis=0)
            errs[p] = np.linalg.norm(xs - centroid, axis=1).mean()
        return float(errs.mean())

    def fork(self, *keys) -> "Plant":
        """Clone with a derived noise stream (current drifted map is kept)."""
        clone = Plant(self.config)
        clone._map = self._map.copy()
        clone._rng = derive_rng(self.config.seed, "plant", *keys)
        return clone
