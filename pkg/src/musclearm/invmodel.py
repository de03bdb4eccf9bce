"""Learnable inverse model: prototype centers with local linear maps.

The model keeps a growing set of prototype units. Each unit k has a
task-space center c_k, a constant motor term o_k and a linear term J_k;
prediction blends the local estimates o_k + J_k (x - c_k) with
normalized Gaussian responsibilities of width `bandwidth`. Training is
online: a sample far from every center spawns a new unit, anything else
takes one weighted stochastic gradient step on the squared command
error. Centers never move once placed, so unit spacing stays >= r_proto.
"""

from __future__ import annotations

import numpy as np

from .plant import N_MUSCLES, N_TASK

MODEL_FORMAT = "musclearm-invmodel-v1"

# cap on learning_rate * sample_weight: the efficiency weight w_eff is a
# ratio of observed displacements and can spike when the command barely
# moved, which would make a single SGD step overshoot the quadratic
STEP_CAP = 0.25


class InverseModel:
    """Online regression from task points to motor commands."""

    def __init__(
        self,
        r_proto: float = 0.02,
        bandwidth: float = 0.02,
        learning_rate: float = 0.1,
        anneal_samples: float = 5000.0,
    ):
        if r_proto <= 0 or bandwidth <= 0 or learning_rate <= 0:
            raise ValueError("r_proto, bandwidth and learning_rate must be positive")
        self.r_proto = float(r_proto)
        self.bandwidth = float(bandwidth)
        self.learning_rate = float(learning_rate)
        self.anneal_samples = float(anneal_samples)
        self.update_count = 0
        self._n = 0
        cap = 64
        self._centers = np.zeros((cap, N_TASK))
        self._offsets = np.zeros((cap, N_MUSCLES))
        self._jacobians = np.zeros((cap, N_MUSCLES, N_TASK))
        self._counts = np.zeros(cap, dtype=int)

    # -- views ----------------------------------------------------------

    @property
    def n_units(self) -> int:
        return self._n

    @property
    def centers(self):
        return self._centers[: self._n]

    @property
    def offsets(self):
        return self._offsets[: self._n]

    @property
    def jacobians(self):
        return self._jacobians[: self._n]

    def prototype_spheres(self):
        """One (center, radius) sphere per unit, radius r_proto."""
        return [(self._centers[k].copy(), self.r_proto) for k in range(self._n)]

    # -- prediction -------------------------------------------------------

    def _responsibilities(self, x):
        d2 = ((self.centers - x) ** 2).sum(axis=1)
        # shift before exp so far queries cannot underflow to 0/0
        rho = np.exp(-(d2 - d2.min()) / (2.0 * self.bandwidth**2))
        return rho / rho.sum(), d2

    def predict(self, x):
        """Blended motor command for task point x. Not clamped."""
        if self._n == 0:
            raise RuntimeError("inverse model has no units yet")
        x = np.asarray(x, dtype=float)
        rho, _ = self._responsibilities(x)
        local = self.offsets + np.einsum("kmt,kt->km", self.jacobians, x - self.centers)
        return rho @ local

    # -- training ---------------------------------------------------------

    def loss_gradients(self, x, q, w):
        """Gradient of w*||predict(x) - q||^2 w.r.t. offsets and jacobians."""
        x = np.asarray(x, dtype=float)
        q = np.asarray(q, dtype=float)
        rho, _ = self._responsibilities(x)
        delta = x - self.centers
        local = self.offsets + np.einsum("kmt,kt->km", self.jacobians, delta)
        err = rho @ local - q
        grad_o = 2.0 * w * rho[:, None] * err[None, :]
        grad_j = grad_o[:, :, None] * delta[:, None, :]
        return grad_o, grad_j

    def _grow(self):
        cap = self._centers.shape[0]
        if self._n < cap:
            return
        self._centers = np.concatenate([self._centers, np.zeros_like(self._centers)])
        self._offsets = np.concatenate([self._offsets, np.zeros_like(self._offsets)])
        self._jacobians = np.concatenate([self._jacobians, np.zeros_like(self._jacobians)])
        self._counts = np.concatenate([self._counts, np.zeros_like(self._counts)])

    def update(self, x, q, w: float):
        """Consume one (position, command) sample with weight w >= 0."""
        if w < 0:
            raise ValueError("sample weight must be nonnegative")
        if w == 0.0:
            return  # exact no-op, including unit insertion
        x = np.asarray(x, dtype=float)
        q = np.asarray(q, dtype=float)
        self.update_count += 1
        if self._n == 0 or np.min(((self.centers - x) ** 2).sum(axis=1)) >= self.r_proto**2:
            self._insert(x, q)
            return
        step = self.learning_rate * w / (1.0 + self.update_count / self.anneal_samples)
        step = min(step, STEP_CAP)
        grad_o, grad_j = self.loss_gradients(x, q, w=1.0)
        self._offsets[: self._n] -= step * grad_o
        self._jacobians[: self._n] -= step * grad_j
        nearest = int(np.argmin(((self.centers - x) ** 2).sum(axis=1)))
        self._counts[nearest] += 1

    def _insert(self, x, q):
        self._grow()
        k = self._n
        self._centers[k] = x
        self._offsets[k] = q
        if k == 0:
            self._jacobians[k] = 0.0
        else:
            nearest = int(np.argmin(((self.centers - x) ** 2).sum(axis=1)))
            self._jacobians[k] = self._jacobians[nearest]
        self._counts[k] = 1
        self._n += 1

    # -- serialization ------------------------------------------------------

    def to_doc(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "r_proto": self.r_proto,
            "bandwidth": self.bandwidth,
            "learning_rate": self.learning_rate,
            "anneal_samples": self.anneal_samples,
            "update_count": self.update_count,
            "units": [
                {
                    "center": self._centers[k].tolist(),
                    "offset": self._offsets[k].tolist(),
                    "jacobian": self._jacobians[k].tolist(),
                    "sample_count": int(self._counts[k]),
                }
                for k in range(self._n)
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "InverseModel":
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model document: {doc.get('format')!r}")
        model = cls(
            r_proto=doc["r_proto"],
            bandwidth=doc["bandwidth"],
            learning_rate=doc["learning_rate"],
            anneal_samples=doc["anneal_samples"],
        )
        model.update_count = int(doc["update_count"])
        for unit in doc["units"]:
            model._grow()
            k = model._n
            model._centers[k] = unit["center"]
            model._offsets[k] = unit["offset"]
            model._jacobians[k] = unit["jacobian"]
            model._counts[k] = unit["sample_count"]
            model._n += 1
        return model
