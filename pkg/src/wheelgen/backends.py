"""Deterministic stub backends and the default registry.

Stubs stand in for the diffusion model in fast tests: ``stub-zero``
predicts zero noise everywhere; ``stub-pattern`` is conditioning-sensitive,
steering every sample toward a smooth image derived linearly from the
conditioning vector.
"""

from __future__ import annotations

import numpy as np

from .core import resample_image
from .pipeline import BackendRegistry, ConditioningBundle, DenoiseSchedule
from .training import COND_DIM, bundle_to_cond_vector


class ZeroNoiseBackend:
    parallel_safe = True

    def __init__(self, canvas: int = 64, backend_id: str = "stub-zero"):
        self.id = backend_id
        self.canvas = canvas

    def predict_noise(self, x: np.ndarray, t: int, cond: ConditioningBundle) -> np.ndarray:
        return np.zeros_like(x)


class PatternStubBackend:
    """Predicts the noise that would remain after removing a conditioning-
    derived target image, so sampling converges toward that target.

    The target is a fixed linear map of the conditioning vector rendered at
    8x8 and upsampled, hence smooth and continuous in the weights.
    """

    parallel_safe = True

    def __init__(self, schedule: DenoiseSchedule, canvas: int = 64,
                 backend_id: str = "stub-pattern", seed: int = 1234):
        self.id = backend_id
        self.canvas = canvas
        self.schedule = schedule
        rng = np.random.default_rng(seed)
        self._proj = rng.standard_normal((64, COND_DIM)) / np.sqrt(COND_DIM)

    def target_image(self, cond: ConditioningBundle) -> np.ndarray:
        vec = bundle_to_cond_vector(cond)
        coarse = 1.0 / (1.0 + np.exp(-2.0 * (self._proj @ vec)))
        return resample_image(coarse.reshape(8, 8), self.canvas)

    def predict_noise(self, x: np.ndarray, t: int, cond: ConditioningBundle) -> np.ndarray:
        ab = self.schedule.alpha_bar(t)
        target = self.target_image(cond)
        return (x - np.sqrt(ab) * target) / np.sqrt(1.0 - ab)


def default_registry(canvas: int = 64, schedule: DenoiseSchedule | None = None) -> BackendRegistry:
    from .pipeline import linear_schedule

    if schedule is None:
        schedule = linear_schedule(200)
    reg = BackendRegistry()
    reg.register(ZeroNoiseBackend(canvas))
    reg.register(PatternStubBackend(schedule, canvas))
    return reg
