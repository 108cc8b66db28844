"""Constrained ancestral sampling: denoising sub-processes with symmetry and
circular-mask projection in between, plus final masking/replication.

Steps are numbered 1..T; schedule arrays are indexed t-1.  Each output of a
run gets its own Generator seeded from (request seed, output index), so
outputs are independent and individually reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, runtime_checkable

import numpy as np

from .core import GenerationRequest, SymmetryConfig
from .symmetry import apply_circular_mask, replicate_and_mask


# ---------------------------------------------------------------------------
# schedule


@dataclass(frozen=True)
class DenoiseSchedule:
    betas: np.ndarray  # shape (T,), values in (0,1)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size == 0:
            raise ValueError("betas must be a nonempty 1-d array")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ValueError("betas must lie strictly inside (0,1)")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas", 1.0 - betas)
        object.__setattr__(self, "alpha_bars", np.cumprod(1.0 - betas))

    @property
    def T(self) -> int:
        return self.betas.size

    def beta(self, t: int) -> float:
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        return float(self.alphas[t - 1])

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[t - 1]) if t > 0 else 1.0


def linear_schedule(T: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02) -> DenoiseSchedule:
    """Linear betas, rescaled by 1000/T so shorter schedules keep the
    reference 1000-step total noise budget (alpha_bar(T) stays ~4e-5
    instead of drifting toward 1 as T shrinks)."""
    scale = 1000.0 / T
    betas = np.linspace(beta_start * scale, beta_end * scale, T)
    return DenoiseSchedule(np.minimum(betas, 0.999))


@dataclass(frozen=True)
class SubProcessPlan:
    """Step indices where constraints are projected, and how.

    Boundaries live strictly inside (0, T); an empty list plus
    final_replication=False degenerates to vanilla ancestral sampling.
    """

    boundaries: tuple[int, ...] = ()
    project_mode: str = "on_x0_then_renoise"  # or "on_sample"

    def __post_init__(self):
        bs = tuple(sorted(int(b) for b in self.boundaries))
        if len(set(bs)) != len(bs):
            raise ValueError("duplicate projection boundaries")
        object.__setattr__(self, "boundaries", bs)
        if self.project_mode not in ("on_x0_then_renoise", "on_sample"):
            raise ValueError(f"unknown project_mode {self.project_mode!r}")

    def validate(self, T: int) -> None:
        for b in self.boundaries:
            if not (0 < b < T):
                raise ValueError(f"boundary {b} outside (0, {T})")


def default_plan(T: int) -> SubProcessPlan:
    """Two projections, at 2/3 and 1/3 of the schedule."""
    return SubProcessPlan(boundaries=(T // 3, (2 * T) // 3))


# ---------------------------------------------------------------------------
# backends


@dataclass(frozen=True)
class ConditioningBundle:
    """Everything the denoiser sees besides the noisy image and the step."""

    prompt: str
    prompt_embedding: Optional[np.ndarray] = None
    global_image: Optional[np.ndarray] = None  # template embedding
    context_images: tuple[tuple[np.ndarray, float], ...] = ()  # (embedding, weight)
    resolved_exemplars: tuple[dict, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "context_images", tuple(self.context_images))
        object.__setattr__(self, "resolved_exemplars", tuple(self.resolved_exemplars))

    def mixed_context(self, dim: int) -> np.ndarray:
        """Weighted-sum surrogate for cross-attention mixing."""
        acc = np.zeros(dim)
        for vec, w in self.context_images:
            acc = acc + w * vec
        return acc

    def provenance(self) -> dict:
        return {
            "prompt": self.prompt,
            "exemplars": [dict(e) for e in self.resolved_exemplars],
            "context_weights": [float(w) for _, w in self.context_images],
            "has_global": self.global_image is not None,
        }


@runtime_checkable
class DenoiserBackend(Protocol):
    id: str
    canvas: int
    parallel_safe: bool

    def predict_noise(
        self, x: np.ndarray, t: int, cond: ConditioningBundle
    ) -> np.ndarray: ...


class BackendError(RuntimeError):
    pass


class BackendRegistry:
    def __init__(self):
        self._backends: dict[str, DenoiserBackend] = {}

    def register(self, backend: DenoiserBackend) -> None:
        self._backends[backend.id] = backend

    def get(self, backend_id: str) -> DenoiserBackend:
        if backend_id not in self._backends:
            raise KeyError(f"unknown backend {backend_id!r}")
        return self._backends[backend_id]

    def ids(self) -> list[str]:
        return sorted(self._backends)

    def __contains__(self, backend_id: str) -> bool:
        return backend_id in self._backends


# ---------------------------------------------------------------------------
# sampling primitives


def output_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def init_state(
    sketch: Optional[np.ndarray],
    schedule: DenoiseSchedule,
    start_step: int,
    rng: np.random.Generator,
    shape: Optional[tuple[int, ...]] = None,
) -> tuple[np.ndarray, int]:
    """Initial noisy state and the step it sits at.

    With a sketch: the forward-diffused sketch at start_step.  Without: pure
    Gaussian noise at step T.
    """
    if sketch is None:
        if shape is None:
            raise ValueError("shape required when no sketch is given")
        return rng.standard_normal(shape), schedule.T
    if not (0 < start_step <= schedule.T):
        raise ValueError(f"start_step {start_step} outside (0, {schedule.T}]")
    ab = schedule.alpha_bar(start_step)
    noise = rng.standard_normal(sketch.shape)
    return np.sqrt(ab) * sketch + np.sqrt(1.0 - ab) * noise, start_step


def denoise_range(
    state: np.ndarray,
    from_step: int,
    to_step: int,
    cond: ConditioningBundle,
    backend: DenoiserBackend,
    schedule: DenoiseSchedule,
    rng: np.random.Generator,
) -> np.ndarray:
    """Ancestral DDPM updates from from_step down to to_step (exclusive of
    to_step's own update; from_step == to_step is a no-op).

    Backends exposing an `x0_range` attribute get the q-posterior form of the
    same update with the implied clean image clamped to that range each step
    (the Ho et al. sampler's clipped-x0 variant).  Without clamping, small
    noise-prediction biases at nearly-pure-noise steps get amplified by
    1/sqrt(alpha_bar) and can push the whole trajectory out of the pixel
    domain; algebraically the two forms are identical when the clamp is
    inactive."""
    if not (schedule.T >= from_step >= to_step >= 0):
        raise ValueError(f"bad step range {from_step}->{to_step} for T={schedule.T}")
    x0_range = getattr(backend, "x0_range", None)
    x = state
    for t in range(from_step, to_step, -1):
        try:
            eps = backend.predict_noise(x, t, cond)
        except Exception as exc:
            raise BackendError(f"backend {backend.id!r} failed at step {t}: {exc}") from exc
        beta = schedule.beta(t)
        ab = schedule.alpha_bar(t)
        ab_prev = schedule.alpha_bar(t - 1)
        if x0_range is not None:
            x0 = np.clip((x - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab), *x0_range)
            mean = (np.sqrt(ab_prev) * beta * x0
                    + np.sqrt(schedule.alpha(t)) * (1.0 - ab_prev) * x) / (1.0 - ab)
        else:
            mean = (x - beta / np.sqrt(1.0 - ab) * eps) / np.sqrt(schedule.alpha(t))
        if t > 1:
            var = beta * (1.0 - ab_prev) / (1.0 - ab)
            x = mean + np.sqrt(var) * rng.standard_normal(x.shape)
        else:
            x = mean
    return x


def predict_x0(
    state: np.ndarray, t: int, cond: ConditioningBundle,
    backend: DenoiserBackend, schedule: DenoiseSchedule,
) -> np.ndarray:
    """Clean-image estimate implied by the backend's noise prediction."""
    eps = backend.predict_noise(state, t, cond)
    ab = schedule.alpha_bar(t)
    return (state - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)


def project_constraints(
    state: np.ndarray,
    t: int,
    sym: SymmetryConfig,
    schedule: DenoiseSchedule,
    backend: DenoiserBackend,
    cond: ConditioningBundle,
    rng: np.random.Generator,
    mode: str = "on_x0_then_renoise",
    background: float = 1.0,
    interpolation: str = "bilinear",
) -> np.ndarray:
    """Apply the symmetry and circular-mask operators at a sub-process
    boundary, keeping the state consistent with step t's noise level."""
    if not sym.enabled:
        return state
    canvas = state.shape[0]
    center = sym.resolved_center(canvas)
    radius = sym.resolved_radius(canvas)
    if mode == "on_sample":
        return replicate_and_mask(state, sym.k, center, radius, background, interpolation)
    # on_x0_then_renoise: project the clean estimate, then forward-diffuse back
    x0 = np.clip(predict_x0(state, t, cond, backend, schedule), 0.0, 1.0)
    x0 = replicate_and_mask(x0, sym.k, center, radius, background, interpolation)
    ab = schedule.alpha_bar(t)
    noise = rng.standard_normal(state.shape)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise


# ---------------------------------------------------------------------------
# full runs


@dataclass(frozen=True)
class OutputResult:
    index: int
    image: Optional[np.ndarray] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.image is not None


@dataclass(frozen=True)
class PipelineSettings:
    background: float = 1.0  # white, matching sketch-on-white renders
    interpolation: str = "bilinear"


def sample_one(
    req: GenerationRequest,
    cond: ConditioningBundle,
    backend: DenoiserBackend,
    schedule: DenoiseSchedule,
    plan: SubProcessPlan,
    index: int,
    settings: PipelineSettings = PipelineSettings(),
) -> np.ndarray:
    rng = output_rng(req.seed, index)
    canvas = backend.canvas
    if req.sketch is not None:
        start = max(1, int(round(req.sketch_strength * schedule.T)))
    else:
        start = schedule.T
    state, step = init_state(req.sketch, schedule, start, rng, shape=(canvas, canvas))
    stops = [b for b in sorted(plan.boundaries, reverse=True) if b < step]
    for b in stops:
        state = denoise_range(state, step, b, cond, backend, schedule, rng)
        step = b
        state = project_constraints(
            state, step, req.symmetry, schedule, backend, cond, rng,
            mode=plan.project_mode, background=settings.background,
            interpolation=settings.interpolation,
        )
    state = denoise_range(state, step, 0, cond, backend, schedule, rng)
    x0 = np.clip(state, 0.0, 1.0)
    if req.symmetry.enabled:
        center = req.symmetry.resolved_center(canvas)
        radius = req.symmetry.resolved_radius(canvas)
        if req.symmetry.final_replication:
            x0 = replicate_and_mask(
                x0, req.symmetry.k, center, radius,
                settings.background, settings.interpolation,
            )
        else:
            x0 = apply_circular_mask(x0, center, radius, settings.background)
    return np.clip(x0, 0.0, 1.0)


def run_pipeline(
    req: GenerationRequest,
    cond: ConditioningBundle,
    backend: DenoiserBackend,
    schedule: DenoiseSchedule,
    plan: SubProcessPlan,
    settings: PipelineSettings = PipelineSettings(),
) -> list[OutputResult]:
    """Generate req.output_count images; per-output failures become error
    markers instead of aborting the batch."""
    plan.validate(schedule.T)
    results = []
    for i in range(req.output_count):
        try:
            img = sample_one(req, cond, backend, schedule, plan, i, settings)
            results.append(OutputResult(index=i, image=img))
        except BackendError as exc:
            results.append(OutputResult(index=i, error=str(exc)))
    return results
