"""Procedural wheel renderer, style-label rules, corpus builder, and the
image statistics used to evaluate generated designs (wheel-likeness, gap
size variance, disc coverage).

Wheels are dark ink on white: an outer rim annulus, a hub disc, and n
spokes whose angular gaps can be perturbed.  With zero gap variance the
render is exactly n-fold rotationally symmetric by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .symmetry import _polar, default_center, inscribed_radius  # shared pixel grids

INK = 0.9  # peak darkness of drawn strokes

PARAM_RANGES = {
    "spokes": (3, 12),
    "rim_width": (0.04, 0.20),
    "spoke_width": (0.06, 0.40),
    "curvature": (-0.8, 0.8),
    "gap_variance": (0.0, 1.0),
    "edge_sharpness": (0.0, 1.0),
    "hub_frac": (0.08, 0.30),
}

# gap-size variance above this threshold reads as motion -> "dynamic"
DYNAMIC_GAP_THRESHOLD = 0.25


@dataclass(frozen=True)
class WheelParams:
    spokes: int = 6
    rim_width: float = 0.10  # fraction of outer radius
    spoke_width: float = 0.18  # angular half-width, radians
    curvature: float = 0.0  # angular sweep hub->rim, radians
    gap_variance: float = 0.0  # relative jitter of gap sizes
    edge_sharpness: float = 0.8  # 1 = crisp edges, 0 = soft
    hub_frac: float = 0.18  # hub radius as fraction of outer radius

    def validate(self) -> None:
        for name, (lo, hi) in PARAM_RANGES.items():
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")


def sample_params(rng: np.random.Generator) -> WheelParams:
    return WheelParams(
        spokes=int(rng.integers(3, 13)),
        rim_width=float(rng.uniform(0.05, 0.18)),
        spoke_width=float(rng.uniform(0.08, 0.32)),
        curvature=float(rng.uniform(-0.6, 0.6)),
        gap_variance=float(rng.uniform(0.0, 0.6)),
        edge_sharpness=float(rng.uniform(0.2, 1.0)),
        hub_frac=float(rng.uniform(0.10, 0.26)),
    )


def style_labels(params: WheelParams) -> set[str]:
    """Fixed parameter-to-keyword rules for the synthetic corpus."""
    labels = set()
    if params.gap_variance > DYNAMIC_GAP_THRESHOLD:
        labels.add("dynamic")
    if params.spoke_width >= 0.24 or params.rim_width >= 0.14:
        labels.add("bold")
    if params.spokes <= 5 and params.spoke_width <= 0.18:
        labels.add("minimal")
    if params.spokes >= 9:
        labels.add("classic")
    if params.edge_sharpness >= 0.7 and abs(params.curvature) <= 0.3:
        labels.add("modern")
    return labels


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30, 30)))


def spoke_angles(params: WheelParams, rng: Optional[np.random.Generator]) -> np.ndarray:
    """Spoke center angles; equal gaps when gap_variance is 0."""
    n = params.spokes
    if params.gap_variance == 0.0 or rng is None:
        gaps = np.ones(n)
    else:
        gaps = 1.0 + params.gap_variance * rng.uniform(-1.0, 1.0, size=n)
        gaps = np.maximum(gaps, 0.1)
    gaps = gaps / gaps.sum() * 2.0 * np.pi
    return np.concatenate([[0.0], np.cumsum(gaps)[:-1]])


def gen_wheel(
    params: WheelParams,
    rng: Optional[np.random.Generator] = None,
    canvas: int = 64,
) -> tuple[np.ndarray, set[str]]:
    """Render one wheel; returns (grayscale image in [0,1], style labels)."""
    params.validate()
    center = default_center(canvas)
    dist, ang = _polar(canvas, center)
    r_out = 0.47 * canvas
    r_rim_in = r_out * (1.0 - params.rim_width)
    r_hub = r_out * params.hub_frac
    sigma = 0.3 + 1.5 * (1.0 - params.edge_sharpness)  # edge softness in px

    # rim annulus: inside [r_rim_in, r_out]
    rim = _sigmoid(np.minimum(dist - r_rim_in, r_out - dist) / sigma)
    # hub disc
    hub = _sigmoid((r_hub - dist) / sigma)

    centers = spoke_angles(params, rng)
    frac = np.clip((dist - r_hub) / max(r_out - r_hub, 1e-9), 0.0, 1.0)
    local = (ang[..., None] - (centers + params.curvature * frac[..., None])) % (2 * np.pi)
    local = np.minimum(local, 2 * np.pi - local)  # circular distance to spoke center
    arc_px = (params.spoke_width - local) * np.maximum(dist, 1.0)[..., None]
    spokes = _sigmoid(arc_px / sigma).max(axis=-1)
    spokes = spokes * _sigmoid((dist - r_hub) / sigma) * _sigmoid((r_out - dist) / sigma)

    ink = np.clip(rim + hub + spokes, 0.0, 1.0)
    img = 1.0 - INK * ink
    return img, style_labels(params)


# ---------------------------------------------------------------------------
# corpus


@dataclass(frozen=True)
class CorpusItem:
    image: np.ndarray
    labels: tuple[str, ...]
    params: WheelParams


def build_corpus(n: int, seed: int, canvas: int = 64) -> list[CorpusItem]:
    """n wheels with spoke counts cycled for stratified coverage."""
    if n < 1:
        raise ValueError("corpus size must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xC0]))
    items = []
    lo, hi = PARAM_RANGES["spokes"]
    for i in range(n):
        base = sample_params(rng)
        params = WheelParams(
            **{**base.__dict__, "spokes": lo + i % (hi - lo + 1)}
        )
        img, labels = gen_wheel(params, rng, canvas)
        items.append(CorpusItem(image=img, labels=tuple(sorted(labels)), params=params))
    return items


def label_frequencies(items: list[CorpusItem]) -> dict[str, float]:
    counts: dict[str, int] = {}
    for item in items:
        for label in item.labels:
            counts[label] = counts.get(label, 0) + 1
    return {k: v / len(items) for k, v in sorted(counts.items())}


def store_corpus(items: list[CorpusItem], store) -> list[str]:
    ids = []
    for item in items:
        ids.append(
            store.add(
                item.image,
                item.labels,
                kind="wheel",
                params={k: (round(v, 6) if isinstance(v, float) else v)
                        for k, v in item.params.__dict__.items()},
            )
        )
    return ids


# ---------------------------------------------------------------------------
# image statistics


def _disc(canvas: int):
    center = default_center(canvas)
    dist, ang = _polar(canvas, center)
    return dist, ang, dist <= 0.47 * canvas


def disc_coverage(img: np.ndarray) -> float:
    """Fraction of in-disc pixels carrying ink."""
    gray = img.mean(axis=2) if img.ndim == 3 else img
    dist, _, disc = _disc(img.shape[0])
    return float(((1.0 - gray)[disc] > 0.45).mean())


def angular_profile(img: np.ndarray, n_bins: int = 180,
                    band: tuple[float, float] = (0.5, 0.8)) -> np.ndarray:
    """Mean ink per angular bin over a mid-radius band."""
    gray = img.mean(axis=2) if img.ndim == 3 else img
    canvas = img.shape[0]
    dist, ang, _ = _disc(canvas)
    r_out = 0.47 * canvas
    sel = (dist >= band[0] * r_out) & (dist <= band[1] * r_out)
    bins = np.minimum((ang[sel] / (2 * np.pi) * n_bins).astype(int), n_bins - 1)
    ink = 1.0 - gray[sel]
    sums = np.bincount(bins, weights=ink, minlength=n_bins)
    counts = np.maximum(np.bincount(bins, minlength=n_bins), 1)
    return sums / counts


def gap_size_variation(img: np.ndarray, n_bins: int = 180) -> float:
    """Coefficient of variation of angular gap widths between spokes.

    0 for evenly spaced spokes, larger when gaps differ in size; 0 when no
    gap structure is detectable.
    """
    profile = angular_profile(img, n_bins)
    # light circular smoothing to suppress pixel noise
    kernel = np.array([0.25, 0.5, 0.25])
    profile = (
        np.roll(profile, 1) * kernel[0] + profile * kernel[1] + np.roll(profile, -1) * kernel[2]
    )
    lo, hi = profile.min(), profile.max()
    if hi - lo < 0.05:
        return 0.0
    mask = profile < (lo + hi) / 2.0  # gap bins
    if not mask.any() or mask.all():
        return 0.0
    # circular run lengths of gap bins
    idx = np.flatnonzero(np.diff(np.concatenate([[mask[-1]], mask]).astype(int)) != 0)
    if idx.size < 2:
        return 0.0
    runs = []
    flat = np.concatenate([mask, mask])  # unwrap circularity
    i = int(idx[0])
    while i < n_bins + int(idx[0]):
        if flat[i]:
            j = i
            while flat[j]:
                j += 1
            runs.append(j - i)
            i = j
        else:
            i += 1
    widths = np.array([r for r in runs if r > 0], dtype=float)
    if widths.size < 2:
        return 0.0
    return float(widths.std() / widths.mean())


def wheel_likeness(img: np.ndarray) -> float:
    """Heuristic [0,1] score: white background outside the disc, an inked
    rim ring, and angular structure inside."""
    gray = img.mean(axis=2) if img.ndim == 3 else img
    canvas = img.shape[0]
    dist, _, disc = _disc(canvas)
    r_out = 0.47 * canvas
    outside = dist > min(inscribed_radius(canvas, default_center(canvas)), r_out * 1.05)
    comp_bg = float(gray[outside].mean()) if outside.any() else 1.0
    rim_band = (dist >= 0.9 * r_out) & (dist <= r_out)
    inner_band = (dist >= 0.3 * r_out) & (dist <= 0.6 * r_out)
    ink = 1.0 - gray
    comp_rim = float(np.clip(ink[rim_band].mean() - ink[outside].mean(), 0.0, 1.0))
    profile = angular_profile(img)
    comp_struct = float(np.clip(profile.std() / 0.15, 0.0, 1.0))
    del inner_band
    return float(np.clip((comp_bg + comp_rim + comp_struct) / 3.0, 0.0, 1.0))
