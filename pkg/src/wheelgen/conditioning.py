"""Conditioning assembly: prompt construction from keywords, image embedding
with crop and weights, template (global) vs inspiration (non-global) routing,
and exemplar fallback sampling when the user supplies no images.
"""

from __future__ import annotations

import hashlib
from typing import Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from .core import ConceptGroup, GenerationRequest, InspirationImage, resample_image
from .pipeline import ConditioningBundle

DEFAULT_PROMPT = "a photo of a car wheel design"


@runtime_checkable
class Embedder(Protocol):
    id: str
    dim: int

    def embed(self, img: np.ndarray) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0.0:
        out = np.zeros_like(v)
        out[0] = 1.0
        return out
    return v / n


class ToyEmbedder:
    """Deterministic, dependency-free feature extractor.

    Image route: 8x8 downsampled grayscale plus an 8-bin gradient
    orientation histogram, unit-normalized.  Text route: a fixed random
    unit vector per token (seeded from the token's hash), summed.
    """

    def __init__(self):
        self.id = "toy-embedder"
        self.dim = 72

    def embed(self, img: np.ndarray) -> np.ndarray:
        gray = img.mean(axis=2) if img.ndim == 3 else img
        thumb = resample_image(gray, 8).reshape(-1)
        gy, gx = np.gradient(gray)
        mag = np.hypot(gy, gx)
        ang = np.arctan2(gy, gx) % (2 * np.pi)
        hist, _ = np.histogram(ang, bins=8, range=(0, 2 * np.pi), weights=mag)
        total = hist.sum()
        if total > 0:
            hist = hist / total
        return _unit(np.concatenate([thumb, hist]))

    def embed_text(self, text: str) -> np.ndarray:
        tokens = [t for t in text.lower().replace(",", " ").split() if t]
        acc = np.zeros(self.dim)
        for tok in tokens or [""]:
            seed = int.from_bytes(hashlib.sha256(tok.encode()).digest()[:8], "big")
            acc += np.random.default_rng(seed).standard_normal(self.dim)
        return _unit(acc)


# ---------------------------------------------------------------------------
# prompt


def assemble_prompt(concepts: Sequence[ConceptGroup], default_prompt: str = DEFAULT_PROMPT) -> str:
    """Default prompt + keywords by descending group weight (stable ties)."""
    if not concepts:
        raise ValueError("at least one concept group required")
    ordered = sorted(
        enumerate(concepts), key=lambda item: (-item[1].group_weight, item[0])
    )
    keywords = [g.keyword for _, g in ordered if g.keyword]
    return ", ".join([default_prompt] + keywords)


# ---------------------------------------------------------------------------
# exemplar fallback


def conditioning_rng(seed: int) -> np.random.Generator:
    """Generator for exemplar sampling, derived from the request seed so a
    stored record replays to the same bundle."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0x77EE]))


def resolve_inspirations(
    concepts: Sequence[ConceptGroup],
    exemplar_store,
    rng: np.random.Generator,
    max_fallback: int = 3,
) -> tuple[list[tuple[InspirationImage, float]], list[dict]]:
    """Effective inspirations per group.

    Groups with user images use them (weight x group weight); empty groups
    fall back to up to ``max_fallback`` exemplars sampled without
    replacement for the keyword.
    """
    resolved: list[tuple[InspirationImage, float]] = []
    provenance: list[dict] = []
    for g in concepts:
        entry: dict = {"keyword": g.keyword, "group_weight": g.group_weight}
        if g.inspirations:
            entry["mode"] = "user"
            entry["inspiration_ids"] = [i.id for i in g.inspirations]
            for insp in g.inspirations:
                resolved.append((insp, insp.weight * g.group_weight))
        else:
            sampled = (
                exemplar_store.sample_inspirations(g.keyword, max_fallback, rng)
                if exemplar_store is not None
                else []
            )
            if sampled:
                entry["mode"] = "sampled"
                entry["exemplar_ids"] = [sid for sid, _ in sampled]
                for sid, img in sampled:
                    insp = InspirationImage(
                        image=img, weight=1.0, source="exemplar-dataset", id=f"ex-{sid}"
                    )
                    resolved.append((insp, g.group_weight))
            else:
                entry["mode"] = "prompt-only"
                entry["warning"] = f"no exemplars for keyword {g.keyword!r}"
        provenance.append(entry)
    return resolved, provenance


def neutral_template(canvas: int) -> np.ndarray:
    """Blank disc on white, the fallback of last resort."""
    rr, cc = np.meshgrid(np.arange(canvas), np.arange(canvas), indexing="ij")
    c = (canvas - 1) / 2.0
    dist = np.hypot(rr - c, cc - c)
    img = np.ones((canvas, canvas))
    img[dist <= 0.47 * canvas] = 0.85
    return img


def resolve_template(
    req: GenerationRequest,
    exemplar_store,
    rng: np.random.Generator,
    canvas: int,
) -> tuple[np.ndarray, dict]:
    if req.template is not None:
        return req.template, {"mode": "user"}
    top_kw = None
    if req.concepts:
        ordered = sorted(
            enumerate(req.concepts), key=lambda item: (-item[1].group_weight, item[0])
        )
        top_kw = ordered[0][1].keyword
    if exemplar_store is not None and top_kw:
        sampled = exemplar_store.sample_wheels(top_kw, 1, rng)
        if sampled:
            sid, img = sampled[0]
            return resample_image(img, canvas), {"mode": "sampled", "keyword": top_kw, "exemplar_id": sid}
    return neutral_template(canvas), {"mode": "neutral", "warning": "no template source available"}


# ---------------------------------------------------------------------------
# bundle


class BundleError(RuntimeError):
    pass


def build_bundle(
    req: GenerationRequest,
    embedder: Embedder,
    exemplar_store=None,
    rng: Optional[np.random.Generator] = None,
    canvas: int = 64,
    default_prompt: str = DEFAULT_PROMPT,
) -> ConditioningBundle:
    """Assemble prompt, global template embedding, and weighted context
    embeddings.  Zero-weight inspirations drop out entirely."""
    if rng is None:
        rng = conditioning_rng(req.seed)
    prompt = assemble_prompt(req.concepts, default_prompt)
    template, template_prov = resolve_template(req, exemplar_store, rng, canvas)
    try:
        global_vec = embedder.embed(template)
    except Exception as exc:
        raise BundleError(f"embedding template failed: {exc}") from exc

    resolved, group_prov = resolve_inspirations(req.concepts, exemplar_store, rng)
    context = []
    for insp, weight in resolved:
        if weight <= 0.0:
            continue
        try:
            vec = embedder.embed(insp.cropped())
        except Exception as exc:
            raise BundleError(f"embedding inspiration {insp.id!r} failed: {exc}") from exc
        context.append((vec, float(weight)))

    provenance = tuple(
        [{"template": template_prov}] + [dict(e) for e in group_prov]
    )
    return ConditioningBundle(
        prompt=prompt,
        prompt_embedding=embedder.embed_text(prompt),
        global_image=global_vec,
        context_images=tuple(context),
        resolved_exemplars=provenance,
    )
