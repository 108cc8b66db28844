"""Generation engine: validates a request, resolves conditioning, runs the
constrained sampling pipeline, and persists a GenerationRecord with full
provenance.  The service and the CLI are thin wrappers over this class.
"""

from __future__ import annotations

import glob
import json
import os
import uuid
from dataclasses import replace
from typing import Optional

import numpy as np

from . import core
from .backends import default_registry
from .conditioning import DEFAULT_PROMPT, ToyEmbedder, build_bundle, conditioning_rng
from .core import (
    FeedbackDelta,
    GenerationRecord,
    GenerationRequest,
    ImageStore,
    quantize,
    resample_image,
    validate_request,
)
from .exemplars import ExemplarStore
from .pipeline import (
    BackendRegistry,
    PipelineSettings,
    SubProcessPlan,
    default_plan,
    linear_schedule,
    run_pipeline,
)


class ValidationFailure(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class RecordNotFound(KeyError):
    pass


class GenerationEngine:
    def __init__(
        self,
        data_dir: str,
        canvas: int = 64,
        registry: Optional[BackendRegistry] = None,
        exemplar_store: Optional[ExemplarStore] = None,
        plan: Optional[SubProcessPlan] = None,
        default_prompt: str = DEFAULT_PROMPT,
        max_groups: Optional[int] = None,
        max_images_per_group: Optional[int] = None,
    ):
        self.data_dir = data_dir
        self.canvas = canvas
        self.registry = registry or default_registry(canvas)
        self.exemplar_store = exemplar_store
        self.plan = plan
        self.default_prompt = default_prompt
        self.max_groups = max_groups
        self.max_images_per_group = max_images_per_group
        self.embedder = ToyEmbedder()
        self.images = ImageStore(os.path.join(data_dir, "images"))
        self.records_dir = os.path.join(data_dir, "records")
        os.makedirs(self.records_dir, exist_ok=True)

    # -- persistence -------------------------------------------------------

    def _record_path(self, record_id: str) -> str:
        return os.path.join(self.records_dir, record_id + ".json")

    def save_record(self, rec: GenerationRecord) -> None:
        path = self._record_path(rec.id)
        tmp = path + ".tmp"
        with open(tmp, "w") as f:
            f.write(core.dump_json(core.record_to_json(rec, self.images)))
        os.replace(tmp, path)

    def get_record(self, record_id: str) -> GenerationRecord:
        path = self._record_path(record_id)
        if not os.path.exists(path):
            raise RecordNotFound(record_id)
        with open(path) as f:
            return core.record_from_json(json.load(f), self.images)

    def list_record_ids(self) -> list[str]:
        return sorted(
            os.path.splitext(os.path.basename(p))[0]
            for p in glob.glob(os.path.join(self.records_dir, "*.json"))
        )

    def lineage(self, record_id: str) -> list[GenerationRecord]:
        """Ancestor chain, oldest first, ending at the requested record."""
        chain = []
        seen = set()
        cursor: Optional[str] = record_id
        while cursor is not None:
            if cursor in seen:
                raise RuntimeError(f"lineage cycle at {cursor}")
            seen.add(cursor)
            rec = self.get_record(cursor)
            chain.append(rec)
            cursor = rec.parent_id
        return list(reversed(chain))

    # -- execution ---------------------------------------------------------

    def normalize(self, req: GenerationRequest) -> GenerationRequest:
        """Resample sketch/template to the engine canvas at ingestion."""
        changes = {}
        for name in ("sketch", "template"):
            img = getattr(req, name)
            if img is not None and img.shape[:2] != (self.canvas, self.canvas):
                changes[name] = resample_image(img, self.canvas)
        return replace(req, **changes) if changes else req

    def validate(self, req: GenerationRequest) -> list[str]:
        return validate_request(
            req,
            self.canvas,
            max_groups=self.max_groups,
            max_images_per_group=self.max_images_per_group,
            known_backends=self.registry.ids(),
        )

    def _generate_images(self, req: GenerationRequest):
        backend = self.registry.get(req.backend_id)
        schedule = getattr(backend, "schedule", None) or linear_schedule(200)
        plan = self.plan or default_plan(schedule.T)
        cond = build_bundle(
            req,
            self.embedder,
            self.exemplar_store,
            conditioning_rng(req.seed),
            canvas=self.canvas,
            default_prompt=self.default_prompt,
        )
        results = run_pipeline(req, cond, backend, schedule, plan, PipelineSettings())
        return results, cond, plan

    def execute(
        self,
        req: GenerationRequest,
        parent_id: Optional[str] = None,
        feedback: Optional[FeedbackDelta] = None,
    ) -> GenerationRecord:
        req = self.normalize(req)
        violations = self.validate(req)
        if violations:
            raise ValidationFailure(violations)
        results, cond, plan = self._generate_images(req)
        refs = []
        errors = []
        for res in results:
            if res.ok:
                refs.append(self.images.put(quantize(res.image)))
            else:
                errors.append({"index": res.index, "error": res.error})
        record = GenerationRecord(
            id=uuid.uuid4().hex[:16],
            request=req,
            outputs=tuple(refs),
            parent_id=parent_id,
            feedback=feedback,
            resolved_conditioning={
                **cond.provenance(),
                "seed": req.seed,
                "plan": {"boundaries": list(plan.boundaries), "mode": plan.project_mode},
                "errors": errors,
            },
        )
        self.save_record(record)
        return record

    def regenerate(self, parent_record_id: str, delta: FeedbackDelta) -> GenerationRecord:
        parent = self.get_record(parent_record_id)
        child_req = core.apply_feedback(parent.request, delta)
        return self.execute(child_req, parent_id=parent_record_id, feedback=delta)

    def replay(self, record_id: str) -> list[str]:
        """Re-run a record's stored snapshot; returns the fresh output refs.

        Byte-identical refs to record.outputs certify reproducibility."""
        rec = self.get_record(record_id)
        results, _, _ = self._generate_images(rec.request)
        return [
            self.images.put(quantize(res.image)) for res in results if res.ok
        ]
