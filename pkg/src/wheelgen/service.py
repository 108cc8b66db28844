"""HTTP service: sessions, asynchronous generation jobs, feedback-driven
regeneration, lineage, image upload/serving, and the exemplar/vote
endpoints.  Single host, FIFO worker pool, localhost by default.
"""

from __future__ import annotations

import json
import os
import queue
import threading
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, HTTPException, Request, Response

from . import core
from .engine import GenerationEngine, RecordNotFound, ValidationFailure
from .exemplars import (
    AnnotationTask,
    ExemplarStore,
    VoteError,
    VoteMatrix,
    aggregate_top_percent,
    record_vote,
)

MAX_GROUPS = 3
MAX_IMAGES_PER_GROUP = 3


@dataclass
class Job:
    id: str
    session_id: Optional[str]
    request_json: dict
    state: str = "queued"  # queued -> running -> done | failed
    record_id: Optional[str] = None
    error: Optional[str] = None
    parent_record_id: Optional[str] = None
    feedback_json: Optional[dict] = None
    created_at: float = field(default_factory=time.time)
    started_at: Optional[float] = None
    finished_at: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "session_id": self.session_id,
            "state": self.state,
            "record_id": self.record_id,
            "error": self.error,
            "timings": {
                "created_at": self.created_at,
                "started_at": self.started_at,
                "finished_at": self.finished_at,
            },
        }


class AnnotationBook:
    """Vote state persisted as one JSON file per data dir."""

    def __init__(self, path: str):
        self.path = path
        self.tasks: dict[str, AnnotationTask] = {}
        self.votes: dict[str, VoteMatrix] = {}
        self._lock = threading.Lock()
        if os.path.exists(path):
            with open(path) as f:
                blob = json.load(f)
            for tid, t in blob.get("tasks", {}).items():
                self.tasks[tid] = AnnotationTask(
                    keyword=t["keyword"],
                    candidate_wheel_ids=tuple(t["candidates"]),
                    selections_per_rater=t["selections_per_rater"],
                )
            for tid, v in blob.get("votes", {}).items():
                self.votes[tid] = VoteMatrix(
                    keyword=v["keyword"],
                    counts=dict(v["counts"]),
                    rater_count=v["rater_count"],
                    raters=frozenset(v["raters"]),
                )

    def _save(self) -> None:
        blob = {
            "tasks": {
                tid: {
                    "keyword": t.keyword,
                    "candidates": list(t.candidate_wheel_ids),
                    "selections_per_rater": t.selections_per_rater,
                }
                for tid, t in self.tasks.items()
            },
            "votes": {
                tid: {
                    "keyword": v.keyword,
                    "counts": v.counts,
                    "rater_count": v.rater_count,
                    "raters": sorted(v.raters),
                }
                for tid, v in self.votes.items()
            },
        }
        tmp = self.path + ".tmp"
        with open(tmp, "w") as f:
            json.dump(blob, f, indent=2, sort_keys=True)
        os.replace(tmp, self.path)

    def create_task(self, keyword: str, candidates: list[str], selections: int) -> str:
        with self._lock:
            tid = uuid.uuid4().hex[:12]
            self.tasks[tid] = AnnotationTask(
                keyword=keyword, candidate_wheel_ids=tuple(candidates),
                selections_per_rater=selections,
            )
            self.votes[tid] = VoteMatrix(keyword=keyword)
            self._save()
            return tid

    def vote(self, task_id: str, rater_id: str, selected: list[str]) -> VoteMatrix:
        with self._lock:
            if task_id not in self.tasks:
                raise KeyError(task_id)
            updated = record_vote(self.tasks[task_id], self.votes[task_id], rater_id, selected)
            self.votes[task_id] = updated
            self._save()
            return updated

    def votes_for_keyword(self, keyword: str) -> Optional[VoteMatrix]:
        merged_counts: dict[str, int] = {}
        raters = 0
        found = False
        for v in self.votes.values():
            if v.keyword == keyword and v.rater_count > 0:
                found = True
                raters += v.rater_count
                for wid, c in v.counts.items():
                    merged_counts[wid] = merged_counts.get(wid, 0) + c
        if not found:
            return None
        return VoteMatrix(keyword=keyword, counts=merged_counts, rater_count=raters)


def create_app(
    data_dir: str,
    canvas: int = 64,
    registry=None,
    exemplar_store: Optional[ExemplarStore] = None,
    workers: int = 1,
) -> FastAPI:
    if exemplar_store is None:
        ex_dir = os.path.join(data_dir, "exemplars")
        exemplar_store = ExemplarStore(ex_dir) if os.path.isdir(ex_dir) else None

    engine = GenerationEngine(
        data_dir,
        canvas=canvas,
        registry=registry,
        exemplar_store=exemplar_store,
        max_groups=MAX_GROUPS,
        max_images_per_group=MAX_IMAGES_PER_GROUP,
    )

    sessions: dict[str, dict] = {}
    jobs: dict[str, Job] = {}
    job_queue: "queue.Queue[Optional[str]]" = queue.Queue()
    state_lock = threading.Lock()

    def worker_loop():
        while True:
            job_id = job_queue.get()
            if job_id is None:
                return
            job = jobs[job_id]
            job.state = "running"
            job.started_at = time.time()
            try:
                if job.feedback_json is not None:
                    delta = core.feedback_from_json(job.feedback_json, engine.images)
                    rec = engine.regenerate(job.parent_record_id, delta)
                else:
                    req = core.request_from_json(job.request_json, engine.images)
                    rec = engine.execute(req)
                job.record_id = rec.id
                job.state = "done"
            except Exception as exc:
                job.error = str(exc)
                job.state = "failed"
            finally:
                job.finished_at = time.time()
                job_queue.task_done()

    threads = [threading.Thread(target=worker_loop, daemon=True) for _ in range(workers)]

    @asynccontextmanager
    async def _lifespan(app: FastAPI):
        for t in threads:
            if not t.is_alive():
                t.start()
        yield

    app = FastAPI(title="wheelgen service", lifespan=_lifespan)
    app.state.engine = engine

    annotations = AnnotationBook(os.path.join(data_dir, "annotations.json"))

    # -- sessions / jobs ---------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session():
        sid = uuid.uuid4().hex[:12]
        with state_lock:
            sessions[sid] = {"created_at": time.time(), "jobs": []}
        return {"id": sid}

    def _enqueue(job: Job) -> dict:
        with state_lock:
            jobs[job.id] = job
        job_queue.put(job.id)
        return {"job_id": job.id}

    @app.post("/sessions/{sid}/generate", status_code=202)
    async def generate(sid: str, request: Request):
        if sid not in sessions:
            raise HTTPException(404, "unknown session")
        body = await request.json()
        if not isinstance(body, dict):
            raise HTTPException(400, "request body must be a JSON object")
        try:
            req = core.request_from_json(body, engine.images)
        except (KeyError, TypeError, ValueError, FileNotFoundError) as exc:
            raise HTTPException(400, f"malformed request: {exc}")
        req = engine.normalize(req)
        violations = engine.validate(req)
        if violations:
            raise HTTPException(422, detail=violations)
        job = Job(id=uuid.uuid4().hex[:12], session_id=sid,
                  request_json=core.request_to_json(req, engine.images))
        with state_lock:
            sessions[sid]["jobs"].append(job.id)
        return _enqueue(job)

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, "unknown job")
        out = job.to_json()
        if job.state == "done" and job.record_id:
            rec = engine.get_record(job.record_id)
            out["outputs"] = [f"/images/{ref}" for ref in rec.outputs]
        return out

    # -- records / feedback ------------------------------------------------

    def _record_or_404(record_id: str):
        try:
            return engine.get_record(record_id)
        except RecordNotFound:
            raise HTTPException(404, "unknown record")

    def _record_json(rec: core.GenerationRecord) -> dict:
        out = core.record_to_json(rec, engine.images)
        out["output_urls"] = [f"/images/{ref}" for ref in rec.outputs]
        return out

    @app.get("/generations/{record_id}")
    def get_record(record_id: str):
        return _record_json(_record_or_404(record_id))

    @app.post("/generations/{record_id}/feedback", status_code=202)
    async def feedback(record_id: str, request: Request):
        rec = _record_or_404(record_id)
        body = await request.json()
        try:
            delta = core.feedback_from_json(body, engine.images)
        except (KeyError, TypeError, ValueError, FileNotFoundError) as exc:
            raise HTTPException(400, f"malformed feedback: {exc}")
        try:
            core.apply_feedback(rec.request, delta)
        except core.UnknownInspirationError as exc:
            raise HTTPException(409, str(exc))
        job = Job(id=uuid.uuid4().hex[:12], session_id=None, request_json={},
                  parent_record_id=record_id, feedback_json=body)
        return _enqueue(job)

    @app.get("/generations/{record_id}/lineage")
    def lineage(record_id: str):
        _record_or_404(record_id)
        chain = engine.lineage(record_id)
        return {
            "lineage": [
                {
                    "id": rec.id,
                    "parent_id": rec.parent_id,
                    "seed": rec.request.seed,
                    "note": rec.feedback.note if rec.feedback else None,
                    "feedback": core.feedback_to_json(rec.feedback, engine.images)
                    if rec.feedback
                    else None,
                    "resolved_conditioning": rec.resolved_conditioning,
                    "outputs": [f"/images/{ref}" for ref in rec.outputs],
                }
                for rec in chain
            ]
        }

    @app.post("/generations/{record_id}/replay")
    def replay(record_id: str):
        rec = _record_or_404(record_id)
        refs = engine.replay(record_id)
        return {
            "identical": list(refs) == list(rec.outputs),
            "outputs": [f"/images/{ref}" for ref in refs],
        }

    # -- images ------------------------------------------------------------

    @app.post("/images", status_code=201)
    async def upload_image(request: Request):
        data = await request.body()
        try:
            img = core.decode_png(data)
        except Exception as exc:
            raise HTTPException(400, f"not a decodable image: {exc}")
        return {"ref": engine.images.put(img)}

    @app.get("/images/{ref}")
    def get_image(ref: str):
        if not engine.images.has(ref):
            raise HTTPException(404, "unknown image")
        with open(engine.images.path(ref), "rb") as f:
            return Response(f.read(), media_type="image/png")

    # -- exemplars / votes -------------------------------------------------

    @app.get("/keywords")
    def keywords():
        return {"keywords": exemplar_store.labels() if exemplar_store else []}

    @app.get("/keywords/{keyword}/exemplars")
    def exemplars_for_keyword(keyword: str):
        votes = annotations.votes_for_keyword(keyword.strip().lower())
        if votes is None:
            return {"exemplars": [], "aggregated": False,
                    "reason": "no votes recorded for this keyword"}
        agg = aggregate_top_percent(votes)
        return {
            "exemplars": list(agg.wheel_ids),
            "aggregated": True,
            "threshold_votes": agg.threshold_votes,
            "percentile": agg.percentile,
            "rater_count": votes.rater_count,
        }

    @app.post("/annotation/tasks", status_code=201)
    async def create_task(request: Request):
        body = await request.json()
        keyword = (body.get("keyword") or "").strip().lower()
        if not keyword:
            raise HTTPException(422, "keyword required")
        candidates = body.get("candidates")
        if not candidates:
            if exemplar_store is None:
                raise HTTPException(422, "no exemplar store; candidates required")
            candidates = exemplar_store.ids_for(keyword, kind="wheel")[:25] or exemplar_store.ids()[:25]
        if not candidates:
            raise HTTPException(422, "no candidate wheels available")
        selections = int(body.get("selections_per_rater", min(10, len(candidates))))
        try:
            tid = annotations.create_task(keyword, list(candidates), selections)
        except ValueError as exc:
            raise HTTPException(422, str(exc))
        return {"task_id": tid, "candidates": list(candidates), "selections_per_rater": selections}

    @app.post("/annotation/{task_id}/votes", status_code=201)
    async def vote(task_id: str, request: Request):
        body = await request.json()
        try:
            updated = annotations.vote(
                task_id, str(body.get("rater_id")), list(body.get("selected_ids", []))
            )
        except KeyError:
            raise HTTPException(404, "unknown task")
        except VoteError as exc:
            if "already voted" in str(exc):
                raise HTTPException(409, str(exc))
            raise HTTPException(422, str(exc))
        return {"rater_count": updated.rater_count}

    @app.get("/health")
    def health():
        return {"ok": True, "backends": engine.registry.ids(), "canvas": engine.canvas}

    return app
