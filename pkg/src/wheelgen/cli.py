"""Command-line entry points: batch generation, corpus management, toy
training, vote aggregation, the symmetry benchmark, and serving the HTTP
API.  Exit codes: 0 ok, 2 validation failure, 3 backend/IO failure.
"""

from __future__ import annotations

import json
import os
import sys
import time

import click
import numpy as np

from . import core
from .engine import GenerationEngine, ValidationFailure
from .exemplars import ExemplarStore, VoteMatrix, aggregate_top_percent
from .pipeline import linear_schedule
from .symmetry import apply_circular_mask, build_wedge_mask, symmetrize, symmetry_score
from .wheels import build_corpus, label_frequencies, store_corpus

EXIT_VALIDATION = 2
EXIT_BACKEND = 3


@click.group()
def main():
    """Wheel concept generation toolkit."""


@main.command()
@click.option("--request", "request_file", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the request seed.")
@click.option("--backend", "backend_id", default=None, help="Override the backend id.")
@click.option("--data-dir", default=None, help="Engine data dir (default: OUT/.wheelgen)")
@click.option("--model", "model_file", default=None, type=click.Path(exists=True),
              help="Toy model artifact to register before generating.")
@click.option("--exemplars", "exemplar_dir", default=None, type=click.Path(exists=True))
@click.option("--canvas", type=int, default=64)
def generate(request_file, out_dir, seed, backend_id, data_dir, model_file, exemplar_dir, canvas):
    """Run one generation request from a JSON file; write PNGs + record."""
    os.makedirs(out_dir, exist_ok=True)
    engine = _build_engine(data_dir or os.path.join(out_dir, ".wheelgen"),
                           canvas, model_file, exemplar_dir)
    with open(request_file) as f:
        body = json.load(f)
    try:
        req = core.request_from_json(body, engine.images)
    except Exception as exc:
        click.echo(f"error: malformed request: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    import dataclasses

    if seed is not None:
        req = dataclasses.replace(req, seed=seed)
    if backend_id is not None:
        req = dataclasses.replace(req, backend_id=backend_id)
    try:
        record = engine.execute(req)
    except ValidationFailure as exc:
        for v in exc.violations:
            click.echo(f"invalid: {v}", err=True)
        sys.exit(EXIT_VALIDATION)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_BACKEND)
    for i, ref in enumerate(record.outputs):
        path = os.path.join(out_dir, f"output_{i:02d}.png")
        with open(engine.images.path(ref), "rb") as src, open(path, "wb") as dst:
            dst.write(src.read())
    with open(os.path.join(out_dir, "record.json"), "w") as f:
        f.write(core.dump_json(core.record_to_json(record, engine.images)))
    click.echo(f"record {record.id}: {len(record.outputs)} outputs in {out_dir}")


def _build_engine(data_dir, canvas, model_file, exemplar_dir):
    from .backends import default_registry

    registry = default_registry(canvas)
    if model_file:
        from .training import load_toy_backend

        registry.register(load_toy_backend(model_file))
    store = ExemplarStore(exemplar_dir) if exemplar_dir else None
    return GenerationEngine(data_dir, canvas=canvas, registry=registry, exemplar_store=store)


@main.group()
def corpus():
    """Synthetic corpus utilities."""


@corpus.command("build")
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--canvas", type=int, default=64)
def corpus_build(n, seed, out_dir, canvas):
    """Generate n labeled wheels into an exemplar store directory."""
    if n < 1:
        click.echo("error: --n must be >= 1", err=True)
        sys.exit(EXIT_VALIDATION)
    items = build_corpus(n, seed, canvas)
    store = ExemplarStore(out_dir)
    store_corpus(items, store)
    freqs = label_frequencies(items)
    click.echo(f"built {n} wheels in {out_dir}")
    for label, freq in freqs.items():
        click.echo(f"  {label}: {freq:.1%}")


@corpus.command("import")
@click.option("--dir", "directory", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_csv", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--kind", type=click.Choice(["wheel", "inspiration"]), default="inspiration")
def corpus_import(directory, labels_csv, out_dir, kind):
    """Import a folder of images with a CSV of `filename,label1;label2`."""
    store = ExemplarStore(out_dir)
    try:
        added = store.import_folder(directory, labels_csv, kind=kind)
    except (OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_BACKEND)
    click.echo(f"imported {len(added)} images into {out_dir}")


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--config", "config_file", default=None, type=click.Path(exists=True))
@click.option("--out", "model_file", required=True, type=click.Path())
def train(corpus_dir, config_file, model_file):
    """Train the toy denoiser on a stored corpus."""
    from .training import ToyTrainConfig, TrainingDivergence, train_toy_denoiser
    from .wheels import CorpusItem, WheelParams

    store = ExemplarStore(corpus_dir)
    items = []
    for image_id in store.ids():
        meta = store.meta(image_id)
        if meta["kind"] != "wheel":
            continue
        params = meta.get("params") or {}
        items.append(
            CorpusItem(
                image=store.get(image_id),
                labels=tuple(meta["labels"]),
                params=WheelParams(**params) if params else WheelParams(),
            )
        )
    if not items:
        click.echo("error: corpus has no wheel images", err=True)
        sys.exit(EXIT_VALIDATION)
    cfg = ToyTrainConfig()
    schedule_T = None
    if config_file:
        with open(config_file) as f:
            raw = json.load(f)
        schedule_T = raw.pop("schedule_T", None)
        cfg = ToyTrainConfig(**{**cfg.__dict__, **raw})
    schedule = linear_schedule(schedule_T) if schedule_T else None
    t0 = time.time()
    try:
        backend, history = train_toy_denoiser(items, schedule, cfg)
    except TrainingDivergence as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_BACKEND)
    backend.save(model_file)
    click.echo(
        f"trained on {len(items)} wheels in {time.time() - t0:.0f}s: "
        f"loss {history['initial_loss']:.4f} -> {history['final_loss']:.4f}"
    )


@main.group("exemplars")
def exemplars_group():
    """Vote aggregation utilities."""


@exemplars_group.command("aggregate")
@click.option("--votes", "votes_file", required=True, type=click.Path(exists=True))
@click.option("--percentile", type=float, default=0.05)
@click.option("--min-votes", type=int, default=1)
def exemplars_aggregate(votes_file, percentile, min_votes):
    """Apply the tie-inclusive top-percent rule to a votes JSON file.

    Input format: {"keyword": ..., "counts": {wheel_id: votes}, "rater_count": N}
    """
    with open(votes_file) as f:
        raw = json.load(f)
    votes = VoteMatrix(
        keyword=raw.get("keyword", ""),
        counts={str(k): int(v) for k, v in raw.get("counts", {}).items()},
        rater_count=int(raw.get("rater_count", 0)),
    )
    try:
        agg = aggregate_top_percent(votes, percentile=percentile, min_votes=min_votes)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    click.echo(json.dumps(
        {
            "keyword": agg.keyword,
            "exemplars": list(agg.wheel_ids),
            "threshold_votes": agg.threshold_votes,
            "percentile": agg.percentile,
        },
        indent=2,
    ))


@main.command("bench")
@click.argument("what", type=click.Choice(["symmetry"]))
@click.option("--canvas", type=int, default=64)
@click.option("--k", "k_list", default="", help="Comma-separated symmetry numbers.")
@click.option("--repeats", type=int, default=5)
def bench(what, canvas, k_list, repeats):
    """Per-operator latency table (CSV on stdout)."""
    ks = [int(v) for v in k_list.split(",") if v.strip()]
    if not ks:
        click.echo("error: --k requires at least one symmetry number", err=True)
        sys.exit(EXIT_VALIDATION)
    rng = np.random.default_rng(0)
    img = rng.random((canvas, canvas))
    click.echo("operator,canvas,k,mean_ms")
    for k in ks:
        for name, fn in (
            ("build_wedge_mask", lambda: build_wedge_mask(canvas, k)),
            ("symmetrize_bilinear", lambda: symmetrize(img, k)),
            ("symmetrize_nearest", lambda: symmetrize(img, k, interpolation="nearest")),
            ("apply_circular_mask", lambda: apply_circular_mask(img)),
            ("symmetry_score", lambda: symmetry_score(img, k)),
        ):
            fn()  # warm caches
            t0 = time.perf_counter()
            for _ in range(repeats):
                fn()
            ms = (time.perf_counter() - t0) / repeats * 1e3
            click.echo(f"{name},{canvas},{k},{ms:.3f}")


@main.command()
@click.option("--data-dir", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8765)
@click.option("--canvas", type=int, default=64)
@click.option("--model", "model_file", default=None, type=click.Path(exists=True))
@click.option("--exemplars", "exemplar_dir", default=None, type=click.Path(exists=True))
@click.option("--workers", type=int, default=1)
def serve(data_dir, host, port, canvas, model_file, exemplar_dir, workers):
    """Run the HTTP service."""
    import uvicorn

    from .backends import default_registry
    from .service import create_app

    registry = default_registry(canvas)
    if model_file:
        from .training import load_toy_backend

        registry.register(load_toy_backend(model_file))
    store = ExemplarStore(exemplar_dir) if exemplar_dir else None
    app = create_app(data_dir, canvas=canvas, registry=registry,
                     exemplar_store=store, workers=workers)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
