"""The full designer loop over the HTTP API.

Starts the service in-process, then: create a session, generate from two
keyword groups, read the gallery, push feedback, and inspect lineage and
replay. Mirrors what the web UI does.
"""

import tempfile
import time

from fastapi.testclient import TestClient

from wheelgen.backends import default_registry
from wheelgen.exemplars import ExemplarStore
from wheelgen.pipeline import linear_schedule
from wheelgen.service import create_app
from wheelgen.wheels import build_corpus, store_corpus

data_dir = tempfile.mkdtemp(prefix="wheelgen-demo-")
store = ExemplarStore(data_dir + "/exemplars")
store_corpus(build_corpus(30, seed=0), store)
app = create_app(data_dir, registry=default_registry(64, linear_schedule(100)),
                 exemplar_store=store)

with TestClient(app) as api:
    session = api.post("/sessions").json()["id"]
    print("session", session)

    job = api.post(f"/sessions/{session}/generate", json={
        "concepts": [
            {"keyword": "dynamic", "group_weight": 1.0},
            {"keyword": "bold", "group_weight": 0.5},
        ],
        "symmetry": {"k": 4},
        "output_count": 4,
        "seed": 11,
        "backend_id": "stub-pattern",
    }).json()

    while True:
        state = api.get(f"/jobs/{job['job_id']}").json()
        if state["state"] in ("done", "failed"):
            break
        time.sleep(0.1)
    print("job finished:", state["state"], "->", len(state["outputs"]), "images")

    record_id = state["record_id"]
    record = api.get(f"/generations/{record_id}").json()
    print("resolved prompt:", record["resolved_conditioning"]["prompt"])

    # designer feedback: change the symmetry and pin a new seed
    fb = api.post(f"/generations/{record_id}/feedback", json={
        "symmetry_change": {"k": 6},
        "seed": 12,
        "note": "more repetitions",
    }).json()
    while True:
        state = api.get(f"/jobs/{fb['job_id']}").json()
        if state["state"] in ("done", "failed"):
            break
        time.sleep(0.1)
    child_id = state["record_id"]

    lineage = api.get(f"/generations/{child_id}/lineage").json()["lineage"]
    print("lineage:")
    for entry in lineage:
        print("  ", entry["id"], "seed", entry["seed"], "note", entry["note"])

    replay = api.post(f"/generations/{child_id}/replay").json()
    print("replay byte-identical:", replay["identical"])
print("data dir:", data_dir)
