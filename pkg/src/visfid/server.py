"""HTTP surface for running the experiment protocol in a browser.

Endpoints (all JSON unless noted, schema version in every payload):

    POST /api/v1/sessions                {participant_index, seed?}
    GET  /api/v1/sessions/{sid}          session progress
    GET  /api/v1/sessions/{sid}/next     current trial payload or completion
    POST /api/v1/sessions/{sid}/responses {trial_id, payload, token?}
    GET  /api/v1/sessions/{sid}/export   human.csv for one session
    GET  /api/v1/export                  human.csv for all sessions
    GET  /stimuli/{name}.png             stimulus image (rendered on demand)

Stimulus images are rendered lazily from the corpus and cached as PNG.
"""

from __future__ import annotations

import io
import os
import threading

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, HTMLResponse, PlainTextResponse
from pydantic import BaseModel

from .corpus import Corpus, load_manifest
from .protocol import SCHEMA_VERSION, ProtocolError, SessionStore, TASK_ORDER
from .render import GrayImage, canonical_camera, compose_pair, render_stimulus
from .simplify import build_family
from .stats import HUMAN_FIELDS, write_human_csv


class SessionCreate(BaseModel):
    participant_index: int
    seed: int = 0


class ResponseSubmit(BaseModel):
    trial_id: str
    payload: dict
    token: str | None = None  # idempotent resubmission token


class StimulusCache:
    """Lazily builds model families and renders stimulus PNGs."""

    def __init__(self, corpus: Corpus, cache_dir: str):
        self.corpus = corpus
        self.cache_dir = cache_dir
        os.makedirs(cache_dir, exist_ok=True)
        self._families: dict = {}
        self._lock = threading.Lock()

    def _family(self, obj: str):
        with self._lock:
            if obj not in self._families:
                entry = self.corpus.entry(obj)
                mesh = entry.load(self.corpus.root)
                self._families[obj] = (
                    build_family(mesh, self.corpus.budget, name=obj,
                                 object_type=entry.object_type),
                    entry.camera_overrides,
                )
            return self._families[obj]

    def _render(self, obj: str, versions: list[str]) -> GrayImage:
        family, overrides = self._family(obj)
        cam = canonical_camera(family.s, **overrides)
        images = [render_stimulus(family.versions()[v], cam) for v in versions]
        if len(images) == 1:
            return images[0]
        return compose_pair(images[0], images[1])

    def png_path(self, name: str) -> str:
        """name: '<object>_<version>' or '<object>_pair_<left>_<right>'."""
        from PIL import Image

        path = os.path.join(self.cache_dir, f"{name}.png")
        if os.path.exists(path):
            return path
        parts = name.split("_")
        if len(parts) == 2:
            obj, versions = parts[0], [parts[1]]
        elif len(parts) == 4 and parts[1] == "pair":
            obj, versions = parts[0], [parts[2], parts[3]]
        else:
            raise KeyError(name)
        valid = {"s", "q5", "q8", "v5", "v8"}
        if obj not in self.corpus.names or not set(versions) <= valid:
            raise KeyError(name)
        img = self._render(obj, versions)
        Image.fromarray(np.round(img.pixels * 255).astype(np.uint8), "L").save(path)
        return path


def create_app(manifest_path: str, store_dir: str,
               cache_dir: str | None = None) -> FastAPI:
    corpus = load_manifest(manifest_path)
    store = SessionStore(corpus, store_dir)
    cache = StimulusCache(corpus, cache_dir or os.path.join(store_dir, "stimulus-cache"))
    app = FastAPI(title="visfid experiment protocol")
    app.state.store = store
    seen_tokens: dict[str, dict] = {}

    def _progress(state):
        return {
            "schema": SCHEMA_VERSION,
            "session_id": state.session_id,
            "participant_index": state.participant_index,
            "task": state.current_task,
            "task_order": list(TASK_ORDER),
            "trial_index": state.trial_index,
            "trial_counts": {t: len(state.plans[t].trials) for t in TASK_ORDER},
            "complete": state.complete,
        }

    @app.post("/api/v1/sessions")
    def create_session(req: SessionCreate):
        try:
            state = store.create_session(req.participant_index, req.seed)
        except ProtocolError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return _progress(state)

    @app.get("/api/v1/sessions/{sid}")
    def session_info(sid: str):
        return _progress(_get(sid))

    @app.get("/api/v1/sessions/{sid}/next")
    def next_trial(sid: str):
        state = _get(sid)
        if state.complete:
            return {"schema": SCHEMA_VERSION, "complete": True, "trial": None}
        trial = state.current_trial()
        payload = trial.to_payload()
        payload["image_urls"] = [f"/stimuli/{n}.png" for n in trial.stimulus_names()]
        return {"schema": SCHEMA_VERSION, "complete": False, "trial": payload,
                "progress": _progress(state)}

    @app.post("/api/v1/sessions/{sid}/responses")
    def submit_response(sid: str, req: ResponseSubmit):
        state = _get(sid)
        if req.token:
            key = f"{sid}:{req.token}"
            if key in seen_tokens:
                return seen_tokens[key]  # idempotent retry
        try:
            store.record_response(sid, req.trial_id, req.payload)
        except ProtocolError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        result = {"schema": SCHEMA_VERSION, "accepted": req.trial_id,
                  "progress": _progress(state)}
        if req.token:
            seen_tokens[f"{sid}:{req.token}"] = result
        return result

    def _export_csv(sid=None):
        rows = store.export_responses(sid)
        buf = io.StringIO()
        import csv as _csv

        w = _csv.DictWriter(buf, fieldnames=HUMAN_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({"participant": r.participant, "object": r.object,
                        "object_type": r.object_type, "simp_type": r.simp_type,
                        "simp_level": r.simp_level, "task": r.task,
                        "value": r.value, "spoiled": int(r.spoiled),
                        "error": int(r.error)})
        return PlainTextResponse(buf.getvalue(), media_type="text/csv")

    @app.get("/api/v1/sessions/{sid}/export")
    def export_session(sid: str):
        _get(sid)
        return _export_csv(sid)

    @app.get("/api/v1/export")
    def export_all():
        return _export_csv()

    @app.get("/stimuli/{name}.png")
    def stimulus(name: str):
        try:
            return FileResponse(cache.png_path(name), media_type="image/png")
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown stimulus {name!r}")

    pkg_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
    ui_dir = os.environ.get("VISFID_UI_DIR") or os.path.join(pkg_root, "frontend", "dist")

    @app.get("/", response_class=HTMLResponse)
    def index():
        page = os.path.join(ui_dir, "index.html")
        if os.path.exists(page):
            return FileResponse(page)
        return HTMLResponse("<h1>visfid protocol server</h1><p>UI bundle not built.</p>")

    @app.get("/app.js")
    def app_js():
        bundle = os.path.join(ui_dir, "app.js")
        if not os.path.exists(bundle):
            raise HTTPException(status_code=404, detail="UI bundle not built")
        return FileResponse(bundle, media_type="text/javascript")

    def _get(sid):
        try:
            return store.get(sid)
        except ProtocolError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    return app


def serve(manifest_path: str, store_dir: str, host: str = "127.0.0.1",
          port: int = 8571):
    import uvicorn

    app = create_app(manifest_path, store_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
