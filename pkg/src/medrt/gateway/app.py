"""HTTP + SSE facade over the pipeline with RBAC, audit, and persistence.

Endpoints (all under /v1): studies intake, result/overlay retrieval,
worklist, priority escalation, threshold configuration, metrics snapshot
and a 1 Hz server-sent-events stream. Every write action produces exactly
one audit record; denials are audited too.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse

from medrt.errors import MedRTError, OverloadError, ParseError, StorageError
from medrt.dicom.codec import parse as dicom_parse, write as dicom_write
from medrt.dicom.deident import deidentify
from medrt.gateway.audit import AuditLog
from medrt.gateway.config import ServerConfig, allows, role_of
from medrt.gateway.storage import BlobStore, StudyIndex
from medrt.pipeline.policy import ROUTINE, STAT, StudyJob
from medrt.pipeline.runtime import RunningPipeline
from medrt.pipeline.service import ModelBundle, Thresholds


class Gateway:
    """Mutable service state shared by the endpoint handlers."""

    def __init__(self, config: ServerConfig, bundle: ModelBundle):
        self.config = config
        self.bundle = bundle
        bundle.thresholds = config.thresholds
        self.store = BlobStore(config.storage_dir)
        self.index = StudyIndex(config.storage_dir)
        self.audit = AuditLog(config.storage_dir, fsync=config.audit_fsync)
        self.pipeline = RunningPipeline(config.pipeline, bundle).start()
        self.lock = threading.Lock()
        self.worklist: dict[str, dict] = {}
        self._replay_index()
        self.metrics_lock = threading.Lock()
        self.metrics_tick = 0
        self.metrics_body = b"{}"
        self._refresh_metrics()
        self._closed = False
        self._ticker = threading.Thread(target=self._tick_loop, daemon=True)
        self._ticker.start()

    # --- persistence / worklist -------------------------------------------------

    def _replay_index(self):
        for row in self.index.replay():
            self.worklist[row["study_id"]] = row

    def submit_study(self, body: bytes, priority: str, actor: str) -> str:
        if self.audit.read_only:
            raise StorageError("service is read-only after an audit failure")
        if self.config.deident_salt:
            body = dicom_write(deidentify(dicom_parse(body), self.config.deident_salt))
        study_id = "st-" + uuid.uuid4().hex[:12]
        entry = {"study_id": study_id, "priority": priority, "status": "queued",
                 "submitted_at": time.time(), "headline": None,
                 "flagged_for_review": False, "refs": {}}
        with self.lock:
            self.worklist[study_id] = entry
        job = StudyJob(job_id=study_id, priority=priority, payload=body,
                       metadata={"study_id": study_id})
        try:
            ticket = self.pipeline.submit(job)
        except OverloadError:
            with self.lock:
                entry["status"] = "shed"
            raise
        ticket.add_callback(self._on_done)
        self.audit.append(actor, "study.submit", study_id,
                          detail=f"priority={priority}", timestamp=time.time())
        return study_id

    def _on_done(self, ticket):
        with self.lock:
            entry = self.worklist.get(ticket.job_id)
            if entry is None:
                return
        if ticket.status != "done":
            with self.lock:
                entry["status"] = "failed" if ticket.status == "failed" else ticket.status
                entry["error"] = str(ticket.error) if ticket.error else None
            return
        result = ticket.result
        persisted = True
        refs = {}
        try:
            refs["result"] = self.store.put(result.message_json)
            refs["overlay"] = self.store.put(result.overlay_png)
            refs["base"] = self.store.put(result.base_png)
            if result.saliency_png is not None:
                refs["saliency"] = self.store.put(result.saliency_png)
            self.index.append({
                "study_id": ticket.job_id, "priority": result.priority,
                "status": "done", "submitted_at": self.worklist[ticket.job_id]
                .get("submitted_at"),
                "headline": {"label": result.label, "score": round(result.score, 4)},
                "flagged_for_review": result.flagged_for_review, "refs": refs})
        except StorageError:
            persisted = False
        with self.lock:
            entry.update(status="done", refs=refs,
                         headline={"label": result.label,
                                   "score": round(result.score, 4)},
                         flagged_for_review=result.flagged_for_review,
                         persisted=persisted)

    def escalate(self, study_id: str) -> bool:
        changed = self.pipeline.escalate(study_id)
        if changed:
            with self.lock:
                if study_id in self.worklist:
                    self.worklist[study_id]["priority"] = STAT
        return changed

    def sorted_worklist(self) -> list[dict]:
        with self.lock:
            rows = [dict(v) for v in self.worklist.values()]
        prio_rank = {STAT: 0, ROUTINE: 1}
        rows.sort(key=lambda r: (prio_rank.get(r.get("priority"), 2),
                                 r.get("submitted_at") or 0.0))
        return rows

    # --- metrics ------------------------------------------------------------------

    def _snapshot(self, tick: int) -> bytes:
        stats = self.pipeline.stats()
        with self.lock:
            counts = {"queued": 0, "processing": 0, "done": 0, "failed": 0}
            for v in self.worklist.values():
                counts[v["status"]] = counts.get(v["status"], 0) + 1
        doc = json.loads(stats.to_json_bytes())
        doc.pop("queue_depth_series", None)
        payload = {"tick": tick, "time": round(time.time(), 3),
                   "pipeline": doc, "queues": self.pipeline.queue_depths(),
                   "worklist": counts,
                   "thresholds": self.bundle.thresholds.to_json()}
        return json.dumps(payload, sort_keys=True).encode()

    def _refresh_metrics(self):
        with self.metrics_lock:
            self.metrics_tick += 1
            self.metrics_body = self._snapshot(self.metrics_tick)

    def _tick_loop(self):
        while not self._closed:
            time.sleep(self.config.metrics_interval_s)
            if not self._closed:
                self._refresh_metrics()

    def close(self):
        if self._closed:
            return
        self._closed = True
        self.pipeline.shutdown(drain=True)

    def actor(self, token: str, role: str) -> str:
        return AuditLog.actor_id(token, role)


def _bearer(request: Request) -> str | None:
    header = request.headers.get("authorization", "")
    if header.lower().startswith("bearer "):
        return header[7:].strip()
    return None


def create_app(config: ServerConfig, bundle: ModelBundle) -> FastAPI:
    gw = Gateway(config, bundle)

    @asynccontextmanager
    async def lifespan(app):
        yield
        gw.close()

    app = FastAPI(lifespan=lifespan)
    app.state.gateway = gw

    def authed(request: Request, minimum: str, action: str | None = None,
               study_id: str | None = None) -> tuple[str, str]:
        token = _bearer(request)
        role = role_of(config, token)
        if role is None:
            raise HTTPException(status_code=401, detail="missing or unknown token")
        if not allows(role, minimum):
            if action is not None and not gw.audit.read_only:
                gw.audit.append(gw.actor(token, role), f"denied:{action}",
                                study_id, detail=f"requires {minimum}",
                                timestamp=time.time())
            raise HTTPException(status_code=403, detail=f"requires {minimum} role")
        return token, role

    @app.post("/v1/studies", status_code=202)
    async def submit_study(request: Request, priority: str = ROUTINE):
        token, role = authed(request, "operator", action="study.submit")
        if priority not in (STAT, ROUTINE):
            raise HTTPException(status_code=400, detail=f"bad priority {priority!r}")
        body = await request.body()
        if not body:
            raise HTTPException(status_code=400, detail="empty body")
        try:
            study_id = gw.submit_study(body, priority, gw.actor(token, role))
        except OverloadError as e:
            raise HTTPException(status_code=429,
                                detail=f"pipeline overloaded (depth {e.queue_depth})")
        except ParseError as e:
            raise HTTPException(status_code=400, detail=f"malformed DICOM: {e}")
        except MedRTError as e:
            raise HTTPException(status_code=400, detail=str(e))
        return {"study_id": study_id, "status": "queued"}

    @app.get("/v1/studies/{study_id}/result")
    def get_result(request: Request, study_id: str):
        authed(request, "viewer")
        with gw.lock:
            entry = gw.worklist.get(study_id)
        if entry is None:
            raise HTTPException(status_code=404, detail="unknown study")
        if entry["status"] in ("queued", "processing"):
            return JSONResponse({"status": entry["status"]}, status_code=202)
        if entry["status"] != "done":
            raise HTTPException(status_code=500,
                                detail=entry.get("error") or entry["status"])
        return Response(content=gw.store.get(entry["refs"]["result"]),
                        media_type="application/json")

    @app.get("/v1/studies/{study_id}/overlay.png")
    def get_overlay(request: Request, study_id: str, layer: str = "composite"):
        authed(request, "viewer")
        with gw.lock:
            entry = gw.worklist.get(study_id)
        if entry is None:
            raise HTTPException(status_code=404, detail="unknown study")
        if entry["status"] != "done":
            return JSONResponse({"status": entry["status"]}, status_code=202)
        ref_key = {"composite": "overlay", "base": "base",
                   "saliency": "saliency"}.get(layer)
        if ref_key is None:
            raise HTTPException(status_code=400, detail=f"unknown layer {layer!r}")
        ref = entry["refs"].get(ref_key)
        if ref is None:
            raise HTTPException(status_code=404, detail=f"no {layer} asset")
        return Response(content=gw.store.get(ref), media_type="image/png")

    @app.get("/v1/worklist")
    def worklist(request: Request):
        authed(request, "viewer")
        return {"studies": gw.sorted_worklist()}

    @app.post("/v1/studies/{study_id}/priority")
    async def set_priority(request: Request, study_id: str):
        token, role = authed(request, "operator", action="study.priority",
                             study_id=study_id)
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="body must be JSON")
        priority = body.get("priority")
        if priority != STAT:
            raise HTTPException(status_code=400, detail="only stat escalation supported")
        with gw.lock:
            known = study_id in gw.worklist
        if not known:
            raise HTTPException(status_code=404, detail="unknown study")
        changed = gw.escalate(study_id)
        gw.audit.append(gw.actor(token, role), "study.priority", study_id,
                        detail=f"changed={changed}", timestamp=time.time())
        return {"study_id": study_id, "changed": changed,
                "notice": None if changed else "study is no longer queued"}

    @app.get("/v1/config/thresholds")
    def get_thresholds(request: Request):
        authed(request, "viewer")
        return gw.bundle.thresholds.to_json()

    @app.put("/v1/config/thresholds")
    async def put_thresholds(request: Request):
        token, role = authed(request, "operator", action="config.thresholds")
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="body must be JSON")
        allowed = {"confidence", "nms_iou", "tau_exit", "tau_conf", "entropy_gate"}
        unknown = set(body) - allowed
        if unknown:
            raise HTTPException(status_code=400, detail=f"unknown fields {sorted(unknown)}")
        try:
            new = gw.bundle.set_thresholds(**{k: float(v) for k, v in body.items()})
        except MedRTError as e:
            raise HTTPException(status_code=400, detail=str(e))
        gw.audit.append(gw.actor(token, role), "config.thresholds",
                        detail=json.dumps(body, sort_keys=True), timestamp=time.time())
        return new.to_json()

    @app.get("/v1/metrics")
    def metrics(request: Request):
        authed(request, "viewer")
        with gw.metrics_lock:
            return Response(content=gw.metrics_body, media_type="application/json")

    @app.get("/v1/metrics/stream")
    def metrics_stream(request: Request):
        authed(request, "viewer")

        async def gen():
            import asyncio
            last = -1
            while not gw._closed:
                with gw.metrics_lock:
                    tick, body = gw.metrics_tick, gw.metrics_body
                if tick != last:
                    last = tick
                    yield b"event: metrics\ndata: " + body + b"\n\n"
                await asyncio.sleep(min(gw.config.metrics_interval_s / 4, 0.25))

        return StreamingResponse(gen(), media_type="text/event-stream")

    return app
