"""HTTP surface: communicator API, recipient tracking endpoints, share links.

Auth model: /api/* needs the configured bearer (scoped to owned channels),
/t/* needs only a valid tracking token, /s/* needs only a share token, and
/healthz is open. Errors map onto 401/403/404/409/422.
"""

from __future__ import annotations

import hmac
import html as html_mod
import json
from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse

from .errors import (
    AuthError,
    CommToolError,
    EditError,
    ForbiddenError,
    NotFoundError,
    StateError,
    ValidationError,
)
from .service import Service
from .splitter import EditOp
from .store import section_to_dict

MAX_UPLOAD_BYTES = 2 * 1024 * 1024

# Served when no built tracker bundle is present; enough for the recipient
# page to load without errors. The real tracker ships separately.
FALLBACK_TRACKER_JS = (
    "// tracker bundle not installed; page views are not instrumented\n"
    "console.warn('commtool tracker bundle missing');\n"
)

_STATUS_BY_ERROR = [
    (AuthError, 401),
    (ForbiddenError, 403),
    (NotFoundError, 404),
    (StateError, 409),
    (EditError, 422),
    (ValidationError, 422),
]


def _status_for(exc: CommToolError) -> int:
    for klass, status in _STATUS_BY_ERROR:
        if isinstance(exc, klass):
            return status
    return 500


def _tracker_source(service: Service) -> str:
    candidates = [
        Path("frontend/dist/tracker.js"),
        service.config.data_dir / "static" / "tracker.js",
    ]
    for path in candidates:
        if path.exists():
            return path.read_text(encoding="utf-8")
    return FALLBACK_TRACKER_JS


def create_app(service: Service) -> FastAPI:
    app = FastAPI(title="commtool", docs_url=None, redoc_url=None)

    @app.exception_handler(CommToolError)
    async def _commtool_error(_request: Request, exc: CommToolError):
        return JSONResponse(status_code=_status_for(exc), content={"error": str(exc)})

    def authenticate(request: Request) -> str:
        """Constant-time bearer check; returns the communicator owner name."""
        configured = service.config.bearer_tokens
        if not configured:
            raise AuthError("no communicator bearer configured")
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise AuthError("missing bearer token")
        presented = header[7:].strip()
        for owner, token in configured.items():
            if hmac.compare_digest(presented.encode(), token.encode()):
                return owner
        raise AuthError("unknown bearer token")

    def authorize_channel(owner: str, channel_id: str) -> None:
        if service.channel(channel_id).owner != owner:
            raise ForbiddenError("channel belongs to another communicator")

    def authorize_campaign(owner: str, campaign_id: str) -> str:
        campaign = service.campaign(campaign_id)
        authorize_channel(owner, campaign.channel_id)
        return campaign.channel_id

    # --- health ---------------------------------------------------------

    @app.get("/healthz")
    async def healthz():
        return PlainTextResponse("ok")

    # --- communicator API -------------------------------------------------

    @app.post("/api/channels")
    async def create_channel(request: Request):
        owner = authenticate(request)
        body = await request.json()
        channel = service.create_channel(
            name=body["name"],
            sender_identity=body["sender_identity"],
            brand=body.get("brand", ""),
            audience_size=int(body.get("audience_size", 0)),
            timezone=body.get("timezone"),
            hourly_rate_usd=body.get("hourly_rate_usd"),
            owner=owner,
            excluded_emails=tuple(body.get("excluded_emails", ())),
        )
        return {"channel_id": channel.channel_id}

    @app.post("/api/channels/{channel_id}/recipients")
    async def import_recipients(channel_id: str, request: Request, seed: int = Query(0)):
        owner = authenticate(request)
        authorize_channel(owner, channel_id)
        csv_text = (await request.body()).decode("utf-8")
        added = service.import_recipients(channel_id, csv_text, seed=seed)
        groups = {}
        for r in added:
            groups[r.group] = groups.get(r.group, 0) + 1
        return {"imported": len(added), "groups": groups}

    @app.post("/api/channels/{channel_id}/campaigns")
    async def create_campaign(channel_id: str, request: Request):
        owner = authenticate(request)
        authorize_channel(owner, channel_id)
        raw = await request.body()
        if len(raw) > MAX_UPLOAD_BYTES:
            raise ValidationError("upload exceeds 2 MiB")
        body = json.loads(raw)
        campaign = service.create_campaign(channel_id, body["subject"], body["html"])
        return {
            "campaign_id": campaign.campaign_id,
            "sections": [section_to_dict(s) for s in campaign.sections],
        }

    @app.patch("/api/campaigns/{campaign_id}/sections")
    async def edit_sections(campaign_id: str, request: Request):
        owner = authenticate(request)
        authorize_campaign(owner, campaign_id)
        ops = [EditOp.from_dict(d) for d in await request.json()]
        campaign = service.edit_sections(campaign_id, ops)
        return {"sections": [section_to_dict(s) for s in campaign.sections]}

    @app.post("/api/campaigns/{campaign_id}/send")
    async def send_campaign(campaign_id: str, request: Request):
        owner = authenticate(request)
        authorize_campaign(owner, campaign_id)
        body = json.loads(await request.body() or b"{}")
        transport = _build_transport(service, body)
        report = service.send_campaign(campaign_id, transport, base_url=body.get("base_url"))
        return report.as_dict()

    @app.get("/api/campaigns/{campaign_id}/dashboard")
    async def dashboard(campaign_id: str, request: Request, kind: str = Query("email")):
        owner = authenticate(request)
        authorize_campaign(owner, campaign_id)
        return json.loads(service.dashboard(campaign_id, kind).canonical_json())

    @app.post("/api/campaigns/{campaign_id}/share")
    async def share(campaign_id: str, request: Request):
        owner = authenticate(request)
        authorize_campaign(owner, campaign_id)
        body = await request.json()
        report = service.share(campaign_id, body.get("kind", "email"), body.get("notes", ""))
        return report.as_dict()

    @app.get("/api/campaigns/{campaign_id}/export.csv")
    async def export_csv(campaign_id: str, request: Request):
        owner = authenticate(request)
        authorize_campaign(owner, campaign_id)
        out = service.config.data_dir / f"{campaign_id}-metrics.csv"
        service.export_csv(campaign_id, out)
        return Response(content=out.read_text(encoding="utf-8"), media_type="text/csv")

    # --- share links ------------------------------------------------------

    def _share_payload(share_token: str) -> dict:
        share = service.resolve_share(share_token)
        dash = service.dashboard(share.campaign_id, share.kind)
        return {"notes": share.notes, "dashboard": dash.as_dict(), "kind": share.kind}

    @app.get("/s/{share_token}")
    async def shared_dashboard(share_token: str):
        if share_token.endswith(".json"):
            return JSONResponse(_share_payload(share_token[: -len(".json")]))
        payload = _share_payload(share_token)
        body = (
            "<!doctype html><html><head><meta charset=\"utf-8\">"
            "<title>Shared report</title></head><body>"
            f"<h1>Shared {html_mod.escape(payload['kind'])} dashboard</h1>"
            f"<p class=\"notes\">{html_mod.escape(payload['notes'])}</p>"
            f"<pre id=\"dashboard-data\">{html_mod.escape(json.dumps(payload['dashboard'], indent=2, sort_keys=True))}</pre>"
            "</body></html>"
        )
        return HTMLResponse(body)

    @app.post("/s/{share_token}/comments")
    async def share_comment(share_token: str, request: Request):
        share = service.resolve_share(share_token)
        body = await request.json()
        service.post_sender_comment(
            share.campaign_id,
            body["section_id"],
            body["text"],
            pinned=bool(body.get("pinned", False)),
        )
        return {"ok": True}

    # --- recipient endpoints ---------------------------------------------

    @app.get("/t/{token}")
    async def tracked_page(token: str):
        return HTMLResponse(service.render_page(token))

    @app.post("/t/{token}/events")
    async def post_events(token: str, request: Request):
        raw = await request.body()
        if len(raw) > MAX_UPLOAD_BYTES:
            raise ValidationError("event batch exceeds 2 MiB")
        batch = json.loads(raw)
        if not isinstance(batch, list):
            raise ValidationError("event batch must be a JSON array")
        accepted = service.record_events(token, batch)
        return {"ok": True, "n": accepted}

    @app.post("/t/{token}/relevance")
    async def post_relevance(token: str, request: Request):
        body = await request.json()
        service.set_relevance(token, body["section_id"], bool(body["on"]))
        return {"ok": True}

    @app.post("/t/{token}/comments")
    async def post_comment(token: str, request: Request):
        body = await request.json()
        service.post_recipient_comment(token, body["section_id"], body["text"])
        return {"ok": True}

    # --- static ----------------------------------------------------------

    @app.get("/static/tracker.js")
    async def tracker_js():
        return Response(content=_tracker_source(service), media_type="application/javascript")

    return app


def _build_transport(service: Service, body: dict):
    from .delivery import FileDropTransport, SMTPTransport

    kind = body.get("transport", "file")
    if kind == "file":
        outdir = body.get("outdir") or str(service.config.data_dir / "outbox")
        return FileDropTransport(outdir)
    if kind == "smtp":
        return SMTPTransport(body.get("smtp_host", "localhost"), int(body.get("smtp_port", 25)))
    raise ValidationError(f"unknown transport {kind!r}")
