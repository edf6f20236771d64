"""Application service: wires store, ingest, estimation, metrics, and reports.

One Service instance owns a data directory. Ingested events are cached in
memory and appended to the campaign log; every derived value (sessions,
metrics, dashboards) is recomputed from the event list, so a fresh instance
replaying the log reaches the same state byte for byte.
"""

from __future__ import annotations

import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import delivery, reports, splitter
from .domain import (
    Campaign,
    Channel,
    DEFAULT_HOURLY_RATE_USD,
    Recipient,
    assign_groups,
    mint_token,
    parse_recipients_csv,
    verify_token,
)
from .errors import (
    ConfigError,
    ForbiddenError,
    NotFoundError,
    StateError,
    ValidationError,
)
from .estimation import Model, estimate_session, new_model
from .feedback import (
    FeedbackState,
    SENDER_ID,
    build_feedback,
    check_comment_allowed,
    check_relevance_allowed,
    visible_comments,
)
from .ingest import (
    COMMENT,
    Event,
    RELEVANCE_OFF,
    RELEVANCE_ON,
    ReadingSession,
    sessionize,
    validate_event,
)
from .metrics import (
    EmailMetrics,
    MessageMetrics,
    compute_email_metrics,
    compute_message_metrics,
    predict_reputation_change,
    rollup_recipients,
)
from .store import Store


@dataclass(frozen=True)
class Config:
    data_dir: Path
    secret: bytes
    bearer_tokens: dict[str, str] = field(default_factory=dict)  # owner -> token
    timezone: str = "UTC"
    hourly_rate_usd: float = DEFAULT_HOURLY_RATE_USD
    port: int = 8040
    base_url: str = "http://localhost:8040"

    @staticmethod
    def from_env(env: dict | None = None) -> "Config":
        e = env if env is not None else os.environ
        secret = e.get("COMMTOOL_SECRET", "")
        if not secret:
            raise ConfigError("COMMTOOL_SECRET is required")
        port = int(e.get("COMMTOOL_PORT", "8040"))
        return Config(
            data_dir=Path(e.get("COMMTOOL_DATA_DIR", "./commtool-data")),
            secret=secret.encode("utf-8"),
            bearer_tokens=_parse_bearer(e.get("COMMTOOL_BEARER", "")),
            timezone=e.get("COMMTOOL_TZ", "UTC"),
            hourly_rate_usd=float(e.get("COMMTOOL_HOURLY_RATE", str(DEFAULT_HOURLY_RATE_USD))),
            port=port,
            base_url=e.get("COMMTOOL_BASE_URL", f"http://localhost:{port}"),
        )


def _parse_bearer(raw: str) -> dict[str, str]:
    """"token" or "alice:tok1,bob:tok2" forms."""
    raw = raw.strip()
    if not raw:
        return {}
    if ":" not in raw:
        return {"default": raw}
    out = {}
    for part in raw.split(","):
        owner, _, token = part.strip().partition(":")
        if not owner or not token:
            raise ConfigError(f"bad bearer spec {part!r}")
        out[owner] = token
    return out


class Service:
    def __init__(self, config: Config, model: Model | None = None) -> None:
        self.config = config
        self.store = Store(config.data_dir)
        self.model = model or new_model("baseline1")
        self._events: dict[str, list[Event]] = {}
        self._seen: dict[str, set[tuple[str, int]]] = {}
        self._ingest_locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    # --- channels and panels ------------------------------------------------

    def _next_id(self, existing: list[str], prefix: str) -> str:
        top = 0
        for name in existing:
            m = re.fullmatch(rf"{re.escape(prefix)}(\d+)", name)
            if m:
                top = max(top, int(m.group(1)))
        return f"{prefix}{top + 1}"

    def create_channel(
        self,
        name: str,
        sender_identity: str,
        brand: str = "",
        audience_size: int = 0,
        timezone: str | None = None,
        hourly_rate_usd: float | None = None,
        owner: str = "default",
        excluded_emails: tuple[str, ...] = (),
    ) -> Channel:
        channel = Channel(
            channel_id=self._next_id(self.store.list_channels(), "ch"),
            name=name,
            sender_identity=sender_identity,
            brand=brand,
            audience_size=audience_size,
            timezone=timezone or self.config.timezone,
            hourly_rate_usd=(
                hourly_rate_usd if hourly_rate_usd is not None else self.config.hourly_rate_usd
            ),
            owner=owner,
            excluded_emails=excluded_emails,
        )
        self.store.save_channel(channel, [])
        return channel

    def channel(self, channel_id: str) -> Channel:
        return self.store.load_channel(channel_id)[0]

    def recipients(self, channel_id: str) -> list[Recipient]:
        return self.store.load_channel(channel_id)[1]

    def import_recipients(self, channel_id: str, csv_text: str, seed: int = 0) -> list[Recipient]:
        """Parse the email,unit,job_category CSV and assign groups by seed."""
        channel, existing = self.store.load_channel(channel_id)
        start = len(existing)
        parsed = parse_recipients_csv(csv_text, id_prefix="r")
        renumbered = [
            Recipient(
                recipient_id=f"r{start + i + 1}",
                email_address=r.email_address,
                unit=r.unit,
                job_category=r.job_category,
            )
            for i, r in enumerate(parsed)
        ]
        assigned = assign_groups(renumbered, seed)
        panel = existing + assigned
        if channel.audience_size < len(panel):
            channel = Channel(
                channel_id=channel.channel_id,
                name=channel.name,
                sender_identity=channel.sender_identity,
                brand=channel.brand,
                audience_size=len(panel),
                timezone=channel.timezone,
                hourly_rate_usd=channel.hourly_rate_usd,
                owner=channel.owner,
                excluded_emails=channel.excluded_emails,
            )
        self.store.save_channel(channel, panel)
        return assigned

    # --- campaigns ------------------------------------------------------------

    def create_campaign(self, channel_id: str, subject: str, raw_html: str) -> Campaign:
        self.store.load_channel(channel_id)  # existence check
        names = self.store.list_campaigns(channel_id)
        suffixes = [n[len(channel_id) + 1 :] for n in names if n.startswith(f"{channel_id}-")]
        campaign = Campaign(
            campaign_id=f"{channel_id}-{self._next_id(suffixes, 'c')}",
            channel_id=channel_id,
            subject=subject,
            raw_html=raw_html,
            sections=tuple(splitter.split_html(raw_html)),
        )
        self.store.save_campaign(campaign)
        return campaign

    def campaign(self, campaign_id: str) -> Campaign:
        return self.store.load_campaign(campaign_id)[0]

    def campaign_extra(self, campaign_id: str) -> dict:
        return self.store.load_campaign(campaign_id)[1]

    def edit_sections(self, campaign_id: str, ops: list[splitter.EditOp]) -> Campaign:
        campaign = self.campaign(campaign_id)
        if campaign.sent_at is not None:
            raise StateError("sections are frozen after send")
        sections = splitter.apply_edits(list(campaign.sections), ops)
        updated = Campaign(
            campaign_id=campaign.campaign_id,
            channel_id=campaign.channel_id,
            subject=campaign.subject,
            raw_html=campaign.raw_html,
            sections=tuple(sections),
            sent_at=campaign.sent_at,
            seq_index=campaign.seq_index,
        )
        self.store.save_campaign(updated)
        return updated

    def send_campaign(
        self,
        campaign_id: str,
        transport,
        base_url: str | None = None,
        now_ms: int | None = None,
    ) -> delivery.SendReport:
        campaign = self.campaign(campaign_id)
        channel, panel = self.store.load_channel(campaign.channel_id)
        report = delivery.send_campaign(
            campaign,
            channel,
            panel,
            transport,
            base_url or self.config.base_url,
            self.config.secret,
        )
        sent_ids = [c for c in self.store.list_campaigns(campaign.channel_id)]
        seq = 0
        for cid in sent_ids:
            other, _ = self.store.load_campaign(cid)
            if other.seq_index is not None:
                seq = max(seq, other.seq_index + 1)
        stamped = Campaign(
            campaign_id=campaign.campaign_id,
            channel_id=campaign.channel_id,
            subject=campaign.subject,
            raw_html=campaign.raw_html,
            sections=campaign.sections,
            sent_at=now_ms if now_ms is not None else int(time.time() * 1000),
            seq_index=seq,
        )
        self.store.save_campaign(stamped, {"send_report": report.as_dict()})
        return report

    # --- recipient-facing -------------------------------------------------------

    def resolve_token(self, token: str) -> tuple[Campaign, Recipient]:
        campaign_id, recipient_id = verify_token(token, self.config.secret)
        try:
            campaign = self.campaign(campaign_id)
        except NotFoundError:
            raise NotFoundError(f"campaign {campaign_id!r} not found") from None
        panel = self.recipients(campaign.channel_id)
        for r in panel:
            if r.recipient_id == recipient_id:
                return campaign, r
        raise NotFoundError(f"recipient {recipient_id!r} not on the panel")

    def render_page(self, token: str) -> str:
        campaign, recipient = self.resolve_token(token)
        tok = mint_token(campaign.campaign_id, recipient.recipient_id, self.config.secret)
        return delivery.render_recipient_page(
            campaign, recipient, tok, feedback=self.feedback(campaign.campaign_id)
        )

    def _ingest_lock(self, campaign_id: str) -> threading.Lock:
        with self._guard:
            return self._ingest_locks.setdefault(campaign_id, threading.Lock())

    def record_events(self, token: str, wire_events: list[dict]) -> int:
        """Validate, dedupe, and append a wire batch; returns accepted count.

        Events violating their group contract (relevance or comments from an
        implicit recipient) and duplicates are dropped, not fatal.
        """
        campaign, recipient = self.resolve_token(token)
        cid_key = campaign.campaign_id
        accepted: list[Event] = []
        with self._ingest_lock(cid_key):
            events = self._load_events_locked(cid_key)
            seen = self._seen[cid_key]
            for wire in wire_events:
                ev = self._to_event(campaign, recipient, wire)
                if ev is None:
                    continue
                key = (ev.recipient_id, ev.cid)
                if key in seen:
                    continue
                seen.add(key)
                accepted.append(ev)
            if accepted:
                self.store.append_events(
                    cid_key,
                    [
                        {
                            "r": e.recipient_id,
                            "cid": e.cid,
                            "ts": e.ts_ms,
                            "k": e.kind,
                            "p": e.payload,
                        }
                        for e in accepted
                    ],
                )
                events.extend(accepted)
        return len(accepted)

    def record_event(self, token: str, wire: dict) -> None:
        """Single-event form; raises on validation/authorization failure."""
        campaign, recipient = self.resolve_token(token)
        ev = self._to_event(campaign, recipient, wire, strict=True)
        assert ev is not None
        with self._ingest_lock(campaign.campaign_id):
            events = self._load_events_locked(campaign.campaign_id)
            key = (ev.recipient_id, ev.cid)
            if key in self._seen[campaign.campaign_id]:
                return
            self._seen[campaign.campaign_id].add(key)
            self.store.append_event(
                campaign.campaign_id,
                {"r": ev.recipient_id, "cid": ev.cid, "ts": ev.ts_ms, "k": ev.kind, "p": ev.payload},
            )
            events.append(ev)

    def _to_event(
        self, campaign: Campaign, recipient: Recipient, wire: dict, strict: bool = False
    ) -> Event | None:
        try:
            if not isinstance(wire, dict):
                raise ValidationError("event must be an object")
            cid = wire["cid"]
            ts = wire["ts"]
            kind = wire["k"]
            payload = wire.get("p", {})
            if not isinstance(cid, int) or not isinstance(ts, int):
                raise ValidationError("cid and ts must be integers")
            validate_event(kind, payload)
            if kind in (RELEVANCE_ON, RELEVANCE_OFF):
                check_relevance_allowed(recipient, campaign, payload["section_id"])
            elif kind == COMMENT:
                check_comment_allowed(recipient, campaign, payload["section_id"], payload["text"], False)
            return Event(
                recipient_id=recipient.recipient_id,
                campaign_id=campaign.campaign_id,
                cid=cid,
                ts_ms=ts,
                kind=kind,
                payload=payload,
            )
        except (KeyError, ValidationError, ForbiddenError) as exc:
            if strict:
                if isinstance(exc, KeyError):
                    raise ValidationError(f"event missing field {exc}") from None
                raise
            return None

    def set_relevance(self, token: str, section_id: str, on: bool, now_ms: int | None = None) -> None:
        campaign, recipient = self.resolve_token(token)
        check_relevance_allowed(recipient, campaign, section_id)
        kind = RELEVANCE_ON if on else RELEVANCE_OFF
        self._append_internal(
            campaign.campaign_id,
            recipient.recipient_id,
            kind,
            {"section_id": section_id},
            now_ms,
        )

    def post_recipient_comment(
        self, token: str, section_id: str, text: str, now_ms: int | None = None
    ) -> None:
        campaign, recipient = self.resolve_token(token)
        check_comment_allowed(recipient, campaign, section_id, text, pinned=False)
        self._append_internal(
            campaign.campaign_id,
            recipient.recipient_id,
            COMMENT,
            {"section_id": section_id, "text": text},
            now_ms,
        )

    def post_sender_comment(
        self, campaign_id: str, section_id: str, text: str, pinned: bool = False, now_ms: int | None = None
    ) -> None:
        campaign = self.campaign(campaign_id)
        check_comment_allowed(None, campaign, section_id, text, pinned=pinned)
        self._append_internal(
            campaign_id,
            SENDER_ID,
            COMMENT,
            {"section_id": section_id, "text": text, "pinned": pinned},
            now_ms,
        )

    def _append_internal(
        self, campaign_id: str, author_id: str, kind: str, payload: dict, now_ms: int | None
    ) -> None:
        ts = now_ms if now_ms is not None else int(time.time() * 1000)
        with self._ingest_lock(campaign_id):
            events = self._load_events_locked(campaign_id)
            seen = self._seen[campaign_id]
            cid = 1_000_000
            for rid, c in seen:
                if rid == author_id:
                    cid = max(cid, c + 1)
            seen.add((author_id, cid))
            ev = Event(
                recipient_id=author_id,
                campaign_id=campaign_id,
                cid=cid,
                ts_ms=ts,
                kind=kind,
                payload=payload,
            )
            self.store.append_event(
                campaign_id,
                {"r": ev.recipient_id, "cid": ev.cid, "ts": ev.ts_ms, "k": ev.kind, "p": ev.payload},
            )
            events.append(ev)

    # --- derived state -----------------------------------------------------------

    def _load_events_locked(self, campaign_id: str) -> list[Event]:
        if campaign_id not in self._events:
            records = self.store.load_event_records(campaign_id)
            events = [
                Event(
                    recipient_id=rec["r"],
                    campaign_id=campaign_id,
                    cid=rec["cid"],
                    ts_ms=rec["ts"],
                    kind=rec["k"],
                    payload=rec["p"],
                )
                for rec in records
            ]
            self._events[campaign_id] = events
            self._seen[campaign_id] = {(e.recipient_id, e.cid) for e in events}
        return self._events[campaign_id]

    def events(self, campaign_id: str) -> list[Event]:
        self.campaign(campaign_id)  # existence check
        with self._ingest_lock(campaign_id):
            return list(self._load_events_locked(campaign_id))

    def sessions(self, campaign_id: str) -> dict[str, list[ReadingSession]]:
        """Reading sessions per recipient, rebuilt from the event log."""
        by_recipient: dict[str, list[Event]] = {}
        for ev in self.events(campaign_id):
            if ev.recipient_id == SENDER_ID:
                continue
            by_recipient.setdefault(ev.recipient_id, []).append(ev)
        return {rid: sessionize(evs) for rid, evs in sorted(by_recipient.items())}

    def feedback(self, campaign_id: str) -> FeedbackState:
        return build_feedback(campaign_id, self.events(campaign_id))

    def estimates(
        self, campaign_id: str, sessions: dict[str, list[ReadingSession]] | None = None
    ) -> dict[str, dict[str, float]]:
        """Per-recipient per-section estimated reading seconds, summed across
        the recipient's sessions, using the service's configured model."""
        campaign = self.campaign(campaign_id)
        words = {s.section_id: s.word_count for s in campaign.sections}
        sess = sessions if sessions is not None else self.sessions(campaign_id)
        out: dict[str, dict[str, float]] = {}
        for rid, rsessions in sess.items():
            totals: dict[str, float] = {}
            for session in rsessions:
                if not session.layouts:
                    continue
                for est in estimate_session(self.model, session, words):
                    totals[est.section_id] = totals.get(est.section_id, 0.0) + est.reading_time_s
            out[rid] = totals
        return out

    def _metric_inputs(self, campaign_id: str):
        campaign = self.campaign(campaign_id)
        channel, panel = self.store.load_channel(campaign.channel_id)
        sessions = self.sessions(campaign_id)
        estimates = self.estimates(campaign_id, sessions)
        feedback = self.feedback(campaign_id)
        return campaign, channel, panel, sessions, estimates, feedback

    def channel_history(self, channel_id: str, before_seq: int | None = None) -> list[tuple[float, float]]:
        """(open_rate, click_rate) for sent campaigns in seq order, optionally
        strictly before one seq index."""
        rows: list[tuple[int, float, float]] = []
        for cid in self.store.list_campaigns(channel_id):
            campaign, _ = self.store.load_campaign(cid)
            if campaign.sent_at is None or campaign.seq_index is None:
                continue
            if before_seq is not None and campaign.seq_index >= before_seq:
                continue
            em = self.email_metrics(cid, with_reputation=False)
            if em.open_rate is None:
                continue
            rows.append((campaign.seq_index, em.open_rate, em.click_rate or 0.0))
        rows.sort()
        return [(o, c) for _, o, c in rows]

    def email_metrics(self, campaign_id: str, with_reputation: bool = True) -> EmailMetrics:
        campaign, channel, panel, sessions, estimates, feedback = self._metric_inputs(campaign_id)
        metrics = compute_email_metrics(campaign, channel, panel, sessions, estimates, feedback)
        if with_reputation and campaign.seq_index is not None and metrics.open_rate is not None:
            history = self.channel_history(campaign.channel_id, before_seq=campaign.seq_index)
            change = predict_reputation_change(
                history, metrics.open_rate, metrics.click_rate or 0.0
            )
            metrics = EmailMetrics(
                open_rate=metrics.open_rate,
                click_rate=metrics.click_rate,
                read_rate=metrics.read_rate,
                detail_rate=metrics.detail_rate,
                relevance_rate=metrics.relevance_rate,
                reading_time_s=metrics.reading_time_s,
                estimated_cost_usd=metrics.estimated_cost_usd,
                n_comments=metrics.n_comments,
                reputation_change=change,
            )
        return metrics

    def message_metrics(self, campaign_id: str) -> list[MessageMetrics]:
        campaign, channel, panel, sessions, estimates, feedback = self._metric_inputs(campaign_id)
        return compute_message_metrics(campaign, channel, panel, sessions, estimates, feedback)

    def dashboard(self, campaign_id: str, kind: str) -> reports.Dashboard:
        campaign, channel, panel, sessions, estimates, feedback = self._metric_inputs(campaign_id)
        email = self.email_metrics(campaign_id)
        messages = compute_message_metrics(campaign, channel, panel, sessions, estimates, feedback)
        rollups = rollup_recipients(campaign, panel, sessions, estimates)
        return reports.build_dashboard(campaign, kind, email, messages, feedback, panel, rollups)

    # --- share links -----------------------------------------------------------

    def share(self, campaign_id: str, kind: str, notes: str, now_ms: int | None = None) -> reports.ShareReport:
        campaign = self.campaign(campaign_id)
        if campaign.sent_at is None:
            raise StateError("campaign not sent yet")
        share = reports.mint_share(
            campaign_id, kind, notes, now_ms if now_ms is not None else int(time.time() * 1000)
        )
        extra = self.campaign_extra(campaign_id)
        shares = extra.get("shares", [])
        shares.append(share.as_dict())
        self.store.save_campaign(campaign, {"shares": shares})
        return share

    def resolve_share(self, share_token: str) -> reports.ShareReport:
        for channel_id in self.store.list_channels():
            for campaign_id in self.store.list_campaigns(channel_id):
                extra = self.campaign_extra(campaign_id)
                for d in extra.get("shares", []):
                    if d["share_token"] == share_token:
                        return reports.ShareReport(
                            share_token=d["share_token"],
                            kind=d["kind"],
                            campaign_id=d["campaign_id"],
                            notes=d["notes"],
                            created_at=d["created_at"],
                        )
        raise NotFoundError("unknown share token")

    # --- reminders ----------------------------------------------------------------

    def reminders_due(self, now_ms: int) -> list[str]:
        due = []
        for channel_id in self.store.list_channels():
            channel = self.channel(channel_id)
            for campaign_id in self.store.list_campaigns(channel_id):
                campaign, extra = self.store.load_campaign(campaign_id)
                if campaign.sent_at is None or extra.get("reminder_sent"):
                    continue
                if now_ms >= reports.next_reminder_time(campaign.sent_at, channel.timezone):
                    due.append(campaign_id)
        return due

    def send_reminders(self, transport, now_ms: int) -> list[str]:
        """Deliver due reminder emails exactly once per campaign."""
        sent = []
        for campaign_id in self.reminders_due(now_ms):
            campaign = self.campaign(campaign_id)
            channel = self.channel(campaign.channel_id)
            message = delivery.OutboundEmail(
                from_addr="commtool@localhost",
                to_addr=channel.sender_identity,
                subject=f"Reports ready: {campaign.subject}",
                html_body=reports.reminder_email_body(campaign, self.config.base_url),
            )
            transport.deliver(message)
            self.store.save_campaign(campaign, {"reminder_sent": True})
            sent.append(campaign_id)
        return sent

    # --- export ---------------------------------------------------------------------

    def export_csv(self, campaign_id: str, path: str | Path) -> int:
        campaign = self.campaign(campaign_id)
        if campaign.sent_at is None:
            raise StateError("campaign not sent yet")
        email = self.email_metrics(campaign_id)
        messages = self.message_metrics(campaign_id)
        return self.store.write_metrics_csv(path, email, messages)

    def peer_average(self) -> dict:
        """Mean email metrics over every channel's latest sent campaign."""
        latest: list[EmailMetrics] = []
        for channel_id in self.store.list_channels():
            best: tuple[int, str] | None = None
            for campaign_id in self.store.list_campaigns(channel_id):
                campaign, _ = self.store.load_campaign(campaign_id)
                if campaign.sent_at is None:
                    continue
                key = (campaign.sent_at, campaign_id)
                if best is None or key > best:
                    best = key
            if best is not None:
                latest.append(self.email_metrics(best[1]))
        return reports.peer_average(latest)

    def visible_comments_for(self, viewer_kind: str, campaign_id: str, section_id: str | None = None, viewer_recipient_id: str | None = None):
        return visible_comments(
            viewer_kind, self.feedback(campaign_id), section_id, viewer_recipient_id
        )
