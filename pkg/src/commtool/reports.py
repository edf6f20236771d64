"""Dashboards, shareable annotated reports, peer averages, and reminders.

Dashboards are pure functions of the event log and campaign config, so two
builds over the same data serialize byte-identically. Share tokens grant
read access to exactly one dashboard kind of one campaign, plus the right to
comment as the sender.
"""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from zoneinfo import ZoneInfo

from .domain import Campaign, EXPLICIT, IMPLICIT, Recipient
from .errors import StateError
from .feedback import FeedbackState
from .metrics import EmailMetrics, MessageMetrics, RecipientRollup

DASHBOARD_KINDS = ("email", "message", "report")

# Definition tips shown next to each metric; keyed per dashboard kind.
EMAIL_METRIC_TIPS = {
    "open_rate": "Share of the implicit recipients who opened this email.",
    "click_rate": "Share of the implicit recipients who clicked at least one link in this email.",
    "read_rate": "Share of the implicit recipients who at least skimmed one message of this email or read it in detail.",
    "detail_rate": "Share of the implicit recipients who read at least one message of this email in detail.",
    "reading_time_s": "Average seconds the implicit recipients who opened this email spent reading it.",
    "estimated_cost_usd": "Estimated money cost of this email: average reading time x open rate x the hourly rate x the real audience size, plus 6 seconds per recipient for the read/unread decision.",
    "relevance_rate": "Share of the explicit recipients who indicated at least one message of this email as relevant to them.",
    "n_comments": "Number of comments the explicit recipients left on this email.",
    "reputation_change": "This email's influence on the channel's reputation: the predicted future open rate minus this email's open rate.",
}

MESSAGE_METRIC_TIPS = {
    "click_rate": "Share of the implicit recipients who clicked at least one link in this message.",
    "read_rate": "Share of the implicit recipients who skimmed this message or read it in detail.",
    "detail_rate": "Share of the implicit recipients who read this message in detail.",
    "reading_time_s": "Average seconds the implicit recipients who opened the email spent reading this message.",
    "estimated_cost_usd": "Estimated money cost of this message: average reading time x open rate x the hourly rate x the real audience size.",
    "relevance_rate": "Share of the explicit recipients who indicated this message is relevant.",
    "n_comments": "Number of comments the explicit recipients left on this message.",
    "who_interested": "Share of each unit and job category who are interested in this message (clicked, read, or marked it relevant).",
}

REPORT_METRIC_TIPS = {
    "n_clicked": "Implicit recipients who clicked this message's links, over the implicit panel.",
    "n_relevant": "Explicit recipients who viewed this message as relevant, over the explicit panel.",
    "reading_time_s": MESSAGE_METRIC_TIPS["reading_time_s"],
    "estimated_cost_usd": MESSAGE_METRIC_TIPS["estimated_cost_usd"],
    "who_interested": MESSAGE_METRIC_TIPS["who_interested"],
}


@dataclass(frozen=True)
class Dashboard:
    kind: str
    campaign_id: str
    payload: dict
    metric_tips: dict

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "campaign_id": self.campaign_id,
            "payload": self.payload,
            "metric_tips": self.metric_tips,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))


def _comment_view(c) -> dict:
    return {
        "comment_id": c.comment_id,
        "section_id": c.section_id,
        "author": c.author_alias,
        "pinned": c.pinned,
        "text": c.text,
        "ts_ms": c.ts_ms,
    }


def build_dashboard(
    campaign: Campaign,
    kind: str,
    email_metrics: EmailMetrics,
    message_metrics: list[MessageMetrics],
    feedback: FeedbackState,
    recipients: list[Recipient],
    rollups: list[RecipientRollup],
) -> Dashboard:
    """Assemble one of the three dashboard kinds from computed metrics."""
    if campaign.sent_at is None:
        raise StateError("campaign not sent yet")
    if kind == "email":
        return Dashboard(
            kind=kind,
            campaign_id=campaign.campaign_id,
            payload={"email": email_metrics.as_dict()},
            metric_tips=dict(EMAIL_METRIC_TIPS),
        )
    if kind == "message":
        return Dashboard(
            kind=kind,
            campaign_id=campaign.campaign_id,
            payload={"messages": [m.as_dict() for m in message_metrics]},
            metric_tips=dict(MESSAGE_METRIC_TIPS),
        )
    if kind == "report":
        n_implicit = sum(1 for r in recipients if r.group == IMPLICIT)
        n_explicit = sum(1 for r in recipients if r.group == EXPLICIT)
        implicit_rollups = [r for r in rollups if r.group == IMPLICIT]
        sections = []
        by_metric = {m.section_id: m for m in message_metrics}
        for section in campaign.content_sections():
            sid = section.section_id
            m = by_metric[sid]
            sections.append(
                {
                    "section_id": sid,
                    "heading_text": section.heading_text,
                    "word_count": section.word_count,
                    "n_clicked": sum(
                        1 for r in implicit_rollups if sid in r.clicked_sections
                    ),
                    "n_implicit": n_implicit,
                    "n_relevant": len(feedback.recipients_marking(sid)),
                    "n_explicit": n_explicit,
                    "reading_time_s": m.reading_time_s,
                    "estimated_cost_usd": m.estimated_cost_usd,
                    "who_interested": [g.as_dict() for g in m.who_interested],
                    "comments": [
                        _comment_view(c)
                        for c in feedback.comments
                        if c.section_id == sid
                    ],
                }
            )
        return Dashboard(
            kind=kind,
            campaign_id=campaign.campaign_id,
            payload={"sections": sections},
            metric_tips=dict(REPORT_METRIC_TIPS),
        )
    raise StateError(f"unknown dashboard kind {kind!r}")


@dataclass(frozen=True)
class ShareReport:
    share_token: str
    kind: str
    campaign_id: str
    notes: str
    created_at: int  # epoch ms

    def as_dict(self) -> dict:
        return {
            "share_token": self.share_token,
            "kind": self.kind,
            "campaign_id": self.campaign_id,
            "notes": self.notes,
            "created_at": self.created_at,
        }


def mint_share(campaign_id: str, kind: str, notes: str, now_ms: int) -> ShareReport:
    if kind not in DASHBOARD_KINDS:
        raise StateError(f"unknown dashboard kind {kind!r}")
    return ShareReport(
        share_token=secrets.token_urlsafe(16),
        kind=kind,
        campaign_id=campaign_id,
        notes=notes,
        created_at=now_ms,
    )


def peer_average(latest_email_metrics: list[EmailMetrics]) -> dict:
    """Unweighted mean of each email-level metric over channels' latest
    campaigns; absent fields are skipped per metric."""
    out: dict[str, float | None] = {}
    keys = [
        "open_rate",
        "click_rate",
        "read_rate",
        "detail_rate",
        "relevance_rate",
        "reading_time_s",
        "estimated_cost_usd",
        "n_comments",
        "reputation_change",
    ]
    for key in keys:
        vals = [
            getattr(m, key)
            for m in latest_email_metrics
            if getattr(m, key) is not None
        ]
        out[key] = sum(vals) / len(vals) if vals else None
    return out


def next_reminder_time(sent_at_ms: int, zone: str) -> int:
    """First local 9 a.m. at or after 24 hours past the send, as epoch ms."""
    tz = ZoneInfo(zone)
    target = datetime.fromtimestamp(sent_at_ms / 1000, tz=timezone.utc) + timedelta(hours=24)
    local = target.astimezone(tz)
    candidate = local.replace(hour=9, minute=0, second=0, microsecond=0)
    if candidate < local:
        next_day = (local + timedelta(days=1)).date()
        candidate = datetime(
            next_day.year, next_day.month, next_day.day, 9, 0, 0, tzinfo=tz
        )
    return int(candidate.timestamp() * 1000)


def reminder_email_body(campaign: Campaign, base_url: str) -> str:
    """Reminder text linking all three dashboards of the campaign."""
    base = base_url.rstrip("/")
    links = "".join(
        f'<li><a href="{base}/api/campaigns/{campaign.campaign_id}/dashboard?kind={kind}">'
        f"{kind} dashboard</a></li>"
        for kind in DASHBOARD_KINDS
    )
    return (
        "<html><body>"
        f"<p>Reports for “{campaign.subject}” are ready:</p>"
        f"<ul>{links}</ul>"
        "</body></html>"
    )
