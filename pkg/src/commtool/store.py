"""Flat-file persistence: append-only JSONL event logs plus meta.json records.

Layout: {data_dir}/{channel_id}/meta.json holds the channel and its panel;
{data_dir}/{channel_id}/{campaign_id}/ holds the campaign's meta.json and
events.jsonl. Everything downstream (sessions, metrics, dashboards) derives
from these files, so a replay from disk reproduces the live state exactly.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import threading
from pathlib import Path

from .domain import Campaign, Channel, Recipient, Section
from .errors import NotFoundError
from .metrics import EmailMetrics, MessageMetrics

log = logging.getLogger(__name__)

METRICS_CSV_COLUMNS = [
    "scope",
    "section_id",
    "open_rate",
    "click_rate",
    "read_rate",
    "detail_rate",
    "relevance_rate",
    "reading_time_s",
    "cost_usd",
    "n_comments",
]


def channel_to_dict(c: Channel) -> dict:
    return {
        "channel_id": c.channel_id,
        "name": c.name,
        "sender_identity": c.sender_identity,
        "brand": c.brand,
        "audience_size": c.audience_size,
        "timezone": c.timezone,
        "hourly_rate_usd": c.hourly_rate_usd,
        "owner": c.owner,
        "excluded_emails": list(c.excluded_emails),
    }


def channel_from_dict(d: dict) -> Channel:
    return Channel(
        channel_id=d["channel_id"],
        name=d["name"],
        sender_identity=d["sender_identity"],
        brand=d.get("brand", ""),
        audience_size=d.get("audience_size", 0),
        timezone=d.get("timezone", "UTC"),
        hourly_rate_usd=d.get("hourly_rate_usd", 40.0),
        owner=d.get("owner", "default"),
        excluded_emails=tuple(d.get("excluded_emails", ())),
    )


def recipient_to_dict(r: Recipient) -> dict:
    return {
        "recipient_id": r.recipient_id,
        "email_address": r.email_address,
        "unit": r.unit,
        "job_category": r.job_category,
        "group": r.group,
    }


def recipient_from_dict(d: dict) -> Recipient:
    return Recipient(
        recipient_id=d["recipient_id"],
        email_address=d["email_address"],
        unit=d.get("unit", ""),
        job_category=d.get("job_category", ""),
        group=d.get("group", "implicit"),
    )


def section_to_dict(s: Section) -> dict:
    return {
        "section_id": s.section_id,
        "kind": s.kind,
        "heading_text": s.heading_text,
        "body_html": s.body_html,
        "plain_text": s.plain_text,
        "word_count": s.word_count,
        "survey_enabled": s.survey_enabled,
        "order": s.order,
    }


def section_from_dict(d: dict) -> Section:
    return Section(
        section_id=d["section_id"],
        kind=d["kind"],
        heading_text=d["heading_text"],
        body_html=d["body_html"],
        plain_text=d["plain_text"],
        word_count=d["word_count"],
        survey_enabled=d["survey_enabled"],
        order=d["order"],
    )


def campaign_to_dict(c: Campaign) -> dict:
    return {
        "campaign_id": c.campaign_id,
        "channel_id": c.channel_id,
        "subject": c.subject,
        "raw_html": c.raw_html,
        "sections": [section_to_dict(s) for s in c.sections],
        "sent_at": c.sent_at,
        "seq_index": c.seq_index,
    }


def campaign_from_dict(d: dict) -> Campaign:
    return Campaign(
        campaign_id=d["campaign_id"],
        channel_id=d["channel_id"],
        subject=d["subject"],
        raw_html=d["raw_html"],
        sections=tuple(section_from_dict(s) for s in d["sections"]),
        sent_at=d.get("sent_at"),
        seq_index=d.get("seq_index"),
    )


class Store:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, campaign_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(campaign_id, threading.Lock())

    # --- channels ---------------------------------------------------------

    def _channel_dir(self, channel_id: str) -> Path:
        return self.root / channel_id

    def save_channel(self, channel: Channel, recipients: list[Recipient]) -> None:
        d = self._channel_dir(channel.channel_id)
        d.mkdir(parents=True, exist_ok=True)
        meta = {
            "channel": channel_to_dict(channel),
            "recipients": [recipient_to_dict(r) for r in recipients],
        }
        (d / "meta.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")

    def load_channel(self, channel_id: str) -> tuple[Channel, list[Recipient]]:
        path = self._channel_dir(channel_id) / "meta.json"
        if not path.exists():
            raise NotFoundError(f"channel {channel_id!r} not found")
        meta = json.loads(path.read_text(encoding="utf-8"))
        return (
            channel_from_dict(meta["channel"]),
            [recipient_from_dict(r) for r in meta["recipients"]],
        )

    def list_channels(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if (p / "meta.json").exists() and p.is_dir()
        )

    # --- campaigns --------------------------------------------------------

    def campaign_dir(self, campaign_id: str) -> Path:
        for channel_id in self.list_channels():
            d = self._channel_dir(channel_id) / campaign_id
            if (d / "meta.json").exists():
                return d
        raise NotFoundError(f"campaign {campaign_id!r} not found")

    def save_campaign(self, campaign: Campaign, extra: dict | None = None) -> None:
        d = self._channel_dir(campaign.channel_id) / campaign.campaign_id
        d.mkdir(parents=True, exist_ok=True)
        path = d / "meta.json"
        current: dict = {}
        if path.exists():
            current = json.loads(path.read_text(encoding="utf-8"))
        current["campaign"] = campaign_to_dict(campaign)
        if extra:
            current.update(extra)
        path.write_text(json.dumps(current, indent=2), encoding="utf-8")

    def load_campaign(self, campaign_id: str) -> tuple[Campaign, dict]:
        path = self.campaign_dir(campaign_id) / "meta.json"
        meta = json.loads(path.read_text(encoding="utf-8"))
        campaign = campaign_from_dict(meta["campaign"])
        extra = {k: v for k, v in meta.items() if k != "campaign"}
        return campaign, extra

    def list_campaigns(self, channel_id: str) -> list[str]:
        d = self._channel_dir(channel_id)
        if not d.exists():
            raise NotFoundError(f"channel {channel_id!r} not found")
        return sorted(
            p.name for p in d.iterdir() if p.is_dir() and (p / "meta.json").exists()
        )

    # --- event log --------------------------------------------------------

    def _events_path(self, campaign_id: str) -> Path:
        return self.campaign_dir(campaign_id) / "events.jsonl"

    def append_events(self, campaign_id: str, records: list[dict]) -> int:
        """Append a batch as JSONL, fsync once; returns the first new offset."""
        path = self._events_path(campaign_id)
        with self._lock(campaign_id):
            offset = 0
            if path.exists():
                with path.open("rb") as fh:
                    offset = sum(1 for _ in fh)
            with path.open("a", encoding="utf-8") as fh:
                for record in records:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            return offset

    def append_event(self, campaign_id: str, record: dict) -> int:
        return self.append_events(campaign_id, [record])

    def load_event_records(self, campaign_id: str) -> list[dict]:
        """All complete events in append order; a torn trailing line is
        skipped with a warning."""
        path = self._events_path(campaign_id)
        if not path.exists():
            return []
        records: list[dict] = []
        lines = path.read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        for i, line in enumerate(lines):
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    log.warning(
                        "skipping torn trailing event line in %s", path
                    )
                    continue
                raise
        return records

    # --- metrics export ---------------------------------------------------

    def write_metrics_csv(
        self,
        path: str | Path,
        email: EmailMetrics,
        messages: list[MessageMetrics],
    ) -> int:
        """One row per content section plus an __email__ row; returns the row
        count (header excluded). Absent metrics become empty cells."""

        def cell(value) -> str:
            if value is None:
                return ""
            if isinstance(value, float):
                return f"{value:.9g}"
            return str(value)

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(METRICS_CSV_COLUMNS)
        for m in messages:
            writer.writerow(
                [
                    "message",
                    m.section_id,
                    "",
                    cell(m.click_rate),
                    cell(m.read_rate),
                    cell(m.detail_rate),
                    cell(m.relevance_rate),
                    cell(m.reading_time_s),
                    cell(m.estimated_cost_usd),
                    cell(m.n_comments),
                ]
            )
        writer.writerow(
            [
                "email",
                "__email__",
                cell(email.open_rate),
                cell(email.click_rate),
                cell(email.read_rate),
                cell(email.detail_rate),
                cell(email.relevance_rate),
                cell(email.reading_time_s),
                cell(email.estimated_cost_usd),
                cell(email.n_comments),
            ]
        )
        Path(path).write_text(buf.getvalue(), encoding="utf-8")
        return len(messages) + 1
