"""Recipient page rendering, outbound email construction, and campaign sends.

Implicit recipients get the original email wrapped in per-section markers
plus the tracker script; explicit recipients additionally get a relevance
toggle and comment box under every surveyed section. Transports are
pluggable: SMTP for real sends, a file-drop directory for tests and dry runs.
"""

from __future__ import annotations

import html as html_mod
import os
import smtplib
from dataclasses import dataclass, field
from email.mime.text import MIMEText
from pathlib import Path

from .domain import Campaign, Channel, EXPLICIT, Recipient, TrackingToken, mint_token
from .errors import AuthError, StateError, ValidationError
from .feedback import FeedbackState

SECTION_MARK_START = "<!--ct:s:{sid}-->"
SECTION_MARK_END = "<!--ct:e:{sid}-->"


def _esc(text: str) -> str:
    return html_mod.escape(text, quote=True)


def _widgets_html(campaign: Campaign, recipient: Recipient, section_id: str, feedback: FeedbackState | None) -> str:
    """Relevance toggle, pinned sender questions, own + sender comments, and a
    comment box for one surveyed section (explicit recipients only)."""
    state_on = False
    pinned: list = []
    visible: list = []
    if feedback is not None:
        state_on = feedback.relevance.get((recipient.recipient_id, section_id), False)
        pinned = feedback.pinned_questions(section_id)
        visible = [
            c
            for c in feedback.comments
            if c.section_id == section_id
            and not c.pinned
            and (c.author_kind == "sender" or c.recipient_id == recipient.recipient_id)
        ]
    parts = [f'<div class="ct-widgets" data-section-id="{_esc(section_id)}">']
    pressed = "true" if state_on else "false"
    parts.append(
        f'<button type="button" class="ct-relevance" data-section-id="{_esc(section_id)}" '
        f'aria-pressed="{pressed}">relevant to me</button>'
    )
    for q in pinned:
        parts.append(
            f'<div class="ct-comment ct-pinned"><span class="ct-author">from sender</span> '
            f"{_esc(q.text)}</div>"
        )
    for c in visible:
        label = "from sender" if c.author_kind == "sender" else "you"
        parts.append(
            f'<div class="ct-comment"><span class="ct-author">{_esc(label)}</span> {_esc(c.text)}</div>'
        )
    parts.append(
        f'<form class="ct-comment-box" data-section-id="{_esc(section_id)}">'
        '<textarea name="text" placeholder="Leave a comment"></textarea>'
        "<button type=\"submit\">Send</button></form>"
    )
    parts.append("</div>")
    return "".join(parts)


def render_recipient_page(
    campaign: Campaign,
    recipient: Recipient,
    token: TrackingToken,
    feedback: FeedbackState | None = None,
    tracker_src: str = "/static/tracker.js",
) -> str:
    """The tracked page one recipient sees for one campaign.

    For implicit recipients, stripping the tracker markup (wrappers, guard
    comments, script) leaves the original section html byte for byte.
    """
    if token.campaign_id != campaign.campaign_id or token.recipient_id != recipient.recipient_id:
        raise AuthError("token does not match campaign and recipient")
    explicit = recipient.group == EXPLICIT
    blocks = []
    for section in campaign.sections:
        sid = section.section_id
        blocks.append(
            f'<div class="ct-section" id="sec-{_esc(sid)}" data-section-id="{_esc(sid)}">'
            + SECTION_MARK_START.format(sid=sid)
            + section.body_html
            + SECTION_MARK_END.format(sid=sid)
            + "</div>"
        )
        if explicit and section.survey_enabled:
            blocks.append(_widgets_html(campaign, recipient, sid, feedback))
    group = EXPLICIT if explicit else "implicit"
    return (
        "<!doctype html>\n<html><head><meta charset=\"utf-8\">"
        f"<title>{_esc(campaign.subject)}</title></head>\n"
        f'<body data-campaign-id="{_esc(campaign.campaign_id)}" data-group="{group}">\n'
        '<div class="ct-page">' + "".join(blocks) + "</div>\n"
        f'<script src="{_esc(tracker_src)}" data-token="{_esc(token.token)}" '
        f'data-group="{group}" defer></script>\n'
        "</body></html>\n"
    )


@dataclass(frozen=True)
class OutboundEmail:
    from_addr: str
    to_addr: str
    subject: str
    html_body: str


def build_outbound_email(
    campaign: Campaign,
    channel: Channel,
    recipient: Recipient,
    base_url: str,
    key: bytes,
) -> OutboundEmail:
    """Personalized email; the body carries exactly one tracked link."""
    token = mint_token(campaign.campaign_id, recipient.recipient_id, key)
    url = f"{base_url.rstrip('/')}/t/{token.token}"
    body = (
        "<html><body>"
        f"<p>{_esc(channel.name)} has a new issue for you:</p>"
        f'<p><a href="{_esc(url)}">{_esc(campaign.subject)}</a></p>'
        "</body></html>"
    )
    return OutboundEmail(
        from_addr=channel.sender_identity,
        to_addr=recipient.email_address,
        subject=campaign.subject,
        html_body=body,
    )


class FileDropTransport:
    """Writes one .eml-style file per recipient: headers, blank line, body."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def deliver(self, message: OutboundEmail) -> None:
        name = f"{message.to_addr.replace('@', '_at_').replace('/', '_')}.eml"
        path = self.directory / name
        text = (
            f"From: {message.from_addr}\n"
            f"To: {message.to_addr}\n"
            f"Subject: {message.subject}\n"
            "Content-Type: text/html; charset=utf-8\n"
            "\n"
            f"{message.html_body}\n"
        )
        path.write_text(text, encoding="utf-8")


class SMTPTransport:
    def __init__(self, host: str = "localhost", port: int = 25) -> None:
        self.host = host
        self.port = port

    def deliver(self, message: OutboundEmail) -> None:
        mime = MIMEText(message.html_body, "html", "utf-8")
        mime["From"] = message.from_addr
        mime["To"] = message.to_addr
        mime["Subject"] = message.subject
        with smtplib.SMTP(self.host, self.port) as client:
            client.sendmail(message.from_addr, [message.to_addr], mime.as_string())


class InMemoryTransport:
    """Test transport; optionally fails for chosen addresses."""

    def __init__(self, fail_addresses: set[str] | None = None) -> None:
        self.delivered: list[OutboundEmail] = []
        self.fail_addresses = fail_addresses or set()

    def deliver(self, message: OutboundEmail) -> None:
        if message.to_addr in self.fail_addresses:
            raise IOError(f"transport refused {message.to_addr}")
        self.delivered.append(message)


@dataclass
class SendReport:
    campaign_id: str
    sent: list[str] = field(default_factory=list)  # recipient ids
    failed: dict[str, str] = field(default_factory=dict)
    excluded: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "campaign_id": self.campaign_id,
            "sent": self.sent,
            "failed": self.failed,
            "excluded": self.excluded,
        }


def send_campaign(
    campaign: Campaign,
    channel: Channel,
    recipients: list[Recipient],
    transport,
    base_url: str,
    key: bytes,
) -> SendReport:
    """Hand one personalized message per non-excluded recipient to the
    transport; per-recipient failures are recorded, not fatal. Campaigns send
    exactly once — the caller stamps sent_at and must refuse a second send."""
    if campaign.sent_at is not None:
        raise StateError(f"campaign {campaign.campaign_id} already sent")
    if not campaign.sections:
        raise ValidationError("campaign has no sections")
    excluded = {e.strip().lower() for e in channel.excluded_emails}
    report = SendReport(campaign_id=campaign.campaign_id)
    for recipient in recipients:
        if recipient.email_address.strip().lower() in excluded:
            report.excluded.append(recipient.recipient_id)
            continue
        message = build_outbound_email(campaign, channel, recipient, base_url, key)
        try:
            transport.deliver(message)
        except Exception as exc:  # noqa: BLE001 - per-recipient isolation
            report.failed[recipient.recipient_id] = str(exc)
        else:
            report.sent.append(recipient.recipient_id)
    return report
