"""Core identities: channels, campaigns, recipients, and signed tracking tokens.

Values are frozen dataclasses so they can be shared freely across request
handlers; mutation happens by replacement through the store.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import hmac
import random
from dataclasses import dataclass, field, replace

from .errors import AuthError, ConfigError, ValidationError

IMPLICIT = "implicit"
EXPLICIT = "explicit"

MIN_KEY_BYTES = 32
DEFAULT_HOURLY_RATE_USD = 40.0


@dataclass(frozen=True)
class Channel:
    """A recurring sender identity (FROM field) and brand."""

    channel_id: str
    name: str
    sender_identity: str
    brand: str = ""
    audience_size: int = 0
    timezone: str = "UTC"
    hourly_rate_usd: float = DEFAULT_HOURLY_RATE_USD
    owner: str = "default"
    excluded_emails: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.hourly_rate_usd <= 0:
            raise ValidationError("hourly_rate_usd must be > 0")
        if self.audience_size < 0:
            raise ValidationError("audience_size must be >= 0")


@dataclass(frozen=True)
class Recipient:
    recipient_id: str
    email_address: str
    unit: str = ""
    job_category: str = ""
    group: str = IMPLICIT  # immutable after assignment


@dataclass(frozen=True)
class Section:
    section_id: str
    kind: str  # "title" | "content"
    heading_text: str
    body_html: str
    plain_text: str
    word_count: int
    survey_enabled: bool
    order: int

    def __post_init__(self) -> None:
        if self.survey_enabled and self.kind != "content":
            raise ValidationError("survey_enabled requires a content section")


@dataclass(frozen=True)
class Campaign:
    campaign_id: str
    channel_id: str
    subject: str
    raw_html: str
    sections: tuple[Section, ...] = ()
    sent_at: int | None = None  # epoch ms
    seq_index: int | None = None  # ordinal within the channel, set at send

    def content_sections(self) -> tuple[Section, ...]:
        return tuple(s for s in self.sections if s.kind == "content")

    def section(self, section_id: str) -> Section:
        for s in self.sections:
            if s.section_id == section_id:
                return s
        raise ValidationError(f"unknown section {section_id!r}")


def assign_groups(recipients: list[Recipient], seed: int) -> list[Recipient]:
    """Split recipients into implicit/explicit groups, sizes differing by <= 1.

    Seeded Fisher-Yates shuffle, then alternating assignment, so the split is
    reproducible and stable for a given (recipients, seed) pair.
    """
    order = list(range(len(recipients)))
    random.Random(seed).shuffle(order)
    groups: dict[int, str] = {}
    for pos, idx in enumerate(order):
        groups[idx] = IMPLICIT if pos % 2 == 0 else EXPLICIT
    return [replace(r, group=groups[i]) for i, r in enumerate(recipients)]


def parse_recipients_csv(text: str, id_prefix: str = "r") -> list[Recipient]:
    """Parse the `email,unit,job_category` import format (UTF-8, header row)."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        return []
    header = [h.strip().lower() for h in lines[0].split(",")]
    if header[:3] != ["email", "unit", "job_category"]:
        raise ValidationError("recipient CSV must start with header email,unit,job_category")
    out: list[Recipient] = []
    for n, line in enumerate(lines[1:], start=1):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 3 or not parts[0]:
            raise ValidationError(f"bad recipient row {n}: {line!r}")
        out.append(
            Recipient(
                recipient_id=f"{id_prefix}{n}",
                email_address=parts[0],
                unit=parts[1],
                job_category=parts[2],
            )
        )
    return out


# --- tracking tokens ------------------------------------------------------
#
# Tokens are stateless: payload "campaign_id.recipient_id" plus an HMAC-SHA256
# signature, both base64url without padding. Recipients can open them on any
# device with no login; forging one requires breaking the MAC.


@dataclass(frozen=True)
class TrackingToken:
    token: str
    campaign_id: str
    recipient_id: str


def _b64e(raw: bytes) -> str:
    return base64.urlsafe_b64encode(raw).decode("ascii").rstrip("=")


def _b64d(text: str) -> bytes:
    """Strict decode: rejects non-canonical encodings, otherwise a mutated
    trailing character can alias to the same bytes and carry a valid MAC."""
    pad = "=" * (-len(text) % 4)
    raw = base64.urlsafe_b64decode(text + pad)
    if _b64e(raw) != text:
        raise binascii.Error("non-canonical base64")
    return raw


def _sign(payload: bytes, key: bytes) -> bytes:
    return hmac.new(key, payload, hashlib.sha256).digest()


def mint_token(campaign_id: str, recipient_id: str, key: bytes) -> TrackingToken:
    if len(key) < MIN_KEY_BYTES:
        raise ConfigError(f"signing key must be >= {MIN_KEY_BYTES} bytes")
    if "." in campaign_id or "." in recipient_id:
        raise ValidationError("ids must not contain '.'")
    payload = f"{campaign_id}.{recipient_id}".encode("utf-8")
    token = _b64e(payload) + "." + _b64e(_sign(payload, key))
    return TrackingToken(token=token, campaign_id=campaign_id, recipient_id=recipient_id)


def verify_token(token: str, key: bytes) -> tuple[str, str]:
    """Return (campaign_id, recipient_id) or raise AuthError."""
    if len(key) < MIN_KEY_BYTES:
        raise ConfigError(f"signing key must be >= {MIN_KEY_BYTES} bytes")
    try:
        body, sig = token.split(".", 1)
        payload = _b64d(body)
        got = _b64d(sig)
    except (ValueError, binascii.Error):
        raise AuthError("malformed token") from None
    if not hmac.compare_digest(got, _sign(payload, key)):
        raise AuthError("bad token signature")
    try:
        campaign_id, recipient_id = payload.decode("utf-8").split(".", 1)
    except (UnicodeDecodeError, ValueError):
        raise AuthError("malformed token payload") from None
    return campaign_id, recipient_id
