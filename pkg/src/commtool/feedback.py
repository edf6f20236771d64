"""Relevance marks, comments, pinned sender questions, and who may see what.

Everything is a pure fold over the campaign's event log: relevance is
last-write-wins per (recipient, section); recipient comments get stable
anonymous aliases in first-comment order. Recipients never see each other's
comments, only the sender's and their own.
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import Campaign, EXPLICIT, Recipient
from .errors import ForbiddenError, ValidationError
from .ingest import COMMENT, Event, RELEVANCE_OFF, RELEVANCE_ON

SENDER_ID = "__sender__"  # reserved log author id for sender comments
SENDER_LABEL = "from sender"


@dataclass(frozen=True)
class Comment:
    comment_id: str
    campaign_id: str
    section_id: str
    author_kind: str  # "recipient" | "sender"
    author_alias: str  # "participant-N" or the sender label
    text: str
    pinned: bool
    ts_ms: int
    recipient_id: str | None = None  # never exposed in recipient-facing views

    def __post_init__(self) -> None:
        if self.pinned and self.author_kind != "sender":
            raise ValidationError("only sender comments can be pinned")


@dataclass
class FeedbackState:
    campaign_id: str
    relevance: dict[tuple[str, str], bool]  # (recipient_id, section_id) -> on
    comments: list[Comment]
    aliases: dict[str, str]  # recipient_id -> participant-N

    def relevant_sections(self, recipient_id: str) -> set[str]:
        return {
            sec for (rid, sec), on in self.relevance.items() if rid == recipient_id and on
        }

    def recipients_marking(self, section_id: str) -> set[str]:
        return {rid for (rid, sec), on in self.relevance.items() if sec == section_id and on}

    def pinned_questions(self, section_id: str) -> list[Comment]:
        return [c for c in self.comments if c.pinned and c.section_id == section_id]

    def recipient_comment_count(self, section_id: str | None = None) -> int:
        return sum(
            1
            for c in self.comments
            if c.author_kind == "recipient"
            and (section_id is None or c.section_id == section_id)
        )


def build_feedback(campaign_id: str, events: list[Event]) -> FeedbackState:
    """Fold relevance and comment events into the current feedback state."""
    state = FeedbackState(campaign_id=campaign_id, relevance={}, comments=[], aliases={})
    n_comments = 0
    for ev in sorted(events, key=lambda e: (e.ts_ms, e.cid)):
        if ev.kind in (RELEVANCE_ON, RELEVANCE_OFF):
            key = (ev.recipient_id, ev.payload["section_id"])
            state.relevance[key] = ev.kind == RELEVANCE_ON
        elif ev.kind == COMMENT:
            n_comments += 1
            if ev.recipient_id == SENDER_ID:
                author_kind, alias, rid = "sender", SENDER_LABEL, None
            else:
                author_kind = "recipient"
                alias = state.aliases.setdefault(
                    ev.recipient_id, f"participant-{len(state.aliases) + 1}"
                )
                rid = ev.recipient_id
            state.comments.append(
                Comment(
                    comment_id=f"c{n_comments}",
                    campaign_id=campaign_id,
                    section_id=ev.payload["section_id"],
                    author_kind=author_kind,
                    author_alias=alias,
                    text=ev.payload["text"],
                    pinned=bool(ev.payload.get("pinned", False)),
                    ts_ms=ev.ts_ms,
                    recipient_id=rid,
                )
            )
    return state


def check_relevance_allowed(recipient: Recipient, campaign: Campaign, section_id: str) -> None:
    """Relevance marking is explicit-group only and needs a survey section."""
    if recipient.group != EXPLICIT:
        raise ForbiddenError("only explicit recipients mark relevance")
    section = campaign.section(section_id)
    if not section.survey_enabled:
        raise ForbiddenError(f"section {section_id!r} has no survey")


def check_comment_allowed(
    author_recipient: Recipient | None, campaign: Campaign, section_id: str, text: str, pinned: bool
) -> None:
    """Recipient comments require the explicit group; pinning is sender-only."""
    if not text.strip():
        raise ValidationError("comment text must be nonempty")
    campaign.section(section_id)
    if author_recipient is not None:
        if author_recipient.group != EXPLICIT:
            raise ForbiddenError("only explicit recipients may comment")
        if pinned:
            raise ForbiddenError("recipients cannot pin comments")


def visible_comments(
    viewer_kind: str,
    state: FeedbackState,
    section_id: str | None = None,
    viewer_recipient_id: str | None = None,
) -> list[Comment]:
    """Comments the viewer may see.

    Communicators and share-link clients see everything; a recipient sees
    sender comments plus their own, with other recipients' text and aliases
    withheld entirely.
    """
    pool = [c for c in state.comments if section_id is None or c.section_id == section_id]
    if viewer_kind in ("communicator", "share"):
        return pool
    if viewer_kind == "recipient":
        return [
            c
            for c in pool
            if c.author_kind == "sender" or c.recipient_id == viewer_recipient_id
        ]
    raise ForbiddenError(f"unknown viewer kind {viewer_kind!r}")
