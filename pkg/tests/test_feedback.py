import pytest

from commtool.domain import Campaign, Recipient, Section
from commtool.errors import ForbiddenError, ValidationError
from commtool.feedback import (
    SENDER_ID,
    build_feedback,
    check_comment_allowed,
    check_relevance_allowed,
    visible_comments,
)
from commtool.ingest import Event


def campaign():
    sections = [
        Section("s1", "content", "One", "<h2>One</h2>", "One", 30, True, 0),
        Section("s2", "title", "Bare", "<h2>Bare</h2>", "Bare", 1, False, 1),
    ]
    return Campaign("c1", "ch1", "subject", "", tuple(sections), sent_at=0)


def implicit():
    return Recipient("r1", "r1@x", group="implicit")


def explicit(rid="r2"):
    return Recipient(rid, f"{rid}@x", group="explicit")


def rel(rid, cid, ts, on, sid="s1"):
    kind = "relevance_on" if on else "relevance_off"
    return Event(rid, "c1", cid, ts, kind, {"section_id": sid})


def comment(rid, cid, ts, text, sid="s1", pinned=False):
    payload = {"section_id": sid, "text": text}
    if pinned:
        payload["pinned"] = True
    return Event(rid, "c1", cid, ts, "comment", payload)


class TestRelevanceRules:
    def test_implicit_recipient_forbidden(self):
        with pytest.raises(ForbiddenError):
            check_relevance_allowed(implicit(), campaign(), "s1")

    def test_non_survey_section_forbidden(self):
        with pytest.raises(ForbiddenError):
            check_relevance_allowed(explicit(), campaign(), "s2")

    def test_explicit_on_survey_ok(self):
        check_relevance_allowed(explicit(), campaign(), "s1")

    def test_last_write_wins(self):
        state = build_feedback("c1", [rel("r2", 1, 100, True), rel("r2", 2, 200, False)])
        assert state.relevant_sections("r2") == set()
        state = build_feedback("c1", [rel("r2", 2, 200, False), rel("r2", 3, 300, True)])
        assert state.relevant_sections("r2") == {"s1"}

    def test_double_on_is_one_mark(self):
        state = build_feedback("c1", [rel("r2", 1, 100, True), rel("r2", 2, 200, True)])
        assert state.recipients_marking("s1") == {"r2"}


class TestCommentRules:
    def test_sender_pinned_question(self):
        state = build_feedback("c1", [comment(SENDER_ID, 1, 50, "Would you attend?", pinned=True)])
        q = state.pinned_questions("s1")
        assert len(q) == 1
        assert q[0].author_alias == "from sender"
        assert q[0].pinned

    def test_recipient_alias_sequential_and_stable(self):
        events = [
            comment("r5", 1, 100, "first"),
            comment("r9", 1, 200, "second"),
            comment("r5", 2, 300, "third"),
        ]
        state = build_feedback("c1", events)
        aliases = [c.author_alias for c in state.comments]
        assert aliases == ["participant-1", "participant-2", "participant-1"]

    def test_recipient_cannot_pin(self):
        with pytest.raises(ForbiddenError):
            check_comment_allowed(explicit(), campaign(), "s1", "hi", pinned=True)

    def test_implicit_cannot_comment(self):
        with pytest.raises(ForbiddenError):
            check_comment_allowed(implicit(), campaign(), "s1", "hi", pinned=False)

    def test_empty_text_rejected(self):
        with pytest.raises(ValidationError):
            check_comment_allowed(explicit(), campaign(), "s1", "  ", pinned=False)

    def test_comment_count_excludes_sender(self):
        events = [
            comment("r2", 1, 100, "a"),
            comment(SENDER_ID, 1, 150, "q", pinned=True),
            comment("r3", 1, 200, "b", sid="s2"),
        ]
        state = build_feedback("c1", events)
        assert state.recipient_comment_count() == 2
        assert state.recipient_comment_count("s1") == 1


class TestVisibility:
    def build(self):
        events = [
            comment("rA", 1, 100, "from A"),
            comment("rB", 1, 200, "from B"),
            comment(SENDER_ID, 1, 300, "from the sender"),
        ]
        return build_feedback("c1", events)

    def test_recipient_sees_own_plus_sender(self):
        state = self.build()
        seen = visible_comments("recipient", state, "s1", viewer_recipient_id="rA")
        texts = {c.text for c in seen}
        assert texts == {"from A", "from the sender"}

    def test_communicator_sees_all(self):
        assert len(visible_comments("communicator", self.build(), "s1")) == 3

    def test_share_client_sees_all(self):
        assert len(visible_comments("share", self.build(), "s1")) == 3

    def test_unknown_viewer_rejected(self):
        with pytest.raises(ForbiddenError):
            visible_comments("anonymous", self.build(), "s1")

    def test_no_foreign_alias_or_text_leaks(self):
        state = self.build()
        for viewer in ("rA", "rB"):
            seen = visible_comments("recipient", state, "s1", viewer_recipient_id=viewer)
            other = "rB" if viewer == "rA" else "rA"
            other_alias = state.aliases[other]
            other_text = f"from {other[-1]}"
            for c in seen:
                assert other_text != c.text
                assert other_alias != c.author_alias or c.recipient_id == viewer
