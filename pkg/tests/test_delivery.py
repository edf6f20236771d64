import re

import pytest

from commtool.delivery import (
    FileDropTransport,
    InMemoryTransport,
    build_outbound_email,
    render_recipient_page,
    send_campaign,
)
from commtool.domain import Campaign, Channel, Recipient, mint_token, verify_token
from commtool.errors import AuthError, StateError
from commtool.feedback import SENDER_ID, build_feedback
from commtool.ingest import Event
from commtool.splitter import split_html

KEY = b"k" * 32


def fixture_campaign(n_stories=3):
    html = "".join(
        f"<h2>Story {i}</h2><p>" + " ".join(f"w{i}x{j}" for j in range(40)) + "</p>"
        for i in range(n_stories)
    )
    return Campaign("c1", "ch1", "Issue 9", html, tuple(split_html(html)))


def channel(excluded=()):
    return Channel("ch1", "Brief", "brief@example.org", excluded_emails=excluded)


def implicit(rid="r1"):
    return Recipient(rid, f"{rid}@x.org", group="implicit")


def explicit(rid="r2"):
    return Recipient(rid, f"{rid}@x.org", group="explicit")


def extract_sections(page):
    """Pull the html between the per-section guard comments."""
    return "".join(
        m.group(2) for m in re.finditer(r"<!--ct:s:(\w+)-->(.*?)<!--ct:e:\1-->", page, re.S)
    )


class TestRenderRecipientPage:
    def test_token_mismatch_rejected(self):
        campaign = fixture_campaign()
        token = mint_token("other", "r1", KEY)
        with pytest.raises(AuthError):
            render_recipient_page(campaign, implicit(), token)

    def test_implicit_page_has_no_widgets(self):
        campaign = fixture_campaign()
        token = mint_token("c1", "r1", KEY)
        page = render_recipient_page(campaign, implicit(), token)
        assert "ct-relevance" not in page
        assert "ct-comment-box" not in page
        assert 'data-group="implicit"' in page

    def test_implicit_page_reproduces_sections_byte_for_byte(self):
        campaign = fixture_campaign()
        token = mint_token("c1", "r1", KEY)
        page = render_recipient_page(campaign, implicit(), token)
        original = "".join(s.body_html for s in campaign.sections)
        assert extract_sections(page) == original

    def test_explicit_page_has_widgets_per_survey_section(self):
        campaign = fixture_campaign(5)
        token = mint_token("c1", "r2", KEY)
        page = render_recipient_page(campaign, explicit(), token)
        n_survey = sum(1 for s in campaign.sections if s.survey_enabled)
        assert page.count("ct-relevance") == n_survey
        assert page.count("ct-comment-box") == n_survey

    def test_pinned_question_labeled_from_sender(self):
        campaign = fixture_campaign()
        sid = campaign.sections[2].section_id
        state = build_feedback(
            "c1",
            [Event(SENDER_ID, "c1", 1, 5, "comment", {"section_id": sid, "text": "Attending?", "pinned": True})],
        )
        token = mint_token("c1", "r2", KEY)
        page = render_recipient_page(campaign, explicit(), token, feedback=state)
        assert "from sender" in page
        assert "Attending?" in page

    def test_other_recipients_comments_never_rendered(self):
        campaign = fixture_campaign()
        sid = campaign.sections[0].section_id
        state = build_feedback(
            "c1",
            [
                Event("r9", "c1", 1, 5, "comment", {"section_id": sid, "text": "someone else's note"}),
                Event("r2", "c1", 1, 6, "comment", {"section_id": sid, "text": "my own note"}),
            ],
        )
        token = mint_token("c1", "r2", KEY)
        page = render_recipient_page(campaign, explicit(), token, feedback=state)
        assert "someone else's" not in page
        assert "my own note" in page
        assert "participant-" not in page


class TestOutboundEmail:
    def test_single_tracked_link_resolves(self):
        campaign = fixture_campaign()
        msg = build_outbound_email(campaign, channel(), implicit(), "http://host", KEY)
        links = re.findall(r"/t/([A-Za-z0-9_\-.=]+)", msg.html_body)
        assert len(links) == 1
        assert verify_token(links[0].rstrip('"'), KEY) == ("c1", "r1")
        assert msg.from_addr == "brief@example.org"
        assert msg.subject == "Issue 9"

    def test_distinct_recipients_distinct_tokens(self):
        campaign = fixture_campaign()
        a = build_outbound_email(campaign, channel(), implicit("rA"), "http://h", KEY)
        b = build_outbound_email(campaign, channel(), implicit("rB"), "http://h", KEY)
        assert a.html_body != b.html_body


class TestSendCampaign:
    def panel(self):
        return [implicit("r1"), implicit("r2"), explicit("r3"), explicit("r4")]

    def test_excluded_recipient_skipped(self):
        transport = InMemoryTransport()
        report = send_campaign(
            fixture_campaign(), channel(excluded=("r2@x.org",)), self.panel(), transport, "http://h", KEY
        )
        assert len(report.sent) == 3
        assert report.excluded == ["r2"]
        assert len(transport.delivered) == 3

    def test_partial_transport_failure_recorded(self):
        transport = InMemoryTransport(fail_addresses={"r3@x.org"})
        report = send_campaign(fixture_campaign(), channel(), self.panel(), transport, "http://h", KEY)
        assert set(report.failed) == {"r3"}
        assert len(report.sent) == 3

    def test_already_sent_rejected(self):
        campaign = fixture_campaign()
        stamped = Campaign(
            campaign.campaign_id,
            campaign.channel_id,
            campaign.subject,
            campaign.raw_html,
            campaign.sections,
            sent_at=123,
        )
        with pytest.raises(StateError):
            send_campaign(stamped, channel(), self.panel(), InMemoryTransport(), "http://h", KEY)

    def test_no_cross_recipient_tokens_in_manifest(self):
        transport = InMemoryTransport()
        panel = self.panel()
        send_campaign(fixture_campaign(), channel(), panel, transport, "http://h", KEY)
        for msg in transport.delivered:
            rid = next(r.recipient_id for r in panel if r.email_address == msg.to_addr)
            for tok in re.findall(r"/t/([A-Za-z0-9_\-.=]+)", msg.html_body):
                assert verify_token(tok.rstrip('"'), KEY) == ("c1", rid)

    def test_file_drop_transport_writes_eml(self, tmp_path):
        transport = FileDropTransport(tmp_path / "outbox")
        send_campaign(fixture_campaign(), channel(), self.panel(), transport, "http://h", KEY)
        files = sorted((tmp_path / "outbox").glob("*.eml"))
        assert len(files) == 4
        text = files[0].read_text()
        headers, _, body = text.partition("\n\n")
        assert "From: brief@example.org" in headers
        assert "Subject: Issue 9" in headers
        assert "/t/" in body
