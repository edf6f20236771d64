import pytest

from commtool.delivery import InMemoryTransport
from commtool.domain import mint_token
from commtool.errors import AuthError, ForbiddenError, NotFoundError, StateError, ValidationError
from commtool.service import Service
from commtool.simulate import SimProfile, simulate

from .conftest import SECRET, newsletter_html, recipients_csv


def sample_event(cid, ts_s, y=0.0):
    return {
        "cid": cid,
        "ts": ts_s * 1000,
        "k": "sample",
        "p": {"y": y, "vw": 1000, "vh": 800, "mx": 1, "my": 1, "vis": True},
    }


def token_for(service, campaign, rid):
    return mint_token(campaign.campaign_id, rid, SECRET).token


class TestRecordEvents:
    def test_accepts_and_appends(self, service, seeded_campaign):
        token = token_for(service, seeded_campaign, "r1")
        n = service.record_events(token, [{"cid": 1, "ts": 0, "k": "open", "p": {}}, sample_event(2, 0)])
        assert n == 2
        assert len(service.events(seeded_campaign.campaign_id)) == 2

    def test_duplicate_cid_dropped(self, service, seeded_campaign):
        token = token_for(service, seeded_campaign, "r1")
        service.record_events(token, [{"cid": 1, "ts": 0, "k": "open", "p": {}}])
        n = service.record_events(token, [{"cid": 1, "ts": 0, "k": "open", "p": {}}, sample_event(2, 0)])
        assert n == 1
        assert len(service.events(seeded_campaign.campaign_id)) == 2

    def test_bad_token_raises(self, service, seeded_campaign):
        with pytest.raises(AuthError):
            service.record_events("garbage", [{"cid": 1, "ts": 0, "k": "open", "p": {}}])

    def test_token_for_missing_campaign(self, service, seeded_campaign):
        orphan = mint_token("ch9-c9", "r1", SECRET).token
        with pytest.raises(NotFoundError):
            service.record_events(orphan, [])

    def test_invalid_payload_rejected_strict(self, service, seeded_campaign):
        token = token_for(service, seeded_campaign, "r1")
        with pytest.raises(ValidationError):
            service.record_event(token, {"cid": 1, "ts": 0, "k": "sample", "p": {"y": 0, "vw": 0, "vh": 0, "mx": 0, "my": 0, "vis": True}})

    def test_invalid_events_skipped_in_batch(self, service, seeded_campaign):
        token = token_for(service, seeded_campaign, "r1")
        n = service.record_events(
            token,
            [
                {"cid": 1, "ts": 0, "k": "open", "p": {}},
                {"cid": 2, "ts": 0, "k": "nonsense", "p": {}},
            ],
        )
        assert n == 1

    def test_group_contract_enforced_for_relevance(self, service, seeded_campaign):
        panel = service.recipients(seeded_campaign.channel_id)
        implicit = next(r for r in panel if r.group == "implicit")
        sid = seeded_campaign.sections[0].section_id
        token = token_for(service, seeded_campaign, implicit.recipient_id)
        with pytest.raises(ForbiddenError):
            service.set_relevance(token, sid, True)
        n = service.record_events(token, [{"cid": 5, "ts": 0, "k": "relevance_on", "p": {"section_id": sid}}])
        assert n == 0


class TestFeedbackFlows:
    def test_relevance_toggle_last_wins(self, service, seeded_campaign):
        panel = service.recipients(seeded_campaign.channel_id)
        explicit = next(r for r in panel if r.group == "explicit")
        sid = seeded_campaign.sections[0].section_id
        token = token_for(service, seeded_campaign, explicit.recipient_id)
        service.set_relevance(token, sid, True, now_ms=1000)
        service.set_relevance(token, sid, False, now_ms=2000)
        state = service.feedback(seeded_campaign.campaign_id)
        assert state.relevant_sections(explicit.recipient_id) == set()

    def test_sender_comment_via_share_rights(self, service, seeded_campaign):
        sid = seeded_campaign.sections[1].section_id
        service.post_sender_comment(seeded_campaign.campaign_id, sid, "Any feedback?", pinned=True)
        state = service.feedback(seeded_campaign.campaign_id)
        assert state.pinned_questions(sid)[0].author_alias == "from sender"

    def test_recipient_comment_anonymous_alias(self, service, seeded_campaign):
        panel = service.recipients(seeded_campaign.channel_id)
        explicit = next(r for r in panel if r.group == "explicit")
        sid = seeded_campaign.sections[0].section_id
        token = token_for(service, seeded_campaign, explicit.recipient_id)
        service.post_recipient_comment(token, sid, "note")
        comments = service.visible_comments_for("communicator", seeded_campaign.campaign_id, sid)
        assert comments[0].author_alias == "participant-1"


class TestSendLifecycle:
    def test_double_send_rejected(self, service, seeded_campaign):
        with pytest.raises(StateError):
            service.send_campaign(seeded_campaign.campaign_id, InMemoryTransport())

    def test_edit_after_send_rejected(self, service, seeded_campaign):
        from commtool.splitter import EditOp

        with pytest.raises(StateError):
            service.edit_sections(seeded_campaign.campaign_id, [EditOp(kind="remove", section_id="s1")])

    def test_seq_index_increments(self, service, seeded_campaign):
        c2 = service.create_campaign(seeded_campaign.channel_id, "Issue 2", newsletter_html())
        service.send_campaign(c2.campaign_id, InMemoryTransport(), now_ms=1_700_600_000_000)
        assert service.campaign(seeded_campaign.campaign_id).seq_index == 0
        assert service.campaign(c2.campaign_id).seq_index == 1


class TestReplayDeterminism:
    def test_live_vs_replay_dashboards_byte_identical(self, config, service, seeded_campaign):
        panel = service.recipients(seeded_campaign.channel_id)
        sim = simulate(seeded_campaign, panel, SimProfile(), seed=3, sent_at_ms=seeded_campaign.sent_at)
        for r in panel:
            events = sim.events_by_recipient[r.recipient_id]
            if events:
                service.record_events(token_for(service, seeded_campaign, r.recipient_id), events)
        live = {
            kind: service.dashboard(seeded_campaign.campaign_id, kind).canonical_json()
            for kind in ("email", "message", "report")
        }
        fresh = Service(config)  # replays the JSONL from disk
        for kind, blob in live.items():
            assert fresh.dashboard(seeded_campaign.campaign_id, kind).canonical_json() == blob

    def test_export_deterministic_after_replay(self, config, service, seeded_campaign, tmp_path):
        panel = service.recipients(seeded_campaign.channel_id)
        sim = simulate(seeded_campaign, panel, SimProfile(), seed=4, sent_at_ms=seeded_campaign.sent_at)
        for r in panel:
            events = sim.events_by_recipient[r.recipient_id]
            if events:
                service.record_events(token_for(service, seeded_campaign, r.recipient_id), events)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        service.export_csv(seeded_campaign.campaign_id, a)
        Service(config).export_csv(seeded_campaign.campaign_id, b)
        assert a.read_bytes() == b.read_bytes()


class TestPeerAverageService:
    def test_two_channels_average(self, service, seeded_campaign):
        ch2 = service.create_channel("Second", "two@x.org")
        service.import_recipients(ch2.channel_id, recipients_csv(6), seed=2)
        c2 = service.create_campaign(ch2.channel_id, "Other", newsletter_html())
        service.send_campaign(c2.campaign_id, InMemoryTransport(), now_ms=1_700_100_000_000)
        avg = service.peer_average()
        assert avg["open_rate"] == pytest.approx(0.0)  # nobody opened either
        assert avg["n_comments"] == 0.0
