import json

import pytest

from commtool.domain import Campaign, Channel, Recipient
from commtool.errors import NotFoundError
from commtool.metrics import EmailMetrics, MessageMetrics
from commtool.splitter import split_html
from commtool.store import Store


def make_store(tmp_path):
    store = Store(tmp_path / "data")
    channel = Channel("ch1", "Brief", "b@x.org")
    store.save_channel(channel, [Recipient("r1", "r1@x.org")])
    html = "<h2>One</h2><p>" + " ".join(f"w{i}" for i in range(30)) + "</p>"
    campaign = Campaign("ch1-c1", "ch1", "Issue", html, tuple(split_html(html)), sent_at=5)
    store.save_campaign(campaign)
    return store


class TestChannelCampaignPersistence:
    def test_channel_round_trip(self, tmp_path):
        store = make_store(tmp_path)
        channel, recipients = store.load_channel("ch1")
        assert channel.name == "Brief"
        assert recipients[0].recipient_id == "r1"

    def test_missing_channel(self, tmp_path):
        store = make_store(tmp_path)
        with pytest.raises(NotFoundError):
            store.load_channel("nope")

    def test_campaign_round_trip_preserves_sections(self, tmp_path):
        store = make_store(tmp_path)
        campaign, _ = store.load_campaign("ch1-c1")
        assert campaign.sections[0].heading_text == "One"
        assert campaign.sent_at == 5

    def test_missing_campaign(self, tmp_path):
        store = make_store(tmp_path)
        with pytest.raises(NotFoundError):
            store.load_campaign("ch1-c9")

    def test_extra_metadata_merged(self, tmp_path):
        store = make_store(tmp_path)
        campaign, _ = store.load_campaign("ch1-c1")
        store.save_campaign(campaign, {"reminder_sent": True})
        store.save_campaign(campaign, {"shares": [1]})
        _, extra = store.load_campaign("ch1-c1")
        assert extra["reminder_sent"] is True
        assert extra["shares"] == [1]


class TestEventLog:
    def test_offsets_monotone(self, tmp_path):
        store = make_store(tmp_path)
        assert store.append_event("ch1-c1", {"k": "open"}) == 0
        assert store.append_event("ch1-c1", {"k": "close"}) == 1

    def test_restart_continues_offsets(self, tmp_path):
        store = make_store(tmp_path)
        store.append_event("ch1-c1", {"k": "open"})
        reopened = Store(tmp_path / "data")
        assert reopened.append_event("ch1-c1", {"k": "close"}) == 1
        assert len(reopened.load_event_records("ch1-c1")) == 2

    def test_round_trip_preserves_payload(self, tmp_path):
        store = make_store(tmp_path)
        record = {"r": "r1", "cid": 1, "ts": 12, "k": "sample", "p": {"y": 1.5, "vis": True}}
        store.append_event("ch1-c1", record)
        assert store.load_event_records("ch1-c1") == [record]

    def test_empty_log(self, tmp_path):
        store = make_store(tmp_path)
        assert store.load_event_records("ch1-c1") == []

    def test_torn_trailing_line_skipped(self, tmp_path, caplog):
        store = make_store(tmp_path)
        store.append_events("ch1-c1", [{"k": "open"}, {"k": "close"}])
        path = store.campaign_dir("ch1-c1") / "events.jsonl"
        with path.open("a", encoding="utf-8") as fh:
            fh.write('{"k": "sam')  # torn write, no newline
        records = store.load_event_records("ch1-c1")
        assert [r["k"] for r in records] == ["open", "close"]

    def test_log_lines_are_valid_jsonl(self, tmp_path):
        store = make_store(tmp_path)
        store.append_events("ch1-c1", [{"k": "open", "p": {"x": 1}}, {"k": "close"}])
        path = store.campaign_dir("ch1-c1") / "events.jsonl"
        for line in path.read_text().splitlines():
            json.loads(line)


def email_metrics():
    return EmailMetrics(
        open_rate=0.75,
        click_rate=0.5,
        read_rate=0.5,
        detail_rate=0.25,
        relevance_rate=None,
        reading_time_s=30.0,
        estimated_cost_usd=100.0,
        n_comments=2,
        reputation_change=0.0,
    )


def message_metrics(sid):
    return MessageMetrics(
        section_id=sid,
        click_rate=0.5,
        read_rate=0.25,
        detail_rate=0.0,
        relevance_rate=None,
        reading_time_s=12.5,
        estimated_cost_usd=20.0,
        n_comments=1,
    )


class TestMetricsCsv:
    def test_row_count_and_header(self, tmp_path):
        store = make_store(tmp_path)
        out = tmp_path / "m.csv"
        rows = store.write_metrics_csv(out, email_metrics(), [message_metrics(f"s{i}") for i in range(5)])
        assert rows == 6
        lines = out.read_text().splitlines()
        assert lines[0] == (
            "scope,section_id,open_rate,click_rate,read_rate,detail_rate,"
            "relevance_rate,reading_time_s,cost_usd,n_comments"
        )
        assert len(lines) == 7
        assert lines[-1].startswith("email,__email__,")

    def test_absent_fields_are_empty_cells(self, tmp_path):
        store = make_store(tmp_path)
        out = tmp_path / "m.csv"
        store.write_metrics_csv(out, email_metrics(), [message_metrics("s1")])
        line = out.read_text().splitlines()[1]
        cells = line.split(",")
        assert cells[2] == ""  # messages carry no open rate
        assert cells[6] == ""  # relevance absent

    def test_re_export_identical_bytes(self, tmp_path):
        store = make_store(tmp_path)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        store.write_metrics_csv(a, email_metrics(), [message_metrics("s1")])
        store.write_metrics_csv(b, email_metrics(), [message_metrics("s1")])
        assert a.read_bytes() == b.read_bytes()
