import pytest

from commtool.service import Config, Service

SECRET = b"test-secret-key-0123456789abcdef"  # 32 bytes


@pytest.fixture
def config(tmp_path):
    return Config(
        data_dir=tmp_path / "data",
        secret=SECRET,
        bearer_tokens={"default": "communicator-token"},
        timezone="America/Chicago",
        base_url="http://testserver",
    )


@pytest.fixture
def service(config):
    return Service(config)


def recipients_csv(n, units=("sales", "eng", "ops"), jobs=("staff", "manager")):
    lines = ["email,unit,job_category"]
    for i in range(n):
        lines.append(f"user{i}@example.org,{units[i % len(units)]},{jobs[i % len(jobs)]}")
    return "\n".join(lines)


def newsletter_html(n_stories=3, words_per_story=60):
    parts = []
    for i in range(n_stories):
        body = " ".join(f"story{i}word{j}" for j in range(words_per_story))
        parts.append(f"<h2>Story {i}</h2><p>{body}</p>")
    return "".join(parts)


@pytest.fixture
def seeded_campaign(service):
    """Channel with a 12-recipient panel and one sent 3-story campaign."""
    from commtool.delivery import InMemoryTransport

    channel = service.create_channel("Weekly Brief", "brief@example.org", audience_size=600)
    service.import_recipients(channel.channel_id, recipients_csv(12), seed=1)
    campaign = service.create_campaign(channel.channel_id, "Issue 1", newsletter_html())
    service.send_campaign(campaign.campaign_id, InMemoryTransport(), now_ms=1_700_000_000_000)
    return service.campaign(campaign.campaign_id)
