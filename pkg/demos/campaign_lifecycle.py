"""Walkthrough: full campaign lifecycle against a throwaway data directory.

Creates a channel and panel, sends a campaign through the file transport,
feeds it simulated recipient behavior, and prints the three dashboards.

Run: python demos/campaign_lifecycle.py
"""

import json
import tempfile
from pathlib import Path

from commtool.delivery import FileDropTransport
from commtool.domain import mint_token
from commtool.service import Config, Service
from commtool.simulate import SimProfile, simulate

HTML = "".join(
    f"<h2>Story {i}</h2><p>" + " ".join(f"w{i}s{j}" for j in range(80)) + "</p>"
    for i in range(4)
)

PANEL = "email,unit,job_category\n" + "\n".join(
    f"person{i}@example.org,{u},{j}"
    for i, (u, j) in enumerate(
        [("sales", "staff"), ("sales", "manager"), ("eng", "staff"), ("eng", "staff"),
         ("ops", "manager"), ("ops", "staff"), ("eng", "manager"), ("sales", "staff")]
    )
)


def main():
    workdir = Path(tempfile.mkdtemp(prefix="commtool-demo-"))
    config = Config(
        data_dir=workdir / "data",
        secret=b"demo-secret-key-0123456789abcdef",
        timezone="America/Chicago",
    )
    service = Service(config)

    channel = service.create_channel("Weekly Brief", "brief@example.org", audience_size=900)
    service.import_recipients(channel.channel_id, PANEL, seed=7)
    campaign = service.create_campaign(channel.channel_id, "Issue 12", HTML)
    print(f"channel {channel.channel_id}, campaign {campaign.campaign_id}, "
          f"{len(campaign.sections)} sections")

    report = service.send_campaign(
        campaign.campaign_id, FileDropTransport(workdir / "outbox"), now_ms=1_700_000_000_000
    )
    print(f"sent {len(report.sent)} emails into {workdir / 'outbox'}")

    campaign = service.campaign(campaign.campaign_id)
    sim = simulate(
        campaign,
        service.recipients(channel.channel_id),
        SimProfile(open_prob=0.9, relevance_prob=0.5, comment_prob=0.4),
        seed=21,
        sent_at_ms=campaign.sent_at,
    )
    for rid, events in sim.events_by_recipient.items():
        if events:
            token = mint_token(campaign.campaign_id, rid, config.secret).token
            service.record_events(token, events)

    for kind in ("email", "message", "report"):
        dash = service.dashboard(campaign.campaign_id, kind)
        print(f"\n== {kind} dashboard ==")
        print(json.dumps(dash.payload, indent=2, sort_keys=True)[:1200])

    share = service.share(campaign.campaign_id, "email", notes="Strong open rate this week.")
    print(f"\nshare link token: {share.share_token}")


if __name__ == "__main__":
    main()
