"""Operator CLI: channel/campaign lifecycle, reports, eval, and simulation.

Configuration comes from the COMMTOOL_* environment (data dir, secret,
timezone, hourly rate); every command that involves randomness takes --seed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .domain import mint_token
from .errors import CommToolError
from .estimation import ALL_VARIANTS, TimestepDataset, TrainConfig, cross_validate
from .service import Config, Service
from .simulate import SimProfile, simulate


def _service() -> Service:
    try:
        return Service(Config.from_env())
    except CommToolError as exc:
        raise click.UsageError(str(exc)) from exc


def _fmt(value, places: int = 3) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.{places}f}"
    return str(value)


@click.group(name="commtool", no_args_is_help=False)
def main() -> None:
    """Bulk-email evaluation: send tracked campaigns, inspect metric reports."""


@main.group()
def channel() -> None:
    """Manage channels."""


@channel.command("new")
@click.argument("name")
@click.option("--sender", required=True, help="FROM identity for outbound email")
@click.option("--brand", default="")
@click.option("--audience", type=int, default=0, help="real mailing-list size for cost math")
@click.option("--tz", "timezone", default=None)
@click.option("--rate", type=float, default=None, help="hourly rate in USD")
def channel_new(name, sender, brand, audience, timezone, rate) -> None:
    svc = _service()
    ch = svc.create_channel(
        name=name,
        sender_identity=sender,
        brand=brand,
        audience_size=audience,
        timezone=timezone,
        hourly_rate_usd=rate,
    )
    click.echo(ch.channel_id)


@main.group()
def recipients() -> None:
    """Manage recipient panels."""


@recipients.command("import")
@click.argument("channel_id")
@click.argument("csv_path", type=click.Path(exists=True, path_type=Path))
@click.option("--seed", type=int, default=0, help="group-assignment shuffle seed")
def recipients_import(channel_id, csv_path, seed) -> None:
    svc = _service()
    added = svc.import_recipients(channel_id, csv_path.read_text(encoding="utf-8"), seed=seed)
    implicit = sum(1 for r in added if r.group == "implicit")
    click.echo(f"imported {len(added)} recipients ({implicit} implicit, {len(added) - implicit} explicit)")


@main.group()
def campaign() -> None:
    """Create and send campaigns."""


@campaign.command("new")
@click.argument("channel_id")
@click.option("--subject", required=True)
@click.option("--html", "html_path", required=True, type=click.Path(exists=True, path_type=Path))
def campaign_new(channel_id, subject, html_path) -> None:
    svc = _service()
    c = svc.create_campaign(channel_id, subject, html_path.read_text(encoding="utf-8"))
    click.echo(c.campaign_id)
    for s in c.sections:
        label = s.heading_text or s.plain_text[:40]
        click.echo(f"  {s.section_id}  {s.kind:<7} {s.word_count:>5}w  {label}")


@campaign.command("send")
@click.argument("campaign_id")
@click.option("--transport", type=click.Choice(["file", "smtp"]), default="file")
@click.option("--outdir", type=click.Path(path_type=Path), default=None, help="file transport directory")
@click.option("--base-url", default=None)
@click.option("--smtp-host", default="localhost")
@click.option("--smtp-port", type=int, default=25)
def campaign_send(campaign_id, transport, outdir, base_url, smtp_host, smtp_port) -> None:
    from .delivery import FileDropTransport, SMTPTransport

    svc = _service()
    if transport == "file":
        directory = outdir or (svc.config.data_dir / "outbox" / campaign_id)
        t = FileDropTransport(directory)
    else:
        t = SMTPTransport(smtp_host, smtp_port)
    report = svc.send_campaign(campaign_id, t, base_url=base_url)
    click.echo(
        f"sent {len(report.sent)}, failed {len(report.failed)}, excluded {len(report.excluded)}"
    )
    for rid, err in report.failed.items():
        click.echo(f"  failed {rid}: {err}", err=True)


@main.command()
@click.argument("campaign_id")
@click.option("--kind", type=click.Choice(["email", "message", "report"]), default="email")
def report(campaign_id, kind) -> None:
    """Print a campaign dashboard."""
    svc = _service()
    dash = svc.dashboard(campaign_id, kind)
    if kind == "email":
        m = dash.payload["email"]
        click.echo(f"campaign {campaign_id}")
        for key in (
            "open_rate",
            "click_rate",
            "read_rate",
            "detail_rate",
            "relevance_rate",
            "reading_time_s",
            "estimated_cost_usd",
            "n_comments",
            "reputation_change",
        ):
            click.echo(f"  {key:<20} {_fmt(m[key])}")
    elif kind == "message":
        header = f"{'section':<10}{'click':>8}{'read':>8}{'detail':>8}{'relev':>8}{'time_s':>9}{'cost':>10}{'#cmt':>6}"
        click.echo(header)
        for m in dash.payload["messages"]:
            click.echo(
                f"{m['section_id']:<10}"
                f"{_fmt(m['click_rate']):>8}{_fmt(m['read_rate']):>8}"
                f"{_fmt(m['detail_rate']):>8}{_fmt(m['relevance_rate']):>8}"
                f"{_fmt(m['reading_time_s'], 1):>9}{_fmt(m['estimated_cost_usd'], 2):>10}"
                f"{m['n_comments']:>6}"
            )
    else:
        for s in dash.payload["sections"]:
            click.echo(
                f"{s['section_id']}  clicked {s['n_clicked']}/{s['n_implicit']}  "
                f"relevant {s['n_relevant']}/{s['n_explicit']}  "
                f"time {_fmt(s['reading_time_s'], 1)}s  cost {_fmt(s['estimated_cost_usd'], 2)}"
            )
            for g in s["who_interested"]:
                click.echo(f"    {g['dimension']}={g['bucket']}: {g['interested']}/{g['total']}")


@main.command()
@click.argument("campaign_id")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def export(campaign_id, out_path) -> None:
    """Write the campaign metrics CSV."""
    svc = _service()
    rows = svc.export_csv(campaign_id, out_path)
    click.echo(f"wrote {rows} rows to {out_path}")


@main.command("eval")
@click.option("--model", "variant", type=click.Choice(list(ALL_VARIANTS)), required=True)
@click.option("--dataset", "dataset_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--words", type=int, default=100, help="word count assumed per message when absent")
@click.option("--seed", type=int, default=0)
def eval_cmd(variant, dataset_path, words, seed) -> None:
    """Leave-one-user-out evaluation of an estimation model on a labeled CSV."""
    ds = TimestepDataset.from_csv(dataset_path.read_text(encoding="utf-8"))
    if not ds.word_counts:
        ds.word_counts.update({sid: words for sid in set(ds.section_ids.tolist())})
    result = cross_validate(variant, ds, TrainConfig(seed=seed))
    click.echo(f"model {variant}: leave-one-user-out over {len(result.folds)} users")
    mean = result.mean.as_dict()
    for key in (
        "per_error",
        "abs_error",
        "accuracy",
        "skim_precision",
        "skim_recall",
        "detail_precision",
        "detail_recall",
        "read_precision",
        "read_recall",
    ):
        click.echo(f"  {key:<18} {_fmt(mean[key])}")


@main.command("simulate")
@click.argument("campaign_id")
@click.option("--profile", "profile_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--seed", type=int, default=0)
@click.option("--truth-out", type=click.Path(path_type=Path), default=None, help="write ground truth JSON")
def simulate_cmd(campaign_id, profile_path, seed, truth_out) -> None:
    """Generate synthetic recipient events for a sent campaign."""
    svc = _service()
    campaign_obj = svc.campaign(campaign_id)
    panel = svc.recipients(campaign_obj.channel_id)
    profile = (
        SimProfile.from_json(profile_path.read_text(encoding="utf-8"))
        if profile_path
        else SimProfile()
    )
    sim = simulate(campaign_obj, panel, profile, seed, sent_at_ms=campaign_obj.sent_at or 0)
    total = 0
    for recipient in panel:
        events = sim.events_by_recipient[recipient.recipient_id]
        if not events:
            continue
        token = mint_token(campaign_id, recipient.recipient_id, svc.config.secret)
        total += svc.record_events(token.token, events)
    click.echo(f"ingested {total} events for {campaign_id} (seed {seed})")
    if truth_out:
        truth_out.write_text(
            json.dumps(
                {rid: times for rid, times in sim.true_times.items()}, indent=2, sort_keys=True
            ),
            encoding="utf-8",
        )
        click.echo(f"ground truth written to {truth_out}")


@main.command()
@click.option("--port", type=int, default=None)
@click.option("--reminders/--no-reminders", default=True, help="run the reminder scheduler")
def serve(port, reminders) -> None:
    """Run the HTTP service (plus a 60 s reminder scheduler tick)."""
    import threading
    import time as time_mod

    import uvicorn

    from .api import create_app
    from .delivery import FileDropTransport

    svc = _service()
    app = create_app(svc)
    if reminders:
        transport = FileDropTransport(svc.config.data_dir / "reminders")

        def tick() -> None:
            while True:
                time_mod.sleep(60)
                try:
                    svc.send_reminders(transport, int(time_mod.time() * 1000))
                except Exception as exc:  # noqa: BLE001 - scheduler must not die
                    click.echo(f"reminder tick failed: {exc}", err=True)

        threading.Thread(target=tick, daemon=True, name="reminder-scheduler").start()
    uvicorn.run(app, host="0.0.0.0", port=port or svc.config.port)


if __name__ == "__main__":
    sys.exit(main())
