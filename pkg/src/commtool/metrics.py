"""Email- and message-level metric suite: awareness, relevance, cost, reputation.

Awareness denominators are the implicit panel, relevance denominators the
explicit panel; reading time averages over implicit recipients who opened.
Empty denominators yield absent (None) fields so dashboards can show "n/a"
instead of a misleading 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import stats

from .domain import Campaign, Channel, EXPLICIT, IMPLICIT, Recipient
from .errors import DegenerateError, SampleError
from .estimation import DETAIL, SKIM, classify_read_level
from .feedback import FeedbackState
from .ingest import ReadingSession, active_time

DECISION_OVERHEAD_S = 6.0  # per-recipient open/decide time added to email cost


@dataclass(frozen=True)
class EmailMetrics:
    open_rate: float | None
    click_rate: float | None
    read_rate: float | None
    detail_rate: float | None
    relevance_rate: float | None
    reading_time_s: float | None
    estimated_cost_usd: float | None
    n_comments: int
    reputation_change: float | None = None

    def as_dict(self) -> dict:
        return {
            "open_rate": self.open_rate,
            "click_rate": self.click_rate,
            "read_rate": self.read_rate,
            "detail_rate": self.detail_rate,
            "relevance_rate": self.relevance_rate,
            "reading_time_s": self.reading_time_s,
            "estimated_cost_usd": self.estimated_cost_usd,
            "n_comments": self.n_comments,
            "reputation_change": self.reputation_change,
        }


@dataclass(frozen=True)
class GroupInterest:
    dimension: str  # "unit" | "job_category"
    bucket: str
    interested: int
    total: int

    def as_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "bucket": self.bucket,
            "interested": self.interested,
            "total": self.total,
        }


@dataclass(frozen=True)
class MessageMetrics:
    section_id: str
    click_rate: float | None
    read_rate: float | None
    detail_rate: float | None
    relevance_rate: float | None
    reading_time_s: float | None
    estimated_cost_usd: float | None
    n_comments: int
    who_interested: tuple[GroupInterest, ...] = ()

    def as_dict(self) -> dict:
        return {
            "section_id": self.section_id,
            "click_rate": self.click_rate,
            "read_rate": self.read_rate,
            "detail_rate": self.detail_rate,
            "relevance_rate": self.relevance_rate,
            "reading_time_s": self.reading_time_s,
            "estimated_cost_usd": self.estimated_cost_usd,
            "n_comments": self.n_comments,
            "who_interested": [g.as_dict() for g in self.who_interested],
        }


def estimated_cost(
    avg_reading_time_s: float,
    open_rate: float,
    audience_size: int,
    hourly_rate_usd: float,
    include_decision_overhead: bool,
) -> float:
    """Dollarized recipient time: reading seconds scaled by open rate and the
    real audience, plus 6 s of decide time per recipient for email-level cost."""
    seconds = avg_reading_time_s * open_rate * audience_size
    if include_decision_overhead:
        seconds += DECISION_OVERHEAD_S * audience_size
    return seconds * hourly_rate_usd / 3600.0


def read_speed(word_count: int, reading_time_s: float) -> float | None:
    """Words over log(1 + seconds); absent for zero reading time."""
    if reading_time_s == 0:
        return None
    return word_count / math.log1p(reading_time_s)


@dataclass(frozen=True)
class RecipientRollup:
    """One recipient's behavior aggregated across all their sessions."""

    recipient_id: str
    group: str
    opened: bool
    active_s: float
    clicked_sections: frozenset[str]
    section_times: dict[str, float]
    section_levels: dict[str, str]


def rollup_recipients(
    campaign: Campaign,
    recipients: list[Recipient],
    sessions: dict[str, list[ReadingSession]],
    estimates: dict[str, dict[str, float]],
) -> list[RecipientRollup]:
    """Sum per-message times and OR clicks across each recipient's sessions,
    then classify read levels once on the aggregate."""
    words = {s.section_id: s.word_count for s in campaign.sections}
    out = []
    for r in recipients:
        sess = sessions.get(r.recipient_id, [])
        times = dict(estimates.get(r.recipient_id, {}))
        clicked = frozenset(c.section_id for s in sess for c in s.clicks)
        levels = {
            sid: classify_read_level(t, words.get(sid, 0)) for sid, t in times.items()
        }
        out.append(
            RecipientRollup(
                recipient_id=r.recipient_id,
                group=r.group,
                opened=bool(sess),
                active_s=float(sum(active_time(s) for s in sess)),
                clicked_sections=clicked,
                section_times=times,
                section_levels=levels,
            )
        )
    return out


def _rate(flags: list[bool]) -> float | None:
    return sum(flags) / len(flags) if flags else None


def compute_email_metrics(
    campaign: Campaign,
    channel: Channel,
    recipients: list[Recipient],
    sessions: dict[str, list[ReadingSession]],
    estimates: dict[str, dict[str, float]],
    feedback: FeedbackState,
    reputation_change: float | None = None,
) -> EmailMetrics:
    rollups = rollup_recipients(campaign, recipients, sessions, estimates)
    implicit = [r for r in rollups if r.group == IMPLICIT]
    explicit = [r for r in rollups if r.group == EXPLICIT]

    open_rate = _rate([r.opened for r in implicit])
    click_rate = _rate([bool(r.clicked_sections) for r in implicit])
    read_rate = _rate(
        [any(lv in (SKIM, DETAIL) for lv in r.section_levels.values()) for r in implicit]
    )
    detail_rate = _rate([DETAIL in r.section_levels.values() for r in implicit])
    openers = [r for r in implicit if r.opened]
    reading_time = sum(r.active_s for r in openers) / len(openers) if openers else None
    relevance_rate = _rate(
        [bool(feedback.relevant_sections(r.recipient_id)) for r in explicit]
    )
    cost = None
    if open_rate is not None:
        cost = estimated_cost(
            reading_time or 0.0,
            open_rate,
            channel.audience_size,
            channel.hourly_rate_usd,
            include_decision_overhead=True,
        )
    return EmailMetrics(
        open_rate=open_rate,
        click_rate=click_rate,
        read_rate=read_rate,
        detail_rate=detail_rate,
        relevance_rate=relevance_rate,
        reading_time_s=reading_time,
        estimated_cost_usd=cost,
        n_comments=feedback.recipient_comment_count(),
        reputation_change=reputation_change,
    )


def who_interested(
    section_id: str,
    recipients: list[Recipient],
    rollups: list[RecipientRollup],
    feedback: FeedbackState,
) -> tuple[GroupInterest, ...]:
    """Per-unit and per-job interest counts for one message.

    Interested means an implicit recipient clicked or at-least-skimmed it, or
    an explicit recipient marked it relevant.
    """
    by_id = {r.recipient_id: r for r in rollups}
    marking = feedback.recipients_marking(section_id)

    def interested(r: Recipient) -> bool:
        roll = by_id.get(r.recipient_id)
        if roll is None:
            return False
        if r.group == IMPLICIT:
            return section_id in roll.clicked_sections or roll.section_levels.get(
                section_id
            ) in (SKIM, DETAIL)
        return r.recipient_id in marking

    out = []
    for dimension, key in (("unit", lambda r: r.unit), ("job_category", lambda r: r.job_category)):
        buckets: dict[str, list[Recipient]] = {}
        for r in recipients:
            buckets.setdefault(key(r), []).append(r)
        for bucket in sorted(buckets):
            members = buckets[bucket]
            out.append(
                GroupInterest(
                    dimension=dimension,
                    bucket=bucket,
                    interested=sum(interested(r) for r in members),
                    total=len(members),
                )
            )
    return tuple(out)


def compute_message_metrics(
    campaign: Campaign,
    channel: Channel,
    recipients: list[Recipient],
    sessions: dict[str, list[ReadingSession]],
    estimates: dict[str, dict[str, float]],
    feedback: FeedbackState,
) -> list[MessageMetrics]:
    """Metric rows for every content section, in document order."""
    rollups = rollup_recipients(campaign, recipients, sessions, estimates)
    implicit = [r for r in rollups if r.group == IMPLICIT]
    explicit = [r for r in rollups if r.group == EXPLICIT]
    open_rate = _rate([r.opened for r in implicit])
    openers = [r for r in implicit if r.opened]

    out = []
    for section in campaign.content_sections():
        sid = section.section_id
        click_rate = _rate([sid in r.clicked_sections for r in implicit])
        read_rate = _rate([r.section_levels.get(sid) in (SKIM, DETAIL) for r in implicit])
        detail_rate = _rate([r.section_levels.get(sid) == DETAIL for r in implicit])
        marking = feedback.recipients_marking(sid)
        relevance_rate = _rate([r.recipient_id in marking for r in explicit])
        reading_time = (
            sum(r.section_times.get(sid, 0.0) for r in openers) / len(openers)
            if openers
            else None
        )
        cost = None
        if open_rate is not None:
            cost = estimated_cost(
                reading_time or 0.0,
                open_rate,
                channel.audience_size,
                channel.hourly_rate_usd,
                include_decision_overhead=False,
            )
        out.append(
            MessageMetrics(
                section_id=sid,
                click_rate=click_rate,
                read_rate=read_rate,
                detail_rate=detail_rate,
                relevance_rate=relevance_rate,
                reading_time_s=reading_time,
                estimated_cost_usd=cost,
                n_comments=feedback.recipient_comment_count(sid),
                who_interested=who_interested(sid, recipients, rollups, feedback),
            )
        )
    return out


# --- channel reputation ----------------------------------------------------


@dataclass(frozen=True)
class ReputationPoint:
    seq_index: int
    open_rate: float
    reputation: float  # next open rate minus this one


def reputation_series(open_rates_by_seq: list[tuple[int, float]]) -> list[ReputationPoint]:
    """Reputation change per campaign that has a successor."""
    ordered = sorted(open_rates_by_seq)
    if len(ordered) < 2:
        return []
    return [
        ReputationPoint(
            seq_index=ordered[i][0],
            open_rate=ordered[i][1],
            reputation=ordered[i + 1][1] - ordered[i][1],
        )
        for i in range(len(ordered) - 1)
    ]


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    stderr: float
    t_stat: float
    p_value: float
    ci_low: float
    ci_high: float
    n: int
    df: int
    perfect_fit: bool = False


def ols_fit(x: list[float], y: list[float]) -> RegressionResult:
    """Simple least squares with intercept; t inference with n-2 df."""
    n = len(x)
    if n != len(y):
        raise SampleError("x and y lengths differ")
    if n < 3:
        raise SampleError("need at least 3 points")
    mean_x = sum(x) / n
    mean_y = sum(y) / n
    sxx = sum((xi - mean_x) ** 2 for xi in x)
    if sxx == 0:
        raise DegenerateError("x is constant")
    sxy = sum((xi - mean_x) * (yi - mean_y) for xi, yi in zip(x, y))
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    sse = sum((yi - (intercept + slope * xi)) ** 2 for xi, yi in zip(x, y))
    df = n - 2
    syy = sum((yi - mean_y) ** 2 for yi in y)
    if sse <= 1e-12 * max(1.0, syy):
        p = 1.0 if slope == 0 else 0.0
        return RegressionResult(
            slope=slope,
            intercept=intercept,
            stderr=0.0,
            t_stat=math.inf if slope != 0 else 0.0,
            p_value=p,
            ci_low=slope,
            ci_high=slope,
            n=n,
            df=df,
            perfect_fit=True,
        )
    stderr = math.sqrt(sse / df / sxx)
    t_stat = slope / stderr
    p_value = 2.0 * float(stats.t.sf(abs(t_stat), df))
    t_crit = float(stats.t.ppf(0.975, df))
    return RegressionResult(
        slope=slope,
        intercept=intercept,
        stderr=stderr,
        t_stat=t_stat,
        p_value=p_value,
        ci_low=slope - t_crit * stderr,
        ci_high=slope + t_crit * stderr,
        n=n,
        df=df,
        perfect_fit=False,
    )


REPUTATION_MIN_PAIRS = 4


def predict_reputation_change(
    history: list[tuple[float, float]], open_rate_t: float, click_rate_t: float
) -> float:
    """Forecast next-open-rate change for the current campaign.

    history holds (open_rate, click_rate) for strictly earlier campaigns in
    send order. With at least 4 (reputation, click rate) pairs, fit reputation
    on click rate and evaluate at the current click rate, clamping so the
    implied future open rate stays within [0, 1]. Cold channels return 0.
    """
    if len(history) < REPUTATION_MIN_PAIRS + 1:
        return 0.0
    reps = [history[i + 1][0] - history[i][0] for i in range(len(history) - 1)]
    clicks = [history[i][1] for i in range(len(history) - 1)]
    try:
        fit = ols_fit(clicks, reps)
    except (DegenerateError, SampleError):
        return 0.0
    predicted = fit.intercept + fit.slope * click_rate_t
    future_open = min(1.0, max(0.0, open_rate_t + predicted))
    return future_open - open_rate_t
