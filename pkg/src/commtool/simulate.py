"""Synthetic recipient behavior with known ground truth.

The simulator emits raw tracker events whose geometry is consistent with the
ground truth it records: while a recipient "reads" a message, the scroll
position puts exactly that section across the whole viewport, so a share-of-
viewport estimate recovers the true dwell to the second. Metric and
estimator tests check the system against these recorded truths rather than
against its own output.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

import numpy as np

from .domain import Campaign, EXPLICIT, Recipient
from .estimation import FEATURE_ORDER, TimestepDataset, build_features
from .ingest import Event, sessionize

VIEWPORT_W = 1000.0
VIEWPORT_H = 800.0


@dataclass(frozen=True)
class SimProfile:
    open_prob: float = 0.8
    skip_prob: float = 0.3  # chance a message gets zero dwell
    dwell_min_s: int = 2
    dwell_max_s: int = 15
    click_prob: float = 0.2  # per read message, implicit and explicit alike
    relevance_prob: float = 0.4  # per surveyed message, explicit recipients
    comment_prob: float = 0.1
    start_delay_max_s: int = 300

    @staticmethod
    def from_json(text: str) -> "SimProfile":
        return SimProfile(**json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


@dataclass
class SimResult:
    campaign_id: str
    events_by_recipient: dict[str, list[dict]]  # wire-format events
    true_times: dict[str, dict[str, int]]  # recipient -> section -> seconds
    true_clicks: dict[str, set[str]] = field(default_factory=dict)
    true_relevance: dict[str, set[str]] = field(default_factory=dict)


def simulate(
    campaign: Campaign,
    recipients: list[Recipient],
    profile: SimProfile,
    seed: int,
    sent_at_ms: int = 1_700_000_000_000,
) -> SimResult:
    """Deterministic synthetic event logs plus ground truth per recipient."""
    rng = random.Random(seed)
    sections = list(campaign.sections)
    surveyed = [s.section_id for s in sections if s.survey_enabled]
    result = SimResult(campaign_id=campaign.campaign_id, events_by_recipient={}, true_times={})

    for recipient in recipients:
        truth = {s.section_id: 0 for s in sections}
        result.true_times[recipient.recipient_id] = truth
        result.true_clicks[recipient.recipient_id] = set()
        result.true_relevance[recipient.recipient_id] = set()
        if rng.random() >= profile.open_prob:
            result.events_by_recipient[recipient.recipient_id] = []
            continue

        for s in sections:
            if rng.random() >= profile.skip_prob:
                truth[s.section_id] = rng.randint(profile.dwell_min_s, profile.dwell_max_s)

        t0 = sent_at_ms + rng.randint(0, profile.start_delay_max_s) * 1000
        events: list[dict] = []
        cid = 0

        def emit(kind: str, ts_ms: int, payload: dict) -> None:
            nonlocal cid
            cid += 1
            events.append({"cid": cid, "ts": ts_ms, "k": kind, "p": payload})

        emit("open", t0, {})
        emit(
            "layout",
            t0,
            {
                "sections": [
                    {"id": s.section_id, "top": i * VIEWPORT_H, "height": VIEWPORT_H}
                    for i, s in enumerate(sections)
                ],
                "doc_h": len(sections) * VIEWPORT_H,
                "vw": VIEWPORT_W,
                "vh": VIEWPORT_H,
            },
        )
        second = 0
        for i, s in enumerate(sections):
            dwell = truth[s.section_id]
            if dwell == 0:
                continue
            top = i * VIEWPORT_H
            emit("scroll", t0 + second * 1000, {"y": top})
            clicked = rng.random() < profile.click_prob
            for k in range(dwell):
                ts = t0 + second * 1000
                emit(
                    "sample",
                    ts,
                    {
                        "y": top,
                        "vw": VIEWPORT_W,
                        "vh": VIEWPORT_H,
                        "mx": VIEWPORT_W / 2,
                        "my": VIEWPORT_H / 2,
                        "vis": True,
                    },
                )
                emit("mousemove", ts, {"x": VIEWPORT_W / 2 + (k % 7), "y": VIEWPORT_H / 2})
                if clicked and k == min(1, dwell - 1):
                    emit("click", ts, {"section_id": s.section_id, "url": "https://example.org"})
                    result.true_clicks[recipient.recipient_id].add(s.section_id)
                second += 1
        close_ts = t0 + second * 1000
        if recipient.group == EXPLICIT:
            for sid in surveyed:
                if rng.random() < profile.relevance_prob:
                    emit("relevance_on", close_ts, {"section_id": sid})
                    result.true_relevance[recipient.recipient_id].add(sid)
                if rng.random() < profile.comment_prob:
                    emit("comment", close_ts, {"section_id": sid, "text": "simulated note"})
        emit("close", close_ts, {})
        result.events_by_recipient[recipient.recipient_id] = events
    return result


# --- labeled datasets for estimator evaluation -----------------------------
#
# A second generator produces per-second labeled feature rows where the true
# "being read" message each second follows the center-weighted heuristic
# (share over 1 + center distance, renormalized) plus user-specific noise:
# layouts and scroll paths vary so the plain share-of-viewport heuristic
# systematically misallocates time.


def make_reading_dataset(
    n_users: int = 6,
    sessions_per_user: int = 6,
    session_len_s: int = 80,
    n_sections: int = 5,
    noise: float = 0.08,
    seed: int = 0,
    word_count: int = 40,
) -> TimestepDataset:
    rng = np.random.default_rng(seed)
    users, session_ids, ts_list, section_list, labels, rows = [], [], [], [], [], []
    word_counts: dict[str, int] = {}

    for u in range(n_users):
        user_id = f"u{u + 1}"
        user_noise = noise * float(rng.uniform(0.6, 1.4))
        for s_idx in range(sessions_per_user):
            session_id = f"{user_id}-sess{s_idx + 1}"
            # near-uniform heights keep several sections sharing the viewport,
            # so share-of-viewport alone badly misallocates the dwell that the
            # center-weighted truth concentrates on one section
            heights = rng.uniform(0.4, 0.6, size=n_sections) * VIEWPORT_H
            tops = np.concatenate([[0.0], np.cumsum(heights)[:-1]])
            doc_h = float(np.sum(heights))
            sec_ids = [f"m{m + 1}" for m in range(n_sections)]
            for sid in sec_ids:
                word_counts[sid] = word_count

            start = 1_700_000_000_000
            events = [
                Event("sim", "sim", 1, start, "open", {}),
                Event(
                    "sim",
                    "sim",
                    2,
                    start,
                    "layout",
                    {
                        "sections": [
                            {"id": sec_ids[m], "top": float(tops[m]), "height": float(heights[m])}
                            for m in range(n_sections)
                        ],
                        "doc_h": doc_h,
                        "vw": VIEWPORT_W,
                        "vh": VIEWPORT_H,
                    },
                ),
            ]
            cid = 2
            scroll_y = 0.0
            max_scroll = max(0.0, doc_h - VIEWPORT_H)
            mouse_x, mouse_y = VIEWPORT_W / 2, VIEWPORT_H / 2
            for t in range(session_len_s):
                ts = start + t * 1000
                if rng.random() < 0.35:
                    scroll_y = float(
                        np.clip(scroll_y + rng.uniform(-0.3, 0.5) * VIEWPORT_H, 0.0, max_scroll)
                    )
                    cid += 1
                    events.append(Event("sim", "sim", cid, ts, "scroll", {"y": scroll_y}))
                if rng.random() < 0.6:
                    mouse_x = float(np.clip(mouse_x + rng.uniform(-150, 150), 0, VIEWPORT_W))
                    mouse_y = float(np.clip(mouse_y + rng.uniform(-150, 150), 0, VIEWPORT_H))
                    cid += 1
                    events.append(Event("sim", "sim", cid, ts, "mousemove", {"x": mouse_x, "y": mouse_y}))
                cid += 1
                events.append(
                    Event(
                        "sim",
                        "sim",
                        cid,
                        ts,
                        "sample",
                        {
                            "y": scroll_y,
                            "vw": VIEWPORT_W,
                            "vh": VIEWPORT_H,
                            "mx": mouse_x,
                            "my": mouse_y,
                            "vis": True,
                        },
                    )
                )
            cid += 1
            events.append(Event("sim", "sim", cid, start + session_len_s * 1000, "close", {}))

            session = sessionize(events)[0]
            table = build_features(session)
            p2_col = FEATURE_ORDER.index("baseline_p2")
            for t in sorted(set(table.ts_s.tolist())):
                sel = table.ts_s == t
                idxs = np.flatnonzero(sel)
                scores = table.X[idxs, p2_col] + rng.normal(0.0, user_noise, size=len(idxs))
                winner = idxs[int(np.argmax(scores))] if len(idxs) else None
                for i in idxs:
                    users.append(user_id)
                    session_ids.append(session_id)
                    ts_list.append(int(t))
                    section_list.append(str(table.section_ids[i]))
                    labels.append(1.0 if i == winner else 0.0)
                    rows.append(table.X[i])

    return TimestepDataset(
        user_ids=np.array(users, dtype=object),
        session_ids=np.array(session_ids, dtype=object),
        ts_s=np.array(ts_list, dtype=int),
        section_ids=np.array(section_list, dtype=object),
        labels=np.array(labels, dtype=float),
        X=np.vstack(rows) if rows else np.empty((0, len(FEATURE_ORDER))),
        word_counts=word_counts,
    )
