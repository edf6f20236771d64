"""Interaction-event validation and reconstruction of 1 Hz reading sessions.

Sessions are a pure function of the (sorted) event stream: a session opens at
each `open` event, ends at `close` or after 30 minutes of silence, and its
frames are resampled onto a one-second grid. Idle seconds (no scroll / mouse
/ click for 60 s, and no idle confirmation) are excluded from active time —
this mirrors the stay-on-page prompt the tracker shows.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from .errors import ValidationError

OPEN = "open"
LAYOUT = "layout"
SAMPLE = "sample"
SCROLL = "scroll"
MOUSEMOVE = "mousemove"
CLICK = "click"
VISIBLE = "visible"
HIDDEN = "hidden"
IDLE_PROMPT = "idle_prompt"
IDLE_CONFIRM = "idle_confirm"
IDLE_END = "idle_end"
RELEVANCE_ON = "relevance_on"
RELEVANCE_OFF = "relevance_off"
COMMENT = "comment"
CLOSE = "close"

EVENT_KINDS = frozenset(
    {
        OPEN,
        LAYOUT,
        SAMPLE,
        SCROLL,
        MOUSEMOVE,
        CLICK,
        VISIBLE,
        HIDDEN,
        IDLE_PROMPT,
        IDLE_CONFIRM,
        IDLE_END,
        RELEVANCE_ON,
        RELEVANCE_OFF,
        COMMENT,
        CLOSE,
    }
)

# Interactions that keep a recipient "active"; idle confirmation counts since
# it is itself a click on the prompt.
_INTERACTION_KINDS = (SCROLL, MOUSEMOVE, CLICK, IDLE_CONFIRM)

SESSION_TIMEOUT_MS = 30 * 60 * 1000
CARRY_FORWARD_MS = 5_000
IDLE_AFTER_MS = 60_000


@dataclass(frozen=True)
class Event:
    recipient_id: str
    campaign_id: str
    cid: int  # client-generated monotone id, dedupe key per recipient
    ts_ms: int
    kind: str
    payload: dict


@dataclass(frozen=True)
class LayoutSnapshot:
    ts_ms: int
    sections: tuple[tuple[str, float, float], ...]  # (section_id, top_px, height_px)
    doc_height: float
    viewport: tuple[float, float]


@dataclass(frozen=True)
class FrameSample:
    ts_s: int
    scroll_y: float
    viewport: tuple[float, float]
    mouse: tuple[float, float]
    visible: bool


@dataclass(frozen=True)
class Click:
    ts_ms: int
    section_id: str
    url: str = ""


@dataclass(frozen=True)
class ReadingSession:
    recipient_id: str
    campaign_id: str
    start_ms: int
    end_ms: int
    frames: tuple[FrameSample, ...]
    layouts: tuple[LayoutSnapshot, ...]
    clicks: tuple[Click, ...]
    idle_spans: tuple[tuple[int, int], ...]  # [from_ms, to_ms)
    idle_flags: tuple[bool, ...] = field(repr=False, default=())
    scroll_ts_ms: tuple[int, ...] = field(repr=False, default=())
    mouse_moves: tuple[tuple[int, float, float], ...] = field(repr=False, default=())

    def layout_at(self, ts_s: int) -> LayoutSnapshot | None:
        ts_ms = self.start_ms + ts_s * 1000
        latest = None
        for snap in self.layouts:
            if snap.ts_ms <= ts_ms + 999:
                latest = snap
            else:
                break
        return latest


def _require(payload: dict, key: str, types) -> object:
    if key not in payload:
        raise ValidationError(f"payload missing {key!r}")
    val = payload[key]
    if not isinstance(val, types):
        raise ValidationError(f"payload field {key!r} has wrong type")
    return val


_NUM = (int, float)


def validate_event(kind: str, payload: dict) -> dict:
    """Check a wire payload against its kind's schema; returns the payload."""
    if kind not in EVENT_KINDS:
        raise ValidationError(f"unknown event kind {kind!r}")
    if not isinstance(payload, dict):
        raise ValidationError("payload must be an object")
    if kind == SAMPLE:
        _require(payload, "y", _NUM)
        vw = _require(payload, "vw", _NUM)
        vh = _require(payload, "vh", _NUM)
        _require(payload, "mx", _NUM)
        _require(payload, "my", _NUM)
        vis = _require(payload, "vis", bool)
        if vis and (vw <= 0 or vh <= 0):
            raise ValidationError("visible sample must have a positive viewport")
    elif kind == LAYOUT:
        secs = _require(payload, "sections", list)
        for entry in secs:
            if not isinstance(entry, dict):
                raise ValidationError("layout sections must be objects")
            _require(entry, "id", str)
            _require(entry, "top", _NUM)
            _require(entry, "height", _NUM)
        _require(payload, "doc_h", _NUM)
        _require(payload, "vw", _NUM)
        _require(payload, "vh", _NUM)
    elif kind == SCROLL:
        _require(payload, "y", _NUM)
    elif kind == MOUSEMOVE:
        _require(payload, "x", _NUM)
        _require(payload, "y", _NUM)
    elif kind == CLICK:
        _require(payload, "section_id", str)
    elif kind in (RELEVANCE_ON, RELEVANCE_OFF):
        _require(payload, "section_id", str)
    elif kind == COMMENT:
        _require(payload, "section_id", str)
        text = _require(payload, "text", str)
        if not text.strip():
            raise ValidationError("comment text must be nonempty")
    return payload


def sessionize(events: list[Event]) -> list[ReadingSession]:
    """Rebuild reading sessions for one recipient+campaign event stream."""
    evs = sorted(events, key=lambda e: (e.ts_ms, e.cid))
    sessions: list[ReadingSession] = []
    current: list[Event] | None = None
    for ev in evs:
        if current is not None:
            gap = ev.ts_ms - current[-1].ts_ms
            if ev.kind == OPEN or gap > SESSION_TIMEOUT_MS:
                sessions.append(_build_session(current))
                current = None
        if current is None:
            if ev.kind != OPEN:
                continue  # events outside a session are dropped
            current = [ev]
            continue
        current.append(ev)
        if ev.kind == CLOSE:
            sessions.append(_build_session(current))
            current = None
    if current is not None:
        sessions.append(_build_session(current))
    return sessions


def _build_session(events: list[Event]) -> ReadingSession:
    start = events[0].ts_ms
    close_ts = next((e.ts_ms for e in events if e.kind == CLOSE), None)
    end = close_ts if close_ts is not None else events[-1].ts_ms + 1000
    n_frames = max(0, math.ceil((end - start) / 1000))

    samples = [e for e in events if e.kind == SAMPLE]
    sample_ts = [e.ts_ms for e in samples]
    vis_events = [(e.ts_ms, e.kind == VISIBLE) for e in events if e.kind in (VISIBLE, HIDDEN)]
    vis_ts = [t for t, _ in vis_events]
    interactions = sorted(e.ts_ms for e in events if e.kind in _INTERACTION_KINDS)

    frames: list[FrameSample] = []
    idle_flags: list[bool] = []
    for s in range(n_frames):
        frame_ts = start + s * 1000
        idx = bisect_right(sample_ts, frame_ts + 999) - 1
        if idx < 0:
            frame = FrameSample(s, 0.0, (0.0, 0.0), (0.0, 0.0), False)
        else:
            p = samples[idx].payload
            gap = frame_ts - sample_ts[idx]
            visible = bool(p["vis"]) and gap <= CARRY_FORWARD_MS
            if visible and vis_ts:
                vidx = bisect_right(vis_ts, frame_ts) - 1
                if vidx >= 0:
                    visible = vis_events[vidx][1]
            frame = FrameSample(
                s,
                float(p["y"]),
                (float(p["vw"]), float(p["vh"])),
                (float(p["mx"]), float(p["my"])),
                visible,
            )
        frames.append(frame)
        iidx = bisect_right(interactions, frame_ts) - 1
        last_inter = interactions[iidx] if iidx >= 0 else start
        idle_flags.append(frame_ts - max(last_inter, start) >= IDLE_AFTER_MS)

    idle_spans: list[tuple[int, int]] = []
    span_start: int | None = None
    for s, idle in enumerate(idle_flags):
        if idle and span_start is None:
            span_start = start + s * 1000
        elif not idle and span_start is not None:
            idle_spans.append((span_start, start + s * 1000))
            span_start = None
    if span_start is not None:
        idle_spans.append((span_start, start + n_frames * 1000))

    layouts = tuple(
        LayoutSnapshot(
            ts_ms=e.ts_ms,
            sections=tuple(
                (sec["id"], float(sec["top"]), float(sec["height"]))
                for sec in e.payload["sections"]
            ),
            doc_height=float(e.payload["doc_h"]),
            viewport=(float(e.payload["vw"]), float(e.payload["vh"])),
        )
        for e in events
        if e.kind == LAYOUT
    )
    clicks = tuple(
        Click(e.ts_ms, e.payload["section_id"], e.payload.get("url", ""))
        for e in events
        if e.kind == CLICK
    )
    return ReadingSession(
        recipient_id=events[0].recipient_id,
        campaign_id=events[0].campaign_id,
        start_ms=start,
        end_ms=end,
        frames=tuple(frames),
        layouts=layouts,
        clicks=clicks,
        idle_spans=tuple(idle_spans),
        idle_flags=tuple(idle_flags),
        scroll_ts_ms=tuple(e.ts_ms for e in events if e.kind == SCROLL),
        mouse_moves=tuple(
            (e.ts_ms, float(e.payload["x"]), float(e.payload["y"]))
            for e in events
            if e.kind == MOUSEMOVE
        ),
    )


def active_time(session: ReadingSession) -> int:
    """Visible, non-idle frame-seconds in the session."""
    return sum(
        1 for frame, idle in zip(session.frames, session.idle_flags) if frame.visible and not idle
    )
