"""Per-(section, second) interaction features and the heuristic baselines.

The feature vector has a fixed 22-column order (FEATURE_ORDER); trained model
files record it so stored weights stay bound to the right columns.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass

import numpy as np

from ..errors import FeatureError
from ..ingest import FrameSample, LayoutSnapshot, ReadingSession

TIME_GAP_CAP_S = 600.0  # "never clicked" encodes as the cap

MSG_USER_FEATURES = (
    "msg_center_offset",
    "msg_window_share",
    "secs_since_msg_click",
    "mouse_x_norm",
    "mouse_y_norm",
    "secs_since_any_click",
)
PATTERN_FEATURES = (
    "mouse_move_freq_2_h",
    "mouse_move_freq_2_v",
    "mouse_move_freq_5_h",
    "mouse_move_freq_5_v",
    "mouse_move_freq_10_h",
    "mouse_move_freq_10_v",
    "mouse_move_freq_inf_h",
    "mouse_move_freq_inf_v",
    "scroll_freq_2",
    "scroll_freq_5",
    "scroll_freq_10",
    "scroll_freq_inf",
    "frac_messages_clicked",
)
BASELINE_FEATURES = ("baseline_p1", "baseline_p2", "baseline_p3")

FEATURE_ORDER = MSG_USER_FEATURES + PATTERN_FEATURES + BASELINE_FEATURES
N_FEATURES = len(FEATURE_ORDER)

MSG_USER_COLS = tuple(range(0, 6))
PATTERN_COLS = tuple(range(6, 19))
BASELINE_COLS = tuple(range(19, 22))

SESSIONAL_MSG_FEATURES = (
    "mean_window_share",
    "mean_center_offset",
    "clicked",
    "visible_seconds",
)
SESSIONAL_PATTERN_FEATURES = (
    "move_freq_h",
    "move_freq_v",
    "scroll_freq",
    "frac_messages_clicked",
)


def section_geometry(
    layout: LayoutSnapshot, frame: FrameSample
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-section (share of viewport, center distance in viewport heights,
    distance from mouse y to section span in px) for one frame."""
    tops = np.array([top for _, top, _ in layout.sections], dtype=float)
    heights = np.array([h for _, _, h in layout.sections], dtype=float)
    vw, vh = frame.viewport
    if vh <= 0:
        n = len(tops)
        return np.zeros(n), np.full(n, np.inf), np.full(n, np.inf)
    lo = np.maximum(tops, frame.scroll_y)
    hi = np.minimum(tops + heights, frame.scroll_y + vh)
    share = np.clip(hi - lo, 0.0, None) / vh
    centers = tops + heights / 2.0
    center_dist = np.abs(centers - (frame.scroll_y + vh / 2.0)) / vh
    mouse_doc_y = frame.scroll_y + frame.mouse[1]
    mouse_dist = np.maximum.reduce(
        [tops - mouse_doc_y, mouse_doc_y - (tops + heights), np.zeros_like(tops)]
    )
    return share, center_dist, mouse_dist


def baseline_p(variant: int, frame: FrameSample, layout: LayoutSnapshot) -> np.ndarray:
    """Heuristic read probabilities per section for one frame.

    1: share of the viewport. 2: share weighted by inverse distance to the
    viewport center, renormalized over visible sections. 3: indicator of the
    section nearest the mouse (ties break toward earlier order). Hidden
    frames give all zeros.
    """
    n = len(layout.sections)
    if not frame.visible:
        return np.zeros(n)
    share, center_dist, mouse_dist = section_geometry(layout, frame)
    if variant == 1:
        return share
    if variant == 2:
        raw = share / (1.0 + center_dist)
        total = raw.sum()
        return raw / total if total > 0 else np.zeros(n)
    if variant == 3:
        p = np.zeros(n)
        if np.isfinite(mouse_dist).any():
            p[int(np.argmin(mouse_dist))] = 1.0  # argmin keeps the earliest tie
        return p
    raise ValueError(f"unknown baseline variant {variant!r}")


@dataclass(frozen=True)
class FeatureTable:
    """Feature rows for one session: one row per (section, visible second)."""

    session_key: tuple[str, str]  # (recipient_id, campaign_id)
    section_ids: np.ndarray  # (n,) object
    ts_s: np.ndarray  # (n,) int
    active: np.ndarray  # (n,) bool — visible and non-idle
    X: np.ndarray  # (n, 22) float

    def __len__(self) -> int:
        return len(self.ts_s)


def _window_count(sorted_ts: list[float], t: float, window: float) -> int:
    return bisect_right(sorted_ts, t) - bisect_left(sorted_ts, t - window + 1e-9)


def build_features(
    session: ReadingSession, layout: LayoutSnapshot | None = None
) -> FeatureTable:
    """Feature rows for every (section, visible second) of a session.

    Raises FeatureError when no layout snapshot is available. Frequencies use
    trailing windows of 2/5/10 s and the whole session; click gaps are capped
    at TIME_GAP_CAP_S.
    """
    if layout is None and not session.layouts:
        raise FeatureError("session has no layout snapshot")
    start = session.start_ms

    def to_s(ts_ms: int) -> float:
        return (ts_ms - start) / 1000.0

    scroll_ts = sorted(to_s(t) for t in session.scroll_ts_ms)
    moves = sorted(session.mouse_moves)
    move_h_ts: list[float] = []
    move_v_ts: list[float] = []
    prev_xy: tuple[float, float] | None = None
    for ts_ms, x, y in moves:
        if prev_xy is not None:
            if x != prev_xy[0]:
                move_h_ts.append(to_s(ts_ms))
            if y != prev_xy[1]:
                move_v_ts.append(to_s(ts_ms))
        else:
            move_h_ts.append(to_s(ts_ms))
            move_v_ts.append(to_s(ts_ms))
        prev_xy = (x, y)

    any_click_ts = sorted(to_s(c.ts_ms) for c in session.clicks)
    clicks_by_section: dict[str, list[float]] = {}
    for c in session.clicks:
        clicks_by_section.setdefault(c.section_id, []).append(to_s(c.ts_ms))
    for ts_list in clicks_by_section.values():
        ts_list.sort()
    click_order: list[tuple[float, str]] = sorted(
        (to_s(c.ts_ms), c.section_id) for c in session.clicks
    )

    rows_sections: list[str] = []
    rows_t: list[int] = []
    rows_active: list[bool] = []
    rows_x: list[np.ndarray] = []

    fixed_layout = layout
    for frame, idle in zip(session.frames, session.idle_flags):
        if not frame.visible:
            continue
        snap = fixed_layout or session.layout_at(frame.ts_s)
        if snap is None:
            continue
        n_sections = len(snap.sections)
        if n_sections == 0:
            continue
        t = float(frame.ts_s)
        share, center_dist, _ = section_geometry(snap, frame)
        p1 = baseline_p(1, frame, snap)
        p2 = baseline_p(2, frame, snap)
        p3 = baseline_p(3, frame, snap)

        vw, vh = frame.viewport
        mouse_x = min(max(frame.mouse[0] / vw, 0.0), 1.0) if vw > 0 else 0.0
        mouse_y = min(max(frame.mouse[1] / vh, 0.0), 1.0) if vh > 0 else 0.0
        k = bisect_right(any_click_ts, t) - 1
        since_any = TIME_GAP_CAP_S if k < 0 else min(t - any_click_ts[k], TIME_GAP_CAP_S)

        elapsed = max(t + 1.0, 1.0)
        move_freqs = []
        for win in (2.0, 5.0, 10.0):
            move_freqs.append(_window_count(move_h_ts, t, win) / win)
            move_freqs.append(_window_count(move_v_ts, t, win) / win)
        move_freqs.append(bisect_right(move_h_ts, t) / elapsed)
        move_freqs.append(bisect_right(move_v_ts, t) / elapsed)
        scroll_freqs = [
            _window_count(scroll_ts, t, 2.0) / 2.0,
            _window_count(scroll_ts, t, 5.0) / 5.0,
            _window_count(scroll_ts, t, 10.0) / 10.0,
            bisect_right(scroll_ts, t) / elapsed,
        ]
        clicked_so_far = {sid for ts, sid in click_order if ts <= t}
        frac_clicked = len(clicked_so_far) / n_sections

        for m, (section_id, _, _) in enumerate(snap.sections):
            sec_clicks = clicks_by_section.get(section_id, ())
            k = bisect_right(sec_clicks, t) - 1
            since_msg = TIME_GAP_CAP_S if k < 0 else min(t - sec_clicks[k], TIME_GAP_CAP_S)
            row = np.empty(N_FEATURES)
            row[0] = min(center_dist[m], 1.0)
            row[1] = share[m]
            row[2] = since_msg
            row[3] = mouse_x
            row[4] = mouse_y
            row[5] = since_any
            row[6:14] = move_freqs
            row[14:18] = scroll_freqs
            row[18] = frac_clicked
            row[19] = p1[m]
            row[20] = p2[m]
            row[21] = p3[m]
            rows_sections.append(section_id)
            rows_t.append(frame.ts_s)
            rows_active.append(not idle)
            rows_x.append(row)

    X = np.vstack(rows_x) if rows_x else np.empty((0, N_FEATURES))
    return FeatureTable(
        session_key=(session.recipient_id, session.campaign_id),
        section_ids=np.array(rows_sections, dtype=object),
        ts_s=np.array(rows_t, dtype=int),
        active=np.array(rows_active, dtype=bool),
        X=X,
    )


def sessional_features(table: FeatureTable) -> dict[str, np.ndarray]:
    """Per-section 8-vector (4 message + 4 pattern sessional features) for one
    session's feature table; rows with active=False are excluded."""
    out: dict[str, np.ndarray] = {}
    mask = table.active
    if not mask.any():
        return out
    X = table.X[mask]
    sections = table.section_ids[mask]
    ts = table.ts_s[mask]
    last_row = X[int(np.argmax(ts))]
    for section_id in sorted(set(sections.tolist())):
        sel = sections == section_id
        rows = X[sel]
        clicked = 1.0 if (rows[:, 2] < TIME_GAP_CAP_S).any() else 0.0
        msg = [rows[:, 1].mean(), rows[:, 0].mean(), clicked, float(sel.sum())]
        pattern = [last_row[12], last_row[13], last_row[17], last_row[18]]
        out[section_id] = np.array(msg + pattern)
    return out
