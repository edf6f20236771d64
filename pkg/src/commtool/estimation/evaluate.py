"""Session-level reading estimates, read levels, and model evaluation.

Read levels split on reading speed: over 400 words/min is a skip, 200-400 is
a skim, at or under 200 is read-in-detail. Percentage error is reported for
messages read at least 10 s, absolute error for shorter ones; metrics with an
empty denominator come back absent (None), never as a fake zero.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..errors import CVError, ValidationError
from ..ingest import LayoutSnapshot, ReadingSession
from .features import baseline_p, build_features
from .models import BASELINE_VARIANTS, Model, SESSIONAL_VARIANTS, new_model, predict_sessional, predict_timestep
from .training import (
    TimestepDataset,
    TrainConfig,
    build_sessional_dataset,
    train_model,
)

SKIP = "skip"
SKIM = "skim"
DETAIL = "detail"
LEVELS = (SKIP, SKIM, DETAIL)

DETAIL_MAX_WPM = 200.0
SKIM_MAX_WPM = 400.0

PER_ERROR_MIN_TRUE_S = 10.0


def classify_read_level(reading_time_s: float, word_count: int) -> str:
    """Skip / skim / detail from implied words-per-minute."""
    if reading_time_s < 0 or word_count < 0:
        raise ValidationError("reading time and word count must be >= 0")
    if reading_time_s == 0:
        return SKIP
    wpm = 60.0 * word_count / reading_time_s
    if wpm <= DETAIL_MAX_WPM:
        return DETAIL
    if wpm <= SKIM_MAX_WPM:
        return SKIM
    return SKIP


def level_index(level: str) -> int:
    return LEVELS.index(level)


@dataclass(frozen=True)
class MessageEstimate:
    section_id: str
    reading_time_s: float
    read_level: str


def estimate_session(
    model: Model,
    session: ReadingSession,
    word_counts: dict[str, int],
    layout: LayoutSnapshot | None = None,
) -> list[MessageEstimate]:
    """Estimated reading time and level per section for one session.

    Sums the model's per-second read probability over the session's active
    (visible, non-idle) seconds.
    """
    times: dict[str, float] = {}
    order: list[str] = []
    snap = layout or (session.layouts[-1] if session.layouts else None)
    if snap is not None:
        for section_id, _, _ in snap.sections:
            times[section_id] = 0.0
            order.append(section_id)

    if model.variant in BASELINE_VARIANTS:
        variant_no = int(model.variant[-1])
        for frame, idle in zip(session.frames, session.idle_flags):
            if idle or not frame.visible:
                continue
            fsnap = layout or session.layout_at(frame.ts_s)
            if fsnap is None:
                continue
            p = baseline_p(variant_no, frame, fsnap)
            for m, (section_id, _, _) in enumerate(fsnap.sections):
                times[section_id] = times.get(section_id, 0.0) + float(p[m])
                if section_id not in order:
                    order.append(section_id)
    else:
        table = build_features(session, layout)
        if len(table):
            mask = table.active
            p = predict_timestep(model, table.X[mask]) if mask.any() else np.empty(0)
            for section_id, prob in zip(table.section_ids[mask], p):
                times[section_id] = times.get(section_id, 0.0) + float(prob)
                if section_id not in order:
                    order.append(section_id)

    return [
        MessageEstimate(
            section_id=sid,
            reading_time_s=times[sid],
            read_level=classify_read_level(times[sid], word_counts.get(sid, 0)),
        )
        for sid in order
    ]


@dataclass
class LabeledSession:
    """Ground-truth rows for one reading session of one user."""

    user_id: str
    session_id: str
    section_ids: np.ndarray  # (n,) object
    X: np.ndarray  # (n, 22)
    labels: np.ndarray  # (n,) 0/1 read indicator
    word_counts: dict[str, int]

    def true_times(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for sid in sorted(set(self.section_ids.tolist())):
            out[sid] = float(self.labels[self.section_ids == sid].sum())
        return out


def labeled_sessions_from_dataset(ds: TimestepDataset) -> list[LabeledSession]:
    out = []
    for user, session in ds.sessions():
        mask = (ds.user_ids == user) & (ds.session_ids == session)
        out.append(
            LabeledSession(
                user_id=user,
                session_id=session,
                section_ids=ds.section_ids[mask],
                X=ds.X[mask],
                labels=ds.labels[mask],
                word_counts=ds.word_counts,
            )
        )
    return out


@dataclass
class EvalReport:
    per_error: float | None = None
    abs_error: float | None = None
    accuracy: float | None = None
    skim_precision: float | None = None
    skim_recall: float | None = None
    detail_precision: float | None = None
    detail_recall: float | None = None
    read_precision: float | None = None
    read_recall: float | None = None
    n_messages: int = 0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _safe_ratio(num: float, den: float) -> float | None:
    return num / den if den > 0 else None


def _report_from_pairs(pairs: list[tuple[float, float, str, str]]) -> EvalReport:
    """pairs: (true_time, est_time or nan, true_level, est_level)."""
    per_terms, abs_terms = [], []
    tp = {lv: 0 for lv in ("skim", "detail", "read")}
    est_n = {lv: 0 for lv in ("skim", "detail", "read")}
    true_n = {lv: 0 for lv in ("skim", "detail", "read")}
    correct = 0
    for true_t, est_t, true_lv, est_lv in pairs:
        if not np.isnan(est_t):
            if true_t >= PER_ERROR_MIN_TRUE_S:
                per_terms.append(abs(true_t - est_t) / true_t)
            else:
                abs_terms.append(abs(true_t - est_t))
        if est_lv == true_lv:
            correct += 1
        for lv in ("skim", "detail"):
            if est_lv == lv:
                est_n[lv] += 1
            if true_lv == lv:
                true_n[lv] += 1
            if est_lv == lv and true_lv == lv:
                tp[lv] += 1
        est_read = est_lv in (SKIM, DETAIL)
        true_read = true_lv in (SKIM, DETAIL)
        est_n["read"] += est_read
        true_n["read"] += true_read
        tp["read"] += est_read and true_read
    n = len(pairs)
    return EvalReport(
        per_error=float(np.mean(per_terms)) if per_terms else None,
        abs_error=float(np.mean(abs_terms)) if abs_terms else None,
        accuracy=_safe_ratio(correct, n),
        skim_precision=_safe_ratio(tp["skim"], est_n["skim"]),
        skim_recall=_safe_ratio(tp["skim"], true_n["skim"]),
        detail_precision=_safe_ratio(tp["detail"], est_n["detail"]),
        detail_recall=_safe_ratio(tp["detail"], true_n["detail"]),
        read_precision=_safe_ratio(tp["read"], est_n["read"]),
        read_recall=_safe_ratio(tp["read"], true_n["read"]),
        n_messages=n,
    )


def evaluate_model(model: Model, sessions: list[LabeledSession]) -> EvalReport:
    """Reading-time error and read-level agreement against labeled sessions."""
    pairs: list[tuple[float, float, str, str]] = []
    if model.variant in SESSIONAL_VARIANTS:
        ds = _sessions_to_dataset(sessions)
        sess_ds = build_sessional_dataset(
            ds, lambda t, w: level_index(classify_read_level(t, w))
        )
        preds = predict_sessional(model, sess_ds.XS) if len(sess_ds) else np.empty(0)
        for i in range(len(sess_ds)):
            words = ds.word_counts.get(sess_ds.section_ids[i], 0)
            true_t = float(sess_ds.true_times[i])
            true_lv = classify_read_level(true_t, words)
            if model.variant == "sessional_nn":
                est_t = float(preds[i])
                est_lv = classify_read_level(max(est_t, 0.0), words)
                pairs.append((true_t, est_t, true_lv, est_lv))
            else:
                est_lv = LEVELS[int(np.argmax(preds[i]))]
                pairs.append((true_t, float("nan"), true_lv, est_lv))
    else:
        for sess in sessions:
            true_times = sess.true_times()
            p = predict_timestep(model, sess.X) if len(sess.X) else np.empty(0)
            est_times: dict[str, float] = {sid: 0.0 for sid in true_times}
            for sid, prob in zip(sess.section_ids.tolist(), p):
                est_times[sid] += float(prob)
            for sid in sorted(true_times):
                words = sess.word_counts.get(sid, 0)
                true_t = true_times[sid]
                est_t = est_times[sid]
                pairs.append(
                    (
                        true_t,
                        est_t,
                        classify_read_level(true_t, words),
                        classify_read_level(est_t, words),
                    )
                )
    return _report_from_pairs(pairs)


def _sessions_to_dataset(sessions: list[LabeledSession]) -> TimestepDataset:
    if not sessions:
        return TimestepDataset(
            user_ids=np.empty(0, dtype=object),
            session_ids=np.empty(0, dtype=object),
            ts_s=np.empty(0, dtype=int),
            section_ids=np.empty(0, dtype=object),
            labels=np.empty(0),
            X=np.empty((0, 22)),
        )
    word_counts: dict[str, int] = {}
    for s in sessions:
        word_counts.update(s.word_counts)
    return TimestepDataset(
        user_ids=np.concatenate([np.full(len(s.labels), s.user_id, dtype=object) for s in sessions]),
        session_ids=np.concatenate(
            [np.full(len(s.labels), s.session_id, dtype=object) for s in sessions]
        ),
        ts_s=np.concatenate([np.arange(len(s.labels)) for s in sessions]),
        section_ids=np.concatenate([s.section_ids for s in sessions]),
        labels=np.concatenate([s.labels for s in sessions]),
        X=np.vstack([s.X for s in sessions]),
        word_counts=word_counts,
    )


@dataclass
class CVResult:
    mean: EvalReport
    folds: list[tuple[str, EvalReport]]


def mean_report(reports: list[EvalReport]) -> EvalReport:
    """Unweighted per-field mean; absent fields are skipped, not zeroed."""
    out = EvalReport()
    for f in fields(EvalReport):
        if f.name == "n_messages":
            out.n_messages = sum(r.n_messages for r in reports)
            continue
        vals = [getattr(r, f.name) for r in reports if getattr(r, f.name) is not None]
        if vals:
            setattr(out, f.name, float(np.mean(vals)))
    return out


def cross_validate(
    variant: str, dataset: TimestepDataset, config: TrainConfig | None = None
) -> CVResult:
    """Leave-one-user-out evaluation; train folds split 7:1 by session."""
    cfg = config or TrainConfig()
    users = dataset.users()
    if len(users) < 2:
        raise CVError("cross-validation needs at least 2 users")
    folds: list[tuple[str, EvalReport]] = []
    for user in users:
        test_mask = dataset.user_ids == user
        test_ds = dataset.subset(test_mask)
        train_ds = dataset.subset(~test_mask)
        if variant in BASELINE_VARIANTS:
            model = new_model(variant)
        elif variant in SESSIONAL_VARIANTS:
            sess_train = build_sessional_dataset(
                train_ds, lambda t, w: level_index(classify_read_level(t, w))
            )
            model = train_model(variant, sess_train, cfg)
        else:
            model = train_model(variant, train_ds, cfg)
        folds.append((user, evaluate_model(model, labeled_sessions_from_dataset(test_ds))))
    return CVResult(mean=mean_report([r for _, r in folds]), folds=folds)
