"""Datasets and deterministic mini-batch training for the reading models.

The labeled per-second format is one row per (section, active second) with a
binary read label; sessional datasets are derived from it by grouping. All
shuffles and inits derive from the configured seed, so two runs with the same
inputs produce identical weights.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainError, ValidationError
from .features import FEATURE_ORDER, N_FEATURES
from .models import (
    Model,
    SESSIONAL_VARIANTS,
    architecture_for,
    init_params,
    slice_inputs,
    loss_and_grad,
)

CSV_HEADER = ["user_id", "session_id", "t_s", "section_id", "label", *FEATURE_ORDER]


@dataclass
class TimestepDataset:
    """Per-(section, second) rows with binary read labels."""

    user_ids: np.ndarray  # (n,) object
    session_ids: np.ndarray  # (n,) object
    ts_s: np.ndarray  # (n,) int
    section_ids: np.ndarray  # (n,) object
    labels: np.ndarray  # (n,) float 0/1
    X: np.ndarray  # (n, 22)
    word_counts: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.labels)

    def users(self) -> list[str]:
        return sorted(set(self.user_ids.tolist()))

    def sessions(self) -> list[tuple[str, str]]:
        return sorted({(u, s) for u, s in zip(self.user_ids.tolist(), self.session_ids.tolist())})

    def subset(self, mask: np.ndarray) -> "TimestepDataset":
        return TimestepDataset(
            user_ids=self.user_ids[mask],
            session_ids=self.session_ids[mask],
            ts_s=self.ts_s[mask],
            section_ids=self.section_ids[mask],
            labels=self.labels[mask],
            X=self.X[mask],
            word_counts=self.word_counts,
        )

    def session_mask(self, keys: set[tuple[str, str]]) -> np.ndarray:
        return np.fromiter(
            (
                (u, s) in keys
                for u, s in zip(self.user_ids.tolist(), self.session_ids.tolist())
            ),
            dtype=bool,
            count=len(self),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(CSV_HEADER)
        for i in range(len(self)):
            writer.writerow(
                [
                    self.user_ids[i],
                    self.session_ids[i],
                    int(self.ts_s[i]),
                    self.section_ids[i],
                    int(self.labels[i]),
                    *(repr(float(v)) for v in self.X[i]),
                ]
            )
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str, word_counts: dict[str, int] | None = None) -> "TimestepDataset":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise ValidationError("labeled dataset CSV header mismatch")
        users, sessions, ts, sections, labels, rows = [], [], [], [], [], []
        for row in reader:
            if not row:
                continue
            users.append(row[0])
            sessions.append(row[1])
            ts.append(int(row[2]))
            sections.append(row[3])
            labels.append(float(row[4]))
            rows.append([float(v) for v in row[5 : 5 + N_FEATURES]])
        return TimestepDataset(
            user_ids=np.array(users, dtype=object),
            session_ids=np.array(sessions, dtype=object),
            ts_s=np.array(ts, dtype=int),
            section_ids=np.array(sections, dtype=object),
            labels=np.array(labels, dtype=float),
            X=np.array(rows, dtype=float) if rows else np.empty((0, N_FEATURES)),
            word_counts=dict(word_counts or {}),
        )


@dataclass
class SessionalDataset:
    """One row per (user, session, section); XS = 4 message + 4 pattern features."""

    user_ids: np.ndarray
    session_ids: np.ndarray
    section_ids: np.ndarray
    XS: np.ndarray  # (n, 8)
    true_times: np.ndarray  # (n,) seconds
    classes: np.ndarray  # (n,) int read level index

    def __len__(self) -> int:
        return len(self.true_times)


def build_sessional_dataset(ds: TimestepDataset, classify) -> SessionalDataset:
    """Group a per-second dataset into per-(session, section) rows.

    `classify` maps (time_s, word_count) to a level index; unknown word counts
    default to 0 words.
    """
    keys: dict[tuple[str, str, str], list[int]] = {}
    for i in range(len(ds)):
        keys.setdefault((ds.user_ids[i], ds.session_ids[i], ds.section_ids[i]), []).append(i)
    users, sessions, sections, xs_rows, times, classes = [], [], [], [], [], []
    last_row_of_session: dict[tuple[str, str], int] = {}
    for i in range(len(ds)):
        k = (ds.user_ids[i], ds.session_ids[i])
        j = last_row_of_session.get(k)
        if j is None or ds.ts_s[i] >= ds.ts_s[j]:
            last_row_of_session[k] = i
    for (user, session, section), idxs in sorted(keys.items()):
        rows = ds.X[idxs]
        clicked = 1.0 if (rows[:, 2] < 600.0).any() else 0.0
        msg = [rows[:, 1].mean(), rows[:, 0].mean(), clicked, float(len(idxs))]
        last = ds.X[last_row_of_session[(user, session)]]
        pattern = [last[12], last[13], last[17], last[18]]
        true_time = float(ds.labels[idxs].sum())
        users.append(user)
        sessions.append(session)
        sections.append(section)
        xs_rows.append(msg + pattern)
        times.append(true_time)
        classes.append(classify(true_time, ds.word_counts.get(section, 0)))
    return SessionalDataset(
        user_ids=np.array(users, dtype=object),
        session_ids=np.array(sessions, dtype=object),
        section_ids=np.array(sections, dtype=object),
        XS=np.array(xs_rows, dtype=float) if xs_rows else np.empty((0, 8)),
        true_times=np.array(times, dtype=float),
        classes=np.array(classes, dtype=int),
    )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 5
    pos_weight: float = 20.0
    seed: int = 0
    val_fraction: float = 1.0 / 8.0  # train:validation 7:1 when no explicit split


def _split_train_val(
    ds: TimestepDataset, cfg: TrainConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Session-level 7:1 split; returns boolean masks (train, val)."""
    sessions = ds.sessions()
    if len(sessions) < 2:
        n = len(ds)
        return np.ones(n, dtype=bool), np.ones(n, dtype=bool)
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(sessions))
    n_val = max(1, round(len(sessions) * cfg.val_fraction))
    val_keys = {sessions[i] for i in order[:n_val]}
    val_mask = ds.session_mask(val_keys)
    return ~val_mask, val_mask


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for lo in range(0, n, batch_size):
        yield order[lo : lo + batch_size]


def train_model(
    variant: str,
    dataset: TimestepDataset | SessionalDataset,
    config: TrainConfig | None = None,
    validation: TimestepDataset | SessionalDataset | None = None,
) -> Model:
    """Fit one trainable variant with Adam; deterministic per config.seed.

    Per-timestamp variants minimize weighted binary cross-entropy (positive
    weight from config); sessional_nn minimizes absolute time error;
    category_nn minimizes 3-class cross-entropy. Stops early after
    config.patience epochs without validation improvement and restores the
    best weights.
    """
    cfg = config or TrainConfig()
    if len(dataset) == 0:
        raise TrainError("empty training dataset")
    sessional = variant in SESSIONAL_VARIANTS
    if sessional:
        if not isinstance(dataset, SessionalDataset):
            raise ValidationError(f"{variant} trains on a SessionalDataset")
        xa_all = dataset.XS[:, :4]
        xb_all = dataset.XS[:, 4:]
        y_all = dataset.true_times if variant == "sessional_nn" else dataset.classes.astype(float)
        if validation is not None:
            va, vb = validation.XS[:, :4], validation.XS[:, 4:]
            vy = (
                validation.true_times
                if variant == "sessional_nn"
                else validation.classes.astype(float)
            )
        else:
            va, vb, vy = xa_all, xb_all, y_all
        train_idx = np.arange(len(dataset))
    else:
        if not isinstance(dataset, TimestepDataset):
            raise ValidationError(f"{variant} trains on a TimestepDataset")
        if validation is None:
            train_mask, val_mask = _split_train_val(dataset, cfg)
            train_ds, val_ds = dataset.subset(train_mask), dataset.subset(val_mask)
        else:
            train_ds, val_ds = dataset, validation
        if len(train_ds) == 0 or len(val_ds) == 0:
            raise TrainError("train/validation split left an empty side")
        xa_all, xb_all = slice_inputs(variant, train_ds.X)
        y_all = train_ds.labels
        va, vb = slice_inputs(variant, val_ds.X)
        vy = val_ds.labels
        train_idx = np.arange(len(train_ds))

    arch = architecture_for(variant)
    params = init_params(arch, cfg.seed)
    model = Model(variant=variant, arch=arch, params=params, seed=cfg.seed)
    pos_w = cfg.pos_weight if arch.out_act == "sigmoid" else 1.0

    m = np.zeros_like(params)
    v = np.zeros_like(params)
    step = 0
    rng = np.random.default_rng(cfg.seed + 1)
    best_loss = np.inf
    best_params = params.copy()
    bad_epochs = 0
    history: list[dict] = []

    def batch_inputs(idx):
        ba = xa_all[idx]
        bb = xb_all[idx] if xb_all is not None else None
        return ba, bb, y_all[idx]

    for epoch in range(1, cfg.max_epochs + 1):
        epoch_loss = 0.0
        n_seen = 0
        for idx in _batches(len(train_idx), cfg.batch_size, rng):
            ba, bb, by = batch_inputs(train_idx[idx])
            loss, grad = loss_and_grad(model, params, ba, bb, by, pos_weight=pos_w)
            step += 1
            m = cfg.beta1 * m + (1 - cfg.beta1) * grad
            v = cfg.beta2 * v + (1 - cfg.beta2) * grad * grad
            m_hat = m / (1 - cfg.beta1**step)
            v_hat = v / (1 - cfg.beta2**step)
            params = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
            epoch_loss += loss * len(idx)
            n_seen += len(idx)
        val_loss, _ = loss_and_grad(model, params, va, vb, vy, pos_weight=pos_w)
        history.append({"epoch": epoch, "train_loss": epoch_loss / n_seen, "val_loss": val_loss})
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = params.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break

    model.params = best_params
    model.history = {"epochs_run": len(history), "log": history, "best_val_loss": best_loss}
    return model
