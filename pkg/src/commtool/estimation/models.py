"""Reading-probability models: heuristics, logistic, and the two-tower nets.

Forward/backward passes are explicit numpy; parameters live in one flat
float64 vector so training and finite-difference checks share a single
interface. Two-tower variants merge towers by elementwise multiply and the
per-timestamp heads end in a sigmoid, so p is always inside [0, 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, ValidationError
from .features import (
    BASELINE_COLS,
    FEATURE_ORDER,
    MSG_USER_COLS,
    N_FEATURES,
    PATTERN_COLS,
    SESSIONAL_MSG_FEATURES,
    SESSIONAL_PATTERN_FEATURES,
)

BASELINE_VARIANTS = ("baseline1", "baseline2", "baseline3")
TIMESTEP_VARIANTS = BASELINE_VARIANTS + (
    "logistic",
    "nn",
    "baseline_nn",
    "pattern_nn",
    "pattern_baseline_nn",
)
SESSIONAL_VARIANTS = ("sessional_nn", "category_nn")
ALL_VARIANTS = TIMESTEP_VARIANTS + SESSIONAL_VARIANTS
TRAINABLE_VARIANTS = tuple(v for v in ALL_VARIANTS if v not in BASELINE_VARIANTS)

TOWER_WIDTHS = (16, 8)


@dataclass(frozen=True)
class Architecture:
    kind: str  # "column" | "chain" | "two_tower"
    in_a: int = 0
    in_b: int = 0
    widths: tuple[int, ...] = TOWER_WIDTHS
    out_dim: int = 1
    out_act: str = "sigmoid"  # sigmoid | relu | softmax
    column: int = -1  # for baseline passthrough variants

    def layer_shapes(self) -> list[tuple[tuple[int, int], tuple[int]]]:
        """(W, b) shapes in packing order."""
        shapes: list[tuple[tuple[int, int], tuple[int]]] = []

        def chain(in_dim: int, dims: tuple[int, ...]) -> None:
            prev = in_dim
            for d in dims:
                shapes.append(((d, prev), (d,)))
                prev = d

        if self.kind == "column":
            return shapes
        if self.kind == "chain":
            chain(self.in_a, self.widths + (self.out_dim,))
        elif self.kind == "two_tower":
            chain(self.in_a, self.widths)
            chain(self.in_b, self.widths)
            shapes.append(((self.out_dim, self.widths[-1]), (self.out_dim,)))
        else:
            raise ValidationError(f"unknown architecture kind {self.kind!r}")
        return shapes

    def n_params(self) -> int:
        return sum(int(np.prod(w)) + int(np.prod(b)) for w, b in self.layer_shapes())


def architecture_for(variant: str) -> Architecture:
    if variant == "logistic":
        return Architecture(kind="chain", in_a=len(MSG_USER_COLS), widths=(), out_dim=1)
    if variant == "nn":
        return Architecture(kind="chain", in_a=len(MSG_USER_COLS))
    if variant == "baseline_nn":
        return Architecture(kind="chain", in_a=len(BASELINE_COLS))
    if variant == "pattern_nn":
        return Architecture(kind="two_tower", in_a=len(MSG_USER_COLS), in_b=len(PATTERN_COLS))
    if variant == "pattern_baseline_nn":
        return Architecture(kind="two_tower", in_a=len(BASELINE_COLS), in_b=len(PATTERN_COLS))
    if variant == "sessional_nn":
        return Architecture(
            kind="two_tower",
            in_a=len(SESSIONAL_MSG_FEATURES),
            in_b=len(SESSIONAL_PATTERN_FEATURES),
            out_act="relu",
        )
    if variant == "category_nn":
        return Architecture(
            kind="two_tower",
            in_a=len(SESSIONAL_MSG_FEATURES),
            in_b=len(SESSIONAL_PATTERN_FEATURES),
            out_dim=3,
            out_act="softmax",
        )
    if variant in BASELINE_VARIANTS:
        return Architecture(kind="column", column=BASELINE_COLS[int(variant[-1]) - 1])
    raise ValidationError(f"unknown model variant {variant!r}")


def input_columns(variant: str) -> tuple[tuple[int, ...], tuple[int, ...] | None]:
    """(tower A columns, tower B columns or None) within the 22-wide vector."""
    if variant in ("logistic", "nn"):
        return MSG_USER_COLS, None
    if variant == "baseline_nn":
        return BASELINE_COLS, None
    if variant == "pattern_nn":
        return MSG_USER_COLS, PATTERN_COLS
    if variant == "pattern_baseline_nn":
        return BASELINE_COLS, PATTERN_COLS
    raise ValidationError(f"{variant!r} does not consume per-timestamp features")


# Click-gap features are stored in seconds (capped at 600); models consume
# them rescaled to [0, 1] so one input column cannot dominate the step size.
_GAP_FEATURE_COLS = (
    FEATURE_ORDER.index("secs_since_msg_click"),
    FEATURE_ORDER.index("secs_since_any_click"),
)
_INPUT_SCALE = np.ones(N_FEATURES)
for _col in _GAP_FEATURE_COLS:
    _INPUT_SCALE[_col] = 1.0 / 600.0


def slice_inputs(variant: str, X: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    """Model input matrices from 22-wide feature rows, gap columns rescaled."""
    scaled = np.asarray(X, dtype=float) * _INPUT_SCALE
    cols_a, cols_b = input_columns(variant)
    return scaled[:, cols_a], (scaled[:, cols_b] if cols_b is not None else None)


@dataclass
class Model:
    variant: str
    arch: Architecture
    params: np.ndarray
    seed: int = 0
    feature_order: tuple[str, ...] = FEATURE_ORDER
    history: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "variant": self.variant,
                "arch": {
                    "kind": self.arch.kind,
                    "in_a": self.arch.in_a,
                    "in_b": self.arch.in_b,
                    "widths": list(self.arch.widths),
                    "out_dim": self.arch.out_dim,
                    "out_act": self.arch.out_act,
                    "column": self.arch.column,
                },
                "weights": self.params.tolist(),
                "seed": self.seed,
                "feature_order": list(self.feature_order),
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "Model":
        d = json.loads(text)
        arch = Architecture(
            kind=d["arch"]["kind"],
            in_a=d["arch"]["in_a"],
            in_b=d["arch"]["in_b"],
            widths=tuple(d["arch"]["widths"]),
            out_dim=d["arch"]["out_dim"],
            out_act=d["arch"]["out_act"],
            column=d["arch"].get("column", -1),
        )
        model = Model(
            variant=d["variant"],
            arch=arch,
            params=np.asarray(d["weights"], dtype=float),
            seed=d.get("seed", 0),
            feature_order=tuple(d["feature_order"]),
        )
        if arch.n_params() != model.params.size:
            raise ShapeError("weight count does not match architecture")
        return model


def init_params(arch: Architecture, seed: int) -> np.ndarray:
    """Uniform +-1/sqrt(fan_in) init, deterministic per seed."""
    rng = np.random.default_rng(seed)
    chunks: list[np.ndarray] = []
    for w_shape, b_shape in arch.layer_shapes():
        bound = 1.0 / np.sqrt(w_shape[1]) if w_shape[1] > 0 else 1.0
        chunks.append(rng.uniform(-bound, bound, size=int(np.prod(w_shape))))
        chunks.append(np.zeros(int(np.prod(b_shape))))
    return np.concatenate(chunks) if chunks else np.empty(0)


def new_model(variant: str, seed: int = 0) -> Model:
    arch = architecture_for(variant)
    return Model(variant=variant, arch=arch, params=init_params(arch, seed), seed=seed)


def _unpack(arch: Architecture, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    layers = []
    pos = 0
    for w_shape, b_shape in arch.layer_shapes():
        wn = int(np.prod(w_shape))
        bn = int(np.prod(b_shape))
        W = flat[pos : pos + wn].reshape(w_shape)
        b = flat[pos + wn : pos + wn + bn]
        layers.append((W, b))
        pos += wn + bn
    if pos != flat.size:
        raise ShapeError("parameter vector length mismatch")
    return layers


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=1, keepdims=True)


def _chain_forward(layers, x, hidden_relu=True):
    """Affine/ReLU chain; returns (logits, cache). The last layer is linear."""
    cache = []
    h = x
    for i, (W, b) in enumerate(layers):
        z = h @ W.T + b
        cache.append((h, z))
        h = _relu(z) if (hidden_relu and i < len(layers) - 1) else z
    return h, cache


def _chain_backward(layers, cache, dz_last):
    """Backprop dz of the last affine through the chain; returns grads and dx."""
    grads = []
    dz = dz_last
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        h_in, z = cache[i]
        dW = dz.T @ h_in
        db = dz.sum(axis=0)
        grads.append((dW, db))
        if i > 0:
            dh = dz @ W
            _, z_prev = cache[i - 1]
            dz = dh * (z_prev > 0)
    grads.reverse()
    dx = dz @ layers[0][0] if layers else None
    return grads, dx


def _forward_logits(arch: Architecture, params: np.ndarray, xa: np.ndarray, xb=None):
    """Pre-activation outputs plus caches for backprop."""
    layers = _unpack(arch, params)
    if arch.kind == "chain":
        z, cache = _chain_forward(layers, xa)
        return z, ("chain", layers, cache)
    n_tower = len(arch.widths)
    la, lb, head = layers[:n_tower], layers[n_tower : 2 * n_tower], layers[2 * n_tower :]
    ha_z, ca = _chain_forward(la, xa, hidden_relu=True)
    ha = _relu(ha_z)
    hb_z, cb = _chain_forward(lb, xb, hidden_relu=True)
    hb = _relu(hb_z)
    merged = ha * hb
    z, ch = _chain_forward(head, merged)
    return z, ("two_tower", layers, (la, ca, ha_z, lb, cb, hb_z, head, ch, ha, hb))


def _backward_logits(state, dz: np.ndarray) -> np.ndarray:
    kind = state[0]
    if kind == "chain":
        _, layers, cache = state
        grads, _ = _chain_backward(layers, cache, dz)
        return _flatten_grads(grads)
    _, _, (la, ca, ha_z, lb, cb, hb_z, head, ch, ha, hb) = state
    head_grads, dmerged = _chain_backward(head, ch, dz)
    dha = dmerged * hb * (ha_z > 0)
    dhb = dmerged * ha * (hb_z > 0)
    ga, _ = _chain_backward(la, ca, dha)
    gb, _ = _chain_backward(lb, cb, dhb)
    return _flatten_grads(ga + gb + head_grads)


def _flatten_grads(grads) -> np.ndarray:
    return np.concatenate([np.concatenate([dW.ravel(), db.ravel()]) for dW, db in grads])


def _apply_out_act(arch: Architecture, z: np.ndarray) -> np.ndarray:
    if arch.out_act == "sigmoid":
        return _sigmoid(z)
    if arch.out_act == "relu":
        return _relu(z)
    if arch.out_act == "softmax":
        return _softmax(z)
    raise ValidationError(f"unknown output activation {arch.out_act!r}")


def predict_timestep(model: Model, X: np.ndarray) -> np.ndarray:
    """Read probability per feature row; rows are 22-wide FEATURE_ORDER."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != N_FEATURES:
        raise ShapeError(f"expected {N_FEATURES} feature columns, got {X.shape[1]}")
    if model.variant in BASELINE_VARIANTS:
        return X[:, model.arch.column].clip(0.0, 1.0)
    if model.variant in SESSIONAL_VARIANTS:
        raise ValidationError(f"{model.variant} is a per-session model")
    xa, xb = slice_inputs(model.variant, X)
    z, _ = _forward_logits(model.arch, model.params, xa, xb)
    return _apply_out_act(model.arch, z)[:, 0].clip(0.0, 1.0)


def predict_sessional(model: Model, XS: np.ndarray) -> np.ndarray:
    """Sessional-model outputs: time (sessional_nn) or class probs (category_nn)."""
    XS = np.atleast_2d(np.asarray(XS, dtype=float))
    expected = model.arch.in_a + model.arch.in_b
    if XS.shape[1] != expected:
        raise ShapeError(f"expected {expected} sessional columns, got {XS.shape[1]}")
    xa = XS[:, : model.arch.in_a]
    xb = XS[:, model.arch.in_a :]
    z, _ = _forward_logits(model.arch, model.params, xa, xb)
    out = _apply_out_act(model.arch, z)
    return out[:, 0] if model.arch.out_dim == 1 else out


def loss_and_grad(
    model: Model,
    params: np.ndarray,
    xa: np.ndarray,
    xb: np.ndarray | None,
    y: np.ndarray,
    pos_weight: float = 1.0,
) -> tuple[float, np.ndarray]:
    """Mean loss and flat gradient for one batch.

    Per-timestamp variants use weighted binary cross-entropy on logits;
    sessional_nn uses absolute time error through its ReLU head; category_nn
    uses 3-class cross-entropy.
    """
    arch = model.arch
    z, state = _forward_logits(arch, params, xa, xb)
    n = xa.shape[0]
    if arch.out_act == "sigmoid":
        zf = z[:, 0]
        loss = float(
            np.mean(
                pos_weight * y * np.logaddexp(0.0, -zf) + (1.0 - y) * np.logaddexp(0.0, zf)
            )
        )
        sig = _sigmoid(zf)
        dz = (pos_weight * y * (sig - 1.0) + (1.0 - y) * sig) / n
        grad = _backward_logits(state, dz[:, None])
    elif arch.out_act == "relu":
        out = _relu(z[:, 0])
        resid = out - y
        loss = float(np.mean(np.abs(resid)))
        dout = np.sign(resid) / n
        dz = (dout * (z[:, 0] > 0))[:, None]
        grad = _backward_logits(state, dz)
    elif arch.out_act == "softmax":
        labels = y.astype(int)
        shifted = z - z.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        loss = float(-np.mean(log_probs[np.arange(n), labels]))
        dz = np.exp(log_probs)
        dz[np.arange(n), labels] -= 1.0
        dz /= n
        grad = _backward_logits(state, dz)
    else:
        raise ValidationError(f"no loss for activation {arch.out_act!r}")
    return loss, grad
