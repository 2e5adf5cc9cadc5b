"""Character-level neural decoder with hand-written gradients.

Stack: one-hot (or Cartesian) input -> N stacked bidirectional LSTM layers
-> dense affine + ReLU + layer norm + dropout -> linear projection to 27
classes -> per-timestep softmax. Trained with CTC loss plus L2 weight
decay under Adam. Everything runs in float64 numpy so analytic gradients
can be checked against central finite differences.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from . import ctc
from .ctc import BeamConfig, LabelSequence, ProbLattice, beam_decode_topk
from .errors import (
    DivergenceError,
    ModelFormatError,
    ModelShapeError,
    ModelTruncatedError,
    NonFiniteError,
)

LN_EPS = 1e-5
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

MODEL_MAGIC = b"G2T1"
CLASS_ORDER = "abcdefghijklmnopqrstuvwxyz#"  # '#' marks the CTC blank


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 26
    lstm_layers: int = 2
    hidden_dim: int = 48  # paper-scale value is 222; 48 keeps desk runs fast
    dropout_rate: float = 0.3
    dense_dim: int | None = None  # defaults to 2 * hidden_dim
    output_dim: int = 27
    seed: int = 0

    def __post_init__(self):
        if self.dense_dim is None:
            object.__setattr__(self, "dense_dim", 2 * self.hidden_dim)
        if min(self.input_dim, self.lstm_layers, self.hidden_dim, self.dense_dim) < 1:
            raise ValueError("all model dimensions must be >= 1")
        if self.output_dim != ctc.N_CLASSES:
            raise ValueError(f"output_dim must be {ctc.N_CLASSES} (a-z plus blank)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.003  # paper-scale value is 0.01
    weight_decay: float = 1e-5
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if min(self.learning_rate, self.weight_decay) < 0 or self.learning_rate == 0:
            raise ValueError("learning_rate must be > 0 and weight_decay >= 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


def _tensor_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Parameter name -> shape, in canonical (serialization) order."""
    h = cfg.hidden_dim
    shapes: dict[str, tuple[int, ...]] = {}
    in_dim = cfg.input_dim
    for layer in range(cfg.lstm_layers):
        for direction in ("fw", "bw"):
            prefix = f"lstm{layer}_{direction}"
            shapes[f"{prefix}_W"] = (4 * h, in_dim)
            shapes[f"{prefix}_U"] = (4 * h, h)
            shapes[f"{prefix}_b"] = (4 * h,)
        in_dim = 2 * h
    shapes["dense_W"] = (cfg.dense_dim, 2 * h)
    shapes["dense_b"] = (cfg.dense_dim,)
    shapes["ln_gain"] = (cfg.dense_dim,)
    shapes["ln_bias"] = (cfg.dense_dim,)
    shapes["proj_W"] = (cfg.output_dim, cfg.dense_dim)
    shapes["proj_b"] = (cfg.output_dim,)
    return shapes


@dataclass
class ModelParams:
    """All weights of the decoder, keyed by tensor name."""

    config: ModelConfig
    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        expected = _tensor_shapes(self.config)
        if set(self.tensors) != set(expected):
            raise ValueError("tensor names do not match the configuration")
        for name, shape in expected.items():
            t = np.asarray(self.tensors[name], dtype=np.float64)
            if t.shape != shape:
                raise ValueError(f"tensor {name} has shape {t.shape}, expected {shape}")
            if not np.isfinite(t).all():
                raise ValueError(f"tensor {name} contains non-finite values")
            self.tensors[name] = t

    def copy(self) -> ModelParams:
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})


def init_params(cfg: ModelConfig) -> ModelParams:
    """Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor."""
    rng = np.random.default_rng(cfg.seed)
    h = cfg.hidden_dim
    tensors = {}
    for name, shape in _tensor_shapes(cfg).items():
        if name == "ln_gain":
            tensors[name] = np.ones(shape)
        elif name == "ln_bias":
            tensors[name] = np.zeros(shape)
        else:
            if name.endswith("_U"):
                fan_in = h
            elif name.endswith("_W"):
                fan_in = shape[1]
            else:  # biases share their layer's fan-in
                fan_in = shape[0]
            bound = 1.0 / np.sqrt(fan_in)
            tensors[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(cfg, tensors)


def _bilstm_layer_forward(x, w2, u2, b2):
    """Both directions of one layer in a single loop over time.

    Stacked tensors carry the forward direction at index 0 and the backward
    direction (operating on the time-reversed input) at index 1. Gate rows
    are grouped [i, f, o, g] so one tanh evaluates every sigmoid gate via
    sigma(z) = 0.5 * (1 + tanh(z / 2)).
    """
    t_len = len(x)
    h_dim = u2.shape[2]
    xs = np.stack([x, x[::-1]])  # (2, T, in)
    pre = np.matmul(xs, w2.transpose(0, 2, 1)) + b2[:, None, :]  # (2, T, 4h)
    ut2 = u2.transpose(0, 2, 1)
    sig = np.empty((2, t_len, 3 * h_dim))
    gg = np.empty((2, t_len, h_dim))
    cs = np.empty((2, t_len, h_dim))
    tcs = np.empty((2, t_len, h_dim))
    hs = np.empty((2, t_len, h_dim))
    h_prev = np.zeros((2, 1, h_dim))
    c_prev = np.zeros((2, h_dim))
    for t in range(t_len):
        z = pre[:, t, :] + np.matmul(h_prev, ut2)[:, 0, :]
        s = np.tanh(z[:, : 3 * h_dim] * 0.5) * 0.5 + 0.5
        g = np.tanh(z[:, 3 * h_dim :])
        c = s[:, h_dim : 2 * h_dim] * c_prev + s[:, :h_dim] * g
        tc = np.tanh(c)
        ht = s[:, 2 * h_dim :] * tc
        sig[:, t] = s
        gg[:, t] = g
        cs[:, t] = c
        tcs[:, t] = tc
        hs[:, t] = ht
        h_prev = ht[:, None, :]
        c_prev = c
    out = np.concatenate([hs[0], hs[1][::-1]], axis=1)  # (T, 2h)
    cache = {"xs": xs, "sig": sig, "g": gg, "c": cs, "tc": tcs, "h": hs, "W2": w2, "U2": u2}
    return out, cache


def _bilstm_layer_backward(d_out, cache):
    """BPTT through one bidirectional layer; d_out is (T, 2h) in time order."""
    xs, sig, gg, cs, tcs, hs = (
        cache["xs"], cache["sig"], cache["g"], cache["c"], cache["tc"], cache["h"]
    )
    w2, u2 = cache["W2"], cache["U2"]
    _, t_len, h_dim = hs.shape
    d_hs = np.stack([d_out[:, :h_dim], d_out[::-1, h_dim:]])  # (2, T, h)

    dz_all = np.empty((2, t_len, 4 * h_dim))
    dh_next = np.zeros((2, h_dim))
    dc_next = np.zeros((2, h_dim))
    for t in range(t_len - 1, -1, -1):
        s = sig[:, t]
        i, f, o = s[:, :h_dim], s[:, h_dim : 2 * h_dim], s[:, 2 * h_dim :]
        g, tc = gg[:, t], tcs[:, t]
        dh = d_hs[:, t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        c_prev = cs[:, t - 1] if t > 0 else 0.0
        dz = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                do * o * (1.0 - o),
                dc * i * (1.0 - g * g),
            ],
            axis=1,
        )
        dz_all[:, t] = dz
        dh_next = np.matmul(dz[:, None, :], u2)[:, 0, :]
        dc_next = dc * f

    h_prev_stack = np.concatenate([np.zeros((2, 1, h_dim)), hs[:, :-1]], axis=1)
    dw2 = np.matmul(dz_all.transpose(0, 2, 1), xs)
    du2 = np.matmul(dz_all.transpose(0, 2, 1), h_prev_stack)
    db2 = dz_all.sum(axis=1)
    dx2 = np.matmul(dz_all, w2)
    dx = dx2[0] + dx2[1][::-1]
    return dx, dw2, du2, db2


def draw_dropout_masks(cfg: ModelConfig, t_len: int, rng) -> dict[str, np.ndarray]:
    """Inverted-dropout masks for one sample: between LSTM layers and after layer norm."""
    rate = cfg.dropout_rate
    masks = {}
    if rate == 0.0:
        return masks
    keep = 1.0 - rate
    for layer in range(cfg.lstm_layers - 1):
        masks[f"between{layer}"] = (rng.random((t_len, 2 * cfg.hidden_dim)) >= rate) / keep
    masks["dense"] = (rng.random((t_len, cfg.dense_dim)) >= rate) / keep
    return masks


def _forward_full(params: ModelParams, x: np.ndarray, masks: dict | None):
    """Forward pass with caches; masks=None means eval mode (dropout off)."""
    cfg = params.config
    ts = params.tensors
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.input_dim:
        raise ValueError(f"input must be (T, {cfg.input_dim}), got {x.shape}")
    if not np.isfinite(x).all():
        raise NonFiniteError("model input")
    masks = masks or {}

    cur = x
    lstm_caches = []
    for layer in range(cfg.lstm_layers):
        w2 = np.stack([ts[f"lstm{layer}_fw_W"], ts[f"lstm{layer}_bw_W"]])
        u2 = np.stack([ts[f"lstm{layer}_fw_U"], ts[f"lstm{layer}_bw_U"]])
        b2 = np.stack([ts[f"lstm{layer}_fw_b"], ts[f"lstm{layer}_bw_b"]])
        out, layer_cache = _bilstm_layer_forward(cur, w2, u2, b2)
        if not np.isfinite(out).all():
            raise NonFiniteError(f"lstm layer {layer}")
        mask = masks.get(f"between{layer}")
        dropped = out * mask if (mask is not None and layer < cfg.lstm_layers - 1) else out
        lstm_caches.append(layer_cache)
        cur = dropped

    dense_in = cur
    dense_pre = dense_in @ ts["dense_W"].T + ts["dense_b"]
    relu = np.maximum(dense_pre, 0.0)
    if not np.isfinite(relu).all():
        raise NonFiniteError("dense layer")

    mu = relu.mean(axis=1, keepdims=True)
    var = relu.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    x_hat = (relu - mu) * inv_std
    ln_out = x_hat * ts["ln_gain"] + ts["ln_bias"]
    if not np.isfinite(ln_out).all():
        raise NonFiniteError("layer norm")

    dense_mask = masks.get("dense")
    dropped = ln_out * dense_mask if dense_mask is not None else ln_out

    logits = dropped @ ts["proj_W"].T + ts["proj_b"]
    if not np.isfinite(logits).all():
        raise NonFiniteError("projection layer")
    shifted = logits - logits.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    probs = ex / ex.sum(axis=1, keepdims=True)
    if not np.isfinite(probs).all():
        raise NonFiniteError("softmax")

    cache = {
        "x": x, "masks": masks, "lstm": lstm_caches, "dense_in": dense_in,
        "dense_pre": dense_pre, "relu": relu, "x_hat": x_hat, "inv_std": inv_std,
        "ln_out": ln_out, "dropped": dropped, "probs": probs,
    }
    return probs, cache


def forward(params: ModelParams, x: np.ndarray, train_mode: bool = False, rng=None) -> ProbLattice:
    """Decode probabilities for one input sequence.

    In train mode, dropout masks are drawn from `rng` (must be supplied when
    the configured dropout rate is nonzero); eval mode is deterministic.
    """
    masks = None
    if train_mode and params.config.dropout_rate > 0.0:
        if rng is None:
            raise ValueError("train_mode with dropout requires an rng")
        masks = draw_dropout_masks(params.config, len(x), rng)
    probs, _ = _forward_full(params, x, masks)
    return ProbLattice(probs)


def backward(
    params: ModelParams,
    x: np.ndarray,
    target: LabelSequence,
    weight_decay: float = 0.0,
    dropout_masks: dict | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss (CTC + L2) and exact gradients for one sample.

    Pass dropout_masks from `draw_dropout_masks` to train with dropout;
    omit them for deterministic gradients (e.g. finite-difference checks).
    """
    ts = params.tensors
    probs, cache = _forward_full(params, x, dropout_masks)
    loss, d_probs = ctc.ctc_loss_grad(ProbLattice(probs), target)
    grads = {}

    # softmax: dL/dz = p * (dL/dp - sum(dL/dp * p))
    dot = (d_probs * probs).sum(axis=1, keepdims=True)
    d_logits = probs * (d_probs - dot)

    grads["proj_W"] = d_logits.T @ cache["dropped"]
    grads["proj_b"] = d_logits.sum(axis=0)
    d_dropped = d_logits @ ts["proj_W"]

    masks = cache["masks"]
    dense_mask = masks.get("dense")
    d_ln = d_dropped * dense_mask if dense_mask is not None else d_dropped

    x_hat, inv_std = cache["x_hat"], cache["inv_std"]
    grads["ln_gain"] = (d_ln * x_hat).sum(axis=0)
    grads["ln_bias"] = d_ln.sum(axis=0)
    d_xhat = d_ln * ts["ln_gain"]
    n_feat = x_hat.shape[1]
    d_relu = (
        d_xhat - d_xhat.mean(axis=1, keepdims=True)
        - x_hat * (d_xhat * x_hat).mean(axis=1, keepdims=True)
    ) * inv_std

    d_dense_pre = d_relu * (cache["dense_pre"] > 0)
    grads["dense_W"] = d_dense_pre.T @ cache["dense_in"]
    grads["dense_b"] = d_dense_pre.sum(axis=0)
    d_cur = d_dense_pre @ ts["dense_W"]

    cfg = params.config
    for layer in range(cfg.lstm_layers - 1, -1, -1):
        mask = masks.get(f"between{layer}")
        if mask is not None and layer < cfg.lstm_layers - 1:
            d_cur = d_cur * mask
        dx, dw2, du2, db2 = _bilstm_layer_backward(d_cur, cache["lstm"][layer])
        for d, direction in enumerate(("fw", "bw")):
            grads[f"lstm{layer}_{direction}_W"] = dw2[d]
            grads[f"lstm{layer}_{direction}_U"] = du2[d]
            grads[f"lstm{layer}_{direction}_b"] = db2[d]
        d_cur = dx

    if weight_decay:
        loss += 0.5 * weight_decay * sum(float((t * t).sum()) for t in ts.values())
        for name, t in ts.items():
            grads[name] = grads[name] + weight_decay * t
    return loss, grads


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    val_top1: float
    val_top4: float

    def to_json(self) -> dict:
        return asdict(self)


def evaluate_topk(params: ModelParams, samples, beam_cfg: BeamConfig) -> tuple[float, float]:
    """(Top-1, Top-k) word accuracy of beam decoding over (x, word) samples."""
    hit1 = hitk = 0
    for x, word in samples:
        lattice = forward(params, x)
        cands = [w for w, _ in beam_decode_topk(lattice, beam_cfg)]
        hit1 += bool(cands and cands[0] == word)
        hitk += word in cands
    n = max(len(samples), 1)
    return hit1 / n, hitk / n


def train(
    train_samples,
    val_samples,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    beam_cfg: BeamConfig | None = None,
    init: ModelParams | None = None,
    log=None,
) -> tuple[ModelParams, list[EpochMetrics]]:
    """Adam training over (x, word) samples; returns the best-Top-4 checkpoint.

    Deterministic for fixed seeds: shuffling, init, and dropout all come
    from seeded generators. Raises DivergenceError on a NaN loss.
    """
    if not train_samples:
        raise ValueError("training set is empty")
    targets = [LabelSequence.from_word(w) for _, w in train_samples]
    if beam_cfg is None:
        vocab = sorted({w for _, w in list(train_samples) + list(val_samples)})
        beam_cfg = BeamConfig(lexicon=ctc.LexiconTrie(vocab))

    if init is not None and init.config.input_dim != model_cfg.input_dim:
        raise ValueError(
            f"checkpoint input_dim {init.config.input_dim} does not match configured {model_cfg.input_dim}"
        )
    # resuming keeps the checkpoint's architecture
    params = init.copy() if init is not None else init_params(model_cfg)
    model_cfg = params.config
    if train_cfg.epochs == 0:
        return params.copy(), []

    rng = np.random.default_rng(train_cfg.seed)
    adam_m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    adam_t = 0

    best = params.copy()
    best_top4 = -1.0
    history: list[EpochMetrics] = []
    n = len(train_samples)
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for batch_start in range(0, n, train_cfg.batch_size):
            batch = order[batch_start : batch_start + train_cfg.batch_size]
            batch_loss = 0.0
            batch_grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
            for idx in batch:
                x, _ = train_samples[idx]
                masks = draw_dropout_masks(model_cfg, len(x), rng)
                loss, grads = backward(
                    params, x, targets[idx], train_cfg.weight_decay, masks or None
                )
                batch_loss += loss
                for k, g in grads.items():
                    batch_grads[k] += g
            if not np.isfinite(batch_loss):
                raise DivergenceError(epoch, batch_start // train_cfg.batch_size)
            scale = 1.0 / len(batch)
            adam_t += 1
            bc1 = 1.0 - ADAM_BETA1**adam_t
            bc2 = 1.0 - ADAM_BETA2**adam_t
            for k, t in params.tensors.items():
                g = batch_grads[k] * scale
                adam_m[k] = ADAM_BETA1 * adam_m[k] + (1 - ADAM_BETA1) * g
                adam_v[k] = ADAM_BETA2 * adam_v[k] + (1 - ADAM_BETA2) * g * g
                t -= train_cfg.learning_rate * (adam_m[k] / bc1) / (np.sqrt(adam_v[k] / bc2) + ADAM_EPS)
            epoch_loss += batch_loss

        val_top1, val_top4 = evaluate_topk(params, val_samples, beam_cfg)
        row = EpochMetrics(epoch, epoch_loss / n, val_top1, val_top4)
        history.append(row)
        if log is not None:
            log(row)
        if val_top4 > best_top4:
            best_top4 = val_top4
            best = params.copy()
    return best, history


def save_params(params: ModelParams, path):
    """Versioned binary format: magic, JSON header, float64 LE tensors."""
    shapes = _tensor_shapes(params.config)
    entries = []
    offset = 0
    for name, shape in shapes.items():
        nbytes = int(np.prod(shape)) * 8
        entries.append({"name": name, "shape": list(shape), "offset": offset})
        offset += nbytes
    header = {
        "format_version": 1,
        "config": asdict(params.config),
        "class_order": CLASS_ORDER,
        "blank_index": ctc.BLANK,
        "tensors": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        for name in shapes:
            f.write(np.ascontiguousarray(params.tensors[name], dtype="<f8").tobytes())


def load_params(path) -> ModelParams:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 8 or blob[:4] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: not a g2t model file (bad magic)")
    (header_len,) = struct.unpack("<I", blob[4:8])
    header_end = 8 + header_len
    if len(blob) < header_end:
        raise ModelTruncatedError(f"{path}: header truncated")
    try:
        header = json.loads(blob[8:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"{path}: unreadable header: {e}") from e
    if header.get("format_version") != 1:
        raise ModelFormatError(f"{path}: unsupported format version {header.get('format_version')}")
    try:
        cfg = ModelConfig(**header["config"])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: bad config in header: {e}") from e

    expected = _tensor_shapes(cfg)
    listed = {e["name"]: e for e in header.get("tensors", [])}
    if set(listed) != set(expected):
        raise ModelShapeError(f"{path}: tensor names do not match the config")
    tensors = {}
    for name, shape in expected.items():
        entry = listed[name]
        if tuple(entry["shape"]) != shape:
            raise ModelShapeError(
                f"{path}: tensor {name} has shape {entry['shape']}, config implies {list(shape)}"
            )
        start = header_end + int(entry["offset"])
        end = start + int(np.prod(shape)) * 8
        if end > len(blob):
            raise ModelTruncatedError(f"{path}: tensor {name} extends past end of file")
        tensors[name] = np.frombuffer(blob[start:end], dtype="<f8").reshape(shape).copy()
    try:
        return ModelParams(cfg, tensors)
    except ValueError as e:
        raise ModelShapeError(f"{path}: {e}") from e
