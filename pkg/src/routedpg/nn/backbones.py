"""Actor and critic network builders.

Four backbone kinds are available:

* ``cnn-lstm-tam`` — per-frame convolutional encoding of the traffic-matrix
  window, an LSTM over the frame embeddings, scaled dot-product attention
  over the hidden states, then dense layers.  The critic runs a second,
  smaller branch of the same design over the action vector and merges the
  two embeddings by concatenation.
* ``ffnn`` — dense layers over the flattened most-recent frame.
* ``cnn-only`` — the convolutional encoder on the most-recent frame, no
  recurrence or attention.
* ``lstm-only`` — LSTM over per-frame flattened inputs, no convolution or
  attention.

Actors map a state window (B, W, H, Wd) to (B, action_dim) with a sigmoid
head; critics map (state window, action) to a scalar value per sample,
shaped (B, 1).
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..autodiff import (
    ShapeError,
    Tensor,
    concat,
    load_checkpoint,
    reduce_mean,
    relu,
    reshape,
    save_checkpoint,
    sigmoid,
    slice_axis,
)
from .layers import BatchNorm2d, Conv2d, Dense, Dropout, Lstm, MaxPool2d, TemporalAttention

KINDS = ("cnn-lstm-tam", "ffnn", "cnn-only", "lstm-only")

__all__ = ["KINDS", "Backbone", "build_actor", "build_critic"]


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _ConvEncoder:
    """conv -> batchnorm -> relu -> maxpool -> dropout -> per-channel spatial mean."""

    def __init__(self, in_shape: tuple, kernel: tuple, filters: int,
                 dropout_rate: float, rng: np.random.Generator):
        h, w = in_shape
        kh, kw = kernel
        self.conv = Conv2d(1, filters, kernel, rng)
        self.bn = BatchNorm2d(filters)
        self.conv_shape = (h - kh + 1, w - kw + 1)
        pool = (min(2, self.conv_shape[0]), min(2, self.conv_shape[1]))
        self.pool = MaxPool2d(pool, stride=2)
        self.pool_shape = self.pool.out_shape(*self.conv_shape)
        self.drop = Dropout(dropout_rate)
        self.filters = filters

    def blocks(self, prefix: str):
        return [(f"{prefix}conv", self.conv), (f"{prefix}bn", self.bn),
                (f"{prefix}pool", self.pool), (f"{prefix}dropout", self.drop)]

    def __call__(self, frames: Tensor, train: bool, rng) -> Tensor:
        z = relu(self.bn(self.conv(frames), train))
        z = self.pool(z)
        z = self.drop(z, train, rng)
        n, c = z.shape[0], z.shape[1]
        flat = reshape(z, (n, c, z.shape[2] * z.shape[3]))
        return reduce_mean(flat, axis=2)

    def rows(self, prefix: str = ""):
        ch, cw = self.conv_shape
        ph, pw = self.pool_shape
        f = self.filters
        return [
            (f"{prefix}conv2d {self.conv.weight.shape[2]}x{self.conv.weight.shape[3]}",
             (ch, cw, f), self.conv.param_count),
            (f"{prefix}batchnorm", (ch, cw, f), self.bn.param_count),
            (f"{prefix}maxpool {self.pool.pool[0]}x{self.pool.pool[1]} stride 2",
             (ph, pw, f), 0),
            (f"{prefix}dropout", (ph * pw, f), 0),
        ]


class Backbone:
    """Base class: parameter registry, summary table, checkpoint round-trip."""

    def __init__(self, kind: str, role: str):
        self.kind = kind
        self.role = role
        self._blocks: list = []
        self._rows: list = []

    def _register(self, name: str, layer):
        self._blocks.append((name, layer))
        return layer

    def params(self) -> list:
        """Ordered (name, Tensor) pairs of every trainable parameter."""
        out = []
        for name, layer in self._blocks:
            for suffix, tensor in layer.params():
                out.append((f"{name}.{suffix}", tensor))
        return out

    def state_arrays(self) -> list:
        out = []
        for name, layer in self._blocks:
            for suffix, arr in layer.state_arrays():
                out.append((f"{name}.{suffix}", arr))
        return out

    def named_arrays(self) -> list:
        """Trainable parameters followed by state buffers, by reference."""
        return [(n, t.data) for n, t in self.params()] + self.state_arrays()

    @property
    def trainable_parameter_count(self) -> int:
        return sum(t.data.size for _, t in self.params())

    def rows(self) -> list:
        """(label, out-shape-sans-batch, summary param count) per layer."""
        return list(self._rows)

    def describe(self) -> str:
        lines = [f"{self.role} backbone: {self.kind}"]
        label_w = max(len(r[0]) for r in self._rows) + 2
        shape_w = max(len(str(r[1])) for r in self._rows) + 2
        lines.append(f"{'layer':<{label_w}}{'out shape':<{shape_w}}{'params':>8}")
        for label, shape, count in self._rows:
            lines.append(f"{label:<{label_w}}{str(shape):<{shape_w}}{count:>8}")
        lines.append(f"trainable parameters: {self.trainable_parameter_count}")
        return "\n".join(lines)

    def save(self, path: str) -> None:
        save_checkpoint(path, self.named_arrays())

    def load(self, path: str) -> None:
        stored = load_checkpoint(path)
        targets = self.named_arrays()
        names = {n for n, _ in targets}
        extra = set(stored) - names
        if extra:
            raise ValueError(f"checkpoint holds unknown tensors: {sorted(extra)}")
        for name, arr in targets:
            if name not in stored:
                raise KeyError(f"checkpoint is missing tensor {name!r}")
            if stored[name].shape != arr.shape:
                raise ValueError(
                    f"checkpoint tensor {name!r} has shape {stored[name].shape}, "
                    f"expected {arr.shape}"
                )
            np.copyto(arr, stored[name])

    def zero_grad(self) -> None:
        for _, t in self.params():
            t.zero_grad()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _check_state_window(s: Tensor, state_shape: tuple) -> tuple:
    if s.ndim != 4 or tuple(s.shape[2:]) != tuple(state_shape):
        raise ShapeError(
            f"expected state window (batch, frames, {state_shape[0]}, "
            f"{state_shape[1]}), got {s.shape}"
        )
    return s.shape[0], s.shape[1]


def _check_action(a: Tensor, action_dim: int) -> int:
    if a.ndim != 2 or a.shape[1] != action_dim:
        raise ShapeError(f"expected actions (batch, {action_dim}), got {a.shape}")
    return a.shape[0]


def _last_frame_flat(s: Tensor, n_batch: int, frames: int, width: int) -> Tensor:
    return reshape(slice_axis(s, 1, frames - 1, frames), (n_batch, width))


# ---------------------------------------------------------------------------
# actors


class ConvLstmAttentionActor(Backbone):
    def __init__(self, state_shape, action_dim, window, filters, lstm_hidden,
                 dense_units, dropout_rate, attention_trainable, rng):
        super().__init__("cnn-lstm-tam", "actor")
        self.state_shape = tuple(state_shape)
        self.action_dim = action_dim
        self.window = window
        self.encoder = _ConvEncoder(state_shape, (2, 2), filters, dropout_rate, rng)
        self.lstm = Lstm(filters, lstm_hidden, rng)
        self.attention = TemporalAttention(lstm_hidden, trainable=attention_trainable,
                                           rng=rng)
        self.dense = Dense(lstm_hidden, dense_units, rng)
        self.head = Dense(dense_units, action_dim, rng, init="small")
        for name, layer in self.encoder.blocks(""):
            self._register(name, layer)
        self._register("lstm", self.lstm)
        self._register("attention", self.attention)
        self._register("dense", self.dense)
        self._register("output", self.head)
        self._rows = (
            [("input window", (window,) + self.state_shape, 0)]
            + self.encoder.rows()
            + [
                ("lstm", (lstm_hidden,), self.lstm.param_count),
                ("soft attention", (lstm_hidden,), self.attention.param_count),
                ("dense", (dense_units,), self.dense.param_count),
                ("output (sigmoid)", (action_dim,), self.head.param_count),
            ]
        )

    def forward(self, states, train: bool = False, rng=None) -> Tensor:
        s = _as_tensor(states)
        n_batch, frames = _check_state_window(s, self.state_shape)
        h, w = self.state_shape
        per_frame = self.encoder(reshape(s, (n_batch * frames, 1, h, w)), train, rng)
        seq = reshape(per_frame, (n_batch, frames, self.encoder.filters))
        hidden = self.lstm(seq)
        embedding = self.attention(hidden)
        return sigmoid(self.head(relu(self.dense(embedding))))


class FfnnActor(Backbone):
    def __init__(self, state_shape, action_dim, window, hidden_units, rng):
        super().__init__("ffnn", "actor")
        self.state_shape = tuple(state_shape)
        self.action_dim = action_dim
        self.window = window
        flat = state_shape[0] * state_shape[1]
        self.dense1 = Dense(flat, hidden_units, rng)
        self.dense2 = Dense(hidden_units, hidden_units, rng)
        self.head = Dense(hidden_units, action_dim, rng, init="small")
        self._register("dense1", self.dense1)
        self._register("dense2", self.dense2)
        self._register("output", self.head)
        self._rows = [
            ("input window", (window,) + self.state_shape, 0),
            ("flatten last frame", (flat,), 0),
            ("dense", (hidden_units,), self.dense1.param_count),
            ("dense", (hidden_units,), self.dense2.param_count),
            ("output (sigmoid)", (action_dim,), self.head.param_count),
        ]

    def forward(self, states, train: bool = False, rng=None) -> Tensor:
        s = _as_tensor(states)
        n_batch, frames = _check_state_window(s, self.state_shape)
        flat = _last_frame_flat(s, n_batch, frames,
                                self.state_shape[0] * self.state_shape[1])
        return sigmoid(self.head(relu(self.dense2(relu(self.dense1(flat))))))


class ConvOnlyActor(Backbone):
    def __init__(self, state_shape, action_dim, window, filters, dense_units,
                 dropout_rate, rng):
        super().__init__("cnn-only", "actor")
        self.state_shape = tuple(state_shape)
        self.action_dim = action_dim
        self.window = window
        self.encoder = _ConvEncoder(state_shape, (2, 2), filters, dropout_rate, rng)
        self.dense = Dense(filters, dense_units, rng)
        self.head = Dense(dense_units, action_dim, rng, init="small")
        for name, layer in self.encoder.blocks(""):
            self._register(name, layer)
        self._register("dense", self.dense)
        self._register("output", self.head)
        self._rows = (
            [("input window", (window,) + self.state_shape, 0)]
            + self.encoder.rows()
            + [
                ("spatial mean", (filters,), 0),
                ("dense", (dense_units,), self.dense.param_count),
                ("output (sigmoid)", (action_dim,), self.head.param_count),
            ]
        )

    def forward(self, states, train: bool = False, rng=None) -> Tensor:
        s = _as_tensor(states)
        n_batch, frames = _check_state_window(s, self.state_shape)
        h, w = self.state_shape
        last = reshape(slice_axis(s, 1, frames - 1, frames), (n_batch, 1, h, w))
        feats = self.encoder(last, train, rng)
        return sigmoid(self.head(relu(self.dense(feats))))


class LstmOnlyActor(Backbone):
    def __init__(self, state_shape, action_dim, window, lstm_hidden, dense_units, rng):
        super().__init__("lstm-only", "actor")
        self.state_shape = tuple(state_shape)
        self.action_dim = action_dim
        self.window = window
        flat = state_shape[0] * state_shape[1]
        self.lstm = Lstm(flat, lstm_hidden, rng)
        self.dense = Dense(lstm_hidden, dense_units, rng)
        self.head = Dense(dense_units, action_dim, rng, init="small")
        self._register("lstm", self.lstm)
        self._register("dense", self.dense)
        self._register("output", self.head)
        self._rows = [
            ("input window", (window,) + self.state_shape, 0),
            ("flatten frames", (window, flat), 0),
            ("lstm", (lstm_hidden,), self.lstm.param_count),
            ("dense", (dense_units,), self.dense.param_count),
            ("output (sigmoid)", (action_dim,), self.head.param_count),
        ]

    def forward(self, states, train: bool = False, rng=None) -> Tensor:
        s = _as_tensor(states)
        n_batch, frames = _check_state_window(s, self.state_shape)
        flat = self.state_shape[0] * self.state_shape[1]
        hidden = self.lstm(reshape(s, (n_batch, frames, flat)))
        last = reshape(slice_axis(hidden, 1, frames - 1, frames),
                       (n_batch, self.lstm.hidden_size))
        return sigmoid(self.head(relu(self.dense(last))))


# ---------------------------------------------------------------------------
# critics


class ConvLstmAttentionCritic(Backbone):
    def __init__(self, state_shape, action_dim, window, filters, lstm_hidden,
                 dense_units, dropout_rate, attention_trainable, rng):
        super().__init__("cnn-lstm-tam", "critic")
        self.state_shape = tuple(state_shape)
        self.action_dim = action_dim
        self.window = window
        self.state_encoder = _ConvEncoder(state_shape, (2, 2), filters, dropout_rate, rng)
        self.state_lstm = Lstm(filters, lstm_hidden, rng)
        self.state_attention = TemporalAttention(lstm_hidden,
                                                 trainable=attention_trainable, rng=rng)
        self.action_encoder = _ConvEncoder((1, action_dim), (1, 2), filters,
                                           dropout_rate, rng)
        self.action_lstm = Lstm(filters, lstm_hidden, rng)
        self.action_attention = TemporalAttention(lstm_hidden,
                                                  trainable=attention_trainable, rng=rng)
        self.merge = Dense(2 * lstm_hidden, dense_units, rng)
        self.q_head = Dense(dense_units, 1, rng, init="small")
        for name, layer in self.state_encoder.blocks("state_"):
            self._register(name, layer)
        self._register("state_lstm", self.state_lstm)
        self._register("state_attention", self.state_attention)
        for name, layer in self.action_encoder.blocks("action_"):
            self._register(name, layer)
        self._register("action_lstm", self.action_lstm)
        self._register("action_attention", self.action_attention)
        self._register("merge", self.merge)
        self._register("q_head", self.q_head)
        self._rows = (
            [("state input window", (window,) + self.state_shape, 0)]
            + self.state_encoder.rows("state ")
            + [
                ("state lstm", (lstm_hidden,), self.state_lstm.param_count),
                ("state soft attention", (lstm_hidden,), self.state_attention.param_count),
                ("action input", (action_dim,), 0),
            ]
            + self.action_encoder.rows("action ")
            + [
                ("action lstm", (lstm_hidden,), self.action_lstm.param_count),
                ("action soft attention", (lstm_hidden,),
                 self.action_attention.param_count),
                ("concat", (2 * lstm_hidden,), 0),
                ("dense", (dense_units,), self.merge.param_count),
                ("value head", (1,), self.q_head.param_count),
            ]
        )

    def forward(self, states, actions, train: bool = False, rng=None) -> Tensor:
        s = _as_tensor(states)
        a = _as_tensor(actions)
        n_batch, frames = _check_state_window(s, self.state_shape)
        if _check_action(a, self.action_dim) != n_batch:
            raise ShapeError(
                f"state batch {n_batch} != action batch {a.shape[0]}"
            )
        h, w = self.state_shape
        per_frame = self.state_encoder(reshape(s, (n_batch * frames, 1, h, w)),
                                       train, rng)
        seq = reshape(per_frame, (n_batch, frames, self.state_encoder.filters))
        state_emb = self.state_attention(self.state_lstm(seq))

        a_frames = reshape(a, (n_batch, 1, 1, self.action_dim))
        a_feat = self.action_encoder(a_frames, train, rng)
        a_seq = reshape(a_feat, (n_batch, 1, self.action_encoder.filters))
        action_emb = self.action_attention(self.action_lstm(a_seq))

        merged = concat([state_emb, action_emb], axis=1)
        return self.q_head(relu(self.merge(merged)))


class FfnnCritic(Backbone):
    def __init__(self, state_shape, action_dim, window, hidden_units, rng):
        super().__init__("ffnn", "critic")
        self.state_shape = tuple(state_shape)
        self.action_dim = action_dim
        self.window = window
        flat = state_shape[0] * state_shape[1]
        self.dense1 = Dense(flat + action_dim, hidden_units, rng)
        self.dense2 = Dense(hidden_units, hidden_units, rng)
        self.q_head = Dense(hidden_units, 1, rng, init="small")
        self._register("dense1", self.dense1)
        self._register("dense2", self.dense2)
        self._register("q_head", self.q_head)
        self._rows = [
            ("state input window", (window,) + self.state_shape, 0),
            ("flatten last frame + action", (flat + action_dim,), 0),
            ("dense", (hidden_units,), self.dense1.param_count),
            ("dense", (hidden_units,), self.dense2.param_count),
            ("value head", (1,), self.q_head.param_count),
        ]

    def forward(self, states, actions, train: bool = False, rng=None) -> Tensor:
        s = _as_tensor(states)
        a = _as_tensor(actions)
        n_batch, frames = _check_state_window(s, self.state_shape)
        if _check_action(a, self.action_dim) != n_batch:
            raise ShapeError(f"state batch {n_batch} != action batch {a.shape[0]}")
        flat = _last_frame_flat(s, n_batch, frames,
                                self.state_shape[0] * self.state_shape[1])
        merged = concat([flat, a], axis=1)
        return self.q_head(relu(self.dense2(relu(self.dense1(merged)))))


class ConvOnlyCritic(Backbone):
    def __init__(self, state_shape, action_dim, window, filters, dense_units,
                 dropout_rate, rng):
        super().__init__("cnn-only", "critic")
        self.state_shape = tuple(state_shape)
        self.action_dim = action_dim
        self.window = window
        self.state_encoder = _ConvEncoder(state_shape, (2, 2), filters, dropout_rate, rng)
        self.action_encoder = _ConvEncoder((1, action_dim), (1, 2), filters,
                                           dropout_rate, rng)
        self.merge = Dense(2 * filters, dense_units, rng)
        self.q_head = Dense(dense_units, 1, rng, init="small")
        for name, layer in self.state_encoder.blocks("state_"):
            self._register(name, layer)
        for name, layer in self.action_encoder.blocks("action_"):
            self._register(name, layer)
        self._register("merge", self.merge)
        self._register("q_head", self.q_head)
        self._rows = (
            [("state input window", (window,) + self.state_shape, 0)]
            + self.state_encoder.rows("state ")
            + [("action input", (action_dim,), 0)]
            + self.action_encoder.rows("action ")
            + [
                ("concat", (2 * filters,), 0),
                ("dense", (dense_units,), self.merge.param_count),
                ("value head", (1,), self.q_head.param_count),
            ]
        )

    def forward(self, states, actions, train: bool = False, rng=None) -> Tensor:
        s = _as_tensor(states)
        a = _as_tensor(actions)
        n_batch, frames = _check_state_window(s, self.state_shape)
        if _check_action(a, self.action_dim) != n_batch:
            raise ShapeError(f"state batch {n_batch} != action batch {a.shape[0]}")
        h, w = self.state_shape
        last = reshape(slice_axis(s, 1, frames - 1, frames), (n_batch, 1, h, w))
        s_feat = self.state_encoder(last, train, rng)
        a_feat = self.action_encoder(reshape(a, (n_batch, 1, 1, self.action_dim)),
                                     train, rng)
        merged = concat([s_feat, a_feat], axis=1)
        return self.q_head(relu(self.merge(merged)))


class LstmOnlyCritic(Backbone):
    def __init__(self, state_shape, action_dim, window, lstm_hidden, dense_units, rng):
        super().__init__("lstm-only", "critic")
        self.state_shape = tuple(state_shape)
        self.action_dim = action_dim
        self.window = window
        flat = state_shape[0] * state_shape[1]
        self.state_lstm = Lstm(flat, lstm_hidden, rng)
        self.action_lstm = Lstm(action_dim, lstm_hidden, rng)
        self.merge = Dense(2 * lstm_hidden, dense_units, rng)
        self.q_head = Dense(dense_units, 1, rng, init="small")
        self._register("state_lstm", self.state_lstm)
        self._register("action_lstm", self.action_lstm)
        self._register("merge", self.merge)
        self._register("q_head", self.q_head)
        self._rows = [
            ("state input window", (window,) + self.state_shape, 0),
            ("state lstm", (lstm_hidden,), self.state_lstm.param_count),
            ("action lstm", (lstm_hidden,), self.action_lstm.param_count),
            ("concat", (2 * lstm_hidden,), 0),
            ("dense", (dense_units,), self.merge.param_count),
            ("value head", (1,), self.q_head.param_count),
        ]

    def forward(self, states, actions, train: bool = False, rng=None) -> Tensor:
        s = _as_tensor(states)
        a = _as_tensor(actions)
        n_batch, frames = _check_state_window(s, self.state_shape)
        if _check_action(a, self.action_dim) != n_batch:
            raise ShapeError(f"state batch {n_batch} != action batch {a.shape[0]}")
        flat = self.state_shape[0] * self.state_shape[1]
        s_hidden = self.state_lstm(reshape(s, (n_batch, frames, flat)))
        s_last = reshape(slice_axis(s_hidden, 1, frames - 1, frames),
                         (n_batch, self.state_lstm.hidden_size))
        a_hidden = self.action_lstm(reshape(a, (n_batch, 1, self.action_dim)))
        a_last = reshape(slice_axis(a_hidden, 1, 0, 1),
                         (n_batch, self.action_lstm.hidden_size))
        merged = concat([s_last, a_last], axis=1)
        return self.q_head(relu(self.merge(merged)))


# ---------------------------------------------------------------------------
# builders


def _rng_of(rng, seed):
    return rng if rng is not None else np.random.default_rng(seed)


def build_actor(kind: str = "cnn-lstm-tam", state_shape: tuple = (23, 24),
                action_dim: int = 37, *, window: int = 4, filters: int = 64,
                lstm_hidden: int = 64, dense_units: int = 64,
                dropout_rate: float = 0.5, attention_trainable: bool = False,
                rng: Optional[np.random.Generator] = None, seed: int = 0) -> Backbone:
    rng = _rng_of(rng, seed)
    if kind == "cnn-lstm-tam":
        return ConvLstmAttentionActor(state_shape, action_dim, window, filters,
                                      lstm_hidden, dense_units, dropout_rate,
                                      attention_trainable, rng)
    if kind == "ffnn":
        return FfnnActor(state_shape, action_dim, window, dense_units, rng)
    if kind == "cnn-only":
        return ConvOnlyActor(state_shape, action_dim, window, filters, dense_units,
                             dropout_rate, rng)
    if kind == "lstm-only":
        return LstmOnlyActor(state_shape, action_dim, window, lstm_hidden,
                             dense_units, rng)
    raise ValueError(f"unknown backbone kind {kind!r}; valid kinds: {KINDS}")


def build_critic(kind: str = "cnn-lstm-tam", state_shape: tuple = (23, 24),
                 action_dim: int = 37, *, window: int = 4, filters: int = 64,
                 lstm_hidden: int = 64, dense_units: int = 64,
                 dropout_rate: float = 0.5, attention_trainable: bool = False,
                 rng: Optional[np.random.Generator] = None, seed: int = 0) -> Backbone:
    rng = _rng_of(rng, seed)
    if kind == "cnn-lstm-tam":
        return ConvLstmAttentionCritic(state_shape, action_dim, window, filters,
                                       lstm_hidden, dense_units, dropout_rate,
                                       attention_trainable, rng)
    if kind == "ffnn":
        return FfnnCritic(state_shape, action_dim, window, dense_units, rng)
    if kind == "cnn-only":
        return ConvOnlyCritic(state_shape, action_dim, window, filters, dense_units,
                              dropout_rate, rng)
    if kind == "lstm-only":
        return LstmOnlyCritic(state_shape, action_dim, window, lstm_hidden,
                              dense_units, rng)
    raise ValueError(f"unknown backbone kind {kind!r}; valid kinds: {KINDS}")
