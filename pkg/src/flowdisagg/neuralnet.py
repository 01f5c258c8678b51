"""Small numpy neural engine: LSTM, feedforward net, MSE, backprop, Adam, gradient check.

Everything is float64. Forward functions accept a single example or a leading
batch axis and return a cache that the matching backward function consumes.
Gate blocks in the LSTM weights are stacked in the order input, forget, cell
candidate, output.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ShapeError, TrainingError

ACTIVATIONS = ("tanh", "relu", "identity")


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(name, z, a):
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0).astype(z.dtype)
    return np.ones_like(z)


# --- parameter containers --------------------------------------------------------


@dataclass(frozen=True)
class LstmParams:
    Wx: np.ndarray  # (4H, input_size)
    Wh: np.ndarray  # (4H, H)
    b: np.ndarray   # (4H,)

    def __post_init__(self):
        Wx, Wh, b = (np.asarray(a, dtype=np.float64) for a in (self.Wx, self.Wh, self.b))
        H4 = b.shape[0]
        if H4 % 4 or Wx.ndim != 2 or Wx.shape[0] != H4 or Wh.shape != (H4, H4 // 4):
            raise ShapeError(f"inconsistent LSTM shapes Wx{Wx.shape} Wh{Wh.shape} b{b.shape}")
        object.__setattr__(self, "Wx", Wx)
        object.__setattr__(self, "Wh", Wh)
        object.__setattr__(self, "b", b)

    @property
    def input_size(self):
        return self.Wx.shape[1]

    @property
    def hidden_size(self):
        return self.Wh.shape[1]

    def named(self, prefix="lstm") -> dict:
        return {f"{prefix}.Wx": self.Wx, f"{prefix}.Wh": self.Wh, f"{prefix}.b": self.b}

    @classmethod
    def from_named(cls, arrays, prefix="lstm"):
        return cls(arrays[f"{prefix}.Wx"], arrays[f"{prefix}.Wh"], arrays[f"{prefix}.b"])


@dataclass(frozen=True)
class FfnParams:
    weights: tuple  # each (out, in)
    biases: tuple   # each (out,)
    activation: str = "tanh"

    def __post_init__(self):
        Ws = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=np.float64) for b in self.biases)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if not Ws or len(Ws) != len(bs):
            raise ShapeError("need one bias per weight matrix and at least one layer")
        for k, (W, b) in enumerate(zip(Ws, bs)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ShapeError(f"layer {k}: W{W.shape} b{b.shape}")
            if k and W.shape[1] != Ws[k - 1].shape[0]:
                raise ShapeError(f"layer {k} expects {W.shape[1]} inputs, previous layer gives {Ws[k - 1].shape[0]}")
        if Ws[-1].shape[0] != 1:
            raise ShapeError("output layer must have a single unit")
        object.__setattr__(self, "weights", Ws)
        object.__setattr__(self, "biases", bs)

    @property
    def sizes(self):
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    def named(self, prefix="ffn") -> dict:
        out = {}
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}.W{k}"] = W
            out[f"{prefix}.b{k}"] = b
        return out

    @classmethod
    def from_named(cls, arrays, prefix="ffn", activation="tanh"):
        n = sum(1 for key in arrays if key.startswith(f"{prefix}.W"))
        return cls(tuple(arrays[f"{prefix}.W{k}"] for k in range(n)),
                   tuple(arrays[f"{prefix}.b{k}"] for k in range(n)), activation)


def init_lstm(input_size, hidden_size, rng: np.random.Generator) -> LstmParams:
    """Uniform in [-r, r], r = 1/sqrt(input_size + hidden_size)."""
    r = 1.0 / np.sqrt(input_size + hidden_size)
    H4 = 4 * hidden_size
    return LstmParams(rng.uniform(-r, r, (H4, input_size)),
                      rng.uniform(-r, r, (H4, hidden_size)),
                      rng.uniform(-r, r, H4))


def init_ffn(sizes, rng: np.random.Generator, activation="tanh") -> FfnParams:
    """Uniform in [-r, r] per layer, r = 1/sqrt(fan_in). ``sizes`` runs input -> ... -> 1."""
    Ws, bs = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        r = 1.0 / np.sqrt(n_in)
        Ws.append(rng.uniform(-r, r, (n_out, n_in)))
        bs.append(rng.uniform(-r, r, n_out))
    return FfnParams(tuple(Ws), tuple(bs), activation)


# --- LSTM -------------------------------------------------------------------------


@dataclass
class LstmCache:
    params: LstmParams
    batched: bool
    xs: list = field(default_factory=list)
    hs: list = field(default_factory=list)  # hs[t] is the state entering step t; hs[-1] final
    cs: list = field(default_factory=list)
    gates: list = field(default_factory=list)  # (i, f, g, o, tanh(c)) per step


def lstm_step(params: LstmParams, x, h, c):
    """Single recurrence step on batched arrays. Returns (h, c, gates)."""
    H = params.hidden_size
    z = x @ params.Wx.T + h @ params.Wh.T + params.b
    i = sigmoid(z[:, :H])
    f = sigmoid(z[:, H:2 * H])
    g = np.tanh(z[:, 2 * H:3 * H])
    o = sigmoid(z[:, 3 * H:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    return o * tc, c_new, (i, f, g, o, tc)


def lstm_forward(params: LstmParams, sequence):
    """Run from zero state over ``sequence`` of shape (T, input) or (B, T, input).

    Returns the hidden state after the last step, shape (H,) or (B, H), and a cache.
    """
    seq = np.asarray(sequence, dtype=np.float64)
    batched = seq.ndim == 3
    if not batched:
        seq = seq[None]
    if seq.ndim != 3 or seq.shape[1] < 1:
        raise ShapeError(f"sequence must be (T, input) or (B, T, input) with T >= 1, got {np.shape(sequence)}")
    if seq.shape[2] != params.input_size:
        raise ShapeError(f"step 0: input has {seq.shape[2]} entries, LSTM expects {params.input_size}")
    B, T, _ = seq.shape
    h = np.zeros((B, params.hidden_size))
    c = np.zeros((B, params.hidden_size))
    cache = LstmCache(params, batched, hs=[h], cs=[c])
    for t in range(T):
        x = seq[:, t, :]
        h, c, gates = lstm_step(params, x, h, c)
        cache.xs.append(x)
        cache.hs.append(h)
        cache.cs.append(c)
        cache.gates.append(gates)
    return (h if batched else h[0]), cache


def lstm_backward(params: LstmParams, cache: LstmCache, d_hidden):
    """Backpropagation through time from a gradient on the final hidden state.

    Returns (gradients as LstmParams, gradient w.r.t. the input sequence).
    """
    if cache.params is not params:
        raise ValueError("stale LSTM cache: produced by a different parameter set")
    dh = np.asarray(d_hidden, dtype=np.float64)
    if not cache.batched:
        dh = dh[None]
    H = params.hidden_size
    dWx = np.zeros_like(params.Wx)
    dWh = np.zeros_like(params.Wh)
    db = np.zeros_like(params.b)
    dc = np.zeros_like(dh)
    dxs = [None] * len(cache.xs)
    for t in reversed(range(len(cache.xs))):
        i, f, g, o, tc = cache.gates[t]
        c_prev, h_prev = cache.cs[t], cache.hs[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = np.empty((dh.shape[0], 4 * H))
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H:] = do * o * (1.0 - o)
        dWx += dz.T @ cache.xs[t]
        dWh += dz.T @ h_prev
        db += dz.sum(axis=0)
        dxs[t] = dz @ params.Wx
        dh = dz @ params.Wh
        dc = dc * f
    dx = np.stack(dxs, axis=1)
    return LstmParams(dWx, dWh, db), (dx if cache.batched else dx[0])


# --- feedforward ------------------------------------------------------------------


@dataclass
class FfnCache:
    params: FfnParams
    batched: bool
    inputs: list  # activation entering each layer
    pre: list     # pre-activation of each layer


def ffn_forward(params: FfnParams, x):
    """Affine/activation chain ending in one linear unit.

    ``x`` is (input,) giving a float, or (N, input) giving an (N,) array.
    """
    a = np.asarray(x, dtype=np.float64)
    batched = a.ndim == 2
    if not batched:
        a = a[None]
    if a.ndim != 2 or a.shape[1] != params.sizes[0]:
        raise ShapeError(f"FFN expects {params.sizes[0]} inputs, got shape {np.shape(x)}")
    cache = FfnCache(params, batched, [], [])
    last = len(params.weights) - 1
    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        cache.inputs.append(a)
        z = a @ W.T + b
        cache.pre.append(z)
        a = z if k == last else _act(params.activation, z)
    out = a[:, 0]
    return (out if batched else float(out[0])), cache


def ffn_backward(params: FfnParams, cache: FfnCache, d_out):
    """Returns (gradients as FfnParams, gradient w.r.t. the input)."""
    if cache.params is not params:
        raise ValueError("stale FFN cache: produced by a different parameter set")
    delta = np.asarray(d_out, dtype=np.float64).reshape(-1, 1)
    n = len(params.weights)
    dWs, dbs = [None] * n, [None] * n
    for k in reversed(range(n)):
        if k != n - 1:
            z = cache.pre[k]
            delta = delta * _act_grad(params.activation, z, _act(params.activation, z))
        dWs[k] = delta.T @ cache.inputs[k]
        dbs[k] = delta.sum(axis=0)
        delta = delta @ params.weights[k]
    grads = FfnParams(tuple(dWs), tuple(dbs), params.activation)
    return grads, (delta if cache.batched else delta[0])


# --- loss -------------------------------------------------------------------------


def mse_loss(predictions, targets) -> float:
    p = np.atleast_1d(np.asarray(predictions, dtype=np.float64))
    t = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    if p.size == 0:
        raise ValueError("mse_loss of empty input")
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} != target shape {t.shape}")
    return float(np.mean((p - t) ** 2))


def mse_grad(predictions, targets):
    p = np.atleast_1d(np.asarray(predictions, dtype=np.float64))
    t = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    return 2.0 * (p - t) / p.size


# --- optimizer --------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerState:
    lr: float
    m: Mapping[str, np.ndarray]
    v: Mapping[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    algorithm: str = "adam"

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps, "step": self.step,
                "m": {k: {"shape": list(a.shape), "data": a.ravel().tolist()} for k, a in self.m.items()},
                "v": {k: {"shape": list(a.shape), "data": a.ravel().tolist()} for k, a in self.v.items()}}

    @classmethod
    def from_dict(cls, d) -> "OptimizerState":
        def arrays(block):
            return {k: np.asarray(e["data"], dtype=np.float64).reshape(e["shape"]) for k, e in block.items()}
        return cls(d["lr"], arrays(d["m"]), arrays(d["v"]), d["step"], d["beta1"], d["beta2"], d["eps"],
                   d["algorithm"])


def adam_init(params: Mapping[str, np.ndarray], lr=1e-3) -> OptimizerState:
    return OptimizerState(lr, {k: np.zeros_like(a) for k, a in params.items()},
                          {k: np.zeros_like(a) for k, a in params.items()})


def optimizer_step(state: OptimizerState, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]):
    """One bias-corrected Adam update. Pure: inputs are not modified."""
    if set(params) != set(grads) or set(params) != set(state.m):
        raise ShapeError("parameter, gradient and optimizer keys differ")
    for k, g in grads.items():
        if g.shape != params[k].shape:
            raise ShapeError(f"gradient {k} has shape {g.shape}, parameter has {params[k].shape}")
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient in {k}")
    step = state.step + 1
    c1 = 1.0 - state.beta1 ** step
    c2 = 1.0 - state.beta2 ** step
    new_p, new_m, new_v = {}, {}, {}
    for k in params:
        g = grads[k]
        m = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        new_p[k] = params[k] - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_m[k], new_v[k] = m, v
    state = OptimizerState(state.lr, new_m, new_v, step, state.beta1, state.beta2, state.eps, state.algorithm)
    return new_p, state


# --- gradient check ---------------------------------------------------------------


def gradcheck(loss_and_grad: Callable, params: Mapping[str, np.ndarray], epsilon=1e-5,
              max_params=10_000, seed=0) -> float:
    """Largest relative error between analytic and central-difference gradients.

    ``loss_and_grad(params) -> (loss, grads)``. Relative error uses the
    denominator max(|a|, |b|, 1e-8). Above ``max_params`` scalars a seeded random
    subset of that size is checked.
    """
    if not 0 < epsilon <= 1e-2:
        raise ValueError("epsilon must lie in (0, 1e-2]")
    loss, grads = loss_and_grad(params)
    if not np.isfinite(loss):
        raise ValueError("non-finite loss at the check point")
    slots = [(k, i) for k in params for i in range(params[k].size)]
    if len(slots) > max_params:
        pick = np.random.default_rng(seed).choice(len(slots), max_params, replace=False)
        slots = [slots[j] for j in sorted(pick)]

    worst = 0.0
    for k, i in slots:
        base = params[k]
        vals = []
        for sign in (1.0, -1.0):
            bumped = base.copy()
            bumped.flat[i] += sign * epsilon
            f, _ = loss_and_grad({**params, k: bumped})
            if not np.isfinite(f):
                raise ValueError(f"non-finite loss perturbing {k}[{i}]")
            vals.append(f)
        numeric = (vals[0] - vals[1]) / (2.0 * epsilon)
        analytic = float(np.asarray(grads[k]).flat[i])
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
