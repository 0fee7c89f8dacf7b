"""Minimal deterministic NN engine: dense, 3x3 conv, maxpool, LSTM, with
pluggable scalar activations from the catalog.

All tensors are row-major f32 numpy arrays.  Every layer output (forward and
backward) is finiteness-checked so a NaN/Inf surfaces as a structured
DivergenceSignal carrying the offending layer index, never as a crash.
A model instance is confined to one thread during training (layers cache
their forward state on self).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .activations import ActivationSpec, get_activation
from .errors import ConfigError

F32 = np.float32

# Tensor == np.ndarray(dtype=float32, C-order); helpers below enforce it.


def as_tensor(arr) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype=F32)


class DivergenceSignal(Exception):
    """Non-finite value detected; carries where it first appeared."""

    def __init__(self, layer: int, phase: str):
        super().__init__(f"non-finite values after layer {layer} ({phase})")
        self.layer = layer
        self.phase = phase


def _assert_finite(arr, layer: int, phase: str):
    # f64 accumulation: finite f32 entries cannot overflow the sum, so a
    # non-finite total proves a NaN/Inf entry without allocating a mask
    if not math.isfinite(float(arr.sum(dtype=np.float64))):
        raise DivergenceSignal(layer, phase)


class _ActHandle:
    """Element-wise f32 application of one catalog activation, with element
    counting on the forward path (the accounting the LSTM invariant needs)."""

    def __init__(self, spec: ActivationSpec, counters: dict, slot: str):
        self.spec = spec
        self.slot = slot
        self.counters = counters
        self._fn = kernels.ufunc(spec.name)
        self._dfn = kernels.ufunc_deriv(spec.name)

    def value(self, z):
        self.counters[self.slot] = self.counters.get(self.slot, 0) + z.size
        return self._fn(z)

    def grad(self, z):
        return self._dfn(z)


def _uniform_init(rng, shape, fan_in):
    limit = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(F32)


# ---------------------------------------------------------------------------
# layers


class Dense:
    def __init__(self, rng, n_in: int, n_out: int, act: _ActHandle | None):
        self.n_in, self.n_out = n_in, n_out
        self.act = act
        self.params = {
            "W": _uniform_init(rng, (n_in, n_out), n_in),
            "b": np.zeros(n_out, dtype=F32),
        }
        self.grads = {}

    def forward(self, x):
        lead = x.shape[:-1]
        x2 = x.reshape(-1, self.n_in)
        z = x2 @ self.params["W"] + self.params["b"]
        y = self.act.value(z) if self.act is not None else z
        self._cache = (x2, z, lead)
        return y.reshape(lead + (self.n_out,))

    def backward(self, gy):
        x2, z, lead = self._cache
        g2 = gy.reshape(-1, self.n_out)
        gz = g2 * self.act.grad(z) if self.act is not None else g2
        self.grads["W"] = x2.T @ gz
        self.grads["b"] = gz.sum(axis=0)
        return (gz @ self.params["W"].T).reshape(lead + (self.n_in,))


class Conv2d:
    """Valid 3x3 (or kxk) convolution, stride 1, via im2col."""

    def __init__(self, rng, in_ch: int, out_ch: int, k: int, act: _ActHandle | None):
        self.in_ch, self.out_ch, self.k = in_ch, out_ch, k
        self.act = act
        self.params = {
            "W": _uniform_init(rng, (out_ch, in_ch * k * k), in_ch * k * k),
            "b": np.zeros(out_ch, dtype=F32),
        }
        self.grads = {}

    def _im2col(self, x):
        b, c, h, w = x.shape
        k = self.k
        oh, ow = h - k + 1, w - k + 1
        cols = np.empty((b, c * k * k, oh * ow), dtype=F32)
        idx = 0
        for ci in range(c):
            for di in range(k):
                for dj in range(k):
                    cols[:, idx, :] = x[:, ci, di:di + oh, dj:dj + ow].reshape(b, -1)
                    idx += 1
        return cols, (oh, ow)

    def forward(self, x):
        cols, (oh, ow) = self._im2col(x)
        z = np.matmul(self.params["W"][None, :, :], cols)
        z += self.params["b"][None, :, None]
        y = self.act.value(z) if self.act is not None else z
        self._cache = (x.shape, cols, z, oh, ow)
        return y.reshape(x.shape[0], self.out_ch, oh, ow)

    def backward(self, gy):
        x_shape, cols, z, oh, ow = self._cache
        b = x_shape[0]
        g = gy.reshape(b, self.out_ch, oh * ow)
        gz = g * self.act.grad(z) if self.act is not None else g
        self.grads["W"] = np.matmul(gz, cols.transpose(0, 2, 1)).sum(axis=0)
        self.grads["b"] = gz.sum(axis=(0, 2))
        gcols = np.matmul(self.params["W"].T[None, :, :], gz)
        gx = np.zeros(x_shape, dtype=F32)
        k = self.k
        idx = 0
        for ci in range(x_shape[1]):
            for di in range(k):
                for dj in range(k):
                    gx[:, ci, di:di + oh, dj:dj + ow] += gcols[:, idx, :].reshape(b, oh, ow)
                    idx += 1
        return gx


class MaxPool:
    def __init__(self, k: int):
        if k != 2:
            raise ConfigError(f"maxpool supports k=2 only, got {k}")
        self.k = k
        self.params = {}
        self.grads = {}

    def forward(self, x):
        b, c, h, w = x.shape
        oh, ow = h // 2, w // 2
        xr = (x[:, :, : oh * 2, : ow * 2]
              .reshape(b, c, oh, 2, ow, 2)
              .transpose(0, 1, 2, 4, 3, 5)
              .reshape(b, c, oh, ow, 4))
        self._arg = xr.argmax(axis=-1)
        self._shape = (b, c, h, w, oh, ow)
        return np.take_along_axis(xr, self._arg[..., None], axis=-1)[..., 0]

    def backward(self, gy):
        b, c, h, w, oh, ow = self._shape
        g5 = np.zeros((b, c, oh, ow, 4), dtype=F32)
        np.put_along_axis(g5, self._arg[..., None], gy[..., None], axis=-1)
        gx = (g5.reshape(b, c, oh, ow, 2, 2)
              .transpose(0, 1, 2, 4, 3, 5)
              .reshape(b, c, oh * 2, ow * 2))
        if oh * 2 != h or ow * 2 != w:
            full = np.zeros((b, c, h, w), dtype=F32)
            full[:, :, : oh * 2, : ow * 2] = gx
            gx = full
        return gx


class Flatten:
    def __init__(self):
        self.params = {}
        self.grads = {}

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, gy):
        return gy.reshape(self._shape)


@dataclass(frozen=True)
class LstmGateConfig:
    """Which catalog function fills each LSTM slot: the gate sigmoid is
    applied 3x per unit per timestep (input/forget/output gates), the cell
    tanh 2x (candidate and cell-output transform)."""

    gate_sigmoid: str
    cell_tanh: str

    def resolve(self):
        return get_activation(self.gate_sigmoid), get_activation(self.cell_tanh)


class LSTM:
    """Single-layer LSTM over a full (B, T, n_in) sequence, gate order
    [input, forget, output | candidate] so one sigmoid-slot application
    covers all three gates."""

    def __init__(self, rng, n_in: int, n_hidden: int,
                 gates: LstmGateConfig, counters: dict):
        self.n_in, self.h = n_in, n_hidden
        sig_spec, tanh_spec = gates.resolve()
        self.sig = _ActHandle(sig_spec, counters, "sigm")
        self.tan = _ActHandle(tanh_spec, counters, "tanh")
        self.params = {
            "Wx": _uniform_init(rng, (n_in, 4 * n_hidden), n_in),
            "Wh": _uniform_init(rng, (n_hidden, 4 * n_hidden), n_hidden),
            "b": np.zeros(4 * n_hidden, dtype=F32),
        }
        self.grads = {}

    def forward(self, x):
        b, t, _ = x.shape
        hsz = self.h
        h = np.zeros((b, hsz), dtype=F32)
        c = np.zeros((b, hsz), dtype=F32)
        steps = []
        out = np.empty((b, t, hsz), dtype=F32)
        for ti in range(t):
            xt = x[:, ti, :]
            z = xt @ self.params["Wx"] + h @ self.params["Wh"] + self.params["b"]
            zs = z[:, : 3 * hsz]
            zg = z[:, 3 * hsz:]
            s = self.sig.value(zs)       # 3 sigmoid-slot elements per unit
            g = self.tan.value(zg)       # 1st tanh-slot application
            i, f, o = s[:, :hsz], s[:, hsz: 2 * hsz], s[:, 2 * hsz:]
            c_new = f * c + i * g
            tc = self.tan.value(c_new)   # 2nd tanh-slot application
            h_new = o * tc
            steps.append((xt, h, c, zs, zg, i, f, o, g, c_new, tc))
            h, c = h_new, c_new
            out[:, ti, :] = h_new
        self._steps = steps
        self._in_shape = x.shape
        return out

    def backward(self, gy):
        b, t, _ = self._in_shape
        hsz = self.h
        gWx = np.zeros_like(self.params["Wx"])
        gWh = np.zeros_like(self.params["Wh"])
        gb = np.zeros_like(self.params["b"])
        gx = np.empty(self._in_shape, dtype=F32)
        dh_next = np.zeros((b, hsz), dtype=F32)
        dc_next = np.zeros((b, hsz), dtype=F32)
        for ti in range(t - 1, -1, -1):
            xt, h_prev, c_prev, zs, zg, i, f, o, g, c_new, tc = self._steps[ti]
            dh = gy[:, ti, :] + dh_next
            do = dh * tc
            dc = dh * o * self.tan.grad(c_new) + dc_next
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            ds = np.concatenate([di, df, do], axis=1) * self.sig.grad(zs)
            dzg = dg * self.tan.grad(zg)
            dz = np.concatenate([ds, dzg], axis=1)
            gWx += xt.T @ dz
            gWh += h_prev.T @ dz
            gb += dz.sum(axis=0)
            gx[:, ti, :] = dz @ self.params["Wx"].T
            dh_next = dz @ self.params["Wh"].T
            dc_next = dc * f
        self.grads = {"Wx": gWx, "Wh": gWh, "b": gb}
        return gx


# ---------------------------------------------------------------------------
# model container


@dataclass(frozen=True)
class LayerSpec:
    """Declarative layer description; build_model turns a list of these into
    runtime layers.  activation is a catalog name or None for identity."""

    kind: str  # dense | conv2d | maxpool | lstm | flatten
    params: dict = field(default_factory=dict)
    activation: str | None = None
    slot: str = "act"


class Model:
    def __init__(self, layers, counters: dict):
        self.layers = layers
        self.counters = counters

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def forward(self, x):
        for idx, layer in enumerate(self.layers):
            x = layer.forward(x)
            _assert_finite(x, idx, "forward")
        return x

    def backward(self, gy):
        for idx in range(len(self.layers) - 1, -1, -1):
            gy = self.layers[idx].backward(gy)
            _assert_finite(gy, idx, "backward")
        return gy

    def param_items(self):
        """Deterministically ordered (key, param, grad) triples."""
        out = []
        for idx, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                out.append((f"{idx}.{name}", layer.params[name],
                            layer.grads.get(name)))
        return out


def build_model(layer_specs, rng, counters: dict | None = None) -> Model:
    counters = counters if counters is not None else {}
    layers = []
    for ls in layer_specs:
        act = None
        if ls.activation is not None:
            act = _ActHandle(get_activation(ls.activation), counters, ls.slot)
        if ls.kind == "dense":
            layers.append(Dense(rng, ls.params["n_in"], ls.params["n_out"], act))
        elif ls.kind == "conv2d":
            layers.append(Conv2d(rng, ls.params["in_ch"], ls.params["out_ch"],
                                 ls.params.get("k", 3), act))
        elif ls.kind == "maxpool":
            layers.append(MaxPool(ls.params.get("k", 2)))
        elif ls.kind == "flatten":
            layers.append(Flatten())
        elif ls.kind == "lstm":
            gates = ls.params["gates"]
            layers.append(LSTM(rng, ls.params["n_in"], ls.params["n_hidden"],
                               gates, counters))
        else:
            raise ConfigError(f"unknown layer kind {ls.kind!r}")
    return Model(layers, counters)


# ---------------------------------------------------------------------------
# losses


def softmax_cross_entropy(logits, labels):
    """Fused stable softmax + NLL, mean over all classified positions."""
    flat = logits.reshape(-1, logits.shape[-1])
    lab = labels.reshape(-1)
    z = flat - flat.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    n = flat.shape[0]
    eps = np.float32(1e-30)  # guard log(0) from f32 underflow
    loss = float(-np.log(p[np.arange(n), lab] + eps).mean())
    grad = p
    grad[np.arange(n), lab] -= 1.0
    grad /= np.float32(n)
    return loss, grad.reshape(logits.shape)


def mse_loss(out, target):
    """Sum over features, mean over batch rows."""
    d = out - target
    b = out.shape[0]
    loss = float((d.astype(np.float64) ** 2).sum() / b)
    grad = (2.0 / b) * d
    return loss, grad.astype(F32)


LOSSES = {"cross_entropy": softmax_cross_entropy, "mse": mse_loss}


# ---------------------------------------------------------------------------
# optimization


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 64
    seed: int = 0
    optimizer: str = "adam"  # adam | sgd
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: str = "cross_entropy"
    divergence_threshold: float = 1e4

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


class Adam:
    def __init__(self, lr, beta1, beta2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {}
        self.v = {}

    def step(self, items, t):
        b1, b2 = np.float32(self.b1), np.float32(self.b2)
        bias1 = 1.0 - self.b1 ** t
        bias2 = 1.0 - self.b2 ** t
        alpha = np.float32(self.lr * math.sqrt(bias2) / bias1)
        eps = np.float32(self.eps * math.sqrt(bias2))
        for key, p, g in items:
            if g is None:
                continue
            m = self.m.get(key)
            if m is None:
                m = self.m[key] = np.zeros_like(p)
                self.v[key] = np.zeros_like(p)
            v = self.v[key]
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            p -= alpha * m / (np.sqrt(v) + eps)


class Sgd:
    def __init__(self, lr):
        self.lr = np.float32(lr)

    def step(self, items, t):
        for _, p, g in items:
            if g is not None:
                p -= self.lr * g


def make_optimizer(config: TrainConfig):
    if config.optimizer == "adam":
        return Adam(config.lr, config.beta1, config.beta2, config.eps)
    return Sgd(config.lr)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainTrace:
    epoch_losses: list
    cumulative_seconds: list
    status: str  # converged | diverged | nan
    layer: int | None
    total_seconds: float
    final_loss: float | None

    def records(self, omit_timing: bool = False) -> list:
        out = []
        for i, loss in enumerate(self.epoch_losses):
            rec = {"epoch": i, "loss": loss}
            if not omit_timing:
                rec["cumulative_seconds"] = self.cumulative_seconds[i]
            out.append(rec)
        summary = {"status": self.status, "final_loss": self.final_loss}
        if self.layer is not None:
            summary["layer"] = self.layer
        if not omit_timing:
            summary["total_seconds"] = self.total_seconds
        out.append(summary)
        return out


def train(model: Model, make_epoch_batches, config: TrainConfig) -> TrainTrace:
    """Run the full loop; divergence is an outcome, never an exception.

    make_epoch_batches(epoch) yields (x, y) f32 batches in a deterministic,
    seed-controlled order.  Timing covers the epoch loop only.
    """
    loss_fn = LOSSES[config.loss]
    opt = make_optimizer(config)
    epoch_losses = []
    cumulative = []
    status = "converged"
    fail_layer = None
    step = 0
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        batch_losses = []
        try:
            for xb, yb in make_epoch_batches(epoch):
                out = model.forward(xb)
                loss, grad = loss_fn(out, yb)
                if not math.isfinite(loss):
                    # non-finite at the loss stage; index one past the layers
                    status = "nan"
                    fail_layer = model.n_layers
                    break
                batch_losses.append(loss)
                if loss > config.divergence_threshold:
                    status = "diverged"
                    break
                model.backward(grad)
                step += 1
                opt.step(model.param_items(), step)
        except DivergenceSignal as sig:
            status = "nan"
            fail_layer = sig.layer
        if batch_losses:
            epoch_losses.append(float(np.mean(batch_losses)))
        else:
            epoch_losses.append(None)
        cumulative.append(time.perf_counter() - t0)
        if status != "converged":
            break
    total = time.perf_counter() - t0
    finite = [l for l in epoch_losses if l is not None]
    final_loss = finite[-1] if finite else None
    return TrainTrace(epoch_losses, cumulative, status, fail_layer, total, final_loss)


# ---------------------------------------------------------------------------
# inference benchmark


@dataclass(frozen=True)
class InferStats:
    per_inference_seconds: tuple
    total_seconds: float
    mean_seconds: float

    @property
    def n_samples(self) -> int:
        return len(self.per_inference_seconds)


def infer_benchmark(model: Model, inputs, repeat: int) -> InferStats:
    """repeat sequential single-batch forward passes, individually timed."""
    if repeat < 0:
        raise ConfigError(f"repeat must be >= 0, got {repeat}")
    if repeat == 0:
        return InferStats((), 0.0, 0.0)
    times = []
    n = len(inputs)
    for r in range(repeat):
        x = inputs[r % n]
        t0 = time.perf_counter()
        model.forward(x)
        times.append(time.perf_counter() - t0)
    total = float(sum(times))
    return InferStats(tuple(times), total, total / repeat)
