"""Frame-context feed-forward complex mask estimator with hand-written gradients.

The network reads ``context_frames`` neighbouring log-magnitude frames and emits
a bounded complex mask per frame:

    mask = B * tanh(u) + 1j * B * tanh(v)

Gradients of the time-domain MSE are propagated through the inverse STFT by
its adjoint, through the complex mask product, and through the layers. The
input features are treated as constants.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .signal import Waveform
from .stft import Mask, StftParams, bin_weights, istft, istft_adjoint, log_magnitude, stft

CHECKPOINT_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class MaskNetConfig:
    input_bins: int = 257
    context_frames: int = 5
    hidden_sizes: tuple[int, ...] = (256, 256)
    mask_bound: float = 2.0
    activation: str = "relu"
    # Glorot draw of the output layer is shrunk by this factor so the
    # untrained mask starts near 1+0i
    output_init_scale: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.input_bins < 1:
            raise ModelError(f"input_bins must be >= 1, got {self.input_bins}")
        if self.context_frames < 1 or self.context_frames % 2 == 0:
            raise ModelError(f"context_frames must be odd and >= 1, got {self.context_frames}")
        if any(h < 1 for h in self.hidden_sizes):
            raise ModelError(f"hidden sizes must be >= 1, got {self.hidden_sizes}")
        if not self.mask_bound > 0:
            raise ModelError(f"mask_bound must be positive, got {self.mask_bound}")
        if self.activation not in ("relu", "tanh"):
            raise ModelError(f"activation must be 'relu' or 'tanh', got {self.activation!r}")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.context_frames * self.input_bins, *self.hidden_sizes, 2 * self.input_bins]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d


@dataclass(eq=False)
class MaskNet:
    config: MaskNetConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        sizes = self.config.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ModelError("layer count does not match config")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ModelError(f"layer {i} has shapes {W.shape}/{b.shape}, expected "
                                 f"{(sizes[i], sizes[i + 1])}/{(sizes[i + 1],)}")

    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "MaskNet":
        return MaskNet(self.config, [W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    @classmethod
    def identity(cls, config: MaskNetConfig) -> "MaskNet":
        """Net whose mask is exactly 1+0i for every input."""
        sizes = config.layer_sizes
        weights = [np.zeros((sizes[i], sizes[i + 1])) for i in range(len(sizes) - 1)]
        biases = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]
        biases[-1][:config.input_bins] = _identity_logit(config.mask_bound)
        return cls(config, weights, biases)


def _identity_logit(bound: float) -> float:
    # tanh(u) * bound == 1; bounds <= 1 cannot reach 1, take the closest value
    return math.atanh(min(1.0 / bound, 1.0 - 1e-12))


def init(config: MaskNetConfig, seed=0) -> MaskNet:
    rng = np.random.default_rng(seed)
    sizes = config.layer_sizes
    weights, biases = [], []
    for i in range(len(sizes) - 1):
        a = math.sqrt(6.0 / (sizes[i] + sizes[i + 1]))
        W = rng.uniform(-a, a, size=(sizes[i], sizes[i + 1]))
        if i == len(sizes) - 2:
            W *= config.output_init_scale
        weights.append(W)
        biases.append(np.zeros(sizes[i + 1]))
    biases[-1][:config.input_bins] = _identity_logit(config.mask_bound)
    return MaskNet(config, weights, biases)


def _network_input(net: MaskNet, feats: np.ndarray) -> np.ndarray:
    cfg = net.config
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] != cfg.input_bins:
        raise ModelError(f"features must have shape ({cfg.input_bins}, K), got {feats.shape}")
    # per-utterance standardization, no learned parameters
    z = feats - feats.mean()
    std = z.std()
    if std > 0:
        z = z / std
    K = z.shape[1]
    half = cfg.context_frames // 2
    idx = np.clip(np.arange(K)[:, None] + np.arange(-half, half + 1)[None, :], 0, K - 1)
    return z.T[idx].reshape(K, cfg.context_frames * cfg.input_bins)


def _forward(net: MaskNet, feats: np.ndarray):
    act = np.maximum if net.config.activation == "relu" else None
    h = _network_input(net, feats)
    acts = [h]
    n_layers = len(net.weights)
    for i in range(n_layers - 1):
        pre = h @ net.weights[i] + net.biases[i]
        h = act(pre, 0.0) if act is not None else np.tanh(pre)
        acts.append(h)
    out = h @ net.weights[-1] + net.biases[-1]
    F = net.config.input_bins
    tu, tv = np.tanh(out[:, :F]), np.tanh(out[:, F:])
    B = net.config.mask_bound
    mask = (B * tu + 1j * B * tv).T
    return mask, (acts, tu, tv)


def forward(net: MaskNet, feats: np.ndarray) -> Mask:
    mask, _ = _forward(net, feats)
    return Mask(mask)


def enhance(net: MaskNet, w: Waveform, p: StftParams = StftParams()) -> Waveform:
    X = stft(w, p)
    mask, _ = _forward(net, log_magnitude(X))
    return istft(X.with_bins(mask * X.bins))


def loss(est: Waveform, target: Waveform) -> float:
    """Mean squared error (1/T)*||est - target||^2."""
    a = est.samples if isinstance(est, Waveform) else np.asarray(est, dtype=np.float64)
    b = target.samples if isinstance(target, Waveform) else np.asarray(target, dtype=np.float64)
    if a.shape != b.shape:
        raise ModelError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    d = a - b
    return float(np.dot(d, d) / d.size)


def _check_finite(arr: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"non-finite values in {where}")


def backward(net: MaskNet, w: Waveform, target: Waveform, p: StftParams = StftParams()):
    """Loss and gradients of the time-domain MSE for one (input, target) pair.

    Returns ``(loss, grads)`` with ``grads`` aligned to ``net.params()``.
    """
    if len(w) != len(target):
        raise ModelError(f"length mismatch: input {len(w)} vs target {len(target)}")
    X = stft(w, p)
    mask, (acts, tu, tv) = _forward(net, log_magnitude(X))
    est = istft(X.with_bins(mask * X.bins)).samples
    resid = est - target.samples
    T = resid.size
    value = float(np.dot(resid, resid) / T)

    G = istft_adjoint(Waveform(2.0 / T * resid, w.sample_rate), p).bins
    # dL/d(mask) as a complex number: real part -> d/dRe, imag part -> d/dIm
    gmask = bin_weights(p.win_len)[:, None] * np.conj(X.bins) * G
    B = net.config.mask_bound
    dout = np.hstack([(gmask.real.T * B) * (1.0 - tu ** 2), (gmask.imag.T * B) * (1.0 - tv ** 2)])
    _check_finite(dout, "output layer")

    n_layers = len(net.weights)
    gW = [None] * n_layers
    gb = [None] * n_layers
    delta = dout
    for i in range(n_layers - 1, -1, -1):
        gW[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        _check_finite(gW[i], f"layer {i} weight gradient")
        if i > 0:
            delta = delta @ net.weights[i].T
            if net.config.activation == "relu":
                delta = delta * (acts[i] > 0)
            else:
                delta = delta * (1.0 - acts[i] ** 2)
    grads = []
    for i in range(n_layers):
        grads += [gW[i], gb[i]]
    return value, grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: MaskNet, lr: float = 1e-4, **kw) -> "AdamState":
        params = net.params()
        return cls([np.zeros_like(q) for q in params], [np.zeros_like(q) for q in params], lr=lr, **kw)


def adam_step(net: MaskNet, grads: list[np.ndarray], state: AdamState):
    """One bias-corrected Adam update, in place. Returns ``(net, state)``."""
    params = net.params()
    if len(grads) != len(params) or len(state.m) != len(params):
        raise ModelError("gradient / state count does not match parameters")
    for q, g in zip(params, grads):
        if q.shape != g.shape:
            raise ModelError(f"gradient shape {g.shape} does not match parameter {q.shape}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for q, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        q -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return net, state


def save_checkpoint(path, net: MaskNet, state: AdamState | None = None, extra: dict | None = None) -> None:
    header = {
        "version": CHECKPOINT_VERSION,
        "config": net.config.to_dict(),
        "adam": None if state is None else {
            "t": state.t, "lr": state.lr, "beta1": state.beta1, "beta2": state.beta2, "eps": state.eps,
        },
        "extra": extra or {},
    }
    arrays = {"header": np.array(json.dumps(header, sort_keys=True))}
    for i, q in enumerate(net.params()):
        arrays[f"param_{i}"] = q
    if state is not None:
        for i, (m, v) in enumerate(zip(state.m, state.v)):
            arrays[f"adam_m_{i}"] = m
            arrays[f"adam_v_{i}"] = v
    with open(Path(path), "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[MaskNet, AdamState | None, dict]:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ModelError(f"{path}: unsupported checkpoint version {header.get('version')}")
        config = MaskNetConfig(**header["config"])
        n = 2 * (len(config.layer_sizes) - 1)
        params = [data[f"param_{i}"].copy() for i in range(n)]
        net = MaskNet(config, params[0::2], params[1::2])
        state = None
        if header["adam"] is not None:
            state = AdamState(
                [data[f"adam_m_{i}"].copy() for i in range(n)],
                [data[f"adam_v_{i}"].copy() for i in range(n)],
                **header["adam"],
            )
    return net, state, header["extra"]
