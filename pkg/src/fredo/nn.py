"""Dense layers, the Mixer block, MSE/MAE, reverse-mode gradients and Adam.

Everything works on a single vector ``(d,)`` or on a batch ``(B, d)``; batch
gradients are sums over the batch axis (the loss carries the 1/B).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoForwardCache, ShapeMismatch


@dataclass(frozen=True)
class LinearLayer:
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ShapeMismatch(f"weights {w.shape} incompatible with bias {b.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class MixerBlock:
    first: LinearLayer
    second: LinearLayer

    def __post_init__(self):
        dim = self.first.out_dim
        if {self.first.in_dim, self.second.in_dim, self.second.out_dim} != {dim}:
            raise ShapeMismatch("mixer layers must both be square with the same width")

    @property
    def dim(self) -> int:
        return self.first.out_dim


@dataclass(frozen=True)
class ModelParams:
    """Input projection I->O followed by ``depth`` Mixer blocks of width O."""

    input_proj: LinearLayer
    mixers: tuple[MixerBlock, ...]

    def __post_init__(self):
        mixers = tuple(self.mixers)
        if not mixers:
            raise ShapeMismatch("at least one mixer block is required")
        for k, block in enumerate(mixers):
            if block.dim != self.input_proj.out_dim:
                raise ShapeMismatch(f"mixer {k} has width {block.dim}, expected {self.input_proj.out_dim}")
        object.__setattr__(self, "mixers", mixers)

    @property
    def input_len(self) -> int:
        return self.input_proj.in_dim

    @property
    def output_len(self) -> int:
        return self.input_proj.out_dim

    @property
    def depth(self) -> int:
        return len(self.mixers)

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        out = [("input_proj.weights", self.input_proj.weights), ("input_proj.bias", self.input_proj.bias)]
        for k, block in enumerate(self.mixers):
            for part in ("first", "second"):
                layer = getattr(block, part)
                out.append((f"mixers.{k}.{part}.weights", layer.weights))
                out.append((f"mixers.{k}.{part}.bias", layer.bias))
        return out

    def tensors(self) -> list[np.ndarray]:
        return [t for _, t in self.named_tensors()]

    @classmethod
    def from_tensors(cls, tensors) -> "ModelParams":
        tensors = list(tensors)
        if len(tensors) < 6 or (len(tensors) - 2) % 4:
            raise ShapeMismatch(f"cannot build params from {len(tensors)} tensors")
        proj = LinearLayer(tensors[0], tensors[1])
        mixers = []
        for k in range(2, len(tensors), 4):
            mixers.append(
                MixerBlock(LinearLayer(tensors[k], tensors[k + 1]), LinearLayer(tensors[k + 2], tensors[k + 3]))
            )
        return cls(proj, tuple(mixers))

    def map(self, fn, *others: "ModelParams") -> "ModelParams":
        for other in others:
            if [t.shape for t in other.tensors()] != [t.shape for t in self.tensors()]:
                raise ShapeMismatch("parameter structures differ")
        columns = zip(self.tensors(), *(o.tensors() for o in others))
        return ModelParams.from_tensors([fn(*ts) for ts in columns])

    def zeros_like(self) -> "ModelParams":
        return self.map(np.zeros_like)

    def copy(self) -> "ModelParams":
        return self.map(np.copy)

    def num_parameters(self) -> int:
        return sum(t.size for t in self.tensors())


def init_params(input_len: int, output_len: int, depth: int, rng: np.random.Generator) -> ModelParams:
    """Uniform(+-1/sqrt(fan_in)) weights; every mixer's second layer starts at zero.

    A zero second layer makes each block output exactly zero, so the stack
    contributes nothing until training moves it.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    bound = 1.0 / np.sqrt(input_len)
    proj = LinearLayer(
        rng.uniform(-bound, bound, size=(output_len, input_len)),
        rng.uniform(-bound, bound, size=output_len),
    )
    bound = 1.0 / np.sqrt(output_len)
    mixers = []
    for _ in range(depth):
        first = LinearLayer(
            rng.uniform(-bound, bound, size=(output_len, output_len)),
            rng.uniform(-bound, bound, size=output_len),
        )
        second = LinearLayer(np.zeros((output_len, output_len)), np.zeros(output_len))
        mixers.append(MixerBlock(first, second))
    return ModelParams(proj, tuple(mixers))


def relu(x):
    return np.maximum(x, 0.0)


def linear_forward(layer: LinearLayer, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.in_dim:
        raise ShapeMismatch(f"layer expects width {layer.in_dim}, got {x.shape[-1]}")
    return x @ layer.weights.T + layer.bias


def linear_backward(layer: LinearLayer, x, upstream):
    """Returns ``(dW, db, dx)`` for ``y = W x + b``."""
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    g2 = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    if g2.shape[-1] != layer.out_dim or x2.shape[0] != g2.shape[0]:
        raise ShapeMismatch("upstream gradient does not match layer output")
    dw = g2.T @ x2
    db = g2.sum(axis=0)
    dx = np.asarray(upstream) @ layer.weights
    return dw, db, dx


def mixer_forward(block: MixerBlock, x) -> np.ndarray:
    return linear_forward(block.second, relu(linear_forward(block.first, x)))


@dataclass
class ForwardCache:
    x: np.ndarray
    # per mixer: (block input, first-layer pre-activation)
    mixer_inputs: list = field(default_factory=list)


def stack_forward(params: ModelParams, x):
    """Input projection then the Mixer blocks in order; returns ``(out, cache)``."""
    x = np.asarray(x, dtype=np.float64)
    h = linear_forward(params.input_proj, x)
    cache = ForwardCache(x)
    for block in params.mixers:
        pre = linear_forward(block.first, h)
        cache.mixer_inputs.append((h, pre))
        h = linear_forward(block.second, relu(pre))
    return h, cache


def backward(params: ModelParams, cache: ForwardCache | None, upstream):
    """Reverse pass of :func:`stack_forward`; returns ``(grads, dx)``.

    ``grads`` has the same structure as ``params``.  ReLU'(0) is taken as 0.
    """
    if cache is None or len(cache.mixer_inputs) != params.depth:
        raise NoForwardCache("backward called without a matching forward cache")
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape[:-1] != cache.x.shape[:-1] or g.shape[-1] != params.output_len:
        raise ShapeMismatch(f"upstream gradient shape {g.shape} does not match the forward pass")
    mixer_grads = []
    for block, (h_in, pre) in zip(reversed(params.mixers), reversed(cache.mixer_inputs)):
        act = relu(pre)
        dw2, db2, dact = linear_backward(block.second, act, g)
        dpre = dact * (pre > 0)
        dw1, db1, g = linear_backward(block.first, h_in, dpre)
        mixer_grads.append(MixerBlock(LinearLayer(dw1, db1), LinearLayer(dw2, db2)))
    dwp, dbp, dx = linear_backward(params.input_proj, cache.x, g)
    grads = ModelParams(LinearLayer(dwp, dbp), tuple(reversed(mixer_grads)))
    return grads, dx


def _pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target {target.shape}")
    if pred.size == 0:
        raise ShapeMismatch("empty prediction")
    return pred, target


def mse(pred, target) -> float:
    pred, target = _pair(pred, target)
    return float(np.mean((pred - target) ** 2))


def mae(pred, target) -> float:
    pred, target = _pair(pred, target)
    return float(np.mean(np.abs(pred - target)))


def mse_grad(pred, target) -> np.ndarray:
    pred, target = _pair(pred, target)
    return 2.0 * (pred - target) / pred.size


@dataclass(frozen=True)
class AdamState:
    first_moment: ModelParams
    second_moment: ModelParams
    step_count: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, params: ModelParams, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        zeros = params.zeros_like()
        return cls(zeros, zeros.copy(), 0, lr, beta1, beta2, eps)


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState):
    """One bias-corrected Adam update; returns new ``(params, state)``."""
    b1, b2 = state.beta1, state.beta2
    step = state.step_count + 1
    m = state.first_moment.map(lambda m_, g: b1 * m_ + (1 - b1) * g, grads)
    v = state.second_moment.map(lambda v_, g: b2 * v_ + (1 - b2) * g * g, grads)
    c1 = 1 - b1**step
    c2 = 1 - b2**step
    lr, eps = state.lr, state.eps
    new_params = params.map(lambda p, m_, v_: p - lr * (m_ / c1) / (np.sqrt(v_ / c2) + eps), m, v)
    new_state = AdamState(m, v, step, state.lr, b1, b2, eps)
    return new_params, new_state


def finite_difference_gradients(loss_fn, params: ModelParams, h: float = 1e-5) -> ModelParams:
    """Central differences of ``loss_fn(params)`` w.r.t. every scalar parameter."""
    base = [t.copy() for t in params.tensors()]
    grads = []
    for k, tensor in enumerate(base):
        g = np.zeros_like(tensor)
        flat = tensor.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = loss_fn(ModelParams.from_tensors(base))
            flat[j] = orig - h
            down = loss_fn(ModelParams.from_tensors(base))
            flat[j] = orig
            g.reshape(-1)[j] = (up - down) / (2 * h)
        grads.append(g)
    return ModelParams.from_tensors(grads)
