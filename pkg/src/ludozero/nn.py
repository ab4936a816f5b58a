"""Policy/value network in plain numpy with hand-written gradients.

Architecture: 3x3 conv stem, residual tower, a fully convolutional policy
head emitting ``A`` logit planes over the ``H x W`` grid, and a value head
that global-average-pools the trunk before two affine layers and ``tanh``.
Activations are kept channels-last, ``(B, H, W, C)``; logits are exposed
channel-major to match the codec's flat logit index.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import as_strided

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

Params = "OrderedDict[str, np.ndarray]"


class ShapeError(ValueError):
    pass


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    trunk_channels: int = 32
    residual_blocks: int = 4
    value_hidden: int = 32
    kernel: int = 3


@dataclass(frozen=True)
class NetShape:
    C: int
    A: int
    H: int
    W: int


def is_buffer(name: str) -> bool:
    """Running statistics are stored with the parameters but never trained."""
    return name.endswith(".mean") or name.endswith(".var")


# ---------------------------------------------------------------- primitives

def _windows(xp: np.ndarray, k: int, h: int, w: int) -> np.ndarray:
    """(B, H+k-1, W+k-1, C) padded input -> (B*H*W, k*k*C) patch matrix.

    Channels stay innermost so the copy moves contiguous runs.
    """
    b, _, _, c = xp.shape
    sb, sh, sw, sc = xp.strides
    view = as_strided(xp, (b, h, w, k, k, c), (sb, sh, sw, sh, sw, sc), writeable=False)
    return view.reshape(b * h * w, k * k * c)


def _matrix(weight: np.ndarray) -> np.ndarray:
    """(C_in, k, k, C_out) -> (k*k*C_in, C_out) in patch order."""
    return weight.transpose(1, 2, 0, 3).reshape(-1, weight.shape[-1])


def conv_forward(x: np.ndarray, weight: np.ndarray, bias: Optional[np.ndarray]):
    """Same-padded convolution. ``weight`` has shape (C_in, k, k, C_out)."""
    b, h, w, c = x.shape
    k = weight.shape[1]
    if k == 1:
        cols = x.reshape(b * h * w, c)
    else:
        p = k // 2
        xp = np.zeros((b, h + 2 * p, w + 2 * p, c), dtype=x.dtype)
        xp[:, p:p + h, p:p + w, :] = x
        cols = _windows(xp, k, h, w)
    out = cols @ _matrix(weight)
    if bias is not None:
        out += bias
    return out.reshape(b, h, w, -1), (cols, x.shape)


def conv_backward(dout: np.ndarray, weight: np.ndarray, cache, has_bias: bool):
    cols, (b, h, w, c) = cache
    k = weight.shape[1]
    co = weight.shape[-1]
    d2 = dout.reshape(-1, co)
    dweight = (cols.T @ d2).reshape(k, k, c, co).transpose(2, 0, 1, 3)
    dbias = d2.sum(axis=0) if has_bias else None
    dcols = d2 @ _matrix(weight).T
    if k == 1:
        return dcols.reshape(b, h, w, c), dweight, dbias
    p = k // 2
    dcols = dcols.reshape(b, h, w, k, k, c)
    dxp = np.zeros((b, h + 2 * p, w + 2 * p, c), dtype=dout.dtype)
    for i in range(k):
        for j in range(k):
            dxp[:, i:i + h, j:j + w, :] += dcols[:, :, :, i, j]
    return dxp[:, p:p + h, p:p + w, :], dweight, dbias


def bn_forward(x: np.ndarray, gamma, beta, mean, var, training: bool):
    if training:
        mu = x.mean(axis=(0, 1, 2))
        sigma2 = x.var(axis=(0, 1, 2))
    else:
        mu, sigma2 = mean, var
    inv = 1.0 / np.sqrt(sigma2 + BN_EPS)
    xhat = (x - mu) * inv
    return xhat * gamma + beta, (xhat, inv, gamma, training), (mu, sigma2)


def bn_backward(dout: np.ndarray, cache):
    xhat, inv, gamma, training = cache
    dgamma = (dout * xhat).sum(axis=(0, 1, 2))
    dbeta = dout.sum(axis=(0, 1, 2))
    dxhat = dout * gamma
    if not training:
        return dxhat * inv, dgamma, dbeta
    m = dout.shape[0] * dout.shape[1] * dout.shape[2]
    dx = (inv / m) * (m * dxhat - dxhat.sum(axis=(0, 1, 2)) - xhat * (dxhat * xhat).sum(axis=(0, 1, 2)))
    return dx, dgamma, dbeta


def relu_forward(x):
    return np.maximum(x, 0), x > 0


def relu_backward(dout, mask):
    return dout * mask


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax over ``mask``; masked-out entries are -inf."""
    z = np.where(mask, logits, -np.inf)
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return shifted - lse


# ---------------------------------------------------------------- parameters

def _conv_names(prefix: str) -> List[str]:
    return [f"{prefix}.w", f"{prefix}.bn.gamma", f"{prefix}.bn.beta", f"{prefix}.bn.mean", f"{prefix}.bn.var"]


def layer_prefixes(config: NetworkConfig) -> List[str]:
    out = ["stem"]
    for i in range(config.residual_blocks):
        out += [f"block{i}.conv1", f"block{i}.conv2"]
    out += ["policy.conv", "value.conv"]
    return out


def init_params(shape: NetShape, config: NetworkConfig = NetworkConfig(), seed: int = 0, dtype=np.float32) -> "OrderedDict[str, np.ndarray]":
    """Seeded fan-in scaled initialisation; zero biases; near-zero outputs."""
    rng = np.random.default_rng(seed)
    f = config.trunk_channels
    k = config.kernel
    params: "OrderedDict[str, np.ndarray]" = OrderedDict()

    def conv_bn(prefix: str, cin: int, cout: int, k: int = k):
        fan_in = cin * k * k
        params[f"{prefix}.w"] = rng.normal(0.0, math.sqrt(2.0 / fan_in), (cin, k, k, cout))
        params[f"{prefix}.bn.gamma"] = np.ones(cout)
        params[f"{prefix}.bn.beta"] = np.zeros(cout)
        params[f"{prefix}.bn.mean"] = np.zeros(cout)
        params[f"{prefix}.bn.var"] = np.ones(cout)

    conv_bn("stem", shape.C, f)
    for i in range(config.residual_blocks):
        conv_bn(f"block{i}.conv1", f, f)
        conv_bn(f"block{i}.conv2", f, f)
    conv_bn("policy.conv", f, f)
    params["policy.logits.w"] = rng.normal(0.0, 0.01, (f, 1, 1, shape.A))
    params["policy.logits.b"] = np.zeros(shape.A)
    conv_bn("value.conv", f, f, 1)
    params["value.fc1.w"] = rng.normal(0.0, math.sqrt(2.0 / f), (f, config.value_hidden))
    params["value.fc1.b"] = np.zeros(config.value_hidden)
    params["value.fc2.w"] = rng.normal(0.0, 0.01, (config.value_hidden, 1))
    params["value.fc2.b"] = np.zeros(1)
    return OrderedDict((k_, v.astype(dtype)) for k_, v in params.items())


def infer_config(params: Mapping[str, np.ndarray]) -> Tuple[NetShape, NetworkConfig]:
    blocks = sum(1 for name in params if name.endswith(".conv1.w"))
    stem = params["stem.w"]
    logits = params["policy.logits.w"]
    hidden = params["value.fc1.w"].shape[1]
    cfg = NetworkConfig(trunk_channels=stem.shape[-1], residual_blocks=blocks, value_hidden=hidden, kernel=stem.shape[1])
    return NetShape(C=stem.shape[0], A=logits.shape[-1], H=0, W=0), cfg


def parameter_count(params: Mapping[str, np.ndarray]) -> int:
    return int(sum(v.size for k, v in params.items() if not is_buffer(k)))


# ---------------------------------------------------------------- network

class _Trace:
    """Caches of one training-mode forward pass."""

    def __init__(self):
        self.layers: Dict[str, tuple] = {}
        self.stats: Dict[str, tuple] = {}


def _conv_bn_relu(params, prefix, x, training, trace, relu=True):
    y, ccache = conv_forward(x, params[f"{prefix}.w"], None)
    y, bcache, stats = bn_forward(
        y, params[f"{prefix}.bn.gamma"], params[f"{prefix}.bn.beta"],
        params[f"{prefix}.bn.mean"], params[f"{prefix}.bn.var"], training)
    mask = None
    if relu:
        y, mask = relu_forward(y)
    if trace is not None:
        trace.layers[prefix] = (ccache, bcache, mask)
        trace.stats[prefix] = stats
    return y


def _conv_bn_relu_back(params, prefix, dy, trace, grads):
    ccache, bcache, mask = trace.layers[prefix]
    if mask is not None:
        dy = relu_backward(dy, mask)
    dy, dgamma, dbeta = bn_backward(dy, bcache)
    grads[f"{prefix}.bn.gamma"] = dgamma
    grads[f"{prefix}.bn.beta"] = dbeta
    dx, dw, _ = conv_backward(dy, params[f"{prefix}.w"], ccache, has_bias=False)
    grads[f"{prefix}.w"] = dw
    return dx


def forward_batch(params, x: np.ndarray, training: bool = True, trace: Optional[_Trace] = None):
    """``x``: (B, C, H, W) channel-major.  Returns (logits (B, A*H*W), value (B,), pre-tanh (B,))."""
    blocks = sum(1 for name in params if name.endswith(".conv1.w"))
    h = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    h = _conv_bn_relu(params, "stem", h, training, trace)
    for i in range(blocks):
        skip = h
        y = _conv_bn_relu(params, f"block{i}.conv1", h, training, trace)
        y = _conv_bn_relu(params, f"block{i}.conv2", y, training, trace, relu=False)
        h, mask = relu_forward(y + skip)
        if trace is not None:
            trace.layers[f"block{i}.out"] = mask
    trunk = h
    p = _conv_bn_relu(params, "policy.conv", trunk, training, trace)
    logits_hw, lcache = conv_forward(p, params["policy.logits.w"], params["policy.logits.b"])
    b = x.shape[0]
    logits = logits_hw.transpose(0, 3, 1, 2).reshape(b, -1)
    vmap = _conv_bn_relu(params, "value.conv", trunk, training, trace)
    pooled = vmap.mean(axis=(1, 2))
    hid = pooled @ params["value.fc1.w"] + params["value.fc1.b"]
    hid, hmask = relu_forward(hid)
    pre = (hid @ params["value.fc2.w"] + params["value.fc2.b"])[:, 0]
    value = np.tanh(pre)
    if trace is not None:
        trace.layers["policy.logits"] = lcache
        trace.layers["value"] = (vmap.shape, pooled, hid, hmask, value)
    return logits, value, pre


def backward_batch(params, trace: _Trace, dlogits: np.ndarray, dvalue: np.ndarray, shape_bchw) -> Dict[str, np.ndarray]:
    b, c, hh, ww = shape_bchw
    blocks = sum(1 for name in params if name.endswith(".conv1.w"))
    grads: Dict[str, np.ndarray] = {}
    vmap_shape, pooled, hid, hmask, value = trace.layers["value"]
    dpre = dvalue * (1.0 - value ** 2)
    grads["value.fc2.w"] = hid.T @ dpre[:, None]
    grads["value.fc2.b"] = np.array([dpre.sum()], dtype=dpre.dtype)
    dhid = relu_backward(dpre[:, None] @ params["value.fc2.w"].T, hmask)
    grads["value.fc1.w"] = pooled.T @ dhid
    grads["value.fc1.b"] = dhid.sum(axis=0)
    dpooled = dhid @ params["value.fc1.w"].T
    dvmap = np.broadcast_to(dpooled[:, None, None, :] / (hh * ww), vmap_shape).copy()
    dtrunk = _conv_bn_relu_back(params, "value.conv", dvmap, trace, grads)

    a = params["policy.logits.w"].shape[-1]
    dl_hw = dlogits.reshape(b, a, hh, ww).transpose(0, 2, 3, 1)
    dp, dw, db = conv_backward(np.ascontiguousarray(dl_hw), params["policy.logits.w"], trace.layers["policy.logits"], True)
    grads["policy.logits.w"] = dw
    grads["policy.logits.b"] = db
    dtrunk += _conv_bn_relu_back(params, "policy.conv", dp, trace, grads)

    dh = dtrunk
    for i in reversed(range(blocks)):
        dsum = relu_backward(dh, trace.layers[f"block{i}.out"])
        dy = _conv_bn_relu_back(params, f"block{i}.conv2", dsum, trace, grads)
        dy = _conv_bn_relu_back(params, f"block{i}.conv1", dy, trace, grads)
        dh = dy + dsum
    dx = _conv_bn_relu_back(params, "stem", dh, trace, grads)
    grads["_input"] = dx.transpose(0, 3, 1, 2)
    return grads


# ---------------------------------------------------------------- loss

@dataclass
class Batch:
    states: np.ndarray          # (B, C, H, W)
    targets: np.ndarray         # (B, L) policy targets, rows sum to 1
    legal: np.ndarray           # (B, L) bool
    z: np.ndarray               # (B,)


class TargetError(ValueError):
    pass


def make_batch(items: Sequence, num_logits: int, dtype=np.float32) -> Batch:
    """``items``: (state tensor, {flat: target}, z[, legal flats]) tuples."""
    b = len(items)
    states = np.stack([it[0] for it in items]).astype(dtype, copy=False)
    targets = np.zeros((b, num_logits), dtype=dtype)
    legal = np.zeros((b, num_logits), dtype=bool)
    z = np.zeros(b, dtype=dtype)
    for i, it in enumerate(items):
        tgt = it[1]
        support = list(it[3]) if len(it) > 3 and it[3] is not None else list(tgt)
        legal[i, support] = True
        for f, p in tgt.items():
            if not legal[i, f]:
                raise TargetError(f"target logit {f} is not a legal logit")
            targets[i, f] = p
        z[i] = it[2]
    return Batch(states, targets, legal, z)


def _weight_names(params) -> List[str]:
    return [k for k in params if k.endswith(".w")]


def head_loss(logits: np.ndarray, value: np.ndarray, batch: Batch):
    """Policy cross-entropy over legal logits and squared value error, batch-averaged.

    Returns ``(policy_loss, value_loss, dL/dlogits, dL/dvalue)``.
    """
    b = logits.shape[0]
    logp = masked_log_softmax(logits, batch.legal)
    safe_logp = np.where(batch.legal, logp, 0.0)
    policy_loss = float(-(batch.targets * safe_logp).sum() / b)
    value_loss = float(((value - batch.z) ** 2).sum() / b)
    probs = np.where(batch.legal, np.exp(safe_logp), 0.0)
    tsum = batch.targets.sum(axis=1, keepdims=True)
    dlogits = ((probs * tsum - batch.targets) / b).astype(logits.dtype)
    dvalue = (2.0 * (value - batch.z) / b).astype(value.dtype)
    return policy_loss, value_loss, dlogits, dvalue


def loss_and_gradients(params, batch: Batch, weight_decay: float = 0.0, update_stats: bool = False):
    """Mean cross-entropy over legal logits plus squared value error, plus
    ``weight_decay/2 * sum(w**2)`` over weight tensors.

    Returns ``(loss, grads, parts)`` where ``parts`` holds the policy, value
    and weight-decay components.
    """
    if np.any(batch.targets[~batch.legal] != 0):
        raise TargetError("policy target has mass outside the legal logits")
    trace = _Trace()
    logits, value, _ = forward_batch(params, batch.states, training=True, trace=trace)
    policy_loss, value_loss, dlogits, dvalue = head_loss(logits, value, batch)
    grads = backward_batch(params, trace, dlogits, dvalue, batch.states.shape)
    grads.pop("_input")
    l2 = 0.0
    if weight_decay:
        for k in _weight_names(params):
            l2 += float((params[k].astype(np.float64) ** 2).sum())
            grads[k] = grads[k] + weight_decay * params[k]
        l2 *= 0.5 * weight_decay
    if update_stats:
        for prefix, (mu, var) in trace.stats.items():
            m = params[f"{prefix}.bn.mean"]
            v = params[f"{prefix}.bn.var"]
            m *= 1 - BN_MOMENTUM
            m += BN_MOMENTUM * mu.astype(m.dtype)
            v *= 1 - BN_MOMENTUM
            v += BN_MOMENTUM * var.astype(v.dtype)
    total = policy_loss + value_loss + l2
    out = OrderedDict((k, grads[k]) for k in params if not is_buffer(k))
    return total, out, {"policy_loss": policy_loss, "value_loss": value_loss, "l2": l2}


# ---------------------------------------------------------------- optimizer

@dataclass
class SGDConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4


def optimizer_step(params, grads, opt_state: Optional[Dict[str, np.ndarray]] = None, config: SGDConfig = SGDConfig()):
    """SGD with momentum and L2 weight decay on weight tensors; in place on copies.

    Returns ``(new_params, new_state)``; inputs are left untouched.
    """
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for {k}; step aborted")
    opt_state = {} if opt_state is None else opt_state
    new_params = OrderedDict()
    new_state = {}
    for k, p in params.items():
        if is_buffer(k) or k not in grads:
            new_params[k] = p.copy()
            continue
        g = grads[k].astype(p.dtype)
        if config.weight_decay and k.endswith(".w"):
            g = g + config.weight_decay * p
        buf = opt_state.get(k)
        buf = g if buf is None else config.momentum * buf + g
        new_state[k] = buf.astype(p.dtype)
        new_params[k] = (p - config.learning_rate * buf).astype(p.dtype)
    return new_params, new_state


# ---------------------------------------------------------------- inference

class InferenceNet:
    """Frozen snapshot with batch-norm folded into the convolutions.

    Immutable after construction; safe for concurrent ``forward`` calls.
    """

    def __init__(self, params, shape: NetShape):
        self.shape = shape
        self.blocks = sum(1 for name in params if name.endswith(".conv1.w"))
        folded = {}
        for prefix in ["stem"] + [f"block{i}.conv{j}" for i in range(self.blocks) for j in (1, 2)] + ["policy.conv", "value.conv"]:
            gamma = params[f"{prefix}.bn.gamma"].astype(np.float64)
            inv = gamma / np.sqrt(params[f"{prefix}.bn.var"].astype(np.float64) + BN_EPS)
            w = params[f"{prefix}.w"].astype(np.float64) * inv
            b = params[f"{prefix}.bn.beta"] - params[f"{prefix}.bn.mean"] * inv
            k = w.shape[1]
            folded[prefix] = (_matrix(w).astype(np.float32), b.astype(np.float32), k)
        self.folded = folded
        self.logit_w = params["policy.logits.w"].reshape(-1, shape.A).astype(np.float32)
        self.logit_b = params["policy.logits.b"].astype(np.float32)
        self.fc1_w = params["value.fc1.w"].astype(np.float32)
        self.fc1_b = params["value.fc1.b"].astype(np.float32)
        self.fc2_w = params["value.fc2.w"].astype(np.float32)
        self.fc2_b = params["value.fc2.b"].astype(np.float32)

    def _conv(self, x: np.ndarray, prefix: str) -> np.ndarray:
        w, b, k = self.folded[prefix]
        bsz, h, ww, c = x.shape
        p = k // 2
        xp = np.zeros((bsz, h + 2 * p, ww + 2 * p, c), dtype=np.float32)
        xp[:, p:p + h, p:p + ww, :] = x
        out = _windows(xp, k, h, ww) @ w
        out += b
        return out.reshape(bsz, h, ww, -1)

    def forward_logits(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """``x``: (B, C, H, W) -> (logits (B, A*H*W), values (B,))."""
        h = np.ascontiguousarray(x.transpose(0, 2, 3, 1), dtype=np.float32)
        h = np.maximum(self._conv(h, "stem"), 0)
        for i in range(self.blocks):
            y = np.maximum(self._conv(h, f"block{i}.conv1"), 0)
            y = self._conv(y, f"block{i}.conv2")
            y += h
            h = np.maximum(y, 0)
        p = np.maximum(self._conv(h, "policy.conv"), 0)
        bsz, hh, ww, f = p.shape
        logits = p.reshape(-1, f) @ self.logit_w + self.logit_b
        logits = logits.reshape(bsz, hh, ww, -1).transpose(0, 3, 1, 2).reshape(bsz, -1)
        pooled = np.maximum(self._conv(h, "value.conv"), 0).mean(axis=(1, 2))
        hid = np.maximum(pooled @ self.fc1_w + self.fc1_b, 0)
        value = np.tanh((hid @ self.fc2_w + self.fc2_b)[:, 0])
        return logits, value

    def forward(self, tensor: np.ndarray, legal_logits: Iterable[int]) -> Tuple[Dict[int, float], float]:
        legal = sorted(set(legal_logits))
        if not legal:
            raise ShapeError("legal_logits must be non-empty")
        expect = (self.shape.C, self.shape.H, self.shape.W) if self.shape.H else None
        if tensor.ndim != 3 or tensor.shape[0] != self.shape.C or (expect and tensor.shape != expect):
            raise ShapeError(f"tensor shape {tensor.shape} does not match network input {expect or self.shape.C}")
        logits, value = self.forward_logits(tensor[None])
        probs = softmax_over(logits[0], legal)
        return dict(zip(legal, probs.tolist())), float(value[0])


def softmax_over(logits: np.ndarray, indices: Sequence[int]) -> np.ndarray:
    z = logits[list(indices)].astype(np.float64)
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def forward(params, tensor: np.ndarray, legal_logits: Iterable[int], shape: Optional[NetShape] = None):
    """Inference-mode policy over ``legal_logits`` and scalar value in (-1, 1)."""
    if shape is None:
        inferred, _ = infer_config(params)
        shape = NetShape(inferred.C, inferred.A, tensor.shape[1], tensor.shape[2])
    return InferenceNet(params, shape).forward(tensor, legal_logits)


class NetworkEvaluator:
    """Adapts an ``InferenceNet`` to the search evaluator interface."""

    def __init__(self, codec, params):
        self.codec = codec
        self.shape = (codec.C, codec.A, codec.H, codec.W)
        inferred, _ = infer_config(params)
        if (inferred.C, inferred.A) != (codec.C, codec.A):
            raise ShapeError(
                f"network has C={inferred.C}, A={inferred.A}; game needs C={codec.C}, A={codec.A}")
        self.net = InferenceNet(params, NetShape(codec.C, codec.A, codec.H, codec.W))
        self._buf = np.zeros((codec.C, codec.H, codec.W), dtype=np.float32)

    def evaluate(self, state, moves):
        x = self.codec.encode_state(state, out=self._buf)
        flats = [self.codec.flat(m) for m in moves]
        probs, value = self.net.forward(x, flats)
        return [probs[f] for f in flats], value
