"""Value network: two SAME 3x3 convolutions (32 maps each, rectifier), a 2x2
average downsample, and two dense layers onto the 8 action values.

Everything is float64 numpy with hand-written backward passes; the TD loss
gradient is verified against finite differences in the test suite. The
evaluation and target copies share this module; the target is only ever
written by sync_target.
"""

import copy
import struct

import numpy as np

C_IN = 3
C_HIDDEN = 32
KERNEL = 3
FC_HIDDEN = 256
N_OUT = 8

PARAM_ORDER = ("w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4")

CKPT_MAGIC = b"UQNCKPT1"
CKPT_VERSION = 1


def feature_size(grid_k):
    """Flattened size after the 2x2 downsample (odd grids drop the last line)."""
    pooled = grid_k // 2
    return pooled * pooled * C_HIDDEN


def param_shapes(grid_k):
    return {
        "w1": (C_HIDDEN, C_IN, KERNEL, KERNEL), "b1": (C_HIDDEN,),
        "w2": (C_HIDDEN, C_HIDDEN, KERNEL, KERNEL), "b2": (C_HIDDEN,),
        "w3": (FC_HIDDEN, feature_size(grid_k)), "b3": (FC_HIDDEN,),
        "w4": (N_OUT, FC_HIDDEN), "b4": (N_OUT,),
    }


def init_params(grid_k, seed, dtype=np.float64):
    """Uniform fan-in scaled initialization, deterministic under the seed.

    dtype float64 is the verification default; float32 is offered for large
    training runs on narrow hardware.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    params = {}
    for name, shape in param_shapes(grid_k).items():
        if name.startswith("b"):
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return params


# --- layer primitives -------------------------------------------------------
# Activations are kept channels-last (B, K, K, C) internally so every im2col
# slice touches a contiguous channel block; the public tensors stay (B, 3, K, K).

def _weight_mat(w):
    """(O, C, 3, 3) kernel as a (9C, O) matrix matching the im2col layout."""
    return np.ascontiguousarray(w.transpose(2, 3, 1, 0).reshape(-1, w.shape[0]))


def _conv_same(x, w, b):
    """SAME 3x3 convolution; returns (out, cols) with cols kept for backward."""
    batch, k, _, c = x.shape
    xp = np.zeros((batch, k + 2, k + 2, c), dtype=x.dtype)
    xp[:, 1:-1, 1:-1, :] = x
    cols = np.empty((batch, k, k, KERNEL, KERNEL, c), dtype=x.dtype)
    for di in range(KERNEL):
        for dj in range(KERNEL):
            cols[:, :, :, di, dj, :] = xp[:, di:di + k, dj:dj + k, :]
    cols = cols.reshape(batch * k * k, KERNEL * KERNEL * c)
    out = (cols @ _weight_mat(w)).reshape(batch, k, k, w.shape[0]) + b
    return out, cols


def _conv_same_backward(dout, cols, w, in_channels, k, need_dx=True):
    batch = dout.shape[0]
    n_out = w.shape[0]
    dmat = dout.reshape(batch * k * k, n_out)
    dw = (cols.T @ dmat).reshape(KERNEL, KERNEL, in_channels, n_out).transpose(3, 2, 0, 1)
    db = dout.sum(axis=(0, 1, 2))
    if not need_dx:
        return None, np.ascontiguousarray(dw), db
    dcols = (dmat @ _weight_mat(w).T).reshape(batch, k, k, KERNEL, KERNEL, in_channels)
    dxp = np.zeros((batch, k + 2, k + 2, in_channels), dtype=dmat.dtype)
    for di in range(KERNEL):
        for dj in range(KERNEL):
            dxp[:, di:di + k, dj:dj + k, :] += dcols[:, :, :, di, dj, :]
    return dxp[:, 1:-1, 1:-1, :], np.ascontiguousarray(dw), db


def _avg_pool2(x):
    batch, k, _, c = x.shape
    p = k // 2
    cropped = x[:, :2 * p, :2 * p, :]
    return cropped.reshape(batch, p, 2, p, 2, c).mean(axis=(2, 4))


def _avg_pool2_backward(dout, k):
    batch, p, _, c = dout.shape
    dx = np.zeros((batch, k, k, c), dtype=dout.dtype)
    up = np.repeat(np.repeat(dout, 2, axis=1), 2, axis=2) / 4.0
    dx[:, :2 * p, :2 * p, :] = up
    return dx


# --- forward / backward -----------------------------------------------------

def forward_batch(params, x, want_cache=False):
    """Action values for a (B, 3, K, K) batch; returns (B, 8)."""
    x = np.asarray(x, dtype=params["w1"].dtype)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite observation")
    k = x.shape[2]
    x = np.ascontiguousarray(x.transpose(0, 2, 3, 1))  # to channels-last
    z1, cols1 = _conv_same(x, params["w1"], params["b1"])
    a1 = np.maximum(z1, 0.0)
    z2, cols2 = _conv_same(a1, params["w2"], params["b2"])
    a2 = np.maximum(z2, 0.0)
    pooled = _avg_pool2(a2)
    flat = pooled.reshape(x.shape[0], -1)
    z3 = flat @ params["w3"].T + params["b3"]
    a3 = np.maximum(z3, 0.0)
    q = a3 @ params["w4"].T + params["b4"]
    if not want_cache:
        return q
    cache = {"k": k, "cols1": cols1, "z1": z1, "a1": a1, "cols2": cols2,
             "z2": z2, "pooled_shape": pooled.shape, "flat": flat,
             "z3": z3, "a3": a3}
    return q, cache


def forward(params, obs):
    """Action values for a single 3 x K x K observation tensor."""
    return forward_batch(params, obs[None])[0]


def backward_batch(params, cache, dq):
    """Gradients of a scalar loss given d(loss)/d(q)."""
    k = cache["k"]
    grads = {}
    grads["w4"] = dq.T @ cache["a3"]
    grads["b4"] = dq.sum(axis=0)
    da3 = dq @ params["w4"]
    dz3 = da3 * (cache["z3"] > 0)
    grads["w3"] = dz3.T @ cache["flat"]
    grads["b3"] = dz3.sum(axis=0)
    dflat = dz3 @ params["w3"]
    dpooled = dflat.reshape(cache["pooled_shape"])
    da2 = _avg_pool2_backward(dpooled, k)
    dz2 = da2 * (cache["z2"] > 0)
    da1, grads["w2"], grads["b2"] = _conv_same_backward(dz2, cache["cols2"],
                                                        params["w2"], C_HIDDEN, k)
    dz1 = da1 * (cache["z1"] > 0)
    _, grads["w1"], grads["b1"] = _conv_same_backward(dz1, cache["cols1"],
                                                      params["w1"], C_IN, k,
                                                      need_dx=False)
    return grads


def td_loss(eval_params, target_params, batch, gamma):
    """Mean squared TD error and its gradients w.r.t. the evaluation network.

    batch: dict with observations (B,3,K,K), actions (B,), rewards (B,),
    next_observations (B,3,K,K), terminal (B,) booleans.
    """
    obs = batch["observations"]
    actions = np.asarray(batch["actions"], dtype=np.intp)
    rewards = np.asarray(batch["rewards"], dtype=np.float64)
    terminal = np.asarray(batch["terminal"], dtype=bool)
    b = obs.shape[0]

    q_next = forward_batch(target_params, batch["next_observations"])
    y = rewards + gamma * np.where(terminal, 0.0, q_next.max(axis=1).astype(np.float64))

    q, cache = forward_batch(eval_params, obs, want_cache=True)
    q_sel = q[np.arange(b), actions]
    diff = q_sel - y
    loss = float(np.mean(diff ** 2))

    dq = np.zeros_like(q)
    dq[np.arange(b), actions] = 2.0 * diff / b
    return loss, backward_batch(eval_params, cache, dq)


# --- optimizer --------------------------------------------------------------

class Adam:
    """Per-parameter adaptive first-order optimizer with bias correction."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def apply_update(self, params, grads):
        """One in-place step; a zero gradient leaves the parameters unchanged."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for key, g in grads.items():
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[key] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params


def sync_target(eval_params):
    """Fresh deep copy; later evaluation updates leave it untouched."""
    return copy.deepcopy(eval_params)


# --- checkpoint io ----------------------------------------------------------
# Layout (little endian): magic[8] | version u32 | grid_k u32 | n_params u32,
# then per parameter in PARAM_ORDER: name_len u16 | name ascii | ndim u8 |
# dims u32 each | float64 payload.

def save_checkpoint(params, grid_k, path):
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<III", CKPT_VERSION, grid_k, len(PARAM_ORDER)))
        for name in PARAM_ORDER:
            arr = np.ascontiguousarray(params[name], dtype="<f8")
            enc = name.encode("ascii")
            fh.write(struct.pack("<H", len(enc)))
            fh.write(enc)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


class CheckpointError(ValueError):
    pass


def load_checkpoint(path, expect_grid_k=None):
    """Read a checkpoint; returns (params, grid_k). Rejects shape mismatches."""
    with open(path, "rb") as fh:
        if fh.read(8) != CKPT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        version, grid_k, n = struct.unpack("<III", fh.read(12))
        if version != CKPT_VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        if expect_grid_k is not None and grid_k != expect_grid_k:
            raise CheckpointError(
                f"{path}: checkpoint grid_k={grid_k} does not match config grid_k={expect_grid_k}")
        params = {}
        for _ in range(n):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("ascii")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            count = int(np.prod(shape)) if shape else 1
            params[name] = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape).copy()
    expected = param_shapes(grid_k)
    if set(params) != set(expected):
        raise CheckpointError(f"{path}: parameter set mismatch")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise CheckpointError(
                f"{path}: {name} has shape {params[name].shape}, expected {shape}")
    return params, grid_k
