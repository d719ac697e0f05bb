"""Small numpy networks with hand-written backward passes.

Everything runs in float64. A :class:`ParamSet` is a mapping of named
tensors backed by one flat vector, so optimizer and target updates touch a
single array; gradients come back as ParamSets with the same layout.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from collections.abc import Mapping
from typing import Callable, Iterator

import numpy as np

GRU_UNITS = 32
HIDDEN_UNITS = 48


class ShapeError(ValueError):
    pass


class ParamSet(Mapping):
    """Named tensors that are views into one contiguous float64 vector."""

    def __init__(self, shapes: dict[str, tuple[int, ...]], flat: np.ndarray | None = None):
        self.shapes = {k: tuple(int(d) for d in v) for k, v in shapes.items()}
        self._layout = []
        off = 0
        for k, shp in self.shapes.items():
            n = math.prod(shp)
            self._layout.append((k, shp, off, n))
            off += n
        self.size = off
        self._bind(flat)

    def _bind(self, flat: np.ndarray | None) -> None:
        if flat is None:
            flat = np.zeros(self.size)
        elif flat.shape != (self.size,):
            raise ShapeError(f"flat vector of shape {flat.shape}, layout needs ({self.size},)")
        self.flat = flat
        self._views = {k: flat[off:off + n].reshape(shp) for k, shp, off, n in self._layout}

    def _sibling(self, flat: np.ndarray | None) -> "ParamSet":
        new = object.__new__(ParamSet)
        new.shapes, new._layout, new.size = self.shapes, self._layout, self.size
        new._bind(flat)
        return new

    def __getitem__(self, k: str) -> np.ndarray:
        return self._views[k]

    def __setitem__(self, k: str, value) -> None:
        """Copy into the named view; scalars and broadcastable arrays are allowed."""
        try:
            self._views[k][...] = value
        except ValueError as exc:
            raise ShapeError(f"{k}: cannot assign {np.shape(value)} to {self.shapes[k]}") from exc

    def __iter__(self) -> Iterator[str]:
        return iter(self._views)

    def __len__(self) -> int:
        return len(self._views)

    def copy(self) -> "ParamSet":
        return self._sibling(self.flat.copy())

    def zeros_like(self) -> "ParamSet":
        return self._sibling(None)

    def same_layout(self, other: "ParamSet") -> bool:
        return isinstance(other, ParamSet) and self.shapes == other.shapes


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _uniform(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _as_batch(x: np.ndarray, width: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise ShapeError(f"{what}: expected width {width}, got shape {x.shape}")
    return x


class PolicyNet:
    """state -> GRU -> dense(ReLU) -> dense(ReLU) -> dense(sigmoid) proto-action."""

    def __init__(self, state_dim: int, n_actions: int, rng: np.random.Generator,
                 gru_units: int = GRU_UNITS, hidden: int = HIDDEN_UNITS):
        self.state_dim, self.n_actions = state_dim, n_actions
        self.gru_units, self.hidden = gru_units, hidden
        d, u, w, k = state_dim, gru_units, hidden, n_actions
        shapes: dict[str, tuple[int, ...]] = {}
        for gate in "rzn":
            shapes.update({f"W{gate}": (d, u), f"U{gate}": (u, u), f"b{gate}": (u,)})
        shapes.update({"W1": (u, w), "b1": (w,), "W2": (w, w), "b2": (w,), "W3": (w, k), "b3": (k,)})
        p = ParamSet(shapes)
        for gate in "rzn":
            p[f"W{gate}"] = _uniform(rng, d, (d, u))
            p[f"U{gate}"] = _uniform(rng, u, (u, u))
        p["W1"], p["b1"] = _uniform(rng, u, (u, w)), _uniform(rng, u, (w,))
        p["W2"], p["b2"] = _uniform(rng, w, (w, w)), _uniform(rng, w, (w,))
        p["W3"], p["b3"] = _uniform(rng, w, (w, k)), _uniform(rng, w, (k,))
        self.params = p

    def initial_hidden(self) -> np.ndarray:
        return np.zeros(self.gru_units)

    def forward(self, x: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict]:
        p = self.params
        x = _as_batch(x, self.state_dim, "state")
        h = _as_batch(h, self.gru_units, "hidden")
        if x.shape[0] != h.shape[0]:
            raise ShapeError(f"batch mismatch: {x.shape[0]} states, {h.shape[0]} hidden vectors")
        r = sigmoid(x @ p["Wr"] + h @ p["Ur"] + p["br"])
        z = sigmoid(x @ p["Wz"] + h @ p["Uz"] + p["bz"])
        hu = h @ p["Un"]
        n = np.tanh(x @ p["Wn"] + r * hu + p["bn"])
        h_new = (1.0 - z) * n + z * h
        pre1 = h_new @ p["W1"] + p["b1"]
        a1 = np.maximum(pre1, 0.0)
        pre2 = a1 @ p["W2"] + p["b2"]
        a2 = np.maximum(pre2, 0.0)
        logit = a2 @ p["W3"] + p["b3"]
        out = sigmoid(logit)
        cache = dict(x=x, h=h, r=r, z=z, hu=hu, n=n, h_new=h_new, pre1=pre1, a1=a1, pre2=pre2, a2=a2,
                     logit=logit, out=out)
        return out, h_new, cache

    def backward(self, cache: dict, d_out: np.ndarray,
                 d_logit: np.ndarray | None = None) -> tuple[ParamSet, np.ndarray]:
        """Gradients w.r.t. parameters and the incoming hidden state.

        ``d_logit`` optionally adds a gradient on the pre-sigmoid outputs. The
        hidden state is treated as an input, so no gradient flows to earlier
        time steps.
        """
        p, c = self.params, cache
        g = p.zeros_like()
        d3 = d_out * c["out"] * (1.0 - c["out"])
        if d_logit is not None:
            d3 = d3 + d_logit
        g["W3"], g["b3"] = c["a2"].T @ d3, d3.sum(0)
        d2 = (d3 @ p["W3"].T) * (c["pre2"] > 0)
        g["W2"], g["b2"] = c["a1"].T @ d2, d2.sum(0)
        d1 = (d2 @ p["W2"].T) * (c["pre1"] > 0)
        g["W1"], g["b1"] = c["h_new"].T @ d1, d1.sum(0)
        dh_new = d1 @ p["W1"].T

        x, h, r, z, n, hu = c["x"], c["h"], c["r"], c["z"], c["n"], c["hu"]
        dh = dh_new * z
        dn = dh_new * (1.0 - z) * (1.0 - n * n)
        dz = dh_new * (h - n) * z * (1.0 - z)
        dr = dn * hu * r * (1.0 - r)
        dhu = dn * r
        g["Wn"], g["Un"], g["bn"] = x.T @ dn, h.T @ dhu, dn.sum(0)
        g["Wz"], g["Uz"], g["bz"] = x.T @ dz, h.T @ dz, dz.sum(0)
        g["Wr"], g["Ur"], g["br"] = x.T @ dr, h.T @ dr, dr.sum(0)
        dh = dh + dhu @ p["Un"].T + dz @ p["Uz"].T + dr @ p["Ur"].T
        return g, dh


class QNet:
    """(state, action vector) -> dense(ReLU) -> dense(ReLU) -> linear scalar."""

    def __init__(self, state_dim: int, n_actions: int, rng: np.random.Generator, hidden: int = HIDDEN_UNITS):
        self.state_dim, self.n_actions, self.hidden = state_dim, n_actions, hidden
        d = state_dim + n_actions
        p = ParamSet({"W1": (d, hidden), "b1": (hidden,), "W2": (hidden, hidden), "b2": (hidden,),
                      "W3": (hidden, 1), "b3": (1,)})
        p["W1"], p["b1"] = _uniform(rng, d, (d, hidden)), _uniform(rng, d, (hidden,))
        p["W2"], p["b2"] = _uniform(rng, hidden, (hidden, hidden)), _uniform(rng, hidden, (hidden,))
        p["W3"], p["b3"] = _uniform(rng, hidden, (hidden, 1)), _uniform(rng, hidden, (1,))
        self.params = p

    def forward(self, x: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, dict]:
        p = self.params
        x = _as_batch(x, self.state_dim, "state")
        a = _as_batch(a, self.n_actions, "action")
        if x.shape[0] != a.shape[0]:
            raise ShapeError(f"batch mismatch: {x.shape[0]} states, {a.shape[0]} actions")
        inp = np.concatenate([x, a], axis=1)
        pre1 = inp @ p["W1"] + p["b1"]
        a1 = np.maximum(pre1, 0.0)
        pre2 = a1 @ p["W2"] + p["b2"]
        a2 = np.maximum(pre2, 0.0)
        q = (a2 @ p["W3"] + p["b3"])[:, 0]
        return q, dict(inp=inp, pre1=pre1, a1=a1, pre2=pre2, a2=a2)

    def backward(self, cache: dict, d_q: np.ndarray) -> tuple[ParamSet, np.ndarray]:
        """Gradients w.r.t. parameters and the action input."""
        p, c = self.params, cache
        d3 = np.asarray(d_q, dtype=np.float64).reshape(-1, 1)
        g = p.zeros_like()
        g["W3"], g["b3"] = c["a2"].T @ d3, d3.sum(0)
        d2 = (d3 @ p["W3"].T) * (c["pre2"] > 0)
        g["W2"], g["b2"] = c["a1"].T @ d2, d2.sum(0)
        d1 = (d2 @ p["W2"].T) * (c["pre1"] > 0)
        g["W1"], g["b1"] = c["inp"].T @ d1, d1.sum(0)
        d_inp = d1 @ p["W1"].T
        return g, d_inp[:, self.state_dim:]


def policy_forward(net: PolicyNet, x: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Single-step evaluation: returns (proto-action, next hidden state)."""
    out, h_new, _ = net.forward(x, h)
    return out[0], h_new[0]


def q_forward(net: QNet, x: np.ndarray, a: np.ndarray) -> float | np.ndarray:
    q, _ = net.forward(x, a)
    return float(q[0]) if np.ndim(x) == 1 else q


def critic_loss(qnet: QNet, states: np.ndarray, actions: np.ndarray, targets: np.ndarray) -> tuple[float, ParamSet]:
    """Mean squared TD error over the batch and its parameter gradients."""
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    q, cache = qnet.forward(states, actions)
    if y.shape != q.shape:
        raise ShapeError(f"targets: expected {q.shape}, got {y.shape}")
    resid = y - q
    grads, _ = qnet.backward(cache, -2.0 * resid / len(y))
    return float(np.mean(resid * resid)), grads


def actor_gradient(policy: PolicyNet, qnet: QNet, states: np.ndarray, hidden: np.ndarray) -> tuple[float, ParamSet]:
    """Loss ``-mean Q(s, mu(s, h))`` and its gradient on the policy parameters.

    The critic is held fixed; descending this gradient raises the critic's
    value of the policy's actions.
    """
    proto, _, pcache = policy.forward(states, hidden)
    q, qcache = qnet.forward(states, proto)
    m = len(q)
    _, d_action = qnet.backward(qcache, np.full(m, -1.0 / m))
    grads, _ = policy.backward(pcache, d_action)
    return float(-q.mean()), grads


def q_all_actions(qnet: QNet, states: np.ndarray) -> np.ndarray:
    """Critic values at every one-hot action: entry ``[j, k]`` is ``Q(s_j, e_k)``."""
    p = qnet.params
    x = _as_batch(states, qnet.state_dim, "state")
    d = qnet.state_dim
    # one-hot input k just selects row k of the action half of W1
    pre1 = (x @ p["W1"][:d] + p["b1"])[:, None, :] + p["W1"][d:][None, :, :]
    a2 = np.maximum(np.maximum(pre1, 0.0) @ p["W2"] + p["b2"], 0.0)
    return (a2 @ p["W3"])[..., 0] + p["b3"][0]


def softmax(z: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    e = z / temperature
    e = np.exp(e - e.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def expected_actor_gradient(policy: PolicyNet, qnet: QNet, states: np.ndarray, hidden: np.ndarray,
                            temperature: float = 1.0, logit_penalty: float = 0.0,
                            mask: np.ndarray | None = None) -> tuple[float, ParamSet]:
    """Actor loss through the critic's values at the one-hot actions.

    The policy scores are read as a distribution ``pi = softmax(logits / T)``
    over actions and the loss is ``-mean_j sum_k pi_jk Q(s_j, e_k)``, i.e. the
    critic extended linearly between the one-hot actions it is trained on.
    With a boolean ``mask`` the distribution covers only the allowed actions
    of each row (every row needs at least one).
    ``logit_penalty`` adds ``logit_penalty * mean_j sum_k logit_jk**2`` to keep
    the sigmoid scores off their flat tails.
    """
    _, _, pcache = policy.forward(states, hidden)
    logit = pcache["logit"]
    q = q_all_actions(qnet, states)
    if mask is None:
        pi = softmax(logit, temperature)
    else:
        pi = softmax(np.where(mask, logit, -np.inf), temperature)
        q = np.where(mask, q, 0.0)
    value = (pi * q).sum(axis=1)
    m = len(value)
    loss = float(-value.mean())
    d_logit = -pi * (q - value[:, None]) / (temperature * m)
    if logit_penalty:
        loss += logit_penalty * float((logit * logit).sum()) / m
        d_logit += (2.0 * logit_penalty / m) * logit
    grads, _ = policy.backward(pcache, np.zeros_like(logit), d_logit)
    return loss, grads


def soft_update(target: ParamSet, online: ParamSet, tau: float) -> ParamSet:
    """In place: every target entry becomes ``tau * online + (1 - tau) * target``."""
    if not target.same_layout(online):
        raise ShapeError("parameter layouts differ")
    target.flat[...] = tau * online.flat + (1.0 - tau) * target.flat
    return target


@dataclass
class OptimizerState:
    """Adam moments for one parameter set."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: ParamSet | None = None
    v: ParamSet | None = None

    @classmethod
    def for_params(cls, params: ParamSet, lr: float, **kw) -> "OptimizerState":
        return cls(lr, m=params.zeros_like(), v=params.zeros_like(), **kw)


def optimizer_step(params: ParamSet, grads: ParamSet, opt: OptimizerState) -> ParamSet:
    """Adam update in place."""
    if not (params.same_layout(grads) and params.same_layout(opt.m)):
        raise ShapeError("gradient or optimizer layout does not match the parameters")
    opt.step += 1
    c1 = 1.0 - opt.beta1 ** opt.step
    c2 = 1.0 - opt.beta2 ** opt.step
    g, m, v = grads.flat, opt.m.flat, opt.v.flat
    m *= opt.beta1
    m += (1.0 - opt.beta1) * g
    v *= opt.beta2
    v += (1.0 - opt.beta2) * g * g
    params.flat -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    return params


# ---------------------------------------------------------------------------
# finite-difference gradient check
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst: str
    checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def grad_check(loss: Callable[[], float], params: ParamSet, grads: ParamSet,
               eps: float = 1e-5, tolerance: float = 1e-4, floor: float = 1e-6) -> GradCheckReport:
    """Compare analytic ``grads`` with central differences of ``loss``.

    ``loss`` re-evaluates with whatever values ``params`` currently hold; each
    entry is perturbed in place and restored. Relative error is
    ``|a - n| / max(|a|, |n|, floor)``.
    """
    worst, worst_at, count = 0.0, "", 0
    for name, p in params.items():
        flat = p.reshape(-1)
        g = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss()
            flat[i] = orig - eps
            down = loss()
            flat[i] = orig
            num = (up - down) / (2.0 * eps)
            err = abs(g[i] - num) / max(abs(g[i]), abs(num), floor)
            count += 1
            if err > worst:
                worst, worst_at = err, f"{name}[{i}]"
    return GradCheckReport(worst, worst_at, count, tolerance)


# ---------------------------------------------------------------------------
# checkpoint files
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"CYWKCKPT"
CHECKPOINT_VERSION = 1


def save_checkpoint(path: str, tensors: dict[str, np.ndarray]) -> None:
    """Named tensors: magic, version, count, then per tensor its name, shape
    and raw little-endian float64 data."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype="<f8")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path: str) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, count = struct.unpack_from("<II", data, 8)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos, out = 16, {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        size = int(np.prod(shape, dtype=np.int64))
        out[name] = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
        pos += 8 * size
    return out
