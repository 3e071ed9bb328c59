"""Feedforward networks with hand-written reverse-mode gradients.

Networks are tanh MLPs with a linear output layer; the "head" only decides
how outputs are turned into probabilities.  Losses live in a registry and
each returns ``(value, d value / d output)`` so :func:`backprop` can chain
them through the network.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np

HEADS = ("masked_softmax", "softmax", "sigmoid", "linear")
LOG_FLOOR = 1e-8
CHECKPOINT_HEADER = "# debunkd-params v1"


class UnsupportedLossError(KeyError):
    pass


class Mlp:
    """tanh MLP; ``params`` maps ``W0, b0, W1, b1, ...`` to arrays (W is in x out)."""

    def __init__(self, dims: list[int], head: str = "linear", rng: np.random.Generator | None = None,
                 zero: bool = False):
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}")
        if len(dims) < 2:
            raise ValueError("need at least input and output widths")
        self.dims = list(dims)
        self.head = head
        self.n_forward = 0
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params: dict[str, np.ndarray] = {}
        for k, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            if zero:
                w = np.zeros((fan_in, fan_out))
            else:
                r = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-r, r, size=(fan_in, fan_out))
            self.params[f"W{k}"] = w
            self.params[f"b{k}"] = np.zeros(fan_out)

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.dims, other.head, other.n_forward = list(self.dims), self.head, 0
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Raw outputs (logits) for a batch ``x`` plus the activations needed by :meth:`backward`."""
        self.n_forward += 1
        h = np.atleast_2d(x)
        acts = [h]
        for k in range(self.n_layers):
            z = h @ self.params[f"W{k}"] + self.params[f"b{k}"]
            h = np.tanh(z) if k < self.n_layers - 1 else z
            acts.append(h)
        return h, acts

    def backward(self, acts: list[np.ndarray], d_out: np.ndarray) -> dict[str, np.ndarray]:
        grads = {}
        d = np.atleast_2d(d_out)
        for k in reversed(range(self.n_layers)):
            grads[f"W{k}"] = acts[k].T @ d
            grads[f"b{k}"] = d.sum(axis=0)
            if k > 0:
                d = (d @ self.params[f"W{k}"].T) * (1.0 - acts[k] ** 2)
        return grads

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.params.values())


# ---------------------------------------------------------------- heads

def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    logits = np.atleast_2d(logits)
    mask = np.atleast_2d(mask).astype(bool)
    if not mask.any(axis=1).all():
        raise ValueError("every row needs at least one unmasked action")
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.atleast_2d(logits)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def policy_forward(theta: Mlp, s: np.ndarray, s_prime: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Action distribution for a single (s, s') input."""
    logits, _ = theta.forward(np.concatenate([s, s_prime])[None, :])
    return masked_softmax(logits, mask[None, :])[0]


def discriminator_forward(phi: Mlp, s: np.ndarray, s_prime: np.ndarray, a_onehot: np.ndarray) -> float:
    z, _ = phi.forward(np.concatenate([s, s_prime, a_onehot])[None, :])
    return float(sigmoid(z[0, 0]))


# ---------------------------------------------------------------- losses

def _softmax_vjp(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. probabilities back to logits."""
    return p * (g - (p * g).sum(axis=1, keepdims=True))


def discriminator_objective(out, agent):
    """mean over agent rows of log D + mean over expert rows of log(1 - D); logs clamped."""
    z = out[:, 0]
    agent = np.asarray(agent, dtype=bool)
    d = sigmoid(z)
    n_a, n_e = agent.sum(), (~agent).sum()
    value = 0.0
    grad = np.zeros_like(z)
    if n_a:
        da = d[agent]
        value += np.log(np.clip(da, LOG_FLOOR, 1.0)).mean()
        grad[agent] = np.where(da > LOG_FLOOR, 1.0 - da, 0.0) / n_a
    if n_e:
        de = 1.0 - d[~agent]
        value += np.log(np.clip(de, LOG_FLOOR, 1.0)).mean()
        grad[~agent] = np.where(de > LOG_FLOOR, -(1.0 - de), 0.0) / n_e
    return float(value), grad[:, None]


def policy_surrogate(out, mask, actions, advantages):
    """Likelihood-ratio surrogate: mean_t A_t log pi(a_t | .)."""
    p = masked_softmax(out, mask)
    rows = np.arange(len(actions))
    logp = np.log(np.clip(p[rows, actions], LOG_FLOOR, 1.0))
    adv = np.asarray(advantages, dtype=float)
    t = len(actions)
    onehot = np.zeros_like(p)
    onehot[rows, actions] = 1.0
    live = (p[rows, actions] > LOG_FLOOR)[:, None]
    grad = np.where(live, (onehot - p), 0.0) * (adv / t)[:, None]
    return float((adv * logp).sum() / t), grad


def entropy(out, mask):
    """Mean over rows of the exact entropy of the masked policy."""
    p = masked_softmax(out, mask)
    logp = np.log(np.where(p > 0, p, 1.0))
    h = -(p * logp).sum(axis=1)
    t = p.shape[0]
    grad = -p * (logp + h[:, None]) / t
    return float(h.mean()), grad


def negative_regularizer_loss(out, mask, m_probs):
    """Mean over rows of sum of pi_k^2 where pi_k < M_k."""
    p = masked_softmax(out, mask)
    under = p < np.atleast_2d(m_probs)
    t = p.shape[0]
    value = float(np.where(under, p * p, 0.0).sum() / t)
    return value, _softmax_vjp(p, np.where(under, 2.0 * p, 0.0) / t)


def cross_entropy(out, actions):
    """Mean negative log-likelihood of ``actions`` under an unmasked softmax."""
    p = softmax(out)
    rows = np.arange(len(actions))
    pa = p[rows, actions]
    t = len(actions)
    value = float(-np.log(np.clip(pa, LOG_FLOOR, 1.0)).mean())
    onehot = np.zeros_like(p)
    onehot[rows, actions] = 1.0
    grad = np.where((pa > LOG_FLOOR)[:, None], p - onehot, 0.0) / t
    return value, grad


def squared_error(out, target):
    diff = out - np.atleast_2d(target)
    return float((diff ** 2).sum()), 2.0 * diff


def constant(out, value=1.0):
    return float(value), np.zeros_like(out)


LOSSES: dict[str, Callable] = {
    "discriminator": discriminator_objective,
    "policy_surrogate": policy_surrogate,
    "entropy": entropy,
    "negative_regularizer": negative_regularizer_loss,
    "cross_entropy": cross_entropy,
    "squared_error": squared_error,
    "constant": constant,
}


def loss_value(net: Mlp, x: np.ndarray, loss: str, **kw) -> float:
    if loss not in LOSSES:
        raise UnsupportedLossError(loss)
    out, _ = net.forward(x)
    return LOSSES[loss](out, **kw)[0]


def backprop(net: Mlp, x: np.ndarray, loss: str, **kw) -> tuple[float, dict[str, np.ndarray]]:
    """Value of a registered loss on ``net(x)`` and its gradient w.r.t. every parameter."""
    if loss not in LOSSES:
        raise UnsupportedLossError(loss)
    out, acts = net.forward(x)
    value, d_out = LOSSES[loss](out, **kw)
    return value, net.backward(acts, d_out)


def gradient_check(net: Mlp, x: np.ndarray, loss: str, epsilon: float = 1e-5, seed: int = 0,
                   max_entries: int = 10_000, floor: float = 1e-7, **kw) -> float:
    """Max relative error between :func:`backprop` and central differences.

    The relative error of one entry is ``|g - fd| / max(|g|, |fd|, floor)``;
    ``floor`` keeps entries whose true gradient is ~0 from dividing by noise.
    Above ``max_entries`` parameters a seeded random subsample is checked.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _, grads = backprop(net, x, loss, **kw)
    index = [(name, i) for name, arr in net.params.items() for i in range(arr.size)]
    if len(index) > max_entries:
        pick = np.random.default_rng(seed).choice(len(index), size=max_entries, replace=False)
        index = [index[j] for j in sorted(pick)]
    worst = 0.0
    for name, i in index:
        flat = net.params[name].reshape(-1)
        orig = flat[i]
        flat[i] = orig + epsilon
        up = loss_value(net, x, loss, **kw)
        flat[i] = orig - epsilon
        down = loss_value(net, x, loss, **kw)
        flat[i] = orig
        fd = (up - down) / (2 * epsilon)
        g = grads[name].reshape(-1)[i]
        worst = max(worst, abs(g - fd) / max(abs(g), abs(fd), floor))
    return worst


# ---------------------------------------------------------------- optimizer

class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             direction: str = "descend") -> dict[str, np.ndarray]:
        """In-place Adam update; ``direction`` is ``"ascend"`` or ``"descend"``."""
        if direction not in ("ascend", "descend"):
            raise ValueError(f"direction must be 'ascend' or 'descend', got {direction!r}")
        for name, g in grads.items():
            if name not in params or params[name].shape != g.shape:
                raise ValueError(f"gradient {name} does not match parameter shape")
        sign = 1.0 if direction == "ascend" else -1.0
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            params[name] += sign * self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params


def optimize_step(opt: Adam, params, grads, direction: str = "descend"):
    return opt.step(params, grads, direction)


# ---------------------------------------------------------------- checkpoints

def save_params(params: dict[str, np.ndarray], path) -> None:
    """Text checkpoint: header line, then per parameter a ``name ndim dims...`` line and one line of values."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(CHECKPOINT_HEADER + "\n")
        for name, arr in params.items():
            fh.write(f"{name} {arr.ndim} {' '.join(str(d) for d in arr.shape)}\n")
            fh.write(" ".join(repr(float(v)) for v in arr.reshape(-1)) + "\n")


def load_params(path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_HEADER:
        raise ValueError(f"{path}: not a debunkd parameter file")
    params = {}
    body = lines[1:]
    for head, values in zip(body[0::2], body[1::2]):
        parts = head.split()
        name, ndim = parts[0], int(parts[1])
        shape = tuple(int(d) for d in parts[2:2 + ndim])
        data = np.array([float(v) for v in values.split()], dtype=float)
        params[name] = data.reshape(shape)
    return params


def save_mlp(net: Mlp, path) -> None:
    meta = {"dims": np.array(net.dims, dtype=float), "head": np.array([HEADS.index(net.head)], dtype=float)}
    save_params({**{f"meta.{k}": v for k, v in meta.items()}, **net.params}, path)


def load_mlp(path) -> Mlp:
    params = load_params(path)
    dims = [int(d) for d in params.pop("meta.dims")]
    head = HEADS[int(params.pop("meta.head")[0])]
    net = Mlp(dims, head, zero=True)
    for k, v in params.items():
        net.params[k] = v
    return net
