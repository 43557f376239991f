"""Gated two-encoder network with a trainable activation slope, plus Adam.

Forward pass for input ``x``::

    U    = phi(x W_U + b_U)
    R    = phi(x W_R + b_R)
    H_1  = phi(eta * l * x W_in + b_in)
    M_k  = phi(H_k W_k + b_k)                 k = 1..depth
    H_k+1 = (1 - M_k) * U + M_k * R
    out  = H_{depth+1} W_out + b_out

Parameters live in a flat ``dict`` keyed by layer name so checkpoints and
optimizer state can be addressed uniformly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .errors import DomainError, NumericalError

ACTIVATIONS = {
    "sigmoid": ad.sigmoid,
    "sin": ad.sin,
    "tanh": ad.tanh,
}


@dataclass(frozen=True)
class NetworkLayout:
    in_dim: int
    out_dim: int
    width: int = 100
    depth: int = 5
    activation: str = "sigmoid"
    eta: float = 5.0

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise DomainError("network input and output dims must be >= 1")
        if self.width < 1 or self.depth < 1:
            raise DomainError(f"width and depth must be >= 1, got {self.width}, {self.depth}")
        if not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta}")
        if self.activation not in ACTIVATIONS:
            raise DomainError(
                f"unknown activation {self.activation!r}; choose from {sorted(ACTIVATIONS)}"
            )


def parameter_shapes(layout: NetworkLayout) -> dict[str, tuple]:
    n, w, o = layout.in_dim, layout.width, layout.out_dim
    shapes = {
        "U.W": (n, w), "U.b": (w,),
        "R.W": (n, w), "R.b": (w,),
        "in.W": (n, w), "in.b": (w,),
    }
    for k in range(1, layout.depth + 1):
        shapes[f"gate{k}.W"] = (w, w)
        shapes[f"gate{k}.b"] = (w,)
    shapes["out.W"] = (w, o)
    shapes["out.b"] = (o,)
    shapes["slope"] = ()
    return shapes


def parameter_count(layout: NetworkLayout) -> int:
    return sum(int(np.prod(s)) for s in parameter_shapes(layout).values())


def init_network(layout: NetworkLayout, seed: int) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases, slope ``1/eta`` (unit effective slope)."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in parameter_shapes(layout).items():
        if name == "slope":
            params[name] = np.array(1.0 / layout.eta)
        elif name.endswith(".W"):
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
        else:
            params[name] = np.zeros(shape)
    return params


def _check_finite(x, where):
    data = x.data if isinstance(x, ad.Tensor) else x
    if not np.all(np.isfinite(data)):
        raise NumericalError(f"non-finite values in layer {where!r}")


def forward(params, layout: NetworkLayout, x):
    """Evaluate the network on ``x`` of shape ``(in_dim,)`` or ``(N, in_dim)``.

    ``params`` may hold plain arrays or :class:`~radaupinn.autodiff.Tensor`
    leaves; the result has the matching type.
    """
    phi = ACTIVATIONS[layout.activation]
    U = phi(x @ params["U.W"] + params["U.b"])
    R = phi(x @ params["R.W"] + params["R.b"])
    H = phi((layout.eta * params["slope"]) * (x @ params["in.W"]) + params["in.b"])
    _check_finite(H, "in")
    for k in range(1, layout.depth + 1):
        M = phi(H @ params[f"gate{k}.W"] + params[f"gate{k}.b"])
        H = U + M * (R - U)
        _check_finite(H, f"gate{k}")
    out = H @ params["out.W"] + params["out.b"]
    _check_finite(out, "out")
    return out


def gradient(params, objective):
    """Reverse-mode gradient of scalar ``objective(tensor_params)``.

    Returns a dict with the same keys and shapes as ``params``.
    """
    _, grads = ad.value_and_grad(objective, params)
    return grads


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_rate: float = 1.0
    decay_every: int = 20000

    def learning_rate(self, iteration: int) -> float:
        """Step-decayed rate for a 1-based iteration count."""
        if self.decay_rate == 1.0 or self.decay_every <= 0:
            return self.lr
        return self.lr * self.decay_rate ** ((iteration - 1) // self.decay_every)


class AdamState:
    """First/second moment accumulators keyed like the parameter dict."""

    def __init__(self, params, config: AdamConfig | None = None):
        self.config = config or AdamConfig()
        self.m = {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()}
        self.v = {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()}
        self.step = 0


def adam_update(state: AdamState, params, grads, iteration: int | None = None):
    """One bias-corrected Adam step; returns new params and mutates ``state``."""
    cfg = state.config
    state.step += 1
    t = state.step if iteration is None else iteration
    lr = cfg.learning_rate(t)
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    new = {}
    for k, p in params.items():
        g = grads[k]
        m = state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g
        v = state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * (g * g)
        new[k] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
    return new, state


def save_checkpoint(path, params, layout: NetworkLayout | None = None):
    """Write parameters as JSON; floats go through ``repr`` so the round trip is exact."""
    blob = {
        "layout": asdict(layout) if layout is not None else None,
        "params": {
            k: {"shape": list(np.shape(v)), "data": [float(x) for x in np.ravel(v)]}
            for k, v in params.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    layout = NetworkLayout(**blob["layout"]) if blob.get("layout") else None
    params = {
        k: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for k, entry in blob["params"].items()
    }
    return params, layout


def forward_hidden_stacked(params, layout: NetworkLayout, x):
    """Hidden features of ``K`` same-shaped networks evaluated together.

    Every hidden parameter carries a leading stack axis (``U.W`` is
    ``(K, in_dim, width)``, ``slope`` is ``(K,)``). ``x`` has shape
    ``(N, in_dim)``; the result is ``(K, N, width)``. Network ``k`` of the
    stack computes exactly what :func:`forward` computes up to its output
    layer.
    """
    phi = ACTIVATIONS[layout.activation]

    def bias(name):
        return params[name][:, None, :]

    U = phi(x @ params["U.W"] + bias("U.b"))
    R = phi(x @ params["R.W"] + bias("R.b"))
    slope = params["slope"][:, None, None]
    H = phi((layout.eta * slope) * (x @ params["in.W"]) + bias("in.b"))
    for k in range(1, layout.depth + 1):
        M = phi(H @ params[f"gate{k}.W"] + bias(f"gate{k}.b"))
        H = U + M * (R - U)
    _check_finite(H, "hidden")
    return H
