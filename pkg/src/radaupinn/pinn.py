"""Radau IIA physics-informed networks for one time segment, and the march.

A segment model holds ``n + 2`` networks that all read ``y_n``:

* one per differential variable ``j``, emitting ``(xi_1j, ..., xi_vj, y_{n+1,j})``;
* one emitting every algebraic stage value ``zeta`` (``m * v`` outputs);
* one emitting ``z_{n+1}``.

The hidden layers of all networks share a shape, so they are stored stacked
along a leading axis and evaluated in one pass; output layers are kept per
group. :meth:`SegmentModel.network` returns any single network as a plain
parameter dict usable with :func:`radaupinn.network.forward`.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .dae import DaeProblem
from .errors import NumericalError, TrainingAborted
from .network import (
    AdamConfig,
    AdamState,
    NetworkLayout,
    adam_update,
    forward_hidden_stacked,
    init_network,
)
from .solver import step_count
from .tableau import RadauTableau

logger = logging.getLogger(__name__)

DEFAULT_ACTIVATION = {"hessenberg": "sigmoid", "pendulum": "sin"}

_HIDDEN_KEYS_FIXED = ("U.W", "U.b", "R.W", "R.b", "in.W", "in.b")


@dataclass
class TrainConfig:
    iterations: int = 100000
    width: int = 100
    depth: int = 5
    activation: str | None = None
    eta: float = 5.0
    adam: AdamConfig = field(default_factory=AdamConfig)
    w_f: float = 1.0
    w_g: float = 1.0
    w_s: float = 1.0
    seed: int = 0
    early_stop: float | None = None
    history_stride: int = 100
    warm_start: bool = False
    n_samples: int = 1
    sample_spread: float = 0.0

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if min(self.w_f, self.w_g, self.w_s) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def activation_for(self, problem: DaeProblem) -> str:
        if self.activation is not None:
            return self.activation
        return DEFAULT_ACTIVATION.get(problem.name, "sigmoid")


@dataclass
class SegmentPrediction:
    xi: np.ndarray
    zeta: np.ndarray
    y_next: np.ndarray
    z_next: np.ndarray


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    L_f: float
    L_g: float
    L_s: float


class SegmentModel:
    """Networks and Radau data for the interval ``[t_n, t_n + h]``."""

    def __init__(self, problem: DaeProblem, tableau: RadauTableau, t_n: float,
                 h: float, cfg: TrainConfig, params=None):
        self.problem = problem
        self.tableau = tableau
        self.t_n = float(t_n)
        self.h = float(h)
        self.w_f, self.w_g, self.w_s = cfg.w_f, cfg.w_g, cfg.w_s
        n, m, v = problem.dim_y, problem.dim_z, tableau.v
        act = cfg.activation_for(problem)
        base = dict(in_dim=n, width=cfg.width, depth=cfg.depth, activation=act, eta=cfg.eta)
        self.layouts = (
            [NetworkLayout(out_dim=v + 1, **base) for _ in range(n)]
            + [NetworkLayout(out_dim=max(m * v, 1), **base),
               NetworkLayout(out_dim=max(m, 1), **base)]
        )
        self.hidden_layout = self.layouts[0]
        self.hidden_keys = _HIDDEN_KEYS_FIXED + tuple(
            f"gate{k}.{p}" for k in range(1, cfg.depth + 1) for p in ("W", "b")
        ) + ("slope",)
        self.seed = cfg.seed
        self.params = params if params is not None else self._init_params(cfg.seed)
        self.final_params = self.params

    @property
    def n_networks(self) -> int:
        return len(self.layouts)

    def _init_params(self, seed):
        nets = [init_network(lay, [seed, k]) for k, lay in enumerate(self.layouts)]
        n = self.problem.dim_y
        params = {key: np.stack([net[key] for net in nets]) for key in self.hidden_keys}
        params["out.diff.W"] = np.stack([net["out.W"] for net in nets[:n]])
        params["out.diff.b"] = np.stack([net["out.b"] for net in nets[:n]])
        params["out.stage.W"] = nets[n]["out.W"]
        params["out.stage.b"] = nets[n]["out.b"]
        params["out.end.W"] = nets[n + 1]["out.W"]
        params["out.end.b"] = nets[n + 1]["out.b"]
        return params

    def network(self, k: int, params=None):
        """Layout and parameter dict of network ``k`` (diff nets first)."""
        params = self.params if params is None else params
        n = self.problem.dim_y
        net = {key: params[key][k] for key in self.hidden_keys}
        if k < n:
            net["out.W"] = params["out.diff.W"][k]
            net["out.b"] = params["out.diff.b"][k]
        elif k == n:
            net["out.W"] = params["out.stage.W"]
            net["out.b"] = params["out.stage.b"]
        elif k == n + 1:
            net["out.W"] = params["out.end.W"]
            net["out.b"] = params["out.end.b"]
        else:
            raise IndexError(k)
        return self.layouts[k], net

    @property
    def diff_nets(self):
        return [self.network(k) for k in range(self.problem.dim_y)]

    @property
    def alg_stage_net(self):
        return self.network(self.problem.dim_y)

    @property
    def alg_end_net(self):
        return self.network(self.problem.dim_y + 1)

    def copy_with(self, params):
        clone = object.__new__(SegmentModel)
        clone.__dict__.update(self.__dict__)
        clone.params = params
        clone.final_params = params
        return clone


def build_segment_model(p: DaeProblem, tab: RadauTableau, t_n, h,
                        cfg: TrainConfig) -> SegmentModel:
    return SegmentModel(p, tab, t_n, h, cfg)


def _as_batch(y_n):
    y = np.asarray(y_n, dtype=float)
    return y[np.newaxis, :] if y.ndim == 1 else y


def _predict(model: SegmentModel, params, y_batch):
    """Raw predictions, batch-first: xi (N,v,n), zeta (N,v,m), y_next (N,n), z_next (N,m)."""
    n, m, v = model.problem.dim_y, model.problem.dim_z, model.tableau.v
    N = y_batch.shape[0]
    H = forward_hidden_stacked(params, model.hidden_layout, y_batch)
    diff = H[:n] @ params["out.diff.W"] + params["out.diff.b"][:, None, :]
    xi = ad.transpose(diff[:, :, :v], (1, 2, 0))
    y_next = ad.transpose(diff[:, :, v], (1, 0))
    zeta = (H[n] @ params["out.stage.W"] + params["out.stage.b"])
    zeta = zeta[:, : m * v].reshape((N, v, m))
    z_next = (H[n + 1] @ params["out.end.W"] + params["out.end.b"])[:, :m]
    return xi, zeta, y_next, z_next


def segment_predict(model: SegmentModel, y_n, params=None) -> SegmentPrediction:
    """Evaluate all networks on ``y_n``; a 1-D input gives unbatched arrays."""
    params = model.params if params is None else params
    single = np.ndim(y_n) == 1
    xi, zeta, y_next, z_next = _predict(model, params, _as_batch(y_n))
    out = [np.asarray(ad._data(x)) for x in (xi, zeta, y_next, z_next)]
    if single:
        out = [x[0] for x in out]
    for x in out:
        if not np.all(np.isfinite(x)):
            raise NumericalError("non-finite segment prediction")
    return SegmentPrediction(*out)


def radau_loss_terms(problem: DaeProblem, tab: RadauTableau, t_n, h, y_n,
                     xi, zeta, y_next, z_next):
    """Residual losses ``(L_f, L_g, L_s)`` of the Radau stage system.

    Inputs are batch-first (``xi`` is ``(N, v, n)``) and may be arrays or
    tensors; the results follow suit.
    """
    y_batch = _as_batch(y_n)
    N = y_batch.shape[0]
    v = tab.v
    ts = t_n + np.asarray(tab.c) * h
    F = problem.f(ts, xi, zeta)
    stage_res = y_batch[:, None, :] - xi + h * (tab.A @ F)
    end_res = y_batch - y_next + h * (tab.b @ F)
    L_f = ((stage_res**2).sum() + (end_res**2).sum()) / (N * (v + 1))
    if problem.dim_z:
        G = problem.g(ts, xi)
        G_end = problem.g(t_n + h, y_next)
        L_g = ((G**2).sum() + (G_end**2).sum()) / (N * (v + 1))
        L_s = ((z_next - zeta[:, -1, :]) ** 2).sum() / N
    else:
        L_g = 0.0
        L_s = 0.0
    return L_f, L_g, L_s


def _batched(pred: SegmentPrediction):
    xi = np.asarray(pred.xi, dtype=float)
    if xi.ndim == 2:
        return (xi[None], np.asarray(pred.zeta, dtype=float)[None],
                np.asarray(pred.y_next, dtype=float)[None],
                np.asarray(pred.z_next, dtype=float)[None])
    return xi, pred.zeta, pred.y_next, pred.z_next


def pinn_loss(model: SegmentModel, y_n, prediction: SegmentPrediction | None = None,
              params=None) -> LossBreakdown:
    """Weighted loss of the model on ``y_n``.

    Passing ``prediction`` substitutes those stage values for the networks'
    outputs (used to check that an exact Radau solution gives zero loss).
    """
    if prediction is None:
        params = model.params if params is None else params
        preds = _predict(model, params, _as_batch(y_n))
    else:
        preds = _batched(prediction)
    L_f, L_g, L_s = radau_loss_terms(model.problem, model.tableau, model.t_n, model.h,
                                     y_n, *preds)
    L_f, L_g, L_s = float(L_f), float(L_g), float(L_s)
    total = model.w_f * L_f + model.w_g * L_g + model.w_s * L_s
    if not np.isfinite(total):
        raise NumericalError(f"non-finite loss (L_f={L_f}, L_g={L_g}, L_s={L_s})")
    return LossBreakdown(total, L_f, L_g, L_s)


def loss_and_grad(model: SegmentModel, y_n, params=None):
    """``(LossBreakdown, grads)`` by reverse-mode differentiation."""
    params = model.params if params is None else params
    y_batch = _as_batch(y_n)
    parts = {}

    def objective(tp):
        preds = _predict(model, tp, y_batch)
        L_f, L_g, L_s = radau_loss_terms(model.problem, model.tableau, model.t_n,
                                         model.h, y_batch, *preds)
        parts["terms"] = (L_f, L_g, L_s)
        return model.w_f * L_f + model.w_g * L_g + model.w_s * L_s

    total, grads = ad.value_and_grad(objective, params)
    L_f, L_g, L_s = (float(ad._data(x)) for x in parts["terms"])
    return LossBreakdown(total, L_f, L_g, L_s), grads


@dataclass
class TrainResult:
    model: SegmentModel
    history: list
    best_loss: float
    best_iteration: int
    final_loss: float
    iterations_run: int
    wall_time: float


def _training_inputs(y_n, cfg: TrainConfig):
    y = np.asarray(y_n, dtype=float)
    if cfg.n_samples == 1:
        return y
    rng = np.random.default_rng([cfg.seed, 7919])
    noise = rng.uniform(-1.0, 1.0, size=(cfg.n_samples - 1, y.size))
    extra = y * (1.0 + cfg.sample_spread * noise)
    return np.vstack([y[None, :], extra])


def train_segment(model: SegmentModel, y_n, cfg: TrainConfig) -> TrainResult:
    """Minimise the Radau loss with Adam, keeping the best parameters seen.

    History rows are ``(iteration, L_f, L_g, L_s, total, best_total)``, where
    row ``k`` describes the parameters *before* update ``k + 1``.
    """
    start = time.perf_counter()
    inputs = _training_inputs(y_n, cfg)
    params = model.params
    state = AdamState(params, cfg.adam)
    best_params, best_loss, best_it = params, np.inf, 0
    history = []
    stride = max(1, cfg.history_stride)
    it = 0
    last = None
    for it in range(cfg.iterations + 1):
        try:
            # overflow is detected explicitly below, so silence numpy's warnings
            with np.errstate(over="ignore", invalid="ignore"):
                last, grads = loss_and_grad(model, inputs, params)
            failure = None if np.isfinite(last.total) else "non-finite loss"
            if failure is None and not all(np.all(np.isfinite(g)) for g in grads.values()):
                failure = "non-finite gradient"
        except NumericalError as exc:
            failure = str(exc)
        if failure is not None:
            trained = model.copy_with(best_params)
            trained.final_params = params
            raise TrainingAborted(
                f"{failure} at iteration {it} (segment t={model.t_n})",
                model=trained, history=history,
            )
        if last.total < best_loss:
            best_params, best_loss, best_it = params, last.total, it
        if it % stride == 0 or it == cfg.iterations:
            history.append((it, last.L_f, last.L_g, last.L_s, last.total, best_loss))
        if it == cfg.iterations:
            break
        if cfg.early_stop is not None and best_loss <= cfg.early_stop:
            history.append((it, last.L_f, last.L_g, last.L_s, last.total, best_loss))
            break
        params, state = adam_update(state, params, grads)

    trained = model.copy_with(best_params)
    trained.final_params = params
    return TrainResult(
        model=trained,
        history=history,
        best_loss=float(best_loss),
        best_iteration=best_it,
        final_loss=float(last.total),
        iterations_run=it,
        wall_time=time.perf_counter() - start,
    )


@dataclass
class SegmentRecord:
    index: int
    t_n: float
    y_n: np.ndarray
    best_loss: float = float("nan")
    final_loss: float = float("nan")
    best_iteration: int = 0
    iterations_run: int = 0
    wall_time: float = 0.0
    seed: int = 0
    history: list = field(default_factory=list)
    model: SegmentModel | None = None


@dataclass
class PinnTrajectory:
    grid: np.ndarray
    y: np.ndarray
    z: np.ndarray
    predictions: list
    segments: list

    @property
    def n_stage_points(self) -> int:
        return sum(np.shape(pr.xi)[0] for pr in self.predictions)

    def stage_times(self, tab: RadauTableau, h: float) -> np.ndarray:
        return np.concatenate([t + np.asarray(tab.c) * h for t in self.grid[:-1]])


def train_segment_fn(p, tab, t_n, y_n, h, cfg, index, previous):
    """Default per-segment solver: build, train, predict."""
    seg_cfg = replace(cfg, seed=cfg.seed + index)
    model = build_segment_model(p, tab, t_n, h, seg_cfg)
    if cfg.warm_start and previous is not None:
        model = model.copy_with(dict(previous.params))
    result = train_segment(model, y_n, seg_cfg)
    pred = segment_predict(result.model, y_n)
    record = SegmentRecord(
        index=index, t_n=t_n, y_n=np.array(y_n), best_loss=result.best_loss,
        final_loss=result.final_loss, best_iteration=result.best_iteration,
        iterations_run=result.iterations_run, wall_time=result.wall_time,
        seed=seg_cfg.seed, history=result.history, model=result.model,
    )
    return pred, record


def march(p: DaeProblem, tab: RadauTableau, t0, T, h, cfg: TrainConfig,
          segment_fn=None) -> PinnTrajectory:
    """Train one segment model per step of ``[t0, T]`` in order.

    Segment ``k`` is fed the ``y_{n+1}`` predicted by segment ``k - 1``.
    ``segment_fn(p, tab, t_n, y_n, h, cfg, index, previous_model)`` may be
    swapped in (for example a classical Radau step) and must return
    ``(SegmentPrediction, SegmentRecord)``. A :class:`TrainingAborted` raised
    mid-march carries the partial trajectory as ``exc.trajectory``.
    """
    segment_fn = segment_fn or train_segment_fn
    n_steps = step_count(t0, T, h)
    grid = t0 + h * np.arange(n_steps + 1)
    ys = [np.asarray(p.y0, dtype=float)]
    zs = [np.asarray(p.z0, dtype=float)]
    predictions, records = [], []
    previous = None
    for k in range(n_steps):
        try:
            pred, record = segment_fn(p, tab, float(grid[k]), ys[-1], h, cfg, k, previous)
        except TrainingAborted as exc:
            exc.trajectory = PinnTrajectory(grid[: k + 1], np.array(ys), np.array(zs),
                                            predictions, records)
            raise
        logger.info("segment %d/%d t=%.4f best loss %.3e", k + 1, n_steps,
                    grid[k], record.best_loss)
        predictions.append(pred)
        records.append(record)
        previous = record.model
        ys.append(np.asarray(pred.y_next, dtype=float))
        zs.append(np.asarray(pred.z_next, dtype=float))
    return PinnTrajectory(grid, np.array(ys), np.array(zs).reshape(n_steps + 1, p.dim_z),
                          predictions, records)
