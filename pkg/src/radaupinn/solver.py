"""Fixed-step Radau IIA integration of index-2 DAEs by full Newton iteration.

The stage system for one step from ``(t_n, y_n)`` is, for i = 1..v,

    xi_i - y_n - h * sum_j a_ij f(t_n + c_j h, xi_j, zeta_j) = 0
    g(t_n + c_i h, xi_i) / h = 0

Unknowns are ordered stage by stage as ``[xi_1, zeta_1, xi_2, zeta_2, ...]``.
The method is stiffly accurate, so the step result is the last stage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dae import DaeProblem, State
from .errors import DomainError, StepFailure
from .tableau import RadauTableau

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-12
    max_iters: int = 50


@dataclass
class StepSolution:
    xi: np.ndarray
    zeta: np.ndarray
    y_next: np.ndarray
    z_next: np.ndarray
    newton_iters: int
    residual: float


@dataclass
class Trajectory:
    grid: np.ndarray
    y: np.ndarray
    z: np.ndarray
    steps: list = field(default_factory=list)

    @property
    def states(self):
        return [State(t, y, z) for t, y, z in zip(self.grid, self.y, self.z)]


def _stage_times(tab, t_n, h):
    return t_n + np.asarray(tab.c) * h


def _split(x, v, n, m):
    blocks = x.reshape(v, n + m)
    return blocks[:, :n], blocks[:, n:]


def stage_residual(p: DaeProblem, tab: RadauTableau, t_n, y_n, h, xi, zeta):
    """Residual blocks ``(F, G)`` of the stage system, G unscaled (no 1/h)."""
    ts = _stage_times(tab, t_n, h)
    fx = np.asarray(p.f(ts, xi, zeta), dtype=float).reshape(tab.v, p.dim_y)
    F = xi - y_n - h * (tab.A @ fx)
    if p.dim_z:
        G = np.asarray(p.g(ts, xi), dtype=float).reshape(tab.v, p.dim_z)
    else:
        G = np.zeros((tab.v, 0))
    return F, G


def newton_iteration_matrix(p: DaeProblem, tab: RadauTableau, t_n, y_n, h, xi, zeta):
    """Jacobian of the (1/h-scaled) stage system at the given stage values."""
    v, n, m = tab.v, p.dim_y, p.dim_z
    k = n + m
    ts = _stage_times(tab, t_n, h)
    J = np.zeros((v * k, v * k))
    fys = [p.jac_f_y(ts[j], xi[j], zeta[j]) for j in range(v)]
    fzs = [p.jac_f_z(ts[j], xi[j], zeta[j]) for j in range(v)]
    for i in range(v):
        r = i * k
        for j in range(v):
            c = j * k
            J[r:r + n, c:c + n] = -h * tab.A[i, j] * fys[j]
            J[r:r + n, c + n:c + k] = -h * tab.A[i, j] * fzs[j]
        J[r:r + n, r:r + n] += np.eye(n)
        if m:
            J[r + n:r + k, r:r + n] = p.jac_g_y(ts[i], xi[i]) / h
    return J


def _scaled_norm(F, G, scale):
    parts = [np.abs(F).ravel(), np.abs(G).ravel()]
    return float(np.max(np.concatenate(parts))) / scale


def radau_step(p: DaeProblem, tab: RadauTableau, t_n, y_n, z_n, h,
               cfg: NewtonConfig | None = None) -> StepSolution:
    """Advance one step of size ``h``; raises :class:`StepFailure` on breakdown."""
    cfg = cfg or NewtonConfig()
    if not h > 0:
        raise DomainError(f"step size must be positive, got {h}")
    v, n, m = tab.v, p.dim_y, p.dim_z
    y_n = np.asarray(y_n, dtype=float)
    z_n = np.asarray(z_n, dtype=float)
    xi = np.tile(y_n, (v, 1))
    zeta = np.tile(z_n, (v, 1))
    scale = max(1.0, float(np.max(np.abs(y_n))))

    F, G = stage_residual(p, tab, t_n, y_n, h, xi, zeta)
    res = _scaled_norm(F, G, scale)
    iters = 0
    while res > cfg.tol:
        if iters >= cfg.max_iters:
            raise StepFailure(
                f"Newton did not converge in {cfg.max_iters} iterations at t={t_n} "
                f"(residual {res:.3e})",
                residual=res, t=t_n,
            )
        J = newton_iteration_matrix(p, tab, t_n, y_n, h, xi, zeta)
        rhs = np.concatenate([F, G / h], axis=1).ravel()
        try:
            delta = np.linalg.solve(J, -rhs)
        except np.linalg.LinAlgError:
            raise StepFailure(
                f"singular iteration matrix at t={t_n}: step size too large or "
                f"index condition violated",
                residual=res, singular=True, t=t_n,
            ) from None
        if not np.all(np.isfinite(delta)):
            raise StepFailure(f"non-finite Newton update at t={t_n}",
                              residual=res, singular=True, t=t_n)
        dxi, dzeta = _split(delta, v, n, m)
        xi = xi + dxi
        zeta = zeta + dzeta
        iters += 1
        F, G = stage_residual(p, tab, t_n, y_n, h, xi, zeta)
        res = _scaled_norm(F, G, scale)

    return StepSolution(
        xi=xi,
        zeta=zeta,
        y_next=xi[-1].copy(),
        z_next=zeta[-1].copy(),
        newton_iters=iters,
        residual=res,
    )


def step_count(t0, T, h):
    """Number of uniform steps covering [t0, T]; rejects non-commensurate h."""
    if not h > 0:
        raise DomainError(f"step size must be positive, got {h}")
    if T < t0:
        raise DomainError(f"end time {T} precedes start time {t0}")
    ratio = (T - t0) / h
    n_steps = int(round(ratio))
    if abs(ratio - n_steps) > 1e-8 * max(1.0, ratio):
        raise DomainError(f"interval length {T - t0} is not a multiple of h={h}")
    return n_steps


def integrate(p: DaeProblem, tab: RadauTableau, t0, T, h,
              cfg: NewtonConfig | None = None, y0=None, z0=None) -> Trajectory:
    """Chain :func:`radau_step` over ``[t0, T]``.

    Starts from the problem's initial values unless ``y0``/``z0`` are given.
    On a step failure the raised :class:`StepFailure` carries the partial
    trajectory as ``exc.trajectory``.
    """
    n_steps = step_count(t0, T, h)
    grid = t0 + h * np.arange(n_steps + 1)
    ys = [np.asarray(p.y0 if y0 is None else y0, dtype=float)]
    zs = [np.asarray(p.z0 if z0 is None else z0, dtype=float)]
    steps = []
    for k in range(n_steps):
        try:
            sol = radau_step(p, tab, grid[k], ys[-1], zs[-1], h, cfg)
        except StepFailure as exc:
            exc.trajectory = Trajectory(grid[: k + 1], np.array(ys), np.array(zs), steps)
            logger.warning("integration aborted at t=%g: %s", grid[k], exc)
            raise
        steps.append(sol)
        ys.append(sol.y_next)
        zs.append(sol.z_next)
    return Trajectory(grid, np.array(ys), np.array(zs).reshape(n_steps + 1, p.dim_z), steps)
