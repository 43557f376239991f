"""Semi-explicit index-2 DAEs  y' = f(t, y, z),  0 = g(t, y).

Right-hand sides are written against the last axis of their arguments and
assembled with :func:`radaupinn.autodiff.stack`, so one definition serves the
Newton solver (1-D arrays), vectorised stage evaluation (``(v, n)`` arrays)
and the PINN loss (autodiff tensors).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .autodiff import stack
from .errors import DomainError


@dataclass(frozen=True)
class State:
    t: float
    y: np.ndarray
    z: np.ndarray


@dataclass(frozen=True)
class DaeProblem:
    name: str
    dim_y: int
    dim_z: int
    f: Callable
    g: Callable
    t0: float
    y0: np.ndarray
    z0: np.ndarray
    exact: Optional[Callable] = None
    reduced_z: Optional[Callable] = None
    params: dict = field(default_factory=dict)
    f_y: Optional[Callable] = None
    f_z: Optional[Callable] = None
    g_y: Optional[Callable] = None

    @property
    def initial_state(self) -> State:
        return State(self.t0, self.y0.copy(), self.z0.copy())

    # Jacobians fall back to forward differences when no analytic form is given.

    def jac_f_y(self, t, y, z):
        if self.f_y is not None:
            return np.asarray(self.f_y(t, y, z), dtype=float)
        return _fd_jacobian(lambda u: self.f(t, u, z), y)

    def jac_f_z(self, t, y, z):
        if self.f_z is not None:
            return np.asarray(self.f_z(t, y, z), dtype=float)
        if self.dim_z == 0:
            return np.zeros((self.dim_y, 0))
        return _fd_jacobian(lambda u: self.f(t, y, u), z)

    def jac_g_y(self, t, y):
        if self.g_y is not None:
            return np.asarray(self.g_y(t, y), dtype=float)
        if self.dim_z == 0:
            return np.zeros((0, self.dim_y))
        return _fd_jacobian(lambda u: self.g(t, u), y)


def _fd_jacobian(fun, x):
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x), dtype=float)
    J = np.empty((f0.size, x.size))
    eps = np.sqrt(np.finfo(float).eps)
    for j in range(x.size):
        step = eps * max(1.0, abs(x[j]))
        xp = x.copy()
        xp[j] += step
        J[:, j] = (np.asarray(fun(xp), dtype=float) - f0) / step
    return J


@dataclass(frozen=True)
class ConsistencyReport:
    g_residual: float
    gyfz_det: float


def check_consistency(p: DaeProblem, s: State) -> ConsistencyReport:
    y = np.asarray(s.y, dtype=float)
    z = np.asarray(s.z, dtype=float)
    if y.shape != (p.dim_y,) or z.shape != (p.dim_z,):
        raise DomainError(
            f"state dims {y.shape}, {z.shape} do not match problem ({p.dim_y}, {p.dim_z})"
        )
    g = np.asarray(p.g(s.t, y), dtype=float)
    g_res = float(np.max(np.abs(g))) if g.size else 0.0
    if p.dim_z == 0:
        return ConsistencyReport(g_res, 1.0)
    M = p.jac_g_y(s.t, y) @ p.jac_f_z(s.t, y, z)
    return ConsistencyReport(g_res, float(np.linalg.det(M)))


# -- Hessenberg benchmark -----------------------------------------------------

def _hess_f(t, y, z):
    y1, y2, y3, y4 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    y5 = z[..., 0]
    return stack(
        [
            (y3 * y4 + y1 * y2) * y5,
            -y3 * y4**2 * y2**2 * y5,
            2.0 * y3 * y4 * y1 * y2,
            -y3 * y4 * y2**2,
        ],
        axis=-1,
    )


def _hess_g(t, y):
    return stack([y[..., 0] * y[..., 3] - y[..., 1] * y[..., 2]], axis=-1)


def _hess_f_y(t, y, z):
    y1, y2, y3, y4 = y
    y5 = z[0]
    return np.array([
        [y2 * y5, y1 * y5, y4 * y5, y3 * y5],
        [0.0, -2 * y3 * y4**2 * y2 * y5, -y4**2 * y2**2 * y5, -2 * y3 * y4 * y2**2 * y5],
        [2 * y3 * y4 * y2, 2 * y3 * y4 * y1, 2 * y4 * y1 * y2, 2 * y3 * y1 * y2],
        [0.0, -2 * y3 * y4 * y2, -y4 * y2**2, -y3 * y2**2],
    ])


def _hess_f_z(t, y, z):
    y1, y2, y3, y4 = y
    return np.array([[y3 * y4 + y1 * y2], [-y3 * y4**2 * y2**2], [0.0], [0.0]])


def _hess_g_y(t, y):
    y1, y2, y3, y4 = y
    return np.array([[y4, -y3, -y2, y1]])


def _hess_exact(t):
    t = np.asarray(t, dtype=float)
    e2, em, e1 = np.exp(2 * t), np.exp(-t), np.exp(t)
    return np.stack([e2, em, e2, em], axis=-1), np.stack([e1], axis=-1)


def hessenberg_derivative(t):
    """Closed-form time derivative of the Hessenberg exact solution."""
    t = np.asarray(t, dtype=float)
    e2, em = np.exp(2 * t), np.exp(-t)
    return np.stack([2 * e2, -em, 2 * e2, -em], axis=-1)


def hessenberg_problem() -> DaeProblem:
    """Index-2 Hessenberg DAE with exact solution (e^2t, e^-t, e^2t, e^-t; e^t)."""
    return DaeProblem(
        name="hessenberg",
        dim_y=4,
        dim_z=1,
        f=_hess_f,
        g=_hess_g,
        t0=0.0,
        y0=np.ones(4),
        z0=np.ones(1),
        exact=_hess_exact,
        f_y=_hess_f_y,
        f_z=_hess_f_z,
        g_y=_hess_g_y,
    )


# -- pendulum benchmark -------------------------------------------------------

def pendulum_problem(m: float = 1.0, lam: float = 1.0) -> DaeProblem:
    """Index-2 pendulum: y1'=y3, y2'=y4, y3'=-y1 y5, m y4'=-y2 y5 - lam, 0=y1 y3+y2 y4."""
    m = float(m)
    lam = float(lam)
    if m == 0.0:
        raise DomainError("pendulum mass m must be non-zero")

    def f(t, y, z):
        y1, y2, y3, y4 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
        y5 = z[..., 0]
        return stack([y3, y4, -y1 * y5, (-y2 * y5 - lam) / m], axis=-1)

    def g(t, y):
        return stack([y[..., 0] * y[..., 2] + y[..., 1] * y[..., 3]], axis=-1)

    def f_y(t, y, z):
        y5 = z[0]
        return np.array([
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-y5, 0.0, 0.0, 0.0],
            [0.0, -y5 / m, 0.0, 0.0],
        ])

    def f_z(t, y, z):
        return np.array([[0.0], [0.0], [-y[0]], [-y[1] / m]])

    def g_y(t, y):
        y1, y2, y3, y4 = y
        return np.array([[y3, y4, y1, y2]])

    def reduced_z(t, y):
        # d/dt g = y3^2 + y4^2 - y1^2 y5 - y2 (y2 y5 + lam)/m = 0
        y = np.asarray(y, dtype=float)
        y1, y2, y3, y4 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
        num = y3**2 + y4**2 - lam * y2 / m
        den = y1**2 + y2**2 / m
        return np.stack([num / den], axis=-1)

    return DaeProblem(
        name="pendulum",
        dim_y=4,
        dim_z=1,
        f=f,
        g=g,
        t0=0.0,
        y0=np.array([1.0, 0.0, 0.0, 1.0]),
        z0=np.array([1.0]),
        reduced_z=reduced_z,
        params={"m": m, "lambda": lam},
        f_y=f_y,
        f_z=f_z,
        g_y=g_y,
    )


def index_reduced_ode(p: DaeProblem) -> DaeProblem:
    """ODE y' = f(t, y, reduced_z(t, y)) with no algebraic part."""
    if p.reduced_z is None:
        raise DomainError(f"problem {p.name!r} has no index reduction")

    def f(t, y, z):
        return p.f(t, y, p.reduced_z(t, y))

    def g(t, y):
        return np.zeros(np.shape(y)[:-1] + (0,))

    return DaeProblem(
        name=f"{p.name}-reduced",
        dim_y=p.dim_y,
        dim_z=0,
        f=f,
        g=g,
        t0=p.t0,
        y0=p.y0.copy(),
        z0=np.zeros(0),
        params=dict(p.params),
    )


PROBLEMS = {
    "hessenberg": hessenberg_problem,
    "pendulum": pendulum_problem,
}


def make_problem(name: str, **params) -> DaeProblem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise DomainError(
            f"unknown problem {name!r}; valid names: {', '.join(sorted(PROBLEMS))}"
        ) from None
    if name == "pendulum":
        return factory(m=params.get("m", 1.0), lam=params.get("lambda", 1.0))
    if params:
        raise DomainError(f"problem {name!r} takes no parameters, got {sorted(params)}")
    return factory()
