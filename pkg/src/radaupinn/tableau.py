"""Radau IIA Butcher tableaus for arbitrary stage counts.

Nodes are the roots of d^{v-1}/dx^{v-1} [x^{v-1} (x-1)^v]; the stage matrix
comes from the simplifying condition C(v) solved row by row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError

MAX_STAGES = 10


@dataclass(frozen=True)
class RadauTableau:
    """Coefficients of the ``v``-stage Radau IIA method (classical order 2v-1)."""

    v: int
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    @property
    def order(self) -> int:
        return 2 * self.v - 1

    @property
    def stage_order(self) -> int:
        return self.v


@dataclass(frozen=True)
class OrderResiduals:
    """Max absolute residual of each simplifying-assumption family."""

    B: float
    C: float
    D: float

    def max(self) -> float:
        return max(self.B, self.C, self.D)


def _check_stages(v):
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise DomainError(f"stage count must be an integer, got {v!r}")
    if not 1 <= v <= MAX_STAGES:
        raise DomainError(f"stage count must lie in [1, {MAX_STAGES}], got {v}")
    return int(v)


def _node_polynomial(v):
    """Integer coefficients (ascending powers) of d^{v-1}/dx^{v-1}[x^{v-1}(x-1)^v]."""
    # x^{v-1} (x-1)^v = sum_k C(v,k) (-1)^{v-k} x^{v-1+k}
    coeffs = [0] * (2 * v)
    for k in range(v + 1):
        coeffs[v - 1 + k] = math.comb(v, k) * (-1) ** (v - k)
    for _ in range(v - 1):
        coeffs = [p * coeffs[p] for p in range(1, len(coeffs))]
    return coeffs


def _horner(coeffs, x):
    p = 0.0
    dp = 0.0
    for a in reversed(coeffs):
        dp = dp * x + p
        p = p * x + a
    return p, dp


def _relative_residual(coeffs, x):
    p, _ = _horner(coeffs, x)
    scale = sum(abs(a) * abs(x) ** k for k, a in enumerate(coeffs))
    return abs(p) / scale


def radau_nodes(v: int) -> np.ndarray:
    """Collocation nodes of the ``v``-stage Radau IIA method, ascending, last = 1.

    Interior roots are bracketed by sign changes on a uniform grid, bisected,
    then polished with Newton. The reported residual is relative to the
    magnitude of the polynomial's terms at the root.
    """
    v = _check_stages(v)
    if v == 1:
        return np.array([1.0])
    coeffs = [float(a) for a in _node_polynomial(v)]
    degree = len(coeffs) - 1

    # the root at x=1 is exact; search the interior only
    grid = np.linspace(0.0, 1.0, 400 * v + 1)[:-1]
    vals = [_horner(coeffs, x)[0] for x in grid]
    brackets = [
        (grid[i], grid[i + 1])
        for i in range(len(grid) - 1)
        if vals[i] == 0.0 or vals[i] * vals[i + 1] < 0.0
    ]
    if len(brackets) != v - 1:
        raise NumericalError(
            f"found {len(brackets)} interior sign changes, expected {v - 1} "
            f"(polynomial degree {degree})"
        )

    roots = []
    for lo, hi in brackets:
        flo = _horner(coeffs, lo)[0]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fmid = _horner(coeffs, mid)[0]
            if fmid == 0.0 or hi - lo < 1e-13:
                break
            if (fmid < 0.0) == (flo < 0.0):
                lo, flo = mid, fmid
            else:
                hi = mid
        x = 0.5 * (lo + hi)
        for _ in range(5):
            p, dp = _horner(coeffs, x)
            if dp == 0.0:
                break
            step = p / dp
            x -= step
            if abs(step) <= 1e-17:
                break
        if _relative_residual(coeffs, x) > 1e-14 or not 0.0 < x < 1.0:
            raise NumericalError(
                f"root refinement failed near {x!r} (polynomial degree {degree})"
            )
        roots.append(x)

    roots.append(1.0)
    return np.array(roots)


def radau_tableau(v: int) -> RadauTableau:
    """Build the ``v``-stage Radau IIA tableau.

    Row ``i`` of ``A`` solves sum_j a_ij c_j^{k-1} = c_i^k / k for k = 1..v;
    ``b`` is a copy of the last row (stiff accuracy).
    """
    v = _check_stages(v)
    c = radau_nodes(v)
    if np.any(np.diff(c) <= 0.0):
        raise NumericalError("Radau nodes are not distinct")
    k = np.arange(1, v + 1)
    # V[k-1, j] = c_j^{k-1}
    V = c[np.newaxis, :] ** (k[:, np.newaxis] - 1)
    rhs = (c[:, np.newaxis] ** k[np.newaxis, :]) / k[np.newaxis, :]
    try:
        A = np.linalg.solve(V, rhs.T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular Vandermonde system for v={v}") from exc
    b = A[-1].copy()
    return RadauTableau(v=v, c=c, A=A, b=b)


def quadrature_residuals(t: RadauTableau) -> np.ndarray:
    """``|sum_i b_i c_i^(k-1) - 1/k|`` for k = 1..2v-1 (entry k-1)."""
    c, b = np.asarray(t.c), np.asarray(t.b)
    k = np.arange(1, 2 * t.v)
    return np.abs(np.array([b @ c ** (j - 1) for j in k]) - 1.0 / k)


def verify_order_conditions(t: RadauTableau) -> OrderResiduals:
    """Evaluate the B(2v-1), C(v) and D(v-1) residuals of a tableau."""
    v, c, A, b = t.v, np.asarray(t.c), np.asarray(t.A), np.asarray(t.b)

    res_b = float(np.max(quadrature_residuals(t)))

    res_c = 0.0
    for k in range(1, v + 1):
        res_c = max(res_c, float(np.max(np.abs(A @ c ** (k - 1) - c**k / k))))

    res_d = 0.0
    for k in range(1, v):
        lhs = (b * c ** (k - 1)) @ A
        rhs = b / k * (1.0 - c**k)
        res_d = max(res_d, float(np.max(np.abs(lhs - rhs))))

    return OrderResiduals(B=res_b, C=res_c, D=res_d)
