"""Differential Riccati equations of the game.

Controller (backward from tf)::

    -Xdot = X A + A'X - X (B B' - gamma^-2 D W D') X + Q,      X(tf) = Qf

Estimator (forward from t0)::

    Ydot = A Y + Y A' + D W D' - Y (H' V^-1 H - gamma^-2 Q) Y,  Y(t0) = Y0

Dropping the ``gamma^-2 Q`` term gives the Kalman-Bucy covariance equation.
Both are integrated with classical fixed-step RK4 on the grid and
re-symmetrized after every step.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, FiniteEscape, OutOfRange
from .model import GameModel, TimeGrid, _ConstantH

BLOWUP_BOUND = 1e12
# Automatic substeps keep h*lambda well inside RK4's real stability interval (~2.785)
# and limit the relative change of M per substep, which resolves steep
# transients (e.g. X near tf with a large Qf) without slowing stiff equilibria.
_RK4_STABLE = 0.5
_MAX_REL_CHANGE = 0.02
_MAX_SUBSTEPS = 100_000
_STIFFNESS_REFRESH = 8


@dataclass(frozen=True)
class RiccatiSolution:
    grid: TimeGrid
    values: np.ndarray  # (len(grid), n, n), forward time order
    direction: str  # "backward" | "forward"

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    def __call__(self, t: float) -> np.ndarray:
        return evaluate(self, t)

    def __len__(self) -> int:
        return self.values.shape[0]

    def min_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.values)[:, 0]

    def to_csv(self, path, label: str = "M") -> None:
        """Write one row per node: t followed by vec(M) in row-major order."""
        n = self.values.shape[1]
        header = ["t"] + [f"{label}{i + 1}{j + 1}" for i in range(n) for j in range(n)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, M in zip(self.times, self.values):
                w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in M.ravel()])


def evaluate(solution: RiccatiSolution, t: float) -> np.ndarray:
    """Linear interpolation between adjacent nodes; exact at nodes."""
    g = solution.grid
    span = g.tf - g.t0
    if t < g.t0 - 1e-12 * span or t > g.tf + 1e-12 * span:
        raise OutOfRange(f"t={t} outside [{g.t0}, {g.tf}]")
    s = (t - g.t0) / g.dt
    k = int(math.floor(s))
    k = min(max(k, 0), g.steps)
    frac = s - k
    if k == g.steps or frac <= 0.0:
        return solution.values[k].copy()
    return (1.0 - frac) * solution.values[k] + frac * solution.values[k + 1]


def _stiffness(M: np.ndarray, quad: np.ndarray, lin_norm: float) -> float:
    # the quadratic term linearizes to dM -> dM S M + M S dM, whose eigenvalues
    # are sums of pairs of eigenvalues of M S
    P = M @ quad
    if P.shape == (1, 1):
        return 2.0 * abs(float(P[0, 0])) + lin_norm
    return 2.0 * float(np.abs(np.linalg.eigvals(P)).max()) + lin_norm


def _check(M: np.ndarray, t: float, bound: float, which: str) -> None:
    if not np.all(np.isfinite(M)) or np.abs(M).max() > bound:
        raise FiniteEscape(f"{which} Riccati solution escaped near t={t:.6g}", t=t)


def _march(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    quad_at,  # constant matrix, or a function of t
    lin_norm: float,
    M_start: np.ndarray,
    times: np.ndarray,
    substeps: Optional[int],
    bound: float,
    which: str,
) -> np.ndarray:
    """RK4 through ``times`` (in marching order), returning one matrix per node."""
    out = np.empty((len(times),) + M_start.shape)
    out[0] = M_start
    M = M_start
    with np.errstate(over="ignore", invalid="ignore"):
        _steps(rhs, quad_at, lin_norm, M, times, substeps, bound, which, out)
    return out


def _rk4(rhs, t, M, h, k1=None):
    if k1 is None:
        k1 = rhs(t, M)
    k2 = rhs(t + 0.5 * h, M + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, M + 0.5 * h * k2)
    k4 = rhs(t + h, M + h * k3)
    M = M + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return 0.5 * (M + M.T)


def _steps(rhs, quad_at, lin_norm, M, times, substeps, bound, which, out) -> None:
    for k in range(1, len(times)):
        ta, tb = times[k - 1], times[k]
        if substeps:
            h = (tb - ta) / substeps
            for i in range(substeps):
                M = _rk4(rhs, ta + i * h, M, h)
        else:
            # substeps sized from the stiffness (refreshed every few substeps)
            # and the current rate of change of M
            t = ta
            n_sub = 0
            while t != tb:
                if not np.all(np.isfinite(M)) or np.abs(M).max() > bound:
                    break
                if n_sub % _STIFFNESS_REFRESH == 0:
                    if callable(quad_at):
                        rho = max(_stiffness(M, quad_at(t), lin_norm), _stiffness(M, quad_at(tb), lin_norm))
                    else:
                        rho = _stiffness(M, quad_at, lin_norm)
                    h_stab = _RK4_STABLE / rho if rho > 0 else math.inf
                k1 = rhs(t, M)
                rate = np.linalg.norm(k1) / max(np.linalg.norm(M), 1e-300)
                h_max = min(h_stab, _MAX_REL_CHANGE / rate if rate > 0 else math.inf)
                left = tb - t
                h = left if abs(left) <= h_max else math.copysign(h_max, left)
                M = _rk4(rhs, t, M, h, k1)
                t = tb if h == left else t + h
                n_sub += 1
                if n_sub > _MAX_SUBSTEPS:
                    raise FiniteEscape(f"{which} Riccati equation too stiff near t={t:.6g}", t=t)
        _check(M, tb, bound, which)
        out[k] = M


def solve_X(
    model: GameModel,
    grid: TimeGrid,
    *,
    substeps: Optional[int] = None,
    blowup: float = BLOWUP_BOUND,
) -> RiccatiSolution:
    """Controller DRE, integrated backward from ``X(tf) = Qf``.

    ``substeps`` fixes the number of RK4 steps per grid interval; ``None``
    picks the smallest count that keeps RK4 inside its stability region.
    Raises :class:`FiniteEscape` when the solution leaves ``blowup``.
    """
    A, Q = model.A, model.Q
    S = model.B @ model.B.T - model.gamma ** -2 * (model.D @ model.W @ model.D.T)
    At = A.T

    def rhs(t, X):
        return -(X @ A + At @ X - X @ S @ X + Q)

    times = grid.nodes[::-1]
    vals = _march(rhs, S, 2.0 * np.linalg.norm(A), model.Qf.copy(), times,
                  substeps, blowup, "controller")
    vals[0] = model.Qf  # boundary value stays bit-exact
    values = vals[::-1].copy()
    values.setflags(write=False)
    return RiccatiSolution(grid, values, "backward")


def solve_Y(
    model: GameModel,
    grid: TimeGrid,
    *,
    kalman: bool = False,
    substeps: Optional[int] = None,
    blowup: float = BLOWUP_BOUND,
) -> RiccatiSolution:
    """Estimator DRE, integrated forward from ``Y(t0) = Y0``.

    H(t) is evaluated at the RK4 stage times.  With ``kalman=True`` the
    ``gamma^-2 Q`` term is dropped (Kalman-Bucy covariance).
    """
    A, At = model.A, model.A.T
    DWD = model.D @ model.W @ model.D.T
    Vinv = np.linalg.inv(model.V)
    shaping = np.zeros_like(model.Q) if kalman else model.gamma ** -2 * model.Q

    def quad(t):
        H = model.H_at(t)
        return H.T @ Vinv @ H - shaping

    if isinstance(model.H, _ConstantH):
        fixed = quad(model.t0)

        def rhs(t, Y):
            return A @ Y + Y @ At + DWD - Y @ fixed @ Y

        quad_arg = fixed
    else:
        def rhs(t, Y):
            return A @ Y + Y @ At + DWD - Y @ quad(t) @ Y

        quad_arg = quad

    vals = _march(rhs, quad_arg, 2.0 * np.linalg.norm(A), model.Y0.copy(), grid.nodes,
                  substeps, blowup, "estimator")
    vals[0] = model.Y0
    vals.setflags(write=False)
    return RiccatiSolution(grid, vals, "forward")


def sbgp_X_closed_form(b: float, gamma: float, t_go: float) -> float:
    """Scalar controller solution of the boat game: 1 / (1/b + (1 - gamma^-2) t_go)."""
    return 1.0 / (1.0 / b + (1.0 - gamma ** -2) * t_go)


def sbgp_Y_closed_form(Y0: float, V: float, t: float) -> float:
    """Exact solution of ``Ydot = 1 - Y^2 / V`` with ``Y(0) = Y0``.

    Y = sqrt(V) + mu with mu = 2 sqrt(V) / (((Y0 + sqrt V)/(Y0 - sqrt V)) e^(2t/sqrt V) - 1).
    """
    if not V > 0:
        raise DomainError(f"V must be positive, got {V}")
    s = math.sqrt(V)
    if Y0 == s:
        return s
    # same expression multiplied through by e^(-2t/s); no overflow for large t
    r = (Y0 - s) / (Y0 + s)
    e = r * math.exp(-2.0 * t / s)
    return s + 2.0 * s * e / (1.0 - e)
