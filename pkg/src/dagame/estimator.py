"""Game estimator, its Kalman special case, and the H-infinity realization.

Game estimator::

    xhat_dot = A xhat + B u + gamma^-2 Y Q xhat + Y H' V^-1 (z - H xhat),  xhat(t0) = 0

With Q = 0 (or gamma -> inf) this is the Kalman-Bucy filter.  The
transformed estimate ``xbar = Omega^-1 xhat`` with ``Omega = I - gamma^-2 Y X``
is the H-infinity filter realization of the same strategy.

All stepping functions accept a single state ``(n,)`` or a batch ``(R, n)``;
``u`` and ``z`` follow the same leading shape.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import NonFinite, SingularOmega
from .model import GameModel
from .riccati import RiccatiSolution

KINDS = ("game", "kalman", "hinf")
OMEGA_DET_FLOOR = 1e-12


@dataclass(frozen=True)
class EstimatorState:
    xhat: np.ndarray
    t: float
    kind: str = "game"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        object.__setattr__(self, "xhat", np.asarray(self.xhat, dtype=float))

    @classmethod
    def initial(cls, model: GameModel, kind: str = "game", xhat0=None) -> "EstimatorState":
        x = np.zeros(model.n) if xhat0 is None else np.asarray(xhat0, dtype=float)
        return cls(x, model.t0, kind)


def estimator_rk4(
    xhat: np.ndarray,
    dt: float,
    model: GameModel,
    Ys: Sequence[np.ndarray],
    Hs: Sequence[np.ndarray],
    u: np.ndarray,
    z: np.ndarray,
    shaping: bool,
) -> np.ndarray:
    """One RK4 step of the estimator ODE with u and z held over the step.

    ``Ys`` and ``Hs`` are the values at the start, midpoint and end of the
    step.  ``shaping`` switches the gamma^-2 Y Q xhat term on (game) or off
    (Kalman).
    """
    A_t = model.A.T
    drive = np.asarray(u, dtype=float) @ model.B.T
    Vinv = np.linalg.inv(model.V)
    g2 = model.gamma ** -2
    use_q = shaping and np.any(model.Q)

    def f(x, Y, H):
        K = Y @ H.T @ Vinv  # (n, m)
        dx = x @ A_t + drive + (z - x @ H.T) @ K.T
        if use_q:
            dx = dx + g2 * (x @ (Y @ model.Q).T)
        return dx

    Y0, Ym, Y1 = Ys
    H0, Hm, H1 = Hs
    k1 = f(xhat, Y0, H0)
    k2 = f(xhat + 0.5 * dt * k1, Ym, Hm)
    k3 = f(xhat + 0.5 * dt * k2, Ym, Hm)
    k4 = f(xhat + dt * k3, Y1, H1)
    out = xhat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFinite("estimator state became non-finite")
    return out


def _stages(Y: Union[np.ndarray, RiccatiSolution], model: GameModel, t: float, dt: float):
    ts = (t, t + 0.5 * dt, t + dt)
    if isinstance(Y, RiccatiSolution):
        Ys = tuple(Y(s) for s in ts)
    else:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        Ys = (Y, Y, Y)
    return Ys, tuple(model.H_at(s) for s in ts)


def game_estimator_step(state: EstimatorState, model: GameModel, Y, u, z, dt: float) -> EstimatorState:
    """Advance the game estimator one RK4 step.

    ``Y`` is either the current estimator-DRE matrix (held over the step) or
    a :class:`RiccatiSolution`, in which case it is interpolated at the
    stage times.
    """
    Ys, Hs = _stages(Y, model, state.t, dt)
    x = estimator_rk4(state.xhat, dt, model, Ys, Hs, np.atleast_1d(u), np.atleast_1d(z), True)
    return EstimatorState(x, state.t + dt, "game")


def kalman_step(state: EstimatorState, model: GameModel, Y, u, z, dt: float) -> EstimatorState:
    Ys, Hs = _stages(Y, model, state.t, dt)
    x = estimator_rk4(state.xhat, dt, model, Ys, Hs, np.atleast_1d(u), np.atleast_1d(z), False)
    return EstimatorState(x, state.t + dt, "kalman")


def omega(X: np.ndarray, Y: np.ndarray, gamma: float) -> np.ndarray:
    """Omega = I - gamma^-2 Y X."""
    X = np.atleast_2d(X)
    return np.eye(X.shape[0]) - gamma ** -2 * (np.atleast_2d(Y) @ X)


def hinf_transform(xhat: np.ndarray, Omega: np.ndarray, det_floor: float = OMEGA_DET_FLOOR) -> np.ndarray:
    """xbar = Omega^-1 xhat (batch rows allowed)."""
    Omega = np.atleast_2d(Omega)
    det = np.linalg.det(Omega)
    if not np.isfinite(det) or det <= det_floor:
        raise SingularOmega(f"|Omega| = {det:.3g} is below {det_floor:g}")
    xhat = np.asarray(xhat, dtype=float)
    if xhat.ndim == 1:
        return np.linalg.solve(Omega, xhat)
    return np.linalg.solve(Omega, xhat.T).T
