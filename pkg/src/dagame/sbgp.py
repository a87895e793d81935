"""Simple boat guidance game: closed forms, approximations and saddle runs.

The relative separation obeys ``xdot = u + w`` and the pursuer measures
``z = x + v``.  With W = 1 and Q = 0 both Riccati equations are scalar and
solvable in closed form, so everything here doubles as an oracle for the
general matrix pipeline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import FiniteEscapeGain, InfeasibleGamma, SingularGain
from .guidance import GuidanceLaw
from .model import GameModel
from .riccati import sbgp_X_closed_form, sbgp_Y_closed_form, solve_X, solve_Y
from .sim import BatchResult, NoiseStream, simulate


@dataclass(frozen=True)
class SbgpScenario:
    b: float = 1000.0
    V: float = 0.25e-6
    Y0: float = 1.0
    gamma: float = 2.0
    tf: float = 1.0
    x0: float = 1.0

    def __post_init__(self):
        for name in ("b", "V", "Y0", "gamma", "tf"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def model(self) -> GameModel:
        return GameModel(
            A=[[0.0]], B=[[1.0]], D=[[1.0]], H=[[1.0]],
            Q=[[0.0]], Qf=[[self.b]], W=[[1.0]], V=[[self.V]], Y0=[[self.Y0]],
            gamma=self.gamma, t0=0.0, tf=self.tf,
        )


def _perfect_denominator(t_go: float, b: float, gamma: float) -> float:
    d = 1.0 / b + (1.0 - gamma ** -2) * t_go
    if not d > 0:
        raise InfeasibleGamma(f"1/b + (1 - gamma^-2) t_go = {d:.4g} <= 0")
    return d


def sbgp_perfect_u(x, t_go: float, b: float, gamma: float):
    """Pursuer saddle strategy -x / (1/b + (1 - gamma^-2) t_go); b may be inf."""
    return -np.asarray(x, dtype=float) / _perfect_denominator(t_go, b, gamma)


def sbgp_perfect_w(x, t_go: float, b: float, gamma: float):
    """Evader saddle strategy, gamma^-2 times the pursuer gain with opposite sign."""
    return gamma ** -2 * np.asarray(x, dtype=float) / _perfect_denominator(t_go, b, gamma)


def sbgp_da_u(xhat, t_go: float, b: float, V: float, Y0: float, gamma: float, t: float):
    """Exact measurement-feedback control using the closed-form estimator Riccati."""
    Y = sbgp_Y_closed_form(Y0, V, t)
    d = (1.0 - gamma ** -2) * t_go + 1.0 / b - gamma ** -2 * Y
    if not d > 0:
        raise SingularGain(f"gain denominator {d:.4g} <= 0 at t={t:.4g}")
    return -np.asarray(xhat, dtype=float) / d


def sbgp_exact_gain(t_go: float, b: float, V: float, Y0: float, gamma: float, t: float) -> float:
    return float(sbgp_da_u(1.0, t_go, b, V, Y0, gamma, t))


def sbgp_approx_gain(t_go, b: float, V: float, gamma: Optional[float] = None, mode: str = "fixed"):
    """Steady-state (Y = sqrt V) gain.

    ``mode="fixed"`` uses the supplied gamma; ``mode="critical"`` sets
    gamma^2 = b sqrt(V), which reduces the gain to -1 / ((1 - 1/(b sqrt V)) t_go).
    """
    s = math.sqrt(V)
    t_go = np.asarray(t_go, dtype=float)
    if mode == "fixed":
        if gamma is None:
            raise ValueError("fixed mode needs gamma")
        g2 = gamma ** -2
        if not 1.0 / b - g2 * s > 0:
            raise FiniteEscapeGain(f"1/b - gamma^-2 sqrt(V) = {1.0 / b - g2 * s:.4g} <= 0")
        d = (1.0 - g2) * t_go + 1.0 / b - g2 * s
    elif mode == "critical":
        c = 1.0 - 1.0 / (b * s)
        if not c > 0:
            raise FiniteEscapeGain("critical mode needs b sqrt(V) > 1")
        if np.any(t_go <= 0):
            raise FiniteEscapeGain("critical-gamma gain is unbounded at t_go = 0")
        d = c * t_go
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if np.any(d <= 0):
        raise FiniteEscapeGain("gain denominator not positive")
    return -1.0 / d


class SaddleCosts(NamedTuple):
    evader_deviates: float  # J(u*, w), worst over the two perturbation signs
    saddle: float  # J(u*, w*)
    pursuer_deviates: float  # J(u, w*), best over the two perturbation signs


def _closed_loop_cost(sc: SbgpScenario, u_scale: float, w_scale: float, dt: float) -> float:
    """RK4 on (x, running cost) with both feedback laws evaluated continuously."""
    b, g = sc.b, sc.gamma

    def f(t, y):
        x = y[0]
        Xt = sbgp_X_closed_form(b, g, sc.tf - t)
        u = -u_scale * Xt * x
        w = w_scale * g ** -2 * Xt * x
        return np.array([u + w, 0.5 * (u * u - g * g * w * w)])

    n = int(round(sc.tf / dt))
    h = sc.tf / n
    y = np.array([sc.x0, 0.0])
    t = 0.0
    for _ in range(n):
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return 0.5 * b * y[0] ** 2 + y[1]


def sbgp_saddle_check(sc: SbgpScenario, delta: float, dt: float = 1e-3) -> SaddleCosts:
    """Costs of the saddle pair and of one-sided deviations scaled by 1 +/- delta."""
    if not 0 <= delta <= 0.5:
        raise ValueError("delta must lie in [0, 0.5]")
    J = _closed_loop_cost(sc, 1.0, 1.0, dt)
    if delta == 0:
        return SaddleCosts(J, J, J)
    Jw = max(_closed_loop_cost(sc, 1.0, 1.0 + s * delta, dt) for s in (-1, 1))
    Ju = min(_closed_loop_cost(sc, 1.0 + s * delta, 1.0, dt) for s in (-1, 1))
    return SaddleCosts(Jw, J, Ju)


def run_sbgp(
    sc: SbgpScenario,
    law: str = "da",
    *,
    runs: int = 1,
    seed: int = 0,
    dt: float = 1e-3,
    noise_sigma: Optional[float] = None,
    log: bool = False,
) -> BatchResult:
    """Noisy boat engagements against a worst-case evader w* = gamma^-2 X x on the true state.

    Measurement noise is white with intensity V, i.e. variance V/dt per step,
    unless ``noise_sigma`` fixes the per-step standard deviation.
    """
    model = sc.model()
    grid = model.grid(dt)
    X = solve_X(model, grid)
    Yg = solve_Y(model, grid)
    sigma = math.sqrt(sc.V / dt) if noise_sigma is None else noise_sigma
    noise = np.stack([NoiseStream(seed, r, sigma).normal((grid.steps + 1, 1)) for r in range(runs)])
    g2 = sc.gamma ** -2

    def evader(k, t, x):
        return g2 * x * X.values[k, 0, 0]

    return simulate(model, GuidanceLaw(law), grid, X, Yg, Yg,
                    x0=np.full((runs, 1), sc.x0), noise=noise, evader=evader,
                    t_go_floor=dt, log=log)


def gain_sweep(t_go: np.ndarray, b: float, V_list, gamma: float) -> dict:
    """Approximate gain magnitude curves for a V grid, fixed gamma and critical gamma."""
    out = {"t_go": np.asarray(t_go, dtype=float)}
    for V in V_list:
        out[f"fixed_V={V:g}"] = np.abs(sbgp_approx_gain(t_go, b, V, gamma, "fixed"))
        if b * math.sqrt(V) > 1:
            out[f"critical_V={V:g}"] = np.abs(sbgp_approx_gain(t_go, b, V, mode="critical"))
    return out
