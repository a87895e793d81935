"""Pursuer guidance laws and gain diagnostics.

Gains follow the convention ``u = Lambda xhat``.  Every law accepts a single
state ``(n,)`` or a batch ``(R, n)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .estimator import hinf_transform, omega
from .riccati import RiccatiSolution

LAW_KINDS = ("da", "perfect", "separation", "pn", "ccg")
G = 9.81


@dataclass(frozen=True)
class GuidanceLaw:
    kind: str
    Nprime: float = 3.0

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise ValueError(f"unknown guidance law {self.kind!r}; expected one of {LAW_KINDS}")
        if self.kind == "pn" and not self.Nprime > 0:
            raise ValueError("PN requires a positive navigation constant")

    @property
    def label(self) -> str:
        return {"da": "u1", "perfect": "u2", "separation": "u3", "pn": "u4", "ccg": "ccg"}[self.kind]


def _feedback(B: np.ndarray, X: np.ndarray) -> np.ndarray:
    return -np.atleast_2d(B).T @ np.atleast_2d(X)


def da_gain(X: np.ndarray, Y: np.ndarray, gamma: float, B: np.ndarray) -> np.ndarray:
    """Lambda = -B'X (I - gamma^-2 Y X)^-1."""
    Om = omega(X, Y, gamma)
    # Lambda Omega = -B'X  =>  Omega' Lambda' = -(B'X)'
    return np.linalg.solve(Om.T, _feedback(B, X).T).T


def da_control(X, Y, gamma: float, xhat, B) -> np.ndarray:
    """Disturbance-attenuation control -B'X Omega^-1 xhat."""
    xbar = hinf_transform(xhat, omega(X, Y, gamma))
    return separation_control(X, xbar, B)


def perfect_state_control(X, x, B) -> np.ndarray:
    """-B'X x on the true state."""
    return np.asarray(x, dtype=float) @ _feedback(B, X).T


def separation_control(X, xhat, B) -> np.ndarray:
    """Certainty equivalence: the perfect-information gain applied to an estimate."""
    return np.asarray(xhat, dtype=float) @ _feedback(B, X).T


def pn_control(xhat1, xhat2, t_go, Nprime: float = 3.0, t_go_floor: float = 0.0):
    """Proportional navigation N' Vc lambda_dot written in the relative states.

    With lambda = x1 / (Vc t_go) this is N'/t_go^2 (x1 + t_go x2).  The sign
    makes the missile acceleration (which enters x2_dot with a minus sign)
    null the relative separation.
    """
    tg = np.maximum(t_go, t_go_floor)
    return Nprime / tg ** 2 * (np.asarray(xhat1) + tg * np.asarray(xhat2))


def ccg_control(x, t_go, t_go_floor: float = 0.0):
    """Collision-course guidance -x / t_go (b -> inf, gamma -> inf limit of the boat game)."""
    return -np.asarray(x, dtype=float) / np.maximum(t_go, t_go_floor)


def equivalent_N(Lambda_x1, t_go):
    """PN-equivalent navigation constant |Lambda_x1| t_go^2."""
    return np.abs(Lambda_x1) * np.asarray(t_go) ** 2


def saturate(u, u_sat: float):
    if not u_sat > 0:
        raise ValueError("u_sat must be positive")
    return np.clip(u, -u_sat, u_sat)


@dataclass
class GainTrace:
    times: np.ndarray
    Lambda: np.ndarray  # (N, s, n)
    Nprime: np.ndarray = field(default=None)
    label: str = ""

    def to_csv(self, path) -> None:
        s, n = self.Lambda.shape[1:]
        cols = [f"L{i + 1}{j + 1}" for i in range(s) for j in range(n)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + cols + (["Nprime"] if self.Nprime is not None else []))
            for k, t in enumerate(self.times):
                row = [f"{t:.17g}"] + [f"{v:.17g}" for v in self.Lambda[k].ravel()]
                if self.Nprime is not None:
                    row.append(f"{self.Nprime[k]:.17g}")
                w.writerow(row)


def gain_trace(
    X: RiccatiSolution,
    Y: RiccatiSolution,
    gamma: float,
    B,
    *,
    with_omega: bool = True,
    t_go_floor: float = 0.0,
    label: str = "",
) -> GainTrace:
    """Full feedback gain per node, with the N' trace read off the x1 entry.

    ``with_omega=False`` gives the separation gain -B'X.
    """
    t = X.times
    lam = np.empty((len(t), np.atleast_2d(B).shape[1], X.values.shape[1]))
    for k in range(len(t)):
        if with_omega:
            lam[k] = da_gain(X.values[k], Y.values[k], gamma, B)
        else:
            lam[k] = _feedback(B, X.values[k])
    t_go = np.maximum(X.grid.tf - t, t_go_floor)
    return GainTrace(t, lam, equivalent_N(lam[:, 0, 0], t_go), label)
