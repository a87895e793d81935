"""Fixed-step engagement engine shared by the scenarios.

Truth, estimator and Riccati grids share one step ``dt``.  Inputs (u, w)
and the measurement z are held constant over each step.  The engine runs a
batch of R independent engagements at once; every array carries the run
index on its leading axis and no computation mixes rows.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import NonFinite, SingularOmega
from .estimator import estimator_rk4
from .guidance import GuidanceLaw, da_gain, pn_control, saturate
from .model import GameModel, TimeGrid
from .riccati import RiccatiSolution

RNG_ALGORITHM = "numpy.random.Philox (Philox4x64-10), key=(seed, stream)"


class NoiseStream:
    """Reproducible Gaussian stream keyed by ``(seed, stream)``.

    Draws come out in a fixed order, so ``index`` (the number of draws taken
    so far) pins every value.
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, seed: int, stream: int = 0, sigma: float = 1.0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.sigma = float(sigma)
        self.index = 0
        key = np.array([self.seed % 2**64, self.stream % 2**64], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def normal(self, size=None) -> np.ndarray:
        out = self.sigma * self._gen.standard_normal(size)
        self.index += int(np.prod(size)) if size is not None else 1
        return out

    def uniform(self, size=None) -> np.ndarray:
        out = self._gen.random(size)
        self.index += int(np.prod(size)) if size is not None else 1
        return out


def propagate_true(x, model: GameModel, u, w, dt: float) -> np.ndarray:
    """One RK4 step of xdot = A x + B u + D w with u, w held."""
    x = np.asarray(x, dtype=float)
    drive = np.asarray(u, dtype=float) @ model.B.T + np.asarray(w, dtype=float) @ model.D.T
    At = model.A.T

    def f(s):
        return s @ At + drive

    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFinite("true state became non-finite")
    return out


def measure(x, H_t: np.ndarray, noise: Optional[NoiseStream] = None) -> np.ndarray:
    """z = H x + v, with v drawn from ``noise`` (or zero)."""
    x = np.asarray(x, dtype=float)
    z = x @ np.atleast_2d(H_t).T
    if noise is None or noise.sigma == 0.0:
        return z
    return z + noise.normal(z.shape)


@dataclass
class RunRecord:
    """One engagement (or a batch of them when the run axis is > 1)."""

    t: np.ndarray  # (N,)
    x: np.ndarray  # (N, R, n)
    xhat: np.ndarray  # (N, R, n)
    u: np.ndarray  # (N, R, s)
    z: np.ndarray  # (N, R, m)
    w: np.ndarray  # (N, R, q)
    v: np.ndarray  # (N, R, m)
    omega_det: np.ndarray  # (N,), NaN when the law does not use Omega
    miss: np.ndarray  # (R,)
    effort: np.ndarray  # (R,)
    law: str = ""
    meta: dict = field(default_factory=dict)

    def single(self, r: int = 0) -> "RunRecord":
        """Slice one run out of a batch."""
        sl = slice(r, r + 1)
        return RunRecord(self.t, self.x[:, sl], self.xhat[:, sl], self.u[:, sl], self.z[:, sl],
                         self.w[:, sl], self.v[:, sl], self.omega_det, self.miss[sl],
                         self.effort[sl], self.law, dict(self.meta))

    def columns(self) -> tuple[list[str], np.ndarray]:
        """SimLog view of run 0: header and one row per node."""
        n, s, m = self.x.shape[2], self.u.shape[2], self.z.shape[2]
        header = (["t"] + [f"x{i + 1}" for i in range(n)] + [f"xhat{i + 1}" for i in range(n)]
                  + [f"u{i + 1}" for i in range(s)] + [f"z{i + 1}" for i in range(m)] + ["det_omega"])
        rows = np.column_stack([self.t, self.x[:, 0], self.xhat[:, 0], self.u[:, 0],
                                self.z[:, 0], self.omega_det])
        return header, rows

    def to_csv(self, path) -> None:
        header, rows = self.columns()
        write_csv(path, header, rows)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" for v in row])


@dataclass
class BatchResult:
    miss: np.ndarray
    effort: np.ndarray
    upsilon: np.ndarray
    phi: np.ndarray
    x_final: np.ndarray
    record: Optional[RunRecord] = None

    @property
    def da_ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.upsilon / self.phi


Evader = Union[np.ndarray, Callable[[int, float, np.ndarray], np.ndarray]]


def _trapz_weights(N: int, dt: float) -> np.ndarray:
    wts = np.full(N + 1, dt)
    wts[0] = wts[-1] = 0.5 * dt
    return wts


def simulate(
    model: GameModel,
    law: GuidanceLaw,
    grid: TimeGrid,
    X: RiccatiSolution,
    Y_game: Optional[RiccatiSolution],
    Y_kalman: Optional[RiccatiSolution],
    *,
    x0: np.ndarray,
    noise: np.ndarray,
    evader: Evader,
    u_sat: Optional[float] = None,
    t_go_floor: float = 0.0,
    xhat0: Optional[np.ndarray] = None,
    log: bool = False,
    omega_floor: float = 0.0,
) -> BatchResult:
    """Run a batch of engagements.

    ``x0`` is ``(R, n)``; ``noise`` holds the measurement noise samples
    ``(R, N + 1, m)``, one per node; ``evader`` is either a constant
    ``(R, q)`` command or a callable ``(k, t, x) -> (R, q)``.
    """
    t = grid.nodes
    N = grid.steps
    dt = grid.dt
    x = np.array(x0, dtype=float)
    R, n = x.shape
    noise = np.asarray(noise, dtype=float)
    if noise.ndim == 2:
        noise = noise[:, :, None]
    xhat = np.zeros_like(x) if xhat0 is None else np.array(np.broadcast_to(xhat0, x.shape), dtype=float)
    q = model.D.shape[1]
    B = model.B

    kind = law.kind
    if kind == "da":
        Yest, shaping = Y_game, True
    else:
        Yest, shaping = Y_kalman, False
    if Yest is None and kind != "perfect":
        raise ValueError(f"law {kind!r} needs an estimator Riccati solution")

    gains = None
    om_det = np.full(N + 1, np.nan)
    if kind in ("da", "perfect", "separation"):
        gains = np.empty((N + 1, B.shape[1], n))
        for k in range(N + 1):
            if kind == "da":
                Om = np.eye(n) - model.gamma ** -2 * (Y_game.values[k] @ X.values[k])
                om_det[k] = np.linalg.det(Om)
                if om_det[k] <= omega_floor or np.linalg.eigvals(Om).real.min() <= 0:
                    raise SingularOmega(
                        f"|Omega| = {om_det[k]:.4g} at t = {t[k]:.4g} (floor {omega_floor:g})")
                gains[k] = da_gain(X.values[k], Y_game.values[k], model.gamma, B)
            else:
                gains[k] = -B.T @ X.values[k]

    Hs = [model.H_at(s) for s in t]
    Hmid = [model.H_at(t[k] + 0.5 * dt) for k in range(N)]
    Yv = Yest.values if Yest is not None else None

    def evader_at(k, xk):
        if callable(evader):
            return np.asarray(evader(k, t[k], xk), dtype=float).reshape(R, q)
        return np.broadcast_to(np.asarray(evader, dtype=float).reshape(-1, q), (R, q))

    if log:
        L = {key: [] for key in ("x", "xhat", "u", "z", "w", "v")}
    wts = _trapz_weights(N, dt)
    Vinv = np.linalg.inv(model.V)
    Winv = np.linalg.inv(model.W)
    Y0inv = np.linalg.inv(model.Y0)
    run_cost = np.zeros(R)  # x'Qx + u'u
    dist_cost = np.zeros(R)  # w'W^-1 w + v'V^-1 v
    effort = np.zeros(R)
    use_q = bool(np.any(model.Q))

    for k in range(N + 1):
        v = noise[:, k, :]
        z = x @ Hs[k].T + v
        if kind == "perfect":
            u = x @ gains[k].T
        elif kind in ("da", "separation"):
            u = xhat @ gains[k].T
        elif kind == "pn":
            u = pn_control(xhat[:, 0], xhat[:, 1], t[-1] - t[k], law.Nprime, t_go_floor)[:, None]
        else:  # ccg
            u = -xhat / max(t[-1] - t[k], t_go_floor)
        if u_sat is not None:
            u = saturate(u, u_sat)
        w = evader_at(k, x)

        uu = np.einsum("ri,ri->r", u, u)
        effort += wts[k] * uu
        xq = np.einsum("ri,ij,rj->r", x, model.Q, x) if use_q else 0.0
        run_cost += wts[k] * (xq + uu)
        dist_cost += wts[k] * (np.einsum("ri,ij,rj->r", w, Winv, w)
                               + np.einsum("ri,ij,rj->r", v, Vinv, v))
        if log:
            for key, val in (("x", x), ("xhat", xhat), ("u", u), ("z", z), ("w", w), ("v", v)):
                L[key].append(np.array(val))
        if k == N:
            break
        if Yv is not None:
            Ym = 0.5 * (Yv[k] + Yv[k + 1])
            xhat = estimator_rk4(xhat, dt, model, (Yv[k], Ym, Yv[k + 1]),
                                 (Hs[k], Hmid[k], Hs[k + 1]), u, z, shaping)
        x = propagate_true(x, model, u, w, dt)

    x0a = np.asarray(x0, dtype=float)
    upsilon = 0.5 * np.einsum("ri,ij,rj->r", x, model.Qf, x) + 0.5 * run_cost
    phi = 0.5 * np.einsum("ri,ij,rj->r", x0a, Y0inv, x0a) + 0.5 * dist_cost
    miss = np.abs(x[:, 0])
    record = None
    if log:
        record = RunRecord(t, *(np.stack(L[key]) for key in ("x", "xhat", "u", "z", "w", "v")),
                           omega_det=om_det, miss=miss, effort=effort.copy(), law=law.label)
    return BatchResult(miss, effort, upsilon, phi, x.copy(), record)
