"""Existence of the game solution and the critical attenuation level.

The strategy exists while X >= 0, Y > 0 and Omega = I - gamma^-2 Y X > 0 on
the whole horizon.  Following common practice the distance from singularity
is measured by det(Omega) and required to stay above a threshold (0.36 by
default) rather than just above zero.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import FiniteEscape, NoFeasibleGamma
from .model import GameModel, TimeGrid
from .riccati import RiccatiSolution, solve_X, solve_Y

DEFAULT_THRESHOLD = 0.36
MAX_BISECTIONS = 60
GAMMA_CEILING = 1e4


@dataclass(frozen=True)
class OmegaTrace:
    times: np.ndarray
    det_values: np.ndarray
    min_eig: np.ndarray  # smallest real eigenvalue of Omega per node
    gamma: float

    @property
    def min_det(self) -> float:
        return float(np.min(self.det_values))

    @property
    def argmin_time(self) -> float:
        return float(self.times[int(np.argmin(self.det_values))])

    @property
    def local_minima(self) -> np.ndarray:
        """Indices of nodes strictly below both neighbours."""
        d = self.det_values
        inner = (d[1:-1] < d[:-2]) & (d[1:-1] < d[2:])
        return np.flatnonzero(inner) + 1

    @property
    def argmin_times(self) -> list[float]:
        return [float(self.times[i]) for i in self.local_minima]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "det_omega"])
            for t, d in zip(self.times, self.det_values):
                w.writerow([f"{t:.17g}", f"{d:.17g}"])


class Feasibility(NamedTuple):
    feasible: bool
    trace: Optional[OmegaTrace]
    reason: str = ""


@dataclass(frozen=True)
class GammaSearchResult:
    gamma_c: float
    threshold: float
    iterations: int
    feasible_margin: float  # min |Omega| at gamma_c
    trace: Optional[OmegaTrace] = None


def omega_trace(X: RiccatiSolution, Y: RiccatiSolution, gamma: float) -> OmegaTrace:
    if X.values.shape != Y.values.shape or not np.array_equal(X.times, Y.times):
        raise ValueError("X and Y must live on the same grid")
    n = X.values.shape[1]
    Om = np.eye(n) - gamma ** -2 * (Y.values @ X.values)
    dets = np.linalg.det(Om)
    eigs = np.linalg.eigvals(Om).real.min(axis=1)
    return OmegaTrace(X.times, dets, eigs, float(gamma))


def _psd(sol: RiccatiSolution, strict: bool) -> bool:
    lam = sol.min_eigenvalues()
    scale = np.maximum(np.abs(sol.values).max(axis=(1, 2)), 1.0)
    if strict:
        return bool(np.all(lam > 0))
    return bool(np.all(lam >= -1e-9 * scale))


def is_feasible(
    model: GameModel,
    gamma: float,
    threshold: float = DEFAULT_THRESHOLD,
    *,
    dt: float = 1e-3,
    grid: Optional[TimeGrid] = None,
    Y: Optional[RiccatiSolution] = None,
) -> Feasibility:
    """Solve both DREs at ``gamma`` and test the existence conditions.

    A precomputed estimator solution ``Y`` may be passed when it does not
    depend on gamma (Q = 0).
    """
    if not 0 <= threshold < 1:
        raise ValueError("threshold must lie in [0, 1)")
    m = model.replace(gamma=gamma)
    grid = grid or m.grid(dt)
    try:
        X = solve_X(m, grid)
        if Y is None:
            Y = solve_Y(m, grid)
    except FiniteEscape as exc:
        return Feasibility(False, None, str(exc))
    if not _psd(X, strict=False):
        return Feasibility(False, None, "X lost positive semidefiniteness")
    if not _psd(Y, strict=True):
        return Feasibility(False, None, "Y lost positive definiteness")
    tr = omega_trace(X, Y, gamma)
    if np.any(tr.min_eig <= 0):
        return Feasibility(False, tr, "Omega not positive definite")
    if tr.min_det <= threshold:
        return Feasibility(False, tr, f"min |Omega| = {tr.min_det:.4g} <= {threshold:g}")
    return Feasibility(True, tr)


def gamma_critical_numeric(
    model: GameModel,
    threshold: float = DEFAULT_THRESHOLD,
    tol: float = 1e-3,
    *,
    dt: float = 1e-3,
) -> GammaSearchResult:
    """Smallest feasible gamma, to relative tolerance ``tol``, by bisection.

    The upper bracket is found by doubling from gamma = 1 (up to 1e4).
    """
    grid = model.grid(dt)
    Y = None
    if not np.any(model.Q):
        try:
            Y = solve_Y(model, grid)
        except FiniteEscape as exc:
            raise NoFeasibleGamma(f"estimator DRE escapes regardless of gamma: {exc}") from exc

    def check(g):
        return is_feasible(model, g, threshold, grid=grid, Y=Y)

    hi = 1.0
    best = check(hi)
    iterations = 1
    if best.feasible:
        lo = 0.5
        while True:
            r = check(lo)
            iterations += 1
            if not r.feasible:
                break
            hi, best = lo, r
            lo /= 2
            if lo < 1e-6:
                return GammaSearchResult(hi, threshold, iterations, best.trace.min_det, best.trace)
    else:
        while not best.feasible:
            lo = hi
            hi *= 2
            if hi > GAMMA_CEILING:
                raise NoFeasibleGamma(f"no feasible gamma up to {GAMMA_CEILING:g}")
            best = check(hi)
            iterations += 1
    for _ in range(MAX_BISECTIONS):
        if (hi - lo) <= tol * hi:
            break
        mid = 0.5 * (lo + hi)
        r = check(mid)
        iterations += 1
        if r.feasible:
            hi, best = mid, r
        else:
            lo = mid
    return GammaSearchResult(hi, threshold, iterations, best.trace.min_det, best.trace)


def sbgp_gamma_critical(b: float, V: float, tf: float, all_horizons: bool = False) -> float:
    """Approximate critical gamma^2 of the boat game.

    max{b sqrt V, (1 + sqrt(V)/tf) / (1 + 1/(b tf))}, or max{b sqrt V, 1}
    when it must hold for every horizon.
    """
    s = math.sqrt(V)
    if all_horizons:
        return max(b * s, 1.0)
    return max(b * s, (1.0 + s / tf) / (1.0 + 1.0 / (b * tf)))


def sbgp_psi(t_go, b: float, V: float):
    """Lower bound on gamma^2 at a given time to go: (t_go + sqrt V) / (t_go + 1/b)."""
    s = math.sqrt(V)
    return (np.asarray(t_go, dtype=float) + s) / (np.asarray(t_go, dtype=float) + 1.0 / b)
