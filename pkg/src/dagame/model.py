"""Game definitions shared by every solver and scenario.

A :class:`GameModel` is the linear time-invariant game

    xdot = A x + B u + D w,     z = H(t) x + v

together with the quadratic weights of the disturbance-attenuation cost
(Q, Qf for the output, W, V, Y0 for the disturbances) and the attenuation
level ``gamma``.  Models are immutable once built.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

PD_TOL = 1e-10
SYMMETRY_TOL = 1e-8

MatrixFn = Callable[[float], np.ndarray]


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _relative_asymmetry(M: np.ndarray) -> float:
    if M.shape[0] != M.shape[1]:
        return math.inf
    scale = np.linalg.norm(M)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(M - M.T) / scale)


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


class _ConstantH:
    """Wraps a constant observation matrix so H is always a function of time."""

    def __init__(self, H: np.ndarray):
        self.H = H

    def __call__(self, t: float) -> np.ndarray:
        return self.H

    def __repr__(self):
        return f"ConstantH({self.H.tolist()})"


@dataclass(frozen=True)
class TimeGrid:
    """Fixed-step grid from ``t0`` to ``tf`` inclusive."""

    t0: float
    tf: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.tf > self.t0:
            raise ValueError("tf must exceed t0")
        steps = (self.tf - self.t0) / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(
                f"horizon {self.tf - self.t0} is not an integer multiple of dt={self.dt}"
            )

    @property
    def steps(self) -> int:
        return int(round((self.tf - self.t0) / self.dt))

    @property
    def nodes(self) -> np.ndarray:
        # t0 + k*dt, with the last node pinned to tf exactly
        t = self.t0 + self.dt * np.arange(self.steps + 1)
        t[-1] = self.tf
        return t

    def __len__(self) -> int:
        return self.steps + 1


@dataclass(frozen=True)
class GameModel:
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    H: Union[np.ndarray, MatrixFn]
    Q: np.ndarray
    Qf: np.ndarray
    W: np.ndarray
    V: np.ndarray
    Y0: np.ndarray
    gamma: float
    t0: float
    tf: float
    # relative asymmetry of the weights as supplied, before symmetrization
    asymmetry: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for name in ("A", "B", "D"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        asym = {}
        for name in ("Q", "Qf", "W", "V", "Y0"):
            M = _as_matrix(getattr(self, name), name)
            asym[name] = _relative_asymmetry(M)
            if M.shape[0] == M.shape[1]:
                M = symmetrize(M)
                M.setflags(write=False)
            object.__setattr__(self, name, M)
        object.__setattr__(self, "asymmetry", asym)
        if not callable(self.H):
            object.__setattr__(self, "H", _ConstantH(_as_matrix(self.H, "H")))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "tf", float(self.tf))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def H_at(self, t: float) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.H(t), dtype=float))

    def replace(self, **changes) -> "GameModel":
        """Copy of the model with some fields swapped (e.g. a new gamma)."""
        fields = {
            name: getattr(self, name)
            for name in ("A", "B", "D", "H", "Q", "Qf", "W", "V", "Y0", "gamma", "t0", "tf")
        }
        fields.update(changes)
        return GameModel(**fields)

    def grid(self, dt: float) -> TimeGrid:
        return TimeGrid(self.t0, self.tf, dt)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        # truthy when the model is well formed
        return not self.violations

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if not self.violations:
            return "ok"
        return "; ".join(self.violations)


def _definiteness(M: np.ndarray) -> float:
    return float(np.min(np.linalg.eigvalsh(M)))


def validate(model: GameModel) -> ValidationReport:
    """List every violated invariant of ``model``; never raises."""
    out: list[str] = []
    n = model.A.shape[0]
    if model.A.shape != (n, n):
        out.append(f"A not square: {model.A.shape}")
    if model.B.shape[0] != n:
        out.append(f"B has {model.B.shape[0]} rows, expected {n}")
    if model.D.shape[0] != n:
        out.append(f"D has {model.D.shape[0]} rows, expected {n}")
    q = model.D.shape[1]

    expected = {"Q": n, "Qf": n, "Y0": n, "W": q}
    try:
        H0 = model.H_at(model.t0)
        m = H0.shape[0]
        if H0.shape[1] != n:
            out.append(f"H has {H0.shape[1]} columns, expected {n}")
        expected["V"] = m
    except Exception as exc:  # H is user code
        out.append(f"H not evaluable at t0: {exc}")

    for name, size in expected.items():
        M = getattr(model, name)
        if M.shape != (size, size):
            out.append(f"{name} has shape {M.shape}, expected ({size}, {size})")

    for name in ("Q", "Qf", "W", "V", "Y0"):
        if model.asymmetry.get(name, 0.0) > SYMMETRY_TOL:
            out.append(f"{name} not symmetric")
    for name in ("Q", "Qf"):
        M = getattr(model, name)
        if M.shape[0] == M.shape[1] and np.all(np.isfinite(M)):
            if _definiteness(M) < -PD_TOL:
                out.append(f"{name} not PSD")
    for name in ("W", "V", "Y0"):
        M = getattr(model, name)
        if M.shape[0] == M.shape[1] and np.all(np.isfinite(M)):
            if _definiteness(M) <= PD_TOL:
                out.append(f"{name} not PD")

    for name in ("A", "B", "D", "Q", "Qf", "W", "V", "Y0"):
        if not np.all(np.isfinite(getattr(model, name))):
            out.append(f"{name} has non-finite entries")

    if not (math.isfinite(model.gamma) and model.gamma > 0):
        out.append("gamma not positive")
    if not (math.isfinite(model.t0) and math.isfinite(model.tf)):
        out.append("horizon not finite")
    elif model.tf <= model.t0:
        out.append("empty horizon")
    return ValidationReport(tuple(out))
