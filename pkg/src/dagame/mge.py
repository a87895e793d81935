"""Planar missile-target engagement linearized about the collision triangle.

States: x1 relative separation [m], x2 relative velocity [m/s], nT target
acceleration [m/s^2], aM missile acceleration [m/s^2].  Both players have
first-order lags (missile T, target theta).  The pursuer measures the LOS
angle x1 / (Vc t_go) in white noise.

Noise level ``eta`` is the per-sample LOS noise standard deviation in mrad
of a sensor sampling every ``sensor_period`` seconds; the filter weight is
the matching white-noise intensity V = (1e-3 eta)^2 * sensor_period.  The
simulation injects variance V/dt per step unless ``noise_sigma`` overrides
the per-step standard deviation.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import (DegenerateDenominator, FiniteEscape, InfeasibleGamma, SingularOmega,
                     TooManyFailures)
from .feasibility import (DEFAULT_THRESHOLD, OmegaTrace, gamma_critical_numeric, is_feasible,
                          omega_trace)
from .guidance import G, GainTrace, GuidanceLaw, gain_trace
from .model import GameModel, TimeGrid
from .riccati import RiccatiSolution, solve_X, solve_Y
from .sim import RNG_ALGORITHM, BatchResult, NoiseStream, RunRecord, simulate

TABLE_LAWS = ("da", "perfect", "separation", "pn")
CHUNK = 50  # runs per vectorized batch; fixed so results do not depend on worker count
MAX_FAILURE_FRACTION = 0.10


@dataclass(frozen=True)
class MgeScenario:
    Vc: float = 300.0
    T: float = 0.1
    theta: float = 0.5
    b: float = 1000.0
    W: float = 3.0
    eta: float = 0.5
    sensor_period: float = 0.01
    noise_convention: str = "std"  # 1e-3*eta is a standard deviation ("std") or a variance
    noise_sigma: Optional[float] = None
    y0: float = 1.0  # Y0 = y0 * I4
    gamma: float = 2.5
    tf: float = 3.0
    q11: float = 0.0
    w_cmd: float = G
    maneuver_sign: str = "random"  # "random" | "+" | "-"
    u_sat: Optional[float] = 4 * G
    x20: float = 0.0
    dt: float = 1e-3

    def __post_init__(self):
        for name in ("Vc", "T", "theta", "tf", "dt", "b", "W", "sensor_period", "y0", "gamma", "eta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.q11 < 0:
            raise ValueError("q11 must be non-negative")
        if self.noise_sigma is not None and self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.noise_convention not in ("std", "variance"):
            raise ValueError("noise_convention must be 'std' or 'variance'")
        if self.maneuver_sign not in ("random", "+", "-"):
            raise ValueError("maneuver_sign must be 'random', '+' or '-'")

    @property
    def sample_sigma(self) -> float:
        """Per-sample LOS noise standard deviation of the sensor [rad]."""
        level = 1e-3 * self.eta
        return level if self.noise_convention == "std" else math.sqrt(level)

    @property
    def V(self) -> float:
        return self.sample_sigma ** 2 * self.sensor_period

    @property
    def sqrt_V(self) -> float:
        return math.sqrt(self.V)

    @property
    def step_sigma(self) -> float:
        if self.noise_sigma is not None:
            return self.noise_sigma
        return math.sqrt(self.V / self.dt)

    def with_(self, **changes) -> "MgeScenario":
        return replace(self, **changes)


class _LosH:
    """H(t) = [1/(Vc t_go), 0, 0, 0] with t_go floored."""

    def __init__(self, Vc: float, tf: float, floor: float):
        self.Vc, self.tf, self.floor = Vc, tf, floor

    def __call__(self, t: float) -> np.ndarray:
        t_go = max(self.tf - t, self.floor)
        return np.array([[1.0 / (self.Vc * t_go), 0.0, 0.0, 0.0]])


def build_mge(sc: MgeScenario, t_go_floor: Optional[float] = None) -> GameModel:
    A = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, -1.0],
        [0.0, 0.0, -1.0 / sc.theta, 0.0],
        [0.0, 0.0, 0.0, -1.0 / sc.T],
    ])
    B = np.array([[0.0], [0.0], [0.0], [1.0 / sc.T]])
    D = np.array([[0.0], [0.0], [1.0 / sc.theta], [0.0]])
    return GameModel(
        A=A, B=B, D=D,
        H=_LosH(sc.Vc, sc.tf, sc.dt if t_go_floor is None else t_go_floor),
        Q=np.diag([sc.q11, 0.0, 0.0, 0.0]),
        Qf=np.diag([sc.b, 0.0, 0.0, 0.0]),
        W=[[sc.W]], V=[[sc.V]], Y0=sc.y0 * np.eye(4),
        gamma=sc.gamma, t0=0.0, tf=sc.tf,
    )


class Solutions(NamedTuple):
    model: GameModel
    grid: TimeGrid
    X: RiccatiSolution
    Y_game: RiccatiSolution
    Y_kalman: RiccatiSolution


def solve(sc: MgeScenario) -> Solutions:
    model = build_mge(sc)
    grid = model.grid(sc.dt)
    X = solve_X(model, grid)
    Yk = solve_Y(model, grid, kalman=True)
    Yg = Yk if sc.q11 == 0 else solve_Y(model, grid)
    return Solutions(model, grid, X, Yg, Yk)


def _run_inputs(sc: MgeScenario, seed: int, streams: Sequence[int], nodes: int):
    noise = np.empty((len(streams), nodes, 1))
    w = np.empty((len(streams), 1))
    for i, s in enumerate(streams):
        ns = NoiseStream(seed, s, sc.step_sigma)
        flip = ns.uniform()
        if sc.maneuver_sign == "random":
            sign = 1.0 if flip < 0.5 else -1.0
        else:
            sign = 1.0 if sc.maneuver_sign == "+" else -1.0
        w[i, 0] = sign * sc.w_cmd
        noise[i] = ns.normal((nodes, 1))
    return noise, w


def _simulate_streams(sc, law, seed, streams, sols=None, log=False) -> BatchResult:
    sols = sols or solve(sc)
    noise, w = _run_inputs(sc, seed, streams, sols.grid.steps + 1)
    x0 = np.zeros((len(streams), 4))
    x0[:, 1] = sc.x20
    return simulate(sols.model, law, sols.grid, sols.X, sols.Y_game, sols.Y_kalman,
                    x0=x0, noise=noise, evader=w, u_sat=sc.u_sat, t_go_floor=sc.dt, log=log)


def _as_law(law) -> GuidanceLaw:
    return law if isinstance(law, GuidanceLaw) else GuidanceLaw(law)


def run_engagement(sc: MgeScenario, law, seed: int = 0, run_index: int = 0,
                   sols: Optional[Solutions] = None) -> RunRecord:
    """One fully logged engagement; identical to run ``run_index`` of a Monte Carlo batch."""
    res = _simulate_streams(sc, _as_law(law), seed, [run_index], sols, log=True)
    rec = res.record
    rec.meta.update(seed=seed, run_index=run_index, rng=RNG_ALGORITHM,
                    upsilon=float(res.upsilon[0]), phi=float(res.phi[0]))
    return rec


@dataclass
class MonteCarloSummary:
    law: GuidanceLaw
    runs: int
    seed: int
    cep: float  # cm, median |miss|
    mean_effort: float
    miss_distribution: np.ndarray  # sorted |miss| in m
    failures: int = 0
    da_ratios: np.ndarray = field(default=None, repr=False)
    gamma: float = float("nan")

    @property
    def iqr_cm(self) -> tuple[float, float]:
        q1, q3 = np.percentile(self.miss_distribution, [25, 75])
        return 100.0 * q1, 100.0 * q3

    @property
    def max_da_ratio(self) -> float:
        return float(np.max(self.da_ratios))


def _chunk_job(args):
    sc, law, seed, streams = args
    res = _simulate_streams(sc, law, seed, streams)
    return res.miss, res.effort, res.da_ratio


def monte_carlo(
    sc: MgeScenario,
    law,
    runs: int = 200,
    seed: int = 0,
    *,
    streams: Optional[Sequence[int]] = None,
    workers: int = 1,
    sols: Optional[Solutions] = None,
) -> MonteCarloSummary:
    """Independent engagements, run ``i`` driven by the stream ``(seed, i)``.

    ``streams`` forces explicit stream ids (e.g. repeating one id).
    """
    if runs < 2:
        raise ValueError("monte carlo needs at least 2 runs")
    law = _as_law(law)
    ids = list(range(runs)) if streams is None else list(streams)
    if len(ids) != runs:
        raise ValueError("streams must have one id per run")
    chunks = [ids[i:i + CHUNK] for i in range(0, runs, CHUNK)]
    try:
        if workers > 1 and len(chunks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_chunk_job, [(sc, law, seed, c) for c in chunks]))
        else:
            sols = sols or solve(sc)
            parts = []
            for c in chunks:
                res = _simulate_streams(sc, law, seed, c, sols)
                parts.append((res.miss, res.effort, res.da_ratio))
    except (SingularOmega, FiniteEscape) as exc:
        # Omega and the Riccati solutions are common to every run: all of them fail
        raise TooManyFailures(f"{runs}/{runs} runs failed: {exc}") from exc
    miss = np.concatenate([p[0] for p in parts])
    effort = np.concatenate([p[1] for p in parts])
    ratios = np.concatenate([p[2] for p in parts])
    bad = ~np.isfinite(miss)
    if bad.sum() > MAX_FAILURE_FRACTION * runs:
        raise TooManyFailures(f"{int(bad.sum())}/{runs} runs failed")
    miss, effort, ratios = miss[~bad], effort[~bad], ratios[~bad]
    return MonteCarloSummary(
        law=law, runs=runs, seed=seed, cep=100.0 * float(np.median(miss)),
        mean_effort=float(np.mean(effort)), miss_distribution=np.sort(miss),
        failures=int(bad.sum()), da_ratios=ratios, gamma=sc.gamma,
    )


def compare_laws(sc: MgeScenario, runs: int = 200, seed: int = 0, workers: int = 1,
                 laws: Iterable[str] = TABLE_LAWS) -> list[MonteCarloSummary]:
    sols = solve(sc)
    return [monte_carlo(sc, law, runs, seed, workers=workers, sols=sols) for law in laws]


def critical_gamma(sc: MgeScenario, threshold: float = DEFAULT_THRESHOLD, tol: float = 1e-3):
    return gamma_critical_numeric(build_mge(sc), threshold, tol, dt=sc.dt)


@dataclass
class StudyRow:
    eta: float
    mode: str
    gamma: float
    cep: float
    effort: float
    runs: int
    failures: int
    min_det: float


def fixed_vs_critical_study(
    sc: MgeScenario,
    eta_list: Sequence[float],
    gamma_fixed: float = 3.0,
    *,
    runs: int = 200,
    seed: int = 0,
    threshold: float = DEFAULT_THRESHOLD,
    workers: int = 1,
) -> list[StudyRow]:
    """DA-law Monte Carlo at a fixed gamma and at the numerical critical gamma per noise level."""
    rows = []
    for eta in eta_list:
        base = sc.with_(eta=eta)
        gc = critical_gamma(base, threshold)
        for mode, g in (("fixed", gamma_fixed), ("critical", gc.gamma_c)):
            s = base.with_(gamma=g)
            feas = is_feasible(build_mge(s), g, 0.0, dt=s.dt)
            summary = monte_carlo(s, "da", runs, seed, workers=workers)
            rows.append(StudyRow(eta, mode, g, summary.cep, summary.mean_effort, runs,
                                 summary.failures, feas.trace.min_det if feas.trace else float("nan")))
    return rows


@dataclass
class ShapingCase:
    q11: float
    gamma: float
    feasible: bool
    trace: Optional[OmegaTrace]
    record: Optional[RunRecord]
    reason: str = ""

    @property
    def minima_times(self) -> list[float]:
        return self.trace.argmin_times if self.trace is not None else []


def trajectory_shaping_study(
    sc: MgeScenario,
    q11_list: Sequence[float],
    *,
    gamma: Optional[float] = None,
    margin: float = 1.01,
    threshold: float = DEFAULT_THRESHOLD,
    x20: float = 5.0,
    seed: int = 0,
) -> list[ShapingCase]:
    """|Omega| traces and a nominal DA engagement for each shaping weight.

    With ``gamma=None`` each case runs at ``margin`` times its own numerical
    critical gamma; otherwise every case uses the given gamma and infeasible
    pairs are flagged instead of simulated.
    """
    cases = []
    for q in q11_list:
        s = sc.with_(q11=q, x20=x20)
        model = build_mge(s)
        if gamma is None:
            g = critical_gamma(s, threshold).gamma_c * margin
        else:
            g = gamma
        s = s.with_(gamma=g)
        feas = is_feasible(model, g, threshold, dt=s.dt)
        record = None
        if feas.feasible:
            record = run_engagement(s, "da", seed)
        elif feas.trace is None:
            reason = feas.reason
            cases.append(ShapingCase(q, g, False, None, None, reason))
            continue
        cases.append(ShapingCase(q, g, feas.feasible, feas.trace, record, feas.reason))
    return cases


def require_feasible(case: ShapingCase) -> ShapingCase:
    if not case.feasible:
        raise InfeasibleGamma(f"q11={case.q11:g}, gamma={case.gamma:.4g}: {case.reason}")
    return case


def n_prime_study(
    sc: MgeScenario,
    eta_list: Sequence[float],
    mode: str = "fixed",
    *,
    gamma_fixed: float = 3.0,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[GainTrace]:
    """N'(t) of the DA law for each noise level at a fixed or the critical gamma."""
    if mode not in ("fixed", "critical"):
        raise ValueError("mode must be 'fixed' or 'critical'")
    out = []
    for eta in eta_list:
        s = sc.with_(eta=eta)
        g = gamma_fixed if mode == "fixed" else critical_gamma(s, threshold).gamma_c
        s = s.with_(gamma=g)
        sols = solve(s)
        out.append(gain_trace(sols.X, sols.Y_game, g, sols.model.B, t_go_floor=s.dt,
                              label=f"eta={eta:g},gamma={g:.4g}"))
    return out


def da_ratio_realized(record: RunRecord, model: GameModel, w_series=None, v_series=None,
                      x0=None) -> float:
    """Realized output-to-disturbance energy ratio of one logged run.

    Integrals use the trapezoid rule over the logged node series.
    """
    t = record.t
    x = record.x[:, 0]
    u = record.u[:, 0]
    w = record.w[:, 0] if w_series is None else np.asarray(w_series, dtype=float).reshape(len(t), -1)
    v = record.v[:, 0] if v_series is None else np.asarray(v_series, dtype=float).reshape(len(t), -1)
    x0 = x[0] if x0 is None else np.asarray(x0, dtype=float)
    Winv, Vinv = np.linalg.inv(model.W), np.linalg.inv(model.V)
    out_rate = np.einsum("ki,ij,kj->k", x, model.Q, x) + np.einsum("ki,ki->k", u, u)
    dist_rate = np.einsum("ki,ij,kj->k", w, Winv, w) + np.einsum("ki,ij,kj->k", v, Vinv, v)
    upsilon = 0.5 * x[-1] @ model.Qf @ x[-1] + 0.5 * np.trapezoid(out_rate, t)
    phi = 0.5 * x0 @ np.linalg.solve(model.Y0, x0) + 0.5 * np.trapezoid(dist_rate, t)
    if phi == 0:
        raise DegenerateDenominator("no disturbance energy and x0 = 0")
    return float(upsilon / phi)


def scenario_dict(sc: MgeScenario) -> dict:
    return asdict(sc)
