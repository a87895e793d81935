"""Command-line front end.

Usage::

    dagame --study mge-compare [--config FILE] [--seed N] [--out DIR]
           [--workers N] [--set key=value ...]

Configuration schema (INI, three sections; the shipped ``data/default.ini``
holds the nominal values and documents every key):

``[scenario]``
    Vc, T, theta, b, W, y0, gamma, tf, q11, w_cmd, maneuver_sign
    (random|+|-), u_sat (empty = none), x20 for the missile engagement;
    sbgp_b, sbgp_V, sbgp_Y0, sbgp_gamma, sbgp_tf, sbgp_x0 for the boat game.
``[noise]``
    eta (per-sample LOS noise in mrad), sensor_period [s], convention
    (std|variance), sigma (per-step override, empty = derived).
``[run]``
    dt, runs, threshold, gamma_fixed, eta_list, q11_list, shaping_x20,
    shaping_margin, saddle_delta, gain_V_list, laws (comma separated lists).

Overrides take ``section.key=value`` or a bare ``key=value`` when the key
is unique across sections.

Exit codes: 0 success, 1 configuration error (nothing written), 2 the
requested game has no feasible solution.
"""
from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import os
import subprocess
import sys
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, mge, sbgp
from .errors import (ConfigError, FiniteEscape, FiniteEscapeGain, InfeasibleGamma,
                     NoFeasibleGamma, SingularOmega, TooManyFailures)
from .feasibility import sbgp_gamma_critical
from .sim import RNG_ALGORITHM, write_csv

STUDIES = ("sbgp-gains", "sbgp-saddle", "mge-compare", "mge-gamma", "mge-nprime",
           "mge-shaping", "gamma-search")
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2
INFEASIBLE = (InfeasibleGamma, NoFeasibleGamma, TooManyFailures, SingularOmega, FiniteEscape,
              FiniteEscapeGain)

SCHEMA = {
    "scenario": {
        "Vc": float, "T": float, "theta": float, "b": float, "W": float, "y0": float,
        "gamma": float, "tf": float, "q11": float, "w_cmd": float, "maneuver_sign": str,
        "u_sat": "optfloat", "x20": float,
        "sbgp_b": float, "sbgp_V": float, "sbgp_Y0": float, "sbgp_gamma": float,
        "sbgp_tf": float, "sbgp_x0": float,
    },
    "noise": {"eta": float, "sensor_period": float, "convention": str, "sigma": "optfloat"},
    "run": {
        "dt": float, "runs": int, "threshold": float, "gamma_fixed": float,
        "eta_list": "floats", "q11_list": "floats", "shaping_x20": float,
        "shaping_margin": float, "saddle_delta": "floats", "gain_V_list": "floats",
        "laws": "strs",
    },
}


def _convert(kind, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
        if kind is str:
            return raw
        if kind == "optfloat":
            return float(raw) if raw and raw.lower() != "none" else None
        if kind == "floats":
            return [float(s) for s in raw.split(",") if s.strip()]
        if kind == "strs":
            return [s.strip() for s in raw.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} ({exc})") from None
    raise AssertionError(kind)


def _default_text() -> str:
    return resources.files("dagame").joinpath("data/default.ini").read_text()


def load_config(path: str | None = None, overrides=()) -> dict:
    """Defaults, then the user file, then ``--set`` overrides; typed and validated."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(_default_text())
    if path is not None:
        user = configparser.ConfigParser(interpolation=None)
        user.optionxform = str
        try:
            with open(path) as fh:
                user.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for sec in user.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            for key, val in user.items(sec):
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]")
                cp.set(sec, key, val)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, val = item.split("=", 1)
        key = key.strip()
        if "." in key:
            sec, key = key.split(".", 1)
            if sec not in SCHEMA or key not in SCHEMA[sec]:
                raise ConfigError(f"unknown override key {sec}.{key}")
        else:
            owners = [s for s in SCHEMA if key in SCHEMA[s]]
            if len(owners) != 1:
                raise ConfigError(f"unknown or ambiguous override key {key!r}")
            sec = owners[0]
        cp.set(sec, key, val)
    return {sec: {k: _convert(kind, cp.get(sec, k), f"[{sec}] {k}") for k, kind in keys.items()}
            for sec, keys in SCHEMA.items()}


def build_scenarios(cfg: dict) -> tuple[mge.MgeScenario, sbgp.SbgpScenario]:
    s, n, r = cfg["scenario"], cfg["noise"], cfg["run"]
    try:
        m = mge.MgeScenario(
            Vc=s["Vc"], T=s["T"], theta=s["theta"], b=s["b"], W=s["W"], y0=s["y0"],
            gamma=s["gamma"], tf=s["tf"], q11=s["q11"], w_cmd=s["w_cmd"],
            maneuver_sign=s["maneuver_sign"], u_sat=s["u_sat"], x20=s["x20"],
            eta=n["eta"], sensor_period=n["sensor_period"], noise_convention=n["convention"],
            noise_sigma=n["sigma"], dt=r["dt"],
        )
        b = sbgp.SbgpScenario(b=s["sbgp_b"], V=s["sbgp_V"], Y0=s["sbgp_Y0"],
                              gamma=s["sbgp_gamma"], tf=s["sbgp_tf"], x0=s["sbgp_x0"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if r["runs"] < 2:
        raise ConfigError("[run] runs must be at least 2")
    if not 0 <= r["threshold"] < 1:
        raise ConfigError("[run] threshold must lie in [0, 1)")
    for law in r["laws"]:
        if law not in ("da", "perfect", "separation", "pn", "ccg"):
            raise ConfigError(f"[run] laws: unknown law {law!r}")
    steps = s["tf"] / r["dt"]
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ConfigError("[run] dt must divide tf")
    return m, b


class Artifacts:
    """Collects output files and summary lines for one study."""

    def __init__(self, out: Path):
        self.out = out
        self.lines: list[str] = []

    def csv(self, name: str, header, rows) -> None:
        write_csv(self.out / name, header, rows)

    def say(self, line: str = "") -> None:
        self.lines.append(line)
        print(line)


def _study_sbgp_gains(cfg, sc_m, sc_b, art: Artifacts, seed, workers):
    tf = sc_b.tf
    t_go = np.linspace(tf, 0.0, 201)[:-1][::-1]  # (0, tf], critical gains diverge at 0
    V_list = cfg["run"]["gain_V_list"]
    sweep = sbgp.gain_sweep(t_go, sc_b.b, V_list, sc_b.gamma)
    keys = [k for k in sweep if k != "t_go"]
    art.csv("sbgp_gains.csv", ["t_go"] + keys, np.column_stack([sweep[k] for k in ["t_go"] + keys]))
    art.say(f"boat-game approximate gain magnitude, b={sc_b.b:g}, gamma={sc_b.gamma:g}")
    mid = len(t_go) // 2
    art.say(f"{'series':<24}{'|gain| at t_go=' + format(t_go[mid], '.3g'):>24}")
    for k in keys:
        art.say(f"{k:<24}{sweep[k][mid]:>24.6g}")
    g2 = sbgp_gamma_critical(sc_b.b, sc_b.V, tf)
    art.say(f"critical gamma^2 (finite horizon) = {g2:.6g}")
    return EXIT_OK


def _study_sbgp_saddle(cfg, sc_m, sc_b, art, seed, workers):
    rows = []
    art.say(f"{'delta':>8}{'J(u*,w)':>16}{'J(u*,w*)':>16}{'J(u,w*)':>16}  ordered")
    for d in cfg["run"]["saddle_delta"]:
        c = sbgp.sbgp_saddle_check(sc_b, d, cfg["run"]["dt"])
        ok = c.evader_deviates <= c.saddle <= c.pursuer_deviates
        rows.append((d, *c, float(ok)))
        art.say(f"{d:>8g}{c.evader_deviates:>16.8g}{c.saddle:>16.8g}{c.pursuer_deviates:>16.8g}  {ok}")
    art.csv("sbgp_saddle.csv", ["delta", "J_evader_dev", "J_saddle", "J_pursuer_dev", "ordered"], rows)
    return EXIT_OK


def _study_mge_compare(cfg, sc, sc_b, art, seed, workers):
    run = cfg["run"]
    results = mge.compare_laws(sc, run["runs"], seed, workers, run["laws"])
    art.say(f"engagement comparison: gamma={sc.gamma:g}, eta={sc.eta:g}, tf={sc.tf:g}, "
            f"runs={run['runs']}, seed={seed}")
    art.say(f"{'law':<6}{'CEP [cm]':>12}{'Effort':>12}{'failed':>8}")
    rows = []
    for r in results:
        art.say(f"{r.law.label:<6}{r.cep:>12.2f}{r.mean_effort:>12.1f}{r.failures:>8d}")
        rows.append((len(rows) + 1, r.cep, r.mean_effort, r.failures))
    art.csv("mge_compare.csv", ["law_index", "cep_cm", "effort", "failures"], rows)
    miss = np.column_stack([np.arange(1, len(results[0].miss_distribution) + 1)]
                           + [r.miss_distribution for r in results])
    art.csv("mge_miss_distribution.csv", ["rank"] + [f"miss_{r.law.label}" for r in results], miss)
    art.say("law index: " + ", ".join(f"{i + 1}={r.law.label}({r.law.kind})"
                                      for i, r in enumerate(results)))
    return EXIT_OK


def _study_mge_gamma(cfg, sc, sc_b, art, seed, workers):
    run = cfg["run"]
    rows = mge.fixed_vs_critical_study(sc, run["eta_list"], run["gamma_fixed"], runs=run["runs"],
                                       seed=seed, threshold=run["threshold"], workers=workers)
    art.say(f"{'eta':>6}{'mode':>10}{'gamma':>10}{'CEP [cm]':>12}{'Effort':>10}{'min|Om|':>10}")
    for r in rows:
        art.say(f"{r.eta:>6g}{r.mode:>10}{r.gamma:>10.4f}{r.cep:>12.2f}{r.effort:>10.1f}"
                f"{r.min_det:>10.4f}")
    art.csv("mge_gamma.csv", ["eta", "critical", "gamma", "cep_cm", "effort", "min_det_omega"],
            [(r.eta, float(r.mode == "critical"), r.gamma, r.cep, r.effort, r.min_det) for r in rows])
    return EXIT_OK


def _study_mge_nprime(cfg, sc, sc_b, art, seed, workers):
    run = cfg["run"]
    for mode in ("fixed", "critical"):
        traces = mge.n_prime_study(sc, run["eta_list"], mode, gamma_fixed=run["gamma_fixed"],
                                   threshold=run["threshold"])
        t = traces[0].times
        art.csv(f"mge_nprime_{mode}.csv", ["t"] + [tr.label for tr in traces],
                np.column_stack([t] + [tr.Nprime for tr in traces]))
        mid = len(t) // 2
        art.say(f"N'(t={t[mid]:.3g}) with {mode} gamma: "
                + ", ".join(f"{tr.label}: {tr.Nprime[mid]:.4g}" for tr in traces))
    return EXIT_OK


def _study_mge_shaping(cfg, sc, sc_b, art, seed, workers):
    run = cfg["run"]
    cases = mge.trajectory_shaping_study(sc, run["q11_list"], margin=run["shaping_margin"],
                                         threshold=run["threshold"], x20=run["shaping_x20"],
                                         seed=seed)
    code = EXIT_OK
    art.say(f"{'q11':>8}{'gamma':>10}{'feasible':>10}{'min|Om|':>10}  local minima of |Omega| [s]")
    series, labels = [], []
    for c in cases:
        if c.trace is not None:
            series.append(c.trace.det_values)
            labels.append(f"det_omega_q11={c.q11:g}")
            t = c.trace.times
        if c.record is not None:
            c.record.to_csv(art.out / f"mge_shaping_simlog_q11={c.q11:g}.csv")
        if not c.feasible:
            code = EXIT_INFEASIBLE
        md = c.trace.min_det if c.trace is not None else float("nan")
        mins = ", ".join(f"{m:.3f}" for m in c.minima_times) or "-"
        art.say(f"{c.q11:>8g}{c.gamma:>10.4f}{str(c.feasible):>10}{md:>10.4f}  {mins}")
    if series:
        art.csv("mge_shaping_omega.csv", ["t"] + labels, np.column_stack([t] + series))
    return code


def _study_gamma_search(cfg, sc, sc_b, art, seed, workers):
    res = mge.critical_gamma(sc, cfg["run"]["threshold"])
    art.say(f"eta={sc.eta:g} q11={sc.q11:g} tf={sc.tf:g} threshold={res.threshold:g}")
    art.say(f"gamma_c = {res.gamma_c:.6g}")
    art.say(f"min |Omega| at gamma_c = {res.feasible_margin:.6g}")
    art.say(f"feasibility checks = {res.iterations}")
    art.csv("gamma_search.csv", ["eta", "q11", "threshold", "gamma_c", "min_det_omega"],
            [(sc.eta, sc.q11, res.threshold, res.gamma_c, res.feasible_margin)])
    if res.trace is not None:
        res.trace.to_csv(art.out / "gamma_search_omega.csv")
    return EXIT_OK


HANDLERS: dict[str, Callable] = {
    "sbgp-gains": _study_sbgp_gains,
    "sbgp-saddle": _study_sbgp_saddle,
    "mge-compare": _study_mge_compare,
    "mge-gamma": _study_mge_gamma,
    "mge-nprime": _study_mge_nprime,
    "mge-shaping": _study_mge_shaping,
    "gamma-search": _study_gamma_search,
}


def _git_describe() -> str:
    try:
        here = Path(__file__).resolve().parent
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=10)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def run_study(study: str, config: str | None, out: str, seed: int, overrides=(),
              workers: int | None = None) -> int:
    if study not in STUDIES:
        print(f"error: unknown study {study!r}; choose from {', '.join(STUDIES)}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(config, overrides)
        sc_m, sc_b = build_scenarios(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    workers = workers or os.cpu_count() or 1
    outdir = Path(out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {outdir}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    art = Artifacts(outdir)
    try:
        code = HANDLERS[study](cfg, sc_m, sc_b, art, seed, workers)
    except INFEASIBLE as exc:
        art.say(f"infeasible: {exc}")
        print(f"infeasible: {exc}", file=sys.stderr)
        code = EXIT_INFEASIBLE
    (outdir / "summary.txt").write_text("\n".join(art.lines) + "\n")
    meta = {
        "study": study,
        "seed": seed,
        "config": cfg,
        "config_path": config,
        "overrides": list(overrides),
        "workers": workers,
        "rng": RNG_ALGORITHM,
        "version": __version__,
        "git_describe": _git_describe(),
        "exit_code": code,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    (outdir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are configuration errors; exit code 2 is reserved for infeasibility
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dagame", description="Disturbance-attenuation guidance studies")
    p.add_argument("--study", required=True, choices=STUDIES)
    p.add_argument("--config", default=None, help="INI file layered over the shipped defaults")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--workers", type=int, default=None,
                   help="Monte Carlo worker processes (default: CPU count)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run_study(args.study, args.config, args.out, args.seed, args.overrides, args.workers)
