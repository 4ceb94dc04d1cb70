"""Brute-force reference maximisers for the per-slot decisions.

Each oracle evaluates the relevant objective on a dense grid of feasible points
(plus points on the active constraint curves, where the optimum usually sits)
and reports the best value found. The closed-form solvers should never be
beaten by more than a small relative margin.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .benchmarks import eco_action, lco_action, qs_oblivious_action
from .config import SystemParams
from .controller import (
    edge_objective,
    exec_objective,
    exec_thresholds,
    opt_edge_freq,
    opt_sensing,
    opt_task_exec,
)
from .environment import EventGenerator, RandomEvent
from .state import SystemState

__all__ = [
    "OracleResult",
    "GRID",
    "oracle_check",
    "random_states",
    "results_csv_text",
]

GRID = 200
LINE = 4000
REL_TOL = 1e-4

OPS = ("edge_freq", "sensing", "task_exec", "lco", "eco", "qs_oblivious")


@dataclass(frozen=True)
class OracleResult:
    sample: int
    op: str
    achieved: float
    oracle: float
    rel_gap: float
    feasible: bool

    @property
    def ok(self) -> bool:
        return self.feasible and self.rel_gap <= REL_TOL


def rel_gap(achieved: float, best: float) -> float:
    """(best - achieved) / scale, clipped below at 0; scale is at least 1."""
    scale = max(abs(best), abs(achieved), 1.0)
    return max(best - achieved, 0.0) / scale


# -- vectorised objectives -----------------------------------------------------------------


def _exec_obj(f: np.ndarray, pw: np.ndarray, s: SystemState, gamma: float, p: SystemParams) -> np.ndarray:
    bt = min(s.B - p.omega_s, 0.0)
    F = p.lambda_e * bt * p.kappa_c * f**3 * p.T + s.Q_U * f * p.T / p.C
    G = p.lambda_e * bt * pw * p.T + (s.Q_U - s.Q_S) * p.T * p.W * np.log2(1.0 + pw * gamma)
    return F + G


def _bits(f: np.ndarray, pw: np.ndarray, gamma: float, p: SystemParams) -> np.ndarray:
    return f * p.T / p.C + p.W * p.T * np.log2(1.0 + pw * gamma)


def _data_line_power(f: np.ndarray, s: SystemState, gamma: float, p: SystemParams) -> np.ndarray:
    """Power that exactly exhausts Q_U after computing ``f`` locally (NaN where negative)."""
    rest = s.Q_U - f * p.T / p.C
    with np.errstate(over="ignore"):
        pw = (np.exp2(np.minimum(rest / (p.W * p.T), 1000.0)) - 1.0) / gamma
    return np.where(rest >= 0.0, pw, np.nan)


def _candidates(f_max: float, p_max: float) -> tuple[np.ndarray, np.ndarray]:
    fg = np.linspace(0.0, f_max, GRID)
    pg = np.linspace(0.0, p_max, GRID)
    F, P = np.meshgrid(fg, pg, indexing="ij")
    return F.ravel(), P.ravel()


def _fp_oracle(objective, feasible, line_power, f_max: float, p_max: float) -> float:
    """Best feasible value over a 2-D grid plus a fine sweep along the boundary curve."""
    F, P = _candidates(f_max, p_max)
    ok = feasible(F, P)
    best = float(np.max(objective(F[ok], P[ok]))) if ok.any() else -math.inf
    fl = np.linspace(0.0, f_max, LINE)
    pl = np.clip(line_power(fl), 0.0, p_max)
    good = np.isfinite(pl)
    fl, pl = fl[good], pl[good]
    ok = feasible(fl, pl)
    if ok.any():
        best = max(best, float(np.max(objective(fl[ok], pl[ok]))))
    return best


# -- per-op checks -------------------------------------------------------------------------


def _check_edge(s: SystemState, p: SystemParams) -> tuple[float, float, bool]:
    f = opt_edge_freq(s, p)
    cap = min(s.Q_S * p.C / p.T, p.f_max_s)
    grid = np.linspace(0.0, max(cap, 0.0), LINE)
    vals = -s.Z * p.lambda_c * p.kappa_e * grid**3 * p.T + s.Q_S * grid * p.T / p.C
    return edge_objective(f, s, p), float(vals.max()), 0.0 <= f <= cap * (1 + 1e-12)


def _check_sensing(s: SystemState, p: SystemParams) -> tuple[float, float, bool]:
    # objective is linear in r, so the endpoints are exhaustive
    def obj(r: float) -> float:
        return p.V * r + p.lambda_e * (s.B - p.omega_s) * p.e_col_unit * r - s.Q_U * r

    r = opt_sensing(s, p)
    return obj(r), max(obj(0.0), obj(p.r_max)), r in (0.0, p.r_max)


def _check_task_exec(s: SystemState, ev: RandomEvent, p: SystemParams) -> tuple[float, float, bool]:
    th = exec_thresholds(s, ev, p)
    g = th.gamma
    f_u, p_u = opt_task_exec(s, ev, p)
    achieved = exec_objective(f_u, p_u, s, g, p)
    qtol = s.Q_U * (1 + 1e-9) + 1e-6

    def feasible(F, P):
        return _bits(F, P, g, p) <= qtol

    best = _fp_oracle(
        lambda F, P: _exec_obj(F, P, s, g, p),
        feasible,
        lambda F: _data_line_power(F, s, g, p),
        p.f_max_u,
        th.p_th,
    )
    ok = bool(feasible(np.array(f_u), np.array(p_u))) and 0 <= f_u <= p.f_max_u and 0 <= p_u <= th.p_th * (1 + 1e-12)
    return achieved, best, ok


def _check_lco(s: SystemState, ev: RandomEvent, p: SystemParams) -> tuple[float, float, bool]:
    a = lco_action(s, ev, p)
    g = exec_thresholds(s, ev, p).gamma
    cap = min(p.f_max_u, s.Q_U * p.C / p.T)
    grid = np.linspace(0.0, cap, LINE)
    best = float(np.max(_exec_obj(grid, np.zeros_like(grid), s, g, p)))
    return exec_objective(a.f_u, 0.0, s, g, p), best, a.p_u == 0.0 and 0 <= a.f_u <= cap * (1 + 1e-12)


def _check_eco(s: SystemState, ev: RandomEvent, p: SystemParams) -> tuple[float, float, bool]:
    a = eco_action(s, ev, p)
    th = exec_thresholds(s, ev, p)
    grid = np.linspace(0.0, th.p_bar_th, LINE)
    best = float(np.max(_exec_obj(np.zeros_like(grid), grid, s, th.gamma, p)))
    ok = a.f_u == 0.0 and 0 <= a.p_u <= th.p_bar_th * (1 + 1e-12)
    return exec_objective(0.0, a.p_u, s, th.gamma, p), best, ok


def _check_qs_oblivious(s: SystemState, ev: RandomEvent, p: SystemParams) -> tuple[float, float, bool]:
    a = qs_oblivious_action(s, ev, p)
    th = exec_thresholds(s, ev, p)
    g = th.gamma
    budget = s.B / p.lambda_e if s.B >= p.b_min_s else 0.0
    energy = max(budget - p.e_col_unit * a.r, 0.0)
    p_cap = th.p_bar_th
    qtol = s.Q_U * (1 + 1e-9) + 1e-6
    etol = energy * (1 + 1e-9)

    def feasible(F, P):
        return (_bits(F, P, g, p) <= qtol) & (p.kappa_c * F**3 * p.T + P * p.T <= etol)

    def line_power(F):
        # the objective increases in p, so the best p for each f is the tightest cap
        pe = (energy - p.kappa_c * F**3 * p.T) / p.T
        pd = _data_line_power(F, s, g, p)
        pw = np.fmin(pe, pd)
        return np.where(pe >= 0.0, pw, np.nan)

    best = _fp_oracle(lambda F, P: _bits(F, P, g, p), feasible, line_power, p.f_max_u, p_cap)
    if not math.isfinite(best):
        best = 0.0
    achieved = float(_bits(np.array(a.f_u), np.array(a.p_u), g, p))
    ok = bool(feasible(np.array(a.f_u), np.array(a.p_u))) and 0 <= a.p_u <= p_cap * (1 + 1e-12)
    return achieved, best, ok


# -- sampling ------------------------------------------------------------------------------


def _queue(rng: np.random.Generator, u: float, cap: float) -> float:
    # uniform draws almost never make data causality bind, so half the mass is log-uniform
    if u < 0.05:
        return 0.0
    if u < 0.5:
        return float(10 ** rng.uniform(3.0, math.log10(cap)))
    return float(rng.uniform(0.0, cap))


def random_states(rng: np.random.Generator, params: SystemParams, n: int) -> list[SystemState]:
    """States spread over the whole reachable region, with extra mass on edge cases.

    Covers an empty data queue, Q_U < Q_S, a full battery (perturbed battery of 0),
    a battery below the cutoff, Z = 0, and a small-backlog regime where the
    data-causality boundary is active.
    """
    p = params
    q_cap = p.V + p.r_max
    out = []
    for _ in range(n):
        u = rng.random(6)
        Q_U = _queue(rng, u[0], q_cap)
        Q_S = _queue(rng, u[1], 1.2 * q_cap)
        if u[4] < 0.1:  # near-tie between the two queues
            Q_S = Q_U * float(rng.uniform(0.9, 1.1))
        if u[2] < 0.1:
            B = p.omega_s
        elif u[2] < 0.15:
            B = float(rng.uniform(0.0, p.b_min_s))
        else:
            B = float(rng.uniform(0.0, p.omega_s))
        Z = 0.0 if u[3] < 0.1 else float(10 ** rng.uniform(5.0, 10.0))
        if u[5] < 0.2:
            # small backlog and nearly full battery: data causality binds and the
            # boundary search is exercised
            Q_U = float(10 ** rng.uniform(5.0, 7.5))
            Q_S = Q_U * float(rng.uniform(0.0, 1.0))
            B = p.omega_s * (1.0 - float(10 ** rng.uniform(-9.0, -1.0)))
        out.append(SystemState(Q_U=Q_U, Q_S=Q_S, B=B, Z=Z))
    return out


def oracle_check(params: SystemParams, n: int = 1000, seed: int | None = None) -> list[OracleResult]:
    """Compare every closed-form decision with its grid oracle on ``n`` random (state, event) pairs."""
    seed = params.seed if seed is None else seed
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    states = random_states(rng, params, n)
    events = EventGenerator(params, seed=seed).take(n)
    results = []
    for i, (s, ev) in enumerate(zip(states, events)):
        checks = {
            "edge_freq": _check_edge(s, params),
            "sensing": _check_sensing(s, params),
            "task_exec": _check_task_exec(s, ev, params),
            "lco": _check_lco(s, ev, params),
            "eco": _check_eco(s, ev, params),
            "qs_oblivious": _check_qs_oblivious(s, ev, params),
        }
        for op in OPS:
            achieved, best, ok = checks[op]
            results.append(OracleResult(i, op, achieved, best, rel_gap(achieved, best), bool(ok)))
    return results


def results_csv_text(results: list[OracleResult], header: list[str] | None = None) -> str:
    buf = io.StringIO()
    for line in header or []:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("sample", "op", "achieved", "oracle", "rel_gap", "feasible", "pass"))
    for r in results:
        w.writerow(
            (r.sample, r.op, f"{r.achieved:.12g}", f"{r.oracle:.12g}", f"{r.rel_gap:.12g}", int(r.feasible), int(r.ok))
        )
    return buf.getvalue()
