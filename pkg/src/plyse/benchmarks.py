"""Baseline policies. All of them reuse the controller's MS-frequency and sensing rules."""

from __future__ import annotations

import enum
import math
from typing import Callable

from .config import SystemParams
from .controller import (
    LN2,
    exec_thresholds,
    interior_points,
    opt_edge_freq,
    opt_sensing,
    plyse_action,
)
from .environment import RandomEvent
from .state import ControlAction, SystemState

__all__ = [
    "PolicyId",
    "eco_action",
    "get_policy",
    "lco_action",
    "qs_oblivious_action",
    "solve_max_processing",
]


class PolicyId(str, enum.Enum):
    PLYSE = "plyse"
    LCO = "lco"
    ECO = "eco"
    QS_OBLIVIOUS = "qs-oblivious"

    @classmethod
    def parse(cls, value: "str | PolicyId") -> "PolicyId":
        if isinstance(value, PolicyId):
            return value
        v = value.strip().lower().replace("_", "-")
        for member in cls:
            if v in (member.value, member.name.lower().replace("_", "-")):
                return member
        raise ValueError(f"unknown policy {value!r}; choose from {[m.value for m in cls]}")


def lco_action(state: SystemState, event: RandomEvent, params: SystemParams) -> ControlAction:
    """Local computing only: p_u = 0 and the local CPU at its clamped interior point."""
    th = exec_thresholds(state, event, params)
    f_hat, _ = interior_points(state, th, params)
    return ControlAction(r=opt_sensing(state, params), p_u=0.0, f_u=f_hat, f_s=opt_edge_freq(state, params))


def eco_action(state: SystemState, event: RandomEvent, params: SystemParams) -> ControlAction:
    """Edge computing only: f_u = 0, offload at the clamped interior power when Q_U >= Q_S."""
    p_u = 0.0
    if state.Q_U >= state.Q_S and state.Q_U > 0.0:
        th = exec_thresholds(state, event, params)
        _, p_u = interior_points(state, th, params)
    return ControlAction(r=opt_sensing(state, params), p_u=p_u, f_u=0.0, f_s=opt_edge_freq(state, params))


# -- Q_S-oblivious -----------------------------------------------------------------------


def _bisect_increasing(fn: Callable[[float], float], target: float, lo: float, hi: float, iters: int = 200):
    """Log-space bisection for fn(x) = target with fn increasing; returns (x_below, x_above)."""
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if fn(mid) <= target:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-14:
            break
    return lo, hi


def solve_max_processing(
    Q_U: float, energy: float, p_cap: float, gamma: float, params: SystemParams
) -> tuple[float, float]:
    """Maximise l_loc + l_off under an energy budget (Joules), data causality and boxes.

    Returns (f_u, p_u). The energy-only problem is separable for a fixed price on
    energy, so the price is found by bisection. If that answer already overshoots
    Q_U, the value is capped at Q_U. Every affordable split on l_loc + l_off = Q_U is
    then optimal, and the one that offloads the most is returned: the policy is
    greedy towards the MS because it does not see Q_S.
    """
    p = params
    if Q_U <= 0.0 or energy <= 0.0:
        return 0.0, 0.0
    T, C, W = p.T, p.C, p.W

    def point(mu: float) -> tuple[float, float]:
        f = min(math.sqrt(1.0 / (3.0 * mu * p.kappa_c * C)), p.f_max_u)
        pw = min(max(W / (mu * LN2) - 1.0 / gamma, 0.0), p_cap)
        return f, pw

    def spend(f: float, pw: float) -> float:
        return p.kappa_c * f**3 * T + pw * T

    def bits(f: float, pw: float) -> float:
        return f * T / C + W * T * math.log2(1.0 + pw * gamma)

    f, pw = p.f_max_u, p_cap
    if spend(f, pw) > energy:
        # spend(point(mu)) decreases in mu; bisect on -spend which increases
        lo, hi = 1e-30, 1e30
        _, mu = _bisect_increasing(lambda m: -spend(*point(m)), -energy, lo, hi)
        f, pw = point(mu)
        if spend(f, pw) > energy:  # numerical guard on the boundary
            scale = energy / spend(f, pw)
            f, pw = f * scale ** (1.0 / 3.0), pw * scale
    if bits(f, pw) <= Q_U:
        return f, pw

    # data causality binds: minimum-energy split with l_loc + l_off = Q_U
    def point_nu(nu: float) -> tuple[float, float]:
        fu = min(math.sqrt(nu / (3.0 * p.kappa_c * C)), p.f_max_u)
        pu = min(max(nu * W / LN2 - 1.0 / gamma, 0.0), p_cap)
        return fu, pu

    nu_lo, _ = _bisect_increasing(lambda n: bits(*point_nu(n)), Q_U, 1e-40, 1e40)
    f_cheap, p_cheap = point_nu(nu_lo)
    # every split on l_loc + l_off = Q_U within budget is optimal; take the one that offloads most
    f_min = max(0.0, (Q_U - W * T * math.log2(1.0 + p_cap * gamma)) * C / T)

    def on_line(fu: float) -> tuple[float, float]:
        rest = Q_U - fu * T / C
        pu = min(max((2.0 ** (rest / (W * T)) - 1.0) / gamma, 0.0), p_cap) if rest > 0 else 0.0
        return fu, pu

    if spend(*on_line(f_min)) <= energy:
        return on_line(f_min)
    lo, hi = f_min, f_cheap  # spend(on_line(hi)) <= energy; spend is convex along the line
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if spend(*on_line(mid)) <= energy:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-9 * max(hi, 1.0):
            break
    return on_line(hi)


def qs_oblivious_action(state: SystemState, event: RandomEvent, params: SystemParams) -> ControlAction:
    """Greedy processing that ignores the MS queue but respects the battery.

    The WD budget is the battery (in Joules) when it is above the cutoff, else zero.
    Sensing is charged first; if the sensing rule alone would overdraw, sensing is
    cut to what the budget pays for.
    """
    p = params
    r = opt_sensing(state, p)
    f_s = opt_edge_freq(state, p)
    budget = state.B / p.lambda_e if state.B >= p.b_min_s else 0.0
    budget = max(budget, 0.0)
    e_col = p.e_col_unit * r
    if e_col > budget:
        r = budget / p.e_col_unit
        e_col = budget
    th = exec_thresholds(state, event, p)
    f_u, p_u = solve_max_processing(state.Q_U, budget - e_col, th.p_bar_th, th.gamma, p)
    return ControlAction(r=r, p_u=p_u, f_u=f_u, f_s=f_s)


_POLICIES = {
    PolicyId.PLYSE: plyse_action,
    PolicyId.LCO: lco_action,
    PolicyId.ECO: eco_action,
    PolicyId.QS_OBLIVIOUS: qs_oblivious_action,
}


def get_policy(policy: "str | PolicyId") -> Callable[[SystemState, RandomEvent, SystemParams], ControlAction]:
    return _POLICIES[PolicyId.parse(policy)]
