"""Closed-form per-slot solver for the perturbed-Lyapunov controller.

The per-slot problem splits into three independent pieces:

* MS CPU frequency (:func:`opt_edge_freq`), a cubic-cost concave maximisation;
* sensing (:func:`opt_sensing`), an on/off rule on a linear objective;
* WD task execution (:func:`opt_task_exec`), a generally non-convex problem in
  (f_u, p_u) whose maximiser is given by a four-way case split, one case of which
  needs a scalar bisection (:func:`bisect_U_prime`).

All functions are pure in (state, event, params).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import SystemParams
from .environment import RandomEvent, sinr
from .state import ControlAction, SystemState

__all__ = [
    "BisectionError",
    "ExecThresholds",
    "bisect_U_prime",
    "edge_objective",
    "exec_objective",
    "exec_thresholds",
    "opt_edge_freq",
    "opt_sensing",
    "opt_task_exec",
    "per_slot_objective",
    "plyse_action",
    "sensing_cost",
    "u_prime",
]

LN2 = math.log(2.0)
# 2**x overflows a double above ~1024; beyond this the power cap is effectively infinite
_MAX_EXP2 = 1000.0
BISECT_TOL_HZ = 1.0
BISECT_MAX_ITER = 200
CASE_A_RTOL = 1e-9


class BisectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExecThresholds:
    p_th: float
    p_bar_th: float
    f_bar_th: float
    B_tilde: float
    gamma: float


# -- MS CPU ------------------------------------------------------------------------------


def edge_objective(f_s: float, state: SystemState, params: SystemParams) -> float:
    p = params
    return -state.Z * p.lambda_c * p.kappa_e * f_s**3 * p.T + state.Q_S * f_s * p.T / p.C


def opt_edge_freq(state: SystemState, params: SystemParams) -> float:
    p = params
    cap = min(state.Q_S * p.C / p.T, p.f_max_s)
    if cap <= 0.0:
        return 0.0
    if state.Z <= 0.0:
        return cap
    return min(math.sqrt(state.Q_S / (3.0 * state.Z * p.lambda_c * p.C * p.kappa_e)), cap)


# -- sensing -----------------------------------------------------------------------------


def sensing_cost(state: SystemState, params: SystemParams) -> float:
    p = params
    return state.Q_U - p.V - p.lambda_e * (state.B - p.omega_s) * p.e_col_unit


def opt_sensing(state: SystemState, params: SystemParams) -> float:
    return params.r_max if sensing_cost(state, params) <= 0.0 else 0.0


# -- task execution ----------------------------------------------------------------------


def _exp2(x: float) -> float:
    return math.inf if x > _MAX_EXP2 else 2.0**x


def F_p(x: float, Q_U: float, gamma: float, params: SystemParams) -> float:
    """Transmit power that offloads exactly what local computing at ``x`` Hz leaves of Q_U."""
    p = params
    return (_exp2((Q_U - x * p.T / p.C) / (p.W * p.T)) - 1.0) / gamma


def F_f(x: float, Q_U: float, gamma: float, params: SystemParams) -> float:
    """CPU frequency that computes what offloading at ``x`` W leaves of Q_U."""
    p = params
    return (Q_U - p.W * p.T * math.log2(1.0 + x * gamma)) * p.C / p.T


def exec_thresholds(state: SystemState, event: RandomEvent, params: SystemParams) -> ExecThresholds:
    p = params
    gamma = sinr(event, p)
    if event.a:
        p_th = min((p.Gamma_th - p.noise_p) / event.h_bar, p.p_max)
    else:
        p_th = p.p_max
    p_bar = min(p_th, F_p(0.0, state.Q_U, gamma, p))
    f_bar = min(p.f_max_u, F_f(0.0, state.Q_U, gamma, p))
    return ExecThresholds(
        p_th=p_th,
        p_bar_th=max(p_bar, 0.0),
        f_bar_th=max(f_bar, 0.0),
        B_tilde=min(state.B - p.omega_s, 0.0),
        gamma=gamma,
    )


def exec_objective(f_u: float, p_u: float, state: SystemState, gamma: float, params: SystemParams) -> float:
    """F(f_u) + G(p_u): the task-execution part of the per-slot objective."""
    p = params
    bt = min(state.B - p.omega_s, 0.0)
    F = p.lambda_e * bt * p.kappa_c * f_u**3 * p.T + state.Q_U * f_u * p.T / p.C
    G = p.lambda_e * bt * p_u * p.T + (state.Q_U - state.Q_S) * p.T * p.W * math.log2(1.0 + p_u * gamma)
    return F + G


def interior_points(state: SystemState, th: ExecThresholds, params: SystemParams) -> tuple[float, float]:
    """Clamped unconstrained maximisers (f_hat, p_hat) of F and G."""
    p = params
    bt = th.B_tilde
    if bt == 0.0:
        f_tilde, p_tilde = p.f_max_u, th.p_th
    else:
        f_tilde = math.sqrt(-state.Q_U / (3.0 * p.lambda_e * bt * p.kappa_c * p.C))
        p_tilde = (state.Q_S - state.Q_U) * p.W / (p.lambda_e * bt * LN2) - 1.0 / th.gamma
    f_hat = min(f_tilde, th.f_bar_th)
    p_hat = min(max(p_tilde, 0.0), th.p_bar_th)
    return f_hat, p_hat


def u_prime(f: float, state: SystemState, gamma: float, params: SystemParams) -> float:
    """Derivative of the execution objective along the data-causality boundary."""
    p = params
    bt = min(state.B - p.omega_s, 0.0)
    e = state.Q_U / (p.W * p.T) - f / (p.W * p.C)
    pw = _exp2(e)
    if math.isinf(pw):
        return math.inf if bt < 0 else state.Q_S * p.T / p.C
    return (
        3.0 * p.lambda_e * p.kappa_c * p.T * bt * f * f
        - (p.lambda_e * bt * p.T * LN2 / (p.W * p.C * gamma)) * pw
        + (p.T / p.C) * state.Q_S
    )


def bisect_U_prime(
    state: SystemState,
    event: RandomEvent,
    params: SystemParams,
    tol: float = BISECT_TOL_HZ,
    max_iter: int = BISECT_MAX_ITER,
) -> float:
    """Unique root of the (strictly decreasing) boundary derivative on [0, inf)."""
    if not min(state.B - params.omega_s, 0.0) < 0.0:
        raise ValueError("bisection needs a strictly negative perturbed battery")
    gamma = sinr(event, params)
    lo, hi = 0.0, max(params.f_max_u, 1.0)
    it = 0
    while u_prime(hi, state, gamma, params) >= 0.0:
        lo, hi = hi, 2.0 * hi
        it += 1
        if it > max_iter:
            raise BisectionError("could not bracket the root of U'")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if u_prime(mid, state, gamma, params) > 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
        if it > max_iter:
            raise BisectionError(f"no convergence after {max_iter} iterations (bracket {lo}..{hi})")
    return 0.5 * (lo + hi)


def opt_task_exec(state: SystemState, event: RandomEvent, params: SystemParams) -> tuple[float, float]:
    """Optimal (f_u, p_u) for the WD task-execution subproblem."""
    p = params
    th = exec_thresholds(state, event, p)
    f_hat, p_hat = interior_points(state, th, p)
    if state.Q_U < state.Q_S:
        return f_hat, 0.0
    if state.Q_U <= 0.0:
        return 0.0, 0.0
    l_hat = f_hat * p.T / p.C + p.W * p.T * math.log2(1.0 + p_hat * th.gamma)
    if l_hat <= state.Q_U * (1.0 + CASE_A_RTOL):
        return f_hat, p_hat
    if th.B_tilde == 0.0:
        # objective is linear in f along the boundary with slope Q_S*T/C >= 0
        return f_hat, _fp_clamped(f_hat, state, th, p)
    f_lb = max(0.0, F_f(p_hat, state.Q_U, th.gamma, p))
    f_ub = f_hat
    f_root = bisect_U_prime(state, event, p)
    f = min(max(f_root, f_lb), f_ub)
    return f, _fp_clamped(f, state, th, p)


def _fp_clamped(f: float, state: SystemState, th: ExecThresholds, params: SystemParams) -> float:
    return min(max(F_p(f, state.Q_U, th.gamma, params), 0.0), th.p_bar_th)


# -- assembled action --------------------------------------------------------------------


def plyse_action(state: SystemState, event: RandomEvent, params: SystemParams) -> ControlAction:
    f_u, p_u = opt_task_exec(state, event, params)
    return ControlAction(
        r=opt_sensing(state, params),
        p_u=p_u,
        f_u=f_u,
        f_s=opt_edge_freq(state, params),
    )


def per_slot_objective(
    action: ControlAction, state: SystemState, event: RandomEvent, params: SystemParams
) -> float:
    """The full per-slot drift-plus-penalty objective that the controller maximises."""
    p = params
    gamma = sinr(event, p)
    l_off = p.W * p.T * math.log2(1.0 + action.p_u * gamma)
    l_loc = action.f_u * p.T / p.C
    l_edg = action.f_s * p.T / p.C
    e_u = p.e_col_unit * action.r + action.p_u * p.T + p.kappa_c * action.f_u**3 * p.T
    e_edg = p.kappa_e * action.f_s**3 * p.T
    return (
        p.V * action.r
        + state.Z * p.lambda_c * (p.c_th - e_edg)
        + p.lambda_e * (state.B - p.omega_s) * (e_u - event.e_h)
        + state.Q_U * (l_off + l_loc - action.r)
        + state.Q_S * (l_edg - l_off)
    )
