"""Queue state, control actions and the per-slot queue dynamics.

Units: data in bits, ``B`` in scaled battery units (Joules times ``lambda_e``),
``Z`` in scaled MS energy units (Joules times ``lambda_c``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import SystemParams
from .environment import RandomEvent, sinr

__all__ = [
    "ControlAction",
    "FeasibilityReport",
    "InfeasibleActionError",
    "SlotOutcome",
    "SystemState",
    "check_feasible",
    "derive_outcome",
    "step",
]


class InfeasibleActionError(ValueError):
    pass


@dataclass(frozen=True)
class SystemState:
    Q_U: float = 0.0
    Q_S: float = 0.0
    B: float = 0.0
    Z: float = 0.0
    slot: int = 0

    def b_tilde(self, params: SystemParams) -> float:
        return self.B - params.omega_s


@dataclass(frozen=True)
class ControlAction:
    r: float = 0.0
    p_u: float = 0.0
    f_u: float = 0.0
    f_s: float = 0.0


ZERO_ACTION = ControlAction()


@dataclass(frozen=True)
class SlotOutcome:
    l_off: float
    l_loc: float
    l_edg: float
    e_col: float
    e_off: float
    e_loc: float
    e_u: float
    e_edg: float


def derive_outcome(action: ControlAction, event: RandomEvent, params: SystemParams) -> SlotOutcome:
    T, C = params.T, params.C
    gamma = sinr(event, params)
    l_off = params.W * T * math.log2(1.0 + action.p_u * gamma)
    e_col = params.e_col_unit * action.r
    e_off = action.p_u * T
    e_loc = params.kappa_c * action.f_u**3 * T
    return SlotOutcome(
        l_off=l_off,
        l_loc=action.f_u * T / C,
        l_edg=action.f_s * T / C,
        e_col=e_col,
        e_off=e_off,
        e_loc=e_loc,
        e_u=e_col + e_off + e_loc,
        e_edg=params.kappa_e * action.f_s**3 * T,
    )


@dataclass(frozen=True)
class FeasibilityReport:
    interference: bool
    data_wd: bool
    data_ms: bool
    energy: bool
    boxes: bool

    @property
    def ok(self) -> bool:
        return self.interference and self.data_wd and self.data_ms and self.energy and self.boxes

    def failed(self) -> list[str]:
        return [k for k in ("interference", "data_wd", "data_ms", "energy", "boxes") if not getattr(self, k)]


# relative slack for comparisons against quantities the controller hits exactly
_RTOL = 1e-9


def check_feasible(
    state: SystemState,
    action: ControlAction,
    event: RandomEvent,
    outcome: SlotOutcome,
    params: SystemParams,
) -> FeasibilityReport:
    """Evaluate the per-slot constraints; never raises."""
    p = params
    interference = event.a * (p.noise_p + action.p_u * event.h_bar - p.Gamma_th) <= _RTOL * p.Gamma_th
    data_wd = outcome.l_off + outcome.l_loc <= state.Q_U * (1.0 + _RTOL) + 1e-9
    data_ms = outcome.l_edg <= state.Q_S * (1.0 + _RTOL) + 1e-9
    budget = state.B if state.B >= p.b_min_s else 0.0
    energy = p.lambda_e * outcome.e_u <= budget * (1.0 + _RTOL)
    boxes = (
        0.0 <= action.r <= p.r_max * (1.0 + _RTOL)
        and 0.0 <= action.p_u <= p.p_max * (1.0 + _RTOL)
        and 0.0 <= action.f_u <= p.f_max_u * (1.0 + _RTOL)
        and 0.0 <= action.f_s <= p.f_max_s * (1.0 + _RTOL)
    )
    return FeasibilityReport(bool(interference), bool(data_wd), bool(data_ms), bool(energy), bool(boxes))


def step(
    state: SystemState,
    action: ControlAction,
    event: RandomEvent,
    params: SystemParams,
    outcome: SlotOutcome | None = None,
    check: bool = True,
) -> SystemState:
    """Advance one slot. Raises :class:`InfeasibleActionError` for an infeasible action."""
    if outcome is None:
        outcome = derive_outcome(action, event, params)
    if check:
        rep = check_feasible(state, action, event, outcome, params)
        if not rep.ok:
            raise InfeasibleActionError(f"slot {state.slot}: violated {rep.failed()}")
    p = params
    # clamp float dust from exact-boundary actions
    q_u = max(state.Q_U - outcome.l_off - outcome.l_loc, 0.0) + action.r
    q_s = max(state.Q_S - outcome.l_edg, 0.0) + outcome.l_off
    b = min(state.B - p.lambda_e * outcome.e_u + p.lambda_e * event.e_h, p.omega_s)
    z = max(state.Z + p.lambda_c * outcome.e_edg - p.lambda_c * p.c_th, 0.0)
    return SystemState(q_u, q_s, b, z, state.slot + 1)
