"""Battery-capacity threshold that makes energy causality automatic, and the WD queue bound.

Battery quantities inside the threshold formula are in scaled units (Joules
times ``lambda_e``), the same unit as the controller's battery state. The
report also carries the threshold converted back to Joules.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .config import SystemParams

__all__ = [
    "CapacityReport",
    "DegenerateCubicError",
    "cubic_coefficients",
    "cubic_roots_trig",
    "e_max_u",
    "h_bar_poly",
    "h_of_omega",
    "omega_threshold",
    "q_max_bound",
    "real_cubic_roots",
]


class DegenerateCubicError(ValueError):
    pass


@dataclass(frozen=True)
class CapacityReport:
    q_max: float
    e_max_u: float
    A1: float
    A2: float
    A3: float
    roots: tuple[float, ...]
    x_max: float
    sensing_bound: float
    cubic_bound: float
    omega_threshold_scaled: float
    omega_threshold: float
    branch: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["roots"] = list(self.roots)
        return d


def q_max_bound(params: SystemParams) -> float:
    return params.V + params.r_max


def e_max_u(params: SystemParams) -> float:
    """Largest per-slot WD energy: full-rate sensing, full power, full local CPU."""
    p = params
    return p.e_col_unit * p.r_max + p.p_max * p.T + p.kappa_c * p.f_max_u**3 * p.T


def real_cubic_roots(a: float, b: float, c: float, d: float) -> list[float]:
    """Real roots of a x^3 + b x^2 + c x + d, ascending.

    Trigonometric form when three real roots exist, hyperbolic/Cardano form
    otherwise; each root is refined with a few Newton steps.
    """
    if a == 0:
        raise DegenerateCubicError("leading coefficient is zero")
    # rescale x = k y so the roots are O(1); avoids under/overflow in p and q
    k = max(abs(b / a), math.sqrt(abs(c / a)), abs(d / a) ** (1.0 / 3.0))
    if k == 0.0:
        return [0.0]
    if not math.isfinite(k):
        raise DegenerateCubicError("coefficients overflow")
    ys = _monic_roots(b / a / k, c / a / k / k, d / a / k / k / k)
    return sorted(_newton_polish(a, b, c, d, k * y, max_step=1e-6 * k) for y in ys)


def _monic_roots(b: float, c: float, d: float) -> list[float]:
    shift = -b / 3.0
    p = c - b * b / 3.0
    q = (2.0 * b**3 - 9.0 * b * c + 27.0 * d) / 27.0
    if p == 0.0:
        ts = [math.copysign(abs(q) ** (1.0 / 3.0), -q)]
    elif p < 0.0:
        arg = (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)
        m = 2.0 * math.sqrt(-p / 3.0)
        # a repeated root puts |arg| at 1 up to rounding; keep it in the three-root form
        if abs(arg) <= 1.0 + 1e-9:
            phi = math.acos(max(-1.0, min(1.0, arg))) / 3.0
            ts = [m * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)]
        else:
            ts = [-math.copysign(1.0, q) * m * math.cosh(math.acosh(abs(arg)) / 3.0)]
            # a double root can be pushed just off the real line by rounding
            scale = max(abs(q), (-p) ** 1.5)
            for t in (math.sqrt(-p / 3.0), -math.sqrt(-p / 3.0)):
                if abs(t**3 + p * t + q) <= 1e-12 * scale:
                    ts.append(t)
    else:
        m = 2.0 * math.sqrt(p / 3.0)
        ts = [-m * math.sinh(math.asinh((3.0 * q / (2.0 * p)) * math.sqrt(3.0 / p)) / 3.0)]
    return [t + shift for t in ts]


def _newton_polish(a: float, b: float, c: float, d: float, x: float, max_step: float, iters: int = 4) -> float:
    """A few Newton steps; only small steps that reduce the residual are kept.

    The step cap stops a near-zero derivative at a double root from throwing the
    iterate onto a different root.
    """
    for _ in range(iters):
        f = ((a * x + b) * x + c) * x + d
        df = (3.0 * a * x + 2.0 * b) * x + c
        if df == 0.0 or not math.isfinite(df):
            break
        nx = x - f / df
        if not math.isfinite(nx) or abs(nx - x) > max_step:
            break
        nf = ((a * nx + b) * nx + c) * nx + d
        if abs(nf) >= abs(f):
            break
        x = nx
    return x


def cubic_roots_trig(A1: float, A2: float, A3: float) -> list[float]:
    """Real roots of A1^2 x^3 + 2 A1 A2 x^2 + A2^2 x + A3.

    The depressed form t^3 + Ab1 t + Ab2 has Ab1 = -A2^2/(3 A1^2) and
    Ab2 = (-2 A2^3 + 27 A1 A3)/(27 A1^3); x = t - 2 A2 / (3 A1).
    """
    if A1 == 0:
        raise DegenerateCubicError("A1 must be nonzero")
    return real_cubic_roots(A1 * A1, 2.0 * A1 * A2, A2 * A2, A3)


def h_bar_poly(x: float, A1: float, A2: float, A3: float) -> float:
    return A1 * A1 * x**3 + 2.0 * A1 * A2 * x * x + A2 * A2 * x + A3


def cubic_coefficients(params: SystemParams) -> tuple[float, float, float]:
    p = params
    qm = q_max_bound(p)
    A1 = 3.0 * p.C * p.kappa_c * p.b_min_s / (p.kappa_e * qm * p.T)
    A2 = -3.0 * p.C * p.W * p.kappa_c / (p.kappa_e * math.log(2.0))
    A3 = -qm / (3.0 * p.lambda_e * p.C * p.kappa_c)
    return A1, A2, A3


def h_of_omega(omega_s: float, params: SystemParams) -> float:
    """Worst-case WD spend (scaled units) at a near-empty battery for capacity ``omega_s``.

    Energy causality is automatic in that regime when this is at most ``b_min_s``.
    """
    p = params
    qm = q_max_bound(p)
    x = omega_s - p.lambda_e * e_max_u(p)
    if x <= 0:
        return math.inf
    f_bound = math.sqrt(qm / (3.0 * p.lambda_e * x * p.kappa_c * p.C))
    return p.lambda_e * p.kappa_e * f_bound**3 * p.T + qm * p.W * p.T / (x * math.log(2.0))


def omega_threshold(params: SystemParams) -> CapacityReport:
    p = params
    emu = e_max_u(p)
    A1, A2, A3 = cubic_coefficients(p)
    roots = cubic_roots_trig(A1, A2, A3)
    x_max = max(roots)
    sensing_bound = p.V / (p.lambda_e * p.e_col_unit) + p.lambda_e * emu
    cubic_bound = x_max + p.lambda_e * emu
    branch = "sensing" if sensing_bound >= cubic_bound else "cubic"
    omega_s = max(sensing_bound, cubic_bound) + p.lambda_e * p.E_max_h
    return CapacityReport(
        q_max=q_max_bound(p),
        e_max_u=emu,
        A1=A1,
        A2=A2,
        A3=A3,
        roots=tuple(roots),
        x_max=x_max,
        sensing_bound=sensing_bound,
        cubic_bound=cubic_bound,
        omega_threshold_scaled=omega_s,
        omega_threshold=omega_s / p.lambda_e,
        branch=branch,
    )

