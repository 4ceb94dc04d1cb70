"""Slot-by-slot simulation, run metrics, divergence detection and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .benchmarks import PolicyId, get_policy
from .capacity import omega_threshold
from .config import SystemParams
from .controller import BisectionError
from .environment import EventGenerator, RandomEvent
from .state import ControlAction, InfeasibleActionError, SystemState, check_feasible, derive_outcome, step

__all__ = [
    "CapacityWarning",
    "DivergenceResult",
    "RunMetrics",
    "SimulationError",
    "SWEEP_PARAMS",
    "SweepRow",
    "SweepSpec",
    "aggregate",
    "detect_divergence",
    "run",
    "run_events",
    "sweep",
    "state_csv_text",
    "sweep_csv_text",
    "trace_csv_text",
    "run_json_text",
]

SWEEP_PARAMS = ("V", "sigma_h", "c_th", "E_max_h", "r_max", "Gamma_th", "a_bar")
TRACE_NAMES = ("Q_U", "Q_S", "c", "B")
MIN_WINDOWS = 10
DIVERGENCE_REL_SLOPE = 0.01


class SimulationError(RuntimeError):
    """A run had to stop; the message carries the slot index."""

    def __init__(self, slot: int, message: str):
        super().__init__(f"slot {slot}: {message}")
        self.slot = slot


class CapacityWarning(UserWarning):
    pass


# -- divergence ----------------------------------------------------------------------------


@dataclass(frozen=True)
class DivergenceResult:
    flag: bool
    slope: float
    enough_data: bool = True


def detect_divergence(trace: Sequence[float]) -> DivergenceResult:
    """Linear-growth test on a windowed trace.

    Fits a least-squares line to the last half of the trace. The trace is flagged
    when the slope is positive and larger than 1% of the whole-trace mean per
    window. Traces shorter than ten windows are never flagged.
    """
    y = np.asarray(trace, dtype=float)
    if y.size < MIN_WINDOWS:
        return DivergenceResult(False, math.nan, enough_data=False)
    tail = y[y.size // 2 :]
    k = np.arange(tail.size, dtype=float)
    slope = float(np.polyfit(k, tail, 1)[0])
    mean = float(np.mean(y))
    flag = slope > 0.0 and slope > DIVERGENCE_REL_SLOPE * abs(mean)
    return DivergenceResult(bool(flag), slope)


# -- single run ----------------------------------------------------------------------------


@dataclass
class RunMetrics:
    policy: str
    seed: int
    N: int
    window: int
    R_bar: float
    Q_U_bar: float
    Q_S_bar: float
    c_bar: float
    B_bar: float
    energy_violations: int
    interference_violations: int
    max_Q_U: float
    min_B: float
    max_B: float
    l_off_active: float
    l_off_idle: float
    l_loc_total: float
    l_edg_total: float
    diverged: bool
    divergence_slope: float
    diverged_Q_U: bool
    traces: dict[str, list[float]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return self.energy_violations + self.interference_violations

    def summary(self) -> dict[str, Any]:
        d = asdict(self)
        d.pop("traces")
        return d


class _Windows:
    """Running means over consecutive windows of ``w`` slots; the last one may be partial."""

    def __init__(self, names: Iterable[str], w: int):
        self.w = w
        self.names = tuple(names)
        self.acc = dict.fromkeys(self.names, 0.0)
        self.count = 0
        self.out: dict[str, list[float]] = {n: [] for n in self.names}

    def add(self, **values: float) -> None:
        for n in self.names:
            self.acc[n] += values[n]
        self.count += 1
        if self.count == self.w:
            self._flush()

    def _flush(self) -> None:
        for n in self.names:
            self.out[n].append(self.acc[n] / self.count)
            self.acc[n] = 0.0
        self.count = 0

    def finish(self) -> dict[str, list[float]]:
        if self.count:
            self._flush()
        return self.out


def _idle_wd(action: ControlAction) -> ControlAction:
    return ControlAction(r=0.0, p_u=0.0, f_u=0.0, f_s=action.f_s)


def run_events(
    params: SystemParams,
    policy: "str | PolicyId",
    events: Iterable[RandomEvent],
    state_log: list | None = None,
) -> RunMetrics:
    """Simulate the policy over a given event sequence, starting from empty queues and battery.

    An action that breaks energy causality or the interference cap is counted as a
    violation and replaced by an idle WD for that slot (the MS still runs).
    If ``state_log`` is a list, one (slot, state, action, event) tuple per slot is
    appended to it, with the state observed at the start of the slot.
    """
    pid = PolicyId.parse(policy)
    act = get_policy(pid)
    p = params
    notes: list[str] = []
    if pid is PolicyId.PLYSE:
        thr = omega_threshold(p).omega_threshold
        if p.Omega < thr * (1.0 - 1e-12):
            msg = f"Omega={p.Omega:.6g} J is below the capacity threshold {thr:.6g} J; energy causality is not guaranteed"
            warnings.warn(msg, CapacityWarning, stacklevel=2)
            notes.append(msg)

    scale = p.lambda_e
    state = SystemState()
    win = _Windows(TRACE_NAMES, p.window)
    sums = dict(r=0.0, q_u=0.0, q_s=0.0, c=0.0, b=0.0, off1=0.0, off0=0.0, loc=0.0, edg=0.0)
    e_viol = i_viol = 0
    max_q_u = 0.0
    min_b = max_b = 0.0
    n = 0
    for t, ev in enumerate(events):
        try:
            action = act(state, ev, p)
        except BisectionError as exc:
            raise SimulationError(t, str(exc)) from exc
        out = derive_outcome(action, ev, p)
        rep = check_feasible(state, action, ev, out, p)
        if not rep.ok:
            e_viol += not rep.energy
            i_viol += not rep.interference
            action = _idle_wd(action)
            out = derive_outcome(action, ev, p)
        if state_log is not None:
            state_log.append((t, state, action, ev))
        try:
            state = step(state, action, ev, p, outcome=out)
        except InfeasibleActionError as exc:
            raise SimulationError(t, str(exc)) from exc

        b_j = state.B / scale
        sums["r"] += action.r
        sums["q_u"] += state.Q_U
        sums["q_s"] += state.Q_S
        sums["c"] += out.e_edg
        sums["b"] += b_j
        if ev.a:
            sums["off1"] += out.l_off
        else:
            sums["off0"] += out.l_off
        sums["loc"] += out.l_loc
        sums["edg"] += out.l_edg
        max_q_u = max(max_q_u, state.Q_U)
        min_b = b_j if n == 0 else min(min_b, b_j)
        max_b = max(max_b, b_j)
        win.add(Q_U=state.Q_U, Q_S=state.Q_S, c=out.e_edg, B=b_j)
        n += 1
    if n == 0:
        raise ValueError("no events to simulate")

    traces = win.finish()
    div_s = detect_divergence(traces["Q_S"])
    div_u = detect_divergence(traces["Q_U"])
    return RunMetrics(
        policy=pid.value,
        seed=p.seed,
        N=n,
        window=p.window,
        R_bar=sums["r"] / n,
        Q_U_bar=sums["q_u"] / n,
        Q_S_bar=sums["q_s"] / n,
        c_bar=sums["c"] / n,
        B_bar=sums["b"] / n,
        energy_violations=e_viol,
        interference_violations=i_viol,
        max_Q_U=max_q_u,
        min_B=min_b,
        max_B=max_b,
        l_off_active=sums["off1"],
        l_off_idle=sums["off0"],
        l_loc_total=sums["loc"],
        l_edg_total=sums["edg"],
        diverged=div_s.flag,
        divergence_slope=div_s.slope,
        diverged_Q_U=div_u.flag,
        traces=traces,
        notes=notes,
    )


def run(params: SystemParams, policy: "str | PolicyId", state_log: list | None = None) -> RunMetrics:
    """Run ``params.N`` slots with events drawn from ``params.seed``."""
    gen = EventGenerator(params)
    return run_events(params, policy, (next(gen) for _ in range(params.N)), state_log)


# -- sweeps --------------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple[float, ...]
    base: SystemParams
    replications: int = 5
    policies: tuple[str, ...] = tuple(m.value for m in PolicyId)

    def __post_init__(self) -> None:
        if self.param not in SWEEP_PARAMS:
            raise ValueError(f"cannot sweep {self.param!r}; choose from {SWEEP_PARAMS}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "policies", tuple(PolicyId.parse(x).value for x in self.policies))

    def cells(self) -> list[tuple[float, str, int]]:
        return [
            (v, pol, self.base.seed + rep)
            for v in self.values
            for pol in self.policies
            for rep in range(self.replications)
        ]


@dataclass
class SweepRow:
    param: str
    value: float
    policy: str
    seed: int
    metrics: RunMetrics | None
    error: str | None = None


def _run_cell(args: tuple[SystemParams, str, float, str, int]) -> SweepRow:
    base, param, value, policy, seed = args
    try:
        params = base.replace(**{param: value, "seed": seed})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CapacityWarning)
            m = run(params, policy)
        m.traces = {}
        return SweepRow(param, value, policy, seed, m)
    except Exception as exc:  # recorded per cell, sweep continues
        return SweepRow(param, value, policy, seed, None, f"{type(exc).__name__}: {exc}")


def sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    """Run every (value, policy, replication) cell; rows come back in cell order.

    Replication ``k`` uses seed ``base.seed + k`` for every value and policy, so the
    policies see the same event sequences. Omega is re-derived per cell when it is
    on auto.
    """
    jobs = [(spec.base, spec.param, v, pol, seed) for v, pol, seed in spec.cells()]
    if workers <= 1 or len(jobs) == 1:
        return [_run_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_cell, jobs))


@dataclass(frozen=True)
class Aggregate:
    value: float
    policy: str
    n_runs: int
    n_diverged: int
    n_errors: int
    mean: dict[str, float]
    std: dict[str, float]


AGG_FIELDS = ("R_bar", "Q_U_bar", "Q_S_bar", "c_bar", "l_off_active", "l_off_idle", "l_loc_total")


def aggregate(rows: Sequence[SweepRow]) -> list[Aggregate]:
    """Mean and sample std per (value, policy); divergent and failed runs are left out."""
    keys: list[tuple[float, str]] = []
    for r in rows:
        if (r.value, r.policy) not in keys:
            keys.append((r.value, r.policy))
    out = []
    for value, policy in keys:
        cell = [r for r in rows if r.value == value and r.policy == policy]
        ok = [r.metrics for r in cell if r.metrics is not None and not r.metrics.diverged]
        mean, std = {}, {}
        for f in AGG_FIELDS:
            xs = np.array([getattr(m, f) for m in ok], dtype=float)
            mean[f] = float(xs.mean()) if xs.size else math.nan
            std[f] = float(xs.std(ddof=1)) if xs.size > 1 else 0.0 if xs.size else math.nan
        out.append(
            Aggregate(
                value=value,
                policy=policy,
                n_runs=len(cell),
                n_diverged=sum(1 for r in cell if r.metrics is not None and r.metrics.diverged),
                n_errors=sum(1 for r in cell if r.metrics is None),
                mean=mean,
                std=std,
            )
        )
    return out


# -- serialisation -------------------------------------------------------------------------


def _g(x: float) -> str:
    return f"{x:.12g}"


def _header_lines(params: SystemParams, extra: dict[str, Any] | None = None) -> list[str]:
    lines = [f"# {k} = {v!r}" for k, v in params.to_dict().items()]
    for k, v in (extra or {}).items():
        lines.append(f"# {k} = {v}")
    return lines


def run_json_text(metrics: RunMetrics, params: SystemParams) -> str:
    doc = {"params": params.to_dict(), "seed": params.seed, "metrics": metrics.summary()}
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def trace_csv_text(metrics: RunMetrics, params: SystemParams) -> str:
    buf = io.StringIO()
    for line in _header_lines(params, {"policy": metrics.policy}):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("window", "slot_end") + TRACE_NAMES)
    n = len(metrics.traces[TRACE_NAMES[0]])
    for k in range(n):
        end = min((k + 1) * metrics.window, metrics.N)
        w.writerow([k, end] + [_g(metrics.traces[name][k]) for name in TRACE_NAMES])
    return buf.getvalue()


STATE_COLUMNS = ("slot", "Q_U", "Q_S", "B", "Z", "r", "p_u", "f_u", "f_s", "a_t")


def state_csv_text(state_log: Sequence[tuple], params: SystemParams) -> str:
    """Per-slot states (B in Joules) and the action taken; floats at 12 significant digits."""
    buf = io.StringIO()
    for line in _header_lines(params):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATE_COLUMNS)
    for t, st, a, ev in state_log:
        w.writerow(
            [t, _g(st.Q_U), _g(st.Q_S), _g(st.B / params.lambda_e), _g(st.Z)]
            + [_g(a.r), _g(a.p_u), _g(a.f_u), _g(a.f_s), ev.a]
        )
    return buf.getvalue()


SWEEP_COLUMNS = ("param", "value", "policy", "seed", "R_bar", "Q_U_bar", "Q_S_bar", "c_bar", "violations", "diverged")


def sweep_csv_text(rows: Sequence[SweepRow], base: SystemParams, replications: int | None = None) -> str:
    buf = io.StringIO()
    extra = {"replications": replications} if replications is not None else None
    for line in _header_lines(base, extra):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS + ("error",))
    for r in rows:
        m = r.metrics
        if m is None:
            w.writerow([r.param, _g(r.value), r.policy, r.seed, "", "", "", "", "", "", r.error])
            continue
        w.writerow(
            [
                r.param,
                _g(r.value),
                r.policy,
                r.seed,
                _g(m.R_bar),
                _g(m.Q_U_bar),
                _g(m.Q_S_bar),
                _g(m.c_bar),
                m.violations,
                int(m.diverged),
                "",
            ]
        )
    return buf.getvalue()


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
