"""Command-line entry point: ``plyse {run,sweep,capacity,oracle-check,replay}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path
from typing import Sequence

from .benchmarks import PolicyId
from .capacity import omega_threshold
from .config import ConfigError, SystemParams, load_params, parse_config_text
from .engine import (
    SWEEP_PARAMS,
    SimulationError,
    SweepSpec,
    aggregate,
    run,
    run_events,
    run_json_text,
    sweep,
    state_csv_text,
    sweep_csv_text,
    trace_csv_text,
    write_text,
)
from .environment import EventGenerator, read_event_trace, write_event_trace
from .oracles import oracle_check, results_csv_text

OUT_ENV = "PLYSE_OUT"
DEFAULT_OUT = "plyse-out"

SWEEP_FILE = {"V": "fig3-Vsweep", "a_bar": "fig4-activity"}


class CliError(Exception):
    pass


def _parse_set(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise CliError(f"--set expects key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        out[k] = v
    return out


def _load(args: argparse.Namespace) -> tuple[SystemParams, str | None]:
    """Params from --config plus --set overrides; returns the config's ``policy`` key too."""
    raw: dict[str, str] = {}
    if args.config:
        try:
            raw = parse_config_text(Path(args.config).read_text())
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}") from exc
    raw.update(_parse_set(args.set or []))
    policy = raw.pop("policy", None)
    if getattr(args, "seed", None) is not None:
        raw["seed"] = str(args.seed)
    if getattr(args, "window", None) is not None:
        raw["window"] = str(args.window)
    return load_params(raw), policy


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _policy(args: argparse.Namespace, from_config: str | None) -> PolicyId:
    try:
        return PolicyId.parse(args.policy or from_config or "plyse")
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _write_run(out: Path, stem: str, metrics, params: SystemParams) -> None:
    write_text(out / f"{stem}.json", run_json_text(metrics, params))
    write_text(out / f"fig2-feasibility-{stem}.csv", trace_csv_text(metrics, params))


def _print_run(metrics, out: Path, stem: str) -> None:
    print(
        f"{metrics.policy} seed={metrics.seed} N={metrics.N}: R_bar={metrics.R_bar:.6g} bits/slot "
        f"Q_U_bar={metrics.Q_U_bar:.6g} Q_S_bar={metrics.Q_S_bar:.6g} c_bar={metrics.c_bar:.6g} J "
        f"violations={metrics.violations} diverged={metrics.diverged}"
    )
    print(f"wrote {out / (stem + '.json')}")


def cmd_run(args: argparse.Namespace) -> int:
    params, cfg_policy = _load(args)
    policy = _policy(args, cfg_policy)
    out = _out_dir(args)
    stem = f"run-{policy.value}-s{params.seed}"
    if args.dump_events:
        gen = EventGenerator(params)
        write_event_trace(out / args.dump_events, gen.take(params.N))
    log: list | None = [] if args.state_trace else None
    metrics = run(params, policy, log)
    _write_run(out, stem, metrics, params)
    if log is not None:
        write_text(out / args.state_trace, state_csv_text(log, params))
    _print_run(metrics, out, stem)
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    params, cfg_policy = _load(args)
    policy = _policy(args, cfg_policy)
    try:
        events = read_event_trace(args.events)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read event trace: {exc}") from exc
    if not events:
        raise CliError("event trace is empty")
    params = params.replace(N=len(events))
    out = _out_dir(args)
    stem = f"replay-{policy.value}-s{params.seed}"
    metrics = run_events(params, policy, events)
    _write_run(out, stem, metrics, params)
    _print_run(metrics, out, stem)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    params, _ = _load(args)
    try:
        values = tuple(float(v) for v in args.values.split(","))
        policies = tuple(args.policies.split(",")) if args.policies else tuple(m.value for m in PolicyId)
        spec = SweepSpec(args.param, values, params, args.replications, policies)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out = _out_dir(args)
    name = args.name or SWEEP_FILE.get(args.param, f"fig5-comparisons-{args.param}")
    rows = sweep(spec, workers=args.workers)
    write_text(out / f"{name}.csv", sweep_csv_text(rows, params, spec.replications))
    lines = ["param,value,policy,n_runs,n_diverged,n_errors,R_bar_mean,R_bar_std,Q_U_bar_mean,Q_S_bar_mean,c_bar_mean"]
    for a in aggregate(rows):
        lines.append(
            ",".join(
                [args.param, f"{a.value:.12g}", a.policy, str(a.n_runs), str(a.n_diverged), str(a.n_errors)]
                + [f"{a.mean['R_bar']:.12g}", f"{a.std['R_bar']:.12g}"]
                + [f"{a.mean[k]:.12g}" for k in ("Q_U_bar", "Q_S_bar", "c_bar")]
            )
        )
        print(f"{args.param}={a.value:g} {a.policy}: R_bar={a.mean['R_bar']:.6g} ± {a.std['R_bar']:.3g} diverged={a.n_diverged}/{a.n_runs}")
    write_text(out / f"{name}-summary.csv", "\n".join(lines) + "\n")
    print(f"wrote {out / (name + '.csv')}")
    errors = [r for r in rows if r.error]
    for r in errors:
        print(f"error at {r.param}={r.value:g} {r.policy} seed={r.seed}: {r.error}", file=sys.stderr)
    return 1 if errors else 0


def cmd_capacity(args: argparse.Namespace) -> int:
    params, _ = _load(args)
    rep = omega_threshold(params)
    doc = {"params": params.to_dict(), "seed": params.seed, "capacity": rep.to_dict()}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    out = _out_dir(args)
    write_text(out / "capacity.json", text)
    print(f"omega_threshold = {rep.omega_threshold:.6g} J ({rep.branch} bound); Q_U bound = {rep.q_max:.6g} bits")
    print(f"wrote {out / 'capacity.json'}")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    params, _ = _load(args)
    results = oracle_check(params, n=args.n)
    header = [f"# {k} = {v!r}" for k, v in params.to_dict().items()] + [f"# samples = {args.n}"]
    out = _out_dir(args)
    write_text(out / "oracle-gaps.csv", results_csv_text(results, header))
    failures = [r for r in results if not r.ok]
    ops = sorted({r.op for r in results})
    for op in ops:
        rs = [r for r in results if r.op == op]
        worst = max(r.rel_gap for r in rs)
        nfail = sum(1 for r in rs if not r.ok)
        print(f"{op:13s} samples={len(rs)} failures={nfail} worst_rel_gap={worst:.3g}")
    print(("PASS" if not failures else "FAIL") + f": {len(failures)} failures over {args.n} samples")
    return 0 if not failures else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value parameter file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one parameter (repeatable)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--window", type=int, help="moving-window length for traces, in slots")

    ap = argparse.ArgumentParser(prog="plyse", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="simulate one policy")
    p.add_argument("--policy", help="plyse, lco, eco or qs-oblivious")
    p.add_argument("--dump-events", metavar="FILE", help="also write the event sequence (for replay)")
    p.add_argument("--state-trace", metavar="FILE", help="also write per-slot states and actions")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", parents=[common], help="rerun a policy on a dumped event trace")
    p.add_argument("--policy")
    p.add_argument("--events", required=True, help="event CSV written by run --dump-events")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("sweep", parents=[common], help="sweep one parameter over several values")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--replications", type=int, default=5)
    p.add_argument("--policies", help="comma-separated policies (default: all)")
    p.add_argument("--workers", type=int, default=1, help="parallel processes")
    p.add_argument("--name", help="output file stem")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("capacity", parents=[common], help="battery-capacity threshold")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("oracle-check", parents=[common], help="compare closed forms with grid oracles")
    p.add_argument("--n", type=int, default=1000, help="number of random (state, event) samples")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except (CliError, ConfigError, SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
