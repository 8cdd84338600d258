"""``rotorctl`` command-line front end.

Exit codes: 0 success, 1 method-level failure (rank deficiency, residual or
steering error above tolerance), 2 usage error, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from contextlib import nullcontext
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .basis import build_operators, operators_to_dict
from .io import (
    dumps,
    read_json,
    sample_times,
    schedule_from_dict,
    schedule_to_dict,
    state_from_payload,
    state_to_payload,
    version_string,
    write_json,
    write_trajectory_csv,
)
from .lie import certify_block, certify_compatible, verify_ad_formula, verify_bracket_identities
from .observables import ObservableReport
from .propagation import StateVector, propagate, sample_trajectory
from .synthesis import (
    PlanningError,
    SteeringError,
    plan_unitary,
    realize,
    spectral_gaps,
    steer_state,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("operators", "rank", "brackets", "simulate", "steer", "plan", "gaps")
CONTROL_CHOICES = ("x", "y", "z", "xy", "xz", "yz", "xyz")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    ell_max: int = 3
    ell: int | None = None
    n: int | None = None
    delta: float = 0.5
    eps: float = 0.1
    tol: float = 1e-8
    h: int | None = None
    seed: int = 0
    input: str | None = None
    output: str | None = None
    format: str = "json"
    controls: str = "xyz"
    budget_seconds: float = 60.0
    samples_per_period: int = 200
    max_rows: int = 20000
    source: str = "0,0"
    target: str | None = None
    plot: bool = False

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        fields = set(cls.__dataclass_fields__)
        vals = {k: v for k, v in vars(ns).items() if k in fields}
        vals["input"] = ns.inp
        vals["output"] = ns.out
        if vals["ell_max"] is None:
            vals["ell_max"] = 5 if ns.command == "simulate" else 3
        return cls(**vals)

    def to_dict(self) -> dict:
        return asdict(self)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--ell-max", type=int, default=None, help="highest shell of the truncation (default 5 for simulate, else 3)"
    )
    common.add_argument("--ell", type=int, default=None, help="shell index of a two-shell block")
    common.add_argument("--n", type=int, default=None, help="leading block size")
    common.add_argument("--delta", type=float, default=0.5, help="field amplitude bound")
    common.add_argument("--eps", type=float, default=0.1, help="steering tolerance")
    common.add_argument("--tol", type=float, default=1e-8, help="plan factorisation tolerance")
    common.add_argument("--h", type=int, default=None, help="pulses per segment when realising a plan")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--in", dest="inp", default=None, help="input file")
    common.add_argument("--out", default=None, help="output file (steer: output directory)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--controls", choices=CONTROL_CHOICES, default="xyz")
    common.add_argument("--budget-seconds", type=float, default=60.0)
    common.add_argument("--samples-per-period", type=int, default=200)
    common.add_argument("--max-rows", type=int, default=20000, help="cap on trajectory CSV rows")
    common.add_argument("--source", default="0,0", help="initial level 'l,m' when no --in file is given")
    common.add_argument("--target", default=None, help="target level 'l,m' when no --in file is given")
    common.add_argument("--plot", action="store_true", help="also render a PNG next to the trajectory CSV")

    p = argparse.ArgumentParser(prog="rotorctl", description="Controllability toolkit for the driven linear rotor.")
    p.add_argument("--version", action="version", version=f"rotorctl {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "operators": "write the drift and coupling matrices",
        "rank": "Lie-rank certificate of a two-shell block and of the compatible set",
        "brackets": "check the bracket identities",
        "simulate": "propagate a control schedule",
        "steer": "build a bounded control between two states",
        "plan": "factorise a unitary on the leading block",
        "gaps": "list spectral gaps of a truncation",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


# -- helpers ------------------------------------------------------------------------


def _emit(cfg: RunConfig, payload: dict) -> None:
    text = dumps(payload)
    if cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _header(cfg: RunConfig) -> dict:
    return {"version": version_string(), "config": cfg.to_dict()}


def _level(text: str) -> tuple[int, int]:
    try:
        ell, m = (int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"level {text!r} must look like 'l,m'") from None
    return ell, m


def _validate_paths(cfg: RunConfig) -> None:
    if cfg.input is not None:
        p = Path(cfg.input)
        if not p.is_file() or not os.access(p, os.R_OK):
            raise OSError(f"cannot read input file {p}")
    if cfg.output is not None:
        p = Path(cfg.output)
        parent = p if cfg.command == "steer" and p.is_dir() else p.parent
        if not parent.exists() or not os.access(parent, os.W_OK):
            raise OSError(f"cannot write to {parent}")
        if p.exists() and p.is_dir() and cfg.command != "steer":
            raise OSError(f"{p} is a directory")


def _ops(cfg: RunConfig):
    try:
        return build_operators(cfg.ell_max)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- commands ------------------------------------------------------------------------


def cmd_operators(cfg: RunConfig) -> int:
    ops = _ops(cfg)
    _emit(cfg, operators_to_dict(ops))
    return EXIT_OK


def cmd_rank(cfg: RunConfig) -> int:
    ell = 0 if cfg.ell is None else cfg.ell
    if ell < 0:
        raise UsageError("--ell must be non-negative")
    report = certify_block(ell, cfg.controls)
    out = {"ell": ell, "controls": cfg.controls, **report.to_dict(), "notes": report.notes}
    ok = report.is_full_rank
    if cfg.n is not None:
        ops = _ops(cfg)
        if not 1 <= cfg.n <= ops.dim:
            raise UsageError(f"--n must lie in 1..{ops.dim}")
        comp = certify_compatible(ops, cfg.n, cfg.controls)
        out["compatible"] = {"n": cfg.n, "ell_max": cfg.ell_max, **comp.to_dict(), "notes": comp.notes}
        ok = ok and comp.is_full_rank
    _emit(cfg, {**_header(cfg), **out})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_brackets(cfg: RunConfig) -> int:
    shells = range(0, 4) if cfg.ell is None else [cfg.ell]
    if cfg.ell is not None and cfg.ell < 0:
        raise UsageError("--ell must be non-negative")
    results = []
    ok = True
    for ell in shells:
        rows = verify_bracket_identities(ell)
        checked = [(label, r) for label, r in rows if not label.startswith("opposite-sign:")]
        worst = max((r for _, r in checked), default=0.0)
        entry = {"ell": ell, "identities": {label: r for label, r in rows}, "max_residual": worst}
        if ell <= 2:
            entry["ad_closed_form_residual"] = verify_ad_formula(ell, 2)
            ok = ok and entry["ad_closed_form_residual"] <= 1e-10
        ok = ok and worst <= 1e-12
        results.append(entry)
    _emit(cfg, {**_header(cfg), "blocks": results, "passed": ok})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_gaps(cfg: RunConfig) -> int:
    ops = _ops(cfg)
    N = ops.dim if cfg.n is None else cfg.n
    if not 1 <= N <= ops.dim:
        raise UsageError(f"--n must lie in 1..{ops.dim}")
    g = spectral_gaps(ops, N)
    pairs = {format(s, "g"): [[j + 1, k + 1] for j, k in g.pair_table[s]] for s in g.gaps}
    _emit(cfg, {"N": N, "ell_max": cfg.ell_max, "gaps": list(g.gaps), "pairs": pairs})
    return EXIT_OK


def _trajectory_outputs(cfg, ops, psi0, ctrl, csv_path, plot_path: Path | None):
    times = sample_times(ctrl.total_time, cfg.samples_per_period, max_rows=cfg.max_rows)
    states = sample_trajectory(ops, psi0, ctrl, times)
    if csv_path is not None:
        write_trajectory_csv(csv_path, ops, times, states)
    if plot_path is not None:
        from .plotting import plot_trajectory

        plot_trajectory(plot_path, ops, times, states)
    return times, states


def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.input is None:
        raise UsageError("simulate needs --in SCHEDULE.json")
    ops = _ops(cfg)
    try:
        ctrl = schedule_from_dict(read_json(cfg.input))
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad schedule file: {exc}") from None
    try:
        psi0 = StateVector.basis_state(ops.ordering, *_level(cfg.source))
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if cfg.format == "csv":
        out = Path(cfg.output) if cfg.output else None
        plot = out.with_suffix(".png") if cfg.plot and out is not None else None
        _trajectory_outputs(cfg, ops, psi0, ctrl, out if out is not None else sys.stdout, plot)
        return EXIT_OK
    final = propagate(ops, psi0, ctrl)
    rep = ObservableReport.of(ops, final)
    payload = {
        **_header(cfg),
        "T": ctrl.total_time,
        "sup_u": ctrl.sup_amplitude,
        "norm": final.norm,
        "final_state": state_to_payload(final),
        "observables": rep.to_dict(),
    }
    _emit(cfg, payload)
    return EXIT_OK


def _states(cfg: RunConfig, ops):
    if cfg.input is not None:
        payload = read_json(cfg.input)
        if not isinstance(payload, dict) or "psi0" not in payload or "psi1" not in payload:
            raise UsageError("states file must hold 'psi0' and 'psi1'")
        try:
            return state_from_payload(payload["psi0"], ops), state_from_payload(payload["psi1"], ops)
        except (KeyError, ValueError) as exc:
            raise UsageError(f"bad state: {exc}") from None
    if cfg.target is None:
        raise UsageError("steer needs --in STATES.json or --target l,m")
    try:
        return (
            StateVector.basis_state(ops.ordering, *_level(cfg.source)),
            StateVector.basis_state(ops.ordering, *_level(cfg.target)),
        )
    except KeyError as exc:
        raise UsageError(str(exc)) from None


def cmd_steer(cfg: RunConfig) -> int:
    ops = _ops(cfg)
    if not 0 < cfg.eps < 1 or cfg.delta <= 0:
        raise UsageError("need 0 < eps < 1 and delta > 0")
    psi0, psi1 = _states(cfg, ops)
    status = EXIT_OK
    message = "ok"
    try:
        result = steer_state(ops, psi0, psi1, cfg.eps, cfg.delta, cfg.budget_seconds, seed=cfg.seed)
    except SteeringError as exc:
        status, message, result = EXIT_FAIL, str(exc), exc.best
    summary = {**_header(cfg), "status": message, "eps": cfg.eps, "delta": cfg.delta}
    if result is not None:
        big = build_operators(result.validation_ell_max or ops.ell_max)
        final = result.final_state if result.final_state is not None else psi0
        target = psi1.embed(final.ordering)
        summary.update(result.to_dict())
        summary["observables"] = ObservableReport.of(big if final.ordering.dim == big.dim else ops, final, target).to_dict()
        if result.achieved_error > cfg.eps:
            status = EXIT_FAIL
    out_dir = Path(cfg.output) if cfg.output else None
    if out_dir is not None:
        out_dir.mkdir(exist_ok=True)
        if result is not None:
            write_json(out_dir / "schedule.json", schedule_to_dict(result.control))
            _trajectory_outputs(
                cfg, ops, psi0, result.control, out_dir / "trajectory.csv", out_dir / "trajectory.png" if cfg.plot else None
            )
        write_json(out_dir / "summary.json", summary)
    else:
        sys.stdout.write(dumps(summary))
    return status


def _target(cfg: RunConfig, n: int) -> np.ndarray:
    if cfg.input is not None:
        payload = read_json(cfg.input)
        data = payload["target"] if isinstance(payload, dict) else payload
        flat = []
        for z in data:
            if isinstance(z, list) and len(z) == 2 and not isinstance(z[0], list):
                flat.append(complex(z[0], z[1]))
            else:
                raise UsageError("target must be a flat row-major list of [re, im] pairs")
        if len(flat) != n * n:
            raise UsageError(f"target has {len(flat)} entries, expected {n * n}")
        return np.array(flat).reshape(n, n)
    from scipy.stats import unitary_group

    return unitary_group.rvs(n, random_state=np.random.default_rng(cfg.seed))


def cmd_plan(cfg: RunConfig) -> int:
    ops = _ops(cfg)
    n = 4 if cfg.n is None else cfg.n
    if not 1 <= n <= ops.dim:
        raise UsageError(f"--n must lie in 1..{ops.dim}")
    U = _target(cfg, n)
    try:
        plan = plan_unitary(ops, U, n, cfg.tol)
    except PlanningError as exc:
        _emit(cfg, {**_header(cfg), "status": str(exc), "n": n})
        return EXIT_FAIL
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    payload = {**_header(cfg), **plan.to_dict()}
    if cfg.h is not None:
        res = realize(ops, plan, cfg.h, cfg.delta, simulate=True, seed=cfg.seed)
        payload["realized"] = schedule_to_dict(res.lab)
        payload["tracking_error"] = res.error
    _emit(cfg, payload)
    return EXIT_OK


HANDLERS = {
    "operators": cmd_operators,
    "rank": cmd_rank,
    "brackets": cmd_brackets,
    "simulate": cmd_simulate,
    "steer": cmd_steer,
    "plan": cmd_plan,
    "gaps": cmd_gaps,
}


def _thread_limit():
    raw = os.environ.get("ROTORCTL_THREADS")
    if not raw:
        return nullcontext()
    try:
        limit = int(raw)
    except ValueError:
        raise UsageError(f"ROTORCTL_THREADS={raw!r} is not an integer") from None
    if limit < 1:
        raise UsageError("ROTORCTL_THREADS must be positive")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=limit)


def main(argv: list[str] | None = None) -> int:
    ns = _parser().parse_args(argv)
    cfg = RunConfig.from_args(ns)
    try:
        _validate_paths(cfg)
        with _thread_limit():
            return HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        print(f"rotorctl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"rotorctl: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
