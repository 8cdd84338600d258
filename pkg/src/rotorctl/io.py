"""File formats: deterministic JSON documents and trajectory CSV."""

from __future__ import annotations

import csv
import json
import math
import subprocess
from contextlib import nullcontext
from importlib import metadata
from pathlib import Path
from typing import Any, TextIO

import numpy as np

from .basis import OperatorSet, cos_theta_matrix
from .propagation import PiecewiseControl, StateVector

SIG_DIGITS = 17


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, f".{SIG_DIGITS}g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with every float printed to 17 significant digits and sorted keys."""

    def enc(o: Any, level: int) -> str:
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, float):
            return _fmt_float(o)
        if isinstance(o, int):
            return str(o)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(o[k], level + 1)}" for k in sorted(o)]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list)) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        raise TypeError(f"cannot serialise {type(o).__name__}")

    return enc(_plain(obj), 0) + "\n"


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def version_string() -> str:
    """Package version plus ``git describe`` when run from a checkout."""
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "0+unknown"
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{version}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return version


# -- schedules and states -------------------------------------------------------


def schedule_to_dict(ctrl: PiecewiseControl) -> dict:
    return {"format": "rotorctl-schedule", "version": 1, **ctrl.to_dict()}


def schedule_from_dict(payload: dict) -> PiecewiseControl:
    if "pieces" not in payload:
        raise ValueError("schedule file lacks 'pieces'")
    return PiecewiseControl.from_dict(payload)


def state_from_payload(payload: Any, ops: OperatorSet) -> StateVector:
    """State from ``{"l,m": amp}`` (amp real or ``[re, im]``) or a dense ``[[re, im], ...]`` list."""
    if isinstance(payload, dict):
        coeffs = {}
        for key, val in payload.items():
            ell, m = (int(x) for x in key.split(","))
            coeffs[(ell, m)] = complex(*val) if isinstance(val, list) else complex(val)
        return StateVector.from_levels(ops.ordering, coeffs)
    amps = np.array([complex(*v) if isinstance(v, list) else complex(v) for v in payload])
    if amps.size > ops.dim:
        raise ValueError(f"state has {amps.size} amplitudes, truncation holds {ops.dim}")
    full = np.zeros(ops.dim, dtype=complex)
    full[: amps.size] = amps
    return StateVector(ops.ordering, full / np.linalg.norm(full))


def state_to_payload(psi: StateVector) -> dict:
    return {str(lv): [float(a.real), float(a.imag)] for lv, a in zip(psi.ordering.levels, psi.amplitudes) if a != 0}


# -- trajectory CSV -------------------------------------------------------------


def trajectory_header(dim: int) -> list[str]:
    cols = ["t"]
    for k in range(1, dim + 1):
        cols += [f"re_c{k}", f"im_c{k}"]
    return cols + ["norm", "orientation"]


def trajectory_rows(ops: OperatorSet, times: np.ndarray, states: np.ndarray) -> np.ndarray:
    C = cos_theta_matrix(ops)
    norms = np.linalg.norm(states, axis=1)
    orient = np.real(np.einsum("ti,ij,tj->t", states.conj(), C, states))
    cols = [np.asarray(times)[:, None]]
    inter = np.empty((len(times), 2 * ops.dim))
    inter[:, 0::2] = states.real
    inter[:, 1::2] = states.imag
    cols += [inter, norms[:, None], orient[:, None]]
    return np.hstack(cols)


def write_trajectory_csv(dest: str | Path | TextIO, ops: OperatorSet, times: np.ndarray, states: np.ndarray) -> None:
    """Rows ``t, re_c1, im_c1, ..., norm, orientation`` to a path or an open text stream."""
    rows = trajectory_rows(ops, times, states)
    with open(dest, "w", newline="", encoding="utf-8") if isinstance(dest, (str, Path)) else nullcontext(dest) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(ops.dim))
        for row in rows:
            w.writerow([format(float(x), f".{SIG_DIGITS}g") for x in row])


def read_trajectory_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(x) for x in row] for row in r])
    return header, data.reshape(-1, len(header))


def sample_times(total_time: float, samples_per_period: int = 200, period: float = math.pi, max_rows: int = 20000) -> np.ndarray:
    """Uniform sample times over ``[0, T]``; downsampled evenly when above ``max_rows``."""
    if total_time <= 0:
        return np.zeros(1)
    count = int(math.ceil(total_time / period * samples_per_period)) + 1
    count = max(2, min(count, max_rows))
    return np.linspace(0.0, total_time, count)
