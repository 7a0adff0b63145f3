"""Run artifacts: snapshot binary records, diagnostics CSV, summary JSON.

Every writer lands on a temporary name and renames on completion, so no
partial artifact is ever visible.  Numeric CSV fields use shortest
round-trip formatting, which keeps outputs byte-identical across runs.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from alignlab.diagnostics import CSV_COLUMNS, DiagnosticsRecord
from alignlab.dynamics import SimState
from alignlab.fields import TorusField

SNAPSHOT_MAGIC = b"EASNP1"


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    tmp.replace(path)


def _atomic_write_text(path: Path, payload: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(payload)
    tmp.replace(path)


def fmt_float(x: float) -> str:
    return f"{float(x):.17g}"


def write_snapshot(state: SimState, path) -> None:
    """Binary record: magic, n:u32, then t,kappa,nu,p0:f64, then rho,G,u arrays."""
    n = state.rho.n
    payload = SNAPSHOT_MAGIC + struct.pack("<I", n)
    payload += struct.pack("<4d", state.t, state.kappa, state.nu, state.p0)
    for arr in (state.rho.values, state.g.values, state.u.values):
        payload += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    _atomic_write_bytes(Path(path), payload)


def read_snapshot(path) -> SimState:
    raw = Path(path).read_bytes()
    if raw[: len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot record (bad magic)")
    off = len(SNAPSHOT_MAGIC)
    (n,) = struct.unpack_from("<I", raw, off)
    off += 4
    t, kappa, nu, p0 = struct.unpack_from("<4d", raw, off)
    off += 32
    fields = []
    for _ in range(3):
        fields.append(np.frombuffer(raw, dtype="<f8", count=n, offset=off).copy())
        off += 8 * n
    rho, g, u = fields
    return SimState(t=t, rho=TorusField(rho), g=TorusField(g), kappa=kappa,
                    nu=nu, p0=p0, u=TorusField(u))


def write_diagnostics_csv(record: DiagnosticsRecord, path) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for row in record.csv_rows():
        lines.append(",".join(fmt_float(v) for v in row))
    _atomic_write_text(Path(path), "\n".join(lines) + "\n")


def write_json(payload: dict, path) -> None:
    _atomic_write_text(Path(path), json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_kernel_assessment(assessment, csv_path, json_path) -> None:
    """Flat per-radius CSV plus a summary JSON with constants and flags."""
    header = "r,psi,M,hm_ratio,doubling_psi,doubling_M,ratio_m_over_M,r_gamma_M"
    lines = [header]
    for i in range(assessment.r_grid.size):
        lines.append(",".join(fmt_float(v) for v in (
            assessment.r_grid[i], assessment.psi[i], assessment.M[i],
            assessment.hm_ratio[i], assessment.doubling_psi[i],
            assessment.doubling_M[i], assessment.ratio_m_over_M[i],
            assessment.r_gamma_M[i])))
    _atomic_write_text(Path(csv_path), "\n".join(lines) + "\n")

    summary = {
        "family": assessment.spec.family,
        "r0": assessment.spec.r0,
        "gamma": assessment.spec.gamma,
        "grid": {"min": float(assessment.r_grid[0]),
                 "max": float(assessment.r_grid[-1]),
                 "points": int(assessment.r_grid.size)},
        "flags": assessment.flags,
        "assumptions": {"i": assessment.assumption_i,
                        "ii": assessment.assumption_ii,
                        "iii": assessment.assumption_iii},
        "sandwich_constants": {str(k): v for k, v in assessment.sandwich_constants.items()},
        "sandwich_pass": {str(k): v for k, v in assessment.sandwich_pass.items()},
        "hm_constant": assessment.hm_constant,
        "doubling_psi_constant": assessment.doubling_psi_constant,
        "doubling_M_constant": assessment.doubling_M_constant,
        "violations": {"ratio_m_over_M": assessment.violations_m_over_M,
                       "r_gamma_M": assessment.violations_r_gamma_M},
        "integrable": assessment.integrable,
        "integrable_M0": assessment.integrable_M0,
    }
    write_json(summary, json_path)


def write_run_outputs(result, config, out_dir) -> dict:
    """Write snapshots, the diagnostics CSV and the summary JSON for one run."""
    from alignlab.diagnostics import summarize

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for i, snap in enumerate(result.snapshots):
        write_snapshot(snap, snap_dir / f"snap_{i:05d}.bin")
    write_diagnostics_csv(result.record, out / "diagnostics.csv")
    summary = summarize(result, config)
    write_json(summary, out / "summary.json")
    return summary
