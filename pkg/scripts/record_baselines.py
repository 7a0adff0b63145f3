#!/usr/bin/env python3
"""Record first-build regression baselines for the acceptance suite.

Runs the canonical experiments and freezes the measured values into
tests/recorded_baselines.json.  Re-run only when a deliberate change to the
solver is supposed to move these numbers; the acceptance tests compare
against them at their stated tolerances.
"""

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

import numpy as np

from alignlab.dynamics import run
from _setups import BASELINE_FILE, bump_config, burgers_config, dichotomy_config


def nearest_tick(record, t_target):
    ts = np.asarray(record.t)
    return int(np.argmin(np.abs(ts - t_target)))


def main() -> int:
    baselines = {}

    print("dichotomy: lipschitz_gaussian branch ...")
    res_g = run(dichotomy_config("lipschitz_gaussian"))
    print(f"  {res_g.status} at t={res_g.detection_time}")
    baselines["dichotomy_gaussian_status"] = res_g.status
    baselines["dichotomy_gaussian_detection_time"] = res_g.detection_time

    print("dichotomy: inverse_linear branch ...")
    res_il = run(dichotomy_config("inverse_linear"))
    rec = res_il.record
    print(f"  {res_il.status} at t={res_il.state.t}")
    baselines["dichotomy_il_status"] = res_il.status
    baselines["dichotomy_il_max_abs_rhox"] = max(rec.max_abs_rhox)
    baselines["dichotomy_il_min_rho"] = min(rec.min_rho)
    baselines["dichotomy_il_max_rho"] = max(rec.max_rho)

    print("bump conservation/holder run ...")
    res_b = run(bump_config())
    rec = res_b.record
    k05 = {}
    for t_target in (0.1, 0.5, 1.0, 2.0):
        i = nearest_tick(rec, t_target)
        k05[f"{t_target:g}"] = rec.k0[0.5][i]
    baselines["bump_k0_half_samples"] = k05
    baselines["bump_k0_half_envelope"] = max(rec.k0[0.5])

    print("burgers control ...")
    res_z = run(burgers_config())
    print(f"  {res_z.status} reason={res_z.detection_reason} "
          f"t={res_z.detection_time}")
    baselines["burgers_status"] = res_z.status
    baselines["burgers_detection_time"] = res_z.detection_time
    baselines["burgers_detection_reason"] = res_z.detection_reason

    out = REPO / "tests" / BASELINE_FILE
    out.write_text(json.dumps(baselines, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
