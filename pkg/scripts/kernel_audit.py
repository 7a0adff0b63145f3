#!/usr/bin/env python3
"""Audit the whole kernel catalog on a dense log grid.

Each family is checked against the assumption battery; the comparison
families carry their expected failure flags, so a zero exit means the
checker both certified the good kernels and caught the bad ones.
"""

import sys
import tempfile
from pathlib import Path

from alignlab.cli import main

TEMPLATE = """\
[kernel]
family = {family}
{extra}
[ic]
preset = flat

[kernel_check]
expected_failures = {expected}
"""

CATALOG = [
    ("inverse_linear", "", ""),
    ("log_boosted", "", ""),
    ("log_damped", "", ""),
    ("power", "alpha = 0.5\n", "sandwich"),
    ("lipschitz_gaussian", "", "non_integrable sandwich"),
]


if __name__ == "__main__":
    out_root = sys.argv[1] if len(sys.argv) > 1 else "alignlab_out/kernel-audit"
    worst = 0
    for family, extra, expected in CATALOG:
        with tempfile.TemporaryDirectory() as tmp:
            cfg = Path(tmp) / "audit.ini"
            cfg.write_text(TEMPLATE.format(family=family, extra=extra,
                                           expected=expected))
            code = main(["kernel-check", "--config", str(cfg),
                         "--out", f"{out_root}/{family}"])
            worst = max(worst, code)
    sys.exit(worst)
