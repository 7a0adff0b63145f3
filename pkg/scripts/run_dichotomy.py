#!/usr/bin/env python3
"""Run the integrable-vs-singular dichotomy experiment at production scale.

Identical supercritical initial data evolved under an integrable kernel
(shock predicted by the initial-data sign test) and a non-integrable one
(global smoothness expected).  Writes both run directories plus a verdict
JSON comparing outcomes against the threshold prediction.
"""

import sys
import tempfile
from pathlib import Path

from alignlab.cli import main

CONFIG = """\
[run]
n = 1024
t_end = 10.0
snapshot_every = 1.0
diag_every = 0.05

[kernel]
family = lipschitz_gaussian

[ic]
preset = supercritical(5)

[dichotomy]
integrable_family = lipschitz_gaussian
singular_family = inverse_linear
"""


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "alignlab_out/dichotomy"
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "dichotomy.ini"
        cfg.write_text(CONFIG)
        sys.exit(main(["dichotomy", "--config", str(cfg), "--out", out]))
