#!/usr/bin/env python3
"""Regenerate the three desk-scale cluster tables via the CLI.

Runs `pcmlab compare` on the bundled low-loss, moderate-loss, and heavy-loss
configs and leaves one clusters.csv (plus manifest) per case under
results/<name>/.  Paper-scale settings live in configs/paper_full_scale.json;
swap it in for the low-loss case if you have the minutes to spare.
"""

from __future__ import annotations

import sys
from pathlib import Path

from pcmlab.cli import main

ROOT = Path(__file__).resolve().parents[1]

CASES = [
    ("low_loss", "paper_section5.json"),
    ("moderate_loss", "paper_section5_moderate.json"),
    ("heavy_loss", "paper_section5_heavy.json"),
]


def run() -> int:
    for name, config in CASES:
        out_dir = ROOT / "results" / name
        print(f"== {name} ({config}) ==")
        code = main(
            [
                "compare",
                "--config",
                str(ROOT / "configs" / config),
                "--out",
                str(out_dir),
            ]
        )
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
