#!/usr/bin/env python3
# Copyright 2026 The morpholcz Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes the EmbeddingTable fixture used by the fusion tests.

A 640 m x 640 m raster at 10 m holds 4 x 4 patches of 320 m at a 100 m step.
Patch keys are the 100 m cells (6 per row) containing each central pixel.
"""
import hashlib
import json
import math
import pathlib
import sys

DIM = 8


def main(out_dir: pathlib.Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    data = out_dir / "embeddings_fold0.csv"
    lines = ["patch_id,fold,label," + ",".join(f"e{k}" for k in range(DIM))]
    for j in range(4):
        for i in range(4):
            pid = (1 + j) * 6 + (1 + i)
            label = "" if (i + j) % 3 == 0 else str(2 if i < 2 else 6)
            values = [repr(math.sin(0.7 * pid + k) / (k + 1)) for k in range(DIM)]
            lines.append(f"{pid},0,{label}," + ",".join(values))
    data.write_bytes(("\n".join(lines) + "\n").encode())
    side = {
        "dim": DIM,
        "producer": "fixture/sine",
        "fold": 0,
        "checksum": "sha256:" + hashlib.sha256(data.read_bytes()).hexdigest(),
    }
    (out_dir / "embeddings_fold0.csv.json").write_text(json.dumps(side, indent=2) + "\n")


if __name__ == "__main__":
    main(pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data"))
