"""Input batches and on-disk artifacts.

Batches are NCHW float32 tensors from seeded synthetic generators (or a
CIFAR-10 binary file when available).  Batches persist in a small binary
container; score tables persist as CSV with NaN as an empty field.  All
of it round-trips exactly.
"""

import tempfile
from pathlib import Path

import numpy as np

from epsinas import (
    BatchSpec,
    ScoreRow,
    ScoreTable,
    load_batch,
    make_batch,
    read_scores_csv,
    save_batch,
    write_scores_csv,
)

workdir = Path(tempfile.mkdtemp(prefix="epsinas-demo-"))

# =========================================================================
# Synthetic batches are seeded and reproducible.
# =========================================================================

spec = BatchSpec("random_normal", 16, (3, 32, 32), seed=5)
batch = make_batch(spec)
again = make_batch(spec)
print(f"batch kind={spec.kind} shape={batch.shape} dtype={batch.dtype}")
print(f"same seed -> identical bytes: "
      f"{batch.tobytes() == again.tobytes()}")

grey = make_batch(BatchSpec("greyscale", 4, (3, 8, 8)))
print(f"greyscale ramp sample values: "
      f"{[float(v) for v in grey[:, 0, 0, 0]]}")

# =========================================================================
# Batch container round trip.
# =========================================================================

batch_path = workdir / "batch.epsb"
save_batch(batch_path, batch)
loaded = load_batch(batch_path)
print(f"\nsaved {batch_path.stat().st_size} bytes "
      f"(4 magic + 4 rank + 16 dims + payload)")
print(f"load_batch round trip exact: "
      f"{np.array_equal(loaded, batch) and loaded.dtype == batch.dtype}")

# =========================================================================
# Score-table CSV round trip, NaN included.
# =========================================================================

rows = [
    ScoreRow(0, "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|",
             0.0421, "valid"),
    ScoreRow(3, "|none~0|+|none~0|none~1|+|none~0|none~1|avg_pool_3x3~2|",
             float("nan"), "nonfinite_output"),
]
table_path = workdir / "scores.csv"
write_scores_csv(ScoreTable(rows), table_path)
print(f"\nscores.csv contents:\n{table_path.read_text()}")
back = read_scores_csv(table_path)
print(f"round trip statuses: {[r.status for r in back.rows]}, "
      f"NaN preserved: {back.rows[1].epsilon != back.rows[1].epsilon}")
