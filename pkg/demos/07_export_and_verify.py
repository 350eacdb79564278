"""Bridge to the separate bench-export package.

The exporter (installed separately from exporter/) turns a pickled
benchmark archive into the neutral accuracy CSV this library consumes,
and verifies emitted files offline.  The two packages only share the
CSV/genotype contract - no imports in either direction.

This demo builds a small synthetic archive, exports it, verifies the
schema and loads the result with the primary reader.  It needs the
bench-export package; without it, it explains how to install it.
"""

import pickle
import sys
import tempfile
from pathlib import Path

try:
    from bench_export import ExportSpec, export, verify_schema
except ImportError:
    print("bench-export is not installed; run\n"
          "    pip install -e exporter/ --no-build-isolation\n"
          "and rerun this demo.")
    sys.exit(0)

from epsinas import enumerate_space, load_bench_csv

workdir = Path(tempfile.mkdtemp(prefix="epsinas-demo-"))

# =========================================================================
# A synthetic full-size archive (the exporter validates the row count).
# =========================================================================

space = enumerate_space()
n = len(space)
archive = {
    "format": "nb201-lite-v1",
    "archs": [str(g) for g in space],
    "datasets": {
        "cifar10": {
            "val": [[50.0 + (i % 400) / 10.0] * 3 for i in range(n)],
            "test": [[48.0 + (i % 400) / 10.0] * 3 for i in range(n)],
            "params": [1000 + i for i in range(n)],
            "val_split": "x-valid",
        },
    },
}
archive_path = workdir / "archive.pkl"
with open(archive_path, "wb") as fh:
    pickle.dump(archive, fh)
print(f"synthetic archive: {n} architectures at {archive_path}")

# =========================================================================
# Export, verify, consume.
# =========================================================================

out = workdir / "cifar10.csv"
export(ExportSpec(str(archive_path), "cifar10", str(out)))
print(f"exported       : {out} ({out.stat().st_size} bytes)")

violations = verify_schema(str(out))
print(f"verify_schema  : {'ok' if not violations else violations}")

bench = load_bench_csv(out)
print(f"primary reader : {len(bench)} rows, metadata {bench.metadata}")
row = bench.lookup(str(space[123]))
print(f"arch 123       : val={row.val_acc} test={row.test_acc} "
      f"params={row.params}")
