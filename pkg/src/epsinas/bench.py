"""Trained-accuracy lookup tables.

A bench table maps canonical genotype strings to the accuracies and size of
the trained architecture, as exported from an official tabular benchmark.
Tables are immutable after load; lookups on unknown keys fail loudly instead
of defaulting, since a silent 0% accuracy would poison every statistic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .space import format_genotype, parse_genotype

BENCH_HEADER = ["arch_id", "genotype", "val_acc", "test_acc", "params"]


class BenchFormatError(ValueError):
    """Malformed bench CSV content; message carries the line number."""


@dataclass(frozen=True)
class BenchRow:
    arch_id: int
    val_acc: float
    test_acc: float
    params: int


@dataclass
class BenchTable:
    rows: dict[str, BenchRow]
    metadata: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    def __contains__(self, genotype: str) -> bool:
        return genotype in self.rows

    def lookup(self, genotype: str) -> BenchRow:
        row = self.rows.get(genotype)
        if row is None:
            raise KeyError(f"genotype not in bench table: {genotype!r}")
        return row

    def genotypes(self) -> list[str]:
        """Keys in ascending arch_id order — the deterministic universe
        search algorithms draw from, independent of file row order."""
        return sorted(self.rows, key=lambda g: (self.rows[g].arch_id, g))


def _parse_acc(value: str, name: str, ln: int) -> float:
    try:
        acc = float(value)
    except ValueError:
        raise BenchFormatError(f"line {ln}: {name} {value!r} is not a number")
    if not 0.0 <= acc <= 100.0:
        raise BenchFormatError(f"line {ln}: {name} {acc} outside [0, 100]")
    return acc


def load_bench_csv(path) -> BenchTable:
    """Read and validate `arch_id,genotype,val_acc,test_acc,params`.

    Leading `# key=value` comment lines become table metadata (dataset name,
    source tag).  Every genotype must be canonical; duplicates are an error.
    Row order in the file is irrelevant: equal contents give equal tables.
    """
    rows: dict[str, BenchRow] = {}
    metadata: dict[str, str] = {}
    with open(path, newline="") as fh:
        ln = 0
        header = None
        reader = csv.reader(fh)
        for rec in reader:
            ln += 1
            if rec and rec[0].startswith("#"):
                text = rec[0].lstrip("#").strip()
                if "=" in text:
                    key, _, value = text.partition("=")
                    metadata[key.strip()] = value.strip()
                continue
            header = rec
            break
        if header != BENCH_HEADER:
            raise BenchFormatError(
                f"line {ln}: bad header {header!r}, expected {BENCH_HEADER}")
        for rec in reader:
            ln += 1
            if len(rec) != 5:
                raise BenchFormatError(
                    f"line {ln}: expected 5 fields, got {len(rec)}")
            arch_id_s, genotype, val_s, test_s, params_s = rec
            try:
                g = parse_genotype(genotype)
            except ValueError as exc:
                raise BenchFormatError(f"line {ln}: {exc}") from exc
            if format_genotype(g) != genotype:
                raise BenchFormatError(
                    f"line {ln}: genotype not canonical: {genotype!r}")
            if genotype in rows:
                raise BenchFormatError(
                    f"line {ln}: duplicate genotype key {genotype!r}")
            try:
                arch_id = int(arch_id_s)
                params = int(params_s)
            except ValueError:
                raise BenchFormatError(
                    f"line {ln}: arch_id/params must be integers, got "
                    f"{arch_id_s!r}/{params_s!r}")
            if params < 0:
                raise BenchFormatError(f"line {ln}: negative params {params}")
            rows[genotype] = BenchRow(arch_id, _parse_acc(val_s, "val_acc", ln),
                                      _parse_acc(test_s, "test_acc", ln),
                                      params)
    return BenchTable(rows, metadata)


def write_bench_csv(table: BenchTable, path) -> None:
    """Inverse of load_bench_csv (rows ordered by arch_id); used by tests
    and demo fixtures — the production exporter lives elsewhere."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for key, value in table.metadata.items():
            fh.write(f"# {key}={value}\n")
        w.writerow(BENCH_HEADER)
        for g in table.genotypes():
            r = table.rows[g]
            w.writerow([r.arch_id, g, repr(float(r.val_acc)),
                        repr(float(r.test_acc)), r.params])


def baselines(table: BenchTable, n: int, runs: int,
              rng: np.random.Generator):
    """Monte-Carlo optimal and random baselines over n-architecture samples.

    Per run: draw n distinct rows; "optimal" takes the test accuracy of the
    sample's best-by-validation row, "random" the test accuracy of one
    uniform draw from the sample.  Returns ((opt_mean, opt_std),
    (rand_mean, rand_std)) over `runs` repetitions (population std).
    """
    if len(table) == 0:
        raise ValueError("bench table is empty")
    if not 1 <= n <= len(table):
        raise ValueError(f"sample size {n} outside [1, {len(table)}]")
    if runs < 1:
        raise ValueError(f"runs must be positive, got {runs}")
    order = table.genotypes()
    val = np.array([table.rows[g].val_acc for g in order])
    test = np.array([table.rows[g].test_acc for g in order])
    opt = np.empty(runs)
    rand = np.empty(runs)
    for i in range(runs):
        idx = rng.choice(len(order), size=n, replace=False)
        opt[i] = test[idx[np.argmax(val[idx])]]
        rand[i] = test[idx[rng.integers(n)]]
    return ((float(opt.mean()), float(opt.std())),
            (float(rand.mean()), float(rand.std())))
