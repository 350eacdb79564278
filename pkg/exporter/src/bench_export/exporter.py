"""Benchmark-archive exporter and offline schema verifier.

Reads a pickled cell-search benchmark archive (format tag
``nb201-lite-v1``: per-architecture genotype strings plus per-seed
final-epoch accuracies and parameter counts for one or more datasets)
and writes the neutral ``arch_id,genotype,val_acc,test_acc,params`` CSV
consumed by the scoring toolkit.  Accuracies are aggregated as the mean
over training seeds at the final epoch; the choice is recorded in the
CSV metadata header together with the dataset and validation-split tag.

The writer emits UTF-8 with LF line endings and orders rows by arch_id,
so repeated exports of the same archive are byte-identical.
"""

from __future__ import annotations

import math
import pickle
import re
from dataclasses import dataclass
from statistics import fmean

ARCHIVE_FORMAT = "nb201-lite-v1"
ARCHIVE_ROWS = 15625                  # 5 operations on 6 cell edges
DATASETS = ("cifar10", "cifar100", "imagenet16-120")
EPOCH_POLICY = "final-mean-over-seeds"
HEADER = "arch_id,genotype,val_acc,test_acc,params"

_OP = r"(?:none|skip_connect|nor_conv_1x1|nor_conv_3x3|avg_pool_3x3)"
GENOTYPE_RE = re.compile(
    rf"\|{_OP}~0\|\+\|{_OP}~0\|{_OP}~1\|\+\|{_OP}~0\|{_OP}~1\|{_OP}~2\|")


class BenchExportError(Exception):
    """Unusable archive or export request."""


@dataclass(frozen=True)
class ExportSpec:
    """One export request: which archive, which dataset, where to."""

    archive_path: str
    dataset: str
    out_path: str
    epoch_policy: str = EPOCH_POLICY

    def __post_init__(self) -> None:
        if self.dataset not in DATASETS:
            raise BenchExportError(
                f"unknown dataset {self.dataset!r}; expected one of "
                f"{', '.join(DATASETS)}")
        if self.epoch_policy != EPOCH_POLICY:
            raise BenchExportError(
                f"unsupported epoch policy {self.epoch_policy!r}; only "
                f"{EPOCH_POLICY!r} is implemented")


# =========================================================================
# Archive loading.
# =========================================================================

def _corrupt(reason: str) -> BenchExportError:
    return BenchExportError(f"corrupt archive: {reason}")


def load_archive(path) -> dict:
    """Load and structurally validate a pickled benchmark archive."""
    try:
        with open(path, "rb") as fh:
            doc = pickle.load(fh)
    except OSError as exc:
        raise BenchExportError(f"cannot read archive: {exc}") from exc
    except Exception as exc:                      # noqa: BLE001 - unpickling
        raise _corrupt(f"unpickling failed ({exc})") from exc

    if not isinstance(doc, dict):
        raise _corrupt(f"top level is {type(doc).__name__}, expected dict")
    if doc.get("format") != ARCHIVE_FORMAT:
        raise _corrupt(f"format tag {doc.get('format')!r}, expected "
                       f"{ARCHIVE_FORMAT!r}")
    archs = doc.get("archs")
    if not isinstance(archs, list) or len(archs) != ARCHIVE_ROWS:
        raise _corrupt(f"expected {ARCHIVE_ROWS} architectures, found "
                       f"{len(archs) if isinstance(archs, list) else archs!r}")
    datasets = doc.get("datasets")
    if not isinstance(datasets, dict) or not datasets:
        raise _corrupt("no datasets block")
    for name, block in datasets.items():
        for key in ("val", "test", "params"):
            series = block.get(key) if isinstance(block, dict) else None
            if not isinstance(series, list) or len(series) != len(archs):
                raise _corrupt(f"dataset {name!r}: field {key!r} does not "
                               f"cover all {len(archs)} architectures")
        if not isinstance(block.get("val_split"), str):
            raise _corrupt(f"dataset {name!r}: missing val_split tag")
    return doc


# =========================================================================
# Export.
# =========================================================================

def _mean_acc(seed_accs, arch_id: int, field: str) -> float:
    try:
        acc = fmean(seed_accs)
    except (TypeError, ValueError) as exc:
        raise _corrupt(f"arch {arch_id}: bad {field} seed list "
                       f"{seed_accs!r}") from exc
    if not math.isfinite(acc) or not 0.0 <= acc <= 100.0:
        raise _corrupt(f"arch {arch_id}: {field} mean {acc!r} outside "
                       f"[0, 100]")
    return acc


def export(spec: ExportSpec) -> str:
    """Write one dataset of an archive as the neutral CSV; returns the
    output path."""
    doc = load_archive(spec.archive_path)
    if spec.dataset not in doc["datasets"]:
        raise BenchExportError(
            f"dataset {spec.dataset!r} not in archive (has: "
            f"{', '.join(sorted(doc['datasets']))})")
    block = doc["datasets"][spec.dataset]

    lines = [
        f"# dataset={spec.dataset}",
        f"# val_split={block['val_split']}",
        f"# epochs={spec.epoch_policy}",
        HEADER,
    ]
    for arch_id, genotype in enumerate(doc["archs"]):
        if not isinstance(genotype, str) \
                or GENOTYPE_RE.fullmatch(genotype) is None:
            raise _corrupt(f"arch {arch_id}: malformed genotype "
                           f"{genotype!r}")
        val = _mean_acc(block["val"][arch_id], arch_id, "val")
        test = _mean_acc(block["test"][arch_id], arch_id, "test")
        params = block["params"][arch_id]
        if not isinstance(params, int) or params < 0:
            raise _corrupt(f"arch {arch_id}: parameter count {params!r}")
        lines.append(f"{arch_id},{genotype},{val!r},{test!r},{params}")

    with open(spec.out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return spec.out_path


# =========================================================================
# Offline schema verification.
# =========================================================================

def _check_row(fields: list[str], ln: int, seen_ids: dict[int, int],
               seen_genotypes: dict[str, int]) -> list[str]:
    problems = []
    if len(fields) != 5:
        return [f"line {ln}: expected 5 fields, got {len(fields)}"]
    raw_id, genotype, val, test, params = fields
    try:
        arch_id = int(raw_id)
        if arch_id < 0:
            problems.append(f"line {ln}: negative arch_id {arch_id}")
        elif arch_id in seen_ids:
            problems.append(f"line {ln}: arch_id {arch_id} already used "
                            f"on line {seen_ids[arch_id]}")
        else:
            seen_ids[arch_id] = ln
    except ValueError:
        problems.append(f"line {ln}: arch_id {raw_id!r} is not an integer")
    if GENOTYPE_RE.fullmatch(genotype) is None:
        problems.append(f"line {ln}: malformed genotype {genotype!r}")
    elif genotype in seen_genotypes:
        problems.append(f"line {ln}: genotype duplicates line "
                        f"{seen_genotypes[genotype]}")
    else:
        seen_genotypes[genotype] = ln
    for name, text in (("val_acc", val), ("test_acc", test)):
        try:
            acc = float(text)
            if not math.isfinite(acc) or not 0.0 <= acc <= 100.0:
                problems.append(f"line {ln}: column {name} value {acc!r} "
                                f"outside [0, 100]")
        except ValueError:
            problems.append(f"line {ln}: column {name} value {text!r} "
                            f"is not a number")
    try:
        if int(params) < 0:
            problems.append(f"line {ln}: column params is negative")
    except ValueError:
        problems.append(f"line {ln}: column params value {params!r} "
                        f"is not an integer")
    return problems


def verify_schema(path) -> list[str]:
    """Re-read a CSV and validate the neutral-table contract.

    Returns a list of human-readable violations with line numbers; an
    empty list means the file is valid.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        return [f"unreadable: {exc}"]
    if lines and lines[-1] == "":
        lines.pop()

    violations: list[str] = []
    ln = 0
    for line in lines:
        if not line.startswith("#"):
            break
        ln += 1
        if "=" not in line:
            violations.append(f"line {ln}: metadata comment without "
                              f"key=value: {line!r}")
    body = lines[ln:]
    if not body:
        return violations + ["missing header line"]
    ln += 1
    if body[0] != HEADER:
        expected = HEADER.split(",")
        got = body[0].split(",")
        bad = [c for c in got if c not in expected] or got
        return violations + [f"line {ln}: bad header column(s) "
                             f"{', '.join(repr(c) for c in bad)}; expected "
                             f"{HEADER!r}"]
    seen_ids: dict[int, int] = {}
    seen_genotypes: dict[str, int] = {}
    for row in body[1:]:
        ln += 1
        violations.extend(_check_row(row.split(","), ln, seen_ids,
                                     seen_genotypes))
    return violations
