"""Benchmark-archive exporter: neutral accuracy CSVs plus offline schema
verification."""

from .exporter import (
    ARCHIVE_FORMAT,
    ARCHIVE_ROWS,
    DATASETS,
    EPOCH_POLICY,
    GENOTYPE_RE,
    HEADER,
    BenchExportError,
    ExportSpec,
    export,
    load_archive,
    verify_schema,
)

__version__ = "0.1.0"

__all__ = [
    "ARCHIVE_FORMAT",
    "ARCHIVE_ROWS",
    "DATASETS",
    "EPOCH_POLICY",
    "GENOTYPE_RE",
    "HEADER",
    "BenchExportError",
    "ExportSpec",
    "export",
    "load_archive",
    "verify_schema",
    "__version__",
]
