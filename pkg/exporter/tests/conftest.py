"""Synthetic full-size archive fixtures for the exporter tests."""

import itertools
import pickle

import pytest

pytest.importorskip("bench_export")

OPS = ("none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3")


def genotype_text(ops) -> str:
    return "|{0}~0|+|{1}~0|{2}~1|+|{3}~0|{4}~1|{5}~2|".format(*ops)


@pytest.fixture(scope="session")
def archive_doc():
    """A full 15,625-architecture archive with two datasets and three
    seeds per accuracy, all values deterministic."""
    archs = [genotype_text(ops) for ops in itertools.product(OPS, repeat=6)]
    val, test, params = [], [], []
    for i in range(len(archs)):
        b = 30.0 + (i * 37 % 6000) / 100.0
        t = 25.0 + (i * 53 % 6500) / 100.0
        val.append([b - 0.3, b, b + 0.3])
        test.append([t - 0.2, t, t + 0.2])
        params.append(7000 + i % 1000)
    return {
        "format": "nb201-lite-v1",
        "archs": archs,
        "datasets": {
            "cifar10": {"val": val, "test": test, "params": params,
                        "val_split": "x-valid"},
            "cifar100": {"val": [[v - 2.0 for v in row] for row in val],
                         "test": [[v - 2.0 for v in row] for row in test],
                         "params": params,
                         "val_split": "x-valid+x-test"},
        },
    }


@pytest.fixture(scope="session")
def archive_path(archive_doc, tmp_path_factory):
    path = tmp_path_factory.mktemp("archive") / "bench.pkl"
    with open(path, "wb") as fh:
        pickle.dump(archive_doc, fh)
    return str(path)


@pytest.fixture()
def mutated_archive(archive_doc, tmp_path):
    """Writes a shallow-mutated copy of the archive and returns its path."""
    def _write(**changes):
        doc = dict(archive_doc)
        doc.update(changes)
        path = tmp_path / "mutated.pkl"
        with open(path, "wb") as fh:
            pickle.dump(doc, fh)
        return str(path)
    return _write
