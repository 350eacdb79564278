"""Shared session fixtures for the primary suite.

The independent float64 reference implementation lives in refimpl.py (a
uniquely named module, so it never collides with other suites' conftest
modules on the import path).
"""

from __future__ import annotations

import pytest

from epsinas import SkeletonConfig
from epsinas.data import BatchSpec, make_batch


@pytest.fixture(scope="session")
def desk_cfg():
    """The default desk-scale skeleton (one cell per stack, 32x32 RGB)."""
    return SkeletonConfig()


@pytest.fixture(scope="session")
def tiny_cfg():
    """A small skeleton for fast full-network comparisons."""
    return SkeletonConfig(stem_channels=4, num_classes=5,
                          input_shape=(3, 16, 16))


@pytest.fixture(scope="session")
def tiny_batch():
    return make_batch(BatchSpec("random_normal", 8, (3, 16, 16), seed=11))


@pytest.fixture(scope="session")
def grey_batch():
    """The standard scoring batch: greyscale ramp, 256 images at 32x32."""
    return make_batch(BatchSpec("greyscale", 256, (3, 32, 32)))
