"""Dispersion-score tests: normalisation, the ratio statistic, status
bookkeeping, batch scoring and the CSV round trip.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from refimpl import sample_genotypes
from epsinas import (
    DegenerateConstantOutput,
    NonFiniteOutput,
    ShapeError,
    SkeletonConfig,
    WeightPair,
    arch_index,
    epsilon_from_outputs,
    epsilon_from_raw,
    minmax_normalize,
    read_scores_csv,
    score_architecture,
    score_architecture_random,
    score_space,
    write_scores_csv,
)
from epsinas.metric import (
    STATUS_DEGENERATE,
    STATUS_NONFINITE,
    STATUS_VALID,
    STATUSES,
    ScoreRow,
    ScoreTable,
    epsilon_from_normalized,
    normalized_output,
)
from epsinas.weights import InitScheme

TINY = SkeletonConfig(stem_channels=4, num_classes=5, input_shape=(3, 16, 16))


def _tiny_batch(n=8, seed=30):
    from epsinas.data import BatchSpec, make_batch
    return make_batch(BatchSpec("random_normal", n, (3, 16, 16), seed=seed))


# =========================================================================
# minmax_normalize.
# =========================================================================

def test_minmax_frozen_example():
    out = minmax_normalize(np.array([1.0, 2.0, 3.0, 5.0]))
    np.testing.assert_allclose(out, [0.0, 0.25, 0.5, 1.0], rtol=1e-6)
    assert out.min() == 0.0 and out.max() == 1.0


def test_minmax_flattens_matrices():
    out = minmax_normalize(np.array([[0.0, 2.0], [4.0, 8.0]]))
    np.testing.assert_allclose(out, [0.0, 0.25, 0.5, 1.0], rtol=1e-6)


def test_minmax_rejects_constant_vector():
    with pytest.raises(DegenerateConstantOutput):
        minmax_normalize(np.full(10, 3.25))


def test_minmax_rejects_non_finite():
    with pytest.raises(NonFiniteOutput):
        minmax_normalize(np.array([1.0, math.nan]))
    with pytest.raises(NonFiniteOutput):
        minmax_normalize(np.array([1.0, math.inf]))


def test_minmax_range_overflow_is_non_finite():
    # max - min overflows float32: 3e38 - (-3e38) = inf.
    with pytest.raises(NonFiniteOutput):
        minmax_normalize(np.array([-3e38, 0.0, 3e38], dtype=np.float32))


def test_minmax_rejects_empty():
    with pytest.raises(ShapeError):
        minmax_normalize(np.array([]))


# =========================================================================
# epsilon_from_outputs / epsilon_from_raw.
# =========================================================================

def test_epsilon_frozen_examples():
    r = epsilon_from_outputs(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert (r.delta, r.mu, r.epsilon) == (1.0, 0.5, 2.0)
    assert r.status == STATUS_VALID and r.valid

    r = epsilon_from_outputs(np.array([[0.0, 0.5, 1.0], [1.0, 0.5, 0.0]]))
    assert abs(r.epsilon - 4.0 / 3.0) < 1e-12


def test_epsilon_row_swap_symmetric():
    m = np.array([[0.0, 0.25, 1.0], [1.0, 0.75, 0.5]])
    assert epsilon_from_outputs(m).epsilon \
        == epsilon_from_outputs(m[::-1]).epsilon


def test_epsilon_identical_rows_is_zero():
    m = np.array([[0.0, 0.5, 1.0], [0.0, 0.5, 1.0]])
    r = epsilon_from_outputs(m)
    assert r.epsilon == 0.0 and r.status == STATUS_VALID


def test_epsilon_zero_mean_is_degenerate():
    r = epsilon_from_outputs(np.zeros((2, 4)))
    assert r.status == STATUS_DEGENERATE
    assert math.isnan(r.epsilon)


def test_epsilon_non_finite_matrix():
    r = epsilon_from_outputs(np.array([[0.0, math.nan], [0.0, 1.0]]))
    assert r.status == STATUS_NONFINITE
    assert math.isnan(r.epsilon) and not r.valid


def test_epsilon_shape_validation():
    with pytest.raises(ShapeError):
        epsilon_from_outputs(np.zeros((3, 4)))
    with pytest.raises(ShapeError):
        epsilon_from_outputs(np.zeros((2, 0)))


def test_epsilon_from_raw_affine_invariance():
    rng = np.random.default_rng(31)
    v1 = rng.standard_normal(64).astype(np.float32)
    v2 = rng.standard_normal(64).astype(np.float32)
    base = epsilon_from_raw(v1, v2)
    scaled = epsilon_from_raw(3.0 * v1 + 10.0, 0.5 * v2 - 2.0)
    assert base.status == scaled.status == STATUS_VALID
    assert abs(base.epsilon - scaled.epsilon) < 1e-4


def test_epsilon_from_raw_statuses():
    v = np.arange(8.0)
    assert epsilon_from_raw(v, np.full(8, 2.0)).status == STATUS_DEGENERATE
    assert epsilon_from_raw(v, np.full(8, math.nan)).status == STATUS_NONFINITE
    with pytest.raises(ShapeError):
        epsilon_from_raw(v, np.arange(7.0))


def test_epsilon_from_normalized_first_bad_status_wins():
    n, s = normalized_output(np.arange(4.0))
    assert s == STATUS_VALID
    r = epsilon_from_normalized(None, STATUS_NONFINITE, n, STATUS_VALID)
    assert r.status == STATUS_NONFINITE
    r = epsilon_from_normalized(n, STATUS_VALID, None, STATUS_DEGENERATE)
    assert r.status == STATUS_DEGENERATE
    with pytest.raises(ShapeError):
        epsilon_from_normalized(n, STATUS_VALID, n[:-1], STATUS_VALID)


def test_normalized_output_status_mapping():
    n, s = normalized_output(np.full(4, 1.0))
    assert n is None and s == STATUS_DEGENERATE
    n, s = normalized_output(np.array([0.0, math.inf]))
    assert n is None and s == STATUS_NONFINITE


# =========================================================================
# score_architecture.
# =========================================================================

def test_score_architecture_runs_and_is_deterministic():
    g = sample_genotypes(1, seed=32)[0]
    batch = _tiny_batch()
    a = score_architecture(g, TINY, batch, WeightPair(0.1, 1.0))
    b = score_architecture(g, TINY, batch, WeightPair(0.1, 1.0))
    assert a.status in STATUSES
    assert a == b
    if a.valid:
        assert math.isfinite(a.epsilon) and a.epsilon >= 0.0
    else:
        assert math.isnan(a.epsilon)


def test_score_architecture_equal_weights_zero_or_nan():
    batch = _tiny_batch()
    for g in sample_genotypes(6, seed=33):
        r = score_architecture(g, TINY, batch, WeightPair(1.0, 1.0))
        assert r.epsilon == 0.0 or math.isnan(r.epsilon)


def test_score_architecture_weight_order_symmetric():
    batch = _tiny_batch()
    for g in sample_genotypes(4, seed=34):
        a = score_architecture(g, TINY, batch, WeightPair(0.1, 1.0))
        b = score_architecture(g, TINY, batch, WeightPair(1.0, 0.1))
        assert (a.epsilon == b.epsilon) or \
            (math.isnan(a.epsilon) and math.isnan(b.epsilon))
        assert a.status == b.status


def test_score_architecture_batch_validation():
    g = sample_genotypes(1, seed=35)[0]
    with pytest.raises(ShapeError):
        score_architecture(g, TINY, np.zeros((4, 3, 8, 8)),
                           WeightPair(0.1, 1.0))
    with pytest.raises(ShapeError):
        score_architecture(g, TINY, np.zeros((0, 3, 16, 16)),
                           WeightPair(0.1, 1.0))


def test_score_architecture_random_init_mode():
    g = sample_genotypes(1, seed=36)[0]
    batch = _tiny_batch()
    scheme = InitScheme("kaiming_normal")
    a = score_architecture_random(g, TINY, batch, scheme, 1, 2)
    b = score_architecture_random(g, TINY, batch, scheme, 1, 2)
    assert a == b
    same = score_architecture_random(g, TINY, batch, scheme, 3, 3)
    assert same.epsilon == 0.0 or math.isnan(same.epsilon)


# =========================================================================
# score_space.
# =========================================================================

def test_score_space_preserves_input_order():
    gs = sample_genotypes(6, seed=37)
    table = score_space(gs, TINY, _tiny_batch(), WeightPair(0.1, 1.0))
    assert len(table) == 6
    for g, row in zip(gs, table.rows):
        assert row.arch_id == arch_index(g)
        assert row.genotype == str(g)


def test_score_space_parallel_matches_serial():
    gs = sample_genotypes(8, seed=38)
    batch = _tiny_batch()
    serial = score_space(gs, TINY, batch, WeightPair(0.1, 1.0), parallelism=1)
    threads = score_space(gs, TINY, batch, WeightPair(0.1, 1.0), parallelism=3)
    for a, b in zip(serial.rows, threads.rows):
        assert a.arch_id == b.arch_id and a.status == b.status
        assert (a.epsilon == b.epsilon) or \
            (math.isnan(a.epsilon) and math.isnan(b.epsilon))


def test_score_space_rejects_bad_parallelism():
    with pytest.raises(ValueError):
        score_space([], TINY, _tiny_batch(), WeightPair(0.1, 1.0),
                    parallelism=0)


def test_score_table_nan_count():
    rows = [ScoreRow(0, "g0", 0.5, STATUS_VALID),
            ScoreRow(1, "g1", math.nan, STATUS_DEGENERATE),
            ScoreRow(2, "g2", math.nan, STATUS_NONFINITE)]
    assert ScoreTable(rows).nan_count == 2


# =========================================================================
# Score CSV round trip.
# =========================================================================

def test_scores_csv_roundtrip(tmp_path):
    rows = [ScoreRow(3, "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|",
                     0.125, STATUS_VALID),
            ScoreRow(7, "|skip_connect~0|+|none~0|none~1|+"
                        "|none~0|none~1|none~2|", math.nan, STATUS_NONFINITE)]
    path = tmp_path / "scores.csv"
    write_scores_csv(ScoreTable(rows), path)
    text = path.read_text()
    assert text.splitlines()[0] == "arch_id,genotype,epsilon,status"
    assert ",nonfinite_output" in text
    back = read_scores_csv(path)
    assert len(back) == 2
    assert back.rows[0] == rows[0]
    assert back.rows[1].arch_id == 7
    assert math.isnan(back.rows[1].epsilon)
    assert back.rows[1].status == STATUS_NONFINITE


def test_scores_csv_float_roundtrip_exact(tmp_path):
    eps = float(np.float32(1.0) / np.float32(3.0))
    rows = [ScoreRow(0, "g", eps, STATUS_VALID)]
    path = tmp_path / "s.csv"
    write_scores_csv(ScoreTable(rows), path)
    assert read_scores_csv(path).rows[0].epsilon == eps


def test_scores_csv_rejects_malformed(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("arch,genotype,epsilon,status\n")
    with pytest.raises(ValueError):
        read_scores_csv(path)
    path.write_text("arch_id,genotype,epsilon,status\n1,g,0.5\n")
    with pytest.raises(ValueError):
        read_scores_csv(path)
    path.write_text("arch_id,genotype,epsilon,status\n1,g,0.5,ok\n")
    with pytest.raises(ValueError) as err:
        read_scores_csv(path)
    assert "status" in str(err.value)
