"""Tests for the named random-stream layout."""

import numpy as np
import pytest

from stragglersim import rng


def test_same_key_same_sequence():
    a = rng.stream(42, rng.DATA, 3).standard_normal(16)
    b = rng.stream(42, rng.DATA, 3).standard_normal(16)
    np.testing.assert_array_equal(a, b)


def test_purpose_separates_streams():
    a = rng.stream(42, rng.DATA).standard_normal(8)
    b = rng.stream(42, rng.EVAL).standard_normal(8)
    assert not np.array_equal(a, b)


def test_ids_separate_streams():
    a = rng.stream(42, rng.LATENCY, 0).standard_normal(8)
    b = rng.stream(42, rng.LATENCY, 1).standard_normal(8)
    assert not np.array_equal(a, b)


def test_seed_separates_streams():
    a = rng.stream(0, rng.COHORT).standard_normal(8)
    b = rng.stream(1, rng.COHORT).standard_normal(8)
    assert not np.array_equal(a, b)


def test_stream_values_are_stable():
    # Counter-based generator, so these values are pinned across platforms.
    # They guard the (seed, purpose, ids) -> spawn-key mapping against
    # accidental rearrangement.
    got = rng.stream(0, rng.INIT).standard_normal(3)
    np.testing.assert_allclose(
        got,
        [-0.8025458906390128, 0.45751928097784245, -0.31455873558038694],
        rtol=0,
        atol=0,
    )
    got = rng.stream(7, rng.LATENCY, 12).standard_normal(2)
    np.testing.assert_allclose(
        got,
        [0.07584785896103108, -0.8452811109365997],
        rtol=0,
        atol=0,
    )


def test_purpose_codes_are_distinct():
    codes = [
        rng.INIT,
        rng.DATA,
        rng.EVAL,
        rng.COHORT,
        rng.LATENCY,
        rng.SHUFFLE,
        rng.TEACHER,
        rng.TIME_LIMIT,
        rng.VERIFY,
    ]
    assert len(set(codes)) == len(codes)


def test_extra_ids_extend_the_key():
    base = rng.stream(5, rng.SHUFFLE, 2).standard_normal(4)
    deeper = rng.stream(5, rng.SHUFFLE, 2, 0).standard_normal(4)
    assert not np.array_equal(base, deeper)


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        rng.stream(-1, rng.INIT)
