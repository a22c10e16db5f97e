"""Tests for the counter-based deterministic random streams."""

import numpy as np
import pytest

from mdda.rng import RngState, parse_seed


def test_same_seed_same_stream():
    a = RngState(1234)
    b = RngState(1234)
    np.testing.assert_array_equal(a.next_uint64(100), b.next_uint64(100))
    np.testing.assert_array_equal(a.uniform(100), b.uniform(100))
    np.testing.assert_array_equal(a.normal(101), b.normal(101))


def test_different_seeds_differ():
    assert not np.array_equal(RngState(1).next_uint64(8), RngState(2).next_uint64(8))


def test_counter_blocks_concatenate():
    whole = RngState(7).next_uint64(16)
    split = RngState(7)
    parts = np.concatenate([split.next_uint64(3), split.next_uint64(5), split.next_uint64(8)])
    np.testing.assert_array_equal(whole, parts)


def test_stream_resumable_from_counter():
    a = RngState(9)
    a.next_uint64(10)
    resumed = RngState(9, counter=10)
    np.testing.assert_array_equal(a.next_uint64(4), resumed.next_uint64(4))


def test_child_streams_are_label_dependent():
    root = RngState(42)
    one = root.child(1).next_uint64(8)
    two = root.child(2).next_uint64(8)
    named = root.child("scale", 1).next_uint64(8)
    assert not np.array_equal(one, two)
    assert not np.array_equal(one, named)
    np.testing.assert_array_equal(one, RngState(42).child(1).next_uint64(8))


def test_child_unaffected_by_parent_consumption():
    a = RngState(5)
    before = a.child("x").next_uint64(6)
    a.next_uint64(100)
    after = a.child("x").next_uint64(6)
    np.testing.assert_array_equal(before, after)


def test_uniform_range():
    u = RngState(3).uniform(10000)
    assert np.all(u >= 0.0) and np.all(u < 1.0)


def test_normal_is_finite_and_roughly_standard():
    x = RngState(4).normal(100000)
    assert np.all(np.isfinite(x))
    assert abs(x.mean()) < 0.02
    assert abs(x.var() - 1.0) < 0.05


def test_permutation_is_valid_and_deterministic():
    p = RngState(6).permutation(50)
    assert sorted(p.tolist()) == list(range(50))
    np.testing.assert_array_equal(p, RngState(6).permutation(50))
    assert RngState(6).permutation(0).size == 0
    np.testing.assert_array_equal(RngState(6).permutation(1), [0])


def test_parse_seed_decimal_and_hex():
    assert parse_seed("123") == 123
    assert parse_seed("0xff") == 255
    assert parse_seed("0XDEADBEEF") == 0xDEADBEEF
    assert parse_seed(" 7 ") == 7


def test_parse_seed_rejects_bad_input():
    for bad in ("abc", "", "-1", str(1 << 64), "0x" + "f" * 17):
        with pytest.raises(ValueError):
            parse_seed(bad)
