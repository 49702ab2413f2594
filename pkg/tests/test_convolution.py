from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastcq.convolution import DirectConvolver, SampleBuffer, direct_convolution
from fastcq.weights import GNGF2, GeneratingFunction, convolution_weights


@settings(max_examples=60, deadline=None)
@given(
    window=st.integers(1, 12),
    count=st.integers(1, 40),
    data=st.data(),
)
def test_ring_buffer_weighted_sum(window, count, data):
    rng = np.random.default_rng(window * 100 + count)
    u = rng.standard_normal(count)
    ring = SampleBuffer((), window=window)
    for x in u:
        ring.append(x)
    first = data.draw(st.integers(max(0, count - window), count - 1))
    rev = rng.standard_normal(count - first)
    assert ring.weighted_sum(rev, first, count) == pytest.approx(
        float(np.dot(rev, u[first:])), rel=1e-12, abs=1e-12
    )
    assert ring[count - 1] == u[-1]


def test_ring_buffer_forgets_old_samples():
    ring = SampleBuffer((), window=3)
    for x in range(5):
        ring.append(float(x))
    with pytest.raises(IndexError):
        ring[1]
    with pytest.raises(IndexError):
        ring.weighted_sum(np.ones(2), 4, 6)


def test_growable_buffer_keeps_everything():
    buf = SampleBuffer((2,), capacity=1)
    for k in range(10):
        buf.append([k, -k])
    np.testing.assert_array_equal(buf[7], [7, -7])
    assert buf.nbytes >= 10 * 2 * 8


def test_direct_streaming_matches_batch():
    table = convolution_weights(GNGF2, 0.5, 0.2, 0.01, 300)
    u = np.sin(np.arange(301) * 0.1)
    conv = DirectConvolver(table)
    stream = np.array([conv.step(x) for x in u])
    np.testing.assert_allclose(stream, direct_convolution(table, u), rtol=1e-12, atol=1e-12)


def test_direct_vector_samples():
    table = convolution_weights(GNGF2, 0.7, 0.0, 0.05, 50)
    rng = np.random.default_rng(1)
    u = rng.standard_normal((51, 3))
    conv = DirectConvolver(table, shape=(3,))
    stream = np.array([conv.step(x) for x in u])
    for i in range(3):
        np.testing.assert_allclose(stream[:, i], direct_convolution(table, u[:, i]), atol=1e-12)


def test_order_zero_support_is_trimmed():
    # alpha = 1 with backward Euler: omega = (1, -1, 0, 0, ...)
    table = convolution_weights(GeneratingFunction.fbdf(1), 1.0, 0.0, 0.1, 100)
    conv = DirectConvolver(table)
    assert conv.support == 2
    u = np.arange(101.0) ** 2
    stream = np.array([conv.step(x) for x in u])
    np.testing.assert_allclose(stream[1:], (u[1:] - u[:-1]) / 0.1)


def test_direct_beyond_table():
    table = convolution_weights(GNGF2, 0.5, 0.0, 0.1, 3)
    conv = DirectConvolver(table)
    for _ in range(4):
        conv.step(1.0)
    with pytest.raises(IndexError):
        conv.memory()
