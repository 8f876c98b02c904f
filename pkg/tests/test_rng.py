from __future__ import annotations

from mlcirc.rng import stream, substream


def test_streams_reproducible_and_independent():
    a = stream(7, "x").integers(0, 1 << 30, size=5).tolist()
    assert a == stream(7, "x").integers(0, 1 << 30, size=5).tolist()
    assert a != stream(7, "y").integers(0, 1 << 30, size=5).tolist()
    assert a != stream(8, "x").integers(0, 1 << 30, size=5).tolist()
    assert a != stream(7, "x", retry=1).integers(0, 1 << 30, size=5).tolist()
    assert substream(7, "x", 0).random() != substream(7, "x", 1).random()
