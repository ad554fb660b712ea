import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lutharm.core import (
    DimensionError,
    VideoSample,
    as_frame,
    as_mask,
    foreground_pixels,
    foreground_ratio,
    stack_pairs,
)


class TestContainers:
    def test_frame_shape_is_checked(self):
        with pytest.raises(DimensionError):
            as_frame(np.zeros((4, 4)))

    def test_frame_is_read_only_copy(self):
        src = np.zeros((2, 2, 3))
        frame = as_frame(src)
        src[0, 0, 0] = 9
        assert frame[0, 0, 0] == 0
        with pytest.raises(ValueError):
            frame[0, 0, 0] = 1

    def test_mask_accepts_trailing_channel(self):
        mask = as_mask(np.ones((3, 4, 1)))
        assert mask.shape == (3, 4) and mask.dtype == bool

    def test_foreground_ratio(self):
        mask = np.zeros((4, 5), dtype=bool)
        mask[0, :3] = True
        assert foreground_ratio(mask) == pytest.approx(3 / 20)


class TestForegroundPixels:
    def test_empty_mask(self):
        assert foreground_pixels(np.zeros((3, 3, 3)), np.zeros((3, 3), bool)).shape == (0, 3)

    def test_all_true(self):
        frame = np.array([[(1, 2, 3), (4, 5, 6)]], dtype=float)
        np.testing.assert_array_equal(foreground_pixels(frame, np.ones((1, 2), bool)), [[1, 2, 3], [4, 5, 6]])

    def test_row_major_order(self):
        frame = np.arange(12, dtype=float).reshape(2, 2, 3)
        mask = np.array([[False, True], [True, False]])
        np.testing.assert_array_equal(foreground_pixels(frame, mask), [frame[0, 1], frame[1, 0]])

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            foreground_pixels(np.zeros((2, 2, 3)), np.zeros((3, 2), bool))

    @given(arrays(np.bool_, st.tuples(st.integers(1, 6), st.integers(1, 6))))
    def test_length_equals_foreground_count(self, mask):
        frame = np.zeros(mask.shape + (3,))
        assert foreground_pixels(frame, mask).shape[0] == np.count_nonzero(mask)


class TestVideoSample:
    def _frames(self, n, h=4, w=5):
        return [np.zeros((h, w, 3))] * n, [np.ones((h, w), bool)] * n

    def test_lengths_must_match(self):
        frames, masks = self._frames(3)
        with pytest.raises(ValueError, match="masks"):
            VideoSample("s", frames, masks[:2])

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            VideoSample("s", [], [])

    def test_flow_count(self):
        frames, masks = self._frames(3)
        VideoSample("s", frames, masks, flows=[np.zeros((4, 5, 2))] * 2)
        with pytest.raises(ValueError, match="flows"):
            VideoSample("s", frames, masks, flows=[np.zeros((4, 5, 2))] * 3)

    def test_size_mismatch(self):
        frames, masks = self._frames(2)
        masks[1] = np.ones((3, 5), bool)
        with pytest.raises(DimensionError):
            VideoSample("s", frames, masks)

    def test_accessors(self):
        frames, masks = self._frames(2)
        sample = VideoSample("s", frames, masks)
        assert len(sample) == 2
        assert sample.shape == (4, 5)
        assert sample.mean_foreground_ratio() == 1.0


def test_stack_pairs():
    a, b = stack_pairs([np.ones((2, 3)), np.zeros((1, 3))], [np.zeros((2, 3)), np.ones((1, 3))])
    assert a.shape == b.shape == (3, 3)
    empty, _ = stack_pairs([], [])
    assert empty.shape == (0, 3)
