import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazetrack.errors import ImageTooSmall, NonDivisibleDimensions
from gazetrack.imgproc import (BinaryImage, GrayImage, connected_components,
                               downsample, isodata_threshold, load_image,
                               save_image, segment, sobel)
from oracles import isodata_fixed_points


def gray(rows) -> GrayImage:
    return GrayImage(np.array(rows, dtype=np.uint8))


class TestGrayImage:
    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            GrayImage(np.zeros((4, 4, 3), dtype=np.uint8))

    def test_rejects_float_dtype(self):
        with pytest.raises(ValueError):
            GrayImage(np.zeros((4, 4), dtype=np.float32))

    def test_rejects_out_of_range_ints(self):
        with pytest.raises(ValueError):
            GrayImage(np.full((2, 2), 300, dtype=np.int32))

    def test_from_array_rounds_and_clips(self):
        img = GrayImage.from_array(np.array([[-3.0, 12.4, 12.6, 300.0]]))
        assert img.pixels.tolist() == [[0, 12, 13, 255]]

    def test_pixels_are_write_locked(self):
        img = gray([[1, 2], [3, 4]])
        with pytest.raises((ValueError, RuntimeError)):
            img.pixels[0, 0] = 9

    def test_width_height(self):
        img = gray(np.zeros((4, 6)))
        assert (img.width, img.height) == (6, 4)


class TestDownsample:
    def test_two_by_two_block_mean(self):
        img = gray([[100, 150], [120, 140]])
        out = downsample(img, 2)
        # (100+150+120+140)/4 = 127.5 rounds half up
        assert out.pixels.tolist() == [[128]]

    def test_factor_one_is_identity(self):
        img = gray([[1, 2], [3, 4]])
        assert downsample(img, 1) is img

    def test_non_divisible_raises(self):
        with pytest.raises(NonDivisibleDimensions):
            downsample(gray(np.zeros((5, 8))), 2)

    def test_output_shape(self):
        out = downsample(gray(np.zeros((480, 640))), 8)
        assert (out.height, out.width) == (60, 80)

    @given(st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_block_means_within_half_gray_level(self, seed):
        rng = np.random.default_rng(seed)
        arr = rng.integers(0, 256, (16, 24), dtype=np.uint8)
        out = downsample(GrayImage(arr), 4)
        ref = arr.reshape(4, 4, 6, 4).mean(axis=(1, 3))
        assert np.abs(out.pixels.astype(float) - ref).max() <= 0.5


class TestIsodata:
    def test_two_level_histogram(self):
        arr = np.array([[50] * 8, [200] * 8], dtype=np.uint8)
        assert isodata_threshold(GrayImage(arr)) == 125.0

    def test_uniform_image_returns_its_level(self):
        assert isodata_threshold(gray(np.full((4, 4), 100))) == 100.0

    def test_threshold_between_extremes(self):
        rng = np.random.default_rng(3)
        arr = rng.integers(10, 240, (32, 32)).astype(np.uint8)
        t = isodata_threshold(GrayImage(arr))
        assert arr.min() <= t <= arr.max()

    @given(st.integers(0, 10_000))
    @settings(max_examples=100, deadline=None)
    def test_matches_exhaustive_fixed_point_search(self, seed):
        rng = np.random.default_rng(seed)
        arr = rng.integers(0, 256, (24, 32)).astype(np.uint8)
        t = isodata_threshold(GrayImage(arr))
        assert int(t) in isodata_fixed_points(arr)


class TestSegment:
    def test_at_or_below_threshold_is_foreground(self):
        img = gray([[99, 100, 101]])
        mask = segment(img, 100).mask
        assert mask.tolist() == [[True, True, False]]

    def test_threshold_bounds(self):
        img = gray([[0]])
        with pytest.raises(ValueError):
            segment(img, -1)
        with pytest.raises(ValueError):
            segment(img, 256)

    def test_foreground_grows_with_threshold(self):
        rng = np.random.default_rng(0)
        img = GrayImage(rng.integers(0, 256, (16, 16)).astype(np.uint8))
        counts = [segment(img, t).mask.sum() for t in (40, 120, 220)]
        assert counts == sorted(counts)


class TestConnectedComponents:
    def test_empty_mask(self):
        assert connected_components(BinaryImage(np.zeros((4, 4), bool))) == []

    def test_two_regions_sorted_by_size(self):
        mask = np.zeros((10, 10), bool)
        mask[1:3, 1:3] = True     # 4 px
        mask[5:9, 5:9] = True     # 16 px
        regions = connected_components(BinaryImage(mask))
        assert [r.pixel_count for r in regions] == [16, 4]
        assert regions[0].bounding_box == (5, 5, 8, 8)
        assert regions[1].centroid == (1.5, 1.5)

    def test_diagonal_pixels_join(self):
        mask = np.eye(5, dtype=bool)
        regions = connected_components(BinaryImage(mask))
        assert len(regions) == 1 and regions[0].pixel_count == 5

    def test_size_tie_breaks_on_position(self):
        mask = np.zeros((8, 8), bool)
        mask[5, 0:2] = True   # lower-left pair
        mask[0, 4:6] = True   # upper-right pair
        regions = connected_components(BinaryImage(mask))
        assert regions[0].bounding_box[1] == 0  # smaller y_min first

    @given(st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_labels_partition_the_mask(self, seed):
        rng = np.random.default_rng(seed)
        mask = rng.random((12, 12)) < 0.35
        regions = connected_components(BinaryImage(mask))
        assert sum(r.pixel_count for r in regions) == int(mask.sum())


class TestSobel:
    def test_flat_image_has_zero_gradient(self):
        g = sobel(gray(np.full((5, 5), 77)))
        assert g.magnitude.max() == 0

    def test_vertical_step_max_response(self):
        arr = np.zeros((5, 6), np.uint8)
        arr[:, 3:] = 255
        g = sobel(GrayImage(arr))
        # 3x3 kernel weights sum to 4 on each side of the step
        assert g.gx.max() == 4 * 255
        assert g.gx.min() >= 0
        assert np.all(g.gy[1:-1, 1:-1] == 0)

    def test_horizontal_step_signs(self):
        arr = np.zeros((6, 5), np.uint8)
        arr[:3, :] = 255   # bright on top: intensity decreases downward
        g = sobel(GrayImage(arr))
        assert g.gy.min() == -4 * 255

    def test_borders_zero(self):
        rng = np.random.default_rng(1)
        g = sobel(GrayImage(rng.integers(0, 256, (6, 7)).astype(np.uint8)))
        assert np.all(g.magnitude[0] == 0) and np.all(g.magnitude[-1] == 0)
        assert np.all(g.magnitude[:, 0] == 0) and np.all(g.magnitude[:, -1] == 0)

    def test_intensity_offset_invariance(self):
        rng = np.random.default_rng(2)
        base = rng.integers(0, 100, (8, 8)).astype(np.uint8)
        g1 = sobel(GrayImage(base))
        g2 = sobel(GrayImage(base + 100))
        assert np.array_equal(g1.gx, g2.gx) and np.array_equal(g1.gy, g2.gy)

    def test_too_small(self):
        with pytest.raises(ImageTooSmall):
            sobel(gray(np.zeros((2, 5))))


class TestImageIO:
    def test_pgm_roundtrip(self, tmp_path):
        rng = np.random.default_rng(4)
        img = GrayImage(rng.integers(0, 256, (9, 13)).astype(np.uint8))
        p = tmp_path / "x.pgm"
        save_image(img, p)
        back = load_image(p)
        assert np.array_equal(back.pixels, img.pixels)

    def test_pgm_comments_skipped(self, tmp_path):
        p = tmp_path / "c.pgm"
        p.write_bytes(b"P5\n# a comment\n2 2\n255\n" + bytes([0, 64, 128, 255]))
        img = load_image(p)
        assert img.pixels.tolist() == [[0, 64], [128, 255]]

    def test_png_roundtrip(self, tmp_path):
        rng = np.random.default_rng(5)
        img = GrayImage(rng.integers(0, 256, (7, 11)).astype(np.uint8))
        p = tmp_path / "x.png"
        save_image(img, p)
        assert np.array_equal(load_image(p).pixels, img.pixels)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_image(tmp_path / "nope.pgm")
