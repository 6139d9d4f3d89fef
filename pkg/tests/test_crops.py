import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

import oracle
from capsearch.crops import (
    CropRect,
    GridSpec,
    PATTERN_CROPS17,
    PATTERN_CROPS40,
    PATTERN_NONE,
    crop_image,
    custom_pattern,
    generate_crops,
    pattern_by_name,
)

dims = st.integers(min_value=6, max_value=4096)


def test_pattern_counts_fixed():
    assert PATTERN_NONE.count() == 0
    assert PATTERN_CROPS17.count() == 17
    assert PATTERN_CROPS40.count() == 40


def test_none_pattern_yields_nothing():
    assert generate_crops(100, 100, PATTERN_NONE) == []


def test_crops17_on_100x100():
    rects = generate_crops(100, 100, PATTERN_CROPS17)
    assert len(rects) == 17
    # order: vertical halves, horizontal halves, 2x2 row-major, 3x3 row-major
    assert rects[0] == CropRect(0, 0, 50, 100)
    assert rects[1] == CropRect(50, 0, 50, 100)
    assert rects[2] == CropRect(0, 0, 100, 50)
    assert rects[3] == CropRect(0, 50, 100, 50)
    assert rects[4:8] == [
        CropRect(0, 0, 50, 50),
        CropRect(50, 0, 50, 50),
        CropRect(0, 50, 50, 50),
        CropRect(50, 50, 50, 50),
    ]


def test_crops17_on_99x99_floor_partition():
    rects = generate_crops(99, 99, PATTERN_CROPS17)
    grid2 = rects[4:8]
    grid3 = rects[8:17]
    assert sorted({r.w for r in grid2}) == [49, 50]
    assert {r.w for r in grid3} == {33}
    oracle.check_exact_partition(grid2, 99, 99)
    oracle.check_exact_partition(grid3, 99, 99)


def test_crops40_overlap_windows():
    rects = generate_crops(100, 100, PATTERN_CROPS40)
    assert len(rects) == 40
    assert rects[:17] == generate_crops(100, 100, PATTERN_CROPS17)
    # the single added vertical strip is centered
    assert rects[17] == CropRect(25, 0, 50, 100)
    assert rects[18] == CropRect(0, 25, 100, 50)
    # five half-size windows: all but the four quadrant-aligned positions
    half_windows = rects[19:24]
    assert half_windows == [
        CropRect(25, 0, 50, 50),
        CropRect(0, 25, 50, 50),
        CropRect(25, 25, 50, 50),
        CropRect(50, 25, 50, 50),
        CropRect(25, 50, 50, 50),
    ]
    # sixteen third-size windows at sixth strides
    assert len(rects[24:]) == 16
    assert all(r.w in (33, 34) and r.h in (33, 34) for r in rects[24:])


def test_determinism():
    assert generate_crops(640, 480, PATTERN_CROPS40) == generate_crops(640, 480, PATTERN_CROPS40)


def test_too_small_image_names_pattern():
    with pytest.raises(ValueError, match="crops40"):
        generate_crops(5, 100, PATTERN_CROPS40)
    with pytest.raises(ValueError, match="crops17"):
        generate_crops(100, 2, PATTERN_CROPS17)


def test_custom_pattern_from_grid_specs():
    pattern = custom_pattern("demo", [(2, 2, "none"), (2, 2, "half")])
    assert pattern.count() == 9
    rects = generate_crops(80, 80, pattern)
    assert len(rects) == 9
    oracle.check_exact_partition(rects[:4], 80, 80)


def test_pattern_by_name():
    assert pattern_by_name("crops17") is PATTERN_CROPS17
    with pytest.raises(ValueError):
        pattern_by_name("crops99")


def test_load_pattern_file(tmp_path):
    from capsearch.crops import load_pattern_file

    path = tmp_path / "patterns.json"
    path.write_text('{"wide": [[1, 4, "none"], [1, 4, "half"]]}')
    patterns = load_pattern_file(path)
    assert patterns["wide"].count() == 4 + (7 - 4)
    rects = generate_crops(64, 64, patterns["wide"])
    assert len(rects) == 7
    oracle.check_exact_partition(rects[:4], 64, 64)


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(0, 2)
    with pytest.raises(ValueError):
        GridSpec(2, 2, "quarter")


@settings(max_examples=120)
@given(dims, dims)
def test_partition_property(width, height):
    for pattern in (PATTERN_CROPS17, PATTERN_CROPS40):
        rects = generate_crops(width, height, pattern)
        assert len(rects) == pattern.count()
        offset = 0
        for spec in pattern.grids:
            group = rects[offset : offset + spec.count()]
            offset += spec.count()
            if spec.overlap == "none":
                oracle.check_exact_partition(group, width, height)
            else:
                for r in group:
                    assert 0 <= r.x and r.x + r.w <= width
                    assert 0 <= r.y and r.y + r.h <= height


# -- pixel cropping -----------------------------------------------------------


def test_full_frame_crop_is_identity():
    img = Image.new("RGB", (8, 6), (10, 20, 30))
    out = crop_image(img, CropRect(0, 0, 8, 6))
    assert out.size == (8, 6)
    assert out.tobytes() == img.tobytes()


def test_single_pixel_crop():
    img = Image.new("RGB", (4, 4))
    img.putpixel((0, 0), (255, 0, 0))
    out = crop_image(img, CropRect(0, 0, 1, 1))
    assert out.size == (1, 1)
    assert out.getpixel((0, 0)) == (255, 0, 0)


def test_checkerboard_quadrants():
    img = Image.new("RGB", (2, 2))
    colors = {(0, 0): (255, 0, 0), (1, 0): (0, 255, 0), (0, 1): (0, 0, 255), (1, 1): (255, 255, 0)}
    for xy, color in colors.items():
        img.putpixel(xy, color)
    for rect in generate_crops(2, 2, custom_pattern("q", [(2, 2, "none")])):
        tile = crop_image(img, rect)
        assert tile.size == (1, 1)
        assert tile.getpixel((0, 0)) == colors[(rect.x, rect.y)]


def test_out_of_bounds_crop_rejected():
    img = Image.new("RGB", (4, 4))
    with pytest.raises(ValueError):
        crop_image(img, CropRect(2, 2, 3, 3))


def test_croprect_validation():
    with pytest.raises(ValueError):
        CropRect(0, 0, 0, 5)
    with pytest.raises(ValueError):
        CropRect(-1, 0, 5, 5)
