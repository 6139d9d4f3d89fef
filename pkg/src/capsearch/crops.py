"""Fixed-pattern crop geometry for key expansion, and pixel-exact cropping.

Patterns are built from grid specs. A plain (rows x cols) grid floor-partitions
the frame exactly; an overlapped grid adds same-sized windows shifted by half a
cell, skipping positions that coincide with the plain grid's cells.
"""

from __future__ import annotations

from dataclasses import dataclass

from PIL import Image


@dataclass(frozen=True)
class CropRect:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise ValueError(f"degenerate crop rect: {self}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"negative crop origin: {self}")

    def as_box(self) -> tuple[int, int, int, int]:
        """(left, upper, right, lower) pixel box."""
        return (self.x, self.y, self.x + self.w, self.y + self.h)


@dataclass(frozen=True)
class GridSpec:
    """rows x cols cells; ``overlap='half'`` yields only the half-shifted windows."""

    rows: int
    cols: int
    overlap: str = "none"

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1: {self}")
        if self.overlap not in ("none", "half"):
            raise ValueError(f"overlap must be 'none' or 'half': {self.overlap!r}")

    @property
    def min_width(self) -> int:
        return self.cols * (2 if self.overlap == "half" else 1)

    @property
    def min_height(self) -> int:
        return self.rows * (2 if self.overlap == "half" else 1)

    def count(self) -> int:
        if self.overlap == "none":
            return self.rows * self.cols
        # all half-stride positions minus the ones aligned with the plain grid
        return (2 * self.rows - 1) * (2 * self.cols - 1) - self.rows * self.cols


@dataclass(frozen=True)
class CropPattern:
    name: str
    grids: tuple[GridSpec, ...]

    def count(self) -> int:
        return sum(g.count() for g in self.grids)

    @property
    def min_width(self) -> int:
        return max((g.min_width for g in self.grids), default=1)

    @property
    def min_height(self) -> int:
        return max((g.min_height for g in self.grids), default=1)


_BASE_GRIDS = (
    GridSpec(1, 2),  # two vertical segments: left, right
    GridSpec(2, 1),  # two horizontal segments: top, bottom
    GridSpec(2, 2),
    GridSpec(3, 3),
)

PATTERN_NONE = CropPattern("none", ())
PATTERN_CROPS17 = CropPattern("crops17", _BASE_GRIDS)
PATTERN_CROPS40 = CropPattern(
    "crops40",
    _BASE_GRIDS + tuple(GridSpec(g.rows, g.cols, "half") for g in _BASE_GRIDS),
)

PATTERNS = {p.name: p for p in (PATTERN_NONE, PATTERN_CROPS17, PATTERN_CROPS40)}


def pattern_by_name(name: str) -> CropPattern:
    try:
        return PATTERNS[name]
    except KeyError:
        raise ValueError(f"unknown crop pattern: {name!r} (expected one of {sorted(PATTERNS)})") from None


def custom_pattern(name: str, specs: list[tuple[int, int, str]]) -> CropPattern:
    """Assemble a pattern from ``(rows, cols, overlap)`` triples."""
    return CropPattern(name, tuple(GridSpec(r, c, ov) for r, c, ov in specs))


def load_pattern_file(path) -> dict[str, CropPattern]:
    """Read custom patterns from JSON: {name: [[rows, cols, overlap], ...]}."""
    import json

    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: expected an object mapping pattern name to grid specs")
    patterns = {}
    for name, specs in raw.items():
        patterns[name] = custom_pattern(
            name, [(int(r), int(c), str(ov)) for r, c, ov in specs]
        )
    return patterns


def _grid_rects(width: int, height: int, spec: GridSpec) -> list[CropRect]:
    rows, cols = spec.rows, spec.cols
    if spec.overlap == "none":
        xs = [c * width // cols for c in range(cols + 1)]
        ys = [r * height // rows for r in range(rows + 1)]
        return [
            CropRect(xs[c], ys[r], xs[c + 1] - xs[c], ys[r + 1] - ys[r])
            for r in range(rows)
            for c in range(cols)
        ]
    # half-cell stride: window (i, j) spans two half-cells in each axis
    xs = [j * width // (2 * cols) for j in range(2 * cols + 1)]
    ys = [i * height // (2 * rows) for i in range(2 * rows + 1)]
    rects = []
    for i in range(2 * rows - 1):
        for j in range(2 * cols - 1):
            if i % 2 == 0 and j % 2 == 0:
                continue  # coincides with a plain grid cell
            rects.append(CropRect(xs[j], ys[i], xs[j + 2] - xs[j], ys[i + 2] - ys[i]))
    return rects


def generate_crops(width: int, height: int, pattern: CropPattern) -> list[CropRect]:
    """All crop rectangles of ``pattern`` for a width x height frame.

    Order is fixed: grids in pattern order, cells row-major within each grid.
    """
    if width < pattern.min_width or height < pattern.min_height:
        raise ValueError(
            f"image {width}x{height} too small for pattern {pattern.name!r} "
            f"(needs at least {pattern.min_width}x{pattern.min_height})"
        )
    rects: list[CropRect] = []
    for spec in pattern.grids:
        rects.extend(_grid_rects(width, height, spec))
    return rects


def crop_image(image: Image.Image, rect: CropRect) -> Image.Image:
    """Pixel-exact sub-rectangle of ``image``."""
    if rect.x + rect.w > image.width or rect.y + rect.h > image.height:
        raise ValueError(f"crop rect {rect} exceeds image bounds {image.width}x{image.height}")
    return image.crop(rect.as_box())
