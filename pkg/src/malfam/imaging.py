"""Binary-to-image conversion and corpus-normalized resizing.

A binary renders three ways: one byte per grayscale pixel, or a three-byte
sliding window per RGB pixel with step one (overlapping) or step three
(non-overlapping).  Image width is a banded function of file size; the last
row is padded with zero pixels.  Corpus-wide square sides come from the
floor/floor/ceil of the square roots of the minimum, median, and maximum
per-image pixel counts, giving compressed, median, and expanded variants.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import (EmptyFileError, InvalidParamsError, NotNormalizedError,
                     WindowTooShortError)

GRAYSCALE = "grayscale"
RGB_OVERLAP = "rgb_overlap"
RGB_NONOVERLAP = "rgb_nonoverlap"
MODES = (GRAYSCALE, RGB_OVERLAP, RGB_NONOVERLAP)

COMPRESSED = "compressed"
MEDIAN = "median"
EXPANDED = "expanded"
NORMALIZATIONS = (COMPRESSED, MEDIAN, EXPANDED)

_KB = 1024
# (upper size bound exclusive, width); bands are lower-inclusive.
_WIDTH_BANDS = (
    (10 * _KB, 32),
    (30 * _KB, 64),
    (60 * _KB, 128),
    (100 * _KB, 256),
    (200 * _KB, 384),
    (500 * _KB, 512),
    (1000 * _KB, 768),
)
_WIDTH_MAX = 1024


@dataclass(eq=False)
class MalwareImage:
    """Pixel grid plus how it was generated.

    ``pixels`` is row-major uint8: (height, width) for grayscale and
    (height, width, 3) for the RGB modes.  ``pad_count`` records how many
    zero pixels were appended to complete the final row.
    """

    mode: str
    pixels: np.ndarray
    pad_count: int = 0

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


def width_for_size(file_size):
    """Banded image width for a binary of ``file_size`` bytes."""
    if file_size < 1:
        raise EmptyFileError(f"file size must be >= 1 byte, got {file_size}")
    for bound, width in _WIDTH_BANDS:
        if file_size < bound:
            return width
    return _WIDTH_MAX


def grayscale_image(data):
    """One byte -> one pixel, zero-padded to fill the last row."""
    if len(data) == 0:
        raise EmptyFileError("cannot image an empty byte sequence")
    width = width_for_size(len(data))
    height = math.ceil(len(data) / width)
    pad = width * height - len(data)
    flat = np.frombuffer(bytes(data), dtype=np.uint8)
    grid = np.concatenate([flat, np.zeros(pad, dtype=np.uint8)]).reshape(height, width)
    return MalwareImage(GRAYSCALE, grid, pad_count=pad)


def rgb_image(data, step):
    """Three-byte windows -> RGB pixels, with step 1 or 3.

    Step 1 slides one byte at a time and yields len - 2 pixels.  Step 3
    chunks the data, zero-padding a final partial trigram, and yields
    ceil(len / 3) pixels.  Width follows the file-size band; the final row
    is padded with zero pixels.
    """
    if step not in (1, 3):
        raise InvalidParamsError(f"step must be 1 or 3, got {step}")
    data = bytes(data)
    if len(data) == 0:
        raise EmptyFileError("cannot image an empty byte sequence")
    if step == 1 and len(data) < 3:
        raise WindowTooShortError(f"need >= 3 bytes for overlapping windows, got {len(data)}")
    flat = np.frombuffer(data, dtype=np.uint8)
    if step == 1:
        pixels = np.stack([flat[:-2], flat[1:-1], flat[2:]], axis=1)
        mode = RGB_OVERLAP
    else:
        n_pixels = math.ceil(len(flat) / 3)
        padded = np.concatenate([flat, np.zeros(n_pixels * 3 - len(flat), dtype=np.uint8)])
        pixels = padded.reshape(n_pixels, 3)
        mode = RGB_NONOVERLAP

    width = width_for_size(len(data))
    height = math.ceil(len(pixels) / width)
    pad = width * height - len(pixels)
    grid = np.concatenate([pixels, np.zeros((pad, 3), dtype=np.uint8)])
    return MalwareImage(mode, grid.reshape(height, width, 3), pad_count=pad)


def image_for_mode(data, mode):
    if mode == GRAYSCALE:
        return grayscale_image(data)
    if mode == RGB_OVERLAP:
        return rgb_image(data, step=1)
    if mode == RGB_NONOVERLAP:
        return rgb_image(data, step=3)
    raise InvalidParamsError(f"unknown image mode {mode!r}")


def pixel_count(img):
    return img.height * img.width


def _isqrt_ceil(n):
    root = math.isqrt(n)
    return root if root * root == n else root + 1


def normalized_side(pixel_counts, mode):
    """Square side length for one normalization of a pixel-count collection.

    compressed = floor(sqrt(min)), median = floor(sqrt(median)) with the
    even-count median taken as the mean of the two middle values, and
    expanded = ceil(sqrt(max)).
    """
    counts = sorted(int(c) for c in pixel_counts)
    if not counts:
        raise InvalidParamsError("pixel-count collection is empty")
    if counts[0] < 1:
        raise InvalidParamsError(f"pixel counts must be positive, got {counts[0]}")
    if mode == COMPRESSED:
        return math.isqrt(counts[0])
    if mode == EXPANDED:
        return _isqrt_ceil(counts[-1])
    if mode == MEDIAN:
        mid = len(counts) // 2
        if len(counts) % 2 == 1:
            return math.isqrt(counts[mid])
        mean = (counts[mid - 1] + counts[mid]) / 2
        return math.isqrt(int(mean)) if mean.is_integer() else math.floor(math.sqrt(mean))
    raise InvalidParamsError(f"unknown normalization {mode!r}")


def normalized_dims(pixel_counts_by_mode):
    """Per-mode compressed/median/expanded sides for a whole corpus."""
    return {mode: {norm: normalized_side(counts, norm) for norm in NORMALIZATIONS}
            for mode, counts in pixel_counts_by_mode.items()}


def save_dims(dims, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dims, fh, indent=2, sort_keys=True)


def load_dims(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def resize_nearest(img, side):
    """Nearest-neighbor resize to side x side.

    Output pixel (r, c) copies source pixel (floor(r*H/side), floor(c*W/side)).
    """
    if side < 1:
        raise InvalidParamsError(f"side must be >= 1, got {side}")
    rows = (np.arange(side) * img.height) // side
    cols = (np.arange(side) * img.width) // side
    return MalwareImage(img.mode, img.pixels[np.ix_(rows, cols)], pad_count=0)


def image_vector(img, expected_side=None):
    """Row-major flattening of a normalized (square) image.

    Grayscale yields side^2 values, RGB 3*side^2.  Raises when the image is
    not square or does not match the corpus side it is supposed to share.
    """
    if img.height != img.width:
        raise NotNormalizedError(f"image is {img.height}x{img.width}, not square")
    if expected_side is not None and img.height != expected_side:
        raise NotNormalizedError(
            f"image side {img.height} differs from corpus side {expected_side}")
    return img.pixels.reshape(-1).astype(np.int64)


def emit_image(img, path):
    """Write a lossless PNG: 8-bit grayscale or 8-bit/channel truecolor."""
    pil_mode = "L" if img.mode == GRAYSCALE else "RGB"
    Image.fromarray(img.pixels, mode=pil_mode).save(path, format="PNG")


def read_image(path, mode=None):
    """Read a PNG back into a MalwareImage; ``mode`` overrides the inferred one."""
    with Image.open(path) as pil:
        arr = np.asarray(pil)
    if mode is None:
        mode = GRAYSCALE if arr.ndim == 2 else RGB_NONOVERLAP
    return MalwareImage(mode, arr.astype(np.uint8))
