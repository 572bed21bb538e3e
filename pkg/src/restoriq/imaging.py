"""Pixel arrays, luma conversion, and the exact patch-latent codec.

Images are float32 HxWx3 arrays in [0, 1]. The latent codec flattens
non-overlapping PxP patches into 3*P*P vectors mapped affinely to [-1, 1].
The affine is computed in float64 so that decode(encode(x)) is bit-exact
for every float32 pixel value the pipeline can produce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from restoriq.errors import ImagingError

DEFAULT_PATCH_SIZE = 4


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check an image array and return it as float32."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImagingError(f"expected HxWx3 image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImagingError(f"empty image: shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ImagingError("image contains non-finite pixels")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ImagingError(
            f"pixel values outside [0, 1]: min={arr.min()}, max={arr.max()}"
        )
    return arr.astype(np.float32, copy=False)


def rgb_to_y(img: np.ndarray) -> np.ndarray:
    """Full-range BT.601 luma: 0.299 R + 0.587 G + 0.114 B, as float64."""
    arr = validate_image(img).astype(np.float64)
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    # grey-preserving arrangement: constant-grey images map to themselves exactly
    return r + (g - r) * 0.587 + (b - r) * 0.114


def quantize_8bit(img: np.ndarray) -> np.ndarray:
    """Snap pixels to the k/255 grid, matching a PNG write/read round trip."""
    arr = validate_image(img)
    k = np.clip(np.rint(arr.astype(np.float64) * 255.0), 0, 255)
    return (k.astype(np.float32) / np.float32(255.0)).astype(np.float32)


@dataclass
class LatentGrid:
    """(H/P)x(W/P) grid of flattened patch vectors of length 3*P*P."""

    tokens: np.ndarray  # float64, shape (H/P, W/P, 3*P*P)
    patch_size: int

    @property
    def vector_length(self) -> int:
        return 3 * self.patch_size * self.patch_size

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.tokens.shape[0], self.tokens.shape[1]

    def validate(self) -> None:
        if self.tokens.ndim != 3 or self.tokens.shape[2] != self.vector_length:
            raise ImagingError(
                f"latent vectors have length {self.tokens.shape[-1]}, "
                f"expected {self.vector_length} for patch size {self.patch_size}"
            )


def encode(img: np.ndarray, patch_size: int = DEFAULT_PATCH_SIZE) -> LatentGrid:
    """Patchify an image into latent vectors mapped to [-1, 1]."""
    arr = validate_image(img)
    h, w, _ = arr.shape
    p = patch_size
    if h % p != 0:
        raise ImagingError(f"height {h} not divisible by patch size {p}")
    if w % p != 0:
        raise ImagingError(f"width {w} not divisible by patch size {p}")
    patches = arr.reshape(h // p, p, w // p, p, 3).transpose(0, 2, 1, 3, 4)
    flat = patches.reshape(h // p, w // p, 3 * p * p).astype(np.float64)
    return LatentGrid(tokens=2.0 * flat - 1.0, patch_size=p)


def decode(lat: LatentGrid, clamp: bool = False) -> np.ndarray:
    """Invert :func:`encode`. ``clamp`` is for latents arriving from sampling."""
    lat.validate()
    p = lat.patch_size
    hp, wp = lat.grid_shape
    flat = (np.asarray(lat.tokens, dtype=np.float64) + 1.0) / 2.0
    if clamp:
        flat = np.clip(flat, 0.0, 1.0)
    patches = flat.reshape(hp, wp, p, p, 3).transpose(0, 2, 1, 3, 4)
    return patches.reshape(hp * p, wp * p, 3).astype(np.float32)


def latents_to_image(
    tokens: np.ndarray,
    patch_size: int,
    grid_shape: tuple[int, int],
    clamp: bool = True,
) -> np.ndarray:
    """Decode a flat (N, 3*P*P) token matrix laid out row-major on the grid."""
    n, dim = tokens.shape
    if dim != 3 * patch_size * patch_size:
        raise ImagingError(
            f"latent vectors have length {dim}, expected {3 * patch_size * patch_size}"
        )
    hp, wp = grid_shape
    if hp * wp != n:
        raise ImagingError(f"{n} latent tokens do not fill a {hp}x{wp} grid")
    grid = LatentGrid(
        tokens=np.asarray(tokens, dtype=np.float64).reshape(hp, wp, dim),
        patch_size=patch_size,
    )
    return decode(grid, clamp=clamp)


def load_png(path) -> np.ndarray:
    """Read an 8-bit PNG as a float32 image; values are k/255 exactly."""
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return arr.astype(np.float32) / np.float32(255.0)


def save_png(img: np.ndarray, path) -> None:
    arr = validate_image(img)
    k = np.clip(np.rint(arr.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    PILImage.fromarray(k, mode="RGB").save(path, format="PNG")
