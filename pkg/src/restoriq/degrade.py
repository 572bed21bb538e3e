"""Seeded synthetic degradation operators and pipelines.

Six operators (blur, noise, jpeg, lowlight, haze, rain) plus sequential
composition and a high-order pipeline with optional area downsampling.
Every operator is a pure function of (image, spec): identical spec and seed
give identical output bytes across processes. Parameter ranges below are
assumptions chosen for desk-scale training; they are not canonical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sp_fft
from scipy import ndimage

from restoriq.errors import DegradationError
from restoriq.imaging import validate_image

KINDS = ("blur", "noise", "jpeg", "lowlight", "haze", "rain")

# kind -> {param: (lo, hi)} inclusive valid ranges
PARAM_RANGES: dict[str, dict[str, tuple[float, float]]] = {
    "blur": {"sigma": (0.0, 5.0)},
    "noise": {"sigma": (0.0, 0.5)},
    "jpeg": {"quality": (1, 100)},
    "lowlight": {"gamma": (1.0, 3.0), "gain": (0.25, 1.0)},
    "haze": {"transmission": (0.0, 1.0), "airlight": (0.0, 1.0)},
    "rain": {"amount": (0.0, 1.0)},
}

# severity normalizers: parameter value at which severity saturates at 1
BLUR_SIGMA_MAX = 3.0
NOISE_SIGMA_MAX = 0.25


@dataclass
class DegradationSpec:
    """One degradation operator with parameters and its own RNG seed."""

    kind: str
    params: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise DegradationError(f"unknown degradation kind {self.kind!r}")
        schema = PARAM_RANGES[self.kind]
        for name in self.params:
            if name not in schema:
                raise DegradationError(
                    f"unknown parameter {name!r} for kind {self.kind!r}"
                )
        for name, (lo, hi) in schema.items():
            if name not in self.params:
                raise DegradationError(
                    f"missing parameter {name!r} for kind {self.kind!r}"
                )
            value = self.params[name]
            if not math.isfinite(value) or not lo <= value <= hi:
                raise DegradationError(
                    f"parameter {name!r}={value} out of range [{lo}, {hi}] "
                    f"for kind {self.kind!r}"
                )

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationSpec":
        return cls(kind=d["kind"], params=dict(d["params"]), seed=int(d["seed"]))


@dataclass
class PipelineSpec:
    """Ordered degradation stages followed by area downsampling."""

    stages: list[DegradationSpec] = field(default_factory=list)
    downsample_factor: int = 1

    def validate(self) -> None:
        if self.downsample_factor < 1:
            raise DegradationError(
                f"downsample_factor must be >= 1, got {self.downsample_factor}"
            )
        for spec in self.stages:
            spec.validate()

    def to_dict(self) -> dict:
        return {
            "stages": [s.to_dict() for s in self.stages],
            "downsample_factor": self.downsample_factor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineSpec":
        return cls(
            stages=[DegradationSpec.from_dict(s) for s in d["stages"]],
            downsample_factor=int(d["downsample_factor"]),
        )


def _finish(arr: np.ndarray) -> np.ndarray:
    return np.clip(arr, 0.0, 1.0).astype(np.float32)


def _blur(img64: np.ndarray, sigma: float) -> np.ndarray:
    if sigma == 0.0:
        return img64
    return ndimage.gaussian_filter(img64, sigma=(sigma, sigma, 0.0), mode="reflect")


def _noise(img64: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    return img64 + sigma * rng.standard_normal(img64.shape)


# Standard JPEG luminance quantization table (Annex K), applied per channel.
_JPEG_QTABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)


def _jpeg(img64: np.ndarray, quality: float) -> np.ndarray:
    q = float(quality)
    scale = 5000.0 / q if q < 50 else 200.0 - 2.0 * q
    qtable = np.clip(np.floor((_JPEG_QTABLE * scale + 50.0) / 100.0), 1, 255)

    h, w, _ = img64.shape
    pad_h = (-h) % 8
    pad_w = (-w) % 8
    x = np.pad(img64, ((0, pad_h), (0, pad_w), (0, 0)), mode="reflect")
    ph, pw = x.shape[0], x.shape[1]

    out = np.empty_like(x)
    for c in range(3):
        plane = x[:, :, c] * 255.0 - 128.0
        blocks = plane.reshape(ph // 8, 8, pw // 8, 8).transpose(0, 2, 1, 3)
        coef = sp_fft.dctn(blocks, type=2, norm="ortho", axes=(2, 3))
        coef = np.round(coef / qtable) * qtable
        rec = sp_fft.idctn(coef, type=2, norm="ortho", axes=(2, 3))
        plane = rec.transpose(0, 2, 1, 3).reshape(ph, pw)
        out[:, :, c] = (plane + 128.0) / 255.0
    return out[:h, :w, :]


def _lowlight(img64: np.ndarray, gamma: float, gain: float) -> np.ndarray:
    return gain * np.power(img64, gamma)


def _haze(img64: np.ndarray, transmission: float, airlight: float) -> np.ndarray:
    return img64 * transmission + airlight * (1.0 - transmission)


def _rain(img64: np.ndarray, amount: float, rng: np.random.Generator) -> np.ndarray:
    h, w, _ = img64.shape
    n_streaks = int(round(amount * h * w / 64.0))
    if n_streaks == 0:
        return img64
    canvas = np.zeros((h, w), dtype=np.float64)
    for _ in range(n_streaks):
        x0 = rng.uniform(0, w)
        y0 = rng.uniform(0, h)
        angle = math.radians(90.0 + rng.normal(0.0, 12.0))  # mostly vertical fall
        length = rng.uniform(h / 6.0, h / 2.5)
        brightness = rng.uniform(0.25, 0.6)
        steps = max(2, int(length * 2))
        ts = np.linspace(0.0, 1.0, steps)
        xs = np.clip(np.rint(x0 + math.cos(angle) * length * ts), 0, w - 1).astype(int)
        ys = np.clip(np.rint(y0 + math.sin(angle) * length * ts), 0, h - 1).astype(int)
        canvas[ys, xs] = np.maximum(canvas[ys, xs], brightness)
    canvas = ndimage.gaussian_filter(canvas, sigma=0.6, mode="constant")
    return img64 + canvas[:, :, None]


def apply_degradation(img: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    """Apply one seeded degradation; output stays in [0, 1]."""
    spec.validate()
    arr = validate_image(img).astype(np.float64)
    p = spec.params
    if spec.kind == "blur":
        out = _blur(arr, p["sigma"])
    elif spec.kind == "noise":
        out = _noise(arr, p["sigma"], np.random.default_rng(spec.seed))
    elif spec.kind == "jpeg":
        out = _jpeg(arr, p["quality"])
    elif spec.kind == "lowlight":
        out = _lowlight(arr, p["gamma"], p["gain"])
    elif spec.kind == "haze":
        out = _haze(arr, p["transmission"], p["airlight"])
    else:  # rain
        out = _rain(arr, p["amount"], np.random.default_rng(spec.seed))
    return _finish(out)


def compose(img: np.ndarray, specs: list[DegradationSpec]) -> np.ndarray:
    """Left-to-right sequential application of several degradations."""
    if not specs:
        raise DegradationError("compose requires a nonempty spec list")
    out = img
    for spec in specs:
        out = apply_degradation(out, spec)
    return out


def downsample(img: np.ndarray, factor: int) -> np.ndarray:
    """Area-average downsampling by an integer factor."""
    arr = validate_image(img)
    h, w, _ = arr.shape
    if h % factor != 0:
        raise DegradationError(f"height {h} not divisible by factor {factor}")
    if w % factor != 0:
        raise DegradationError(f"width {w} not divisible by factor {factor}")
    if factor == 1:
        return arr
    pooled = (
        arr.astype(np.float64)
        .reshape(h // factor, factor, w // factor, factor, 3)
        .mean(axis=(1, 3))
    )
    return _finish(pooled)


def high_order(
    img: np.ndarray, pipe: PipelineSpec, patch_size: int | None = None
) -> np.ndarray:
    """Run a multi-stage pipeline, then downsample by the pipeline factor."""
    pipe.validate()
    arr = validate_image(img)
    h, w, _ = arr.shape
    f = pipe.downsample_factor
    if h % f != 0 or w % f != 0:
        raise DegradationError(
            f"image {h}x{w} not divisible by downsample factor {f}"
        )
    if patch_size is not None and ((h // f) % patch_size or (w // f) % patch_size):
        raise DegradationError(
            f"downsampled size {h // f}x{w // f} not divisible by patch size {patch_size}"
        )
    out = arr
    for spec in pipe.stages:
        out = apply_degradation(out, spec)
    return downsample(out, f)


def severity(spec: DegradationSpec) -> float:
    """Monotone severity proxy in [0, 1] for one degradation.

    Per-kind maps (assumptions, documented here as the single source):
    blur sigma/3 capped, noise sigma/0.25 capped, jpeg (100-q)/99,
    lowlight 1 - gain * 0.5**(gamma-1), haze 1 - transmission, rain amount.
    """
    spec.validate()
    p = spec.params
    if spec.kind == "blur":
        return min(1.0, p["sigma"] / BLUR_SIGMA_MAX)
    if spec.kind == "noise":
        return min(1.0, p["sigma"] / NOISE_SIGMA_MAX)
    if spec.kind == "jpeg":
        return (100.0 - p["quality"]) / 99.0
    if spec.kind == "lowlight":
        return min(1.0, 1.0 - p["gain"] * 0.5 ** (p["gamma"] - 1.0))
    if spec.kind == "haze":
        return 1.0 - p["transmission"]
    return p["amount"]


def combined_severity(specs: list[DegradationSpec]) -> float:
    """Severity of a composition: 1 - prod(1 - s_i)."""
    prod = 1.0
    for spec in specs:
        prod *= 1.0 - severity(spec)
    return 1.0 - prod


def derive_seed(*entropy: int) -> int:
    """Stable 63-bit seed derived from an entropy tuple (dataset seed, indices...)."""
    state = np.random.SeedSequence(list(entropy)).generate_state(1, dtype=np.uint64)
    return int(state[0] >> 1)
