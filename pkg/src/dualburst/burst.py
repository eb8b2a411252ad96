"""Multi-exposure burst generation across the noise-blur trade-off.

Two protocols produce the burst:

* ``frame_window`` — a high-fps flux sequence is captured over windows of
  increasing size centred on one frame. Short windows are noisy but sharp;
  long windows average out noise but smear motion.
* ``severity``     — a single display-domain image is degraded at paired
  (shot-noise, motion-blur) severity levels, most-noisy/least-blurred first.

Raw electron images are exposure-normalized, clamped, and gamma-mapped so
every burst member lands in [0, 1] at comparable brightness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .container import load_container, save_container
from .rng import RngStream, derive_stream
from .sensor import (
    FluxFrames,
    SensorConfig,
    sample_dark_current,
    sample_read_noise,
    sample_shot_noise,
    simulate_raw_capture,
)

__all__ = [
    "ExposurePlan",
    "Burst",
    "BLUR_LENGTHS",
    "PHOTON_BUDGETS",
    "simulate_exposure_from_frames",
    "motion_blur_kernel",
    "severity_corrupt",
    "make_burst",
    "apply_gamma",
    "save_burst",
    "load_burst",
    "export_png",
]

# Severity tables: blur level -> kernel length (pixels), shot level -> photon
# budget at white (electrons). Level 0 leaves the image untouched.
BLUR_LENGTHS = {0: 1, 1: 5, 2: 9, 3: 13, 4: 17}
PHOTON_BUDGETS = {0: math.inf, 1: 240.0, 2: 60.0, 3: 25.0, 4: 12.0}

# The 4-step ladder from most-noisy/least-blurred to least-noisy/most-blurred.
SEVERITY_LADDER = ((4, 1), (3, 2), (2, 3), (1, 4))


@dataclass(frozen=True)
class ExposurePlan:
    """What to capture for each burst member.

    ``frame_window`` mode lists odd, increasing window sizes in frames;
    ``severity`` mode lists (shot_level, blur_level) pairs in [0, 4].
    """

    mode: str
    windows: tuple[int, ...] = ()
    levels: tuple[tuple[int, int], ...] = ()
    include_clean: bool = True

    def __post_init__(self) -> None:
        if self.mode == "frame_window":
            if not self.windows:
                raise ValueError("frame_window plan needs at least one window")
            for w in self.windows:
                if w < 1 or w % 2 == 0:
                    raise ValueError(f"windows must be odd and >= 1, got {w}")
            if list(self.windows) != sorted(set(self.windows)):
                raise ValueError(f"windows must be strictly increasing, got {self.windows}")
            object.__setattr__(self, "windows", tuple(int(w) for w in self.windows))
        elif self.mode == "severity":
            if not self.levels:
                raise ValueError("severity plan needs at least one level pair")
            for shot, blur in self.levels:
                if not (0 <= shot <= 4 and 0 <= blur <= 4):
                    raise ValueError(f"severity levels must be in [0, 4], got ({shot}, {blur})")
            object.__setattr__(self, "levels", tuple((int(s), int(b)) for s, b in self.levels))
        else:
            raise ValueError(f"unknown plan mode {self.mode!r}")

    @classmethod
    def frame_window(cls, windows: Sequence[int], include_clean: bool = True) -> "ExposurePlan":
        return cls(mode="frame_window", windows=tuple(windows), include_clean=include_clean)

    @classmethod
    def severity(cls, levels: Sequence[tuple[int, int]] = SEVERITY_LADDER,
                 include_clean: bool = True) -> "ExposurePlan":
        return cls(mode="severity", levels=tuple(levels), include_clean=include_clean)

    @property
    def num_exposures(self) -> int:
        return len(self.windows) if self.mode == "frame_window" else len(self.levels)


@dataclass
class Burst:
    """N co-registered corrupted images plus metadata.

    images     (N, H, W) in [0, 1]
    clean      optional noise-and-blur-free reference (H, W) in [0, 1]
    label      optional task target
    exposures  per-image effective capture duration (seconds in frame_window
               mode, blur-kernel length as a unitless proxy in severity mode)
    """

    images: np.ndarray
    clean: np.ndarray | None = None
    label: int | None = None
    exposures: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.float32))

    def __post_init__(self) -> None:
        self.images = np.asarray(self.images)
        if self.images.ndim != 3 or self.images.shape[0] < 1:
            raise ValueError(f"images must be (N, H, W) with N >= 1, got {self.images.shape}")
        self.exposures = np.asarray(self.exposures, dtype=np.float32)
        if self.exposures.shape != (self.images.shape[0],):
            raise ValueError("need one exposure value per image")
        if self.clean is not None:
            self.clean = np.asarray(self.clean)
            if self.clean.shape != self.images.shape[1:]:
                raise ValueError(
                    f"clean shape {self.clean.shape} != image shape {self.images.shape[1:]}"
                )

    @property
    def num_images(self) -> int:
        return self.images.shape[0]


def simulate_exposure_from_frames(
    flux: FluxFrames,
    center: int,
    window: int,
    sensor: SensorConfig,
    rng: RngStream,
    readout_mode: str = "per_frame",
) -> np.ndarray:
    """One burst member from a flux sequence, in electrons.

    ``per_frame``: every frame in the window receives independent shot, dark
    and read noise and the noisy frames are averaged (output brightness is a
    single frame's). ``single``: photons integrate across the window with one
    readout at the end (output brightness scales with the window).
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    half = (window - 1) // 2
    lo, hi = center - half, center + half
    if lo < 0 or hi >= flux.num_frames:
        raise ValueError(
            f"window {window} at center {center} exceeds frame range [0, {flux.num_frames})"
        )
    if readout_mode == "single":
        return simulate_raw_capture(flux, range(lo, hi + 1), sensor, rng)
    if readout_mode != "per_frame":
        raise ValueError(f"unknown readout_mode {readout_mode!r}")

    acc = np.zeros(flux.image_shape, dtype=np.float64)
    for f in range(lo, hi + 1):
        frame = sample_shot_noise(flux.frames[f] * sensor.eta * flux.frame_dt, rng)
        frame += sample_dark_current(sensor.sigma_d, flux.frame_dt, flux.image_shape, rng)
        frame += sample_read_noise(flux.image_shape, sensor.sigma_r, rng)
        acc += frame
    return acc / window


def motion_blur_kernel(length: int, angle: float) -> np.ndarray:
    """2-D kernel of a line segment through the center at ``angle`` radians.

    Unit-spaced samples along the line are splatted bilinearly onto a
    length x length grid; the kernel sums to 1.
    """
    if length < 1 or length % 2 == 0:
        raise ValueError(f"kernel length must be odd and >= 1, got {length}")
    if length == 1:
        return np.ones((1, 1), dtype=np.float64)
    kernel = np.zeros((length, length), dtype=np.float64)
    c = (length - 1) / 2.0
    for t in np.arange(length) - c:
        x = c + t * math.cos(angle)
        y = c + t * math.sin(angle)
        j0, i0 = int(math.floor(x)), int(math.floor(y))
        fx, fy = x - j0, y - i0
        for di, dj, w in (
            (0, 0, (1 - fy) * (1 - fx)),
            (0, 1, (1 - fy) * fx),
            (1, 0, fy * (1 - fx)),
            (1, 1, fy * fx),
        ):
            i, j = i0 + di, j0 + dj
            if 0 <= i < length and 0 <= j < length and w > 0.0:
                kernel[i, j] += w
    return kernel / kernel.sum()


def severity_corrupt(
    image: np.ndarray,
    shot_level: int,
    blur_level: int,
    sensor: SensorConfig,
    rng: RngStream,
) -> np.ndarray:
    """Degrade a [0, 1] image at the given severity pair.

    Motion blur first (random kernel angle), then shot noise at the level's
    photon budget, then a clamp back to [0, 1]. Level (0, 0) returns the
    input unchanged. ``sensor`` is accepted for interface parity with the
    capture path; the severity tables fully determine the corruption.
    """
    del sensor
    if shot_level not in PHOTON_BUDGETS:
        raise ValueError(f"shot_level must be in [0, 4], got {shot_level}")
    if blur_level not in BLUR_LENGTHS:
        raise ValueError(f"blur_level must be in [0, 4], got {blur_level}")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    if np.any(img < 0) or np.any(img > 1) or not np.all(np.isfinite(img)):
        raise ValueError("image values must lie in [0, 1]")

    if shot_level == 0 and blur_level == 0:
        return img.copy()
    if blur_level > 0:
        angle = float(rng.uniform(0.0, math.pi))
        kernel = motion_blur_kernel(BLUR_LENGTHS[blur_level], angle)
        img = ndimage.convolve(img, kernel, mode="reflect")
        img = np.clip(img, 0.0, 1.0)
    if shot_level > 0:
        budget = PHOTON_BUDGETS[shot_level]
        img = sample_shot_noise(img * budget, rng) / budget
    return np.clip(img, 0.0, 1.0)


def apply_gamma(image: np.ndarray, gamma: float) -> np.ndarray:
    """Elementwise v^(1/gamma) for an image in [0, 1]."""
    return np.power(image, 1.0 / gamma)


def _to_display(electrons: np.ndarray, dt_effective: float, sensor: SensorConfig) -> np.ndarray:
    """Exposure-normalize, clamp, and gamma-map an electron image."""
    scale = sensor.eta * dt_effective * sensor.full_scale
    return apply_gamma(np.clip(electrons / scale, 0.0, 1.0), sensor.gamma)


def make_burst(
    source,
    plan: ExposurePlan,
    sensor: SensorConfig,
    rng: RngStream,
    label: int | None = None,
    readout_mode: str = "per_frame",
    dtype=np.float32,
) -> Burst:
    """Generate one burst from a flux sequence or a single [0, 1] image.

    frame_window plans require a :class:`FluxFrames` source; severity plans a
    single 2-D image. Electron images are brought to display range by the
    normalize/clamp/gamma pipeline; severity images already live there. The
    clean reference, when requested, is the center frame (or source image)
    with zero noise.
    """
    if plan.mode == "frame_window":
        if not isinstance(source, FluxFrames):
            raise ValueError("frame_window plans require a FluxFrames source")
        center = source.num_frames // 2
        images, exposures = [], []
        for i, window in enumerate(plan.windows):
            stream = derive_stream(rng, "exposure", i)
            electrons = simulate_exposure_from_frames(
                source, center, window, sensor, stream, readout_mode
            )
            dt_eff = source.frame_dt if readout_mode == "per_frame" else window * source.frame_dt
            images.append(_to_display(electrons, dt_eff, sensor))
            exposures.append(window * source.frame_dt)
        clean = None
        if plan.include_clean:
            clean_electrons = source.frames[center] * sensor.eta * source.frame_dt
            clean = _to_display(clean_electrons, source.frame_dt, sensor).astype(dtype)
    elif plan.mode == "severity":
        img = np.asarray(source)
        if isinstance(source, FluxFrames) or img.ndim != 2:
            raise ValueError("severity plans require a single 2-D image source")
        images, exposures = [], []
        for i, (shot, blur) in enumerate(plan.levels):
            stream = derive_stream(rng, "severity", i)
            images.append(severity_corrupt(img, shot, blur, sensor, stream))
            exposures.append(float(BLUR_LENGTHS[blur]))
        clean = np.asarray(img, dtype=dtype) if plan.include_clean else None
    else:  # pragma: no cover - ExposurePlan validates mode
        raise ValueError(f"unknown plan mode {plan.mode!r}")

    return Burst(
        images=np.stack(images).astype(dtype),
        clean=clean,
        label=label,
        exposures=np.asarray(exposures, dtype=np.float32),
    )


def save_burst(path, burst: Burst) -> None:
    """Persist a burst as a container: img_0..img_{N-1}, optional clean,
    exposures (f32), optional label (u8)."""
    entries: dict[str, np.ndarray] = {}
    for i in range(burst.num_images):
        entries[f"img_{i}"] = burst.images[i].astype(np.float32)
    if burst.clean is not None:
        entries["clean"] = burst.clean.astype(np.float32)
    entries["exposures"] = burst.exposures.astype(np.float32)
    if burst.label is not None:
        if not 0 <= burst.label < 256:
            raise ValueError(f"label must fit in u8, got {burst.label}")
        entries["label"] = np.array([burst.label], dtype=np.uint8)
    save_container(path, entries)


def load_burst(path) -> Burst:
    entries = load_container(path)
    images = []
    while f"img_{len(images)}" in entries:
        images.append(entries[f"img_{len(images)}"])
    if not images:
        raise ValueError(f"{path} holds no burst images")
    label = int(entries["label"][0]) if "label" in entries else None
    return Burst(
        images=np.stack(images),
        clean=entries.get("clean"),
        label=label,
        exposures=entries["exposures"],
    )


def export_png(path, image: np.ndarray, bit_depth: int = 8) -> None:
    """Quantize a [0, 1] image to 8- or 16-bit grayscale PNG."""
    from PIL import Image

    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    levels = (1 << bit_depth) - 1
    quantized = np.clip(np.rint(np.asarray(image, dtype=np.float64) * levels), 0, levels)
    if bit_depth == 8:
        Image.fromarray(quantized.astype(np.uint8), mode="L").save(path)
    else:
        Image.fromarray(quantized.astype(np.uint16), mode="I;16").save(path)
