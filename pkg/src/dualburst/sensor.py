"""Physics-based capture simulation: photon integration and sensor noise.

Everything here works in electron units; conversion to display values lives
in the burst module. Three independent noise sources combine additively on
top of the integrated photo-electron signal:

* shot noise     Poisson in the integrated signal
* readout noise  zero-mean Gaussian, variance sigma_r^2 per readout
* dark current   Poisson with rate sigma_d electrons/second

which gives, for a constant scene,

    Var(reading) = signal + sigma_r^2 + sigma_d * dt
    SNR          = signal^2 / (signal + sigma_r^2 + sigma_d * dt)

with signal the integrated photo-electron count (flux * eta * dt).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rng import RngStream

__all__ = [
    "SensorConfig",
    "FluxFrames",
    "load_sensor_config",
    "sample_shot_noise",
    "sample_read_noise",
    "sample_dark_current",
    "simulate_raw_capture",
    "snr",
]

# Exact (Knuth) Poisson sampling below this mean; clamped, rounded Gaussian
# approximation above. The approximation error at the switch point is well
# below the 5% statistical tolerances used throughout.
POISSON_EXACT_LIMIT = 30.0


@dataclass(frozen=True)
class SensorConfig:
    """Physical sensor parameters.

    eta         quantum efficiency, electrons per photon, in (0, 1]
    sigma_r     read-noise standard deviation, electrons per readout
    sigma_d     dark-current rate, electrons per second
    gamma       display gamma for export (v -> v^(1/gamma))
    full_scale  photon flux (photons/s) mapped to display value 1.0 after
                exposure normalization
    bit_depth   export quantization, 8 or 16 bits
    """

    eta: float = 0.8
    sigma_r: float = 2.0
    sigma_d: float = 10.0
    gamma: float = 2.2
    full_scale: float = 800.0
    bit_depth: int = 8

    def __post_init__(self) -> None:
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if self.sigma_r < 0.0:
            raise ValueError(f"sigma_r must be >= 0, got {self.sigma_r}")
        if self.sigma_d < 0.0:
            raise ValueError(f"sigma_d must be >= 0, got {self.sigma_d}")
        if self.gamma <= 0.0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.full_scale <= 0.0:
            raise ValueError(f"full_scale must be > 0, got {self.full_scale}")
        if self.bit_depth not in (8, 16):
            raise ValueError(f"bit_depth must be 8 or 16, got {self.bit_depth}")


_SENSOR_FLOAT_KEYS = ("eta", "sigma_r", "sigma_d", "gamma", "full_scale")


def load_sensor_config(path) -> SensorConfig:
    """Parse a UTF-8 ``key=value`` sensor profile.

    Recognised keys: eta, sigma_r, sigma_d, gamma, full_scale, bit_depth.
    Blank lines and lines starting with ``#`` are ignored; omitted keys keep
    their defaults.
    """
    values: dict[str, float | int] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        if key in _SENSOR_FLOAT_KEYS:
            values[key] = float(raw.strip())
        elif key == "bit_depth":
            values[key] = int(raw.strip())
        else:
            raise ValueError(f"{path}:{lineno}: unknown sensor key {key!r}")
    return SensorConfig(**values)


@dataclass(frozen=True)
class FluxFrames:
    """A high-fps photon-flux sequence: frames (T, H, W) in photons/second
    per pixel, each frame spanning ``frame_dt`` seconds."""

    frames: np.ndarray
    frame_dt: float

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 3:
            raise ValueError(f"frames must be (T, H, W), got shape {frames.shape}")
        if frames.shape[0] < 1:
            raise ValueError("need at least one frame")
        if not np.all(np.isfinite(frames)) or np.any(frames < 0):
            raise ValueError("flux values must be finite and nonnegative")
        if self.frame_dt <= 0.0:
            raise ValueError(f"frame_dt must be > 0, got {self.frame_dt}")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def image_shape(self) -> tuple[int, int]:
        return self.frames.shape[1:]


def sample_shot_noise(expected_electrons, rng: RngStream) -> np.ndarray:
    """Independent Poisson draw per pixel with the given mean, in electrons.

    Exact inversion (Knuth) below :data:`POISSON_EXACT_LIMIT`; above it, a
    Gaussian with matching mean/variance, rounded and clamped at zero.
    Returns an integer-valued float64 array.
    """
    mean = np.asarray(expected_electrons, dtype=np.float64)
    if not np.all(np.isfinite(mean)):
        raise ValueError("expected electron counts must be finite")
    if np.any(mean < 0):
        raise ValueError("expected electron counts must be nonnegative")

    flat = mean.ravel()
    out = np.zeros(flat.shape, dtype=np.float64)

    large = flat >= POISSON_EXACT_LIMIT
    if large.any():
        mu = flat[large]
        draw = mu + np.sqrt(mu) * rng.standard_normal(mu.size)
        out[large] = np.maximum(np.rint(draw), 0.0)

    small = np.flatnonzero(~large)
    if small.size:
        # Knuth: multiply uniforms until the product drops below exp(-mean).
        threshold = np.exp(-flat[small])
        prod = np.ones(small.size)
        count = np.zeros(small.size)
        active = np.ones(small.size, dtype=bool)
        while active.any():
            idx = np.flatnonzero(active)
            prod[idx] *= rng.random(idx.size)
            count[idx] += 1.0
            active[idx] = prod[idx] > threshold[idx]
        out[small] = count - 1.0

    return out.reshape(mean.shape)


def sample_read_noise(shape: Sequence[int], sigma_r: float, rng: RngStream) -> np.ndarray:
    """I.i.d. Gaussian(0, sigma_r^2) per pixel, in electrons."""
    if sigma_r < 0.0:
        raise ValueError(f"sigma_r must be >= 0, got {sigma_r}")
    if sigma_r == 0.0:
        return np.zeros(shape, dtype=np.float64)
    return sigma_r * rng.standard_normal(tuple(shape))


def sample_dark_current(sigma_d: float, dt: float, shape: Sequence[int], rng: RngStream) -> np.ndarray:
    """I.i.d. Poisson(sigma_d * dt) thermal electrons per pixel."""
    if sigma_d < 0.0:
        raise ValueError(f"sigma_d must be >= 0, got {sigma_d}")
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if sigma_d == 0.0:
        return np.zeros(shape, dtype=np.float64)
    return sample_shot_noise(np.full(tuple(shape), sigma_d * dt), rng)


def simulate_raw_capture(
    flux: FluxFrames,
    window: Iterable[int],
    sensor: SensorConfig,
    rng: RngStream,
) -> np.ndarray:
    """Raw sensor reading, in electrons, for one readout over ``window``.

    Photo-electrons are Poisson-sampled per frame and summed over the window,
    dark current accumulates over the window duration, and a single Gaussian
    readout is added at the end (one readout per capture).
    """
    indices = list(window)
    if not indices:
        raise ValueError("capture window must be nonempty")
    for f in indices:
        if not 0 <= f < flux.num_frames:
            raise ValueError(f"frame index {f} outside [0, {flux.num_frames})")

    total = np.zeros(flux.image_shape, dtype=np.float64)
    for f in indices:
        total += sample_shot_noise(flux.frames[f] * sensor.eta * flux.frame_dt, rng)
    total += sample_dark_current(sensor.sigma_d, len(indices) * flux.frame_dt, flux.image_shape, rng)
    total += sample_read_noise(flux.image_shape, sensor.sigma_r, rng)
    return total


def snr(signal_electrons: float, sensor: SensorConfig, dt: float) -> float:
    """Signal-to-noise ratio of a capture with the given integrated signal.

    ``signal_electrons`` is the integrated photo-electron count over the
    exposure (flux * eta * dt for constant flux). Returns 0 when signal and
    all noise terms vanish.
    """
    if signal_electrons < 0.0:
        raise ValueError(f"signal must be >= 0, got {signal_electrons}")
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    denom = signal_electrons + sensor.sigma_r**2 + sensor.sigma_d * dt
    if denom == 0.0:
        return 0.0
    return signal_electrons**2 / denom
