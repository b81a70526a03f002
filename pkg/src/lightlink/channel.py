"""Optical channel and rolling-shutter camera model.

The superposed LED illuminance is piecewise constant, so per-row exposure
integrals are evaluated in closed form from the step boundaries rather than
by numeric quadrature; zero-noise captures are exact up to float rounding.

Row y starts exposing at ``frame_start + y*readout`` and integrates the
scene illuminance for the exposure duration.  A frame therefore spans
``(rows-1)*readout`` of signal regardless of the exposure setting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modem import LedWaveform


class ConfigurationError(ValueError):
    """Physically impossible camera/channel configuration."""


@dataclass(frozen=True)
class ChannelProfile:
    """Per-LED received gains (DC channel gain times luminance) and ambient."""

    gains: tuple[float, ...]
    ambient: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(float(g) for g in self.gains))
        if any(g <= 0 for g in self.gains):
            raise ConfigurationError("LED gains must be positive")
        if self.ambient < 0:
            raise ConfigurationError("ambient level must be >= 0")

    @classmethod
    def equal_gains(cls, count: int, gain: float = 1.0, ambient: float = 0.0,
                    mismatch: float = 0.0, seed: int = 0) -> "ChannelProfile":
        """Equal-gain links, optionally perturbed by a relative mismatch."""
        gains = np.full(count, gain)
        if mismatch:
            rng = np.random.default_rng(seed)
            gains = gains * (1.0 + mismatch * rng.uniform(-1, 1, count))
        return cls(tuple(gains), ambient)


class StepSignal:
    """Piecewise-constant signal with exact closed-form integration.

    Holds breakpoints (seconds) and the value on each interval; outside the
    domain the signal idles at ``idle_value`` (transmitters off, ambient
    only).  ``integrate`` and ``value`` are vectorized.
    """

    def __init__(self, times, values, idle_value: float = 0.0):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.ndim != 1 or self.times.size != self.values.size + 1:
            raise ValueError("need len(times) == len(values) + 1")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        self.idle_value = float(idle_value)
        # cumulative integral at breakpoints; piecewise linear in between
        self._cum = np.concatenate([[0.0], np.cumsum(self.values * np.diff(self.times))])

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right") - 1
        inside = (idx >= 0) & (idx < self.values.size)
        out = np.full(t.shape, self.idle_value)
        out[inside] = self.values[np.clip(idx, 0, self.values.size - 1)][inside]
        return out

    def _cum_at(self, t: np.ndarray) -> np.ndarray:
        """Integral from self.start to t, extending idle beyond the domain."""
        tc = np.clip(t, self.start, self.end)
        idx = np.clip(np.searchsorted(self.times, tc, side="right") - 1,
                      0, self.values.size - 1)
        inner = self._cum[idx] + (tc - self.times[idx]) * self.values[idx]
        return inner + (t - tc) * self.idle_value  # signed idle overhang

    def integrate(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return self._cum_at(b) - self._cum_at(a)

    def covers(self, a: float, b: float) -> bool:
        return self.start <= a and b <= self.end


def superpose(waveforms: list[LedWaveform], channel: ChannelProfile,
              time_unit: float, start_time: float = 0.0) -> StepSignal:
    """Illuminance at the sensor: ambient plus gain-weighted LED levels."""
    if len(waveforms) != len(channel.gains):
        raise ConfigurationError("one gain per transmitter required")
    if not waveforms or waveforms[0].total_duration == 0:
        return StepSignal([start_time, start_time + time_unit],
                          [channel.ambient], idle_value=channel.ambient)
    units = max(w.total_duration for w in waveforms)
    level = np.zeros(units)
    for w, g in zip(waveforms, channel.gains):
        lv = w.unit_levels().astype(float)
        level[:lv.size] += g * lv
    times = start_time + np.arange(units + 1) * time_unit
    return StepSignal(times, channel.ambient + level, idle_value=channel.ambient)


@dataclass(frozen=True)
class CameraProfile:
    """Rolling-shutter sensor geometry, gain and noise behaviour.

    noise_floor is the per-pixel Gaussian sigma at unit sensor gain; sigma
    scales linearly with the gain (ISO).  shot_scale, when set, adds a
    Poisson term with that many illuminance-seconds per photon count.
    readout_smear adds the post-exposure readout-phase accumulation seen on
    electronic shutters (off by default).
    """

    rows: int
    cols: int
    readout: float            # seconds per row
    min_exposure: float = 13e-6
    max_exposure: float = 0.333333
    max_gain_ratio: float = 100.0  # widest ISO ratio an EV split may use
    noise_floor: float = 0.0
    shot_scale: float | None = None
    readout_smear: float = 0.0

    def __post_init__(self):
        if self.rows < 2 or self.cols < 1:
            raise ConfigurationError("sensor needs >= 2 rows and >= 1 column")
        if self.readout <= 0:
            raise ConfigurationError("readout duration must be positive")

    @property
    def signal_span(self) -> float:
        """Signal duration recorded in one frame: (rows-1)*readout."""
        return (self.rows - 1) * self.readout

    def max_fps(self) -> float:
        return 1.0 / self.signal_span


def iphone6s_like(noise_floor: float = 0.0, **kw) -> CameraProfile:
    # readout calibrated so the per-frame signal span is 19489.35 us at
    # 3024 rows (the reported span); rounds to the quoted 6.45 us/row
    return CameraProfile(rows=3024, cols=4032, readout=19489.35e-6 / 3023,
                         noise_floor=noise_floor, **kw)


def nexus5_like(noise_floor: float = 0.0, **kw) -> CameraProfile:
    return CameraProfile(rows=2448, cols=3264, readout=12.5e-6,
                         noise_floor=noise_floor, **kw)


CAMERA_PROFILES = {"iphone6s": iphone6s_like, "nexus5": nexus5_like}


class TextureLayer:
    """Static scene reflectance l(x,y), strictly finite and non-negative."""

    def __init__(self, amplitude: np.ndarray):
        amplitude = np.asarray(amplitude, dtype=float)
        if amplitude.ndim != 2:
            raise ValueError("texture must be 2-D (rows, cols)")
        if not np.all(np.isfinite(amplitude)) or np.any(amplitude < 0):
            raise ValueError("texture must be finite and non-negative")
        self.amplitude = amplitude

    @property
    def row_totals(self) -> np.ndarray:
        return self.amplitude.sum(axis=1)

    @classmethod
    def flat(cls, rows: int, cols: int, level: float = 1.0) -> "TextureLayer":
        return cls(np.full((rows, cols), level))

    @classmethod
    def vignette(cls, rows: int, cols: int, level: float = 1.0,
                 depth: float = 0.6, axis: int = 1) -> "TextureLayer":
        """Brightest center falling off to (1-depth) at both edges."""
        n = cols if axis == 1 else rows
        u = np.linspace(-1.0, 1.0, n)
        profile = level * (1.0 - depth * u ** 2)
        amp = np.tile(profile, (rows, 1)) if axis == 1 else np.tile(profile[:, None], (1, cols))
        return cls(amp)

    @classmethod
    def vertical_gradient(cls, rows: int, cols: int, level: float = 1.0,
                          ratio: float = 10.0) -> "TextureLayer":
        profile = level * np.linspace(1.0, ratio, rows)
        return cls(np.tile(profile[:, None], (1, cols)))


@dataclass
class FrameImage:
    """One captured frame: pixel array (rows, cols) plus capture metadata."""

    pixels: np.ndarray
    frame_start: float
    exposure: float
    gain: float
    readout: float
    signal_truncated: bool = False  # scene signal ended inside the frame span

    def row_profile(self) -> "RowProfile":
        from .frontend import RowProfile
        return RowProfile(self.pixels.sum(axis=1), frame_start=self.frame_start,
                          exposure=self.exposure, gain=self.gain, readout=self.readout)


def _row_integrals(scene: StepSignal, camera: CameraProfile, frame_start: float,
                   exposure: float) -> tuple[np.ndarray, bool]:
    t0 = frame_start + np.arange(camera.rows) * camera.readout
    integ = scene.integrate(t0, t0 + exposure)
    if camera.readout_smear > 0:
        integ = integ + camera.readout_smear * scene.integrate(
            t0 + exposure, t0 + exposure + camera.readout)
    truncated = not scene.covers(frame_start, float(t0[-1] + exposure))
    return integ, truncated


def capture_frame(scene: StepSignal, camera: CameraProfile, texture: TextureLayer,
                  frame_start: float, gain: float, exposure: float,
                  rng: np.random.Generator | None = None) -> FrameImage:
    """Render a full pixel frame: gain * l(x,y) * row exposure integral + noise."""
    if texture.amplitude.shape != (camera.rows, camera.cols):
        raise ConfigurationError("texture shape must match the sensor")
    if exposure <= 0:
        raise ConfigurationError("exposure must be positive")
    integ, truncated = _row_integrals(scene, camera, frame_start, exposure)
    pixels = gain * texture.amplitude * integ[:, None]
    if rng is not None and camera.shot_scale:
        pixels = rng.poisson(np.maximum(pixels, 0) / camera.shot_scale) * camera.shot_scale
    if rng is not None and camera.noise_floor > 0:
        pixels = pixels + rng.normal(0.0, camera.noise_floor * gain, pixels.shape)
    return FrameImage(pixels, frame_start, exposure, gain, camera.readout, truncated)


def capture_row_profile(scene: StepSignal, camera: CameraProfile,
                        texture: TextureLayer, frame_start: float, gain: float,
                        exposure: float, rng: np.random.Generator | None = None):
    """Row-sum capture without materializing pixels.

    Statistically equivalent to summing a full frame across columns: the
    Gaussian term scales by sqrt(cols), the Poisson term pools all columns.
    """
    from .frontend import RowProfile
    integ, truncated = _row_integrals(scene, camera, frame_start, exposure)
    rows = gain * texture.row_totals * integ
    if rng is not None and camera.shot_scale:
        rows = rng.poisson(np.maximum(rows, 0) / camera.shot_scale) * camera.shot_scale
    if rng is not None and camera.noise_floor > 0:
        rows = rows + rng.normal(0.0, camera.noise_floor * gain * np.sqrt(camera.cols),
                                 rows.shape)
    return RowProfile(rows, frame_start=frame_start, exposure=exposure,
                      gain=gain, readout=camera.readout, truncated=truncated)


LONG_EXPOSURE_FACTOR = 100.0


@dataclass
class ExposurePair:
    """Short/long captures sharing one exposure value and one scene."""

    short: object  # FrameImage or RowProfile
    long: object

    def __post_init__(self):
        ev_short = self.short.gain * self.short.exposure
        ev_long = self.long.gain * self.long.exposure
        if not np.isclose(ev_short, ev_long, rtol=1e-12):
            raise ConfigurationError("short and long captures must share one EV")


def capture_pair(scene: StepSignal, camera: CameraProfile, texture: TextureLayer,
                 frame_start: float, gain: float, exposure: float,
                 rng: np.random.Generator | None = None,
                 long_start: float | None = None,
                 factor: float = LONG_EXPOSURE_FACTOR,
                 pixels: bool = False) -> ExposurePair:
    """Capture the EV-matched pair: (k, t_e) short and (k/factor, factor*t_e) long.

    The long capture averages many carrier periods per row, so it is the
    texture reference; its lower gain scales its noise down accordingly.
    """
    if gain <= 0 or exposure <= 0 or factor <= 1:
        raise ConfigurationError("bad EV split")
    if factor > camera.max_gain_ratio:
        raise ConfigurationError(
            f"EV split needs a {factor:.0f}x ISO ratio; the sensor "
            f"supports {camera.max_gain_ratio:.0f}x")
    grab = capture_frame if pixels else capture_row_profile
    short = grab(scene, camera, texture, frame_start, gain, exposure, rng)
    long_ = grab(scene, camera, texture,
                 frame_start if long_start is None else long_start,
                 gain / factor, factor * exposure, rng)
    return ExposurePair(short, long_)


@dataclass(frozen=True)
class FrameTiming:
    """Frame starts, observable spans, and the idle gap between frames."""

    frame_starts: tuple[float, ...]
    signal_span: float
    gap: float
    fps: float

    @property
    def frame_duration(self) -> float:
        return self.signal_span + self.gap


def frame_schedule(camera: CameraProfile, fps: float, frames: int,
                   phase: float = 0.0) -> FrameTiming:
    """Frame k starts at phase + k/fps; the gap is what the readout leaves over.

    Any symbol lying wholly inside a gap is unobservable.
    """
    if fps <= 0 or frames < 1:
        raise ConfigurationError("need fps > 0 and frames >= 1")
    duration = 1.0 / fps
    gap = duration - camera.signal_span
    if gap < -1e-12:
        raise ConfigurationError(
            f"fps {fps} infeasible: frame duration {duration * 1e6:.1f} us is "
            f"shorter than the {camera.signal_span * 1e6:.1f} us readout span")
    starts = tuple(phase + k * duration for k in range(frames))
    return FrameTiming(starts, camera.signal_span, max(gap, 0.0), fps)


def lost_symbol_count(timing: FrameTiming, symbol_duration: float,
                      t_begin: float, t_end: float) -> tuple[int, int]:
    """Count symbols wholly inside gaps among symbols within [t_begin, t_end].

    Symbols tile [t_begin, t_end) contiguously.  Returns (lost, total).
    """
    n = int(np.floor((t_end - t_begin) / symbol_duration))
    starts = t_begin + np.arange(n) * symbol_duration
    ends = starts + symbol_duration
    lost = np.ones(n, dtype=bool)
    for fs in timing.frame_starts:
        observable_end = fs + timing.signal_span
        lost &= ~((ends > fs) & (starts < observable_end))
    # symbols before the first or after the last frame are out of scope
    in_run = (starts >= timing.frame_starts[0]) & (
        ends <= timing.frame_starts[-1] + timing.frame_duration)
    return int(np.count_nonzero(lost & in_run)), int(np.count_nonzero(in_run))
