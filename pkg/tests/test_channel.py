import dataclasses

import numpy as np
import pytest

from lightlink.channel import (CameraProfile, ChannelProfile,
                               ConfigurationError, StepSignal, TextureLayer,
                               capture_frame, capture_pair,
                               capture_row_profile, frame_schedule,
                               iphone6s_like, lost_symbol_count, nexus5_like,
                               superpose)
from lightlink.modem import LedWaveform, SubcarrierPlan, modulate_message, pack_bits

from util import small_camera


def brute_force_integral(times, values, idle, a, b):
    # independent oracle: accumulate interval overlaps segment by segment,
    # with idle value on (-inf, t0] and [tm, +inf)
    total = idle * max(0.0, min(b, times[0]) - a)
    total += idle * max(0.0, b - max(a, times[-1]))
    for t0, t1, v in zip(times[:-1], times[1:], values):
        lo, hi = max(a, t0), min(b, t1)
        if hi > lo:
            total += v * (hi - lo)
    return total


class TestStepSignal:
    def test_integrate_matches_brute_force(self):
        rng = np.random.default_rng(0)
        times = np.cumsum(rng.uniform(0.1, 2.0, 30))
        values = rng.uniform(-1, 3, 29)
        sig = StepSignal(times, values, idle_value=0.7)
        for _ in range(200):
            a, b = sorted(rng.uniform(times[0] - 5, times[-1] + 5, 2))
            expected = brute_force_integral(times, values, 0.7, a, b)
            assert sig.integrate(a, b) == pytest.approx(expected, abs=1e-12)

    def test_value_and_idle(self):
        sig = StepSignal([0.0, 1.0, 2.0], [5.0, 2.0], idle_value=0.25)
        assert sig.value([-1.0, 0.5, 1.5, 3.0]).tolist() == [0.25, 5.0, 2.0, 0.25]

    def test_covers(self):
        sig = StepSignal([0.0, 1.0], [1.0])
        assert sig.covers(0.0, 1.0) and not sig.covers(-0.1, 0.5)


class TestSuperpose:
    def test_all_off_is_ambient(self):
        wv = [LedWaveform.from_unit_levels(k, [0, 0, 0, 0]) for k in range(3)]
        sig = superpose(wv, ChannelProfile.equal_gains(3, 1.0, ambient=0.4), 1e-4)
        assert np.all(sig.value(np.linspace(0, 4e-4, 9)) == 0.4)

    def test_all_on_equal_gain(self):
        wv = [LedWaveform.from_unit_levels(k, [1, 1]) for k in range(3)]
        sig = superpose(wv, ChannelProfile.equal_gains(3, 2.0), 1e-4)
        assert sig.value(1e-4) == pytest.approx(6.0)

    def test_two_led_level_set(self):
        # superposed staircase only visits ambient + {0, g, 2g}
        plan = SubcarrierPlan(4, (1, 2))
        packets, _ = pack_bits(np.arange(22) % 2, plan, 4)
        wv = modulate_message(packets, plan)
        sig = superpose(wv, ChannelProfile.equal_gains(2, 1.5, ambient=0.2), 1e-4)
        assert set(np.round(sig.values, 9)) <= {0.2, 1.7, 3.2}

    def test_gain_count_mismatch(self):
        wv = [LedWaveform.from_unit_levels(0, [1, 0])]
        with pytest.raises(ConfigurationError):
            superpose(wv, ChannelProfile.equal_gains(2, 1.0), 1e-4)


class TestCaptureFrame:
    def test_constant_scene(self):
        sig = StepSignal([0.0, 1.0], [3.0], idle_value=3.0)
        cam = small_camera(rows=16, cols=4)
        tex = TextureLayer.flat(16, 4, level=0.5)
        frame = capture_frame(sig, cam, tex, 0.0, gain=2.0, exposure=2e-4)
        assert np.allclose(frame.pixels, 2.0 * 0.5 * 3.0 * 2e-4)

    def test_gain_linearity(self):
        sig = StepSignal([0.0, 1e-2], np.full(1, 1.0), idle_value=0.0)
        cam = small_camera(rows=32, cols=8)
        tex = TextureLayer.flat(32, 8)
        a = capture_frame(sig, cam, tex, 1e-3, 10.0, 1e-4)
        b = capture_frame(sig, cam, tex, 1e-3, 20.0, 1e-4)
        assert np.allclose(b.pixels, 2 * a.pixels)

    def test_trapezoid_band_spacing(self):
        # square wave with pulse = exposure: extrema every t_i/t_r rows
        tu = 100e-6
        cam = CameraProfile(rows=256, cols=4, readout=tu / 8)  # 8 rows per unit
        levels = np.tile([1, 0], 40)
        wv = [LedWaveform.from_unit_levels(0, levels)]
        sig = superpose(wv, ChannelProfile.equal_gains(1, 1.0), tu)
        tex = TextureLayer.flat(256, 4)
        frame = capture_frame(sig, cam, tex, 10 * tu, 1.0, tu)
        profile = frame.pixels.sum(axis=1)
        peaks = [r for r in range(1, 255)
                 if profile[r] >= profile[r - 1] and profile[r] >= profile[r + 1]
                 and profile[r] > 0.9 * profile.max()]
        spacing = np.diff(peaks)
        assert np.all(spacing == round(2 * tu / cam.readout))  # one carrier period

    def test_signal_span_iphone_profile(self):
        cam = iphone6s_like()
        assert cam.signal_span * 1e6 == pytest.approx(19489.35, abs=1e-6)
        assert cam.readout * 1e6 == pytest.approx(6.45, abs=0.01)
        nex = nexus5_like()
        assert nex.readout == 12.5e-6 and nex.rows == 2448

    def test_truncation_flag(self):
        sig = StepSignal([0.0, 1e-4], [1.0])
        cam = small_camera(rows=64, cols=4)
        frame = capture_frame(sig, cam, TextureLayer.flat(64, 4), 0.0, 1.0, 1e-4)
        assert frame.signal_truncated

    def test_whole_period_mean_preserves_duty(self):
        # mean of the noiseless layer over whole periods = carrier mean * k*l
        tu = 100e-6
        cam = CameraProfile(rows=161, cols=2, readout=tu / 10)
        levels = np.tile([1, 1, 1, 0, 0, 0], 20)
        sig = superpose([LedWaveform.from_unit_levels(0, levels)],
                        ChannelProfile.equal_gains(1, 1.0), tu)
        frame = capture_frame(sig, cam, TextureLayer.flat(161, 2), 20 * tu, 3.0, tu)
        profile = frame.pixels.sum(axis=1)
        one_period = profile[:60]  # 6 units * 10 rows
        assert one_period.mean() == pytest.approx(3.0 * 2 * 0.5 * tu, rel=1e-9)

    def test_shutter_preserves_fundamental_bin(self):
        # the exposure box reshapes the bands but the dominant nonzero
        # spectral bin of the row profile stays at the carrier's bin for
        # every exposure up to the pulse duration
        tu = 100e-6
        cam = CameraProfile(rows=480, cols=2, readout=tu / 10)
        sig = superpose([LedWaveform.from_unit_levels(
            0, np.tile([1, 1, 1, 0, 0, 0], 20))],
            ChannelProfile.equal_gains(1, 1.0), tu)
        tex = TextureLayer.flat(480, 2)
        for exposure in (0.2 * tu, 0.5 * tu, tu):
            frame = capture_frame(sig, cam, tex, 10 * tu, 1.0, exposure)
            profile = frame.pixels.sum(axis=1)[:8 * 60]  # whole periods
            spectrum = np.abs(np.fft.rfft(profile - profile.mean()))
            assert spectrum.argmax() == 8  # 8 carrier cycles in the slice

    def test_exact_levels_at_aligned_instants_short_exposure(self):
        # pulse at least as long as the exposure: rows whose window sits
        # inside one unit read that unit's level exactly
        tu = 100e-6
        cam = CameraProfile(rows=400, cols=2, readout=tu / 8)
        rng = np.random.default_rng(3)
        levels = rng.integers(0, 2, 60).astype(np.uint8)
        sig = superpose([LedWaveform.from_unit_levels(0, levels)],
                        ChannelProfile.equal_gains(1, 1.0), tu)
        tex = TextureLayer.flat(400, 2)
        exposure = 0.5 * tu
        frame = capture_frame(sig, cam, tex, 5 * tu, 2.0, exposure)
        profile = frame.pixels.sum(axis=1)
        for unit in range(40):
            row = unit * 8  # its window starts exactly at unit 5 + unit
            expected = 2.0 * 2 * levels[5 + unit] * exposure
            assert profile[row] == pytest.approx(expected, abs=1e-15)

    def test_readout_smear_flag(self):
        tu = 100e-6
        levels = np.tile([1, 0], 30)
        sig = superpose([LedWaveform.from_unit_levels(0, levels)],
                        ChannelProfile.equal_gains(1, 1.0), tu)
        cam = small_camera(rows=64, cols=4)
        smeared = dataclasses.replace(cam, readout_smear=1.0)
        a = capture_frame(sig, cam, TextureLayer.flat(64, 4), 5 * tu, 1.0, tu)
        b = capture_frame(sig, smeared, TextureLayer.flat(64, 4), 5 * tu, 1.0, tu)
        assert not np.allclose(a.pixels, b.pixels)


class TestNoise:
    def test_row_noise_scales_with_sqrt_cols(self):
        sig = StepSignal([0.0, 1.0], [1.0], idle_value=1.0)
        cam = small_camera(rows=4096, cols=49, noise_floor=1e-3)
        tex = TextureLayer.flat(4096, 49)
        rng = np.random.default_rng(0)
        rp = capture_row_profile(sig, cam, tex, 0.0, 8.0, 1e-4, rng)
        noise = rp.values - np.mean(rp.values)
        expected = 1e-3 * 8.0 * np.sqrt(49)
        assert np.std(noise) == pytest.approx(expected, rel=0.05)

    def test_zero_noise_deterministic(self):
        sig = StepSignal([0.0, 1.0], [1.0])
        cam = small_camera(rows=32, cols=4)
        tex = TextureLayer.flat(32, 4)
        a = capture_row_profile(sig, cam, tex, 0.0, 1.0, 1e-4)
        b = capture_row_profile(sig, cam, tex, 0.0, 1.0, 1e-4)
        assert np.array_equal(a.values, b.values)


class TestExposurePair:
    def test_ev_equality_exact(self):
        sig = StepSignal([0.0, 0.5], [2.0], idle_value=2.0)
        cam = small_camera(rows=64, cols=8)
        tex = TextureLayer.flat(64, 8)
        pair = capture_pair(sig, cam, tex, 1e-3, gain=40.0, exposure=1e-4)
        assert pair.short.gain * pair.short.exposure == pytest.approx(
            pair.long.gain * pair.long.exposure, rel=1e-12)

    def test_ev_split_beyond_iso_range(self):
        sig = StepSignal([0.0, 0.5], [2.0], idle_value=2.0)
        cam = small_camera(rows=64, cols=8)
        tex = TextureLayer.flat(64, 8)
        with pytest.raises(ConfigurationError, match="ISO"):
            capture_pair(sig, cam, tex, 1e-3, gain=40.0, exposure=1e-4,
                         factor=200.0)

    def test_long_ripple_below_period_bound(self):
        # the long box averages the carrier; ripple under period/t_long
        tu = 100e-6
        plan = SubcarrierPlan(6, (1, 2, 3), tu)
        rng = np.random.default_rng(8)
        packets, _ = pack_bits(rng.integers(0, 2, 300).astype(np.uint8), plan, 4)
        wv = modulate_message(packets, plan)
        sig = superpose(wv, ChannelProfile.equal_gains(3, 1.0), tu)
        cam = small_camera(rows=512, cols=8)
        tex = TextureLayer.flat(512, 8)
        pair = capture_pair(sig, cam, tex, 10 * tu, gain=40.0, exposure=tu)
        ripple = pair.long.values / np.mean(pair.long.values) - 1.0
        bound = plan.symbol_units * tu / pair.long.exposure  # one carrier period
        assert np.max(np.abs(ripple)) < bound

    def test_ratio_recovers_layer_within_tolerance(self):
        tu = 100e-6
        plan = SubcarrierPlan(6, (1, 2, 3), tu)
        rng = np.random.default_rng(9)
        packets, _ = pack_bits(rng.integers(0, 2, 300).astype(np.uint8), plan, 4)
        sig = superpose(modulate_message(packets, plan),
                        ChannelProfile.equal_gains(3, 1.0), tu)
        cam = small_camera(rows=1024, cols=8)
        tex = TextureLayer.vertical_gradient(1024, 8, ratio=4.0)
        pair = capture_pair(sig, cam, tex, 10 * tu, gain=40.0, exposure=tu)
        g = pair.short.values / pair.long.values
        t0 = 10 * tu + np.arange(1024) * cam.readout
        truth = sig.integrate(t0, t0 + tu)
        scale = np.dot(g, truth) / np.dot(truth, truth)
        err = (g - scale * truth) / np.max(scale * truth)
        assert np.sqrt(np.mean(err ** 2)) < 0.01      # rms within 1%
        assert np.max(np.abs(err)) < 0.025            # long-average ripple cap


class TestFrameSchedule:
    def test_gap_value(self):
        cam = iphone6s_like()
        timing = frame_schedule(cam, 30.0, frames=3)
        gap_us = timing.gap * 1e6
        assert gap_us == pytest.approx(1e6 / 30 - 19489.35, abs=1e-6)
        assert gap_us == pytest.approx(13844.0, abs=0.1)

    def test_frame_starts_and_wall_clock(self):
        cam = small_camera()
        timing = frame_schedule(cam, 25.0, frames=5, phase=0.01)
        starts = np.array(timing.frame_starts)
        assert np.allclose(np.diff(starts), 1 / 25.0)
        total = 5 * (timing.signal_span + timing.gap)
        assert total == pytest.approx(5 / 25.0, rel=1e-12)

    def test_infeasible_fps(self):
        cam = iphone6s_like()
        with pytest.raises(ConfigurationError):
            frame_schedule(cam, 60.0, frames=1)

    def test_max_fps_zero_gap(self):
        cam = iphone6s_like()
        timing = frame_schedule(cam, cam.max_fps(), frames=2)
        assert timing.gap <= 1e-12

    def test_long_gap_loses_symbols(self):
        cam = iphone6s_like()
        timing = frame_schedule(cam, 30.0, frames=4)
        sym = 600e-6  # gap 13.8 ms holds many whole symbols
        lost, total = lost_symbol_count(timing, sym, 0.0, 4 / 30.0)
        assert lost >= 3 * int(timing.gap / sym - 1)

    def test_zero_gap_no_loss(self):
        cam = iphone6s_like()
        timing = frame_schedule(cam, cam.max_fps(), frames=4)
        lost, total = lost_symbol_count(timing, 600e-6, 0.0, 4 / cam.max_fps())
        assert lost == 0 and total > 0


class TestTexture:
    def test_validation(self):
        with pytest.raises(ValueError):
            TextureLayer(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            TextureLayer(np.array([[1.0, -2.0]]))

    def test_constructors(self):
        v = TextureLayer.vignette(10, 21)
        assert v.amplitude[0, 10] == v.amplitude.max()
        g = TextureLayer.vertical_gradient(50, 3, ratio=10.0)
        assert g.amplitude[-1, 0] / g.amplitude[0, 0] == pytest.approx(10.0)
