"""End-to-end experiment runner and parameter sweeps.

Composes the full pipeline: fountain-encode (optional), bit packing,
waveform synthesis, optical superposition, rolling-shutter capture of one
long reference plus the short frames, signal recovery, demodulation, bit
unpacking and fountain decode, with exact ground-truth bookkeeping of what
fell into inter-frame gaps.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import fountain as ft
from .channel import (CAMERA_PROFILES, CameraProfile, ChannelProfile,
                      ConfigurationError, StepSignal, TextureLayer,
                      capture_frame, capture_row_profile, frame_schedule,
                      lost_symbol_count, superpose)
from .demod import PhaseCalibration
from .frontend import dc_filter, recover_signal_layer
from .receiver import extract_packets
from .metrics import MetricsReport, compute_metrics
from .modem import (SubcarrierPlan, SymbolPacket, modulate_message, pack_bits,
                    packet_duration, select_symbol_duration, unpack_symbols)


@dataclass(frozen=True)
class FountainConfig:
    c: float = 0.1
    delta: float = 0.5


@dataclass
class ExperimentConfig:
    """Everything one run needs; serializable and replayable from the seed."""

    transmitters: int = 3
    symbols_per_packet: int = 4
    time_unit: float = 100e-6
    symbol_units: int | None = None            # default: minimal for count
    subcarriers: tuple[int, ...] | None = None
    camera: CameraProfile | str = "iphone6s"
    fps: float = 30.0
    frames: int = 4
    frame_phase: float | None = None           # None: seeded random in one packet
    exposure: float | None = None              # short exposure; default = time_unit
    sensor_gain: float = 40.0
    long_factor: float = 100.0
    texture: str = "flat"                      # flat | vignette | gradient
    texture_ratio: float = 10.0
    gain: float = 1.0
    ambient: float = 0.0
    gain_mismatch: float = 0.0
    noise_floor: float = 0.0
    message_bits: int = 240
    message: np.ndarray | None = None
    fountain: FountainConfig | None = None
    master_seed: int = 0
    render: str = "rows"                       # rows | pixels

    def build_plan(self) -> SubcarrierPlan:
        if self.symbol_units is None or self.subcarriers is None:
            units, subs = select_symbol_duration(self.transmitters)
        else:
            units, subs = self.symbol_units, tuple(self.subcarriers)
        return SubcarrierPlan(units, subs, self.time_unit)

    def build_camera(self) -> CameraProfile:
        # noise_floor on the config is the experiment's noise knob; it
        # overrides whatever the profile instance carries so sweeps work
        if isinstance(self.camera, CameraProfile):
            return dataclasses.replace(self.camera, noise_floor=self.noise_floor)
        try:
            return CAMERA_PROFILES[self.camera](noise_floor=self.noise_floor)
        except KeyError:
            raise ConfigurationError(f"unknown camera profile {self.camera!r}")

    def build_texture(self, camera: CameraProfile) -> TextureLayer:
        if isinstance(self.texture, TextureLayer):
            return self.texture
        if self.texture == "flat":
            return TextureLayer.flat(camera.rows, camera.cols)
        if self.texture == "vignette":
            return TextureLayer.vignette(camera.rows, camera.cols)
        if self.texture == "gradient":
            return TextureLayer.vertical_gradient(camera.rows, camera.cols,
                                                  ratio=self.texture_ratio)
        raise ConfigurationError(f"unknown texture {self.texture!r}")


@dataclass
class PacketObservation:
    """One extracted packet, matched back to its transmitted index."""

    frame: int
    stream_index: int
    valid: bool
    bits: np.ndarray | None
    symbols: dict
    position: float
    readout_estimate: float
    confidence_cost: float = 0.0


@dataclass
class RunResult:
    """Report plus the intermediate objects tests and tools inspect."""

    report: MetricsReport
    plan: SubcarrierPlan
    timing: object
    message: np.ndarray
    stream_packets: list[SymbolPacket]
    stream_bits: list[np.ndarray]
    observations: list[PacketObservation] = field(default_factory=list)
    recovered_message: np.ndarray | None = None
    frames: list = field(default_factory=list)
    scene: StepSignal | None = None
    long_profile: object = None


def _airtime_stream(config: ExperimentConfig, plan: SubcarrierPlan,
                    count: int, rng: np.random.Generator):
    """Message bits -> per-airtime-packet symbol packets and bit chunks."""
    s = config.symbols_per_packet
    block_bits = plan.bits_per_packet(s)
    if config.message is not None:
        message = np.asarray(config.message, dtype=np.uint8).ravel()
    else:
        message = rng.integers(0, 2, config.message_bits).astype(np.uint8)
    lt_packets = None
    if config.fountain is not None:
        source = ft.SourceBlockSet.from_bits(message, block_bits)
        dist = ft.robust_soliton(source.n, config.fountain.c, config.fountain.delta)
        lt_packets = ft.lt_encode_stream(source, int(rng.integers(2 ** 31)),
                                         count, dist)
        chunks = [np.frombuffer(p.payload, dtype=np.uint8) for p in lt_packets]
        packets = []
        for chunk in chunks:
            pkt, pad = pack_bits(chunk, plan, s)
            assert len(pkt) == 1 and pad == 0
            packets.append(pkt[0])
        return message, packets, chunks, lt_packets, source
    base_packets, pad = pack_bits(message, plan, s)
    padded = np.concatenate([message, np.zeros(pad, dtype=np.uint8)])
    base_chunks = [padded[k * block_bits:(k + 1) * block_bits]
                   for k in range(len(base_packets))]
    packets = [base_packets[k % len(base_packets)] for k in range(count)]
    chunks = [base_chunks[k % len(base_chunks)] for k in range(count)]
    return message, packets, chunks, None, None


def run_end_to_end(config: ExperimentConfig) -> RunResult:
    """Run one full experiment; deterministic in the master seed."""
    plan = config.build_plan()
    camera = config.build_camera()
    s = config.symbols_per_packet
    exposure = config.exposure if config.exposure is not None else config.time_unit
    if exposure > config.time_unit * 1.0000001:
        raise ConfigurationError("exposure beyond the pulse duration loses "
                                 "the waveform's spatial detail")
    if config.long_factor > camera.max_gain_ratio:
        raise ConfigurationError(
            f"long/short split of {config.long_factor:.0f}x exceeds the "
            f"sensor's {camera.max_gain_ratio:.0f}x ISO range")
    pkt_units = packet_duration(plan, s)
    pkt_seconds = pkt_units * config.time_unit

    ss = np.random.SeedSequence(config.master_seed)
    (seed_msg, seed_mismatch, seed_phase, seed_long,
     seed_frames) = ss.spawn(5)
    rng_msg = np.random.default_rng(seed_msg)

    # frames start after the one-time long reference capture
    long_exposure = config.long_factor * exposure
    long_span = camera.signal_span + long_exposure
    if config.frame_phase is not None:
        phase = long_span + config.frame_phase
    else:
        phase = long_span + np.random.default_rng(seed_phase).uniform(0, pkt_seconds)
    timing = frame_schedule(camera, config.fps, config.frames, phase)
    run_end = timing.frame_starts[-1] + camera.signal_span + exposure
    count = int(np.ceil(run_end / pkt_seconds)) + 1

    message, packets, chunks, lt_packets, source = _airtime_stream(
        config, plan, count, rng_msg)
    waveforms = modulate_message(packets, plan)
    channel = ChannelProfile.equal_gains(
        plan.transmitter_count, config.gain, config.ambient,
        config.gain_mismatch, seed=int(np.random.default_rng(seed_mismatch).integers(2 ** 31)))
    scene = superpose(waveforms, channel, config.time_unit)
    texture = config.build_texture(camera)
    calibration = PhaseCalibration.for_plan(plan)

    use_pixels = config.render == "pixels"
    grab = capture_frame if use_pixels else capture_row_profile
    stochastic = config.noise_floor > 0 or camera.shot_scale
    rng_long = np.random.default_rng(seed_long) if stochastic else None
    long_capture = grab(scene, camera, texture, 0.0,
                        config.sensor_gain / config.long_factor, long_exposure,
                        rng_long)
    long_profile = long_capture.row_profile() if use_pixels else long_capture

    n_i_nominal = config.time_unit / camera.readout
    dc_window = max(int(round(plan.symbol_units * n_i_nominal)), 3)
    frame_seeds = seed_frames.spawn(config.frames)

    report = MetricsReport(frames=config.frames, fps=config.fps)
    result = RunResult(report, plan, timing, message, packets, chunks,
                       scene=scene, long_profile=long_profile)
    seen: dict[int, PacketObservation] = {}

    for k, frame_start in enumerate(timing.frame_starts):
        rng_k = np.random.default_rng(frame_seeds[k]) if stochastic else None
        short = grab(scene, camera, texture, frame_start, config.sensor_gain,
                     exposure, rng_k)
        if use_pixels:
            result.frames.append(short)
            short = short.row_profile()
        layer = recover_signal_layer(short, long_profile)
        filtered = dc_filter(layer, dc_window)
        extracted, _ = extract_packets(filtered, plan, s, calibration,
                                       expected_n_i=n_i_nominal)
        extracted_here = 0
        for pkt in extracted:
            seq, decoded = pkt.sequence, pkt.decoded
            t_start = frame_start + seq.offset * camera.readout
            stream_index = int(np.round(t_start / pkt_seconds))
            if not 0 <= stream_index < count:
                continue
            extracted_here += 1
            obs = PacketObservation(
                frame=k, stream_index=stream_index, valid=decoded.valid,
                bits=unpack_symbols([SymbolPacket(decoded.symbols)], plan),
                symbols=decoded.symbols, position=seq.offset,
                readout_estimate=seq.readout_estimate,
                confidence_cost=pkt.confidence_cost)
            result.observations.append(obs)
            if stream_index not in seen or (obs.valid and not seen[stream_index].valid):
                seen[stream_index] = obs
        report.packets_extracted += extracted_here
        if extracted_here:
            report.frames_decoded += 1
        # the frame is an eligible p_f trial only if a whole packet fit it
        first_whole = int(np.ceil(frame_start / pkt_seconds))
        if (first_whole + 1) * pkt_seconds <= frame_start + camera.signal_span:
            report.frames_eligible += 1

    # ground-truth comparison and symbol/bit accounting
    run_start = timing.frame_starts[0]
    on_air = [idx for idx in range(count)
              if idx * pkt_seconds < run_end and (idx + 1) * pkt_seconds > run_start]
    symbols_each = s * plan.transmitter_count  # one per subcarrier per window
    report.packets_transmitted = len(on_air)
    report.symbols_transmitted = len(on_air) * symbols_each
    for obs in result.observations:
        truth_bits = chunks[obs.stream_index]
        wrong = int(np.count_nonzero(obs.bits != truth_bits))
        # every extracted packet's bits count toward the BER; validity
        # gates throughput accounting and the fountain feed
        report.decoded_bits += truth_bits.size
        report.wrong_bits += wrong
        if obs.valid:
            report.packets_valid += 1
            report.valid_bits += truth_bits.size
    # conservation over unique packets, using the preferred observation
    for idx, obs in seen.items():
        truth_sym = packets[idx].symbols
        report.symbols_decoded += symbols_each
        report.symbols_errored += sum(
            a != b for i in plan.subcarriers
            for a, b in zip(obs.symbols[i], truth_sym[i]))
    report.symbols_lost = report.symbols_transmitted - report.symbols_decoded

    # independent gap bookkeeping over the frame run
    sym_s = plan.symbol_units * config.time_unit
    lost, total = lost_symbol_count(timing, sym_s, 0.0, scene.end)
    report.gap_lost_symbols, report.gap_total_symbols = lost, total

    if config.fountain is not None:
        decoder = ft.DecoderState(source.n)
        rx = [ft.EncodedPacket(source.n, lt_packets[o.stream_index].indices,
                               o.bits.tobytes(), seq=o.stream_index)
              for o in seen.values() if o.valid]
        try:
            decoder = ft.lt_decode(rx, source.n, decoder)
            report.lt_released = len(decoder.released)
            if decoder.complete:
                recovered = ft.SourceBlockSet(tuple(decoder.blocks()),
                                              source.block_bits, source.pad_bits)
                result.recovered_message = recovered.message_bits()
                report.lt_recovered = bool(
                    np.array_equal(result.recovered_message, message))
            else:
                report.lt_recovered = False
        except ft.FountainCorruptionError:
            report.lt_recovered = False
    compute_metrics(report)
    return result


SWEEP_AXES = ("transmitters", "packet_duration", "fps", "exposure",
              "noise", "gain_mismatch")

CSV_COLUMNS = ("status", "axis", "value", "seed", "frames", "frame_throughput",
               "throughput_bps", "ber", "p_f", "p_p", "p_b", "p_e",
               "symbol_loss_ratio", "packets_extracted", "packets_valid",
               "decoded_bits", "lt_recovered")


@dataclass
class SweepPoint:
    status: str
    axis: str
    value: object
    seed: int
    report: MetricsReport | None = None
    ideal_frame_throughput: float | None = None
    ideal_throughput_bps: float | None = None

    def as_row(self) -> list:
        if self.report is not None:
            r = self.report
            vals = [self.status, self.axis, self.value, self.seed, r.frames,
                    r.frame_throughput, r.throughput_bps, r.ber, r.p_f, r.p_p,
                    r.p_b, r.p_e, r.symbol_loss_ratio, r.packets_extracted,
                    r.packets_valid, r.decoded_bits, r.lt_recovered]
        else:
            vals = [self.status, self.axis, self.value, self.seed, "",
                    self.ideal_frame_throughput, self.ideal_throughput_bps,
                    "", "", "", "", "", "", "", "", "", ""]
        return vals


@dataclass
class SweepResult:
    axis: str
    points: list[SweepPoint]
    aggregates: list[dict]   # per grid value: mean/ci of throughput and ber


def _apply_axis(config: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "packet_duration":
        return dataclasses.replace(config, symbols_per_packet=int(value))
    if axis == "exposure":
        return dataclasses.replace(config, time_unit=float(value),
                                   exposure=float(value))
    if axis == "noise":
        return dataclasses.replace(config, noise_floor=float(value))
    if axis == "gain_mismatch":
        return dataclasses.replace(config, gain_mismatch=float(value))
    raise ConfigurationError(f"axis {axis!r} is not simulated")


def sweep(config: ExperimentConfig, axis: str, grid, seeds: int = 30,
          accounting: str = "fractional") -> SweepResult:
    """One row per grid point per seed; infeasible points become skip rows.

    The transmitters and fps axes are closed-form idealizations (no symbol
    loss and expected whole packets, respectively); the other axes run the
    full simulation per seed.
    """
    from .metrics import achievable_frame_throughput

    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"unknown sweep axis {axis!r}; "
                                 f"expected one of {SWEEP_AXES}")
    points: list[SweepPoint] = []
    aggregates: list[dict] = []
    camera = config.build_camera()
    if axis == "transmitters":
        for value in grid:
            units, subs = select_symbol_duration(int(value))
            plan = SubcarrierPlan(units, subs, config.time_unit)
            ft_bits = achievable_frame_throughput(
                camera, plan, config.symbols_per_packet, accounting, "no_loss")
            points.append(SweepPoint("ideal", axis, int(value), -1,
                                     ideal_frame_throughput=ft_bits,
                                     ideal_throughput_bps=ft_bits * config.fps))
        return SweepResult(axis, points, aggregates)
    if axis == "fps":
        plan = config.build_plan()
        for value in grid:
            rows, fps = value
            cam = dataclasses.replace(camera, rows=int(rows))
            if 1.0 / fps < cam.signal_span:
                points.append(SweepPoint(f"skipped:fps {fps} infeasible at "
                                         f"{rows} rows", axis, value, -1))
                continue
            ft_bits = achievable_frame_throughput(
                cam, plan, config.symbols_per_packet, accounting,
                "complete_packets")
            points.append(SweepPoint("ideal", axis, value, -1,
                                     ideal_frame_throughput=ft_bits,
                                     ideal_throughput_bps=ft_bits * fps))
        return SweepResult(axis, points, aggregates)

    for value in grid:
        reports = []
        for seed in range(seeds):
            try:
                cfg = _apply_axis(config, axis, value)
                cfg = dataclasses.replace(cfg, master_seed=config.master_seed
                                          + 7919 * seed)
                result = run_end_to_end(cfg)
            except ConfigurationError as err:
                points.append(SweepPoint(f"skipped:{err}", axis, value, seed))
                continue
            points.append(SweepPoint("ok", axis, value, seed, report=result.report))
            reports.append(result.report)
        if reports:
            th = np.array([r.throughput_bps for r in reports])
            ber = np.array([r.ber for r in reports])
            n = len(reports)
            aggregates.append({
                "axis": axis, "value": value, "n": n,
                "throughput_mean": th.mean(),
                "throughput_ci95": 1.96 * th.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0,
                "ber_mean": ber.mean(),
                "ber_ci95": 1.96 * ber.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0,
            })
    return SweepResult(axis, points, aggregates)
