"""Deterministic simulator and codec for multi-LED light-to-camera links.

Several LEDs flicker square-wave subcarriers onto a reflecting surface; a
rolling-shutter camera turns the superposed flicker into spatial bands,
and the receiver recovers each transmitter's phase-keyed symbols from a
dual-exposure image pair.  The package covers the whole chain: modem,
optical channel and camera model, signal recovery, DFT demodulation with
successive subcarrier cancellation, an LT fountain layer for the
unsynchronized channel, and an experiment harness with the link metrics.
"""

from .channel import (CameraProfile, ChannelProfile, ExposurePair, FrameImage,
                      FrameTiming, StepSignal, TextureLayer, capture_frame,
                      capture_pair, capture_row_profile, frame_schedule,
                      iphone6s_like, nexus5_like, superpose)
from .demod import (DecodedPacket, PhaseCalibration, WindowDecode,
                    decode_packet, demodulate_window, dump_spectra,
                    reconstruct_subcarrier, symbol_windows)
from .fountain import (DecoderState, EncodedPacket, SourceBlockSet,
                       ideal_soliton, lt_decode, lt_encode_stream,
                       robust_soliton)
from .frontend import (LevelSequence, PreambleDetection, RecoveredLayer,
                       RowProfile, dc_filter, detect_preambles,
                       estimate_readout, recover_signal_layer, row_sum,
                       sample_and_normalize)
from .harness import (ExperimentConfig, FountainConfig, RunResult,
                      run_end_to_end, sweep)
from .metrics import (MetricsReport, achievable_frame_throughput,
                      bits_per_packet, compute_metrics,
                      max_exposure_for_one_packet)
from .modem import (LedWaveform, PreambleSpec, SubcarrierPlan, SymbolPacket,
                    modulate_message, pack_bits, packet_duration,
                    plan_for_transmitters, select_symbol_duration,
                    subcarrier_level, symbol_unit_levels, unpack_symbols)
from .receiver import ExtractedPacket, extract_packets

__version__ = "0.1.0"
