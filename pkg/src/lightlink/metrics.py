"""Link metrics and the closed-form throughput/exposure relations."""

from __future__ import annotations

from dataclasses import dataclass, asdict

from .channel import CameraProfile
from .modem import PREAMBLE_UNITS, SubcarrierPlan, packet_duration

INTEGER = "integer"
FRACTIONAL = "fractional"
NO_LOSS = "no_loss"
COMPLETE_PACKETS = "complete_packets"


@dataclass
class MetricsReport:
    """Counters and derived rates for one experiment run.

    p_f: fraction of eligible frames with at least one extracted packet
    (frames that never saw a whole packet are excluded from the base);
    p_p: extracted packets that demodulated valid; p_b: 1 - BER over the
    decoded bits; p_e is computed from the product, exactly.
    """

    frames: int = 0
    frames_eligible: int = 0
    frames_decoded: int = 0
    packets_transmitted: int = 0
    packets_extracted: int = 0
    packets_valid: int = 0
    decoded_bits: int = 0   # bits of every extracted packet (BER base)
    valid_bits: int = 0     # bits of confidently decoded packets
    wrong_bits: int = 0
    symbols_transmitted: int = 0
    symbols_decoded: int = 0
    symbols_errored: int = 0
    symbols_lost: int = 0
    gap_lost_symbols: int = 0
    gap_total_symbols: int = 0
    fps: float = 0.0
    lt_recovered: bool | None = None
    lt_released: int = 0

    @property
    def p_f(self) -> float:
        return self.frames_decoded / self.frames_eligible if self.frames_eligible else 1.0

    @property
    def p_p(self) -> float:
        return self.packets_valid / self.packets_extracted if self.packets_extracted else 0.0

    @property
    def ber(self) -> float:
        return self.wrong_bits / self.decoded_bits if self.decoded_bits else 0.0

    @property
    def p_b(self) -> float:
        return 1.0 - self.ber

    @property
    def p_e(self) -> float:
        return 1.0 - self.p_f * self.p_p * self.p_b

    @property
    def frame_throughput(self) -> float:
        return self.valid_bits / self.frames if self.frames else 0.0

    @property
    def throughput_bps(self) -> float:
        return self.frame_throughput * self.fps

    @property
    def symbol_loss_ratio(self) -> float:
        return (self.gap_lost_symbols / self.gap_total_symbols
                if self.gap_total_symbols else 0.0)

    def as_row(self) -> dict:
        row = asdict(self)
        for name in ("p_f", "p_p", "p_b", "p_e", "ber", "frame_throughput",
                     "throughput_bps", "symbol_loss_ratio"):
            row[name] = getattr(self, name)
        return row


def compute_metrics(report: MetricsReport) -> MetricsReport:
    """Validate counter consistency; the rates are derived on access."""
    if report.symbols_decoded + report.symbols_lost != report.symbols_transmitted:
        raise ValueError("symbol accounting leak: decoded + lost != transmitted")
    if report.symbols_errored > report.symbols_decoded:
        raise ValueError("more errored than decoded symbols")
    return report


def bits_per_packet(plan: SubcarrierPlan, symbols_per_packet: int,
                    accounting: str = INTEGER) -> float:
    if accounting == INTEGER:
        return float(plan.bits_per_packet(symbols_per_packet))
    if accounting == FRACTIONAL:
        return float(plan.fractional_bits_per_packet(symbols_per_packet))
    raise ValueError(f"unknown accounting {accounting!r}")


def achievable_frame_throughput(camera: CameraProfile, plan: SubcarrierPlan,
                                symbols_per_packet: int,
                                accounting: str = INTEGER,
                                basis: str = NO_LOSS) -> float:
    """Bits per frame the camera geometry supports, in two idealizations.

    no_loss counts every signal unit the frame records at the packet's
    payload density (nothing discarded); complete_packets counts the
    expected number of wholly-contained packets under a uniformly random
    phase, which is what preamble-based extraction can actually use.
    """
    units = camera.signal_span / plan.time_unit
    pkt_units = packet_duration(plan, symbols_per_packet)
    bits = bits_per_packet(plan, symbols_per_packet, accounting)
    if basis == NO_LOSS:
        return units / pkt_units * bits
    if basis == COMPLETE_PACKETS:
        return max(units - pkt_units, 0.0) / pkt_units * bits
    raise ValueError(f"unknown basis {basis!r}")


def max_exposure_for_one_packet(camera: CameraProfile, plan: SubcarrierPlan,
                                symbols_per_packet: int) -> float:
    """Largest time unit guaranteeing a whole packet per frame, any alignment.

    Two packet durations must fit in the frame's signal span.
    """
    pkt_units = symbols_per_packet * plan.symbol_units + PREAMBLE_UNITS
    return camera.signal_span / (2 * pkt_units)
