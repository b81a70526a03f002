"""Packet extraction: detection, anchor disambiguation, sampling, decode.

A preamble followed by data that happens to begin all-ON, all-OFF extends
the alternating pattern, so several detection anchors two units apart can
describe the same packet.  Each anchor is sampled and demodulated; anchors
are then clustered per packet and the best decode wins: valid first, then
the smallest total distance to the constellation, then the earliest
position.  A misanchored packet has windows straddling symbol boundaries,
which shows up as off-constellation phases, so the true anchor wins
whenever the decodes differ.
"""

from __future__ import annotations

from dataclasses import dataclass

from .demod import DecodedPacket, PhaseCalibration, decode_packet, symbol_windows
from .frontend import LevelSequence, RecoveredLayer, detect_preambles, sample_and_normalize
from .modem import SubcarrierPlan, packet_duration


@dataclass
class ExtractedPacket:
    sequence: LevelSequence
    decoded: DecodedPacket

    @property
    def confidence_cost(self) -> float:
        return float(sum(sum(v) for v in self.decoded.confidence.values()))


def extract_packets(layer: RecoveredLayer, plan: SubcarrierPlan,
                    symbols_per_packet: int,
                    calibration: PhaseCalibration | None = None,
                    expected_n_i: float | None = None,
                    threshold: float | None = None) -> tuple[list[ExtractedPacket], int]:
    """Decode every whole packet in a DC-filtered layer.

    Returns (packets sorted by position, discarded anchor count).  The
    layer must carry its subtracted baseline so amplitude anchors can be
    read from the raw ratio.
    """
    calibration = calibration or PhaseCalibration.for_plan(plan)
    kwargs = {} if threshold is None else {"threshold": threshold}
    detections = detect_preambles(layer, expected_n_i=expected_n_i,
                                  time_unit=plan.time_unit, **kwargs)
    sequences, discarded = sample_and_normalize(layer, detections, plan,
                                                symbols_per_packet)
    candidates = []
    for seq in sequences:
        windows, _ = symbol_windows(seq, plan)
        decoded = decode_packet(windows, plan, calibration,
                                expected_symbols=symbols_per_packet)
        candidates.append(ExtractedPacket(seq, decoded))
    # cluster anchors closer than half a packet: alternates of one packet
    pkt_units = packet_duration(plan, symbols_per_packet)
    chosen: list[ExtractedPacket] = []
    for cand in sorted(candidates, key=lambda c: c.sequence.offset):
        radius = 0.5 * pkt_units * cand.sequence.n_i
        if chosen and abs(cand.sequence.offset - chosen[-1].sequence.offset) < radius:
            best = chosen[-1]
            better = (cand.decoded.valid, -cand.confidence_cost) > \
                     (best.decoded.valid, -best.confidence_cost)
            if better:
                chosen[-1] = cand
            continue
        chosen.append(cand)
    # packet-grid consistency: true preambles are whole packet durations
    # apart, and every on-grid position holds a true preamble, so any
    # anchor off the grid of the most confident valid decode is a phantom
    # (data imitating the preamble, possible across symbol boundaries)
    valid = [c for c in chosen if c.decoded.valid]
    kept: list[ExtractedPacket] = []
    if valid:
        ref = min(valid, key=lambda c: c.confidence_cost)
        period = pkt_units * ref.sequence.n_i
        tol = 0.25 * ref.sequence.n_i
        for cand in chosen:
            lag = (cand.sequence.offset - ref.sequence.offset) % period
            if min(lag, period - lag) > tol:
                discarded += 1
                continue
            kept.append(cand)
    else:
        # no decode to anchor a grid on; drop invalid winners within two
        # units of either frame edge, where a boundary-cut packet's alias
        # cannot be told from a real anchor
        for cand in chosen:
            seq = cand.sequence
            near_start = seq.offset < 2 * seq.n_i + 2
            near_end = (seq.offset + (pkt_units + 2) * seq.n_i + 2
                        > layer.rows - 1)
            if near_start or near_end:
                discarded += 1
                continue
            kept.append(cand)
    return kept, discarded
