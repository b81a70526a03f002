"""Multi-carrier square-wave PSK modem.

Each transmitter (LED) emits a square-wave subcarrier with ``i`` cycles per
symbol of ``T`` time units; data rides in the phase, shifted by whole time
units, so subcarrier ``i`` carries a ``T/i``-ary symbol.  The LED driver
dispatches ON/OFF states once per time unit, hence every emitted waveform is
piecewise constant on the unit grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_CARRIER_HZ = 200.0  # flicker floor for the slowest subcarrier
PREAMBLE_UNITS = 4


class PlanError(ValueError):
    """Raised when a subcarrier plan violates its constraints."""


@dataclass(frozen=True)
class SubcarrierPlan:
    """Symbol duration, subcarrier set and the real-time unit they ride on.

    symbol_units: symbol duration T, in time units.
    subcarriers: ascending cycle counts, one per transmitter; each must
        divide T and be at most T/2.
    time_unit: seconds per time unit (exposure duration = minimum pulse).
    """

    symbol_units: int
    subcarriers: tuple[int, ...]
    time_unit: float = 100e-6

    def __post_init__(self):
        object.__setattr__(self, "subcarriers", tuple(self.subcarriers))
        T = self.symbol_units
        if T < 2:
            raise PlanError(f"symbol duration {T} too short")
        if not self.subcarriers:
            raise PlanError("empty subcarrier set")
        if list(self.subcarriers) != sorted(set(self.subcarriers)):
            raise PlanError("subcarriers must be ascending and distinct")
        for i in self.subcarriers:
            if i < 1 or T % i != 0:
                raise PlanError(f"subcarrier {i} does not divide T={T}")
            if i > T // 2:
                raise PlanError(f"subcarrier {i} exceeds T/2={T // 2}")
        if self.time_unit <= 0:
            raise PlanError("time unit must be positive")
        if self.carrier_floor_hz < MIN_CARRIER_HZ:
            raise PlanError(
                f"slowest subcarrier {self.carrier_floor_hz:.1f} Hz is below "
                f"the {MIN_CARRIER_HZ:.0f} Hz flicker floor"
            )

    @property
    def transmitter_count(self) -> int:
        return len(self.subcarriers)

    @property
    def carrier_floor_hz(self) -> float:
        # subcarrier i completes i cycles per T*time_unit seconds
        return self.subcarriers[0] / (self.symbol_units * self.time_unit)

    def order(self, i: int) -> int:
        """PSK order of subcarrier i (number of distinct phases)."""
        return self.symbol_units // i

    def bits_per_subcarrier(self, i: int, symbols_per_packet: int) -> int:
        """Whole bits one subcarrier carries per packet.

        Largest b with 2**b <= N**s, computed in integer arithmetic so a
        power-of-two order never loses a bit to float rounding.
        """
        return (self.order(i) ** symbols_per_packet).bit_length() - 1

    def bits_per_packet(self, symbols_per_packet: int) -> int:
        return sum(self.bits_per_subcarrier(i, symbols_per_packet)
                   for i in self.subcarriers)

    def fractional_bits_per_packet(self, symbols_per_packet: int) -> float:
        """Idealized capacity s*sum(log2 N_i), before whole-bit framing."""
        return symbols_per_packet * sum(np.log2(self.order(i))
                                        for i in self.subcarriers)


def select_symbol_duration(transmitter_count: int) -> tuple[int, tuple[int, ...]]:
    """Smallest symbol duration that fits the transmitter count.

    Returns (T, subcarriers): the minimal T whose proper divisors number at
    least ``transmitter_count``, and the smallest ``transmitter_count`` of
    them.  Proper divisors of T are automatically <= T/2.
    """
    if transmitter_count < 1:
        raise ValueError("need at least one transmitter")
    T = 1
    while True:
        T += 1
        divisors = [d for d in range(1, T) if T % d == 0]
        if len(divisors) >= transmitter_count:
            return T, tuple(divisors[:transmitter_count])


def plan_for_transmitters(transmitter_count: int,
                          time_unit: float = 100e-6) -> SubcarrierPlan:
    """Convenience: minimal plan for a transmitter count."""
    T, subs = select_symbol_duration(transmitter_count)
    return SubcarrierPlan(T, subs, time_unit)


@dataclass(frozen=True)
class SymbolPacket:
    """One packet's symbols: a vector of s symbols per subcarrier."""

    symbols: dict[int, tuple[int, ...]]  # subcarrier -> s symbol values

    def symbols_per_packet(self) -> int:
        return len(next(iter(self.symbols.values())))


def _bits_to_int(bits: np.ndarray) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def _int_to_bits(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - k)) & 1 for k in range(width)]


def pack_bits(bits, plan: SubcarrierPlan,
              symbols_per_packet: int) -> tuple[list[SymbolPacket], int]:
    """Split a bit sequence into symbol packets.

    Per packet, each subcarrier consumes its whole-bit budget (ascending
    subcarrier order) and base-converts it to s most-significant-first
    digits of its PSK order.  The final packet is zero padded; the pad
    length in bits is returned alongside so unpacking can strip it.
    """
    if symbols_per_packet < 1:
        raise ValueError("symbols_per_packet must be >= 1")
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size and bits.max() > 1:
        raise ValueError("bits must be 0/1")
    per_packet = plan.bits_per_packet(symbols_per_packet)
    if bits.size == 0:
        return [], 0
    n_packets = -(-bits.size // per_packet)
    pad = n_packets * per_packet - bits.size
    padded = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    packets = []
    pos = 0
    for _ in range(n_packets):
        symbols: dict[int, tuple[int, ...]] = {}
        for i in plan.subcarriers:
            width = plan.bits_per_subcarrier(i, symbols_per_packet)
            value = _bits_to_int(padded[pos:pos + width])
            pos += width
            order = plan.order(i)
            digits = []
            for _ in range(symbols_per_packet):
                digits.append(value % order)
                value //= order
            symbols[i] = tuple(reversed(digits))
        packets.append(SymbolPacket(symbols))
    return packets, pad


def unpack_symbols(packets: list[SymbolPacket], plan: SubcarrierPlan,
                   pad: int = 0) -> np.ndarray:
    """Exact inverse of pack_bits; strips ``pad`` trailing bits."""
    out: list[int] = []
    for p_idx, packet in enumerate(packets):
        s = packet.symbols_per_packet()
        for i in plan.subcarriers:
            order = plan.order(i)
            value = 0
            for k, digit in enumerate(packet.symbols[i]):
                if not 0 <= digit < order:
                    raise ValueError(
                        f"symbol {digit} out of range [0,{order}) at "
                        f"subcarrier {i}, packet {p_idx}, position {k}")
                value = value * order + int(digit)
            out.extend(_int_to_bits(value, plan.bits_per_subcarrier(i, s)))
    if pad:
        out = out[:-pad]
    return np.array(out, dtype=np.uint8)


def subcarrier_level(i: int, symbol_units: int, symbol: int, t) -> np.ndarray:
    """Instantaneous level of subcarrier i at time t (units, real-valued).

    ON during the first half of each period; the phase shift is ``symbol``
    whole time units, i.e. the wave at t equals the base wave at t+symbol.
    """
    period = symbol_units / i
    if not 0 <= symbol < symbol_units // i:
        raise ValueError(f"symbol {symbol} out of range for order {symbol_units // i}")
    t = np.asarray(t, dtype=float)
    return (np.mod(t + symbol, period) < period / 2).astype(np.uint8)


def symbol_unit_levels(i: int, symbol_units: int, symbol: int) -> np.ndarray:
    """ON/OFF state dispatched per time unit over one symbol.

    The driver updates once per unit, so these are the levels actually
    emitted: the continuous wave sampled at integer unit times.
    """
    return subcarrier_level(i, symbol_units, symbol, np.arange(symbol_units))


@dataclass(frozen=True)
class PreambleSpec:
    """Known all-transmitter pattern marking each packet start."""

    pattern: tuple[int, ...] = (1, 0, 1, 0)

    def __post_init__(self):
        if len(self.pattern) != PREAMBLE_UNITS:
            raise ValueError(f"preamble must span {PREAMBLE_UNITS} units")

    @property
    def duration_units(self) -> int:
        return len(self.pattern)


@dataclass
class LedWaveform:
    """One LED's ON/OFF schedule on the unit grid.

    edges: (time in units, level) pairs, sorted, level constant until the
    next edge; total_duration in units.
    """

    led_id: int
    edges: list[tuple[int, int]] = field(default_factory=list)
    total_duration: int = 0

    @classmethod
    def from_unit_levels(cls, led_id: int, levels) -> "LedWaveform":
        levels = np.asarray(levels, dtype=np.uint8)
        edges = []
        prev = None
        for k, lv in enumerate(levels):
            if prev is None or lv != prev:
                edges.append((k, int(lv)))
                prev = lv
        return cls(led_id, edges, len(levels))

    def unit_levels(self) -> np.ndarray:
        levels = np.zeros(self.total_duration, dtype=np.uint8)
        for (t0, lv), nxt in zip(self.edges, self.edges[1:] + [(self.total_duration, 0)]):
            levels[t0:nxt[0]] = lv
        return levels

    def min_pulse_units(self) -> int:
        if len(self.edges) < 2:
            return self.total_duration
        times = [t for t, _ in self.edges] + [self.total_duration]
        return int(min(np.diff(times)))


def packet_duration(plan: SubcarrierPlan, symbols_per_packet: int) -> int:
    """Packet length in time units: data plus the 4-unit preamble."""
    return symbols_per_packet * plan.symbol_units + PREAMBLE_UNITS


def modulate_message(packets: list[SymbolPacket], plan: SubcarrierPlan,
                     preamble: PreambleSpec | None = None) -> list[LedWaveform]:
    """Synthesize per-transmitter schedules: [preamble | s symbols] per packet.

    All transmitters share the clock, so waveforms are inherently aligned;
    during the preamble every LED follows the same pattern, giving the
    full-superposition amplitude reference.
    """
    preamble = preamble or PreambleSpec()
    waveforms = []
    for led_id, i in enumerate(plan.subcarriers):
        chunks = []
        for packet in packets:
            chunks.append(np.array(preamble.pattern, dtype=np.uint8))
            for symbol in packet.symbols[i]:
                chunks.append(symbol_unit_levels(i, plan.symbol_units, symbol))
        levels = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.uint8)
        waveforms.append(LedWaveform.from_unit_levels(led_id, levels))
    return waveforms
