"""Plan selection, bit packing, and square-wave phase keying, step by step.

Run:  python demos/01_modulation_basics.py
"""

import numpy as np

from lightlink import (SubcarrierPlan, modulate_message, pack_bits,
                       packet_duration, select_symbol_duration,
                       symbol_unit_levels, unpack_symbols)

# --- pick the smallest symbol duration that fits the transmitter count ----
print("symbol duration vs. transmitter count")
for count in range(1, 8):
    T, subs = select_symbol_duration(count)
    print(f"  {count} transmitters -> T = {T:2d} units, subcarriers {subs}")

# the classic three-transmitter setup: 100 us pulses, one symbol = 600 us
plan = SubcarrierPlan(6, (1, 2, 3), time_unit=100e-6)
print(f"\nplan: T={plan.symbol_units}, subcarriers {plan.subcarriers}, "
      f"slowest carrier {plan.carrier_floor_hz:.0f} Hz")
print(f"packet of 4 symbols lasts {packet_duration(plan, 4)} units = "
      f"{packet_duration(plan, 4) * plan.time_unit * 1e6:.0f} us")

# --- pack a message ---------------------------------------------------------
rng = np.random.default_rng(7)
bits = rng.integers(0, 2, 40).astype(np.uint8)
packets, pad = pack_bits(bits, plan, symbols_per_packet=4)
print(f"\n{bits.size} bits -> {len(packets)} packets (pad {pad} bits)")
for idx, packet in enumerate(packets):
    print(f"  packet {idx}:", {i: list(v) for i, v in packet.symbols.items()})
assert np.array_equal(unpack_symbols(packets, plan, pad), bits)
print("  unpack(pack(bits)) == bits")

# --- the phase shift is a whole-unit delay ----------------------------------
print("\nsubcarrier 1 (one cycle per symbol), all six phases:")
for s in range(6):
    levels = symbol_unit_levels(1, 6, s)
    print(f"  S={s}: " + "".join(".#"[v] for v in levels))

# --- per-LED schedules: preamble, then the keyed squares --------------------
waveforms = modulate_message(packets, plan)
print("\nper-LED ON/OFF schedules (first packet, # = ON):")
for wf in waveforms:
    chunk = wf.unit_levels()[:28]
    print(f"  LED {wf.led_id}: " + "".join(".#"[v] for v in chunk))
total = np.sum([wf.unit_levels() for wf in waveforms], axis=0)
print("  sum   : " + "".join(str(v) for v in total[:28]) +
      "   <- what the camera sees")
