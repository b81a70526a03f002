"""Successive subcarrier cancellation, one DFT bin at a time.

A symbol window is the sum of square waves whose cycle counts divide the
window length.  Each square puts energy only on its odd harmonics, so
peeling from the slowest subcarrier upward leaves every fundamental clean
for phase reading.  Processing the set in the wrong order demonstrates why.

Run:  python demos/04_demodulation_walkthrough.py
"""

import numpy as np

from lightlink import SubcarrierPlan, symbol_unit_levels
from lightlink.demod import (PhaseCalibration, demodulate_window,
                             reconstruct_subcarrier)

plan = SubcarrierPlan(12, (1, 2, 3, 4, 6), time_unit=100e-6)
calib = PhaseCalibration.for_plan(plan)
rng = np.random.default_rng(13)
truth = {i: int(rng.integers(0, plan.order(i))) for i in plan.subcarriers}
print("transmitted symbols:", truth)

window = np.zeros(12)
for i, s in truth.items():
    window += symbol_unit_levels(i, 12, s)
print("superposed window:  ", window.astype(int).tolist())

spectrum = np.fft.rfft(window)
print("\n|X[bin]| before any cancellation:")
print("  " + "  ".join(f"{b}:{abs(v):5.2f}" for b, v in enumerate(spectrum)))

print("\npeeling, ascending:")
cancelled = spectrum.copy()
for i in plan.subcarriers:
    reading = cancelled[i]
    n = plan.order(i)
    raw = (np.angle(reading) - calib.offsets[i]) * 12 / (2 * np.pi * i)
    symbol = int(np.floor(raw % n + 0.5)) % n
    recon = np.fft.rfft(reconstruct_subcarrier(i, symbol, 12))
    cancelled = cancelled - recon
    print(f"  bin {i}: |X|={abs(reading):5.2f} phase {np.angle(reading):+5.2f}"
          f" -> S={symbol} (true {truth[i]}); residual there "
          f"{abs(cancelled[i]):.1e}")

out = demodulate_window(window, plan, calib)
print("decoded:", out.symbols, "all confident:", not out.low_confidence)

desc = demodulate_window(window, plan, calib, descending=True)
print("\nsame window, descending order:")
for i in plan.subcarriers:
    note = " <- contaminated" if desc.confidence[i] > 0.02 else ""
    print(f"  bin {i}: margin {desc.confidence[i]:.3f} "
          f"(ascending {out.confidence[i]:.1e}){note}")
print("  lower subcarriers' odd harmonics were still sitting on the bins;")
print("  the eaten margin is exactly the noise budget the decoder loses")
