"""How a rolling shutter turns flicker into bands, and what exposure does.

Renders a frame of the superposed carrier, shows the banded row profile,
and dumps a 16-bit graymap you can open in an image viewer.

Run:  python demos/02_rolling_shutter_capture.py
"""

import numpy as np

from lightlink import (CameraProfile, ChannelProfile, SubcarrierPlan,
                       TextureLayer, capture_frame, frame_schedule,
                       modulate_message, pack_bits, superpose)
from lightlink.io import dump_frame

tu = 100e-6
plan = SubcarrierPlan(6, (1, 2, 3), tu)
rng = np.random.default_rng(1)
packets, _ = pack_bits(rng.integers(0, 2, 200).astype(np.uint8), plan, 4)
scene = superpose(modulate_message(packets, plan),
                  ChannelProfile.equal_gains(3, gain=1.0, ambient=0.1), tu)

camera = CameraProfile(rows=512, cols=256, readout=tu / 8)  # 8 rows per unit
texture = TextureLayer.vignette(512, 256)

print(f"camera: {camera.rows} rows, readout {camera.readout * 1e6:.1f} us/row")
print(f"one frame records {camera.signal_span * 1e3:.2f} ms of signal")

frame = capture_frame(scene, camera, texture, frame_start=10 * tu,
                      gain=40.0, exposure=tu)
profile = frame.pixels.sum(axis=1)
profile = profile / profile.max()

print("\nrow profile (vertical bands; 64-row strips, # scaled to intensity):")
for r in range(0, 512, 64):
    bar = int(profile[r] * 50)
    print(f"  row {r:4d} |{'#' * bar}")

# exposure longer than the pulse smears the bands away
for exposure in (tu, 2 * tu, 6 * tu):
    f = capture_frame(scene, camera, texture, 10 * tu, 40.0, exposure)
    p = f.pixels.sum(axis=1)
    contrast = (p.max() - p.min()) / p.max()
    note = "(= pulse duration)" if exposure == tu else ""
    print(f"exposure {exposure * 1e6:4.0f} us: band contrast "
          f"{contrast:.2f} {note}")

# inter-frame gap at 30 fps
timing = frame_schedule(camera, 30.0, frames=2)
print(f"\nat 30 fps the camera idles {timing.gap * 1e3:.2f} ms between "
      f"frames; symbols wholly inside that gap are lost")

dump_frame("demo_frame.pgm", frame)
print("wrote demo_frame.pgm (+ .json sidecar)")
