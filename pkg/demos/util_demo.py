"""Shared helper for the demo scripts."""

from lightlink import CameraProfile


def small_camera(rows=1024, cols=64) -> CameraProfile:
    # iPhone-class readout on a short sensor keeps the demos quick
    return CameraProfile(rows=rows, cols=cols, readout=19489.35e-6 / 3023)
