"""Shared test fixtures: small camera geometries and independent oracles."""

import numpy as np

from lightlink.channel import CameraProfile

# iPhone-like readout on a short sensor: fast frames, fractional rows/unit
IPHONE_READOUT = 19489.35e-6 / 3023


def small_camera(rows=1024, cols=64, noise_floor=0.0, **kw) -> CameraProfile:
    return CameraProfile(rows=rows, cols=cols, readout=IPHONE_READOUT,
                         noise_floor=noise_floor, **kw)


def gf2_solve(indices_list, payloads, n):
    """Gaussian elimination over GF(2); independent of the peeling decoder.

    indices_list: per packet, the set of source-block indices XORed in.
    payloads: per packet, a uint8 bit array.
    Returns (solved, blocks): blocks is an (n, bits) array when solved.
    """
    m = len(indices_list)
    if m == 0:
        return False, None
    width = payloads[0].size
    A = np.zeros((m, n), dtype=np.uint8)
    for r, idx in enumerate(indices_list):
        A[r, list(idx)] = 1
    B = np.array([p.copy() for p in payloads], dtype=np.uint8)
    row = 0
    for col in range(n):
        pivots = np.nonzero(A[row:, col])[0]
        if pivots.size == 0:
            return False, None
        p = row + pivots[0]
        A[[row, p]] = A[[p, row]]
        B[[row, p]] = B[[p, row]]
        others = np.nonzero(A[:, col])[0]
        for r in others:
            if r != row:
                A[r] ^= A[row]
                B[r] ^= B[row]
        row += 1
        if row == m:
            break
    if row < n:
        return False, None
    # rows were reduced in pivot order: row k holds block k
    blocks = np.zeros((n, width), dtype=np.uint8)
    for r in range(n):
        cols = np.nonzero(A[r])[0]
        if cols.size != 1:
            return False, None
        blocks[cols[0]] = B[r]
    return True, blocks
