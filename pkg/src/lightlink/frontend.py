"""Receiver front end: from captured frames to normalized level sequences.

The signal layer of a short-exposure frame is piecewise linear in row time:
with exposure equal to the pulse duration, each time unit's true level
appears exactly at the unit-boundary knots and the profile ramps linearly
in between.  Sampling therefore fits short line segments between knots and
reads the knot values, which is exact at zero noise and averages many rows
per judging point under noise.  With a shorter exposure each unit instead
shows a flat plateau whose mean is the level.

Alignment and the rows-per-unit ratio are recovered from the packet
preamble, whose response is one and a half cycles of a triangle starting at
a peak: line fits on its four ramps intersect at the peak/valley corners,
giving the sub-row packet position, the unit width, and the amplitude
anchors used for normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modem import PREAMBLE_UNITS, SubcarrierPlan, packet_duration

RAMP_MODE_THRESHOLD = 0.95   # exposure/unit ratio above which units have no plateau
SEGMENT_MARGIN = 0.15        # fraction of a ramp kept clear of its knots
DEFAULT_NCC_THRESHOLD = 0.75
SWING_DOMINANCE = 0.55       # candidate swing vs. best swing in the frame


class FrontendError(ValueError):
    """Unusable capture or geometry for the front end."""


@dataclass
class RowProfile:
    """Per-row pixel sums of one frame, with its capture metadata."""

    values: np.ndarray
    frame_start: float = 0.0
    exposure: float = 0.0
    gain: float = 1.0
    readout: float = 0.0
    truncated: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size == 0:
            raise FrontendError("row profile must be a non-empty vector")

    @property
    def rows(self) -> int:
        return self.values.size


def row_sum(frame) -> RowProfile:
    """Collapse a frame to per-row sums; noise shrinks by sqrt(columns)."""
    if frame.pixels.size == 0:
        raise FrontendError("empty frame")
    return frame.row_profile()


@dataclass
class RecoveredLayer:
    """Texture-free signal layer g(y) (short/long row-sum ratio).

    ``valid`` masks rows where the long profile was above the positivity
    floor.  After dc_filter, ``baseline`` holds the subtracted moving
    average so the raw layer stays recoverable for amplitude work.
    """

    values: np.ndarray
    valid: np.ndarray
    exposure: float
    frame_start: float = 0.0
    readout: float = 0.0
    baseline: np.ndarray | None = None

    @property
    def rows(self) -> int:
        return self.values.size

    def raw_values(self) -> np.ndarray:
        return self.values if self.baseline is None else self.values + self.baseline


def recover_signal_layer(short: RowProfile, long: RowProfile,
                         floor_rel: float = 0.02) -> RecoveredLayer:
    """Divide the short profile by the long one; the texture cancels.

    The long capture is taken once and reused for every short frame.  Rows
    whose long-profile value sits below the positivity floor (a fraction of
    the frame's median long level, so legitimate texture dynamic range
    stays untouched) are degenerate and come back masked.
    """
    if short.rows != long.rows:
        raise FrontendError("short and long profiles differ in length")
    floor = floor_rel * float(np.median(long.values))
    valid = long.values > max(floor, 0.0)
    g = np.zeros(short.rows)
    g[valid] = short.values[valid] / long.values[valid]
    return RecoveredLayer(g, valid, exposure=short.exposure,
                          frame_start=short.frame_start, readout=short.readout)


def dc_filter(layer: RecoveredLayer, window_rows: int) -> RecoveredLayer:
    """Subtract a moving average one symbol wide; removes ambient and DC.

    The window shrinks symmetrically at the frame edges.  The subtracted
    baseline is kept on the result.
    """
    if window_rows < 1:
        raise FrontendError("window must be >= 1 row")
    v = np.where(layer.valid, layer.values, 0.0)
    w = np.where(layer.valid, 1.0, 0.0)
    half = window_rows // 2
    csum = np.concatenate([[0.0], np.cumsum(v)])
    ccnt = np.concatenate([[0.0], np.cumsum(w)])
    idx = np.arange(layer.rows)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + window_rows - half, layer.rows)
    cnt = np.maximum(ccnt[hi] - ccnt[lo], 1.0)
    baseline = (csum[hi] - csum[lo]) / cnt
    out = np.where(layer.valid, layer.values - baseline, 0.0)
    prior = layer.baseline if layer.baseline is not None else 0.0
    return RecoveredLayer(out, layer.valid, exposure=layer.exposure,
                          frame_start=layer.frame_start, readout=layer.readout,
                          baseline=baseline + prior)


@dataclass
class PreambleDetection:
    """One detected packet preamble.

    position: sub-row index of the first peak (= packet start knot).
    n_i: rows per time unit; the preamble spans 3*n_i rows peak to last
    valley.  peak/valley values are raw-layer amplitude anchors.
    """

    position: float
    n_i: float
    score: float
    peak_value: float
    valley_value: float
    exposure_units: float = 1.0

    @property
    def n_p(self) -> float:
        return 3.0 * self.n_i


def estimate_readout(detection: PreambleDetection, pulse_duration: float) -> float:
    """Readout duration from the preamble: one unit spans n_i rows."""
    if detection.n_i <= 0:
        raise FrontendError("detection with non-positive unit width")
    return pulse_duration / detection.n_i


def _preamble_template(n_i: float, te_units: float) -> np.ndarray:
    """Expected preamble response over u in [0, 3], zero-mean, unit norm."""
    length = int(round(3 * n_i)) + 1
    u = np.arange(length) / n_i

    def response(uu):
        # ON,OFF,ON,OFF convolved with a box te_units wide, anchored at the
        # first peak; each unit: plateau (1 - te) wide, then a ramp te wide
        uu = np.mod(uu, 2.0)  # the preamble is 2-periodic over [0,3]
        level = np.where(uu < 1.0, 1.0, 0.0)
        ramp = (uu - (1.0 - te_units)) / te_units
        level = np.where((uu >= 1.0 - te_units) & (uu < 1.0), 1.0 - ramp[...], level)
        ramp2 = (uu - (2.0 - te_units)) / te_units
        level = np.where(uu >= 2.0 - te_units, ramp2, level)
        return level

    t = response(u)
    t = t - t.mean()
    norm = np.linalg.norm(t)
    return t / norm if norm > 0 else t


def _fit_line(u: np.ndarray, y: np.ndarray, ok: np.ndarray,
              lo: float, hi: float) -> tuple[float, float] | None:
    sel = ok & (u >= lo) & (u <= hi)
    if np.count_nonzero(sel) < 2:
        return None
    x, yy = u[sel], y[sel]
    xm, ym = x.mean(), yy.mean()
    den = np.sum((x - xm) ** 2)
    if den <= 0:
        return None
    slope = np.sum((x - xm) * (yy - ym)) / den
    return slope, ym - slope * xm  # (slope, value at u=0)


def _intersect(l1, l2) -> tuple[float, float] | None:
    (b1, a1), (b2, a2) = l1, l2
    if abs(b1 - b2) < 1e-12:
        return None
    u = (a2 - a1) / (b1 - b2)
    return u, a1 + b1 * u


def _refine_preamble(raw: np.ndarray, ok: np.ndarray, r0: float, n_i: float,
                     te_units: float, score: float) -> PreambleDetection | None:
    """Sub-row corners of the preamble response via ramp line fits."""
    rows = np.arange(raw.size)
    u = (rows - r0) / n_i
    m = SEGMENT_MARGIN
    if te_units >= RAMP_MODE_THRESHOLD:
        # pure ramps: lines over (k, k+1) intersect at the corner knots
        windows = [(-1 + m, -m), (m, 1 - m), (1 + m, 2 - m),
                   (2 + m, 3 - m), (3 + m, 4 - m)]
        lines = [_fit_line(u, raw, ok, lo, hi) for lo, hi in windows]
        if any(l is None for l in lines[1:]):
            return None
        keypoints = []
        for la, lb in zip(lines[:-1], lines[1:]):
            keypoints.append(None if la is None else _intersect(la, lb))
    else:
        # each corner k: ramp te wide into it, then a plateau (1-te) wide;
        # a missing or slopeless ramp (previous level equal to this one)
        # leaves the corner unlocatable and it is reconstructed from the
        # other three, whose ramps always swing the full range
        te, plat = te_units, 1.0 - te_units
        fits = []
        for k in range(4):
            ramp = _fit_line(u, raw, ok, k - te * (1 - m), k - te * m)
            flat = _fit_line(u, raw, ok, k + m * plat, k + (1 - m) * plat)
            fits.append((ramp, flat))
        steep = max((abs(r[0]) for r, _ in [f for f in fits[1:] if f[0]]),
                    default=0.0)
        keypoints = []
        for ramp, flat in fits:
            if ramp is None or flat is None or abs(ramp[0]) < 0.3 * steep:
                keypoints.append(None)
                continue
            keypoints.append(_intersect(ramp, flat))
    if len(keypoints) < 4 or any(p is None for p in keypoints[1:4]):
        return None
    (u_v1, v_v1), (u_p2, v_p2), (u_v2, v_v2) = keypoints[1:4]
    # corners of a real preamble sit on the unit grid near the candidate
    if not (abs(u_v1 - 1) < 0.35 and abs(u_p2 - 2) < 0.35 and abs(u_v2 - 3) < 0.35):
        return None
    if keypoints[0] is not None and abs(keypoints[0][0]) < 0.35:
        u_p1, v_p1 = keypoints[0]
        spacing = ((u_p2 - u_p1) + (u_v2 - u_v1)) / 4.0
    else:
        # the signal level entering the preamble matched the peak, leaving
        # no usable first corner; anchor on the second peak instead
        spacing = (u_v2 - u_v1) / 2.0
        u_p1, v_p1 = u_p2 - 2.0 * spacing, v_p2
    n_i_ref = spacing * n_i
    if not 0.7 * n_i <= n_i_ref <= 1.4 * n_i:
        return None
    position = r0 + u_p1 * n_i
    peak = 0.5 * (v_p1 + v_p2)
    valley = 0.5 * (v_v1 + v_v2)
    if peak <= valley:
        return None
    # a real preamble repeats the same two extremes; grid-aligned data
    # patterns like high,mid,high,low form corners but unequal ones
    span = peak - valley
    if abs(v_p1 - v_p2) > 0.25 * span or abs(v_v1 - v_v2) > 0.25 * span:
        return None
    return PreambleDetection(position=position, n_i=n_i_ref, score=score,
                             peak_value=peak, valley_value=valley,
                             exposure_units=te_units)


def detect_preambles(layer: RecoveredLayer, expected_n_i: float | None = None,
                     time_unit: float | None = None,
                     threshold: float = DEFAULT_NCC_THRESHOLD,
                     swing_dominance: float = SWING_DOMINANCE):
    """Find packet preambles in a DC-filtered layer.

    Normalized cross-correlation against the triangle template flags
    candidates; because correlation is amplitude blind and data can mimic
    the preamble shape at partial swing, candidates must also reach a
    fraction of the strongest candidate swing (the preamble toggles every
    transmitter, so it owns the full amplitude range).  Survivors are
    refined to sub-row corners on the raw layer.

    Without an expected rows-per-unit hint a geometric grid of widths is
    scanned and the best-scoring width wins.
    """
    te_units = 1.0
    if time_unit is not None and time_unit > 0:
        te_units = min(layer.exposure / time_unit, 1.0) if layer.exposure else 1.0
    hints = ([expected_n_i] if expected_n_i
             else list(np.geomspace(4.0, 80.0, 28)))
    filtered = np.where(layer.valid, layer.values, 0.0)
    raw = layer.raw_values()
    best: dict[int, tuple[float, float]] = {}  # coarse row -> (score, n_i)
    for n_i in hints:
        if 3 * n_i + 2 >= layer.rows or n_i < 3:
            continue
        template = _preamble_template(n_i, te_units)
        L = template.size
        corr = np.correlate(filtered, template, mode="valid")
        csum = np.concatenate([[0.0], np.cumsum(filtered)])
        csq = np.concatenate([[0.0], np.cumsum(filtered ** 2)])
        wsum = csum[L:] - csum[:-L]
        wsq = csq[L:] - csq[:-L]
        var = np.maximum(wsq - wsum ** 2 / L, 1e-30)
        ncc = corr / np.sqrt(var)
        # greedy local maxima above threshold; the exclusion radius stays
        # below two units so that anchors of an extended alternating run
        # (data legally continuing the preamble pattern) all survive and
        # can be disambiguated by decoding
        exclusion = max(int(round(n_i)), 4)
        order = np.argsort(ncc)[::-1]
        taken: list[int] = []
        for r in order:
            if ncc[r] < threshold:
                break
            if all(abs(r - t) >= exclusion for t in taken):
                taken.append(int(r))
        for r in taken:
            key = min(best, key=lambda k: abs(k - r), default=None)
            # merge only same-peak candidates from different width hints;
            # anchors a couple of units apart are distinct and get
            # disambiguated downstream by decoding
            if key is not None and abs(key - r) < 0.75 * max(n_i, best[key][1]):
                if ncc[r] > best[key][0]:
                    del best[key]
                    best[r] = (float(ncc[r]), n_i)
            else:
                best[r] = (float(ncc[r]), n_i)
    if not best:
        return []
    swings = {}
    for r, (score, n_i) in best.items():
        stop = r + int(round(3 * n_i)) + 1
        span = raw[r:stop][layer.valid[r:stop]]
        swings[r] = float(span.max() - span.min()) if span.size > 1 else 0.0
    top = max(swings.values())
    detections = []
    for r, (score, n_i) in best.items():
        if top > 0 and swings[r] < swing_dominance * top:
            continue
        det = _refine_preamble(raw, layer.valid, float(r), n_i, te_units, score)
        if det is not None:
            detections.append(det)
    detections.sort(key=lambda d: d.position)
    # refinement can converge from neighbouring coarse rows to one corner
    deduped: list[PreambleDetection] = []
    for det in detections:
        if deduped and abs(det.position - deduped[-1].position) < 0.5 * det.n_i:
            if det.score > deduped[-1].score:
                deduped[-1] = det
            continue
        deduped.append(det)
    return deduped


@dataclass
class LevelSequence:
    """Normalized illumination levels, one per time unit of one packet.

    values[0:4] are the preamble units (full-superposition, 0, full, 0);
    the data units follow.  offset is the packet's sub-row start position.
    """

    values: np.ndarray
    offset: float
    n_i: float
    frame_start: float = 0.0
    readout_estimate: float = 0.0

    def data_values(self) -> np.ndarray:
        return self.values[PREAMBLE_UNITS:]


def _knot_levels(raw: np.ndarray, ok: np.ndarray, position: float, n_i: float,
                 n_units: int, te_units: float) -> np.ndarray | None:
    """Level of each of n_units consecutive units starting at ``position``.

    Ramp regime: least-squares lines on every inter-knot span, evaluated at
    the knots; each unit level averages its two one-sided estimates.
    Plateau regime: each unit's level is its plateau mean.
    """
    rows = np.arange(raw.size, dtype=float)
    u = (rows - position) / n_i
    if te_units >= RAMP_MODE_THRESHOLD:
        seg = np.floor(u).astype(int)
        frac = u - seg
        margin = max(SEGMENT_MARGIN, 1.5 / n_i)
        if margin >= 0.45:
            return None
        use = ok & (seg >= -1) & (seg < n_units) & (frac >= margin) & (frac <= 1 - margin)
        idx = seg[use] + 1
        x, y = frac[use], raw[use]
        nseg = n_units + 1
        cnt = np.bincount(idx, minlength=nseg).astype(float)
        sx = np.bincount(idx, weights=x, minlength=nseg)
        sy = np.bincount(idx, weights=y, minlength=nseg)
        sxx = np.bincount(idx, weights=x * x, minlength=nseg)
        sxy = np.bincount(idx, weights=x * y, minlength=nseg)
        den = cnt * sxx - sx ** 2
        good = (cnt >= 2) & (den > 1e-12)
        slope = np.zeros(nseg)
        slope[good] = (cnt[good] * sxy[good] - sx[good] * sy[good]) / den[good]
        intercept = np.zeros(nseg)
        intercept[good] = (sy[good] - slope[good] * sx[good]) / cnt[good]
        left = intercept          # segment value at its left knot
        right = intercept + slope  # at its right knot
        levels = np.zeros(n_units)
        for k in range(n_units):
            ests = []
            if good[k]:           # segment (k-1, k) ends at knot k
                ests.append(right[k])
            if good[k + 1]:       # segment (k, k+1) starts at knot k
                ests.append(left[k + 1])
            if not ests:
                return None
            levels[k] = np.mean(ests)
        return levels
    # plateau regime: unit k is flat on [k, k + 1 - te]
    plat = 1.0 - te_units
    seg = np.floor(u).astype(int)
    frac = u - seg
    use = ok & (seg >= 0) & (seg < n_units) & (frac >= 0.1 * plat) & (frac <= 0.9 * plat)
    cnt = np.bincount(seg[use], minlength=n_units).astype(float)
    if np.any(cnt < 1):
        return None
    sums = np.bincount(seg[use], weights=raw[use], minlength=n_units)
    return sums / cnt


def sample_and_normalize(layer: RecoveredLayer, detections,
                         plan: SubcarrierPlan, symbols_per_packet: int
                         ) -> tuple[list[LevelSequence], int]:
    """One judging value per time unit of each detected packet, on a 0..I scale.

    The affine map is anchored on the packet's own preamble: its peaks are
    the all-ON level (= transmitter count) and its valleys the all-OFF
    level, so ambient light and the recovery constant drop out.  Packets
    running past the layer end are discarded and counted as lost.
    """
    if not detections:
        return [], 0
    raw = layer.raw_values()
    n_tx = plan.transmitter_count
    total_units = packet_duration(plan, symbols_per_packet)
    sequences: list[LevelSequence] = []
    discarded = 0
    for det in detections:
        end_row = det.position + total_units * det.n_i + 2
        if det.position < 1 or end_row > layer.rows - 1:
            discarded += 1
            continue
        levels = _knot_levels(raw, layer.valid, det.position, det.n_i,
                              total_units, det.exposure_units)
        if levels is None:
            discarded += 1
            continue
        span = det.peak_value - det.valley_value
        normalized = n_tx * (levels - det.valley_value) / span
        # a preamble at partial swing (data mimicking the pattern) maps the
        # true levels outside the physical 0..I range; reject it
        if normalized.min() < -0.5 or normalized.max() > n_tx + 0.5:
            discarded += 1
            continue
        sequences.append(LevelSequence(
            normalized, offset=det.position, n_i=det.n_i,
            frame_start=layer.frame_start,
            readout_estimate=estimate_readout(det, plan.time_unit)))
    return sequences, discarded
