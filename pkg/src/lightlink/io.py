"""File formats: 16-bit graymaps, golden vectors, sweep CSV, run configs.

Frames are dumped as binary PGM (P5, maxval 65535, big-endian) with a JSON
sidecar carrying the float scale and capture metadata, so a dumped frame
can be decoded offline with no access to the simulator state.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .channel import FrameImage
from .modem import SubcarrierPlan, SymbolPacket

PGM_MAXVAL = 65535


class InputFormatError(ValueError):
    """Malformed image, sidecar or golden-vector input."""


def pgm_write(path, pixels: np.ndarray) -> float:
    """Write a float image as 16-bit PGM; returns the counts-per-unit scale."""
    pixels = np.asarray(pixels, dtype=float)
    if pixels.ndim != 2:
        raise InputFormatError("PGM dump needs a 2-D array")
    top = float(pixels.max(initial=0.0))
    scale = (PGM_MAXVAL * 0.98) / top if top > 0 else 1.0
    quantized = np.clip(np.rint(pixels * scale), 0, PGM_MAXVAL).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n{PGM_MAXVAL}\n".encode())
        fh.write(quantized.tobytes())
    return scale


def pgm_read(path) -> np.ndarray:
    """Read a binary PGM (8- or 16-bit) into a float array of counts."""
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise InputFormatError(f"{path}: not a binary PGM (P5) file")
    cols, rows, maxval = (int(g) for g in m.groups())
    raster = data[m.end():]
    dtype = ">u2" if maxval > 255 else "u1"
    expected = rows * cols * (2 if maxval > 255 else 1)
    if len(raster) < expected:
        raise InputFormatError(f"{path}: raster truncated "
                               f"({len(raster)} < {expected} bytes)")
    pixels = np.frombuffer(raster[:expected], dtype=dtype).astype(float)
    return pixels.reshape(rows, cols)


def dump_frame(path, frame: FrameImage) -> None:
    """PGM plus a JSON sidecar (same stem, .json) with scale and timing."""
    path = Path(path)
    scale = pgm_write(path, frame.pixels)
    sidecar = {
        "scale": scale,
        "frame_start": frame.frame_start,
        "exposure": frame.exposure,
        "gain": frame.gain,
        "readout": frame.readout,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=1))


def load_frame(path) -> FrameImage:
    path = Path(path)
    sidecar_path = path.with_suffix(".json")
    if not sidecar_path.exists():
        raise InputFormatError(f"missing sidecar {sidecar_path}")
    try:
        meta = json.loads(sidecar_path.read_text())
        pixels = pgm_read(path) / float(meta["scale"])
        return FrameImage(pixels, frame_start=float(meta["frame_start"]),
                          exposure=float(meta["exposure"]),
                          gain=float(meta["gain"]),
                          readout=float(meta["readout"]))
    except (KeyError, TypeError, ValueError) as err:
        raise InputFormatError(f"{sidecar_path}: bad sidecar field: {err}")


def write_csv(path, columns, rows) -> None:
    """Plain CSV with a fixed column order and stable float formatting."""
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.12g}"
        return "" if v is None else str(v)

    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# golden vectors: cross-implementation fixtures as delimited text


def write_golden(path, plan: SubcarrierPlan, symbols_per_packet: int,
                 packets: list[SymbolPacket], unit_levels: np.ndarray,
                 level_trace: np.ndarray | None = None,
                 expected: list[dict] | None = None) -> None:
    """Plan, per-subcarrier symbols, per-unit levels, and expected decodes."""
    lines = [
        "# lightlink golden vectors v1",
        f"plan\t{plan.symbol_units}\t{','.join(map(str, plan.subcarriers))}"
        f"\t{plan.time_unit:.9g}\t{symbols_per_packet}",
    ]
    for idx, packet in enumerate(packets):
        for i in plan.subcarriers:
            row = ",".join(str(v) for v in packet.symbols[i])
            lines.append(f"symbols\t{idx}\t{i}\t{row}")
    lines.append("levels\t" + ",".join(f"{v:.9g}" for v in np.asarray(unit_levels)))
    if level_trace is not None:
        lines.append("trace\t" + ",".join(f"{v:.9g}" for v in np.asarray(level_trace)))
    for entry in expected or []:
        lines.append(f"decode\t{entry['packet']}\t{entry['subcarrier']}\t"
                     + ",".join(str(v) for v in entry["symbols"]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_golden(path) -> dict:
    """Parse golden vectors back; raises with line diagnostics."""
    out = {"packets": {}, "expected": [], "levels": None, "trace": None}
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        try:
            kind = parts[0]
            if kind == "plan":
                out["plan"] = SubcarrierPlan(
                    int(parts[1]), tuple(int(v) for v in parts[2].split(",")),
                    float(parts[3]))
                out["symbols_per_packet"] = int(parts[4])
            elif kind == "symbols":
                idx, sub = int(parts[1]), int(parts[2])
                vals = tuple(int(v) for v in parts[3].split(","))
                out["packets"].setdefault(idx, {})[sub] = vals
            elif kind == "levels":
                out["levels"] = np.array([float(v) for v in parts[1].split(",")])
            elif kind == "trace":
                out["trace"] = np.array([float(v) for v in parts[1].split(",")])
            elif kind == "decode":
                out["expected"].append({
                    "packet": int(parts[1]), "subcarrier": int(parts[2]),
                    "symbols": tuple(int(v) for v in parts[3].split(","))})
            else:
                raise ValueError(f"unknown record {kind!r}")
        except (IndexError, ValueError) as err:
            raise InputFormatError(f"{path}:{ln}: {err}")
    if "plan" not in out:
        raise InputFormatError(f"{path}: no plan record")
    out["packets"] = [SymbolPacket(out["packets"][k])
                      for k in sorted(out["packets"])]
    return out


# ---------------------------------------------------------------------------
# run configuration files (TOML or JSON)


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise InputFormatError(f"config file {path} not found")
    text = path.read_text()
    if path.suffix == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as err:
            raise InputFormatError(f"{path}: {err}")
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise InputFormatError(f"{path}: {err}")


def config_from_mapping(raw: dict):
    """Flatten a sectioned config mapping into an ExperimentConfig."""
    from .harness import ExperimentConfig, FountainConfig

    flat: dict = {}
    for key, value in raw.items():
        if key == "fountain":
            continue
        if isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    if "time_unit_us" in flat:
        raise InputFormatError("use time_unit (seconds), not time_unit_us")
    kwargs = {}
    fields = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
    for key, value in flat.items():
        if key not in fields:
            raise InputFormatError(f"unknown config field {key!r}")
        kwargs[key] = tuple(value) if key == "subcarriers" else value
    fountain_raw = raw.get("fountain")
    if isinstance(fountain_raw, dict) and fountain_raw.get("enabled", True):
        kwargs["fountain"] = FountainConfig(
            c=float(fountain_raw.get("c", 0.1)),
            delta=float(fountain_raw.get("delta", 0.5)))
    return ExperimentConfig(**kwargs)
