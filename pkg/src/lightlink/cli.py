"""Command line entry points: run, sweep, emit-golden, decode-image.

Failures print a machine-readable JSON error on stderr and exit nonzero:
2 for usage problems, 3 for bad configuration, 4 for malformed input.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .channel import ConfigurationError
from .fountain import FountainConfigError
from .frontend import FrontendError
from .io import (InputFormatError, config_from_mapping, dump_frame,
                 load_config_file, load_frame, write_csv, write_golden)
from .modem import PlanError

EXIT_CONFIG = 3
EXIT_INPUT = 4

_ERROR_CATEGORIES = {
    PlanError: ("config", EXIT_CONFIG),
    ConfigurationError: ("config", EXIT_CONFIG),
    FountainConfigError: ("config", EXIT_CONFIG),
    InputFormatError: ("input", EXIT_INPUT),
    FrontendError: ("input", EXIT_INPUT),
    FileNotFoundError: ("input", EXIT_INPUT),
}


def _fail(err: Exception) -> int:
    for cls, (category, code) in _ERROR_CATEGORIES.items():
        if isinstance(err, cls):
            print(json.dumps({"error": category, "message": str(err)}),
                  file=sys.stderr)
            return code
    raise err


def _cmd_run(args) -> int:
    from .harness import ExperimentConfig, run_end_to_end

    config = (config_from_mapping(load_config_file(args.config))
              if args.config else ExperimentConfig())
    if args.seed is not None:
        config = dataclasses.replace(config, master_seed=args.seed)
    if args.dump_frames:
        config = dataclasses.replace(config, render="pixels")
    result = run_end_to_end(config)
    report = result.report.as_row()
    report["lt_recovered"] = result.report.lt_recovered
    print(json.dumps(report, indent=1, default=str))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=1, default=str))
        for k, frame in enumerate(result.frames):
            dump_frame(out / f"frame_{k:03d}.pgm", frame)
    return 0


def _cmd_sweep(args) -> int:
    from .harness import CSV_COLUMNS, ExperimentConfig, sweep

    config = (config_from_mapping(load_config_file(args.config))
              if args.config else ExperimentConfig())
    if args.axis == "fps":
        grid = []
        for item in args.grid:
            rows, fps = item.split("x")
            grid.append((int(rows), float(fps)))
    elif args.axis in ("transmitters", "packet_duration"):
        grid = [int(v) for v in args.grid]
    else:
        grid = [float(v) for v in args.grid]
    result = sweep(config, args.axis, grid, seeds=args.seeds)
    rows = [p.as_row() for p in result.points]
    for agg in result.aggregates:
        rows.append(["aggregate", result.axis, agg["value"], agg["n"], "",
                     "", agg["throughput_mean"], agg["ber_mean"], "", "", "",
                     "", "", "", "", "",
                     f"ci95={agg['throughput_ci95']:.6g}/{agg['ber_ci95']:.6g}"])
    write_csv(args.out, CSV_COLUMNS, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_emit_golden(args) -> int:
    from .demod import PhaseCalibration, decode_packet, symbol_windows
    from .modem import (SubcarrierPlan, modulate_message, pack_bits,
                        select_symbol_duration)

    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for count in (1, 3, 5):
        units, subs = select_symbol_duration(count)
        plan = SubcarrierPlan(units, subs)
        bits = rng.integers(0, 2, 4 * plan.bits_per_packet(4)).astype(np.uint8)
        packets, _ = pack_bits(bits, plan, 4)
        waveforms = modulate_message(packets, plan)
        levels = np.sum([w.unit_levels() for w in waveforms], axis=0)
        calibration = PhaseCalibration.for_plan(plan)
        expected = []
        per_packet = 4 * plan.symbol_units + 4
        for idx in range(len(packets)):
            chunk = levels[idx * per_packet:(idx + 1) * per_packet].astype(float)
            windows, _ = symbol_windows(chunk, plan)
            decoded = decode_packet(windows, plan, calibration)
            for i in plan.subcarriers:
                expected.append({"packet": idx, "subcarrier": i,
                                 "symbols": decoded.symbols[i]})
        path = out / f"golden_tx{count}.tsv"
        write_golden(path, plan, 4, packets, levels, expected=expected)
        written.append(str(path))

    # fountain vectors: a seeded stream plus the blocks peeling releases
    from .fountain import DecoderState, SourceBlockSet, lt_decode, lt_encode_stream
    n = 12
    source = SourceBlockSet.from_bits(rng.integers(0, 2, n * 20).astype(np.uint8), 20)
    stream_seed = 424242
    stream = lt_encode_stream(source, stream_seed, count=3 * n)
    state = lt_decode(stream, n, DecoderState(n))
    lines = ["# lightlink fountain golden vectors v1",
             f"stream\t{stream_seed}\t{n}\t{source.block_bits}"]
    for p in stream:
        bits = "".join(map(str, np.frombuffer(p.payload, dtype=np.uint8)))
        lines.append(f"packet\t{p.seq}\t{','.join(map(str, p.indices))}\t{bits}")
    for k in sorted(state.released):
        bits = "".join(map(str, np.frombuffer(state.released[k], dtype=np.uint8)))
        lines.append(f"released\t{k}\t{bits}")
    fpath = out / "golden_fountain.tsv"
    fpath.write_text("\n".join(lines) + "\n")
    written.append(str(fpath))
    print(json.dumps({"written": written}))
    return 0


def _cmd_decode_image(args) -> int:
    from .demod import PhaseCalibration
    from .frontend import dc_filter, recover_signal_layer
    from .modem import SubcarrierPlan, SymbolPacket, unpack_symbols
    from .receiver import extract_packets

    params = load_config_file(args.params)
    try:
        plan = SubcarrierPlan(int(params["symbol_units"]),
                              tuple(params["subcarriers"]),
                              float(params["time_unit"]))
        symbols_per_packet = int(params["symbols_per_packet"])
    except KeyError as err:
        raise InputFormatError(f"{args.params}: missing field {err}")
    long_frame = load_frame(args.long)
    long_profile = long_frame.row_profile()
    hint = None
    if "readout_hint" in params:
        hint = plan.time_unit / float(params["readout_hint"])
    calibration = PhaseCalibration.for_plan(plan)
    decoded_out = []
    for short_path in args.short:
        short = load_frame(short_path).row_profile()
        layer = recover_signal_layer(short, long_profile)
        window = (max(int(round(plan.symbol_units * hint)), 3)
                  if hint else max(layer.rows // 16, 3))
        filtered = dc_filter(layer, window)
        extracted, _ = extract_packets(filtered, plan, symbols_per_packet,
                                       calibration, expected_n_i=hint)
        for pkt in extracted:
            seq, decoded = pkt.sequence, pkt.decoded
            entry = {"file": str(short_path), "position": seq.offset,
                     "readout_estimate": seq.readout_estimate,
                     "valid": decoded.valid,
                     "levels": [round(float(v), 6) for v in seq.values],
                     "symbols": {str(i): list(decoded.symbols[i])
                                 for i in plan.subcarriers}}
            if decoded.valid:
                bits = unpack_symbols([SymbolPacket(decoded.symbols)], plan)
                entry["bits"] = "".join(map(str, bits))
            decoded_out.append(entry)
        if args.trace:
            lines = ["# normalized level traces, one packet per row"]
            for entry in decoded_out:
                lines.append("\t".join(
                    [entry["file"], f"{entry['position']:.3f}"]
                    + [f"{v:.6g}" for v in entry["levels"]]))
            Path(args.trace).write_text("\n".join(lines) + "\n")
    payload = json.dumps({"packets": decoded_out}, indent=1)
    if args.out:
        Path(args.out).write_text(payload)
    print(payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lightlink",
        description="simulate and decode multi-LED to rolling-shutter-camera links")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one end-to-end experiment")
    p_run.add_argument("-c", "--config", help="TOML or JSON experiment config")
    p_run.add_argument("--seed", type=int, help="override the master seed")
    p_run.add_argument("-o", "--out", help="directory for report and frame dumps")
    p_run.add_argument("--dump-frames", action="store_true",
                       help="render full frames and dump them as PGM")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep one parameter axis to CSV")
    p_sweep.add_argument("-c", "--config")
    p_sweep.add_argument("--axis", required=True,
                         choices=["transmitters", "packet_duration", "fps",
                                  "exposure", "noise", "gain_mismatch"])
    p_sweep.add_argument("--grid", required=True, nargs="+",
                         help="grid values; fps axis takes ROWSxFPS items")
    p_sweep.add_argument("--seeds", type=int, default=30)
    p_sweep.add_argument("-o", "--out", required=True, help="output CSV path")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_gold = sub.add_parser("emit-golden",
                            help="write cross-implementation test vectors")
    p_gold.add_argument("-o", "--out", required=True, help="output directory")
    p_gold.add_argument("--seed", type=int, default=20240601)
    p_gold.set_defaults(func=_cmd_emit_golden)

    p_dec = sub.add_parser("decode-image",
                           help="decode dumped short/long frame pairs")
    p_dec.add_argument("--short", required=True, nargs="+",
                       help="short-exposure PGM frames (with .json sidecars)")
    p_dec.add_argument("--long", required=True,
                       help="long-exposure PGM frame (with .json sidecar)")
    p_dec.add_argument("--params", required=True,
                       help="JSON/TOML with plan parameters")
    p_dec.add_argument("-o", "--out", help="write the decode report here")
    p_dec.add_argument("--trace", help="also write level traces as TSV")
    p_dec.set_defaults(func=_cmd_decode_image)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as err:  # noqa: BLE001 - single reporting point
        return _fail(err)


if __name__ == "__main__":
    sys.exit(main())
