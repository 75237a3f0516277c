"""Command-line surface: fit, encode, decode, roundtrip, stats,
split-depth, simulate, vectors, bench.

Exit codes: 0 success, 1 usage, 2 I/O or format, 3 decode integrity,
4 lossless-check failure. Failures additionally emit one
machine-readable line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import codec, geometry, hierarchy, report, streamsim, vectors
from .bitstream import parse_frame, serialize_frame
from .errors import (
    CorruptStreamError,
    FormatError,
    InputError,
    IntegrityError,
    ParameterError,
)
from .predictor import LogitTableModel, fit_table

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_INTEGRITY = 3
EXIT_LOSSLESS = 4

POINT_SUFFIXES = (".bin", ".ply")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fail(code: int, kind: str, message: str) -> int:
    print(f"lean3d: error code={code} kind={kind}: {message}", file=sys.stderr)
    return code


def _point_files(directory: Path) -> list:
    files = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in POINT_SUFFIXES
    )
    if not files:
        raise ParameterError(f"no .bin/.ply point files in {directory}")
    return files


def _load_model(path) -> LogitTableModel:
    return LogitTableModel.load(path) if path else LogitTableModel()


def _config(args, model: LogitTableModel) -> codec.CodecConfig:
    return codec.CodecConfig(
        pos_q=args.posq,
        split_override=getattr(args, "split", None),
        depth_override=getattr(args, "depth", None),
        model=model,
    )


def _cmd_fit(args) -> int:
    files = _point_files(Path(args.in_path))
    pyramids = []
    splits = []
    for path in files:
        cloud = geometry.quantize(geometry.load_points(path), args.posq)
        pyr = hierarchy.build_pyramid(cloud.voxels, hierarchy.default_depth(cloud.voxels))
        pyramids.append(pyr)
        splits.append(
            args.split
            if args.split is not None
            else hierarchy.select_split_depth(pyr)
        )
    model = fit_table(pyramids, splits)
    model.save(args.out)
    print(
        f"fitted {len(model.table_s0)} s0 and {len(model.table_s1)} s1 contexts "
        f"from {len(files)} frames -> {args.out}"
    )
    return EXIT_OK


def _cmd_encode(args) -> int:
    model = _load_model(args.model)
    points = geometry.load_points(args.in_path)
    data = codec.encode_frame(points, _config(args, model))
    Path(args.out).write_bytes(data)
    print(f"{args.in_path}: {len(points)} points -> {len(data)} bytes ({args.out})")
    return EXIT_OK


def _cmd_decode(args) -> int:
    model = _load_model(args.model)
    data = Path(args.in_path).read_bytes()
    cloud = codec.decode_frame(data, model)
    points = geometry.dequantize(cloud.voxels, cloud.q, center=args.center)
    geometry.save_points(args.out, points)
    print(f"{args.in_path}: {len(cloud)} voxels -> {args.out}")
    return EXIT_OK


def _cmd_roundtrip(args) -> int:
    model = _load_model(args.model)
    cfg = _config(args, model)
    files = _point_files(Path(args.in_path))
    rows = []
    all_ok = True
    print("frame\tvoxels\ttotal_bytes\tshallow_bytes\tdeep_bytes\tlossless")
    for path in files:
        points = geometry.load_points(path)
        expected = geometry.quantize(points, args.posq)
        packet = codec.encode_frame_packet(points, cfg)
        data = serialize_frame(packet)
        decoded = codec.decode_frame(data, model)
        ok = np.array_equal(decoded.voxels, expected.voxels)
        all_ok &= ok
        sizes = codec.packet_stream_sizes(packet)
        row = {
            "frame": path.name,
            "voxels": len(expected),
            "total_bytes": len(data),
            "shallow_bytes": sizes["shallow_bytes"],
            "deep_bytes": sizes["deep_bytes"],
            "lossless": ok,
        }
        rows.append(row)
        print(
            f"{row['frame']}\t{row['voxels']}\t{row['total_bytes']}\t"
            f"{row['shallow_bytes']}\t{row['deep_bytes']}\t{str(ok).lower()}"
        )
    if args.report:
        out_dir = Path(args.report)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "roundtrip.csv"
        with csv_path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        report.save_roundtrip_figure(
            [r["frame"] for r in rows],
            [r["shallow_bytes"] for r in rows],
            [r["deep_bytes"] for r in rows],
            out_dir / "roundtrip_size_split.png",
        )
        print(f"report written to {out_dir}")
    if not all_ok:
        return _fail(EXIT_LOSSLESS, "lossless", "at least one frame failed the lossless check")
    return EXIT_OK


def _cmd_stats(args) -> int:
    data = Path(args.in_path).read_bytes()
    packet = parse_frame(data)
    sizes = codec.packet_stream_sizes(packet)
    print(f"file:           {args.in_path}")
    print(f"packet bytes:   {len(data)}")
    print(f"posQ:           {packet.pos_q}")
    print(f"voxels (N):     {packet.n_points}")
    print(f"depths (L):     {packet.depths}")
    print(f"shallow_D:      {packet.shallow_d}")
    print(f"n_streams:      {packet.n_streams}")
    print(f"base nodes:     {len(packet.base_coords)}")
    for name in ("metadata_bytes", "base_bytes", "shallow_bytes", "deep_bytes"):
        print(f"{name + ':':<16}{sizes[name]}")
    bpp = 8.0 * len(data) / packet.n_points if packet.n_points else float("nan")
    print(f"bits per point: {bpp:.3f}")
    return EXIT_OK


def _cmd_split_depth(args) -> int:
    cloud = geometry.quantize(geometry.load_points(args.in_path), args.posq)
    pyr = hierarchy.build_pyramid(cloud.voxels, hierarchy.default_depth(cloud.voxels))
    fractions = [hierarchy.unary_fraction(lvl) for lvl in pyr.levels]
    ds = hierarchy.select_split_depth(pyr, args.threshold)
    print("level\tnodes\tunary_fraction")
    for d, (lvl, frac) in enumerate(zip(pyr.levels, fractions)):
        print(f"{d}\t{len(lvl)}\t{frac:.4f}")
    print(f"selected split depth D_s = {ds} (threshold {args.threshold:g})")
    if args.figure:
        path = report.save_split_depth_figure(fractions, ds, args.threshold, args.figure)
        print(f"figure written to {path}")
    return EXIT_OK


def _capture_trace(args) -> list:
    model = _load_model(args.model)
    cfg = _config(args, model)
    trace = []
    for path in _point_files(Path(args.frames)):
        points = geometry.load_points(path)
        t0 = time.perf_counter()
        data = codec.encode_frame(points, cfg)
        t1 = time.perf_counter()
        codec.decode_frame(data, model)
        t2 = time.perf_counter()
        trace.append(streamsim.TraceRecord(t1 - t0, len(data), t2 - t1))
    return trace


def _cmd_simulate(args) -> int:
    if bool(args.trace) == bool(args.frames):
        raise ParameterError("pass exactly one of --trace or --frames")
    trace = streamsim.load_trace(args.trace) if args.trace else _capture_trace(args)
    if args.grid:
        bws_mbps = [float(v) for v in args.grid.split(",")]
    else:
        bws_mbps = [args.bandwidth_mbps]
    if any(b <= 0 for b in bws_mbps):
        raise ParameterError("bandwidth values must be positive")
    # --bandwidth-mbps is megabits per second on the wire
    grid = [(mbps * 1e6 / 8.0, None) for mbps in bws_mbps]
    grid = [(b, streamsim.simulate(trace, b, args.arrival_period_ms / 1e3)) for b, _ in grid]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "bandwidth_mbps",
                "frame",
                "latency_ms",
                "mean_latency_ms",
                "median_latency_ms",
                "p95_latency_ms",
                "throughput_fps",
                "backlog_slope_ms_per_frame",
                "backlog",
            ]
        )
        for (b, res), mbps in zip(grid, bws_mbps):
            for i, lat in enumerate(res.latency):
                writer.writerow([mbps, i, f"{lat * 1e3:.6f}", "", "", "", "", "", ""])
            s = streamsim.summarize(res)
            writer.writerow(
                [
                    mbps,
                    "summary",
                    "",
                    f"{s['mean_latency_s'] * 1e3:.6f}",
                    f"{s['median_latency_s'] * 1e3:.6f}",
                    f"{s['p95_latency_s'] * 1e3:.6f}",
                    f"{s['throughput_fps']:.6f}",
                    f"{s['backlog_slope_s_per_frame'] * 1e3:.6f}",
                    s["backlog"],
                ]
            )
    print(f"results written to {out}")
    for (b, res), mbps in zip(grid, bws_mbps):
        s = streamsim.summarize(res)
        flag = " BACKLOG" if s["backlog"] else ""
        print(
            f"B={mbps:g} Mbps: mean={s['mean_latency_s'] * 1e3:.3f} ms "
            f"p95={s['p95_latency_s'] * 1e3:.3f} ms "
            f"throughput={s['throughput_fps']:.2f} fps{flag}"
        )
    if not args.no_figures:
        for path in report.save_simulation_figures(
            [(b, res) for b, res in grid], out
        ):
            print(f"figure written to {path}")
    return EXIT_OK


def _cmd_vectors(args) -> int:
    for path in vectors.write_vectors(args.out):
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    model = _load_model(args.model)
    cfg = _config(args, model)
    stages = {
        "pyramid build (BPA)": 0.0,
        "coordinate generation (BCE)": 0.0,
        "shallow prediction": 0.0,
        "shallow entropy": 0.0,
        "deep compression": 0.0,
    }
    n_frames = 0
    from . import deepcodec, entropy
    from .predictor import predict_s0, predict_s1

    for path in _point_files(Path(args.in_path)):
        cloud = geometry.quantize(geometry.load_points(path), args.posq)
        n_frames += 1
        t0 = time.perf_counter()
        pyr = hierarchy.build_pyramid(cloud.voxels, hierarchy.default_depth(cloud.voxels))
        t1 = time.perf_counter()
        stages["pyramid build (BPA)"] += t1 - t0
        ds = codec.choose_split(cfg, pyr)
        expansions = []
        t0 = time.perf_counter()
        for d in range(1, pyr.depth):
            expansions.append(hierarchy.bce_expand(pyr.levels[d - 1]))
        t1 = time.perf_counter()
        stages["coordinate generation (BCE)"] += t1 - t0
        for d in range(1, ds):
            level = pyr.levels[d]
            parent = pyr.levels[d - 1]
            _, parent_idx, ks = expansions[d - 1]
            t0 = time.perf_counter()
            from .predictor import NodeContext

            ctxs = [
                NodeContext(d, int(ks[i]), int(parent.occ[parent_idx[i]]))
                for i in range(len(level))
            ]
            s0 = (level.occ & 0xF).tolist()
            cdfs0 = [entropy.logits_to_cdf(predict_s0(model, c)) for c in ctxs]
            cdfs1 = [
                entropy.logits_to_cdf(predict_s1(model, c, s))
                for c, s in zip(ctxs, s0)
            ]
            t1 = time.perf_counter()
            stages["shallow prediction"] += t1 - t0
            t0 = time.perf_counter()
            entropy.rans_encode(s0, cdfs0)
            entropy.rans_encode((level.occ >> 4).tolist(), cdfs1)
            t1 = time.perf_counter()
            stages["shallow entropy"] += t1 - t0
        t0 = time.perf_counter()
        for d in range(ds, pyr.depth):
            deepcodec.encode_deep_level(pyr.levels[d])
        t1 = time.perf_counter()
        stages["deep compression"] += t1 - t0
    print(f"per-stage encode timing over {n_frames} frames (ms/frame):")
    for name, total in stages.items():
        print(f"  {name:<30}{total / n_frames * 1e3:10.3f}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="lean3d", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        return p

    p = add("fit", _cmd_fit, help="fit a logit table model from a frame directory")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--posq", type=int, required=True)
    p.add_argument("--split", type=int, default=None)
    p.add_argument("--out", required=True)

    p = add("encode", _cmd_encode, help="encode one point file to a .l3d frame")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--posq", type=int, required=True)
    p.add_argument("--split", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--out", required=True)

    p = add("decode", _cmd_decode, help="decode a .l3d frame to points")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--center", action="store_true", help="voxel-center dequantization")
    p.add_argument("--out", required=True)

    p = add("roundtrip", _cmd_roundtrip, help="encode+decode a directory and verify losslessness")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--posq", type=int, required=True)
    p.add_argument("--split", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--report", default=None, help="directory for CSV + figures")

    p = add("stats", _cmd_stats, help="dump the header and per-stream sizes of a frame")
    p.add_argument("--in", dest="in_path", required=True)

    p = add("split-depth", _cmd_split_depth, help="per-level unary fractions and chosen D_s")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--posq", type=int, required=True)
    p.add_argument("--threshold", type=float, default=0.6)
    p.add_argument("--figure", default=None, help="optional PNG output path")

    p = add("simulate", _cmd_simulate, help="FCFS bandwidth-limited streaming simulation")
    p.add_argument("--trace", default=None, help="trace CSV (t_enc_ms,bytes,t_dec_ms)")
    p.add_argument("--frames", default=None, help="capture a live trace from this frame directory")
    p.add_argument("--model", default=None)
    p.add_argument("--posq", type=int, default=1)
    p.add_argument("--bandwidth-mbps", type=float, default=100.0)
    p.add_argument("--grid", default=None, help="comma-separated bandwidth list (Mbps)")
    p.add_argument("--arrival-period-ms", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")

    p = add("vectors", _cmd_vectors, help="write entropy conformance vectors")
    p.add_argument("--out", required=True)

    p = add("bench", _cmd_bench, help="per-stage encode timing over a frame directory")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--posq", type=int, default=1)
    p.add_argument("--split", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except ParameterError as exc:
        return _fail(EXIT_USAGE, "parameter", str(exc))
    except IntegrityError as exc:
        return _fail(EXIT_INTEGRITY, "integrity", str(exc))
    except (FormatError, CorruptStreamError, InputError) as exc:
        return _fail(EXIT_IO, "format", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))


if __name__ == "__main__":
    sys.exit(main())
