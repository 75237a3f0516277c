"""Trace-driven three-stage FCFS streaming pipeline simulator.

Each frame passes encoder -> bandwidth-limited link -> decoder; every
stage serves frames in order, and the link service time is
payload_bytes / bandwidth. By default the source is fully backlogged
(frame i available at time 0); an arrival period models sensor-rate
capture.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import FormatError, ParameterError

BACKLOG_SLOPE_THRESHOLD = 1e-3  # s/frame over the trailing half


class TraceRecord(NamedTuple):
    t_enc: float  # seconds
    payload_bytes: float
    t_dec: float  # seconds


@dataclass
class SimResult:
    enc_start: np.ndarray
    enc_finish: np.ndarray
    net_start: np.ndarray
    net_finish: np.ndarray
    dec_start: np.ndarray
    dec_finish: np.ndarray
    latency: np.ndarray  # dec_finish - enc_start, per frame
    mean_latency: float
    throughput: float  # frames/s completed at the decoder
    backlog_slope: float  # latency growth, s/frame, trailing half
    backlog: bool


def _trailing_slope(latency: np.ndarray) -> float:
    tail = latency[len(latency) // 2 :]
    if len(tail) < 2:
        return 0.0
    x = np.arange(len(tail), dtype=np.float64)
    slope, _ = np.polyfit(x, tail, 1)
    return float(slope)


def simulate(trace, bandwidth: float, arrival_period: float = 0.0) -> SimResult:
    """Replay a trace through the FCFS pipeline at the given bandwidth
    (bytes/second)."""
    if not bandwidth > 0:
        raise ParameterError(f"bandwidth must be positive, got {bandwidth}")
    trace = [TraceRecord(*t) for t in trace]
    if not trace:
        raise ParameterError("trace is empty")
    n = len(trace)
    enc_start = np.empty(n)
    enc_finish = np.empty(n)
    net_start = np.empty(n)
    net_finish = np.empty(n)
    dec_start = np.empty(n)
    dec_finish = np.empty(n)
    for i, rec in enumerate(trace):
        avail = i * arrival_period
        enc_start[i] = max(avail, enc_finish[i - 1]) if i else avail
        enc_finish[i] = enc_start[i] + rec.t_enc
        net_start[i] = max(enc_finish[i], net_finish[i - 1]) if i else enc_finish[i]
        net_finish[i] = net_start[i] + rec.payload_bytes / bandwidth
        dec_start[i] = max(net_finish[i], dec_finish[i - 1]) if i else net_finish[i]
        dec_finish[i] = dec_start[i] + rec.t_dec
    latency = dec_finish - enc_start
    slope = _trailing_slope(latency)
    return SimResult(
        enc_start=enc_start,
        enc_finish=enc_finish,
        net_start=net_start,
        net_finish=net_finish,
        dec_start=dec_start,
        dec_finish=dec_finish,
        latency=latency,
        mean_latency=float(latency.mean()),
        throughput=n / float(dec_finish[-1]) if dec_finish[-1] > 0 else float("inf"),
        backlog_slope=slope,
        backlog=slope > BACKLOG_SLOPE_THRESHOLD,
    )


def summarize(result: SimResult) -> dict:
    """Stats row: mean/median/p95 latency, throughput, backlog slope."""
    lat = result.latency
    return {
        "mean_latency_s": float(lat.mean()),
        "median_latency_s": float(np.median(lat)),
        "p95_latency_s": float(np.percentile(lat, 95)),
        "throughput_fps": result.throughput,
        "backlog_slope_s_per_frame": result.backlog_slope,
        "backlog": result.backlog,
    }


def load_trace(path) -> list:
    """Read a trace CSV with columns t_enc_ms, bytes, t_dec_ms."""
    records = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {
            "t_enc_ms",
            "bytes",
            "t_dec_ms",
        } <= set(reader.fieldnames):
            raise FormatError(f"{path}: expected columns t_enc_ms, bytes, t_dec_ms")
        for i, row in enumerate(reader):
            try:
                records.append(
                    TraceRecord(
                        float(row["t_enc_ms"]) / 1e3,
                        float(row["bytes"]),
                        float(row["t_dec_ms"]) / 1e3,
                    )
                )
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: malformed trace row {i + 1}") from exc
    return records


def save_trace(path, trace) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_enc_ms", "bytes", "t_dec_ms"])
        for rec in trace:
            writer.writerow([rec.t_enc * 1e3, rec.payload_bytes, rec.t_dec * 1e3])
