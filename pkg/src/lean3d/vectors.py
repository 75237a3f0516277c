"""Entropy conformance vectors.

Golden data proving that CDF construction and rANS coding are
bit-reproducible: a CSV of (quantized logits -> 17-entry CDF) records
and a JSON list of (per-position logits, symbols, expected bytes)
triples. Regenerating the files must reproduce them byte-for-byte.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .entropy import logits_to_cdf, rans_encode

CDF_VECTORS_NAME = "cdf_vectors.csv"
RANS_VECTORS_NAME = "rans_vectors.json"

_SEED = 0x1EAD3D


def _pinned_logit_cases():
    zero = [0] * 16
    peak5 = [0] * 16
    peak5[5] = 128
    tie = [0] * 16
    tie[3] = tie[9] = 7
    neg = [-1] * 16
    neg[12] = -32768
    return [zero, peak5, tie, neg]


def cdf_vectors(count: int = 128) -> list:
    """Deterministic (logits, cdf) records; pinned cases first."""
    rng = np.random.default_rng(_SEED)
    cases = _pinned_logit_cases()
    while len(cases) < count:
        cases.append(rng.integers(-(1 << 15), 1 << 15, size=16).tolist())
    return [(z, logits_to_cdf(z)) for z in cases]


def rans_vectors(count: int = 32) -> list:
    """Deterministic (per-position logits, symbols, bytes) triples."""
    rng = np.random.default_rng(_SEED ^ 0xFFFF)
    triples = []
    triples.append(([], [], rans_encode([], [])))
    for _ in range(count - 1):
        n = int(rng.integers(1, 64))
        logit_seq = rng.integers(-512, 512, size=(n, 16)).tolist()
        symbols = rng.integers(0, 16, size=n).tolist()
        cdfs = [logits_to_cdf(z) for z in logit_seq]
        triples.append((logit_seq, symbols, rans_encode(symbols, cdfs)))
    return triples


def write_vectors(out_dir) -> list:
    """Write both vector files into ``out_dir``; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cdf_path = out_dir / CDF_VECTORS_NAME
    with cdf_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"z{i}" for i in range(16)] + [f"cdf{i}" for i in range(17)])
        for z, cdf in cdf_vectors():
            writer.writerow(list(z) + list(cdf))
    rans_path = out_dir / RANS_VECTORS_NAME
    payload = [
        {"logits": logit_seq, "symbols": symbols, "bytes": data.hex()}
        for logit_seq, symbols, data in rans_vectors()
    ]
    rans_path.write_text(json.dumps(payload, indent=1) + "\n")
    return [cdf_path, rans_path]


def read_cdf_vectors(path) -> list:
    records = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            vals = [int(v) for v in row]
            records.append((vals[:16], tuple(vals[16:])))
    return records


def read_rans_vectors(path) -> list:
    payload = json.loads(Path(path).read_text())
    return [
        (rec["logits"], rec["symbols"], bytes.fromhex(rec["bytes"]))
        for rec in payload
    ]
