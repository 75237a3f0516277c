"""LEAN-3D: dual shallow/deep point-cloud geometry codec with a
bit-exact rANS entropy path and a trace-driven streaming simulator."""

from .codec import CodecConfig, decode_frame, encode_frame
from .geometry import QuantizedCloud, dequantize, load_points, quantize
from .predictor import LogitTableModel, fit_table

__all__ = [
    "CodecConfig",
    "LogitTableModel",
    "QuantizedCloud",
    "decode_frame",
    "dequantize",
    "encode_frame",
    "fit_table",
    "load_points",
    "quantize",
]

__version__ = "0.1.0"
