"""Feature-stream files, the synthetic shift benchmark and the toy base detector."""

from .streams import (
    FeatureRecord,
    StreamData,
    StreamHeader,
    read_csv_stream,
    read_stream,
    read_weights,
    iter_stream,
    write_csv_stream,
    write_stream,
    write_weights,
)
from .synthetic import SynthConfig, generate_synthetic
from .detector import BaseDetector, train_base_detector

__all__ = [
    "BaseDetector",
    "FeatureRecord",
    "StreamData",
    "StreamHeader",
    "SynthConfig",
    "generate_synthetic",
    "iter_stream",
    "read_csv_stream",
    "read_stream",
    "read_weights",
    "train_base_detector",
    "write_csv_stream",
    "write_stream",
    "write_weights",
]
