"""Minimum-identifier flooding with corrections, spanning trees and termination detection."""

from keyflood.engine import (
    BASELINE,
    MESSAGE_TERMINATING,
    PROCESSOR_TERMINATING,
    Trace,
    delays,
    extract_min,
    extract_spanning_tree,
    leader_flag,
    run,
)
from keyflood.generate import ExperimentConfig, generate
from keyflood.keys import decode_key, encode_key
from keyflood.network import Network

__version__ = "0.1.0"

__all__ = [
    "BASELINE", "MESSAGE_TERMINATING", "PROCESSOR_TERMINATING", "ExperimentConfig", "Network",
    "Trace", "decode_key", "delays", "encode_key", "extract_min", "extract_spanning_tree",
    "generate", "leader_flag", "run",
]
