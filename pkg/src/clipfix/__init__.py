"""Pilotless compressed-sensing clipping mitigation for OFDM receivers."""

from . import channel, ofdm, pipeline, qam, recovery, reliability, selection, stats
from .pipeline import LinkParams, ReceiverConfig, run_receiver, run_trial

__version__ = "0.1.0"

__all__ = [
    "channel", "ofdm", "pipeline", "qam", "recovery", "reliability", "selection", "stats",
    "LinkParams", "ReceiverConfig", "run_receiver", "run_trial",
]
