"""Command-line front end and the batch experiments behind it."""

from uwdepth.cli.commands import (
    ExperimentResult,
    cmd_alpha_sweep,
    cmd_augment_batch,
    cmd_frame_gap,
    cmd_loss,
    cmd_metrics,
    cmd_synth,
    cmd_ulap_corr,
)
from uwdepth.cli.manifest import FrameRecord, SequenceManifest

__all__ = [
    "ExperimentResult",
    "FrameRecord",
    "SequenceManifest",
    "cmd_alpha_sweep",
    "cmd_augment_batch",
    "cmd_frame_gap",
    "cmd_loss",
    "cmd_metrics",
    "cmd_synth",
    "cmd_ulap_corr",
]
