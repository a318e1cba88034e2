"""Offline EEG braking-intention decoding toolkit.

Pipeline stages: synthetic driving-session generation (`synth`), signal
conditioning and epoching (`preprocess`), three window decoders
(`classifiers`), and the repeated-split sliding-window evaluation protocol
(`evaluation`). `cli` wires them into the `brakesense` command.
"""

from . import classifiers, core, evaluation, preprocess, synth
from .core import (ChannelMontage, ClassLabel, ContinuousRecording, Epoch,
                   EpochSet, Event, EventKind, default_montage, make_rng,
                   read_epochset, split_seed, write_epochset)

__version__ = "0.1.0"

__all__ = [
    "classifiers",
    "core",
    "evaluation",
    "preprocess",
    "synth",
    "ChannelMontage",
    "ClassLabel",
    "ContinuousRecording",
    "Epoch",
    "EpochSet",
    "Event",
    "EventKind",
    "default_montage",
    "make_rng",
    "read_epochset",
    "split_seed",
    "write_epochset",
    "__version__",
]
