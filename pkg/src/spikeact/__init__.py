"""Spatio-temporal action features from video: optical-flow representations,
temporal fusion, a single-stage convolutional spiking layer trained with
STDP, and a linear SVM read-out."""

from .errors import EmptySequenceError, FormatError, IngestionError, SpikeActError, StageError
from .tensor import Frame, LabeledSequence, load_sequence, read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "EmptySequenceError",
    "FormatError",
    "Frame",
    "IngestionError",
    "LabeledSequence",
    "SpikeActError",
    "StageError",
    "load_sequence",
    "read_tensor",
    "write_tensor",
]
