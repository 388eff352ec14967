"""Single-stage convolutional spiking network trained with STDP."""

from .coding import SpikeList, latency_encode
from .dog import dog_filter, dog_kernel, dog_response
from .layer import (
    EpochStats,
    LayerState,
    Winner,
    extract_features,
    feature_map,
    if_conv_forward,
    init_layer,
    load_layer,
    pool_and_flatten,
    save_layer,
    silent_adapt,
    stdp_update,
    threshold_adapt,
    train_layer,
)
from .params import DoGParams, LayerConfig, StdpParams, ThresholdParams

__all__ = [
    "DoGParams",
    "EpochStats",
    "LayerConfig",
    "LayerState",
    "SpikeList",
    "StdpParams",
    "ThresholdParams",
    "Winner",
    "dog_filter",
    "dog_kernel",
    "dog_response",
    "extract_features",
    "feature_map",
    "if_conv_forward",
    "init_layer",
    "latency_encode",
    "load_layer",
    "pool_and_flatten",
    "save_layer",
    "silent_adapt",
    "stdp_update",
    "threshold_adapt",
    "train_layer",
]
