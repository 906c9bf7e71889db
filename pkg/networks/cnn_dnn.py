"""
CNN-DNN: one convolution stream per weather variable plus a linear
one-hot branch, merged into a three-layer ReLU head.

    weather[v] (53 x 1) -> conv stack -> flatten, for each of the 7 variables
    concat(streams) -> dense + ReLU -> dropout
    one-hot block -> dense (linear) -> dropout
    concat(both) -> 3 x (dense + ReLU) -> dropout -> dense(1)
"""
from typing import Optional

import numpy as np

from core.constants import WEATHER_VARIABLES
from networks.base import ArchitectureMetadata, YieldNetwork
from nn.layers import Conv1D, Dense, LayerSpec, concat, dropout
from nn.tensor import Tensor


class CNNDNN(YieldNetwork):
    """Convolutional weather streams with a dense head."""

    def get_metadata(self) -> ArchitectureMetadata:
        return ArchitectureMetadata(
            id="CNN_DNN",
            name="cnn-dnn",
            version="1.0.0",
            description="Per-variable 1-D CNN streams + one-hot dense branch + dense head",
            dropout_placements=("after_cnn_dense", "after_others_dense", "final"),
        )

    def _build(self, rng: np.random.Generator):
        config = self.config
        self.streams = []
        for variable in WEATHER_VARIABLES:
            layers, channels = [], 1
            for k, conv in enumerate(config.conv_stack):
                spec = LayerSpec("conv1d", f"{variable}.conv{k}", filters=conv.filters,
                                 kernel=conv.kernel, stride=conv.stride, activation="relu")
                layers.append(self._add(Conv1D(spec, channels, rng)))
                channels = conv.filters
            self.streams.append(layers)

        flat = len(WEATHER_VARIABLES) * config.conv_lengths()[-1] * config.conv_stack[-1].filters
        self.cnn_dense = self._add(Dense(
            LayerSpec("dense", "cnn_dense", units=config.cnn_dense_units, activation="relu"),
            flat, rng))
        self.others_dense = self._add(Dense(
            LayerSpec("dense", "others_dense", units=config.others_units), self.n_others, rng))

        width = config.cnn_dense_units + config.others_units
        self.head = []
        for k, units in enumerate(config.head_units):
            spec = LayerSpec("dense", f"head{k}", units=units, activation="relu")
            self.head.append(self._add(Dense(spec, width, rng)))
            width = units
        self._add(Dense(LayerSpec("dense", "output", units=1), width, rng))

    def forward(self, inputs: np.ndarray, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> Tensor:
        drop = self.config.dropout
        others, weather = self._split_inputs(inputs)
        batch = others.shape[0]

        features = []
        for stream, h in zip(self.streams, weather):
            for conv in stream:
                h = conv(h)
            features.append(h.reshape(batch, -1))
        cnn = dropout(self.cnn_dense(concat(features)), drop["after_cnn_dense"], training, rng)
        other = dropout(self.others_dense(others), drop["after_others_dense"], training, rng)

        h = concat([cnn, other])
        for layer in self.head:
            h = layer(h)
        h = dropout(h, drop["final"], training, rng)
        return self.output_layer(h)
