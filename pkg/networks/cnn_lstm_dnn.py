"""
CNN-LSTM-DNN: the CNN-DNN with an LSTM over the convolution outputs.

The seven streams keep their time axis and are stacked as channels,
giving a (steps, 7 * filters) sequence. The LSTM's final hidden state
takes the place of the flattened CNN features.
"""
from typing import Optional

import numpy as np

from core.constants import WEATHER_VARIABLES
from networks.base import ArchitectureMetadata, YieldNetwork
from nn.layers import Conv1D, Dense, LayerSpec, concat, dropout
from nn.recurrent import LSTM
from nn.tensor import Tensor


class CNNLSTMDNN(YieldNetwork):
    """Convolutional weather streams, LSTM over time, dense head."""

    def get_metadata(self) -> ArchitectureMetadata:
        return ArchitectureMetadata(
            id="CNN_LSTM_DNN",
            name="cnn-lstm-dnn",
            version="1.0.0",
            description="Per-variable 1-D CNN streams + LSTM + one-hot dense branch + dense head",
            dropout_placements=("after_cnn", "at_lstm", "after_others_dense", "final"),
            requires_lstm=True,
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

        channels = len(WEATHER_VARIABLES) * config.conv_stack[-1].filters
        self.lstm = self._add(LSTM(LayerSpec("lstm", "lstm", units=config.lstm_units),
                                   channels, rng))
        self.others_dense = self._add(Dense(
            LayerSpec("dense", "others_dense", units=config.others_units), self.n_others, rng))

        width = config.lstm_units + config.others_units
        self.head = []
        for k, units in enumerate(config.head_units):
            spec = LayerSpec("dense", f"head{k}", units=units, activation="relu")
            self.head.append(self._add(Dense(spec, width, rng)))
            width = units
        self._add(Dense(LayerSpec("dense", "output", units=1), width, rng))

    @property
    def sequence_length(self) -> int:
        return self.config.conv_lengths()[-1]

    def forward(self, inputs: np.ndarray, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> Tensor:
        drop = self.config.dropout
        others, weather = self._split_inputs(inputs)

        features = []
        for stream, h in zip(self.streams, weather):
            for conv in stream:
                h = conv(h)
            features.append(h)
        sequence = dropout(concat(features, axis=-1), drop["after_cnn"], training, rng)
        state = dropout(self.lstm(sequence), drop["at_lstm"], training, rng)
        other = dropout(self.others_dense(others), drop["after_others_dense"], training, rng)

        h = concat([state, other])
        for layer in self.head:
            h = layer(h)
        h = dropout(h, drop["final"], training, rng)
        return self.output_layer(h)
