"""e2eve: self-supervised targeted image editing.

Synthesizes edit training data from unlabeled images, trains a two-stage
(quantized autoencoder + causal transformer) conditional generator, samples
edits with configurable decoding policies and driver-similarity filtering,
and evaluates naturalness / faithfulness / locality / diversity against
trivial baselines.
"""

__version__ = "0.1.0"
