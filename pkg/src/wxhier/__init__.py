"""Hierarchical weather-image classifier.

A coarse 3-way model (Rainy / Dusty / Cold) routes each image to a
per-group sub-model that yields one of 11 leaf weather classes plus a
safety level.  Everything below the numpy array layer is implemented
here: Lanczos resampling, normalization, a tensor NN engine with its
training loop, the hierarchical router, and the evaluation tooling.
"""

__version__ = "0.1.0"
