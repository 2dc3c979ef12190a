"""Modular latent-space deep Q-learning for steering control."""

__version__ = "0.1.0"
