"""Latent-to-latent locomotion policy training on toy planar legged robots."""

__version__ = "0.1.0"
