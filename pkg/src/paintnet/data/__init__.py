"""Data handling: deterministic RNG, image ingestion, dataset manifests."""

from .rng import Rng

__all__ = ["Rng"]
