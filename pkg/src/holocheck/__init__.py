"""Hologram verification for identity-document videos.

Video-level originals-vs-attack decisions from frame embeddings learned with
weak labels, plus a pixel-statistic baseline detector and attribution tools.
"""

__version__ = "0.1.0"
