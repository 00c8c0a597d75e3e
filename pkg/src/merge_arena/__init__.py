"""Self-play actor-critic training and evaluation for highway on-ramp merging."""

__version__ = "0.1.0"
