"""Interface package for the visual_ctr command line."""

__all__ = ["cli"]
