"""Configuration and logging for the visual CTR pipeline."""
