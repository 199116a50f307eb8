"""Shared helpers: errors, seeded streams and file I/O."""
