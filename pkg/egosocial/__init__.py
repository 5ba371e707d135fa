# Copyright 2024 egosocial developers

__all__ = ("ingest", "signals", "lstm", "augment", "bundle", "cluster", "patterns", "synth", "exceptions", "pprint", )

__doc__ = """Library for social pattern analysis of egocentric photo-streams."""

__version__ = "1.0.0"
