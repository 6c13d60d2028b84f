"""Token-aligned contextual embedding exporter for the keyfuse pipeline."""

__version__ = "0.1.0"
