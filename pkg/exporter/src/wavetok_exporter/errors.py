"""Exporter error type."""


class ExportError(RuntimeError):
    """A job cannot be completed: bad checkpoint, bad labels, shape drift."""
