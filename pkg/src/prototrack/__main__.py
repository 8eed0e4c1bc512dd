"""Allows running the CLI as `python -m prototrack`."""

from .cli import entry

entry()
