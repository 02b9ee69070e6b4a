"""Figure rendering for loop-detector simulation exports."""

from .cli import KINDS, main, render
from .schema import SchemaError, load_belief, load_summary, load_trace

__all__ = [
    "KINDS",
    "SchemaError",
    "load_belief",
    "load_summary",
    "load_trace",
    "main",
    "render",
]

__version__ = "0.1.0"
