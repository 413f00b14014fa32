"""mathtab: word problems in, verified table-reasoning benchmarks out."""

__version__ = "0.1.0"
