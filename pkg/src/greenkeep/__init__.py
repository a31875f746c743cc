"""greenkeep: trace-driven simulation and policy learning for
carbon-aware serverless keep-alive management."""

__version__ = "0.1.0"
