"""ADHDP attitude-control training with loss-landscape and TD diagnostics."""

__version__ = "0.1.0"
