"""Multicast routing over mobile ad hoc networks: mobility models, protocols and experiment harness."""

__version__ = "0.1.0"
