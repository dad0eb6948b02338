"""Verification workbench for obviously strategyproof mechanisms."""

__version__ = "0.1.0"
