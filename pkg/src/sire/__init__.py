"""Compiler and deterministic distributed-machine simulator for an occam-style language with servers."""

__version__ = "0.1.0"
