"""Waterfall-style multi-agent code generation pipelines and their evaluation."""

__version__ = "0.1.0"
