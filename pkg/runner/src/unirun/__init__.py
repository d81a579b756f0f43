"""Unit-test runner shim speaking the JSON report protocol."""

from .shim import main, qualified_name, run

__all__ = ["main", "qualified_name", "run"]
__version__ = "0.1.0"
