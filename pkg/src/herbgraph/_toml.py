"""TOML reader: stdlib on 3.11+, the tomli backport before that."""

from __future__ import annotations

try:
    from tomllib import loads
except ModuleNotFoundError:  # Python 3.10
    from tomli import loads

__all__ = ["loads"]
