"""Jeopardy-style CTF game core with full event logging and built-in analytics."""

__version__ = "0.1.0"
