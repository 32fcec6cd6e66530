"""Malware family attribution from hybrid analysis reports and binary images."""

__version__ = "0.1.0"
