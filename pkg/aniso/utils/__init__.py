"""Logging, output formatting and configuration helpers."""
