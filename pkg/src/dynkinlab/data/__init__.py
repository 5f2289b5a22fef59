"""Shared dataclasses, run configuration and export writers."""
