"""Yield network architectures, registry and trainer."""
