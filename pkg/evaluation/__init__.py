"""Metrics and regional error reports."""
