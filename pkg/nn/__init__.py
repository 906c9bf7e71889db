"""Reverse-mode differentiation, layers, loss and optimizer."""
