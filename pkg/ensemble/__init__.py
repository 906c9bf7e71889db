"""Generalized ensemble (GEM): simplex-constrained weights over base models."""
