"""Preprocessing: encoding, weather downsampling, normalization, splitting."""
