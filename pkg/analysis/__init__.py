"""Permutation importance and genotype-by-environment selection."""
