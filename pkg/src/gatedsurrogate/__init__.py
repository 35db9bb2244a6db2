"""Gaussian Process surrogates with uncertainty-gated online optimization."""
