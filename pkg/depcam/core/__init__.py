"""Numerical core: the exponential-family model, DPP prior, manifold step and EM engine."""
