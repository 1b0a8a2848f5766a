"""Decentralized dual averaging (DDA, ADDA) and baselines for constrained LASSO."""

__version__ = "0.1.0"
