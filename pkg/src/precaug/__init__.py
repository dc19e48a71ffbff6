"""Precision-matrix estimation with diagonal loading and data augmentation,
with data-only estimates of the quadratic error."""

__version__ = "0.1.0"
