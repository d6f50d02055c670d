"""asln - asymptotic linearization of nonlinear blind source separation."""

__version__ = "1.0.0"
__author__ = "asln"
