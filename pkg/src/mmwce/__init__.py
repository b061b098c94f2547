"""Compressive wideband mmWave hybrid-MIMO channel estimation.

Synthetic geometric channels, hybrid pilot measurements, a residual
denoising CNN, and three sparse estimators (SW-OMP, DL-CS-CE and refined
DL-CS-CE) with Monte-Carlo evaluation tooling.
"""
__version__ = "0.1.0"
